#pragma once

#include <cstddef>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace pairscale::io {

struct CsvRow {
  std::size_t line = 0;  // 1-based source line of the record
  std::vector<std::string> fields;
};

struct CsvTable {
  std::vector<std::string> header;
  std::vector<CsvRow> rows;
};

// RFC 4180 reader: quoted fields, doubled quotes, CRLF. Blank lines skipped.
// Throws ParseError on unterminated quotes or a row whose width differs from
// the header.
CsvTable parse_csv(std::string_view text, const std::string& source_name);
CsvTable read_csv(const std::filesystem::path& path);

// Verifies that the header equals `expected` exactly.
void require_header(const CsvTable& table, const std::vector<std::string>& expected,
                    const std::string& source_name);

std::string csv_escape(std::string_view field);
std::string csv_line(const std::vector<std::string>& fields);

std::string read_file(const std::filesystem::path& path);

// Writes to a sibling temp file and renames over the destination.
void write_file_atomic(const std::filesystem::path& path, std::string_view content);

std::string sha256_hex(std::string_view data);
std::string file_sha256(const std::filesystem::path& path);

// Shortest round-trip decimal representation of a double.
std::string format_double(double value);

}  // namespace pairscale::io
