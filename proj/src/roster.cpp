#include "pairscale/roster.hpp"

#include <charconv>

#include "pairscale/errors.hpp"
#include "pairscale/io.hpp"

namespace pairscale {

std::string_view category_name(Category c) {
  if (c.pole == Pole::A) return c.strength == Strength::Strong ? "strong_a" : "moderate_a";
  return c.strength == Strength::Strong ? "strong_b" : "moderate_b";
}

std::optional<Category> parse_category(std::string_view name) {
  for (Category c : kAllCategories)
    if (category_name(c) == name) return c;
  return std::nullopt;
}

Pole PoleLabels::resolve(const std::string& caucus_group) const {
  const bool a = pole_a.count(caucus_group) > 0;
  const bool b = pole_b.count(caucus_group) > 0;
  if (a == b) {
    throw ValidationError("caucus_group '" + caucus_group + "' must map to exactly one pole");
  }
  return a ? Pole::A : Pole::B;
}

EntityPair EntityPair::canonical(std::string a, std::string b) {
  if (b < a) std::swap(a, b);
  return EntityPair{std::move(a), std::move(b)};
}

std::string MatchupKey::str() const {
  return pair.first + "|" + pair.second + "#" + std::to_string(iteration);
}

MatchupKey MatchupKey::parse(std::string_view text) {
  const auto bar = text.find('|');
  const auto hash = text.rfind('#');
  if (bar == std::string_view::npos || hash == std::string_view::npos || hash < bar)
    throw ValidationError("malformed matchup key '" + std::string(text) + "'");
  int iteration = 0;
  const auto tail = text.substr(hash + 1);
  auto [ptr, ec] = std::from_chars(tail.data(), tail.data() + tail.size(), iteration);
  if (ec != std::errc() || ptr != tail.data() + tail.size() || iteration < 1)
    throw ValidationError("malformed iteration in matchup key '" + std::string(text) + "'");
  auto a = std::string(text.substr(0, bar));
  auto b = std::string(text.substr(bar + 1, hash - bar - 1));
  if (a.empty() || b.empty() || a == b)
    throw ValidationError("malformed pair in matchup key '" + std::string(text) + "'");
  return MatchupKey{EntityPair::canonical(std::move(a), std::move(b)), iteration};
}

std::string_view framing_name(Framing f) {
  return f == Framing::TowardPoleA ? "toward_pole_a" : "toward_pole_b";
}

Framing parse_framing(std::string_view name) {
  if (name == "toward_pole_a") return Framing::TowardPoleA;
  if (name == "toward_pole_b") return Framing::TowardPoleB;
  throw ValidationError("unknown framing '" + std::string(name) + "'");
}

namespace {

const std::vector<std::string> kRosterHeader{"id", "full_name", "group", "region", "caucus_group"};
const std::vector<std::string> kOverridesHeader{"entity_id", "field", "value", "reason"};

bool valid_id(const std::string& id) {
  if (id.empty()) return false;
  for (char c : id) {
    if (c == '|' || c == '#' || c == ',' || c == '"' || static_cast<unsigned char>(c) <= ' ')
      return false;
  }
  return true;
}

}  // namespace

std::vector<Entity> parse_roster(std::string_view text, const std::string& source_name,
                                 const PoleLabels& labels) {
  const auto table = io::parse_csv(text, source_name);
  if (table.header.empty()) throw ParseError(source_name, 1, "missing header");
  io::require_header(table, kRosterHeader, source_name);

  std::vector<Entity> out;
  std::set<std::string> seen;
  for (const auto& row : table.rows) {
    Entity e{row.fields[0], row.fields[1], row.fields[2], row.fields[3], row.fields[4]};
    if (!valid_id(e.id))
      throw ParseError(source_name, row.line, "invalid id '" + e.id + "'");
    if (e.full_name.empty()) throw ParseError(source_name, row.line, "empty full_name");
    try {
      labels.resolve(e.caucus_group);
    } catch (const ValidationError& err) {
      throw ParseError(source_name, row.line, err.what());
    }
    if (!seen.insert(e.id).second)
      throw ValidationError(source_name + ":" + std::to_string(row.line) + ": duplicate id '" +
                            e.id + "'");
    out.push_back(std::move(e));
  }
  return out;
}

std::vector<Entity> load_roster(const std::filesystem::path& path, const PoleLabels& labels) {
  return parse_roster(io::read_file(path), path.string(), labels);
}

void write_roster(const std::filesystem::path& path, const std::vector<Entity>& entities) {
  std::string text = io::csv_line(kRosterHeader);
  for (const auto& e : entities)
    text += io::csv_line({e.id, e.full_name, e.group, e.region, e.caucus_group});
  io::write_file_atomic(path, text);
}

std::map<std::string, const Entity*> index_by_id(const std::vector<Entity>& entities) {
  std::map<std::string, const Entity*> out;
  for (const auto& e : entities) out.emplace(e.id, &e);
  return out;
}

Overrides parse_overrides(std::string_view text, const std::string& source_name) {
  Overrides out;
  const auto table = io::parse_csv(text, source_name);
  if (table.header.empty()) return out;
  io::require_header(table, kOverridesHeader, source_name);
  for (const auto& row : table.rows) {
    const auto& id = row.fields[0];
    const auto& field = row.fields[1];
    const auto& value = row.fields[2];
    const auto& reason = row.fields[3];
    if (field == "category") {
      auto c = parse_category(value);
      if (!c) throw ParseError(source_name, row.line, "unknown category '" + value + "'");
      out.categories[id] = *c;
    } else if (field == "resolution") {
      MatchupKey key;
      try {
        key = MatchupKey::parse(id);
      } catch (const ValidationError& err) {
        throw ParseError(source_name, row.line, err.what());
      }
      if (value != "tie" && !key.pair.contains(value))
        throw ParseError(source_name, row.line,
                         "resolution '" + value + "' is neither 'tie' nor a member of " + id);
      out.resolutions[key] = Overrides::Entry{value, reason};
    } else {
      throw ParseError(source_name, row.line, "unknown override field '" + field + "'");
    }
  }
  return out;
}

Overrides load_overrides(const std::filesystem::path& path) {
  return parse_overrides(io::read_file(path), path.string());
}

}  // namespace pairscale
