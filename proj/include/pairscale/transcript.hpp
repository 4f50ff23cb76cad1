#pragma once

#include <filesystem>
#include <fstream>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "pairscale/roster.hpp"

namespace pairscale {

enum class ResolutionKind { Winner, Tie, Unresolved };

// Outcome of one matchup. A Winner names the entity selected in answer to the
// matchup's framed question ("which is more <trait>?"), so for TowardPoleA
// framing the winner is the entity further toward PoleA.
struct Resolution {
  ResolutionKind kind = ResolutionKind::Unresolved;
  std::string winner_id;

  static Resolution winner(std::string id) { return {ResolutionKind::Winner, std::move(id)}; }
  static Resolution tie() { return {ResolutionKind::Tie, {}}; }
  static Resolution unresolved() { return {ResolutionKind::Unresolved, {}}; }

  bool resolved() const { return kind != ResolutionKind::Unresolved; }
  friend bool operator==(const Resolution&, const Resolution&) = default;
};

enum class Source { LlmDirect, CategoryImplied, Replay, Simulated, ManualOverride };

std::string_view source_name(Source s);
Source parse_source(std::string_view name);
std::string_view resolution_kind_name(ResolutionKind k);

struct Transcript {
  MatchupKey key;
  Framing framing = Framing::TowardPoleA;
  std::string prompt;
  std::optional<std::string> raw_response;
  std::optional<std::string> extraction_response;
  Resolution resolution;
  Source source = Source::LlmDirect;
  std::string judge_id;
  std::string timestamp;

  // Entity further toward PoleB, or nullopt for ties/unresolved.
  std::optional<std::string> pole_b_winner() const;
};

nlohmann::ordered_json to_json(const Transcript& t);
Transcript transcript_from_json(const nlohmann::json& j);

// Reads a JSONL transcript log. A final line without a trailing newline that
// fails to parse is treated as an interrupted append and ignored.
std::vector<Transcript> read_transcript_log(const std::filesystem::path& path);

// Append-only JSONL writer; each append writes and flushes one full line.
// Safe to call from several threads.
class TranscriptLog {
 public:
  // Opens for append, truncating any incomplete final line left by a crash.
  explicit TranscriptLog(const std::filesystem::path& path);

  void append(const Transcript& t);
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
  std::ofstream out_;
  std::mutex mutex_;
};

// Replaces Unresolved (or any) resolutions named by the overrides; the
// replaced transcripts get source=ManualOverride.
std::vector<Transcript> apply_overrides(std::vector<Transcript> transcripts,
                                        const Overrides& overrides);

// Sorted by (iteration, pair).
void sort_transcripts(std::vector<Transcript>& transcripts);

std::string utc_timestamp();

}  // namespace pairscale
