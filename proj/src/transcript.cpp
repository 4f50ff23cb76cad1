#include "pairscale/transcript.hpp"

#include <algorithm>
#include <chrono>
#include <ctime>

#include "pairscale/errors.hpp"
#include "pairscale/io.hpp"

namespace pairscale {

using json = nlohmann::json;

std::string_view source_name(Source s) {
  switch (s) {
    case Source::LlmDirect: return "llm_direct";
    case Source::CategoryImplied: return "category_implied";
    case Source::Replay: return "replay";
    case Source::Simulated: return "simulated";
    case Source::ManualOverride: return "manual_override";
  }
  return "unknown";
}

Source parse_source(std::string_view name) {
  for (Source s : {Source::LlmDirect, Source::CategoryImplied, Source::Replay, Source::Simulated,
                   Source::ManualOverride}) {
    if (source_name(s) == name) return s;
  }
  throw ValidationError("unknown transcript source '" + std::string(name) + "'");
}

std::string_view resolution_kind_name(ResolutionKind k) {
  switch (k) {
    case ResolutionKind::Winner: return "winner";
    case ResolutionKind::Tie: return "tie";
    case ResolutionKind::Unresolved: return "unresolved";
  }
  return "unresolved";
}

std::optional<std::string> Transcript::pole_b_winner() const {
  if (resolution.kind != ResolutionKind::Winner) return std::nullopt;
  if (framing == Framing::TowardPoleB) return resolution.winner_id;
  return key.pair.other(resolution.winner_id);
}

nlohmann::ordered_json to_json(const Transcript& t) {
  nlohmann::ordered_json j;
  j["pair"] = {t.key.pair.first, t.key.pair.second};
  j["iteration"] = t.key.iteration;
  j["framing"] = framing_name(t.framing);
  j["prompt"] = t.prompt;
  j["raw_response"] = t.raw_response ? nlohmann::ordered_json(*t.raw_response) : nullptr;
  j["extraction_response"] =
      t.extraction_response ? nlohmann::ordered_json(*t.extraction_response) : nullptr;
  nlohmann::ordered_json res;
  res["kind"] = resolution_kind_name(t.resolution.kind);
  if (t.resolution.kind == ResolutionKind::Winner) res["winner_id"] = t.resolution.winner_id;
  j["resolution"] = res;
  j["source"] = source_name(t.source);
  j["judge_id"] = t.judge_id;
  j["timestamp"] = t.timestamp;
  return j;
}

Transcript transcript_from_json(const json& j) {
  Transcript t;
  const auto& pair = j.at("pair");
  if (!pair.is_array() || pair.size() != 2) throw ValidationError("pair must be a 2-element array");
  t.key.pair = EntityPair::canonical(pair[0].get<std::string>(), pair[1].get<std::string>());
  t.key.iteration = j.at("iteration").get<int>();
  t.framing = parse_framing(j.at("framing").get<std::string>());
  t.prompt = j.value("prompt", std::string{});
  if (j.contains("raw_response") && !j["raw_response"].is_null())
    t.raw_response = j["raw_response"].get<std::string>();
  if (j.contains("extraction_response") && !j["extraction_response"].is_null())
    t.extraction_response = j["extraction_response"].get<std::string>();
  const auto& res = j.at("resolution");
  const auto kind = res.at("kind").get<std::string>();
  if (kind == "winner") {
    t.resolution = Resolution::winner(res.at("winner_id").get<std::string>());
    if (!t.key.pair.contains(t.resolution.winner_id))
      throw ValidationError("winner '" + t.resolution.winner_id + "' not in pair " + t.key.str());
  } else if (kind == "tie") {
    t.resolution = Resolution::tie();
  } else if (kind == "unresolved") {
    t.resolution = Resolution::unresolved();
  } else {
    throw ValidationError("unknown resolution kind '" + kind + "'");
  }
  t.source = parse_source(j.at("source").get<std::string>());
  t.judge_id = j.value("judge_id", std::string{});
  t.timestamp = j.value("timestamp", std::string{});
  return t;
}

std::vector<Transcript> read_transcript_log(const std::filesystem::path& path) {
  std::vector<Transcript> out;
  if (!std::filesystem::exists(path)) return out;
  const std::string text = io::read_file(path);
  std::size_t pos = 0;
  std::size_t line = 0;
  while (pos < text.size()) {
    ++line;
    const auto nl = text.find('\n', pos);
    const bool complete = nl != std::string::npos;
    const std::string_view row(text.data() + pos, (complete ? nl : text.size()) - pos);
    pos = complete ? nl + 1 : text.size();
    if (row.find_first_not_of(" \t\r") == std::string_view::npos) continue;
    try {
      out.push_back(transcript_from_json(json::parse(row)));
    } catch (const std::exception& err) {
      if (!complete) break;  // interrupted append
      throw ParseError(path.string(), line, err.what());
    }
  }
  return out;
}

TranscriptLog::TranscriptLog(const std::filesystem::path& path) : path_(path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  if (std::filesystem::exists(path)) {
    const std::string text = io::read_file(path);
    if (!text.empty() && text.back() != '\n') {
      const auto nl = text.rfind('\n');
      std::filesystem::resize_file(path, nl == std::string::npos ? 0 : nl + 1);
    }
  }
  out_.open(path, std::ios::binary | std::ios::app);
  if (!out_) throw Error("cannot open transcript log " + path.string());
}

void TranscriptLog::append(const Transcript& t) {
  const std::string line = to_json(t).dump() + "\n";
  std::lock_guard lock(mutex_);
  out_.write(line.data(), static_cast<std::streamsize>(line.size()));
  out_.flush();
  if (!out_) throw Error("append failed for " + path_.string());
}

std::vector<Transcript> apply_overrides(std::vector<Transcript> transcripts,
                                        const Overrides& overrides) {
  for (auto& t : transcripts) {
    auto it = overrides.resolutions.find(t.key);
    if (it == overrides.resolutions.end()) continue;
    const auto& value = it->second.value;
    if (value != "tie" && !t.key.pair.contains(value))
      throw ValidationError("override for " + t.key.str() + " names '" + value +
                            "', which is not in the matchup");
    t.resolution = value == "tie" ? Resolution::tie() : Resolution::winner(value);
    t.source = Source::ManualOverride;
  }
  return transcripts;
}

void sort_transcripts(std::vector<Transcript>& transcripts) {
  std::stable_sort(transcripts.begin(), transcripts.end(), [](const auto& a, const auto& b) {
    if (a.key.iteration != b.key.iteration) return a.key.iteration < b.key.iteration;
    return a.key.pair < b.key.pair;
  });
}

std::string utc_timestamp() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

}  // namespace pairscale
