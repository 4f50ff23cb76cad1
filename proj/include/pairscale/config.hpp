#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "pairscale/estimator.hpp"
#include "pairscale/llm_judge.hpp"
#include "pairscale/roster.hpp"

namespace pairscale {

enum class JudgeKind { Llm, Replay, Simulated };

std::string_view judge_kind_name(JudgeKind k);
JudgeKind parse_judge_kind(std::string_view name);

struct RunConfig {
  std::filesystem::path roster;
  std::filesystem::path overrides;        // optional
  std::filesystem::path external_scales;  // optional
  std::filesystem::path out_dir = "out";
  std::uint64_t seed = 0;

  JudgeKind judge = JudgeKind::Llm;
  LlmJudgeConfig llm;
  std::filesystem::path replay_transcripts;
  std::filesystem::path replay_categorizations;
  // CSV entity_id,score; larger = further toward PoleB.
  std::filesystem::path simulated_true_scores;
  double tie_probability = 0.0;
  bool deterministic = false;
  double strong_threshold = 1.0;

  int iterations = 3;
  int categorization_runs = 3;
  std::size_t concurrency = 4;
  bool use_implied = true;
  FitConfig fit;

  PoleLabels labels;
  Vocabulary vocab;
  std::vector<std::string> tie_phrases;

  std::string response_scale = "perceived_ideology";
  std::string comparator_scale = "nominate_dim1";
  std::size_t top_movers = 10;
  std::string plot_scale;  // default: comparator_scale

  // cmd_simulate generator: count entities with lambda ~ U[low, high].
  int simulate_count = 100;
  double simulate_low = -2.0;
  double simulate_high = 2.0;
  std::vector<std::uint64_t> simulate_seeds;  // default: {seed}
  bool simulate_use_implied = false;

  RunConfig();

  // Sets one `key = value` setting. Relative paths resolve against base_dir.
  void set(std::string_view key, std::string_view value,
           const std::filesystem::path& base_dir = {});
  void validate() const;
};

// Plain-text configuration: one `key = value` per line, `#` starts a comment.
// Unknown keys and malformed lines raise ParseError with the line number.
RunConfig load_config(const std::filesystem::path& path);
void apply_config_text(RunConfig& config, std::string_view text, const std::string& source_name,
                       const std::filesystem::path& base_dir);

std::vector<std::string> config_keys();

// Snapshot used by the manifest (no secrets: only the key's variable name).
nlohmann::ordered_json config_to_json(const RunConfig& config);

// entity_id,score
std::map<std::string, double> load_true_scores(const std::filesystem::path& path);
void write_true_scores(const std::filesystem::path& path, const std::map<std::string, double>& scores);

}  // namespace pairscale
