#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <string_view>

#include "pairscale/judge.hpp"

namespace pairscale {

// Bradley-Terry oracle. true_scores are oriented so that larger = further
// toward PoleB.
struct SimulatedJudgeConfig {
  std::map<std::string, double> true_scores;
  double tie_probability = 0.0;
  std::uint64_t seed = 0;
  // Noise-free: the larger score always wins, equal scores tie.
  bool deterministic = false;
  // |score| at or beyond which an entity categorizes as Strong at its pole.
  double strong_threshold = 1.0;
  Vocabulary vocab;

  void validate() const;
};

// Seed of the RNG substream for one matchup (or category query) key.
std::uint64_t substream_seed(std::uint64_t seed, std::string_view key);

// Uniform double in [0, 1) from the top 53 bits of a 64-bit draw.
template <class Engine>
double unit_draw(Engine& engine) {
  return static_cast<double>(engine() >> 11) * 0x1.0p-53;
}

// Samples the matchup. The returned Winner follows the transcript convention
// (answer to the framed question). Throws ConfigError on a missing score.
Resolution simulated_compare(const JudgeRequest& request, const SimulatedJudgeConfig& config);

class SimulatedJudge final : public Judge {
 public:
  explicit SimulatedJudge(SimulatedJudgeConfig config);

  std::string id() const override;
  Source source() const override { return Source::Simulated; }
  std::string categorize(const CategoryQuery& query) override;
  std::string compare(const JudgeRequest& request) override;
  std::optional<std::string> extract(const JudgeRequest& request,
                                     const std::string& extraction_prompt) override;

  const SimulatedJudgeConfig& config() const { return config_; }

 private:
  double score_of(const std::string& id) const;

  SimulatedJudgeConfig config_;
};

}  // namespace pairscale
