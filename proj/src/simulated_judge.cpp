#include "pairscale/simulated_judge.hpp"

#include <cmath>
#include <random>

#include "pairscale/errors.hpp"

namespace pairscale {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

double logistic(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

}  // namespace

void SimulatedJudgeConfig::validate() const {
  if (!(tie_probability >= 0.0 && tie_probability <= 1.0))
    throw ConfigError("tie_probability must lie in [0, 1]");
  if (!(strong_threshold >= 0.0)) throw ConfigError("strong_threshold must be >= 0");
}

std::uint64_t substream_seed(std::uint64_t seed, std::string_view key) {
  std::uint64_t h = 0xCBF29CE484222325ULL;  // FNV-1a
  for (unsigned char c : key) {
    h ^= c;
    h *= 0x100000001B3ULL;
  }
  return splitmix64(seed ^ splitmix64(h));
}

Resolution simulated_compare(const JudgeRequest& request, const SimulatedJudgeConfig& config) {
  auto score = [&](const std::string& id) {
    auto it = config.true_scores.find(id);
    if (it == config.true_scores.end())
      throw ConfigError("simulated judge has no true score for '" + id + "'");
    return it->second;
  };
  const auto& first = request.candidates[0].id;
  const auto& second = request.candidates[1].id;
  const double gap = score(first) - score(second);

  std::optional<int> b_winner;  // index of the entity further toward PoleB
  if (config.deterministic) {
    if (gap > 0) b_winner = 0;
    if (gap < 0) b_winner = 1;
  } else {
    std::mt19937_64 rng(substream_seed(config.seed, request.key.str()));
    const double tie_draw = unit_draw(rng);
    const double win_draw = unit_draw(rng);
    if (tie_draw >= config.tie_probability) b_winner = win_draw < logistic(gap) ? 0 : 1;
  }
  if (!b_winner) return Resolution::tie();
  const int answer = request.framing == Framing::TowardPoleB ? *b_winner : 1 - *b_winner;
  return Resolution::winner(answer == 0 ? first : second);
}

SimulatedJudge::SimulatedJudge(SimulatedJudgeConfig config) : config_(std::move(config)) {
  config_.validate();
}

std::string SimulatedJudge::id() const {
  return "simulated:seed=" + std::to_string(config_.seed) +
         (config_.deterministic ? ":deterministic" : "");
}

double SimulatedJudge::score_of(const std::string& id) const {
  auto it = config_.true_scores.find(id);
  if (it == config_.true_scores.end())
    throw ConfigError("simulated judge has no true score for '" + id + "'");
  return it->second;
}

std::string SimulatedJudge::categorize(const CategoryQuery& query) {
  const double s = score_of(query.entity.id);
  const bool strong = query.pole == Pole::B ? s >= config_.strong_threshold
                                            : s <= -config_.strong_threshold;
  const auto& vocab = config_.vocab;
  return query.entity.full_name + " is considered a " +
         (strong ? vocab.trait(query.pole) : std::string("moderate")) + " " +
         vocab.member(query.pole) + ".";
}

std::string SimulatedJudge::compare(const JudgeRequest& request) {
  const auto res = simulated_compare(request, config_);
  const auto& trait = config_.vocab.trait(framing_pole(request.framing));
  if (res.kind == ResolutionKind::Tie)
    return "Both " + config_.vocab.entity_noun + "s are equally " + trait + "; I cannot say.";
  const auto& name = res.winner_id == request.candidates[0].id ? request.candidates[0].name
                                                               : request.candidates[1].name;
  return name + " is more " + trait + ".";
}

std::optional<std::string> SimulatedJudge::extract(const JudgeRequest& request,
                                                   const std::string&) {
  const auto res = simulated_compare(request, config_);
  if (res.kind == ResolutionKind::Tie) return std::string("Both are equal.");
  return res.winner_id == request.candidates[0].id ? request.candidates[0].name
                                                   : request.candidates[1].name;
}

}  // namespace pairscale
