#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "pairscale/estimator.hpp"

namespace pairscale {

// NaN marks a missing observation. Correlations use the pairwise-complete
// subset; they need at least 3 complete pairs and nonzero variance in both
// arguments, otherwise DomainError.
double pearson(std::span<const double> x, std::span<const double> y);
double spearman(std::span<const double> x, std::span<const double> y);
// Kendall tau-b.
double kendall_tau(std::span<const double> x, std::span<const double> y);
std::size_t complete_pairs(std::span<const double> x, std::span<const double> y);

// 1-based average ranks, ascending (smallest value gets rank 1).
std::vector<double> average_ranks(std::span<const double> values);

struct RegressionResult {
  std::vector<std::string> predictors;  // excluding the intercept
  std::vector<double> coefficients;     // intercept first
  double r_squared = 0.0;
  double rss = 0.0;
  double tss = 0.0;
  std::size_t n = 0;
  std::size_t p = 0;
};

// Least squares with an intercept via column-pivoted QR. Requires complete
// data, n > p + 1 and a full-rank design (DomainError naming the collinear
// columns otherwise).
RegressionResult ols(std::span<const double> y, const std::vector<std::vector<double>>& columns,
                     std::vector<std::string> names = {});

struct PartialFResult {
  double f_stat = 0.0;
  int df1 = 0;
  int df2 = 0;
  double p_value = 1.0;
};

// F = ((RSS_r - RSS_f) / df1) / (RSS_f / df2). Identical models give F = 0,
// p = 1. Throws ValidationError when reduced is not nested in full or the
// fits used different observation counts.
PartialFResult partial_f(const RegressionResult& full, const RegressionResult& reduced);

struct NestedComparison {
  RegressionResult full;
  RegressionResult reduced;
  PartialFResult test;
};

// Listwise deletion over y and every predictor of the full model, then fits
// both models on the same rows.
NestedComparison nested_f_test(std::span<const double> y,
                               const std::map<std::string, std::vector<double>>& predictors,
                               const std::vector<std::string>& full,
                               const std::vector<std::string>& reduced);

// Entity-keyed values; entities may be missing.
using Scale = std::map<std::string, double>;

struct RankMovement {
  std::string id;
  double rank_a = 0.0;
  double rank_b = 0.0;
  double shift = 0.0;  // |rank_a - rank_b|
};

struct RankDiff {
  double mean_abs_diff = 0.0;
  std::size_t n = 0;
  std::vector<RankMovement> movements;  // largest shift first, ties by id
};

// Ranks both scales on their common entities (rank 1 = largest value, i.e.
// furthest toward PoleB; ties share the average rank).
RankDiff rank_diff(const Scale& a, const Scale& b);

struct CorrelationMatrix {
  std::vector<std::string> names;
  std::vector<std::vector<std::optional<double>>> r;  // nullopt: too few pairs
  std::vector<std::vector<std::size_t>> n;
};

enum class CorrelationMethod { Pearson, Spearman };

CorrelationMatrix correlation_matrix(const std::vector<std::string>& names,
                                     const std::vector<Scale>& scales,
                                     const std::vector<std::string>& entities,
                                     CorrelationMethod method = CorrelationMethod::Pearson);

// Pearson correlations between per-iteration scores over their common
// entities. Needs at least two iterations.
CorrelationMatrix iteration_consistency(const std::vector<ScaledScores>& per_iteration);

struct ValidationInputs {
  ScaledScores scores;
  std::vector<ScaledScores> iteration_scores;
  std::map<std::string, Scale> external;
  std::map<std::string, std::string> group_of;  // entity -> group label
  std::string score_name = "scores";
  std::string response_scale = "perceived_ideology";
  std::string comparator_scale = "nominate_dim1";
  std::size_t top_movers = 10;
};

struct RegressionBlock {
  std::optional<RegressionResult> full;
  std::optional<RegressionResult> only_scores;
  std::optional<RegressionResult> only_comparator;
  std::optional<PartialFResult> drop_scores;      // full vs only_comparator
  std::optional<PartialFResult> drop_comparator;  // full vs only_scores
  std::string skipped_reason;
};

struct GroupBlock {
  std::string group;  // "all" or a group label
  std::size_t entities = 0;
  CorrelationMatrix pearson;
  CorrelationMatrix spearman;
  RegressionBlock regression;
};

struct ValidationReport {
  std::string score_name;
  std::vector<GroupBlock> groups;
  std::map<std::string, RankDiff> rank_diffs;  // score vs each external scale
  std::optional<CorrelationMatrix> iteration_consistency;
  std::size_t top_movers = 10;
};

ValidationReport build_report(const ValidationInputs& inputs);
nlohmann::ordered_json report_to_json(const ValidationReport& report);

// External scales CSV (long format): entity_id,scale_name,value
std::map<std::string, Scale> load_external_scales(const std::filesystem::path& path);

}  // namespace pairscale
