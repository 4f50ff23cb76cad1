#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "pairscale/transcript.hpp"

namespace pairscale {

// Fractional win counts for one unordered pair, in canonical order.
struct Cell {
  double wins_first = 0.0;
  double wins_second = 0.0;
  double total() const { return wins_first + wins_second; }
};

struct ContestTable {
  std::vector<std::string> entities;  // sorted ids
  std::map<EntityPair, Cell> cells;

  double total_mass() const;
  // Adds `wins` for `winner` against `loser`, registering both entities.
  void add(const std::string& winner, const std::string& loser, double wins);
};

// A PoleB-ward win adds 1 to that side; a tie adds 0.5 to each side.
// `entities`, when given, seeds the entity list (e.g. the full roster).
// Throws UnresolvedError listing the matchup keys still unresolved.
ContestTable aggregate(const std::vector<Transcript>& transcripts,
                       const std::vector<std::string>& entities = {});

std::vector<Transcript> filter_iteration(const std::vector<Transcript>& transcripts, int iteration);

// Contest table CSV: id_i,id_j,wins_i,wins_j
void write_contest_csv(const std::filesystem::path& path, const ContestTable& table);
ContestTable load_contest_csv(const std::filesystem::path& path);

enum class Penalty { Firth, None };

std::string_view penalty_name(Penalty p);
Penalty parse_penalty(std::string_view name);

struct FitConfig {
  Penalty penalty = Penalty::Firth;
  double tolerance = 1e-10;  // on the max-norm of the objective's gradient
  int max_iterations = 100;
  std::optional<std::string> reference_id;  // default: first id in sort order

  void validate() const;
};

struct BTFit {
  std::vector<std::string> entities;  // fitted ids, sorted
  std::map<std::string, double> lambda;
  std::map<std::string, double> std_errors;  // reference entity omitted
  std::string reference_id;
  double log_likelihood = 0.0;
  double penalized_log_likelihood = 0.0;
  bool converged = false;
  int iterations_used = 0;
  Penalty penalty = Penalty::Firth;
  // Max-norm of the objective gradient over the free parameters at the
  // returned estimate.
  double gradient_norm = 0.0;
};

// Maximizes the Bradley-Terry log-likelihood, or with Penalty::Firth the
// log-likelihood plus half the log-determinant of the Fisher information.
// Entities without comparisons are left out. Throws IdentifiabilityError when
// the comparison graph is disconnected.
BTFit fit_bt(const ContestTable& table, const FitConfig& config = {});

struct ScaledScores {
  std::map<std::string, double> score;
};

// Min-max map of lambda onto [0, 1]; all-equal lambdas map to 0.5.
ScaledScores rescale_unit(const BTFit& fit);

// Pr(i beats j) = logistic(lambda_i - lambda_j).
double predict_prob(const BTFit& fit, const std::string& i, const std::string& j);

nlohmann::ordered_json fit_to_json(const BTFit& fit, const ScaledScores& scores);
BTFit fit_from_json(const nlohmann::json& j);
ScaledScores scores_from_fit_json(const nlohmann::json& j);

// Objective pieces over the full lambda vector (one entry per
// table.entities, reference included). The information matrix is the full
// singular Laplacian; the Firth penalty uses any principal minor of order n-1,
// which all share one determinant.
namespace bt {

double log_likelihood(const ContestTable& table, const Eigen::VectorXd& lambda);
Eigen::VectorXd gradient(const ContestTable& table, const Eigen::VectorXd& lambda);
Eigen::MatrixXd information(const ContestTable& table, const Eigen::VectorXd& lambda);
double penalized_log_likelihood(const ContestTable& table, const Eigen::VectorXd& lambda);
Eigen::VectorXd penalized_gradient(const ContestTable& table, const Eigen::VectorXd& lambda);
Eigen::MatrixXd penalized_hessian(const ContestTable& table, const Eigen::VectorXd& lambda);

double log_sigmoid(double x);
double sigmoid(double x);

}  // namespace bt

}  // namespace pairscale
