#include "pairscale/estimator.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <set>

#include "pairscale/errors.hpp"
#include "pairscale/io.hpp"

namespace pairscale {

using Eigen::MatrixXd;
using Eigen::VectorXd;

double ContestTable::total_mass() const {
  double s = 0.0;
  for (const auto& [pair, cell] : cells) s += cell.total();
  return s;
}

void ContestTable::add(const std::string& winner, const std::string& loser, double wins) {
  for (const auto* id : {&winner, &loser}) {
    auto it = std::lower_bound(entities.begin(), entities.end(), *id);
    if (it == entities.end() || *it != *id) entities.insert(it, *id);
  }
  auto pair = EntityPair::canonical(winner, loser);
  auto& cell = cells[pair];
  (pair.first == winner ? cell.wins_first : cell.wins_second) += wins;
}

ContestTable aggregate(const std::vector<Transcript>& transcripts,
                       const std::vector<std::string>& entities) {
  ContestTable table;
  table.entities = entities;
  std::sort(table.entities.begin(), table.entities.end());
  table.entities.erase(std::unique(table.entities.begin(), table.entities.end()),
                       table.entities.end());

  std::vector<std::string> unresolved;
  for (const auto& t : transcripts)
    if (!t.resolution.resolved()) unresolved.push_back(t.key.str());
  if (!unresolved.empty()) {
    std::string list;
    for (std::size_t i = 0; i < unresolved.size() && i < 20; ++i)
      list += (i ? ", " : "") + unresolved[i];
    if (unresolved.size() > 20) list += ", ...";
    throw UnresolvedError(std::to_string(unresolved.size()) +
                              " unresolved matchup(s) need adjudication: " + list,
                          unresolved);
  }

  for (const auto& t : transcripts) {
    const auto& pair = t.key.pair;
    if (auto winner = t.pole_b_winner()) {
      table.add(*winner, pair.other(*winner), 1.0);
    } else {
      table.add(pair.first, pair.second, 0.5);
      table.add(pair.second, pair.first, 0.5);
    }
  }
  return table;
}

std::vector<Transcript> filter_iteration(const std::vector<Transcript>& transcripts, int iteration) {
  std::vector<Transcript> out;
  for (const auto& t : transcripts)
    if (t.key.iteration == iteration) out.push_back(t);
  return out;
}

void write_contest_csv(const std::filesystem::path& path, const ContestTable& table) {
  std::string text = io::csv_line({"id_i", "id_j", "wins_i", "wins_j"});
  for (const auto& [pair, cell] : table.cells) {
    text += io::csv_line({pair.first, pair.second, io::format_double(cell.wins_first),
                          io::format_double(cell.wins_second)});
  }
  io::write_file_atomic(path, text);
}

ContestTable load_contest_csv(const std::filesystem::path& path) {
  const auto csv = io::read_csv(path);
  io::require_header(csv, {"id_i", "id_j", "wins_i", "wins_j"}, path.string());
  ContestTable table;
  for (const auto& row : csv.rows) {
    double wi = 0, wj = 0;
    try {
      wi = std::stod(row.fields[2]);
      wj = std::stod(row.fields[3]);
    } catch (const std::exception&) {
      throw ParseError(path.string(), row.line, "win counts must be numbers");
    }
    if (!(wi >= 0 && wj >= 0)) throw ParseError(path.string(), row.line, "negative win count");
    if (row.fields[0] == row.fields[1]) throw ParseError(path.string(), row.line, "self pair");
    table.add(row.fields[0], row.fields[1], wi);
    table.add(row.fields[1], row.fields[0], wj);
  }
  return table;
}

std::string_view penalty_name(Penalty p) { return p == Penalty::Firth ? "firth" : "none"; }

Penalty parse_penalty(std::string_view name) {
  if (name == "firth") return Penalty::Firth;
  if (name == "none") return Penalty::None;
  throw ConfigError("unknown penalty '" + std::string(name) + "'");
}

void FitConfig::validate() const {
  if (!(tolerance > 0)) throw ConfigError("fit tolerance must be > 0");
  if (max_iterations < 1) throw ConfigError("max_iterations must be >= 1");
}

namespace bt {

double log_sigmoid(double x) {
  return x >= 0 ? -std::log1p(std::exp(-x)) : x - std::log1p(std::exp(x));
}

double sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

}  // namespace bt

namespace {

// Pairs with positive mass, indexed into an entity list.
struct Problem {
  Eigen::Index n = 0;
  std::vector<Eigen::Index> i, j;
  std::vector<double> wi, wj;

  std::size_t size() const { return i.size(); }
};

Problem make_problem(const ContestTable& table, const std::vector<std::string>& ids) {
  Problem pr;
  pr.n = static_cast<Eigen::Index>(ids.size());
  auto index = [&](const std::string& id) -> Eigen::Index {
    auto it = std::lower_bound(ids.begin(), ids.end(), id);
    if (it == ids.end() || *it != id) throw LookupError("entity '" + id + "' not in table");
    return it - ids.begin();
  };
  for (const auto& [pair, cell] : table.cells) {
    if (!(cell.total() > 0)) continue;
    pr.i.push_back(index(pair.first));
    pr.j.push_back(index(pair.second));
    pr.wi.push_back(cell.wins_first);
    pr.wj.push_back(cell.wins_second);
  }
  return pr;
}

double loglik(const Problem& pr, const VectorXd& lam) {
  double ll = 0.0;
  for (std::size_t k = 0; k < pr.size(); ++k) {
    const double d = lam[pr.i[k]] - lam[pr.j[k]];
    if (pr.wi[k] > 0) ll += pr.wi[k] * bt::log_sigmoid(d);
    if (pr.wj[k] > 0) ll += pr.wj[k] * bt::log_sigmoid(-d);
  }
  return ll;
}

VectorXd score(const Problem& pr, const VectorXd& lam) {
  VectorXd g = VectorXd::Zero(pr.n);
  for (std::size_t k = 0; k < pr.size(); ++k) {
    const double d = lam[pr.i[k]] - lam[pr.j[k]];
    // wi * q - wj * p, written without cancellation
    const double r = pr.wi[k] * bt::sigmoid(-d) - pr.wj[k] * bt::sigmoid(d);
    g[pr.i[k]] += r;
    g[pr.j[k]] -= r;
  }
  return g;
}

// m * p * q per pair
std::vector<double> pair_weights(const Problem& pr, const VectorXd& lam) {
  std::vector<double> w(pr.size());
  for (std::size_t k = 0; k < pr.size(); ++k) {
    const double d = lam[pr.i[k]] - lam[pr.j[k]];
    w[k] = (pr.wi[k] + pr.wj[k]) * bt::sigmoid(d) * bt::sigmoid(-d);
  }
  return w;
}

MatrixXd laplacian(const Problem& pr, const std::vector<double>& w) {
  MatrixXd info = MatrixXd::Zero(pr.n, pr.n);
  for (std::size_t k = 0; k < pr.size(); ++k) {
    const auto a = pr.i[k], b = pr.j[k];
    info(a, a) += w[k];
    info(b, b) += w[k];
    info(a, b) -= w[k];
    info(b, a) -= w[k];
  }
  return info;
}

MatrixXd drop(const MatrixXd& m, Eigen::Index r) {
  const auto n = m.rows();
  MatrixXd out(n - 1, n - 1);
  for (Eigen::Index a = 0, oa = 0; a < n; ++a) {
    if (a == r) continue;
    for (Eigen::Index b = 0, ob = 0; b < n; ++b) {
      if (b == r) continue;
      out(oa, ob++) = m(a, b);
    }
    ++oa;
  }
  return out;
}

VectorXd drop(const VectorXd& v, Eigen::Index r) {
  VectorXd out(v.size() - 1);
  for (Eigen::Index a = 0, o = 0; a < v.size(); ++a)
    if (a != r) out[o++] = v[a];
  return out;
}

// Inverse of the reference-dropped information, embedded back into n x n
// with a zero row and column at the reference. nullopt if not positive
// definite.
struct Inverse {
  MatrixXd c_ext;
  double log_det = 0.0;
};

std::optional<Inverse> free_inverse(const MatrixXd& info, Eigen::Index ref) {
  const MatrixXd f = drop(info, ref);
  Eigen::LLT<MatrixXd> llt(f);
  if (llt.info() != Eigen::Success) return std::nullopt;
  const auto& l = llt.matrixLLT();
  double log_det = 0.0;
  for (Eigen::Index a = 0; a < l.rows(); ++a) {
    if (!(l(a, a) > 0)) return std::nullopt;
    log_det += 2.0 * std::log(l(a, a));
  }
  const MatrixXd inv = llt.solve(MatrixXd::Identity(f.rows(), f.cols()));
  Inverse out;
  out.c_ext = MatrixXd::Zero(info.rows(), info.cols());
  for (Eigen::Index a = 0, oa = 0; a < info.rows(); ++a) {
    if (a == ref) continue;
    for (Eigen::Index b = 0, ob = 0; b < info.cols(); ++b) {
      if (b == ref) continue;
      out.c_ext(a, b) = inv(oa, ob++);
    }
    ++oa;
  }
  out.log_det = log_det;
  return out;
}

double log_det_free(const MatrixXd& info, Eigen::Index ref) {
  Eigen::LLT<MatrixXd> llt(drop(info, ref));
  if (llt.info() != Eigen::Success) return -std::numeric_limits<double>::infinity();
  double log_det = 0.0;
  for (Eigen::Index a = 0; a < llt.matrixLLT().rows(); ++a) {
    const double d = llt.matrixLLT()(a, a);
    if (!(d > 0)) return -std::numeric_limits<double>::infinity();
    log_det += 2.0 * std::log(d);
  }
  return log_det;
}

double objective(const Problem& pr, const VectorXd& lam, Penalty penalty, Eigen::Index ref) {
  double v = loglik(pr, lam);
  if (penalty == Penalty::Firth) v += 0.5 * log_det_free(laplacian(pr, pair_weights(pr, lam)), ref);
  return v;
}

// d/dlambda of the penalty: 0.5 * sum_k m p q (1 - 2p) h_k (e_i - e_j)
VectorXd penalty_gradient(const Problem& pr, const VectorXd& lam, const MatrixXd& c_ext) {
  VectorXd g = VectorXd::Zero(pr.n);
  for (std::size_t k = 0; k < pr.size(); ++k) {
    const auto a = pr.i[k], b = pr.j[k];
    const double d = lam[a] - lam[b];
    const double p = bt::sigmoid(d), q = bt::sigmoid(-d);
    const double h = c_ext(a, a) + c_ext(b, b) - 2.0 * c_ext(a, b);
    const double t = 0.5 * (pr.wi[k] + pr.wj[k]) * p * q * (q - p) * h;
    g[a] += t;
    g[b] -= t;
  }
  return g;
}

// Full n x n Hessian of the penalized log-likelihood:
//   -I + 0.5 * sum_k m pq(1-6pq) h_k x_k x_k' - 0.5 * T,
//   T_rs = tr(C dI/dr C dI/ds).
// T is assembled from two n x n by n x K products.
MatrixXd firth_hessian(const Problem& pr, const VectorXd& lam, const MatrixXd& info,
                       const MatrixXd& c_ext) {
  const auto n = pr.n;
  const auto K = static_cast<Eigen::Index>(pr.size());
  VectorXd c(K);
  MatrixXd hess = -info;
  MatrixXd cw = MatrixXd::Zero(n, n);
  MatrixXd v(n, K);
  for (Eigen::Index k = 0; k < K; ++k) {
    const auto a = pr.i[k], b = pr.j[k];
    const double d = lam[a] - lam[b];
    const double p = bt::sigmoid(d), q = bt::sigmoid(-d);
    const double m = pr.wi[k] + pr.wj[k];
    const double h = c_ext(a, a) + c_ext(b, b) - 2.0 * c_ext(a, b);
    c[k] = m * p * q * (q - p);
    const double e = 0.5 * m * p * q * (1.0 - 6.0 * p * q) * h;
    hess(a, a) += e;
    hess(b, b) += e;
    hess(a, b) -= e;
    hess(b, a) -= e;
    cw(a, b) += c[k];
    cw(b, a) -= c[k];
    v.col(k) = c_ext.col(a) - c_ext.col(b);
  }
  // U(s, k) = sum_b cw(s, b) * (v(s, k) - v(b, k))^2
  const MatrixXd v2 = v.cwiseProduct(v);
  const VectorXd row_sums = cw.rowwise().sum();
  MatrixXd u = cw * v2;
  u.noalias() -= 2.0 * v.cwiseProduct(cw * v);
  u += (v2.array().colwise() * row_sums.array()).matrix();
  MatrixXd t = MatrixXd::Zero(n, n);
  for (Eigen::Index k = 0; k < K; ++k) {
    t.row(pr.i[k]) += c[k] * u.col(k).transpose();
    t.row(pr.j[k]) -= c[k] * u.col(k).transpose();
  }
  hess -= 0.5 * t;
  return 0.5 * (hess + hess.transpose());
}

// Above this many n x K entries the exact Firth Hessian is skipped and the
// fit uses Fisher scoring steps only.
constexpr double kExactHessianBudget = 4e6;

std::vector<std::vector<std::string>> components(const Problem& pr,
                                                 const std::vector<std::string>& ids) {
  std::vector<Eigen::Index> parent(static_cast<std::size_t>(pr.n));
  std::iota(parent.begin(), parent.end(), 0);
  auto find = [&](Eigen::Index x) {
    while (parent[x] != x) x = parent[x] = parent[parent[x]];
    return x;
  };
  for (std::size_t k = 0; k < pr.size(); ++k) parent[find(pr.i[k])] = find(pr.j[k]);
  std::map<Eigen::Index, std::vector<std::string>> groups;
  for (Eigen::Index a = 0; a < pr.n; ++a) groups[find(a)].push_back(ids[a]);
  std::vector<std::vector<std::string>> out;
  for (auto& [root, members] : groups) out.push_back(std::move(members));
  return out;
}

// Win digraph (winner -> loser) strongly connected: the unpenalized MLE exists.
bool strongly_connected(const Problem& pr) {
  if (pr.n <= 1) return true;
  std::vector<std::vector<Eigen::Index>> fwd(pr.n), bwd(pr.n);
  for (std::size_t k = 0; k < pr.size(); ++k) {
    if (pr.wi[k] > 0) {
      fwd[pr.i[k]].push_back(pr.j[k]);
      bwd[pr.j[k]].push_back(pr.i[k]);
    }
    if (pr.wj[k] > 0) {
      fwd[pr.j[k]].push_back(pr.i[k]);
      bwd[pr.i[k]].push_back(pr.j[k]);
    }
  }
  auto reaches_all = [&](const std::vector<std::vector<Eigen::Index>>& adj) {
    std::vector<char> seen(pr.n, 0);
    std::vector<Eigen::Index> stack{0};
    seen[0] = 1;
    Eigen::Index count = 1;
    while (!stack.empty()) {
      const auto x = stack.back();
      stack.pop_back();
      for (auto y : adj[x]) {
        if (!seen[y]) {
          seen[y] = 1;
          ++count;
          stack.push_back(y);
        }
      }
    }
    return count == pr.n;
  };
  return reaches_all(fwd) && reaches_all(bwd);
}

}  // namespace

namespace bt {

double log_likelihood(const ContestTable& table, const VectorXd& lambda) {
  return loglik(make_problem(table, table.entities), lambda);
}

VectorXd gradient(const ContestTable& table, const VectorXd& lambda) {
  return score(make_problem(table, table.entities), lambda);
}

MatrixXd information(const ContestTable& table, const VectorXd& lambda) {
  const auto pr = make_problem(table, table.entities);
  return laplacian(pr, pair_weights(pr, lambda));
}

double penalized_log_likelihood(const ContestTable& table, const VectorXd& lambda) {
  return objective(make_problem(table, table.entities), lambda, Penalty::Firth, 0);
}

VectorXd penalized_gradient(const ContestTable& table, const VectorXd& lambda) {
  const auto pr = make_problem(table, table.entities);
  const auto inv = free_inverse(laplacian(pr, pair_weights(pr, lambda)), 0);
  if (!inv) throw DomainError("information matrix is singular");
  return score(pr, lambda) + penalty_gradient(pr, lambda, inv->c_ext);
}

MatrixXd penalized_hessian(const ContestTable& table, const VectorXd& lambda) {
  const auto pr = make_problem(table, table.entities);
  const MatrixXd info = laplacian(pr, pair_weights(pr, lambda));
  const auto inv = free_inverse(info, 0);
  if (!inv) throw DomainError("information matrix is singular");
  return firth_hessian(pr, lambda, info, inv->c_ext);
}

}  // namespace bt

BTFit fit_bt(const ContestTable& table, const FitConfig& config) {
  config.validate();

  std::set<std::string> compared;
  for (const auto& [pair, cell] : table.cells) {
    if (cell.total() > 0) {
      compared.insert(pair.first);
      compared.insert(pair.second);
    }
  }
  const std::vector<std::string> ids(compared.begin(), compared.end());
  if (ids.size() < 2) throw IdentifiabilityError("need at least two compared entities", {ids});
  const Problem pr = make_problem(table, ids);

  if (auto comps = components(pr, ids); comps.size() > 1) {
    std::string msg = "comparison graph has " + std::to_string(comps.size()) + " components:";
    for (const auto& comp : comps) {
      msg += " {";
      for (std::size_t a = 0; a < comp.size() && a < 5; ++a) msg += (a ? "," : "") + comp[a];
      if (comp.size() > 5) msg += ",...";
      msg += "}";
    }
    throw IdentifiabilityError(msg, std::move(comps));
  }

  BTFit fit;
  fit.entities = ids;
  fit.penalty = config.penalty;
  fit.reference_id = config.reference_id.value_or(ids.front());
  const auto ref_it = std::lower_bound(ids.begin(), ids.end(), fit.reference_id);
  if (ref_it == ids.end() || *ref_it != fit.reference_id)
    throw ConfigError("reference entity '" + fit.reference_id + "' has no comparisons");
  const Eigen::Index ref = ref_it - ids.begin();

  const bool firth = config.penalty == Penalty::Firth;
  // Without the penalty a win digraph that is not strongly connected has no
  // finite maximizer; the gradient only vanishes asymptotically.
  const bool mle_exists = firth || strongly_connected(pr);
  const bool exact_hessian =
      firth && static_cast<double>(pr.n) * static_cast<double>(pr.size()) <= kExactHessianBudget;

  VectorXd lam = VectorXd::Zero(pr.n);
  double current = objective(pr, lam, config.penalty, ref);
  int iter = 0;
  for (;; ++iter) {
    const MatrixXd info = laplacian(pr, pair_weights(pr, lam));
    const auto inv = free_inverse(info, ref);
    if (!inv) break;  // information lost rank (probabilities saturated)
    VectorXd g = score(pr, lam);
    if (firth) g += penalty_gradient(pr, lam, inv->c_ext);
    const VectorXd g_free = drop(g, ref);
    fit.gradient_norm = g_free.lpNorm<Eigen::Infinity>();
    if (mle_exists && fit.gradient_norm <= config.tolerance) {
      fit.converged = true;
      break;
    }
    if (iter >= config.max_iterations) break;

    VectorXd step;
    if (exact_hessian) {
      const MatrixXd neg_h = -drop(firth_hessian(pr, lam, info, inv->c_ext), ref);
      Eigen::LLT<MatrixXd> llt(neg_h);
      if (llt.info() == Eigen::Success) step = llt.solve(g_free);
    }
    if (step.size() == 0) step = drop(inv->c_ext, ref) * g_free;  // Fisher scoring

    VectorXd next = lam;
    bool accepted = false;
    for (double t = 1.0; t > 1e-12; t *= 0.5) {
      for (Eigen::Index a = 0, o = 0; a < pr.n; ++a)
        if (a != ref) next[a] = lam[a] + t * step[o++];
      const double value = objective(pr, next, config.penalty, ref);
      // Near the optimum the objective change drops below rounding; allow
      // that much slack so Newton steps are not rejected there.
      if (std::isfinite(value) && value >= current - 1e-13 * (1.0 + std::abs(current))) {
        current = value;
        accepted = true;
        break;
      }
    }
    if (!accepted) break;  // no ascent possible at machine precision
    lam = next;
  }
  fit.iterations_used = iter;

  const MatrixXd info = laplacian(pr, pair_weights(pr, lam));
  fit.log_likelihood = loglik(pr, lam);
  fit.penalized_log_likelihood = fit.log_likelihood + 0.5 * log_det_free(info, ref);
  const auto inv = free_inverse(info, ref);
  for (Eigen::Index a = 0; a < pr.n; ++a) {
    fit.lambda[ids[a]] = lam[a];
    if (a == ref) continue;
    fit.std_errors[ids[a]] =
        inv ? std::sqrt(std::max(0.0, inv->c_ext(a, a))) : std::numeric_limits<double>::infinity();
  }
  return fit;
}

ScaledScores rescale_unit(const BTFit& fit) {
  ScaledScores out;
  if (fit.lambda.empty()) return out;
  double lo = std::numeric_limits<double>::infinity();
  double hi = -lo;
  for (const auto& [id, v] : fit.lambda) {
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  const double span = hi - lo;
  for (const auto& [id, v] : fit.lambda)
    out.score[id] = span > 1e-12 ? (v - lo) / span : 0.5;
  return out;
}

double predict_prob(const BTFit& fit, const std::string& i, const std::string& j) {
  auto a = fit.lambda.find(i);
  auto b = fit.lambda.find(j);
  if (a == fit.lambda.end()) throw LookupError("entity '" + i + "' not in fit");
  if (b == fit.lambda.end()) throw LookupError("entity '" + j + "' not in fit");
  return bt::sigmoid(a->second - b->second);
}

namespace {

nlohmann::ordered_json number_or_null(double v) {
  return std::isfinite(v) ? nlohmann::ordered_json(v) : nlohmann::ordered_json(nullptr);
}

}  // namespace

nlohmann::ordered_json fit_to_json(const BTFit& fit, const ScaledScores& scores) {
  nlohmann::ordered_json j;
  j["reference_id"] = fit.reference_id;
  j["penalty"] = penalty_name(fit.penalty);
  j["converged"] = fit.converged;
  j["iterations"] = fit.iterations_used;
  j["log_likelihood"] = number_or_null(fit.log_likelihood);
  j["penalized_log_likelihood"] = number_or_null(fit.penalized_log_likelihood);
  auto arr = nlohmann::ordered_json::array();
  for (const auto& id : fit.entities) {
    nlohmann::ordered_json e;
    e["id"] = id;
    e["lambda"] = fit.lambda.at(id);
    auto se = fit.std_errors.find(id);
    e["std_error"] = se == fit.std_errors.end() ? nlohmann::ordered_json(nullptr)
                                                : number_or_null(se->second);
    auto sc = scores.score.find(id);
    e["score"] = sc == scores.score.end() ? nlohmann::ordered_json(nullptr)
                                          : nlohmann::ordered_json(sc->second);
    arr.push_back(std::move(e));
  }
  j["entities"] = std::move(arr);
  return j;
}

BTFit fit_from_json(const nlohmann::json& j) {
  BTFit fit;
  fit.reference_id = j.at("reference_id").get<std::string>();
  fit.penalty = parse_penalty(j.at("penalty").get<std::string>());
  fit.converged = j.at("converged").get<bool>();
  fit.iterations_used = j.at("iterations").get<int>();
  auto num = [](const nlohmann::json& v) {
    return v.is_null() ? std::numeric_limits<double>::quiet_NaN() : v.get<double>();
  };
  fit.log_likelihood = num(j.at("log_likelihood"));
  fit.penalized_log_likelihood = num(j.at("penalized_log_likelihood"));
  for (const auto& e : j.at("entities")) {
    const auto id = e.at("id").get<std::string>();
    fit.entities.push_back(id);
    fit.lambda[id] = e.at("lambda").get<double>();
    if (!e.at("std_error").is_null()) fit.std_errors[id] = e.at("std_error").get<double>();
  }
  return fit;
}

ScaledScores scores_from_fit_json(const nlohmann::json& j) {
  ScaledScores out;
  for (const auto& e : j.at("entities"))
    if (!e.at("score").is_null()) out.score[e.at("id").get<std::string>()] = e.at("score").get<double>();
  return out;
}

}  // namespace pairscale
