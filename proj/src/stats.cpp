#include "pairscale/stats.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <set>

#include <Eigen/Dense>

#include "pairscale/errors.hpp"
#include "pairscale/io.hpp"
#include "pairscale/special.hpp"

namespace pairscale {

namespace {

struct Paired {
  std::vector<double> x, y;
};

Paired complete(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw DomainError("correlation arguments differ in length");
  Paired out;
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (std::isnan(x[i]) || std::isnan(y[i])) continue;
    out.x.push_back(x[i]);
    out.y.push_back(y[i]);
  }
  if (out.x.size() < 3) throw DomainError("correlation needs at least 3 complete pairs");
  return out;
}

double pearson_complete(const std::vector<double>& x, const std::vector<double>& y) {
  const double n = static_cast<double>(x.size());
  const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
  const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
  double sxx = 0, syy = 0, sxy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double dx = x[i] - mx, dy = y[i] - my;
    sxx += dx * dx;
    syy += dy * dy;
    sxy += dx * dy;
  }
  if (!(sxx > 0) || !(syy > 0)) throw DomainError("correlation undefined for zero variance");
  return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

}  // namespace

std::size_t complete_pairs(std::span<const double> x, std::span<const double> y) {
  std::size_t n = 0;
  for (std::size_t i = 0; i < std::min(x.size(), y.size()); ++i)
    if (!std::isnan(x[i]) && !std::isnan(y[i])) ++n;
  return n;
}

double pearson(std::span<const double> x, std::span<const double> y) {
  const auto p = complete(x, y);
  return pearson_complete(p.x, p.y);
}

std::vector<double> average_ranks(std::span<const double> values) {
  std::vector<std::size_t> order(values.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
  std::vector<double> ranks(values.size());
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j + 1 < order.size() && values[order[j + 1]] == values[order[i]]) ++j;
    const double avg = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = avg;
    i = j + 1;
  }
  return ranks;
}

double spearman(std::span<const double> x, std::span<const double> y) {
  const auto p = complete(x, y);
  return pearson_complete(average_ranks(p.x), average_ranks(p.y));
}

double kendall_tau(std::span<const double> x, std::span<const double> y) {
  const auto p = complete(x, y);
  double concordant = 0, discordant = 0, ties_x = 0, ties_y = 0;
  for (std::size_t i = 0; i < p.x.size(); ++i) {
    for (std::size_t j = i + 1; j < p.x.size(); ++j) {
      const double dx = p.x[i] - p.x[j];
      const double dy = p.y[i] - p.y[j];
      if (dx == 0 && dy == 0) continue;
      if (dx == 0) {
        ties_x += 1;
      } else if (dy == 0) {
        ties_y += 1;
      } else if ((dx > 0) == (dy > 0)) {
        concordant += 1;
      } else {
        discordant += 1;
      }
    }
  }
  const double denom =
      std::sqrt((concordant + discordant + ties_x) * (concordant + discordant + ties_y));
  if (!(denom > 0)) throw DomainError("Kendall tau undefined for constant input");
  return (concordant - discordant) / denom;
}

RegressionResult ols(std::span<const double> y, const std::vector<std::vector<double>>& columns,
                     std::vector<std::string> names) {
  const std::size_t n = y.size();
  const std::size_t p = columns.size();
  if (names.empty()) {
    for (std::size_t c = 0; c < p; ++c) names.push_back("x" + std::to_string(c + 1));
  }
  if (names.size() != p) throw DomainError("predictor names and columns differ in count");
  if (n <= p + 1)
    throw DomainError("ols needs n > p + 1 (n=" + std::to_string(n) + ", p=" + std::to_string(p) + ")");

  Eigen::MatrixXd design(n, p + 1);
  Eigen::VectorXd response(n);
  for (std::size_t r = 0; r < n; ++r) {
    if (std::isnan(y[r])) throw DomainError("ols response has missing values");
    response[r] = y[r];
    design(r, 0) = 1.0;
  }
  for (std::size_t c = 0; c < p; ++c) {
    if (columns[c].size() != n) throw DomainError("predictor '" + names[c] + "' has wrong length");
    for (std::size_t r = 0; r < n; ++r) {
      if (std::isnan(columns[c][r])) throw DomainError("predictor '" + names[c] + "' has missing values");
      design(r, c + 1) = columns[c][r];
    }
  }

  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(design);
  if (static_cast<std::size_t>(qr.rank()) < p + 1) {
    std::string cols;
    const auto& perm = qr.colsPermutation().indices();
    for (Eigen::Index k = qr.rank(); k < perm.size(); ++k) {
      const auto c = static_cast<std::size_t>(perm[k]);
      cols += (cols.empty() ? "" : ", ") + (c == 0 ? std::string("intercept") : names[c - 1]);
    }
    throw DomainError("design matrix is rank deficient; collinear column(s): " + cols);
  }
  const Eigen::VectorXd beta = qr.solve(response);
  const Eigen::VectorXd resid = response - design * beta;

  RegressionResult out;
  out.predictors = std::move(names);
  out.coefficients.assign(beta.data(), beta.data() + beta.size());
  out.rss = resid.squaredNorm();
  out.tss = (response.array() - response.mean()).square().sum();
  if (!(out.tss > 0)) throw DomainError("ols response has zero variance");
  out.r_squared = std::clamp(1.0 - out.rss / out.tss, 0.0, 1.0);
  out.n = n;
  out.p = p;
  return out;
}

PartialFResult partial_f(const RegressionResult& full, const RegressionResult& reduced) {
  for (const auto& name : reduced.predictors) {
    if (std::find(full.predictors.begin(), full.predictors.end(), name) == full.predictors.end())
      throw ValidationError("reduced model predictor '" + name + "' is not in the full model");
  }
  if (full.n != reduced.n) throw ValidationError("nested models were fit on different rows");
  if (reduced.p > full.p) throw ValidationError("reduced model has more predictors than full");
  PartialFResult out;
  out.df1 = static_cast<int>(full.p - reduced.p);
  out.df2 = static_cast<int>(full.n - full.p - 1);
  if (out.df1 == 0) return out;  // same model: F = 0, p = 1
  if (out.df2 < 1) throw ValidationError("partial F test needs n > p_full + 1");
  const double num = std::max(0.0, reduced.rss - full.rss) / out.df1;
  const double den = full.rss / out.df2;
  if (den > 0) {
    out.f_stat = num / den;
    out.p_value = f_sf(out.f_stat, out.df1, out.df2);
  } else {
    out.f_stat = num > 0 ? std::numeric_limits<double>::infinity() : 0.0;
    out.p_value = num > 0 ? 0.0 : 1.0;
  }
  return out;
}

NestedComparison nested_f_test(std::span<const double> y,
                               const std::map<std::string, std::vector<double>>& predictors,
                               const std::vector<std::string>& full,
                               const std::vector<std::string>& reduced) {
  for (const auto& name : full)
    if (!predictors.count(name)) throw ValidationError("unknown predictor '" + name + "'");
  for (const auto& name : reduced) {
    if (std::find(full.begin(), full.end(), name) == full.end())
      throw ValidationError("reduced predictor '" + name + "' is not in the full model");
  }
  std::vector<std::size_t> rows;
  for (std::size_t r = 0; r < y.size(); ++r) {
    bool ok = !std::isnan(y[r]);
    for (const auto& name : full) {
      const auto& col = predictors.at(name);
      if (col.size() != y.size()) throw DomainError("predictor '" + name + "' has wrong length");
      ok = ok && !std::isnan(col[r]);
    }
    if (ok) rows.push_back(r);
  }
  auto subset = [&](std::span<const double> v) {
    std::vector<double> out;
    out.reserve(rows.size());
    for (auto r : rows) out.push_back(v[r]);
    return out;
  };
  auto fit = [&](const std::vector<std::string>& names) {
    std::vector<std::vector<double>> cols;
    for (const auto& name : names) cols.push_back(subset(predictors.at(name)));
    const auto ys = subset(y);
    return ols(ys, cols, names);
  };
  NestedComparison out;
  out.full = fit(full);
  out.reduced = fit(reduced);
  out.test = partial_f(out.full, out.reduced);
  return out;
}

RankDiff rank_diff(const Scale& a, const Scale& b) {
  std::vector<std::string> ids;
  std::vector<double> va, vb;
  for (const auto& [id, v] : a) {
    auto it = b.find(id);
    if (it == b.end() || std::isnan(v) || std::isnan(it->second)) continue;
    ids.push_back(id);
    va.push_back(-v);  // rank 1 = largest value
    vb.push_back(-it->second);
  }
  if (ids.size() < 2) throw DomainError("rank_diff: scales share fewer than 2 entities");
  const auto ra = average_ranks(va);
  const auto rb = average_ranks(vb);
  RankDiff out;
  out.n = ids.size();
  double total = 0.0;
  for (std::size_t i = 0; i < ids.size(); ++i) {
    const double shift = std::abs(ra[i] - rb[i]);
    total += shift;
    out.movements.push_back({ids[i], ra[i], rb[i], shift});
  }
  out.mean_abs_diff = total / static_cast<double>(ids.size());
  std::stable_sort(out.movements.begin(), out.movements.end(),
                   [](const RankMovement& x, const RankMovement& y) { return x.shift > y.shift; });
  return out;
}

CorrelationMatrix correlation_matrix(const std::vector<std::string>& names,
                                     const std::vector<Scale>& scales,
                                     const std::vector<std::string>& entities,
                                     CorrelationMethod method) {
  const std::size_t k = names.size();
  const double nan = std::numeric_limits<double>::quiet_NaN();
  std::vector<std::vector<double>> cols(k, std::vector<double>(entities.size(), nan));
  for (std::size_t s = 0; s < k; ++s) {
    for (std::size_t e = 0; e < entities.size(); ++e) {
      auto it = scales[s].find(entities[e]);
      if (it != scales[s].end()) cols[s][e] = it->second;
    }
  }
  CorrelationMatrix m;
  m.names = names;
  m.r.assign(k, std::vector<std::optional<double>>(k));
  m.n.assign(k, std::vector<std::size_t>(k, 0));
  for (std::size_t a = 0; a < k; ++a) {
    for (std::size_t b = a; b < k; ++b) {
      const std::size_t n = complete_pairs(cols[a], cols[b]);
      std::optional<double> r;
      if (a == b) {
        r = 1.0;
      } else {
        try {
          r = method == CorrelationMethod::Pearson ? pearson(cols[a], cols[b])
                                                   : spearman(cols[a], cols[b]);
        } catch (const DomainError&) {
          r.reset();
        }
      }
      m.r[a][b] = m.r[b][a] = r;
      m.n[a][b] = m.n[b][a] = n;
    }
  }
  return m;
}

CorrelationMatrix iteration_consistency(const std::vector<ScaledScores>& per_iteration) {
  if (per_iteration.size() < 2) throw DomainError("iteration consistency needs >= 2 iterations");
  std::vector<std::string> common;
  for (const auto& [id, v] : per_iteration.front().score) {
    bool everywhere = true;
    for (const auto& s : per_iteration) everywhere = everywhere && s.score.count(id);
    if (everywhere) common.push_back(id);
  }
  std::vector<std::string> names;
  std::vector<Scale> scales;
  for (std::size_t i = 0; i < per_iteration.size(); ++i) {
    names.push_back("iteration_" + std::to_string(i + 1));
    scales.push_back(per_iteration[i].score);
  }
  auto m = correlation_matrix(names, scales, common, CorrelationMethod::Pearson);
  for (std::size_t a = 0; a < m.names.size(); ++a) {
    for (std::size_t b = 0; b < m.names.size(); ++b)
      if (!m.r[a][b]) throw DomainError("iteration correlation undefined (zero variance?)");
  }
  return m;
}

namespace {

RegressionBlock regressions(const ValidationInputs& in, const std::vector<std::string>& entities) {
  RegressionBlock block;
  auto resp = in.external.find(in.response_scale);
  auto comp = in.external.find(in.comparator_scale);
  if (resp == in.external.end() || comp == in.external.end()) {
    block.skipped_reason = "scales '" + in.response_scale + "' and '" + in.comparator_scale +
                           "' are both required";
    return block;
  }
  const double nan = std::numeric_limits<double>::quiet_NaN();
  std::vector<double> y;
  std::map<std::string, std::vector<double>> preds;
  auto value = [&](const Scale& s, const std::string& id) {
    auto it = s.find(id);
    return it == s.end() ? nan : it->second;
  };
  for (const auto& id : entities) {
    y.push_back(value(resp->second, id));
    preds[in.comparator_scale].push_back(value(comp->second, id));
    preds[in.score_name].push_back(value(in.scores.score, id));
  }
  const std::vector<std::string> full{in.comparator_scale, in.score_name};
  try {
    const auto drop_scores = nested_f_test(y, preds, full, {in.comparator_scale});
    const auto drop_comp = nested_f_test(y, preds, full, {in.score_name});
    block.full = drop_scores.full;
    block.only_comparator = drop_scores.reduced;
    block.only_scores = drop_comp.reduced;
    block.drop_scores = drop_scores.test;
    block.drop_comparator = drop_comp.test;
  } catch (const Error& err) {
    block = RegressionBlock{};
    block.skipped_reason = err.what();
  }
  return block;
}

nlohmann::ordered_json matrix_json(const CorrelationMatrix& m) {
  nlohmann::ordered_json j;
  j["names"] = m.names;
  auto r = nlohmann::ordered_json::array();
  for (const auto& row : m.r) {
    auto jr = nlohmann::ordered_json::array();
    for (const auto& v : row) jr.push_back(v ? nlohmann::ordered_json(*v) : nlohmann::ordered_json(nullptr));
    r.push_back(std::move(jr));
  }
  j["r"] = std::move(r);
  j["n"] = m.n;
  return j;
}

nlohmann::ordered_json num(double v) {
  return std::isfinite(v) ? nlohmann::ordered_json(v) : nlohmann::ordered_json(nullptr);
}

nlohmann::ordered_json regression_json(const RegressionResult& r) {
  nlohmann::ordered_json j;
  j["predictors"] = r.predictors;
  j["coefficients"] = r.coefficients;
  j["r_squared"] = num(r.r_squared);
  j["rss"] = num(r.rss);
  j["n"] = r.n;
  j["p"] = r.p;
  return j;
}

nlohmann::ordered_json ftest_json(const PartialFResult& f) {
  nlohmann::ordered_json j;
  j["f_stat"] = num(f.f_stat);
  j["df1"] = f.df1;
  j["df2"] = f.df2;
  j["p_value"] = num(f.p_value);
  return j;
}

}  // namespace

ValidationReport build_report(const ValidationInputs& in) {
  ValidationReport report;
  report.score_name = in.score_name;
  report.top_movers = in.top_movers;

  std::vector<std::string> names{in.score_name};
  std::vector<Scale> scales{in.scores.score};
  for (const auto& [name, scale] : in.external) {
    if (name == in.score_name) continue;
    names.push_back(name);
    scales.push_back(scale);
  }

  std::map<std::string, std::vector<std::string>> groups;
  std::vector<std::string> all;
  for (const auto& [id, v] : in.scores.score) {
    all.push_back(id);
    auto g = in.group_of.find(id);
    if (g != in.group_of.end()) groups[g->second].push_back(id);
  }
  auto block = [&](std::string label, const std::vector<std::string>& members) {
    GroupBlock b;
    b.group = std::move(label);
    b.entities = members.size();
    b.pearson = correlation_matrix(names, scales, members, CorrelationMethod::Pearson);
    b.spearman = correlation_matrix(names, scales, members, CorrelationMethod::Spearman);
    b.regression = regressions(in, members);
    return b;
  };
  report.groups.push_back(block("all", all));
  for (const auto& [label, members] : groups) report.groups.push_back(block(label, members));

  for (const auto& [name, scale] : in.external) {
    if (name == in.score_name) continue;
    try {
      report.rank_diffs.emplace(name, rank_diff(in.scores.score, scale));
    } catch (const DomainError&) {
    }
  }
  if (in.iteration_scores.size() >= 2) {
    try {
      report.iteration_consistency = iteration_consistency(in.iteration_scores);
    } catch (const DomainError&) {
      report.iteration_consistency.reset();
    }
  }
  return report;
}

nlohmann::ordered_json report_to_json(const ValidationReport& report) {
  nlohmann::ordered_json j;
  j["score_name"] = report.score_name;
  auto groups = nlohmann::ordered_json::array();
  for (const auto& g : report.groups) {
    nlohmann::ordered_json jg;
    jg["group"] = g.group;
    jg["entities"] = g.entities;
    jg["pearson"] = matrix_json(g.pearson);
    jg["spearman"] = matrix_json(g.spearman);
    nlohmann::ordered_json reg;
    if (g.regression.full) {
      reg["full"] = regression_json(*g.regression.full);
      reg["only_scores"] = regression_json(*g.regression.only_scores);
      reg["only_comparator"] = regression_json(*g.regression.only_comparator);
      reg["partial_f_drop_scores"] = ftest_json(*g.regression.drop_scores);
      reg["partial_f_drop_comparator"] = ftest_json(*g.regression.drop_comparator);
    } else {
      reg["skipped"] = g.regression.skipped_reason;
    }
    jg["regression"] = std::move(reg);
    groups.push_back(std::move(jg));
  }
  j["groups"] = std::move(groups);

  nlohmann::ordered_json ranks = nlohmann::ordered_json::object();
  for (const auto& [name, rd] : report.rank_diffs) {
    nlohmann::ordered_json jr;
    jr["n"] = rd.n;
    jr["mean_abs_diff"] = rd.mean_abs_diff;
    auto movers = nlohmann::ordered_json::array();
    for (std::size_t i = 0; i < rd.movements.size() && i < report.top_movers; ++i) {
      const auto& m = rd.movements[i];
      movers.push_back({{"id", m.id}, {"rank_scores", m.rank_a}, {"rank_scale", m.rank_b},
                        {"shift", m.shift}});
    }
    jr["top_movers"] = std::move(movers);
    ranks[name] = std::move(jr);
  }
  j["rank_differences"] = std::move(ranks);
  j["iteration_consistency"] = report.iteration_consistency
                                   ? matrix_json(*report.iteration_consistency)
                                   : nlohmann::ordered_json(nullptr);
  return j;
}

std::map<std::string, Scale> load_external_scales(const std::filesystem::path& path) {
  const auto csv = io::read_csv(path);
  io::require_header(csv, {"entity_id", "scale_name", "value"}, path.string());
  std::map<std::string, Scale> out;
  for (const auto& row : csv.rows) {
    if (row.fields[2].empty() || row.fields[2] == "NA") continue;  // missing
    double v = 0;
    try {
      std::size_t used = 0;
      v = std::stod(row.fields[2], &used);
      if (used != row.fields[2].size()) throw std::invalid_argument("trailing");
    } catch (const std::exception&) {
      throw ParseError(path.string(), row.line, "value '" + row.fields[2] + "' is not a number");
    }
    if (!out[row.fields[1]].emplace(row.fields[0], v).second)
      throw ParseError(path.string(), row.line,
                       "duplicate value for " + row.fields[0] + " in " + row.fields[1]);
  }
  return out;
}

}  // namespace pairscale
