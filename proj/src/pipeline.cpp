#include "pairscale/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <exception>
#include <mutex>
#include <random>
#include <set>
#include <thread>

#include "pairscale/errors.hpp"
#include "pairscale/estimator.hpp"
#include "pairscale/io.hpp"
#include "pairscale/llm_judge.hpp"
#include "pairscale/replay_judge.hpp"
#include "pairscale/runner.hpp"
#include "pairscale/schedule.hpp"
#include "pairscale/simulated_judge.hpp"
#include "pairscale/svg.hpp"

namespace pairscale {

namespace fs = std::filesystem;

namespace {

void require_file(const fs::path& p, const std::string& what) {
  if (p.empty()) throw ConfigError(what + " is not configured");
  if (!fs::exists(p)) throw ConfigError(what + " not found: " + p.string());
}

std::vector<Entity> roster_of(const RunConfig& config) {
  require_file(config.roster, "roster");
  return load_roster(config.roster, config.labels);
}

Overrides overrides_of(const RunConfig& config) {
  if (config.overrides.empty()) return {};
  require_file(config.overrides, "overrides file");
  return load_overrides(config.overrides);
}

RunManifest open_manifest(const RunConfig& config) {
  fs::create_directories(config.out_dir);
  auto m = RunManifest::load(config.out_dir);
  m.set_config(config_to_json(config));
  return m;
}

std::vector<fs::path> with_optional(std::vector<fs::path> paths, const fs::path& extra) {
  if (!extra.empty()) paths.push_back(extra);
  return paths;
}

nlohmann::json read_json(const fs::path& p) {
  try {
    return nlohmann::json::parse(io::read_file(p));
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(p.string(), 0, e.what());
  }
}

std::string fmt(double v, int decimals = 3) {
  if (!std::isfinite(v)) return "NA";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", decimals, v);
  return buf;
}

std::string opt_fmt(const std::optional<double>& v, int decimals = 3) {
  return v ? fmt(*v, decimals) : "NA";
}

std::vector<int> iterations_in(const std::vector<Transcript>& transcripts) {
  std::set<int> its;
  for (const auto& t : transcripts) its.insert(t.key.iteration);
  return {its.begin(), its.end()};
}

std::map<std::string, std::string> groups_of(const std::vector<Entity>& roster,
                                             const PoleLabels& labels) {
  std::map<std::string, std::string> out;
  for (const auto& e : roster) out[e.id] = display_group(e, labels);
  return out;
}

std::vector<fs::path> iteration_fit_paths(const OutputPaths& paths) {
  std::vector<fs::path> out;
  for (int it = 1; fs::exists(paths.iteration_fit(it)); ++it) out.push_back(paths.iteration_fit(it));
  return out;
}

std::map<std::string, Scale> external_of(const RunConfig& config) {
  if (config.external_scales.empty()) return {};
  require_file(config.external_scales, "external scales file");
  return load_external_scales(config.external_scales);
}

}  // namespace

std::string display_group(const Entity& entity, const PoleLabels& labels) {
  if (labels.pole_a.count(entity.group) || labels.pole_b.count(entity.group)) return entity.group;
  return entity.caucus_group;
}

std::unique_ptr<Judge> make_judge(const RunConfig& config) {
  switch (config.judge) {
    case JudgeKind::Llm:
      return std::make_unique<LlmJudge>(config.llm);
    case JudgeKind::Replay: {
      std::vector<Transcript> transcripts;
      std::vector<CategorizationRecord> categories;
      if (!config.replay_transcripts.empty()) {
        require_file(config.replay_transcripts, "replay transcript log");
        transcripts = read_transcript_log(config.replay_transcripts);
      }
      if (!config.replay_categorizations.empty()) {
        require_file(config.replay_categorizations, "replay categorization log");
        categories = read_categorization_log(config.replay_categorizations);
      }
      if (transcripts.empty() && categories.empty())
        throw ConfigError("replay judge needs replay.transcripts and/or replay.categorizations");
      return std::make_unique<ReplayJudge>(std::move(transcripts), std::move(categories));
    }
    case JudgeKind::Simulated: {
      require_file(config.simulated_true_scores, "simulated.true_scores");
      SimulatedJudgeConfig sim;
      sim.true_scores = load_true_scores(config.simulated_true_scores);
      sim.tie_probability = config.tie_probability;
      sim.seed = config.seed;
      sim.deterministic = config.deterministic;
      sim.strong_threshold = config.strong_threshold;
      sim.vocab = config.vocab;
      return std::make_unique<SimulatedJudge>(std::move(sim));
    }
  }
  throw ConfigError("unknown judge kind");
}

std::string cmd_categorize(const RunConfig& config, Judge* judge) {
  config.validate();
  const auto roster = roster_of(config);
  const auto overrides = overrides_of(config);
  std::unique_ptr<Judge> owned;
  if (!judge && !roster.empty()) {
    owned = make_judge(config);
    judge = owned.get();
  }
  auto manifest = open_manifest(config);
  manifest.invalidate_from(Stage::Categorized);
  manifest.save();
  const OutputPaths paths(config.out_dir);

  std::vector<CategoryAssignment> assignments(roster.size());
  std::vector<CategorizationRecord> records;
  if (!roster.empty()) {
    RecordingJudge recorder(*judge);
    std::atomic<std::size_t> next{0};
    std::atomic<bool> stop{false};
    std::exception_ptr failure;
    std::mutex failure_mutex;
    auto worker = [&] {
      while (!stop.load()) {
        const std::size_t i = next.fetch_add(1);
        if (i >= roster.size()) return;
        try {
          assignments[i] = categorize_entity(roster[i], recorder, config.categorization_runs,
                                             config.labels, config.vocab);
        } catch (...) {
          std::lock_guard lock(failure_mutex);
          if (!failure) failure = std::current_exception();
          stop.store(true);
        }
      }
    };
    const std::size_t workers = std::max<std::size_t>(1, std::min(config.concurrency, roster.size()));
    if (workers == 1) {
      worker();
    } else {
      std::vector<std::jthread> pool;
      for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(worker);
    }
    records = recorder.records();
    std::sort(records.begin(), records.end(), [](const auto& a, const auto& b) {
      return std::tie(a.entity_id, a.run, a.attempt) < std::tie(b.entity_id, b.run, b.attempt);
    });
    write_categorization_log(paths.categorization_log(), records);
    if (failure) std::rethrow_exception(failure);
  } else {
    write_categorization_log(paths.categorization_log(), records);
  }
  apply_category_overrides(assignments, overrides);
  write_assignments(paths.assignments(), assignments);

  std::vector<std::string> unresolved;
  std::map<std::string, int> counts;
  for (const auto& a : assignments) {
    if (a.unresolved()) {
      unresolved.push_back(a.entity_id);
    } else {
      ++counts[std::string(category_name(*a.category))];
    }
  }
  if (!unresolved.empty()) {
    std::string list;
    for (const auto& id : unresolved) list += (list.empty() ? "" : ", ") + id;
    throw UnresolvedError("no majority category for " + std::to_string(unresolved.size()) +
                              " entit" + (unresolved.size() == 1 ? "y" : "ies") + ": " + list +
                              "; add category overrides and rerun",
                          unresolved);
  }
  manifest.mark(Stage::Categorized, with_optional({config.roster}, config.overrides),
                {paths.assignments(), paths.categorization_log()});
  manifest.save();

  std::string summary = "categorized " + std::to_string(assignments.size()) + " entities:";
  for (auto c : kAllCategories)
    summary += " " + std::string(category_name(c)) + "=" + std::to_string(counts[std::string(category_name(c))]);
  return summary;
}

std::string cmd_schedule(const RunConfig& config) {
  config.validate();
  auto manifest = open_manifest(config);
  manifest.require(Stage::Categorized);
  const OutputPaths paths(config.out_dir);
  const auto roster = roster_of(config);
  const auto assignments = load_assignments(paths.assignments());
  const auto plan = build_schedule(roster, category_map(assignments),
                                   {config.iterations, config.use_implied});
  io::write_file_atomic(paths.schedule(), schedule_to_json(plan).dump(1) + "\n");
  manifest.mark(Stage::Scheduled, {config.roster, paths.assignments()}, {paths.schedule()});
  manifest.save();
  return "scheduled " + std::to_string(plan.direct.size() + plan.implied.size()) +
         " matchups over " + std::to_string(plan.iterations) + " iteration(s): " +
         std::to_string(plan.direct.size()) + " direct, " + std::to_string(plan.implied.size()) +
         " implied";
}

std::string cmd_run(const RunConfig& config, bool resume, Judge* judge) {
  config.validate();
  auto manifest = open_manifest(config);
  manifest.require(Stage::Scheduled);
  const OutputPaths paths(config.out_dir);
  const auto roster = roster_of(config);
  const auto plan = schedule_from_json(read_json(paths.schedule()));

  std::set<MatchupKey> logged;
  if (resume && fs::exists(paths.transcripts()))
    for (const auto& t : read_transcript_log(paths.transcripts())) logged.insert(t.key);
  const bool needs_judge = std::any_of(plan.direct.begin(), plan.direct.end(),
                                       [&](const auto& d) { return !logged.count(d.key); });
  std::unique_ptr<Judge> owned;
  if (!judge && needs_judge) {
    owned = make_judge(config);
    judge = owned.get();
  }
  manifest.invalidate_from(Stage::Executed);
  manifest.save();

  RunOptions options;
  options.log_path = paths.transcripts();
  options.concurrency = config.concurrency;
  options.resume = resume;
  options.vocab = config.vocab;
  options.tie_phrases = config.tie_phrases;
  const auto transcripts = run_schedule(plan, roster, judge, options);

  std::string text;
  std::size_t unresolved = 0;
  for (const auto& t : transcripts) {
    text += to_json(t).dump() + "\n";
    if (!t.resolution.resolved()) ++unresolved;
  }
  io::write_file_atomic(paths.transcripts(), text);
  manifest.mark(Stage::Executed, {paths.schedule()}, {paths.transcripts()});
  manifest.save();
  std::string summary = "resolved " + std::to_string(transcripts.size() - unresolved) + " of " +
                        std::to_string(transcripts.size()) + " matchups";
  if (unresolved)
    summary += "; " + std::to_string(unresolved) +
               " unresolved (add resolution overrides before estimating)";
  return summary;
}

std::string cmd_estimate(const RunConfig& config) {
  config.validate();
  auto manifest = open_manifest(config);
  manifest.require(Stage::Executed);
  const OutputPaths paths(config.out_dir);
  const auto roster = roster_of(config);
  std::vector<std::string> ids;
  for (const auto& e : roster) ids.push_back(e.id);

  const auto transcripts =
      apply_overrides(read_transcript_log(paths.transcripts()), overrides_of(config));
  manifest.invalidate_from(Stage::Estimated);
  manifest.save();

  const auto table = aggregate(transcripts, ids);
  write_contest_csv(paths.contest(), table);
  const auto fit = fit_bt(table, config.fit);
  io::write_file_atomic(paths.fit(), fit_to_json(fit, rescale_unit(fit)).dump(2) + "\n");

  fs::remove_all(paths.dir / "fits");
  fs::create_directories(paths.dir / "fits");
  std::vector<fs::path> outputs{paths.contest(), paths.fit()};
  for (int it : iterations_in(transcripts)) {
    const auto sub = aggregate(filter_iteration(transcripts, it), ids);
    const auto f = fit_bt(sub, config.fit);
    io::write_file_atomic(paths.iteration_fit(it), fit_to_json(f, rescale_unit(f)).dump(2) + "\n");
    outputs.push_back(paths.iteration_fit(it));
  }
  manifest.mark(Stage::Estimated, with_optional({paths.transcripts()}, config.overrides), outputs);
  manifest.save();
  return "fit " + std::to_string(fit.entities.size()) + " entities from " +
         fmt(table.total_mass(), 1) + " comparisons (" + std::string(penalty_name(fit.penalty)) +
         ", " + (fit.converged ? "converged" : "NOT converged") + " in " +
         std::to_string(fit.iterations_used) + " iterations)";
}

std::string cmd_validate(const RunConfig& config) {
  config.validate();
  auto manifest = open_manifest(config);
  manifest.require(Stage::Estimated);
  const OutputPaths paths(config.out_dir);
  const auto roster = roster_of(config);

  ValidationInputs in;
  in.scores = scores_from_fit_json(read_json(paths.fit()));
  for (const auto& p : iteration_fit_paths(paths))
    in.iteration_scores.push_back(scores_from_fit_json(read_json(p)));
  in.external = external_of(config);
  in.group_of = groups_of(roster, config.labels);
  in.response_scale = config.response_scale;
  in.comparator_scale = config.comparator_scale;
  in.top_movers = config.top_movers;
  const auto report = build_report(in);
  io::write_file_atomic(paths.report(), report_to_json(report).dump(2) + "\n");

  auto inputs = iteration_fit_paths(paths);
  inputs.insert(inputs.begin(), paths.fit());
  manifest.mark(Stage::Validated, with_optional(inputs, config.external_scales), {paths.report()});
  manifest.save();
  return "validation report covers " + std::to_string(report.groups.size()) + " group block(s) and " +
         std::to_string(in.external.size()) + " external scale(s)";
}

std::string cmd_plot(const RunConfig& config) {
  config.validate();
  auto manifest = open_manifest(config);
  manifest.require(Stage::Estimated);
  const OutputPaths paths(config.out_dir);
  const auto roster = roster_of(config);
  const auto groups = groups_of(roster, config.labels);
  const auto scores = scores_from_fit_json(read_json(paths.fit()));

  std::map<std::string, std::vector<std::pair<std::string, double>>> by_group;
  for (const auto& [id, s] : scores.score) by_group[groups.count(id) ? groups.at(id) : "?"].emplace_back(id, s);
  io::write_file_atomic(paths.density_svg(),
                        svg::density_plot(by_group, "Distribution of scores by group", "scaled score"));
  std::vector<std::string> written{paths.density_svg().filename().string()};

  const auto external = external_of(config);
  const std::string scale = config.plot_scale.empty() ? config.comparator_scale : config.plot_scale;
  if (!external.count(scale) && (!config.plot_scale.empty() || !external.empty())) {
    std::string available;
    for (const auto& [name, s] : external) available += (available.empty() ? "" : ", ") + name;
    throw ConfigError("external scale '" + scale + "' not found; available: " +
                      (available.empty() ? "(none)" : available));
  }
  if (external.count(scale)) {
    std::vector<svg::Point> points;
    for (const auto& [id, s] : scores.score) {
      auto it = external.at(scale).find(id);
      if (it == external.at(scale).end()) continue;
      points.push_back({id, groups.count(id) ? groups.at(id) : "?", it->second, s});
    }
    io::write_file_atomic(paths.scatter_svg(scale),
                          svg::scatter_plot(points, scale + " vs. scores", scale, "scaled score"));
    written.push_back(paths.scatter_svg(scale).filename().string());
  }

  if (manifest.is_complete(Stage::Validated)) {
    const auto report = read_json(paths.report());
    std::vector<svg::BarGroup> bars;
    for (const auto& g : report.at("groups")) {
      const auto& reg = g.at("regression");
      if (!reg.contains("full")) continue;
      const auto r2 = [&](const char* key) { return reg.at(key).at("r_squared").get<double>(); };
      bars.push_back({g.at("group").get<std::string>(),
                      {{"full", r2("full")},
                       {"only scores", r2("only_scores")},
                       {"only " + config.comparator_scale, r2("only_comparator")}}});
    }
    if (!bars.empty()) {
      io::write_file_atomic(paths.r2_svg(),
                            svg::bar_chart(bars, "Variance in " + config.response_scale + " explained", "R squared"));
      written.push_back(paths.r2_svg().filename().string());
    }
  }
  std::string summary = "wrote";
  for (const auto& w : written) summary += " " + w;
  return summary;
}

std::string cmd_report(const RunConfig& config) {
  config.validate();
  auto manifest = open_manifest(config);
  manifest.require(Stage::Estimated);
  const OutputPaths paths(config.out_dir);
  const auto fitj = read_json(paths.fit());
  const auto fit = fit_from_json(fitj);
  const auto scores = scores_from_fit_json(fitj);

  std::string out;
  out += "Bradley-Terry fit (" + std::string(penalty_name(fit.penalty)) + ")\n";
  out += "  entities: " + std::to_string(fit.entities.size()) + "\n";
  out += "  reference: " + fit.reference_id + "\n";
  out += "  converged: " + std::string(fit.converged ? "yes" : "no") + " after " +
         std::to_string(fit.iterations_used) + " iterations\n";
  out += "  log-likelihood: " + fmt(fit.log_likelihood, 4) +
         "  penalized: " + fmt(fit.penalized_log_likelihood, 4) + "\n";

  std::vector<std::pair<double, std::string>> ranked;
  for (const auto& [id, s] : scores.score) ranked.emplace_back(s, id);
  std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
    return a.first != b.first ? a.first > b.first : a.second < b.second;
  });
  const std::size_t show = std::min<std::size_t>(5, ranked.size());
  out += "  highest scores:";
  for (std::size_t i = 0; i < show; ++i) out += " " + ranked[i].second + "=" + fmt(ranked[i].first);
  out += "\n  lowest scores:";
  for (std::size_t i = 0; i < show; ++i) {
    const auto& r = ranked[ranked.size() - 1 - i];
    out += " " + r.second + "=" + fmt(r.first);
  }
  out += "\n";

  if (manifest.is_complete(Stage::Validated)) {
    const auto report = read_json(paths.report());
    out += "\nValidation\n";
    for (const auto& g : report.at("groups")) {
      out += "  [" + g.at("group").get<std::string>() + "] n=" +
             std::to_string(g.at("entities").get<std::size_t>()) + "\n";
      const auto& pm = g.at("pearson");
      const auto names = pm.at("names").get<std::vector<std::string>>();
      for (std::size_t k = 1; k < names.size(); ++k) {
        const auto& r = pm.at("r")[0][k];
        out += "    pearson(scores, " + names[k] + ") = " +
               (r.is_null() ? std::string("NA") : fmt(r.get<double>())) + " (n=" +
               std::to_string(pm.at("n")[0][k].get<std::size_t>()) + ")\n";
      }
      const auto& reg = g.at("regression");
      if (reg.contains("full")) {
        out += "    R2 full=" + fmt(reg["full"]["r_squared"].get<double>()) +
               " only scores=" + fmt(reg["only_scores"]["r_squared"].get<double>()) +
               " only comparator=" + fmt(reg["only_comparator"]["r_squared"].get<double>()) + "\n";
        const auto& f = reg["partial_f_drop_scores"];
        out += "    partial F (drop scores) = " +
               (f["f_stat"].is_null() ? std::string("inf") : fmt(f["f_stat"].get<double>())) +
               ", p = " + (f["p_value"].is_null() ? std::string("NA") : fmt(f["p_value"].get<double>(), 4)) + "\n";
      } else {
        out += "    regression skipped: " + reg.at("skipped").get<std::string>() + "\n";
      }
    }
    for (const auto& [name, rd] : report.at("rank_differences").items())
      out += "  mean rank difference vs " + name + ": " + fmt(rd.at("mean_abs_diff").get<double>(), 2) +
             " (n=" + std::to_string(rd.at("n").get<std::size_t>()) + ")\n";
    const auto& ic = report.at("iteration_consistency");
    if (!ic.is_null()) {
      out += "  iteration consistency (pearson):\n";
      for (const auto& row : ic.at("r")) {
        out += "   ";
        for (const auto& v : row) out += " " + (v.is_null() ? std::string("  NA ") : fmt(v.get<double>()));
        out += "\n";
      }
    }
  }
  io::write_file_atomic(paths.report_text(), out);
  return out;
}

RecoveryResult run_recovery(const RunConfig& base, std::uint64_t seed, const fs::path& dir) {
  RunConfig config = base;
  config.seed = seed;
  config.judge = JudgeKind::Simulated;
  config.out_dir = dir;
  config.overrides.clear();
  config.external_scales.clear();
  config.use_implied = base.simulate_use_implied;
  config.roster = dir / "roster.csv";
  config.simulated_true_scores = dir / "true_scores.csv";
  config.validate();
  fs::create_directories(dir);

  const std::string pole_a = *config.labels.pole_a.begin();
  const std::string pole_b = *config.labels.pole_b.begin();
  std::mt19937_64 rng(substream_seed(seed, "true-scores"));
  const int width = static_cast<int>(std::to_string(config.simulate_count).size());
  std::vector<Entity> roster;
  std::map<std::string, double> truth;
  for (int i = 1; i <= config.simulate_count; ++i) {
    std::string num = std::to_string(i);
    num.insert(0, static_cast<std::size_t>(width) - num.size(), '0');
    const double lambda =
        config.simulate_low + (config.simulate_high - config.simulate_low) * unit_draw(rng);
    const std::string group = lambda >= 0 ? pole_b : pole_a;
    roster.push_back({"e" + num, "Entity " + num, group, "SIM", group});
    truth["e" + num] = lambda;
  }
  write_roster(config.roster, roster);
  write_true_scores(config.simulated_true_scores, truth);

  cmd_categorize(config);
  cmd_schedule(config);
  cmd_run(config, false);
  cmd_estimate(config);
  cmd_validate(config);

  const OutputPaths paths(dir);
  const auto fit = fit_from_json(read_json(paths.fit()));
  RecoveryResult r;
  r.seed = seed;
  r.entities = fit.entities.size();
  r.converged = fit.converged;
  std::vector<double> est, tru;
  for (const auto& id : fit.entities) {
    est.push_back(fit.lambda.at(id));
    tru.push_back(truth.at(id));
  }
  auto guarded = [&](auto f) -> std::optional<double> {
    try {
      return f(est, tru);
    } catch (const DomainError&) {
      return std::nullopt;
    }
  };
  r.spearman = guarded([](const auto& a, const auto& b) { return spearman(a, b); });
  r.pearson = guarded([](const auto& a, const auto& b) { return pearson(a, b); });
  r.kendall = guarded([](const auto& a, const auto& b) { return kendall_tau(a, b); });
  std::vector<ScaledScores> per_iteration;
  for (const auto& p : iteration_fit_paths(paths)) per_iteration.push_back(scores_from_fit_json(read_json(p)));
  if (per_iteration.size() >= 2) {
    try {
      r.iteration_consistency = iteration_consistency(per_iteration);
    } catch (const DomainError&) {
    }
  }
  return r;
}

RecoveryStudy run_recovery_study(const RunConfig& config) {
  auto seeds = config.simulate_seeds;
  if (seeds.empty()) seeds.push_back(config.seed);
  RecoveryStudy study;
  for (auto s : seeds)
    study.runs.push_back(run_recovery(config, s, config.out_dir / "simulate" / ("seed_" + std::to_string(s))));
  auto mean = [&](std::optional<double> RecoveryResult::*m) -> std::optional<double> {
    double total = 0.0;
    for (const auto& r : study.runs) {
      if (!(r.*m)) return std::nullopt;
      total += *(r.*m);
    }
    return total / static_cast<double>(study.runs.size());
  };
  study.mean_spearman = mean(&RecoveryResult::spearman);
  study.mean_pearson = mean(&RecoveryResult::pearson);
  study.mean_kendall = mean(&RecoveryResult::kendall);
  return study;
}

nlohmann::ordered_json recovery_to_json(const RecoveryStudy& study) {
  auto opt = [](const std::optional<double>& v) {
    return v ? nlohmann::ordered_json(*v) : nlohmann::ordered_json(nullptr);
  };
  nlohmann::ordered_json j;
  auto runs = nlohmann::ordered_json::array();
  for (const auto& r : study.runs) {
    nlohmann::ordered_json jr;
    jr["seed"] = r.seed;
    jr["entities"] = r.entities;
    jr["converged"] = r.converged;
    jr["spearman"] = opt(r.spearman);
    jr["pearson"] = opt(r.pearson);
    jr["kendall"] = opt(r.kendall);
    if (r.iteration_consistency) {
      auto rows = nlohmann::ordered_json::array();
      for (const auto& row : r.iteration_consistency->r) {
        auto jrow = nlohmann::ordered_json::array();
        for (const auto& v : row) jrow.push_back(opt(v));
        rows.push_back(std::move(jrow));
      }
      jr["iteration_consistency"] = {{"names", r.iteration_consistency->names}, {"r", rows}};
    } else {
      jr["iteration_consistency"] = nullptr;
    }
    runs.push_back(std::move(jr));
  }
  j["runs"] = std::move(runs);
  j["mean_spearman"] = opt(study.mean_spearman);
  j["mean_pearson"] = opt(study.mean_pearson);
  j["mean_kendall"] = opt(study.mean_kendall);
  return j;
}

std::string cmd_simulate(const RunConfig& config) {
  config.validate();
  const auto study = run_recovery_study(config);
  const OutputPaths paths(config.out_dir);
  io::write_file_atomic(paths.simulation(), recovery_to_json(study).dump(2) + "\n");
  std::string out = "recovery of true scores (n=" + std::to_string(config.simulate_count) + "):\n";
  for (const auto& r : study.runs) {
    out += "  seed " + std::to_string(r.seed) + ": spearman=" + opt_fmt(r.spearman, 4) +
           " pearson=" + opt_fmt(r.pearson, 4) + " kendall=" + opt_fmt(r.kendall, 4);
    if (r.iteration_consistency) {
      double lo = 1.0;
      for (const auto& row : r.iteration_consistency->r)
        for (const auto& v : row) lo = std::min(lo, v.value_or(1.0));
      out += " min iteration r=" + fmt(lo, 4);
    }
    out += "\n";
  }
  out += "  mean spearman=" + opt_fmt(study.mean_spearman, 4) + " pearson=" +
         opt_fmt(study.mean_pearson, 4) + " kendall=" + opt_fmt(study.mean_kendall, 4) + "\n";
  return out;
}

}  // namespace pairscale
