#include <doctest.h>

#include <atomic>
#include <cstdlib>
#include <random>

#include "oracles.hpp"
#include "pairscale/config.hpp"
#include "pairscale/errors.hpp"
#include "pairscale/estimator.hpp"
#include "pairscale/io.hpp"
#include "pairscale/manifest.hpp"
#include "pairscale/pipeline.hpp"
#include "pairscale/roster.hpp"
#include "pairscale/stats.hpp"

using namespace pairscale;
namespace fs = std::filesystem;

namespace {

// 30 entities: 14 D, 14 R and two independents caucusing with each side.
// External scales are noisy monotone transforms of the true scores.
struct World {
  std::map<std::string, double> truth;
  std::vector<Entity> roster;
};

World make_world(const fs::path& dir, int n = 30, bool external = true) {
  World w;
  std::mt19937_64 rng(11);
  std::normal_distribution<double> z;
  for (int k = 0; k < n; ++k) {
    const std::string id = oracle::id_of(k);
    const double lambda = -2.0 + 4.0 * (k + 0.5) / n + 0.1 * z(rng);
    std::string group = lambda >= 0 ? "R" : "D";
    std::string caucus = group;
    if (k == 3 || k == n - 4) group = "I";
    w.roster.push_back({id, "Person " + std::to_string(k), group, "S" + std::to_string(k % 7), caucus});
    w.truth[id] = lambda;
  }
  write_roster(dir / "roster.csv", w.roster);
  write_true_scores(dir / "truth.csv", w.truth);
  if (external) {
    std::string text = "entity_id,scale_name,value\n";
    for (const auto& [id, l] : w.truth) {
      text += id + ",nominate_dim1," + io::format_double(0.3 * l + 0.05 * z(rng)) + "\n";
      text += id + ",perceived_ideology," + io::format_double(l + 0.3 * z(rng)) + "\n";
      text += id + ",cfscore," + io::format_double(std::tanh(l) + 0.2 * z(rng)) + "\n";
    }
    io::write_file_atomic(dir / "external.csv", text);
  }
  return w;
}

RunConfig sim_config(const fs::path& dir, const fs::path& out, bool external = true) {
  RunConfig c;
  c.roster = dir / "roster.csv";
  c.simulated_true_scores = dir / "truth.csv";
  if (external) c.external_scales = dir / "external.csv";
  c.out_dir = out;
  c.judge = JudgeKind::Simulated;
  c.seed = 5;
  c.iterations = 2;
  c.concurrency = 3;
  return c;
}

void run_all(const RunConfig& c) {
  cmd_categorize(c);
  cmd_schedule(c);
  cmd_run(c, false);
  cmd_estimate(c);
  cmd_validate(c);
  cmd_plot(c);
  cmd_report(c);
}

std::map<std::string, std::string> snapshot(const fs::path& out) {
  std::map<std::string, std::string> files;
  for (const auto& e : fs::recursive_directory_iterator(out)) {
    if (!e.is_regular_file()) continue;
    const auto rel = fs::relative(e.path(), out).string();
    if (rel == "manifest.json") continue;
    files[rel] = io::read_file(e.path());
  }
  return files;
}

std::string strip_timestamps(const std::string& jsonl) {
  std::string out;
  std::size_t start = 0;
  while (start < jsonl.size()) {
    auto end = jsonl.find('\n', start);
    if (end == std::string::npos) end = jsonl.size();
    auto j = nlohmann::json::parse(jsonl.substr(start, end - start));
    j.erase("timestamp");
    out += j.dump() + "\n";
    start = end + 1;
  }
  return out;
}

class Budgeted final : public Judge {
 public:
  Budgeted(Judge& inner, std::size_t budget) : inner_(inner), budget_(budget) {}
  std::string id() const override { return inner_.id(); }
  Source source() const override { return inner_.source(); }
  std::string categorize(const CategoryQuery& q) override { return inner_.categorize(q); }
  std::string compare(const JudgeRequest& r) override {
    if (compares.fetch_add(1) >= budget_) throw TransportError("connection reset", r.key.str());
    return inner_.compare(r);
  }
  std::optional<std::string> extract(const JudgeRequest& r, const std::string& p) override {
    return inner_.extract(r, p);
  }
  std::atomic<std::size_t> compares{0};

 private:
  Judge& inner_;
  std::size_t budget_;
};

}  // namespace

TEST_CASE("display_group folds unaligned labels into their caucus") {
  PoleLabels labels;
  CHECK(display_group({"a", "A", "D", "X", "D"}, labels) == "D");
  CHECK(display_group({"a", "A", "I", "X", "D"}, labels) == "D");
  CHECK(display_group({"a", "A", "ID", "X", "R"}, labels) == "R");
}

TEST_CASE("full simulated pipeline") {
  oracle::TempDir dir("pipe");
  const auto world = make_world(dir.path());
  const auto c = sim_config(dir.path(), dir / "out");
  run_all(c);
  const OutputPaths p(c.out_dir);

  for (const auto& f : {p.assignments(), p.categorization_log(), p.schedule(), p.transcripts(),
                        p.contest(), p.fit(), p.iteration_fit(1), p.iteration_fit(2), p.report(),
                        p.report_text(), p.density_svg(), p.scatter_svg("nominate_dim1"), p.r2_svg()})
    CHECK_MESSAGE(fs::exists(f), f.string());
  CHECK_FALSE(fs::exists(p.iteration_fit(3)));

  SUBCASE("estimates track the truth") {
    const auto fit = fit_from_json(nlohmann::json::parse(io::read_file(p.fit())));
    CHECK(fit.converged);
    std::vector<double> est, tru;
    for (const auto& id : fit.entities) {
      est.push_back(fit.lambda.at(id));
      tru.push_back(world.truth.at(id));
    }
    CHECK(fit.entities.size() == 30);
    CHECK(spearman(est, tru) > 0.85);
  }

  SUBCASE("report has all, D and R blocks") {
    const auto report = nlohmann::json::parse(io::read_file(p.report()));
    REQUIRE(report.at("groups").size() == 3);
    CHECK(report["groups"][0]["group"] == "all");
    CHECK(report["groups"][1]["group"] == "D");
    CHECK(report["groups"][2]["group"] == "R");
    CHECK(report["groups"][0]["entities"] == 30);
    CHECK(report["groups"][1]["entities"].get<int>() + report["groups"][2]["entities"].get<int>() == 30);
    CHECK(report.at("rank_differences").contains("nominate_dim1"));
    CHECK_FALSE(report.at("iteration_consistency").is_null());
  }

  SUBCASE("a second run reproduces every artifact byte for byte") {
    auto c2 = c;
    c2.out_dir = dir / "out2";
    run_all(c2);
    auto a = snapshot(c.out_dir);
    auto b = snapshot(c2.out_dir);
    REQUIRE(a.size() == b.size());
    for (auto& [name, text] : a) {
      INFO(name);
      REQUIRE(b.count(name));
      if (name == "transcripts.jsonl" || name == "categorization_log.jsonl") {
        CHECK(strip_timestamps(text) == strip_timestamps(b[name]));
      } else {
        CHECK(text == b[name]);
      }
    }
  }

  SUBCASE("concurrency does not change the outcome") {
    auto c2 = c;
    c2.out_dir = dir / "serial";
    c2.concurrency = 1;
    run_all(c2);
    CHECK(io::read_file(p.fit()) == io::read_file(OutputPaths(c2.out_dir).fit()));
    CHECK(io::read_file(p.report()) == io::read_file(OutputPaths(c2.out_dir).report()));
  }

  SUBCASE("estimate, validate and plot rerun identically on the same log") {
    const auto before = snapshot(c.out_dir);
    cmd_estimate(c);
    cmd_validate(c);
    cmd_plot(c);
    cmd_report(c);
    CHECK(snapshot(c.out_dir) == before);
  }

  SUBCASE("a deleted stage output is reported as stale") {
    fs::remove(p.schedule());
    try {
      cmd_run(c, false);
      FAIL("expected StaleStageError");
    } catch (const StaleStageError& e) {
      CHECK(e.stage() == "scheduled");
      CHECK(std::string(e.what()).find("pairscale schedule") != std::string::npos);
    }
    cmd_schedule(c);
    CHECK_NOTHROW(cmd_run(c, false));
  }

  SUBCASE("a tampered transcript log blocks estimation") {
    io::write_file_atomic(p.transcripts(), io::read_file(p.transcripts()) + "\n");
    try {
      cmd_estimate(c);
      FAIL("expected StaleStageError");
    } catch (const StaleStageError& e) {
      CHECK(e.stage() == "executed");
      CHECK(std::string(e.what()).find("pairscale run") != std::string::npos);
    }
  }

  SUBCASE("rerunning a stage invalidates everything downstream") {
    cmd_categorize(c);
    auto m = RunManifest::load(c.out_dir);
    CHECK(m.is_complete(Stage::Categorized));
    CHECK_FALSE(m.is_complete(Stage::Scheduled));
    CHECK_FALSE(m.is_complete(Stage::Estimated));
    CHECK_THROWS_AS(cmd_estimate(c), StaleStageError);
    CHECK_THROWS_AS(cmd_plot(c), StaleStageError);
  }

  SUBCASE("plot refuses an unknown scale and lists the choices") {
    auto c2 = c;
    c2.plot_scale = "dw_nominate";
    try {
      cmd_plot(c2);
      FAIL("expected ConfigError");
    } catch (const ConfigError& e) {
      const std::string msg = e.what();
      CHECK(msg.find("dw_nominate") != std::string::npos);
      CHECK(msg.find("cfscore, nominate_dim1, perceived_ideology") != std::string::npos);
    }
    c2.plot_scale = "cfscore";
    CHECK(cmd_plot(c2).find("scatter_cfscore.svg") != std::string::npos);
  }

  SUBCASE("text report") {
    const auto text = io::read_file(p.report_text());
    CHECK(text.find("entities: 30") != std::string::npos);
    CHECK(text.find("[D]") != std::string::npos);
    CHECK(text.find("iteration consistency") != std::string::npos);
  }
}

TEST_CASE("stages require their predecessors") {
  oracle::TempDir dir("order");
  make_world(dir.path(), 8, false);
  const auto c = sim_config(dir.path(), dir / "out", false);
  try {
    cmd_schedule(c);
    FAIL("expected StaleStageError");
  } catch (const StaleStageError& e) {
    CHECK(std::string(e.what()).find("pairscale categorize") != std::string::npos);
  }
  CHECK_THROWS_AS(cmd_run(c, false), StaleStageError);
  CHECK_THROWS_AS(cmd_estimate(c), StaleStageError);
  CHECK_THROWS_AS(cmd_validate(c), StaleStageError);
  CHECK_THROWS_AS(cmd_report(c), StaleStageError);

  SUBCASE("validate without external scales still reports") {
    cmd_categorize(c);
    cmd_schedule(c);
    cmd_run(c, false);
    cmd_estimate(c);
    CHECK(cmd_validate(c).find("0 external scale(s)") != std::string::npos);
    const auto written = cmd_plot(c);
    CHECK(written == "wrote density.svg");
  }

  SUBCASE("a changed roster makes the schedule stale") {
    cmd_categorize(c);
    cmd_schedule(c);
    io::write_file_atomic(c.roster, io::read_file(c.roster) + "zz,Extra,R,S1,R\n");
    CHECK_THROWS_AS(cmd_run(c, false), StaleStageError);
  }
}

TEST_CASE("resume finishes an interrupted run") {
  oracle::TempDir dir("resume");
  make_world(dir.path(), 10, false);
  auto c = sim_config(dir.path(), dir / "out", false);
  c.use_implied = false;
  c.concurrency = 1;
  cmd_categorize(c);
  cmd_schedule(c);

  auto inner = make_judge(c);
  Budgeted flaky(*inner, 30);
  CHECK_THROWS_AS(cmd_run(c, false, &flaky), TransportError);
  const OutputPaths p(c.out_dir);
  CHECK(read_transcript_log(p.transcripts()).size() == 30);
  CHECK_THROWS_AS(cmd_estimate(c), StaleStageError);

  Budgeted counting(*inner, 1u << 30);
  cmd_run(c, true, &counting);
  CHECK(counting.compares == 90 - 30);
  CHECK(read_transcript_log(p.transcripts()).size() == 90);
  cmd_estimate(c);

  auto c2 = c;
  c2.out_dir = dir / "clean";
  cmd_categorize(c2);
  cmd_schedule(c2);
  cmd_run(c2, false);
  cmd_estimate(c2);
  CHECK(io::read_file(p.fit()) == io::read_file(OutputPaths(c2.out_dir).fit()));
}

TEST_CASE("degenerate rosters") {
  oracle::TempDir dir("tiny");
  SUBCASE("one entity cannot be scaled") {
    make_world(dir.path(), 1, false);
    const auto c = sim_config(dir.path(), dir / "out", false);
    cmd_categorize(c);
    CHECK(cmd_schedule(c).find("scheduled 0 matchups") != std::string::npos);
    cmd_run(c, false);
    CHECK_THROWS_AS(cmd_estimate(c), IdentifiabilityError);
  }
  SUBCASE("empty roster") {
    io::write_file_atomic(dir / "roster.csv", "id,full_name,group,region,caucus_group\n");
    RunConfig c;
    c.roster = dir / "roster.csv";
    c.out_dir = dir / "out";
    c.judge = JudgeKind::Llm;
    CHECK(cmd_categorize(c).find("categorized 0 entities") != std::string::npos);
  }
}

TEST_CASE("tie-only and noise-free judges") {
  oracle::TempDir dir("ties");
  const auto world = make_world(dir.path(), 12, false);
  auto c = sim_config(dir.path(), dir / "out", false);
  c.use_implied = false;

  SUBCASE("always tying gives every entity 0.5") {
    c.tie_probability = 1.0;
    cmd_categorize(c);
    cmd_schedule(c);
    cmd_run(c, false);
    cmd_estimate(c);
    const auto scores = scores_from_fit_json(nlohmann::json::parse(io::read_file(OutputPaths(c.out_dir).fit())));
    REQUIRE(scores.score.size() == 12);
    for (const auto& [id, s] : scores.score) CHECK(s == 0.5);
  }
  SUBCASE("deterministic judge recovers the exact order") {
    c.deterministic = true;
    c.iterations = 1;
    cmd_categorize(c);
    cmd_schedule(c);
    cmd_run(c, false);
    cmd_estimate(c);
    const auto fit = fit_from_json(nlohmann::json::parse(io::read_file(OutputPaths(c.out_dir).fit())));
    std::vector<double> est, tru;
    for (const auto& id : fit.entities) {
      est.push_back(fit.lambda.at(id));
      tru.push_back(world.truth.at(id));
    }
    CHECK(kendall_tau(est, tru) == 1.0);
  }
}

TEST_CASE("judge configuration errors surface early") {
  oracle::TempDir dir("judgecfg");
  make_world(dir.path(), 6, false);
  auto c = sim_config(dir.path(), dir / "out", false);

  SUBCASE("llm without an API key") {
    c.judge = JudgeKind::Llm;
    c.llm.api_key_env = "PAIRSCALE_SURELY_UNSET_KEY";
    ::unsetenv("PAIRSCALE_SURELY_UNSET_KEY");
    try {
      cmd_categorize(c);
      FAIL("expected ConfigError");
    } catch (const ConfigError& e) {
      CHECK(std::string(e.what()).find("PAIRSCALE_SURELY_UNSET_KEY") != std::string::npos);
    }
    CHECK_FALSE(fs::exists(OutputPaths(c.out_dir).assignments()));
  }
  SUBCASE("simulated judge needs true scores") {
    c.simulated_true_scores = dir / "missing.csv";
    CHECK_THROWS_AS(cmd_categorize(c), ConfigError);
  }
  SUBCASE("replay judge needs a log") {
    c.judge = JudgeKind::Replay;
    CHECK_THROWS_AS(make_judge(c), ConfigError);
  }
  SUBCASE("missing roster") {
    c.roster = dir / "nope.csv";
    CHECK_THROWS_AS(cmd_categorize(c), ConfigError);
  }
  SUBCASE("invalid settings") {
    c.categorization_runs = 2;
    CHECK_THROWS_AS(cmd_categorize(c), ConfigError);
  }
}

TEST_CASE("replay categorizations reproduce the fixture counts") {
  oracle::TempDir dir("replaycat");
  RunConfig c;
  c.roster = fs::path(PAIRSCALE_FIXTURES) / "senate_roster.csv";
  c.judge = JudgeKind::Replay;
  c.replay_categorizations = fs::path(PAIRSCALE_FIXTURES) / "senate_categorizations.jsonl";
  c.out_dir = dir / "out";
  const auto summary = cmd_categorize(c);
  CHECK(summary.find("categorized 102 entities") != std::string::npos);
  CHECK(cmd_schedule(c) == "scheduled 15453 matchups over 3 iteration(s): 8001 direct, 7452 implied");
}

TEST_CASE("config files") {
  oracle::TempDir dir("cfg");
  SUBCASE("keys, comments and relative paths") {
    io::write_file_atomic(dir / "run.cfg",
                          "# comment\n\nroster = data/r.csv\njudge = simulated\nseed = 42\n"
                          "iterations=2\nuse_implied = no\npole_a_groups = D, DFL\n"
                          "simulate.seeds = 1, 2,3\nfit.penalty = none\nfit.reference =\n");
    const auto c = load_config(dir / "run.cfg");
    CHECK(c.roster == dir / "data/r.csv");
    CHECK(c.judge == JudgeKind::Simulated);
    CHECK(c.seed == 42);
    CHECK(c.iterations == 2);
    CHECK_FALSE(c.use_implied);
    CHECK(c.labels.pole_a == std::set<std::string>{"D", "DFL"});
    CHECK(c.simulate_seeds == std::vector<std::uint64_t>{1, 2, 3});
    CHECK(c.fit.penalty == Penalty::None);
    CHECK_FALSE(c.fit.reference_id);
  }
  SUBCASE("absolute paths are kept") {
    RunConfig c;
    c.set("out_dir", "/tmp/x", dir.path());
    CHECK(c.out_dir == fs::path("/tmp/x"));
  }
  SUBCASE("errors carry the line number") {
    auto expect_line = [&](const std::string& text, std::size_t line) {
      io::write_file_atomic(dir / "bad.cfg", text);
      try {
        load_config(dir / "bad.cfg");
        FAIL("expected ParseError");
      } catch (const ParseError& e) {
        CHECK(e.line() == line);
      }
    };
    expect_line("seed = 1\nbogus = 2\n", 2);
    expect_line("seed = 1\n\njust words\n", 3);
    expect_line("seed = -1\n", 1);
    expect_line("iterations = 2x\n", 1);
    expect_line("use_implied = maybe\n", 1);
    expect_line("judge = oracle\n", 1);
  }
  SUBCASE("missing file") { CHECK_THROWS_AS(load_config(dir / "none.cfg"), ConfigError); }
  SUBCASE("validation") {
    RunConfig c;
    CHECK_NOTHROW(c.validate());
    c.tie_probability = 1.5;
    CHECK_THROWS_AS(c.validate(), ConfigError);
    c.tie_probability = 0.0;
    c.labels.pole_b.insert("D");
    CHECK_THROWS_AS(c.validate(), ConfigError);
  }
  SUBCASE("the snapshot holds no secrets") {
    RunConfig c;
    c.llm.api_key_env = "MY_KEY";
    ::setenv("MY_KEY", "sk-secret", 1);
    const auto j = config_to_json(c).dump();
    CHECK(j.find("MY_KEY") != std::string::npos);
    CHECK(j.find("sk-secret") == std::string::npos);
  }
}

TEST_CASE("recovery study") {
  oracle::TempDir dir("sim");
  RunConfig c;
  c.out_dir = dir.path();
  c.simulate_count = 20;
  c.iterations = 2;
  c.simulate_seeds = {1, 2};
  const auto summary = cmd_simulate(c);
  CHECK(summary.find("seed 1:") != std::string::npos);
  CHECK(summary.find("seed 2:") != std::string::npos);
  const auto j = nlohmann::json::parse(io::read_file(OutputPaths(c.out_dir).simulation()));
  REQUIRE(j.at("runs").size() == 2);
  for (const auto& r : j["runs"]) {
    CHECK(r["entities"] == 20);
    CHECK(r["converged"] == true);
    CHECK(r["spearman"].get<double>() > 0.7);
    CHECK(r["iteration_consistency"]["r"].size() == 2);
  }
  CHECK(j["mean_spearman"].get<double>() ==
        doctest::Approx((j["runs"][0]["spearman"].get<double>() + j["runs"][1]["spearman"].get<double>()) / 2));

  SUBCASE("seeded runs are reproducible") {
    const auto again = run_recovery(c, 1, dir / "again");
    REQUIRE(again.spearman);
    CHECK(*again.spearman == j["runs"][0]["spearman"].get<double>());
  }
  SUBCASE("bad generator settings") {
    c.simulate_high = c.simulate_low;
    CHECK_THROWS_AS(cmd_simulate(c), ConfigError);
  }
}

#ifdef PAIRSCALE_CLI
TEST_CASE("command line exit codes") {
  oracle::TempDir dir("cli");
  make_world(dir.path(), 6, false);
  const std::string cli = PAIRSCALE_CLI;
  const std::string common = " --roster " + (dir / "roster.csv").string() + " --out " + (dir / "out").string() +
                             " --set simulated.true_scores=" + (dir / "truth.csv").string() +
                             " --judge simulated --iterations 1 > /dev/null 2>&1";
  auto run = [&](const std::string& args) {
    const int status = std::system((cli + " " + args).c_str());
    return WEXITSTATUS(status);
  };
  CHECK(run("--help > /dev/null") == 0);
  CHECK(run("frobnicate > /dev/null 2>&1") == 3);
  CHECK(run("schedule" + common) == 3);
  CHECK(run("categorize" + common) == 0);
  CHECK(run("schedule" + common) == 0);
  CHECK(run("run" + common) == 0);
  CHECK(run("estimate" + common) == 0);
  CHECK(run("report" + common) == 0);
  CHECK(run("plot --scale nothing" + common) == 3);
  CHECK(run("estimate --set bogus=1" + common) == 3);
  CHECK(run("categorize --set simulated.tie_probability=2" + common) == 3);
  CHECK(run("estimate --config " + (dir / "missing.cfg").string() + common) == 3);
  io::write_file_atomic(dir / "bad.cfg", "seed = x\n");
  CHECK(run("estimate --config " + (dir / "bad.cfg").string() + common) == 2);
}
#endif
