#include <doctest.h>

#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <random>
#include <thread>

#include <json.hpp>

#include "oracles.hpp"
#include "pairscale/errors.hpp"
#include "pairscale/io.hpp"
#include "pairscale/llm_judge.hpp"
#include "pairscale/matching.hpp"
#include "pairscale/replay_judge.hpp"
#include "pairscale/runner.hpp"
#include "pairscale/schedule.hpp"
#include "pairscale/simulated_judge.hpp"

#include <httplib.h>

using namespace pairscale;

namespace {

const std::array<Candidate, 2> kCruzCotton{{{"cotton-ar", "Tom Cotton"}, {"cruz-tx", "Ted Cruz"}}};

const char* kMarkeyParagraph =
    "Ed Markey (D-MA) is generally considered to be more liberal than Cory Booker (D-NJ). Markey "
    "is a co-author of the Green New Deal and has been a vocal advocate for progressive policies "
    "on climate change, healthcare, and social justice. Booker, on the other hand, has centered "
    "his policy platform around criminal justice reform, economic opportunity, and affordable "
    "housing. While both senators are members of the Democratic Party and share similar values, "
    "Markey has a more progressive track record and has often been positioned as a leader of the "
    "left-wing of the party.";

JudgeRequest markey_booker_request() {
  JudgeRequest r;
  r.key = {EntityPair::canonical("markey-ma", "booker-nj"), 1};
  r.framing = Framing::TowardPoleA;
  r.candidates = {{{"booker-nj", "Cory Booker"}, {"markey-ma", "Ed Markey"}}};
  r.prompt = "Which senator is more liberal: Cory Booker (D-NJ) or Ed Markey (D-MA)?";
  return r;
}

JudgeRequest request(const std::string& a, const std::string& b, Framing f, int iteration = 1) {
  JudgeRequest r;
  r.key = {EntityPair::canonical(a, b), iteration};
  r.framing = f;
  r.candidates = {{{r.key.pair.first, r.key.pair.first}, {r.key.pair.second, r.key.pair.second}}};
  return r;
}

// Counts calls and fails with TransportError once `budget` compares are used.
class FlakyJudge final : public Judge {
 public:
  FlakyJudge(Judge& inner, std::size_t budget) : inner_(inner), budget_(budget) {}
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

class ThrowingExtractJudge final : public Judge {
 public:
  explicit ThrowingExtractJudge(std::string raw) : raw_(std::move(raw)) {}
  std::string id() const override { return "throwing"; }
  Source source() const override { return Source::LlmDirect; }
  std::string categorize(const CategoryQuery&) override { return {}; }
  std::string compare(const JudgeRequest&) override { return raw_; }
  std::optional<std::string> extract(const JudgeRequest& r, const std::string&) override {
    throw TransportError("timeout", r.key.str());
  }

 private:
  std::string raw_;
};

struct SmallPlan {
  std::vector<Entity> entities;
  std::map<std::string, double> truth;
  SchedulePlan plan;
};

SmallPlan small_plan(int iterations = 2) {
  SmallPlan s;
  const std::vector<std::tuple<std::string, std::string, Category, double>> rows{
      {"a1", "D", {Pole::A, Strength::Strong}, -1.8}, {"a2", "D", {Pole::A, Strength::Moderate}, -0.6},
      {"a3", "D", {Pole::A, Strength::Moderate}, -0.2}, {"b1", "R", {Pole::B, Strength::Moderate}, 0.3},
      {"b2", "R", {Pole::B, Strength::Moderate}, 0.9}, {"b3", "R", {Pole::B, Strength::Strong}, 1.7},
      {"b4", "R", {Pole::B, Strength::Strong}, 1.4}};
  std::map<std::string, Category> cats;
  for (const auto& [id, group, cat, score] : rows) {
    s.entities.push_back({id, "Member " + id, group, "ST", group});
    cats[id] = cat;
    s.truth[id] = score;
  }
  s.plan = build_schedule(s.entities, cats, {iterations, true});
  return s;
}

RunOptions options_for(const std::filesystem::path& log) {
  RunOptions o;
  o.log_path = log;
  o.clock = [] { return std::string("2024-01-01T00:00:00Z"); };
  return o;
}

std::vector<Resolution> resolutions(const std::vector<Transcript>& ts) {
  std::vector<Resolution> out;
  for (const auto& t : ts) out.push_back(t.resolution);
  return out;
}

// Minimal chat-completion endpoint on localhost.
class FakeCompletions {
 public:
  explicit FakeCompletions(std::function<void(const httplib::Request&, httplib::Response&)> h)
      : handler_(std::move(h)) {
    server_.Post("/v1/chat/completions", [this](const httplib::Request& req, httplib::Response& res) {
      ++hits;
      last_body = req.body;
      last_auth = req.get_header_value("Authorization");
      handler_(req, res);
    });
    port_ = server_.bind_to_any_port("127.0.0.1");
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
  }
  ~FakeCompletions() {
    server_.stop();
    thread_.join();
  }
  std::string endpoint() const {
    return "http://127.0.0.1:" + std::to_string(port_) + "/v1/chat/completions";
  }

  std::atomic<int> hits{0};
  std::string last_body;
  std::string last_auth;

 private:
  std::function<void(const httplib::Request&, httplib::Response&)> handler_;
  httplib::Server server_;
  int port_ = 0;
  std::thread thread_;
};

void reply(httplib::Response& res, const std::string& content) {
  nlohmann::json j;
  j["choices"] = nlohmann::json::array({{{"message", {{"role", "assistant"}, {"content", content}}}}});
  res.set_content(j.dump(), "application/json");
}

LlmJudgeConfig llm_config(const std::string& endpoint, const std::filesystem::path& cache = {}) {
  LlmJudgeConfig c;
  c.endpoint = endpoint;
  c.model = "test-model";
  c.requests_per_minute = 600000;
  c.initial_backoff_ms = 1;
  c.max_retries = 3;
  c.timeout_seconds = 5;
  c.api_key_env = "PAIRSCALE_TEST_KEY";
  c.cache_dir = cache;
  return c;
}

}  // namespace

TEST_CASE("normalize_text") {
  CHECK(normalize_text("Senator Ted Cruz.") == "ted cruz");
  CHECK(normalize_text("Sen. Ted Cruz") == "ted cruz");
  CHECK(normalize_text("  SEN.   Ted\tCruz!! ") == "ted cruz");
  CHECK(normalize_text("Beto O'Rourke") == "beto orourke");
  CHECK(normalize_text("Beto O\xE2\x80\x99Rourke") == "beto orourke");
  CHECK(normalize_text("Chris Van Hollen (D-MD)") == "chris van hollen d md");
  CHECK(normalize_text("Senatorial") == "senatorial");
  CHECK(normalize_text("") == "");
  CHECK(normalize_text("...") == "");
}

TEST_CASE("local_match") {
  CHECK(local_match("Senator Ted Cruz.", kCruzCotton) == Resolution::winner("cruz-tx"));
  CHECK(local_match("Cruz", kCruzCotton) == Resolution::winner("cruz-tx"));
  CHECK(local_match("ted cruz", kCruzCotton) == Resolution::winner("cruz-tx"));
  CHECK(local_match("Sen. Tom Cotton (R-AR)", kCruzCotton) == Resolution::winner("cotton-ar"));
  CHECK(local_match("Ted Cruz and Tom Cotton are comparable", kCruzCotton) ==
        Resolution::unresolved());
  CHECK(local_match("Both senators are equally conservative; I cannot say.", kCruzCotton) ==
        Resolution::tie());
  CHECK(local_match("I am unable to determine that.", kCruzCotton) == Resolution::tie());
  CHECK(local_match("Mitch McConnell", kCruzCotton) == Resolution::unresolved());
  CHECK(local_match("", kCruzCotton) == Resolution::unresolved());
  // "both" is a whole-word rule, not a substring one.
  CHECK(local_match("bothersome", kCruzCotton) == Resolution::unresolved());

  SUBCASE("a unique name beats a tie phrase") {
    CHECK(local_match("Cruz, though both are conservative.", kCruzCotton) ==
          Resolution::winner("cruz-tx"));
  }
  SUBCASE("curly apostrophes and suffixes") {
    const std::array<Candidate, 2> c{{{"orourke", "Beto O'Rourke"}, {"casey-pa", "Bob Casey Jr."}}};
    CHECK(local_match("Beto O\xE2\x80\x99Rourke", c) == Resolution::winner("orourke"));
    CHECK(local_match("Senator Casey", c) == Resolution::winner("casey-pa"));
    CHECK(local_match("Bob Casey, Jr.", c) == Resolution::winner("casey-pa"));
  }
  SUBCASE("shared last names need the full name") {
    const std::array<Candidate, 2> c{{{"kelly-az", "Mark Kelly"}, {"kelly-xx", "John Kelly"}}};
    CHECK(local_match("Kelly", c) == Resolution::unresolved());
    CHECK(local_match("Mark Kelly", c) == Resolution::winner("kelly-az"));
  }
  SUBCASE("custom tie lexicon") {
    CHECK(local_match("they are the same", kCruzCotton, {"the same"}) == Resolution::tie());
    CHECK(local_match("both", kCruzCotton, {"the same"}) == Resolution::unresolved());
  }
}

TEST_CASE("extraction prompt uses the framing's instruction") {
  const Vocabulary v;
  const auto a = extraction_prompt("raw", Framing::TowardPoleA, v);
  CHECK(a == "raw\n\n" + v.extraction_toward_a);
  CHECK(a.find("more liberal, more progressive, or less conservative") != std::string::npos);
  const auto b = extraction_prompt("raw", Framing::TowardPoleB, v);
  CHECK(b.find("more conservative or less liberal") != std::string::npos);
  CHECK(b.find("Return only the full name without party affiliation or state information.") !=
        std::string::npos);
}

TEST_CASE("extract_winner on the Markey/Booker paragraph") {
  const auto req = markey_booker_request();
  SUBCASE("stored extraction reply resolves to Markey") {
    Transcript stored;
    stored.key = req.key;
    stored.framing = req.framing;
    stored.raw_response = kMarkeyParagraph;
    stored.extraction_response = "Ed Markey";
    ReplayJudge judge({stored}, {});
    const auto ex = extract_winner(judge.compare(req), req, judge, {});
    CHECK(ex.resolution == Resolution::winner("markey-ma"));
    CHECK(ex.extraction_response == std::optional<std::string>("Ed Markey"));
  }
  SUBCASE("the raw paragraph alone names both and says 'both'") {
    CHECK(local_match(kMarkeyParagraph, req.candidates) == Resolution::tie());
  }
  SUBCASE("judge failure falls back to the raw text") {
    ThrowingExtractJudge judge("Ed Markey is more liberal.");
    const auto ex = extract_winner("Ed Markey is more liberal.", req, judge, {});
    CHECK(ex.resolution == Resolution::winner("markey-ma"));
    CHECK_FALSE(ex.extraction_response);
  }
  SUBCASE("unhelpful extraction reply falls back to the raw text") {
    Transcript stored;
    stored.key = req.key;
    stored.raw_response = "Markey, clearly.";
    stored.extraction_response = "I'm not sure.";
    ReplayJudge judge({stored}, {});
    const auto ex = extract_winner("Markey, clearly.", req, judge, {});
    CHECK(ex.resolution == Resolution::winner("markey-ma"));
    CHECK(ex.extraction_response == std::optional<std::string>("I'm not sure."));
  }
  SUBCASE("both paths unresolved stays unresolved") {
    Transcript stored;
    stored.key = req.key;
    stored.extraction_response = "Elizabeth Warren";
    ReplayJudge judge({stored}, {});
    CHECK(extract_winner("Elizabeth Warren is.", req, judge, {}).resolution ==
          Resolution::unresolved());
  }
  SUBCASE("tie sentence") {
    ThrowingExtractJudge judge("");
    CHECK(extract_winner("Both senators are equally conservative; I cannot say.", req, judge, {})
              .resolution == Resolution::tie());
  }
  SUBCASE("blank raw text is unresolved without asking the judge") {
    ThrowingExtractJudge judge("");
    CHECK(extract_winner("  \n", req, judge, {}).resolution == Resolution::unresolved());
  }
}

TEST_CASE("simulated_compare") {
  SimulatedJudgeConfig cfg;
  cfg.true_scores = {{"a", 0.0}, {"b", std::log(3.0)}, {"c", std::log(3.0)}};
  cfg.seed = 7;

  SUBCASE("deterministic per key and seed") {
    const auto r = request("a", "b", Framing::TowardPoleB, 3);
    const auto first = simulated_compare(r, cfg);
    for (int k = 0; k < 5; ++k) CHECK(simulated_compare(r, cfg) == first);
  }
  SUBCASE("ln 3 gap wins 75% of 10,000 draws") {
    int b_wins = 0;
    for (int it = 1; it <= 10000; ++it) {
      auto res = simulated_compare(request("a", "b", Framing::TowardPoleB, it), cfg);
      REQUIRE(res.kind == ResolutionKind::Winner);
      b_wins += res.winner_id == "b";
    }
    CHECK(std::abs(b_wins / 10000.0 - 0.75) <= 0.02);
  }
  SUBCASE("equal scores split evenly") {
    int b_wins = 0;
    for (int it = 1; it <= 10000; ++it)
      b_wins += simulated_compare(request("b", "c", Framing::TowardPoleB, it), cfg).winner_id == "b";
    CHECK(std::abs(b_wins / 10000.0 - 0.5) <= 0.02);
  }
  SUBCASE("TowardPoleA framing names the other entity") {
    for (int it = 1; it <= 200; ++it) {
      const auto toward_b = simulated_compare(request("a", "b", Framing::TowardPoleB, it), cfg);
      const auto toward_a = simulated_compare(request("a", "b", Framing::TowardPoleA, it), cfg);
      CHECK(toward_a.winner_id != toward_b.winner_id);
    }
  }
  SUBCASE("matches the sampler's RNG trace") {
    for (int it = 1; it <= 50; ++it) {
      const auto r = request("a", "b", Framing::TowardPoleB, it);
      std::mt19937_64 rng(substream_seed(cfg.seed, r.key.str()));
      (void)unit_draw(rng);
      const double u = unit_draw(rng);
      const std::string expected = u < 1.0 / (1.0 + std::exp(std::log(3.0) - 0.0)) ? "a" : "b";
      CHECK(simulated_compare(r, cfg).winner_id == expected);
    }
  }
  SUBCASE("noise-free mode") {
    cfg.deterministic = true;
    for (int it = 1; it <= 20; ++it) {
      CHECK(simulated_compare(request("a", "b", Framing::TowardPoleB, it), cfg) ==
            Resolution::winner("b"));
      CHECK(simulated_compare(request("a", "b", Framing::TowardPoleA, it), cfg) ==
            Resolution::winner("a"));
      CHECK(simulated_compare(request("b", "c", Framing::TowardPoleB, it), cfg) == Resolution::tie());
    }
  }
  SUBCASE("tie probability") {
    cfg.tie_probability = 1.0;
    CHECK(simulated_compare(request("a", "b", Framing::TowardPoleB), cfg) == Resolution::tie());
    cfg.tie_probability = 0.3;
    int ties = 0;
    for (int it = 1; it <= 10000; ++it)
      ties += simulated_compare(request("a", "b", Framing::TowardPoleB, it), cfg).kind ==
              ResolutionKind::Tie;
    CHECK(std::abs(ties / 10000.0 - 0.3) <= 0.02);
  }
  SUBCASE("missing score is a configuration error") {
    CHECK_THROWS_AS(simulated_compare(request("a", "zz", Framing::TowardPoleB), cfg), ConfigError);
  }
  SUBCASE("invalid configuration") {
    cfg.tie_probability = 1.5;
    CHECK_THROWS_AS(SimulatedJudge{cfg}, ConfigError);
    cfg.tie_probability = std::nan("");
    CHECK_THROWS_AS(SimulatedJudge{cfg}, ConfigError);
  }
  SUBCASE("different seeds give different streams") {
    auto other = cfg;
    other.seed = 8;
    int differ = 0;
    for (int it = 1; it <= 200; ++it) {
      const auto r = request("a", "b", Framing::TowardPoleB, it);
      differ += !(simulated_compare(r, cfg) == simulated_compare(r, other));
    }
    CHECK(differ > 40);
  }
}

TEST_CASE("SimulatedJudge text") {
  SimulatedJudgeConfig cfg;
  cfg.true_scores = {{"cotton-ar", 1.5}, {"cruz-tx", 1.9}, {"warren-ma", -1.6}, {"tester-mt", -0.3}};
  cfg.seed = 11;
  SimulatedJudge judge(cfg);
  JudgeRequest r;
  r.key = {EntityPair::canonical("cotton-ar", "cruz-tx"), 1};
  r.framing = Framing::TowardPoleB;
  r.candidates = kCruzCotton;

  const auto res = simulated_compare(r, cfg);
  const std::string name = res.winner_id == "cruz-tx" ? "Ted Cruz" : "Tom Cotton";
  CHECK(judge.compare(r) == name + " is more conservative.");
  CHECK(extract_winner(judge.compare(r), r, judge, {}).resolution == res);

  r.framing = Framing::TowardPoleA;
  const auto res_a = simulated_compare(r, cfg);
  CHECK(judge.compare(r) ==
        (res_a.winner_id == "cruz-tx" ? "Ted Cruz" : "Tom Cotton") + std::string(" is more liberal."));

  CategoryQuery q;
  q.entity = {"warren-ma", "Elizabeth Warren", "D", "MA", "D"};
  q.pole = Pole::A;
  CHECK(parse_category_answer(judge.categorize(q), Pole::A, {}) ==
        Category{Pole::A, Strength::Strong});
  q.entity = {"tester-mt", "Jon Tester", "D", "MT", "D"};
  CHECK(parse_category_answer(judge.categorize(q), Pole::A, {}) ==
        Category{Pole::A, Strength::Moderate});
  q.entity.id = "nobody";
  CHECK_THROWS_AS(judge.categorize(q), ConfigError);
}

TEST_CASE("ReplayJudge lookups") {
  ReplayJudge judge({}, {{"x", 0, 0, "", "moderate Democrat"}});
  const auto r = markey_booker_request();
  try {
    judge.compare(r);
    FAIL("expected MissingRecordError");
  } catch (const MissingRecordError& e) {
    CHECK(std::string(e.what()).find(r.key.str()) != std::string::npos);
  }
  CategoryQuery q;
  q.entity.id = "x";
  CHECK(judge.categorize(q) == "moderate Democrat");
  q.attempt = 1;
  CHECK_THROWS_AS(judge.categorize(q), MissingRecordError);
}

TEST_CASE("transcript JSON") {
  Transcript t;
  t.key = {EntityPair::canonical("markey-ma", "booker-nj"), 2};
  t.framing = Framing::TowardPoleA;
  t.prompt = "Which senator is more liberal: Cory Booker (D-NJ) or Ed Markey (D-MA)?";
  t.raw_response = kMarkeyParagraph;
  t.extraction_response = "Ed Markey";
  t.resolution = Resolution::winner("markey-ma");
  t.source = Source::LlmDirect;
  t.judge_id = "llm:gpt-3.5-turbo";
  t.timestamp = "2024-01-01T00:00:00Z";

  const auto j = to_json(t);
  CHECK(j.dump().find("\"pair\":[\"booker-nj\",\"markey-ma\"]") != std::string::npos);
  const auto back = transcript_from_json(nlohmann::json::parse(j.dump()));
  CHECK(to_json(back) == j);
  CHECK(back.pole_b_winner() == std::optional<std::string>("booker-nj"));

  auto implied = implied_transcript({t.key, "booker-nj"}, "ts");
  CHECK(implied.framing == Framing::TowardPoleB);
  CHECK_FALSE(implied.raw_response);
  CHECK(to_json(implied)["raw_response"].is_null());
  CHECK(implied.pole_b_winner() == std::optional<std::string>("booker-nj"));

  SUBCASE("winner outside the pair") {
    auto bad = nlohmann::json::parse(j.dump());
    bad["resolution"]["winner_id"] = "warren-ma";
    CHECK_THROWS_AS(transcript_from_json(bad), ValidationError);
  }
  SUBCASE("unknown enums") {
    auto bad = nlohmann::json::parse(j.dump());
    bad["source"] = "oracle";
    CHECK_THROWS_AS(transcript_from_json(bad), ValidationError);
    bad = nlohmann::json::parse(j.dump());
    bad["resolution"]["kind"] = "draw";
    CHECK_THROWS_AS(transcript_from_json(bad), ValidationError);
  }
  SUBCASE("tie and unresolved carry no winner") {
    t.resolution = Resolution::tie();
    CHECK_FALSE(to_json(t)["resolution"].contains("winner_id"));
    CHECK_FALSE(t.pole_b_winner());
  }
}

TEST_CASE("transcript log survives an interrupted append") {
  oracle::TempDir dir("log");
  const auto path = dir / "transcripts.jsonl";
  {
    TranscriptLog log(path);
    log.append(implied_transcript({{EntityPair::canonical("a", "b"), 1}, "b"}, "t"));
    log.append(implied_transcript({{EntityPair::canonical("a", "c"), 1}, "c"}, "t"));
  }
  {
    std::ofstream out(path, std::ios::app);
    out << R"({"pair":["b","c"],"iter)";
  }
  CHECK(read_transcript_log(path).size() == 2);
  {
    TranscriptLog log(path);
    log.append(implied_transcript({{EntityPair::canonical("b", "c"), 1}, "c"}, "t"));
  }
  CHECK(read_transcript_log(path).size() == 3);

  SUBCASE("a corrupt complete line is a parse error with its line") {
    std::ofstream(path, std::ios::app) << "not json\n";
    try {
      read_transcript_log(path);
      FAIL("expected ParseError");
    } catch (const ParseError& e) {
      CHECK(e.line() == 4);
    }
  }
}

TEST_CASE("apply_overrides") {
  Transcript t;
  t.key = {EntityPair::canonical("a", "b"), 1};
  t.resolution = Resolution::unresolved();
  const auto o = parse_overrides("entity_id,field,value,reason\na|b#1,resolution,tie,manual\n", "o");
  const auto out = apply_overrides({t}, o);
  CHECK(out[0].resolution == Resolution::tie());
  CHECK(out[0].source == Source::ManualOverride);
  CHECK_THROWS_AS(parse_overrides("entity_id,field,value,reason\na|b#1,resolution,zz,x\n", "o"),
                  ParseError);
  Overrides bad;
  bad.resolutions[t.key] = {"zz", "typo"};
  CHECK_THROWS_AS(apply_overrides({t}, bad), ValidationError);
}

TEST_CASE("run_schedule") {
  oracle::TempDir dir("run");
  const auto s = small_plan(2);
  REQUIRE_FALSE(s.plan.direct.empty());
  REQUIRE_FALSE(s.plan.implied.empty());
  const std::size_t total = s.plan.direct.size() + s.plan.implied.size();
  CHECK(total == 2 * 21);
  SimulatedJudgeConfig cfg;
  cfg.true_scores = s.truth;
  cfg.seed = 99;
  SimulatedJudge sim(cfg);

  SUBCASE("implied-only plans need no judge") {
    SchedulePlan implied_only = s.plan;
    implied_only.direct.clear();
    const auto out = run_schedule(implied_only, s.entities, nullptr, options_for(dir / "t.jsonl"));
    CHECK(out.size() == s.plan.implied.size());
    for (const auto& t : out) {
      CHECK(t.source == Source::CategoryImplied);
      CHECK_FALSE(t.raw_response);
    }
    CHECK_THROWS_AS(run_schedule(s.plan, s.entities, nullptr, options_for(dir / "u.jsonl")),
                    ConfigError);
  }
  SUBCASE("every winner is in its pair and the output is complete") {
    const auto out = run_schedule(s.plan, s.entities, &sim, options_for(dir / "t.jsonl"));
    CHECK(out.size() == total);
    for (const auto& t : out) {
      if (t.resolution.kind == ResolutionKind::Winner) CHECK(t.key.pair.contains(t.resolution.winner_id));
      CHECK(t.resolution.resolved());
    }
    CHECK(read_transcript_log(dir / "t.jsonl").size() == total);
  }
  SUBCASE("fixed seed is reproducible, also under concurrency") {
    const auto one = run_schedule(s.plan, s.entities, &sim, options_for(dir / "1.jsonl"));
    auto opts = options_for(dir / "2.jsonl");
    opts.concurrency = 4;
    const auto two = run_schedule(s.plan, s.entities, &sim, opts);
    REQUIRE(one.size() == two.size());
    for (std::size_t k = 0; k < one.size(); ++k) CHECK(to_json(one[k]) == to_json(two[k]));
  }
  SUBCASE("resume issues only the remaining judge calls") {
    const auto reference = run_schedule(s.plan, s.entities, &sim, options_for(dir / "ref.jsonl"));
    const std::size_t half = s.plan.direct.size() / 2;
    FlakyJudge flaky(sim, half);
    CHECK_THROWS_AS(run_schedule(s.plan, s.entities, &flaky, options_for(dir / "t.jsonl")),
                    TransportError);
    CHECK(read_transcript_log(dir / "t.jsonl").size() == s.plan.implied.size() + half);

    FlakyJudge counting(sim, 1u << 30);
    auto opts = options_for(dir / "t.jsonl");
    opts.resume = true;
    const auto resumed = run_schedule(s.plan, s.entities, &counting, opts);
    CHECK(counting.compares.load() == s.plan.direct.size() - half);
    REQUIRE(resumed.size() == reference.size());
    for (std::size_t k = 0; k < resumed.size(); ++k) CHECK(to_json(resumed[k]) == to_json(reference[k]));

    FlakyJudge idle(sim, 0);
    CHECK(run_schedule(s.plan, s.entities, &idle, opts).size() == total);
    CHECK(idle.compares.load() == 0);
  }
  SUBCASE("without resume the log starts over") {
    run_schedule(s.plan, s.entities, &sim, options_for(dir / "t.jsonl"));
    run_schedule(s.plan, s.entities, &sim, options_for(dir / "t.jsonl"));
    CHECK(read_transcript_log(dir / "t.jsonl").size() == total);
  }
  SUBCASE("replaying the log reproduces the resolutions") {
    const auto original = run_schedule(s.plan, s.entities, &sim, options_for(dir / "t.jsonl"));
    ReplayJudge replay(read_transcript_log(dir / "t.jsonl"), {});
    const auto again = run_schedule(s.plan, s.entities, &replay, options_for(dir / "r.jsonl"));
    CHECK(resolutions(again) == resolutions(original));
    for (const auto& t : again)
      if (t.source != Source::CategoryImplied) CHECK(t.source == Source::Replay);
  }
}

TEST_CASE("TokenBucket paces requests") {
  TokenBucket bucket(600.0, 1.0);  // 10 per second
  const auto start = std::chrono::steady_clock::now();
  for (int k = 0; k < 4; ++k) bucket.acquire();
  const double elapsed =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  CHECK(elapsed >= 0.25);
  CHECK(elapsed < 2.0);
}

TEST_CASE("LlmJudge over HTTP") {
  ::setenv("PAIRSCALE_TEST_KEY", "sk-test", 1);
  const auto req = markey_booker_request();

  SUBCASE("missing key fails at construction") {
    auto cfg = llm_config("http://127.0.0.1:1/v1/chat/completions");
    cfg.api_key_env = "PAIRSCALE_TEST_KEY_UNSET";
    ::unsetenv("PAIRSCALE_TEST_KEY_UNSET");
    CHECK_THROWS_AS(LlmJudge{cfg}, ConfigError);
  }
  SUBCASE("invalid configuration") {
    auto cfg = llm_config("ftp://x");
    CHECK_THROWS_AS(LlmJudge{cfg}, ConfigError);
    cfg = llm_config("http://x/");
    cfg.temperature = -1;
    CHECK_THROWS_AS(LlmJudge{cfg}, ConfigError);
    cfg.temperature = 0;
    cfg.requests_per_minute = 0;
    CHECK_THROWS_AS(LlmJudge{cfg}, ConfigError);
  }
  SUBCASE("request body, auth header and cache hits") {
    FakeCompletions server([](const httplib::Request&, httplib::Response& res) {
      reply(res, "Ed Markey is more liberal.");
    });
    LlmJudge judge(llm_config(server.endpoint()));
    CHECK(judge.compare(req) == "Ed Markey is more liberal.");
    const auto body = nlohmann::json::parse(server.last_body);
    CHECK(body["model"] == "test-model");
    CHECK(body["temperature"] == 0.0);
    CHECK(body["messages"].size() == 1);
    CHECK(body["messages"][0]["role"] == "user");
    CHECK(body["messages"][0]["content"] == req.prompt);
    CHECK(server.last_auth == "Bearer sk-test");

    CHECK(judge.compare(req) == "Ed Markey is more liberal.");
    CHECK(server.hits.load() == 1);
    CHECK(judge.network_calls() == 1);

    auto changed = req;
    changed.prompt += " ";
    judge.compare(changed);
    CHECK(server.hits.load() == 2);
  }
  SUBCASE("429 and 5xx are retried") {
    std::atomic<int> n{0};
    FakeCompletions server([&](const httplib::Request&, httplib::Response& res) {
      const int k = n++;
      if (k == 0) res.status = 429;
      else if (k == 1) res.status = 503;
      else reply(res, "Cory Booker");
    });
    LlmJudge judge(llm_config(server.endpoint()));
    CHECK(judge.compare(req) == "Cory Booker");
    CHECK(server.hits.load() == 3);
  }
  SUBCASE("client errors are not retried") {
    FakeCompletions server([](const httplib::Request&, httplib::Response& res) {
      res.status = 400;
      res.set_content("bad request", "text/plain");
    });
    LlmJudge judge(llm_config(server.endpoint()));
    try {
      judge.compare(req);
      FAIL("expected TransportError");
    } catch (const TransportError& e) {
      CHECK(e.key() == req.key.str());
    }
    CHECK(server.hits.load() == 1);
  }
  SUBCASE("retries are bounded") {
    FakeCompletions server([](const httplib::Request&, httplib::Response& res) { res.status = 500; });
    LlmJudge judge(llm_config(server.endpoint()));
    CHECK_THROWS_AS(judge.compare(req), TransportError);
    CHECK(server.hits.load() == 4);
  }
  SUBCASE("malformed completions are transport errors") {
    FakeCompletions server([](const httplib::Request&, httplib::Response& res) {
      res.set_content("{\"choices\":[]}", "application/json");
    });
    LlmJudge judge(llm_config(server.endpoint()));
    CHECK_THROWS_AS(judge.compare(req), TransportError);
  }
  SUBCASE("unreachable endpoint") {
    auto cfg = llm_config("http://127.0.0.1:1/v1/chat/completions");
    cfg.max_retries = 1;
    LlmJudge judge(cfg);
    CHECK_THROWS_AS(judge.compare(req), TransportError);
  }
  SUBCASE("disk cache persists across instances") {
    oracle::TempDir dir("cache");
    FakeCompletions server([](const httplib::Request&, httplib::Response& res) { reply(res, "Ed Markey"); });
    {
      LlmJudge judge(llm_config(server.endpoint(), dir.path()));
      CHECK(judge.compare(req) == "Ed Markey");
      CHECK(*judge.extract(req, extraction_prompt("x", req.framing, {})) == "Ed Markey");
    }
    LlmJudge fresh(llm_config(server.endpoint(), dir.path()));
    CHECK(fresh.compare(req) == "Ed Markey");
    CHECK(fresh.network_calls() == 0);
    CHECK(server.hits.load() == 2);
  }
  SUBCASE("full matchup through the live judge") {
    FakeCompletions server([](const httplib::Request& r, httplib::Response& res) {
      const auto body = nlohmann::json::parse(r.body);
      const auto content = body["messages"][0]["content"].get<std::string>();
      reply(res, content.find("Return only the full name") != std::string::npos ? "Ed Markey"
                                                                                 : kMarkeyParagraph);
    });
    LlmJudge judge(llm_config(server.endpoint()));
    const auto raw = judge.compare(req);
    CHECK(extract_winner(raw, req, judge, {}).resolution == Resolution::winner("markey-ma"));
  }
}
