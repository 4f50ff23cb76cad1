#include "pairscale/config.hpp"

#include <charconv>
#include <functional>
#include <map>

#include "pairscale/errors.hpp"
#include "pairscale/io.hpp"
#include "pairscale/matching.hpp"

namespace pairscale {

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> split_list(std::string_view s) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (start <= s.size()) {
    const auto comma = s.find(',', start);
    auto item = trim(s.substr(start, comma == std::string_view::npos ? s.npos : comma - start));
    if (!item.empty()) out.push_back(std::move(item));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

template <class T>
T parse_number(std::string_view key, std::string_view value) {
  T out{};
  const auto* end = value.data() + value.size();
  auto [ptr, ec] = std::from_chars(value.data(), end, out);
  if (ec != std::errc{} || ptr != end)
    throw ConfigError(std::string(key) + ": '" + std::string(value) + "' is not a valid number");
  return out;
}

bool parse_bool(std::string_view key, std::string_view value) {
  if (value == "true" || value == "1" || value == "yes") return true;
  if (value == "false" || value == "0" || value == "no") return false;
  throw ConfigError(std::string(key) + ": expected true/false, got '" + std::string(value) + "'");
}

std::filesystem::path resolve(std::string_view value, const std::filesystem::path& base) {
  std::filesystem::path p{std::string(value)};
  if (p.empty() || p.is_absolute() || base.empty()) return p;
  return base / p;
}

using Setter = std::function<void(RunConfig&, std::string_view key, std::string_view value,
                                  const std::filesystem::path& base)>;

const std::map<std::string, Setter, std::less<>>& setters() {
  static const std::map<std::string, Setter, std::less<>> table = [] {
    std::map<std::string, Setter, std::less<>> t;
    auto path = [&](std::filesystem::path RunConfig::*m) {
      return [m](RunConfig& c, std::string_view, std::string_view v,
                 const std::filesystem::path& b) { c.*m = resolve(v, b); };
    };
    auto text = [](std::string RunConfig::*m) {
      return [m](RunConfig& c, std::string_view, std::string_view v, const std::filesystem::path&) {
        c.*m = std::string(v);
      };
    };
    auto vocab = [](std::string Vocabulary::*m) {
      return [m](RunConfig& c, std::string_view, std::string_view v, const std::filesystem::path&) {
        c.vocab.*m = std::string(v);
      };
    };
    t["roster"] = path(&RunConfig::roster);
    t["overrides"] = path(&RunConfig::overrides);
    t["external_scales"] = path(&RunConfig::external_scales);
    t["out_dir"] = path(&RunConfig::out_dir);
    t["seed"] = [](RunConfig& c, std::string_view k, std::string_view v, const auto&) {
      c.seed = parse_number<std::uint64_t>(k, v);
    };
    t["judge"] = [](RunConfig& c, std::string_view, std::string_view v, const auto&) {
      c.judge = parse_judge_kind(v);
    };
    t["llm.endpoint"] = [](RunConfig& c, std::string_view, std::string_view v, const auto&) {
      c.llm.endpoint = std::string(v);
    };
    t["llm.model"] = [](RunConfig& c, std::string_view, std::string_view v, const auto&) {
      c.llm.model = std::string(v);
    };
    t["llm.temperature"] = [](RunConfig& c, std::string_view k, std::string_view v, const auto&) {
      c.llm.temperature = parse_number<double>(k, v);
    };
    t["llm.max_retries"] = [](RunConfig& c, std::string_view k, std::string_view v, const auto&) {
      c.llm.max_retries = parse_number<int>(k, v);
    };
    t["llm.requests_per_minute"] = [](RunConfig& c, std::string_view k, std::string_view v,
                                      const auto&) {
      c.llm.requests_per_minute = parse_number<double>(k, v);
    };
    t["llm.cache_dir"] = [](RunConfig& c, std::string_view, std::string_view v,
                            const std::filesystem::path& b) { c.llm.cache_dir = resolve(v, b); };
    t["llm.api_key_env"] = [](RunConfig& c, std::string_view, std::string_view v, const auto&) {
      c.llm.api_key_env = std::string(v);
    };
    t["llm.initial_backoff_ms"] = [](RunConfig& c, std::string_view k, std::string_view v,
                                     const auto&) {
      c.llm.initial_backoff_ms = parse_number<int>(k, v);
    };
    t["llm.timeout_seconds"] = [](RunConfig& c, std::string_view k, std::string_view v,
                                  const auto&) { c.llm.timeout_seconds = parse_number<int>(k, v); };
    t["replay.transcripts"] = path(&RunConfig::replay_transcripts);
    t["replay.categorizations"] = path(&RunConfig::replay_categorizations);
    t["simulated.true_scores"] = path(&RunConfig::simulated_true_scores);
    t["simulated.tie_probability"] = [](RunConfig& c, std::string_view k, std::string_view v,
                                        const auto&) {
      c.tie_probability = parse_number<double>(k, v);
    };
    t["simulated.deterministic"] = [](RunConfig& c, std::string_view k, std::string_view v,
                                      const auto&) { c.deterministic = parse_bool(k, v); };
    t["simulated.strong_threshold"] = [](RunConfig& c, std::string_view k, std::string_view v,
                                         const auto&) {
      c.strong_threshold = parse_number<double>(k, v);
    };
    t["iterations"] = [](RunConfig& c, std::string_view k, std::string_view v, const auto&) {
      c.iterations = parse_number<int>(k, v);
    };
    t["categorization_runs"] = [](RunConfig& c, std::string_view k, std::string_view v,
                                  const auto&) { c.categorization_runs = parse_number<int>(k, v); };
    t["concurrency"] = [](RunConfig& c, std::string_view k, std::string_view v, const auto&) {
      c.concurrency = parse_number<std::size_t>(k, v);
    };
    t["use_implied"] = [](RunConfig& c, std::string_view k, std::string_view v, const auto&) {
      c.use_implied = parse_bool(k, v);
    };
    t["fit.penalty"] = [](RunConfig& c, std::string_view, std::string_view v, const auto&) {
      c.fit.penalty = parse_penalty(v);
    };
    t["fit.tolerance"] = [](RunConfig& c, std::string_view k, std::string_view v, const auto&) {
      c.fit.tolerance = parse_number<double>(k, v);
    };
    t["fit.max_iterations"] = [](RunConfig& c, std::string_view k, std::string_view v,
                                 const auto&) { c.fit.max_iterations = parse_number<int>(k, v); };
    t["fit.reference"] = [](RunConfig& c, std::string_view, std::string_view v, const auto&) {
      if (v.empty()) {
        c.fit.reference_id.reset();
      } else {
        c.fit.reference_id = std::string(v);
      }
    };
    t["pole_a_groups"] = [](RunConfig& c, std::string_view, std::string_view v, const auto&) {
      auto items = split_list(v);
      c.labels.pole_a = {items.begin(), items.end()};
    };
    t["pole_b_groups"] = [](RunConfig& c, std::string_view, std::string_view v, const auto&) {
      auto items = split_list(v);
      c.labels.pole_b = {items.begin(), items.end()};
    };
    t["vocab.entity_noun"] = vocab(&Vocabulary::entity_noun);
    t["vocab.pole_a_trait"] = vocab(&Vocabulary::pole_a_trait);
    t["vocab.pole_b_trait"] = vocab(&Vocabulary::pole_b_trait);
    t["vocab.pole_a_member"] = vocab(&Vocabulary::pole_a_member);
    t["vocab.pole_b_member"] = vocab(&Vocabulary::pole_b_member);
    t["vocab.extraction_toward_a"] = vocab(&Vocabulary::extraction_toward_a);
    t["vocab.extraction_toward_b"] = vocab(&Vocabulary::extraction_toward_b);
    t["tie_phrases"] = [](RunConfig& c, std::string_view, std::string_view v, const auto&) {
      c.tie_phrases = split_list(v);
    };
    t["validate.response_scale"] = text(&RunConfig::response_scale);
    t["validate.comparator_scale"] = text(&RunConfig::comparator_scale);
    t["validate.top_movers"] = [](RunConfig& c, std::string_view k, std::string_view v,
                                  const auto&) { c.top_movers = parse_number<std::size_t>(k, v); };
    t["plot.scale"] = text(&RunConfig::plot_scale);
    t["simulate.count"] = [](RunConfig& c, std::string_view k, std::string_view v, const auto&) {
      c.simulate_count = parse_number<int>(k, v);
    };
    t["simulate.low"] = [](RunConfig& c, std::string_view k, std::string_view v, const auto&) {
      c.simulate_low = parse_number<double>(k, v);
    };
    t["simulate.high"] = [](RunConfig& c, std::string_view k, std::string_view v, const auto&) {
      c.simulate_high = parse_number<double>(k, v);
    };
    t["simulate.seeds"] = [](RunConfig& c, std::string_view k, std::string_view v, const auto&) {
      c.simulate_seeds.clear();
      for (const auto& item : split_list(v)) c.simulate_seeds.push_back(parse_number<std::uint64_t>(k, item));
    };
    t["simulate.use_implied"] = [](RunConfig& c, std::string_view k, std::string_view v,
                                   const auto&) { c.simulate_use_implied = parse_bool(k, v); };
    return t;
  }();
  return table;
}

}  // namespace

std::string_view judge_kind_name(JudgeKind k) {
  switch (k) {
    case JudgeKind::Llm: return "llm";
    case JudgeKind::Replay: return "replay";
    case JudgeKind::Simulated: return "simulated";
  }
  return "llm";
}

JudgeKind parse_judge_kind(std::string_view name) {
  if (name == "llm") return JudgeKind::Llm;
  if (name == "replay") return JudgeKind::Replay;
  if (name == "simulated") return JudgeKind::Simulated;
  throw ConfigError("unknown judge '" + std::string(name) + "' (expected llm, replay or simulated)");
}

RunConfig::RunConfig() : tie_phrases(kDefaultTiePhrases) {}

void RunConfig::set(std::string_view key, std::string_view value,
                    const std::filesystem::path& base_dir) {
  const auto& table = setters();
  auto it = table.find(key);
  if (it == table.end()) throw ConfigError("unknown configuration key '" + std::string(key) + "'");
  it->second(*this, key, trim(value), base_dir);
}

void RunConfig::validate() const {
  if (iterations < 1) throw ConfigError("iterations must be >= 1");
  if (categorization_runs < 1 || categorization_runs % 2 == 0)
    throw ConfigError("categorization_runs must be a positive odd number");
  if (concurrency < 1) throw ConfigError("concurrency must be >= 1");
  if (simulate_count < 2) throw ConfigError("simulate.count must be >= 2");
  if (!(simulate_high > simulate_low)) throw ConfigError("simulate.high must exceed simulate.low");
  if (!(tie_probability >= 0.0 && tie_probability <= 1.0))
    throw ConfigError("simulated.tie_probability must lie in [0, 1]");
  for (const auto& g : labels.pole_a)
    if (labels.pole_b.count(g)) throw ConfigError("group '" + g + "' is assigned to both poles");
  llm.validate();
  fit.validate();
}

void apply_config_text(RunConfig& config, std::string_view text, const std::string& source_name,
                       const std::filesystem::path& base_dir) {
  std::size_t line_no = 0;
  std::size_t start = 0;
  while (start < text.size()) {
    auto end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    ++line_no;
    std::string line = trim(text.substr(start, end - start));
    start = end + 1;
    if (line.empty() || line.front() == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ParseError(source_name, line_no, "expected key = value");
    const auto key = trim(std::string_view(line).substr(0, eq));
    const auto value = trim(std::string_view(line).substr(eq + 1));
    try {
      config.set(key, value, base_dir);
    } catch (const ConfigError& e) {
      throw ParseError(source_name, line_no, e.what());
    } catch (const ValidationError& e) {
      throw ParseError(source_name, line_no, e.what());
    }
  }
}

RunConfig load_config(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw ConfigError("config file not found: " + path.string());
  RunConfig config;
  apply_config_text(config, io::read_file(path), path.string(), path.parent_path());
  return config;
}

std::vector<std::string> config_keys() {
  std::vector<std::string> out;
  for (const auto& [k, v] : setters()) out.push_back(k);
  return out;
}

nlohmann::ordered_json config_to_json(const RunConfig& c) {
  nlohmann::ordered_json j;
  j["roster"] = c.roster.string();
  j["overrides"] = c.overrides.string();
  j["external_scales"] = c.external_scales.string();
  j["seed"] = c.seed;
  j["judge"] = judge_kind_name(c.judge);
  j["llm"] = {{"endpoint", c.llm.endpoint},
              {"model", c.llm.model},
              {"temperature", c.llm.temperature},
              {"max_retries", c.llm.max_retries},
              {"requests_per_minute", c.llm.requests_per_minute},
              {"api_key_env", c.llm.api_key_env}};
  j["replay"] = {{"transcripts", c.replay_transcripts.string()},
                 {"categorizations", c.replay_categorizations.string()}};
  j["simulated"] = {{"true_scores", c.simulated_true_scores.string()},
                    {"tie_probability", c.tie_probability},
                    {"deterministic", c.deterministic},
                    {"strong_threshold", c.strong_threshold}};
  j["iterations"] = c.iterations;
  j["categorization_runs"] = c.categorization_runs;
  j["use_implied"] = c.use_implied;
  j["fit"] = {{"penalty", penalty_name(c.fit.penalty)},
              {"tolerance", c.fit.tolerance},
              {"max_iterations", c.fit.max_iterations},
              {"reference", c.fit.reference_id ? nlohmann::ordered_json(*c.fit.reference_id)
                                               : nlohmann::ordered_json(nullptr)}};
  j["pole_a_groups"] = std::vector<std::string>(c.labels.pole_a.begin(), c.labels.pole_a.end());
  j["pole_b_groups"] = std::vector<std::string>(c.labels.pole_b.begin(), c.labels.pole_b.end());
  j["vocab"] = {{"entity_noun", c.vocab.entity_noun},
                {"pole_a_trait", c.vocab.pole_a_trait},
                {"pole_b_trait", c.vocab.pole_b_trait},
                {"pole_a_member", c.vocab.pole_a_member},
                {"pole_b_member", c.vocab.pole_b_member}};
  j["tie_phrases"] = c.tie_phrases;
  j["validate"] = {{"response_scale", c.response_scale},
                   {"comparator_scale", c.comparator_scale},
                   {"top_movers", c.top_movers}};
  return j;
}

std::map<std::string, double> load_true_scores(const std::filesystem::path& path) {
  const auto csv = io::read_csv(path);
  io::require_header(csv, {"entity_id", "score"}, path.string());
  std::map<std::string, double> out;
  for (const auto& row : csv.rows) {
    double v = 0.0;
    const auto& text = row.fields[1];
    auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
    if (ec != std::errc{} || ptr != text.data() + text.size())
      throw ParseError(path.string(), row.line, "score '" + text + "' is not a number");
    if (!out.emplace(row.fields[0], v).second)
      throw ParseError(path.string(), row.line, "duplicate entity '" + row.fields[0] + "'");
  }
  return out;
}

void write_true_scores(const std::filesystem::path& path, const std::map<std::string, double>& scores) {
  std::string text = io::csv_line({"entity_id", "score"});
  for (const auto& [id, v] : scores) text += io::csv_line({id, io::format_double(v)});
  io::write_file_atomic(path, text);
}

}  // namespace pairscale
