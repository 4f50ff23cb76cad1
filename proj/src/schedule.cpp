#include "pairscale/schedule.hpp"

#include <algorithm>
#include <cctype>
#include <set>
#include <tuple>

#include "pairscale/errors.hpp"
#include "pairscale/io.hpp"

namespace pairscale {

std::string_view method_name(AssignmentMethod m) {
  switch (m) {
    case AssignmentMethod::JudgeMajority: return "judge_majority";
    case AssignmentMethod::Forced: return "forced";
    case AssignmentMethod::Manual: return "manual";
  }
  return "judge_majority";
}

AssignmentMethod parse_method(std::string_view name) {
  for (auto m : {AssignmentMethod::JudgeMajority, AssignmentMethod::Forced, AssignmentMethod::Manual})
    if (method_name(m) == name) return m;
  throw ValidationError("unknown assignment method '" + std::string(name) + "'");
}

std::string render_category_prompt(const Entity& entity, Pole pole, const Vocabulary& vocab) {
  const auto& member = vocab.member(pole);
  return "Is " + entity.full_name + " (" + entity.group + "-" + entity.region +
         ") considered a moderate " + member + " or " + vocab.trait(pole) + " " + member + "?";
}

namespace {

std::string lower(std::string_view s) {
  std::string out(s);
  for (auto& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

bool has_word(const std::string& haystack, const std::string& word, std::size_t* at = nullptr) {
  std::size_t pos = 0;
  while ((pos = haystack.find(word, pos)) != std::string::npos) {
    const bool left = pos == 0 || !std::isalpha(static_cast<unsigned char>(haystack[pos - 1]));
    const std::size_t end = pos + word.size();
    const bool right =
        end >= haystack.size() || !std::isalpha(static_cast<unsigned char>(haystack[end]));
    if (left && right) {
      if (at) *at = pos;
      return true;
    }
    ++pos;
  }
  return false;
}

}  // namespace

std::optional<Category> parse_category_answer(std::string_view answer, Pole pole,
                                              const Vocabulary& vocab) {
  const std::string text = lower(answer);
  const std::string member = lower(vocab.member(pole));
  const std::string trait = lower(vocab.trait(pole));
  const Category strong{pole, Strength::Strong};
  const Category moderate{pole, Strength::Moderate};

  std::size_t at_moderate = 0, at_strong = 0;
  const bool phrase_moderate = has_word(text, "moderate " + member, &at_moderate);
  const bool phrase_strong = has_word(text, trait + " " + member, &at_strong);
  if (phrase_moderate && phrase_strong) return at_moderate < at_strong ? moderate : strong;
  if (phrase_moderate) return moderate;
  if (phrase_strong) return strong;

  const bool word_moderate = has_word(text, "moderate");
  const bool word_strong = has_word(text, trait);
  if (word_moderate != word_strong) return word_moderate ? moderate : strong;
  return std::nullopt;
}

std::optional<Category> majority_vote(const std::vector<std::optional<Category>>& votes) {
  std::size_t cast = 0;
  std::map<std::string_view, std::size_t> tally;
  for (const auto& v : votes) {
    if (!v) continue;
    ++cast;
    ++tally[category_name(*v)];
  }
  for (const auto& [name, count] : tally)
    if (2 * count > cast) return parse_category(name);
  return std::nullopt;
}

CategoryAssignment categorize_entity(const Entity& entity, Judge& judge, int runs,
                                     const PoleLabels& labels, const Vocabulary& vocab) {
  if (runs < 1 || runs % 2 == 0)
    throw ConfigError("categorization runs must be a positive odd number, got " +
                      std::to_string(runs));
  const Pole pole = labels.resolve(entity.caucus_group);
  CategoryAssignment out;
  out.entity_id = entity.id;
  out.method = AssignmentMethod::JudgeMajority;
  for (int run = 0; run < runs; ++run) {
    std::optional<Category> vote;
    for (int attempt = 0; attempt < 2 && !vote; ++attempt) {
      CategoryQuery q{entity, pole, run, attempt, render_category_prompt(entity, pole, vocab)};
      vote = parse_category_answer(judge.categorize(q), pole, vocab);
    }
    out.votes.push_back(vote);
  }
  out.category = majority_vote(out.votes);
  return out;
}

void apply_category_overrides(std::vector<CategoryAssignment>& assignments,
                              const Overrides& overrides) {
  for (auto& a : assignments) {
    auto it = overrides.categories.find(a.entity_id);
    if (it == overrides.categories.end()) continue;
    a.category = it->second;
    a.method = AssignmentMethod::Manual;
  }
}

namespace {

const std::vector<std::string> kAssignmentHeader{"entity_id", "category", "method", "votes"};

std::string join_votes(const std::vector<std::optional<Category>>& votes) {
  std::string out;
  for (std::size_t i = 0; i < votes.size(); ++i) {
    if (i) out += ';';
    out += votes[i] ? std::string(category_name(*votes[i])) : "abstain";
  }
  return out;
}

}  // namespace

void write_assignments(const std::filesystem::path& path,
                       const std::vector<CategoryAssignment>& assignments) {
  std::string text = io::csv_line(kAssignmentHeader);
  for (const auto& a : assignments) {
    text += io::csv_line({a.entity_id,
                          a.category ? std::string(category_name(*a.category)) : "unresolved",
                          std::string(method_name(a.method)), join_votes(a.votes)});
  }
  io::write_file_atomic(path, text);
}

std::vector<CategoryAssignment> load_assignments(const std::filesystem::path& path) {
  const auto table = io::read_csv(path);
  io::require_header(table, kAssignmentHeader, path.string());
  std::vector<CategoryAssignment> out;
  for (const auto& row : table.rows) {
    CategoryAssignment a;
    a.entity_id = row.fields[0];
    if (row.fields[1] != "unresolved") {
      a.category = parse_category(row.fields[1]);
      if (!a.category) throw ParseError(path.string(), row.line, "unknown category " + row.fields[1]);
    }
    a.method = parse_method(row.fields[2]);
    std::string_view votes = row.fields[3];
    while (!votes.empty()) {
      const auto semi = votes.find(';');
      const auto tok = votes.substr(0, semi);
      if (tok == "abstain") {
        a.votes.emplace_back(std::nullopt);
      } else {
        auto c = parse_category(tok);
        if (!c) throw ParseError(path.string(), row.line, "unknown vote " + std::string(tok));
        a.votes.emplace_back(c);
      }
      if (semi == std::string_view::npos) break;
      votes.remove_prefix(semi + 1);
    }
    out.push_back(std::move(a));
  }
  return out;
}

MatchupClass classify_matchup(Category first, Category second) {
  if (first.pole != second.pole) {
    const bool first_is_b = first.pole == Pole::B;
    const Category& b_side = first_is_b ? first : second;
    const Category& a_side = first_is_b ? second : first;
    if (b_side.strength == Strength::Strong || a_side.strength == Strength::Strong)
      return ImpliedClass{first_is_b ? 0 : 1};
    return DirectClass{Framing::TowardPoleA};
  }
  return DirectClass{first.pole == Pole::B ? Framing::TowardPoleB : Framing::TowardPoleA};
}

std::map<std::string, Category> category_map(const std::vector<CategoryAssignment>& assignments) {
  std::map<std::string, Category> out;
  for (const auto& a : assignments)
    if (a.category) out.emplace(a.entity_id, *a.category);
  return out;
}

SchedulePlan build_schedule(const std::vector<Entity>& entities,
                            const std::map<std::string, Category>& categories,
                            const ScheduleOptions& options) {
  if (options.iterations < 1) throw ConfigError("iterations must be >= 1");
  std::vector<std::string> missing;
  for (const auto& e : entities)
    if (!categories.count(e.id)) missing.push_back(e.id);
  if (!missing.empty()) {
    std::string list;
    for (const auto& id : missing) list += (list.empty() ? "" : ", ") + id;
    throw UnresolvedError("uncategorized entities: " + list, missing);
  }

  std::vector<std::pair<EntityPair, MatchupClass>> pairs;
  pairs.reserve(entities.size() * (entities.size() - (entities.empty() ? 0 : 1)) / 2);
  for (std::size_t i = 0; i < entities.size(); ++i) {
    for (std::size_t j = i + 1; j < entities.size(); ++j) {
      auto pair = EntityPair::canonical(entities[i].id, entities[j].id);
      const Category a = categories.at(pair.first);
      const Category b = categories.at(pair.second);
      MatchupClass cls = classify_matchup(a, b);
      if (!options.use_implied && std::holds_alternative<ImpliedClass>(cls))
        cls = DirectClass{Framing::TowardPoleA};
      pairs.emplace_back(std::move(pair), cls);
    }
  }
  std::sort(pairs.begin(), pairs.end(),
            [](const auto& x, const auto& y) { return x.first < y.first; });

  SchedulePlan plan;
  plan.iterations = options.iterations;
  for (int it = 1; it <= options.iterations; ++it) {
    for (const auto& [pair, cls] : pairs) {
      MatchupKey key{pair, it};
      if (const auto* d = std::get_if<DirectClass>(&cls)) {
        plan.direct.push_back({std::move(key), d->framing});
      } else {
        const int w = std::get<ImpliedClass>(cls).winner;
        plan.implied.push_back({key, w == 0 ? pair.first : pair.second});
      }
    }
  }
  return plan;
}

std::string render_prompt(const Entity& first, const Entity& second, Framing framing,
                          const Vocabulary& vocab) {
  auto label = [](const Entity& e) {
    return e.full_name + " (" + e.group + "-" + e.region + ")";
  };
  return "Which " + vocab.entity_noun + " is more " + vocab.trait(framing_pole(framing)) + ": " +
         label(first) + " or " + label(second) + "?";
}

JudgeRequest make_request(const DirectMatchup& matchup,
                          const std::map<std::string, const Entity*>& index,
                          const Vocabulary& vocab) {
  auto find = [&](const std::string& id) -> const Entity& {
    auto it = index.find(id);
    if (it == index.end()) throw LookupError("unknown entity '" + id + "'");
    return *it->second;
  };
  const Entity& a = find(matchup.key.pair.first);
  const Entity& b = find(matchup.key.pair.second);
  JudgeRequest req;
  req.key = matchup.key;
  req.framing = matchup.framing;
  req.prompt = render_prompt(a, b, matchup.framing, vocab);
  req.candidates = {Candidate{a.id, a.full_name}, Candidate{b.id, b.full_name}};
  return req;
}

nlohmann::ordered_json schedule_to_json(const SchedulePlan& plan) {
  struct Row {
    const MatchupKey* key;
    const DirectMatchup* direct;
    const ImpliedMatchup* implied;
  };
  std::vector<Row> rows;
  for (const auto& d : plan.direct) rows.push_back({&d.key, &d, nullptr});
  for (const auto& m : plan.implied) rows.push_back({&m.key, nullptr, &m});
  std::sort(rows.begin(), rows.end(), [](const Row& x, const Row& y) {
    return std::tie(x.key->iteration, x.key->pair) < std::tie(y.key->iteration, y.key->pair);
  });
  auto arr = nlohmann::ordered_json::array();
  for (const auto& r : rows) {
    nlohmann::ordered_json o;
    o["pair"] = {r.key->pair.first, r.key->pair.second};
    o["iteration"] = r.key->iteration;
    if (r.direct) {
      o["kind"] = "direct";
      o["framing"] = framing_name(r.direct->framing);
    } else {
      o["kind"] = "implied";
      o["forced_winner"] = r.implied->forced_winner;
    }
    arr.push_back(std::move(o));
  }
  return arr;
}

SchedulePlan schedule_from_json(const nlohmann::json& j) {
  if (!j.is_array()) throw ValidationError("schedule must be a JSON array");
  SchedulePlan plan;
  std::set<MatchupKey> seen;
  for (const auto& o : j) {
    const auto& pair = o.at("pair");
    MatchupKey key{EntityPair::canonical(pair.at(0).get<std::string>(), pair.at(1).get<std::string>()),
                   o.at("iteration").get<int>()};
    if (!seen.insert(key).second) throw ValidationError("duplicate matchup " + key.str());
    plan.iterations = std::max(plan.iterations, key.iteration);
    const auto kind = o.at("kind").get<std::string>();
    if (kind == "direct") {
      plan.direct.push_back({key, parse_framing(o.at("framing").get<std::string>())});
    } else if (kind == "implied") {
      auto winner = o.at("forced_winner").get<std::string>();
      if (!key.pair.contains(winner))
        throw ValidationError("forced winner not in pair " + key.str());
      plan.implied.push_back({key, std::move(winner)});
    } else {
      throw ValidationError("unknown matchup kind '" + kind + "'");
    }
  }
  return plan;
}

}  // namespace pairscale
