#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include <json.hpp>

#include "pairscale/judge.hpp"
#include "pairscale/roster.hpp"

namespace pairscale {

enum class AssignmentMethod { JudgeMajority, Forced, Manual };

std::string_view method_name(AssignmentMethod m);
AssignmentMethod parse_method(std::string_view name);

struct CategoryAssignment {
  std::string entity_id;
  std::optional<Category> category;  // absent = Unresolved
  std::vector<std::optional<Category>> votes;  // nullopt = abstention
  AssignmentMethod method = AssignmentMethod::JudgeMajority;

  bool unresolved() const { return !category.has_value(); }
};

// "Is <name> (<group>-<region>) considered a moderate <member> or <trait> <member>?"
std::string render_category_prompt(const Entity& entity, Pole pole, const Vocabulary& vocab);

// Reads a categorization answer; nullopt for refusals and unparseable text.
std::optional<Category> parse_category_answer(std::string_view answer, Pole pole,
                                              const Vocabulary& vocab);

// Strict majority among non-abstaining votes.
std::optional<Category> majority_vote(const std::vector<std::optional<Category>>& votes);

// Asks the judge `runs` times (runs must be odd). An unusable answer gets one
// re-query before it counts as an abstention.
CategoryAssignment categorize_entity(const Entity& entity, Judge& judge, int runs,
                                     const PoleLabels& labels, const Vocabulary& vocab);

// Manual overrides replace (or fill in) categories.
void apply_category_overrides(std::vector<CategoryAssignment>& assignments,
                              const Overrides& overrides);

void write_assignments(const std::filesystem::path& path,
                       const std::vector<CategoryAssignment>& assignments);
std::vector<CategoryAssignment> load_assignments(const std::filesystem::path& path);

struct DirectClass {
  Framing framing;
};
struct ImpliedClass {
  int winner;  // 0 = first argument, 1 = second argument
};
using MatchupClass = std::variant<DirectClass, ImpliedClass>;

// Strong at one pole vs. anything at the other pole is decided by the
// categories (the PoleB side wins). Everything else goes to the judge, asked
// toward PoleB only when both entities sit at PoleB.
MatchupClass classify_matchup(Category first, Category second);

struct DirectMatchup {
  MatchupKey key;
  Framing framing = Framing::TowardPoleA;
};

struct ImpliedMatchup {
  MatchupKey key;
  std::string forced_winner;  // entity further toward PoleB
};

struct SchedulePlan {
  int iterations = 0;
  std::vector<DirectMatchup> direct;
  std::vector<ImpliedMatchup> implied;
};

struct ScheduleOptions {
  int iterations = 3;
  // When false every pair is sent to the judge (full round robin).
  bool use_implied = true;
};

// Enumerates every unordered pair once per iteration, ordered by
// (iteration, pair). Throws ValidationError listing uncategorized entities.
SchedulePlan build_schedule(const std::vector<Entity>& entities,
                            const std::map<std::string, Category>& categories,
                            const ScheduleOptions& options);

std::map<std::string, Category> category_map(const std::vector<CategoryAssignment>& assignments);

// "Which <noun> is more <trait>: <name> (<group>-<region>) or <name> (<group>-<region>)?"
std::string render_prompt(const Entity& first, const Entity& second, Framing framing,
                          const Vocabulary& vocab);

JudgeRequest make_request(const DirectMatchup& matchup, const std::map<std::string, const Entity*>& index,
                          const Vocabulary& vocab);

nlohmann::ordered_json schedule_to_json(const SchedulePlan& plan);
SchedulePlan schedule_from_json(const nlohmann::json& j);

}  // namespace pairscale
