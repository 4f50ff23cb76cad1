#pragma once

#include <array>
#include <compare>
#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

namespace pairscale {

// The two ends of the latent dimension. PoleB is the "winning" direction of
// every contest (larger ability = further toward PoleB).
enum class Pole { A, B };
enum class Strength { Strong, Moderate };

struct Category {
  Pole pole = Pole::A;
  Strength strength = Strength::Moderate;

  friend bool operator==(const Category&, const Category&) = default;
};

inline constexpr std::array<Category, 4> kAllCategories{{
    {Pole::A, Strength::Strong},
    {Pole::A, Strength::Moderate},
    {Pole::B, Strength::Moderate},
    {Pole::B, Strength::Strong},
}};

// "strong_a", "moderate_a", "moderate_b", "strong_b"
std::string_view category_name(Category c);
std::optional<Category> parse_category(std::string_view name);

struct Entity {
  std::string id;
  std::string full_name;
  std::string group;
  std::string region;
  std::string caucus_group;
};

// Which caucus_group labels belong to each pole.
struct PoleLabels {
  std::set<std::string> pole_a{"D"};
  std::set<std::string> pole_b{"R"};

  // Throws ValidationError when the label maps to neither or both poles.
  Pole resolve(const std::string& caucus_group) const;
};

// Words used to fill the prompt templates.
struct Vocabulary {
  std::string entity_noun = "senator";
  std::string pole_a_trait = "liberal";
  std::string pole_b_trait = "conservative";
  std::string pole_a_member = "Democrat";
  std::string pole_b_member = "Republican";
  std::string extraction_toward_a =
      "In the above text, who is described to be the more liberal, more progressive, or less "
      "conservative senator? Return only the full name without party affiliation or state "
      "information.";
  std::string extraction_toward_b =
      "In the above text, who is described to be the more conservative or less liberal "
      "senator? Return only the full name without party affiliation or state information.";

  const std::string& trait(Pole p) const { return p == Pole::A ? pole_a_trait : pole_b_trait; }
  const std::string& member(Pole p) const { return p == Pole::A ? pole_a_member : pole_b_member; }
};

// Unordered entity pair stored with the lexicographically smaller id first.
struct EntityPair {
  std::string first;
  std::string second;

  static EntityPair canonical(std::string a, std::string b);
  bool contains(const std::string& id) const { return id == first || id == second; }
  const std::string& other(const std::string& id) const { return id == first ? second : first; }

  friend auto operator<=>(const EntityPair&, const EntityPair&) = default;
};

struct MatchupKey {
  EntityPair pair;
  int iteration = 1;

  // "first|second#iteration"
  std::string str() const;
  static MatchupKey parse(std::string_view text);

  friend auto operator<=>(const MatchupKey&, const MatchupKey&) = default;
};

// Which pole's trait the comparison question asks about.
enum class Framing { TowardPoleA, TowardPoleB };

std::string_view framing_name(Framing f);  // "toward_pole_a" / "toward_pole_b"
Framing parse_framing(std::string_view name);
inline Pole framing_pole(Framing f) { return f == Framing::TowardPoleA ? Pole::A : Pole::B; }

// Roster CSV: id,full_name,group,region,caucus_group. Entities are returned in
// file order; every caucus_group must resolve through `labels`.
std::vector<Entity> load_roster(const std::filesystem::path& path, const PoleLabels& labels = {});
std::vector<Entity> parse_roster(std::string_view text, const std::string& source_name,
                                 const PoleLabels& labels = {});
void write_roster(const std::filesystem::path& path, const std::vector<Entity>& entities);

std::map<std::string, const Entity*> index_by_id(const std::vector<Entity>& entities);

// Overrides CSV: entity_id,field,value,reason.
//   <entity id>,category,<category name>,<reason>
//   <matchup key>,resolution,<entity id>|tie,<reason>
// A resolution override names the entity selected in answer to the matchup's
// framed question, the same convention transcripts use.
struct Overrides {
  struct Entry {
    std::string value;
    std::string reason;
  };
  std::map<std::string, Category> categories;
  std::map<MatchupKey, Entry> resolutions;

  bool empty() const { return categories.empty() && resolutions.empty(); }
};

Overrides load_overrides(const std::filesystem::path& path);
Overrides parse_overrides(std::string_view text, const std::string& source_name);

}  // namespace pairscale
