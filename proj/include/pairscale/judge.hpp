#pragma once

#include <array>
#include <optional>
#include <string>

#include "pairscale/roster.hpp"
#include "pairscale/transcript.hpp"

namespace pairscale {

struct Candidate {
  std::string id;
  std::string name;
};

// One direct comparison. candidates follow the order the names appear in the
// prompt (canonical pair order).
struct JudgeRequest {
  MatchupKey key;
  std::string prompt;
  Framing framing = Framing::TowardPoleA;
  std::array<Candidate, 2> candidates;
};

// One categorization query. attempt is 0 for the first ask and 1 for the
// single re-query after an unusable answer.
struct CategoryQuery {
  Entity entity;
  Pole pole = Pole::A;
  int run = 0;
  int attempt = 0;
  std::string prompt;

  std::string key() const;  // "entity_id/run/attempt"
};

// Judge contract. Implementations must be safe to call concurrently.
class Judge {
 public:
  virtual ~Judge() = default;

  virtual std::string id() const = 0;
  // Source recorded on transcripts this judge resolves.
  virtual Source source() const = 0;

  virtual std::string categorize(const CategoryQuery& query) = 0;
  // Free-text answer to the comparison prompt.
  virtual std::string compare(const JudgeRequest& request) = 0;
  // Reply to the name-extraction prompt (raw answer + instruction), or
  // nullopt when the judge has no reply to offer.
  virtual std::optional<std::string> extract(const JudgeRequest& request,
                                             const std::string& extraction_prompt) = 0;
};

}  // namespace pairscale
