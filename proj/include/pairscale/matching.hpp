#pragma once

#include <array>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "pairscale/judge.hpp"

namespace pairscale {

inline const std::vector<std::string> kDefaultTiePhrases{"both", "neither", "equally",
                                                         "unable to determine"};

// Case-folds, drops apostrophes, turns other punctuation into spaces,
// collapses whitespace and strips leading "Senator"/"Sen." titles.
std::string normalize_text(std::string_view text);

// Resolution order: the whole text is one candidate's name; exactly one full
// name occurs; exactly one last name occurs; a tie phrase occurs; otherwise
// Unresolved.
Resolution local_match(std::string_view text, const std::array<Candidate, 2>& candidates,
                       const std::vector<std::string>& tie_phrases = kDefaultTiePhrases);

// raw answer, a blank line, then the framing's extraction instruction.
std::string extraction_prompt(std::string_view raw, Framing framing, const Vocabulary& vocab);

struct Extraction {
  Resolution resolution;
  std::optional<std::string> extraction_response;
};

// Asks the judge to pull the selected name out of `raw`, then matches the
// reply locally. Falls back to matching `raw` itself when the judge fails or
// its reply does not resolve.
Extraction extract_winner(std::string_view raw, const JudgeRequest& request, Judge& judge,
                          const Vocabulary& vocab,
                          const std::vector<std::string>& tie_phrases = kDefaultTiePhrases);

}  // namespace pairscale
