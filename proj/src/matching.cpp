#include "pairscale/matching.hpp"

#include <cctype>

#include "pairscale/errors.hpp"

namespace pairscale {

namespace {

const std::array<std::string_view, 2> kTitles{"senator", "sen"};
const std::array<std::string_view, 6> kSuffixes{"jr", "sr", "ii", "iii", "iv", "v"};

std::vector<std::string> tokens(const std::string& normalized) {
  std::vector<std::string> out;
  std::size_t pos = 0;
  while (pos < normalized.size()) {
    auto sp = normalized.find(' ', pos);
    if (sp == std::string::npos) sp = normalized.size();
    if (sp > pos) out.emplace_back(normalized.substr(pos, sp - pos));
    pos = sp + 1;
  }
  return out;
}

bool contains_phrase(const std::string& text, const std::string& phrase) {
  if (phrase.empty()) return false;
  return (" " + text + " ").find(" " + phrase + " ") != std::string::npos;
}

std::string last_name(const std::string& normalized_name) {
  auto toks = tokens(normalized_name);
  while (toks.size() > 1) {
    bool suffix = false;
    for (auto s : kSuffixes) suffix |= toks.back() == s;
    if (!suffix) break;
    toks.pop_back();
  }
  return toks.empty() ? std::string{} : toks.back();
}

}  // namespace

std::string normalize_text(std::string_view text) {
  std::string out;
  out.reserve(text.size());
  bool pending_space = false;
  for (std::size_t i = 0; i < text.size(); ++i) {
    const auto c = static_cast<unsigned char>(text[i]);
    if (c == '\'') continue;
    if (c == 0xE2 && i + 2 < text.size() && static_cast<unsigned char>(text[i + 1]) == 0x80 &&
        (static_cast<unsigned char>(text[i + 2]) == 0x98 ||
         static_cast<unsigned char>(text[i + 2]) == 0x99)) {
      i += 2;  // curly apostrophes
      continue;
    }
    if (c >= 0x80 || std::isalnum(c)) {
      if (pending_space && !out.empty()) out.push_back(' ');
      pending_space = false;
      out.push_back(static_cast<char>(std::tolower(c)));
    } else {
      pending_space = true;
    }
  }
  for (bool stripped = true; stripped;) {
    stripped = false;
    for (auto title : kTitles) {
      if (out.size() > title.size() && out.compare(0, title.size(), title) == 0 &&
          out[title.size()] == ' ') {
        out.erase(0, title.size() + 1);
        stripped = true;
      }
    }
  }
  return out;
}

Resolution local_match(std::string_view text, const std::array<Candidate, 2>& candidates,
                       const std::vector<std::string>& tie_phrases) {
  const std::string norm = normalize_text(text);
  if (norm.empty()) return Resolution::unresolved();
  const std::array<std::string, 2> names{normalize_text(candidates[0].name),
                                         normalize_text(candidates[1].name)};

  for (int k = 0; k < 2; ++k)
    if (norm == names[k] && names[k] != names[1 - k]) return Resolution::winner(candidates[k].id);

  const std::array<bool, 2> full{contains_phrase(norm, names[0]), contains_phrase(norm, names[1])};
  if (full[0] != full[1]) return Resolution::winner(candidates[full[0] ? 0 : 1].id);

  if (!full[0]) {
    const std::array<std::string, 2> last{last_name(names[0]), last_name(names[1])};
    if (last[0] != last[1]) {
      const std::array<bool, 2> hit{contains_phrase(norm, last[0]), contains_phrase(norm, last[1])};
      if (hit[0] != hit[1]) return Resolution::winner(candidates[hit[0] ? 0 : 1].id);
    }
  }

  for (const auto& phrase : tie_phrases)
    if (contains_phrase(norm, normalize_text(phrase))) return Resolution::tie();
  return Resolution::unresolved();
}

std::string extraction_prompt(std::string_view raw, Framing framing, const Vocabulary& vocab) {
  const auto& instruction =
      framing == Framing::TowardPoleA ? vocab.extraction_toward_a : vocab.extraction_toward_b;
  return std::string(raw) + "\n\n" + instruction;
}

Extraction extract_winner(std::string_view raw, const JudgeRequest& request, Judge& judge,
                          const Vocabulary& vocab, const std::vector<std::string>& tie_phrases) {
  Extraction out;
  if (raw.find_first_not_of(" \t\r\n") == std::string_view::npos) {
    out.resolution = Resolution::unresolved();
    return out;
  }
  try {
    out.extraction_response =
        judge.extract(request, extraction_prompt(raw, request.framing, vocab));
  } catch (const TransportError&) {
    out.extraction_response.reset();
  }
  if (out.extraction_response) {
    out.resolution = local_match(*out.extraction_response, request.candidates, tie_phrases);
    if (out.resolution.resolved()) return out;
  }
  out.resolution = local_match(raw, request.candidates, tie_phrases);
  return out;
}

}  // namespace pairscale
