#include "pairscale/replay_judge.hpp"

#include <json.hpp>

#include "pairscale/errors.hpp"
#include "pairscale/io.hpp"

namespace pairscale {

std::vector<CategorizationRecord> read_categorization_log(const std::filesystem::path& path) {
  std::vector<CategorizationRecord> out;
  const std::string text = io::read_file(path);
  std::size_t pos = 0, line = 0;
  while (pos < text.size()) {
    ++line;
    auto nl = text.find('\n', pos);
    if (nl == std::string::npos) nl = text.size();
    const std::string_view row(text.data() + pos, nl - pos);
    pos = nl + 1;
    if (row.find_first_not_of(" \t\r") == std::string_view::npos) continue;
    try {
      const auto j = nlohmann::json::parse(row);
      out.push_back({j.at("entity_id").get<std::string>(), j.at("run").get<int>(),
                     j.value("attempt", 0), j.value("prompt", std::string{}),
                     j.at("response").get<std::string>()});
    } catch (const std::exception& err) {
      throw ParseError(path.string(), line, err.what());
    }
  }
  return out;
}

void write_categorization_log(const std::filesystem::path& path,
                              const std::vector<CategorizationRecord>& records) {
  std::string text;
  for (const auto& r : records) {
    nlohmann::ordered_json j;
    j["entity_id"] = r.entity_id;
    j["run"] = r.run;
    j["attempt"] = r.attempt;
    j["prompt"] = r.prompt;
    j["response"] = r.response;
    text += j.dump() + "\n";
  }
  io::write_file_atomic(path, text);
}

ReplayJudge::ReplayJudge(std::vector<Transcript> transcripts,
                         std::vector<CategorizationRecord> categories) {
  for (auto& t : transcripts) transcripts_.insert_or_assign(t.key, std::move(t));
  for (auto& c : categories)
    categories_.insert_or_assign({c.entity_id, c.run, c.attempt}, std::move(c.response));
}

std::string ReplayJudge::categorize(const CategoryQuery& query) {
  auto it = categories_.find({query.entity.id, query.run, query.attempt});
  if (it == categories_.end())
    throw MissingRecordError("no categorization record for " + query.key());
  return it->second;
}

std::string ReplayJudge::compare(const JudgeRequest& request) {
  auto it = transcripts_.find(request.key);
  if (it == transcripts_.end() || !it->second.raw_response)
    throw MissingRecordError("no recorded response for matchup " + request.key.str());
  return *it->second.raw_response;
}

std::optional<std::string> ReplayJudge::extract(const JudgeRequest& request, const std::string&) {
  auto it = transcripts_.find(request.key);
  if (it == transcripts_.end())
    throw MissingRecordError("no recorded response for matchup " + request.key.str());
  return it->second.extraction_response;
}

std::string RecordingJudge::categorize(const CategoryQuery& query) {
  auto response = inner_.categorize(query);
  std::lock_guard lock(mutex_);
  records_.push_back({query.entity.id, query.run, query.attempt, query.prompt, response});
  return response;
}

std::vector<CategorizationRecord> RecordingJudge::records() const {
  std::lock_guard lock(mutex_);
  return records_;
}

}  // namespace pairscale
