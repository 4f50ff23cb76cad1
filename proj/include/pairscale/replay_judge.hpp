#pragma once

#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <tuple>
#include <vector>

#include "pairscale/judge.hpp"

namespace pairscale {

// One categorization answer, as logged by cmd_categorize. Stored as JSONL:
// {entity_id, run, attempt, prompt, response}.
struct CategorizationRecord {
  std::string entity_id;
  int run = 0;
  int attempt = 0;
  std::string prompt;
  std::string response;
};

std::vector<CategorizationRecord> read_categorization_log(const std::filesystem::path& path);
void write_categorization_log(const std::filesystem::path& path,
                              const std::vector<CategorizationRecord>& records);

// Answers from recorded transcripts and categorization records. Missing
// entries raise MissingRecordError naming the query.
class ReplayJudge final : public Judge {
 public:
  ReplayJudge(std::vector<Transcript> transcripts, std::vector<CategorizationRecord> categories);

  std::string id() const override { return "replay"; }
  Source source() const override { return Source::Replay; }
  std::string categorize(const CategoryQuery& query) override;
  std::string compare(const JudgeRequest& request) override;
  std::optional<std::string> extract(const JudgeRequest& request,
                                     const std::string& extraction_prompt) override;

 private:
  std::map<MatchupKey, Transcript> transcripts_;
  std::map<std::tuple<std::string, int, int>, std::string> categories_;
};

// Forwards to another judge and keeps every categorization exchange.
class RecordingJudge final : public Judge {
 public:
  explicit RecordingJudge(Judge& inner) : inner_(inner) {}

  std::string id() const override { return inner_.id(); }
  Source source() const override { return inner_.source(); }
  std::string categorize(const CategoryQuery& query) override;
  std::string compare(const JudgeRequest& request) override { return inner_.compare(request); }
  std::optional<std::string> extract(const JudgeRequest& request,
                                     const std::string& prompt) override {
    return inner_.extract(request, prompt);
  }

  std::vector<CategorizationRecord> records() const;

 private:
  Judge& inner_;
  mutable std::mutex mutex_;
  std::vector<CategorizationRecord> records_;
};

}  // namespace pairscale
