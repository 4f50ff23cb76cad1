#pragma once

#include <cstddef>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "pairscale/judge.hpp"
#include "pairscale/matching.hpp"
#include "pairscale/schedule.hpp"

namespace pairscale {

struct RunOptions {
  std::filesystem::path log_path;
  std::size_t concurrency = 1;
  // Keep the existing log and skip matchups already recorded in it.
  bool resume = false;
  Vocabulary vocab;
  std::vector<std::string> tie_phrases = kDefaultTiePhrases;
  std::function<std::string()> clock = utc_timestamp;
};

// Resolves every matchup of the plan. Implied matchups never reach the judge;
// direct matchups go through compare + extract_winner. Each transcript is
// appended to the log as soon as it exists. A TransportError stops the job
// after in-flight matchups finish; the log stays valid for a resumed run.
// Returns all transcripts of the plan (logged earlier or now), sorted.
std::vector<Transcript> run_schedule(const SchedulePlan& plan, const std::vector<Entity>& entities,
                                     Judge* judge, const RunOptions& options);

Transcript implied_transcript(const ImpliedMatchup& matchup, const std::string& timestamp);

}  // namespace pairscale
