#include "pairscale/runner.hpp"

#include <atomic>
#include <exception>
#include <map>
#include <mutex>
#include <set>
#include <thread>

#include "pairscale/errors.hpp"

namespace pairscale {

Transcript implied_transcript(const ImpliedMatchup& matchup, const std::string& timestamp) {
  Transcript t;
  t.key = matchup.key;
  t.framing = Framing::TowardPoleB;
  t.resolution = Resolution::winner(matchup.forced_winner);
  t.source = Source::CategoryImplied;
  t.judge_id = "categorization";
  t.timestamp = timestamp;
  return t;
}

std::vector<Transcript> run_schedule(const SchedulePlan& plan, const std::vector<Entity>& entities,
                                     Judge* judge, const RunOptions& options) {
  std::set<MatchupKey> planned;
  for (const auto& d : plan.direct) planned.insert(d.key);
  for (const auto& m : plan.implied) planned.insert(m.key);

  std::map<MatchupKey, Transcript> done;
  if (options.resume) {
    for (auto& t : read_transcript_log(options.log_path))
      if (planned.count(t.key)) done.insert_or_assign(t.key, std::move(t));
  } else if (std::filesystem::exists(options.log_path)) {
    std::filesystem::remove(options.log_path);
  }
  TranscriptLog log(options.log_path);

  for (const auto& m : plan.implied) {
    if (done.count(m.key)) continue;
    auto t = implied_transcript(m, options.clock());
    log.append(t);
    done.emplace(m.key, std::move(t));
  }

  std::vector<const DirectMatchup*> pending;
  for (const auto& d : plan.direct)
    if (!done.count(d.key)) pending.push_back(&d);

  if (!pending.empty()) {
    if (!judge) throw ConfigError("plan has direct matchups but no judge is available");
    const auto index = index_by_id(entities);
    std::mutex done_mutex;
    std::atomic<std::size_t> next{0};
    std::atomic<bool> stop{false};
    std::exception_ptr failure;
    std::mutex failure_mutex;

    auto worker = [&] {
      while (!stop.load()) {
        const std::size_t i = next.fetch_add(1);
        if (i >= pending.size()) return;
        try {
          const auto request = make_request(*pending[i], index, options.vocab);
          const std::string raw = judge->compare(request);
          auto extraction =
              extract_winner(raw, request, *judge, options.vocab, options.tie_phrases);
          Transcript t;
          t.key = request.key;
          t.framing = request.framing;
          t.prompt = request.prompt;
          t.raw_response = raw;
          t.extraction_response = std::move(extraction.extraction_response);
          t.resolution = std::move(extraction.resolution);
          t.source = judge->source();
          t.judge_id = judge->id();
          t.timestamp = options.clock();
          log.append(t);
          std::lock_guard lock(done_mutex);
          done.emplace(t.key, std::move(t));
        } catch (...) {
          std::lock_guard lock(failure_mutex);
          if (!failure) failure = std::current_exception();
          stop.store(true);
        }
      }
    };

    const std::size_t workers =
        std::max<std::size_t>(1, std::min(options.concurrency, pending.size()));
    if (workers == 1) {
      worker();
    } else {
      std::vector<std::jthread> pool;
      for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(worker);
    }
    if (failure) std::rethrow_exception(failure);
  }

  std::vector<Transcript> out;
  out.reserve(done.size());
  for (auto& [key, t] : done) out.push_back(std::move(t));
  sort_transcripts(out);
  return out;
}

}  // namespace pairscale
