#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "pairscale/config.hpp"
#include "pairscale/judge.hpp"
#include "pairscale/manifest.hpp"
#include "pairscale/stats.hpp"

namespace pairscale {

// Files a run writes under its output directory.
struct OutputPaths {
  std::filesystem::path dir;

  explicit OutputPaths(std::filesystem::path d) : dir(std::move(d)) {}
  std::filesystem::path assignments() const { return dir / "assignments.csv"; }
  std::filesystem::path categorization_log() const { return dir / "categorization_log.jsonl"; }
  std::filesystem::path schedule() const { return dir / "schedule.json"; }
  std::filesystem::path transcripts() const { return dir / "transcripts.jsonl"; }
  std::filesystem::path contest() const { return dir / "contest.csv"; }
  std::filesystem::path fit() const { return dir / "fit.json"; }
  std::filesystem::path iteration_fit(int iteration) const {
    return dir / "fits" / ("iteration_" + std::to_string(iteration) + ".json");
  }
  std::filesystem::path report() const { return dir / "report.json"; }
  std::filesystem::path report_text() const { return dir / "report.txt"; }
  std::filesystem::path density_svg() const { return dir / "density.svg"; }
  std::filesystem::path scatter_svg(const std::string& scale) const {
    return dir / ("scatter_" + scale + ".svg");
  }
  std::filesystem::path r2_svg() const { return dir / "r2.svg"; }
  std::filesystem::path simulation() const { return dir / "simulation.json"; }
};

// Group label used for per-group statistics and plots: the entity's own
// group when it names a pole, otherwise its caucus group.
std::string display_group(const Entity& entity, const PoleLabels& labels);

// Builds the configured judge. The LLM judge fails here when its API key is
// missing.
std::unique_ptr<Judge> make_judge(const RunConfig& config);

// Each command returns a short human-readable summary. `judge` overrides the
// configured one when given.
std::string cmd_categorize(const RunConfig& config, Judge* judge = nullptr);
std::string cmd_schedule(const RunConfig& config);
std::string cmd_run(const RunConfig& config, bool resume, Judge* judge = nullptr);
std::string cmd_estimate(const RunConfig& config);
std::string cmd_validate(const RunConfig& config);
std::string cmd_plot(const RunConfig& config);
std::string cmd_report(const RunConfig& config);

struct RecoveryResult {
  std::uint64_t seed = 0;
  std::size_t entities = 0;
  bool converged = false;
  // Estimated lambda against the true scores; nullopt when undefined (e.g.
  // every estimate equal).
  std::optional<double> spearman;
  std::optional<double> pearson;
  std::optional<double> kendall;
  std::optional<CorrelationMatrix> iteration_consistency;
};

struct RecoveryStudy {
  std::vector<RecoveryResult> runs;
  std::optional<double> mean_spearman;
  std::optional<double> mean_pearson;
  std::optional<double> mean_kendall;
};

// Draws `simulate_count` true scores ~ U[low, high] from the seed, writes a
// synthetic roster into `dir` and runs categorize, schedule, run, estimate and
// validate there against the simulated judge.
RecoveryResult run_recovery(const RunConfig& config, std::uint64_t seed,
                            const std::filesystem::path& dir);
RecoveryStudy run_recovery_study(const RunConfig& config);
nlohmann::ordered_json recovery_to_json(const RecoveryStudy& study);

// Runs the recovery study for every configured seed under out_dir/simulate
// and writes simulation.json.
std::string cmd_simulate(const RunConfig& config);

}  // namespace pairscale
