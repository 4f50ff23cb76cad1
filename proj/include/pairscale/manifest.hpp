#pragma once

#include <array>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace pairscale {

enum class Stage { Categorized, Scheduled, Executed, Estimated, Validated };

inline constexpr std::array<Stage, 5> kAllStages{Stage::Categorized, Stage::Scheduled,
                                                 Stage::Executed, Stage::Estimated,
                                                 Stage::Validated};

std::string_view stage_name(Stage s);
// Subcommand that produces the stage.
std::string_view stage_command(Stage s);

struct StageRecord {
  bool complete = false;
  // Paths relative to the output directory -> sha256.
  std::map<std::string, std::string> inputs;
  std::map<std::string, std::string> outputs;
};

// manifest.json in the output directory.
class RunManifest {
 public:
  explicit RunManifest(std::filesystem::path out_dir);

  // Reads manifest.json if present; otherwise starts empty.
  static RunManifest load(const std::filesystem::path& out_dir);
  void save() const;

  void set_config(nlohmann::ordered_json snapshot) { config_ = std::move(snapshot); }
  const nlohmann::ordered_json& config() const { return config_; }

  // Records the stage as complete with the current hashes of its files and
  // clears every later stage.
  void mark(Stage stage, const std::vector<std::filesystem::path>& inputs,
            const std::vector<std::filesystem::path>& outputs);
  // Clears the stage and every later stage.
  void invalidate_from(Stage stage);

  // True when the stage is flagged and every recorded file still hashes the
  // same.
  bool is_complete(Stage stage) const;
  // Throws StaleStageError naming the subcommand to rerun.
  void require(Stage stage) const;

  const StageRecord& record(Stage stage) const;
  const std::filesystem::path& out_dir() const { return out_dir_; }
  std::filesystem::path path() const { return out_dir_ / "manifest.json"; }

 private:
  std::optional<std::string> first_mismatch(const StageRecord& r) const;
  std::string relative(const std::filesystem::path& p) const;

  std::filesystem::path out_dir_;
  nlohmann::ordered_json config_ = nlohmann::ordered_json::object();
  std::map<Stage, StageRecord> stages_;
};

}  // namespace pairscale
