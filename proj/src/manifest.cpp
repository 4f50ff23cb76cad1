#include "pairscale/manifest.hpp"

#include "pairscale/errors.hpp"
#include "pairscale/io.hpp"

namespace pairscale {

namespace fs = std::filesystem;

std::string_view stage_name(Stage s) {
  switch (s) {
    case Stage::Categorized: return "categorized";
    case Stage::Scheduled: return "scheduled";
    case Stage::Executed: return "executed";
    case Stage::Estimated: return "estimated";
    case Stage::Validated: return "validated";
  }
  return "";
}

std::string_view stage_command(Stage s) {
  switch (s) {
    case Stage::Categorized: return "categorize";
    case Stage::Scheduled: return "schedule";
    case Stage::Executed: return "run";
    case Stage::Estimated: return "estimate";
    case Stage::Validated: return "validate";
  }
  return "";
}

RunManifest::RunManifest(fs::path out_dir) : out_dir_(std::move(out_dir)) {
  for (auto s : kAllStages) stages_[s] = {};
}

RunManifest RunManifest::load(const fs::path& out_dir) {
  RunManifest m(out_dir);
  const auto p = m.path();
  if (!fs::exists(p)) return m;
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(io::read_file(p));
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(p.string(), 0, std::string("invalid manifest: ") + e.what());
  }
  if (j.contains("config")) m.config_ = j["config"];
  const auto& stages = j.value("stages", nlohmann::json::object());
  for (auto s : kAllStages) {
    const auto name = std::string(stage_name(s));
    if (!stages.contains(name)) continue;
    const auto& js = stages[name];
    StageRecord r;
    r.complete = js.value("complete", false);
    r.inputs = js.value("inputs", std::map<std::string, std::string>{});
    r.outputs = js.value("outputs", std::map<std::string, std::string>{});
    m.stages_[s] = std::move(r);
  }
  return m;
}

void RunManifest::save() const {
  nlohmann::ordered_json j;
  j["tool_version"] = PAIRSCALE_VERSION;
  j["config"] = config_;
  nlohmann::ordered_json stages = nlohmann::ordered_json::object();
  for (auto s : kAllStages) {
    const auto& r = stages_.at(s);
    stages[std::string(stage_name(s))] = {
        {"complete", r.complete}, {"inputs", r.inputs}, {"outputs", r.outputs}};
  }
  j["stages"] = std::move(stages);
  fs::create_directories(out_dir_);
  io::write_file_atomic(path(), j.dump(2) + "\n");
}

std::string RunManifest::relative(const fs::path& p) const {
  const auto rel = p.lexically_relative(out_dir_);
  if (rel.empty() || *rel.begin() == "..") return fs::absolute(p).lexically_normal().string();
  return rel.generic_string();
}

void RunManifest::mark(Stage stage, const std::vector<fs::path>& inputs,
                       const std::vector<fs::path>& outputs) {
  invalidate_from(stage);
  StageRecord r;
  for (const auto& p : inputs) r.inputs[relative(p)] = io::file_sha256(p);
  for (const auto& p : outputs) r.outputs[relative(p)] = io::file_sha256(p);
  r.complete = true;
  stages_[stage] = std::move(r);
}

void RunManifest::invalidate_from(Stage stage) {
  for (auto s : kAllStages)
    if (s >= stage) stages_[s] = {};
}

std::optional<std::string> RunManifest::first_mismatch(const StageRecord& r) const {
  for (const auto* files : {&r.inputs, &r.outputs}) {
    for (const auto& [name, hash] : *files) {
      fs::path p(name);
      if (p.is_relative()) p = out_dir_ / p;
      if (!fs::exists(p)) return name + " is missing";
      if (io::file_sha256(p) != hash) return name + " has changed";
    }
  }
  return std::nullopt;
}

bool RunManifest::is_complete(Stage stage) const {
  const auto& r = stages_.at(stage);
  return r.complete && !first_mismatch(r);
}

void RunManifest::require(Stage stage) const {
  const auto& r = stages_.at(stage);
  const std::string cmd(stage_command(stage));
  if (!r.complete)
    throw StaleStageError("stage '" + std::string(stage_name(stage)) +
                              "' has not completed; run `pairscale " + cmd + "` first",
                          std::string(stage_name(stage)));
  if (auto why = first_mismatch(r))
    throw StaleStageError("stage '" + std::string(stage_name(stage)) + "' is stale (" + *why +
                              "); rerun `pairscale " + cmd + "`",
                          std::string(stage_name(stage)));
}

const StageRecord& RunManifest::record(Stage stage) const { return stages_.at(stage); }

}  // namespace pairscale
