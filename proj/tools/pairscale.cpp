#include <cstdio>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "pairscale/config.hpp"
#include "pairscale/errors.hpp"
#include "pairscale/pipeline.hpp"

namespace {

enum Exit { kOk = 0, kFailure = 1, kValidation = 2, kConfig = 3, kTransport = 4 };

int report_error(const std::exception& e, int code) {
  std::cerr << "pairscale: " << e.what() << "\n";
  return code;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Scale entities on a latent dimension from pairwise judge comparisons"};
  app.set_version_flag("--version", std::string(PAIRSCALE_VERSION));
  app.require_subcommand(1);
  app.fallthrough();

  std::string config_path, roster, judge, out, scale, external, overrides;
  std::vector<std::string> settings;
  int iterations = 0;
  std::uint64_t seed = 0;
  bool resume = false;

  app.add_option("--config", config_path, "key = value configuration file");
  app.add_option("--roster", roster, "roster CSV (id,full_name,group,region,caucus_group)");
  app.add_option("--judge", judge, "judge kind")->check(CLI::IsMember({"llm", "replay", "simulated"}));
  app.add_option("--iterations", iterations, "times every pair is compared")->check(CLI::PositiveNumber);
  auto* seed_opt = app.add_option("--seed", seed, "random seed");
  app.add_option("--out", out, "output directory");
  app.add_option("--external", external, "external scales CSV (entity_id,scale_name,value)");
  app.add_option("--overrides", overrides, "overrides CSV (entity_id,field,value,reason)");
  app.add_option("--set", settings, "extra key=value setting (repeatable)");

  auto* categorize = app.add_subcommand("categorize", "assign each entity a pole/strength category");
  auto* schedule = app.add_subcommand("schedule", "build the direct/implied matchup schedule");
  auto* run = app.add_subcommand("run", "resolve every scheduled matchup");
  run->add_flag("--resume", resume, "keep the transcript log and skip finished matchups");
  auto* estimate = app.add_subcommand("estimate", "aggregate transcripts and fit Bradley-Terry");
  auto* validate = app.add_subcommand("validate", "compute the validation report");
  auto* simulate = app.add_subcommand("simulate", "recovery study against the simulated judge");
  auto* plot = app.add_subcommand("plot", "write SVG figures");
  plot->add_option("--scale", scale, "external scale for the scatter plot");
  auto* report = app.add_subcommand("report", "print a text summary");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kConfig;
  }

  try {
    pairscale::RunConfig config =
        config_path.empty() ? pairscale::RunConfig{} : pairscale::load_config(config_path);
    for (const auto& s : settings) {
      const auto eq = s.find('=');
      if (eq == std::string::npos) throw pairscale::ConfigError("--set expects key=value, got '" + s + "'");
      config.set(s.substr(0, eq), s.substr(eq + 1));
    }
    if (!roster.empty()) config.set("roster", roster);
    if (!judge.empty()) config.set("judge", judge);
    if (iterations > 0) config.iterations = iterations;
    if (*seed_opt) config.seed = seed;
    if (!out.empty()) config.set("out_dir", out);
    if (!external.empty()) config.set("external_scales", external);
    if (!overrides.empty()) config.set("overrides", overrides);
    if (!scale.empty()) config.plot_scale = scale;

    std::string summary;
    if (app.got_subcommand(categorize)) {
      summary = pairscale::cmd_categorize(config);
    } else if (app.got_subcommand(schedule)) {
      summary = pairscale::cmd_schedule(config);
    } else if (app.got_subcommand(run)) {
      summary = pairscale::cmd_run(config, resume);
    } else if (app.got_subcommand(estimate)) {
      summary = pairscale::cmd_estimate(config);
    } else if (app.got_subcommand(validate)) {
      summary = pairscale::cmd_validate(config);
    } else if (app.got_subcommand(simulate)) {
      summary = pairscale::cmd_simulate(config);
    } else if (app.got_subcommand(plot)) {
      summary = pairscale::cmd_plot(config);
    } else if (app.got_subcommand(report)) {
      summary = pairscale::cmd_report(config);
    }
    std::cout << summary;
    if (!summary.empty() && summary.back() != '\n') std::cout << "\n";
    return kOk;
  } catch (const pairscale::TransportError& e) {
    std::cerr << "pairscale: " << e.what() << "\n"
              << "pairscale: rerun `pairscale run --resume` to continue\n";
    return kTransport;
  } catch (const pairscale::ConfigError& e) {
    return report_error(e, kConfig);
  } catch (const pairscale::StaleStageError& e) {
    return report_error(e, kConfig);
  } catch (const pairscale::MissingRecordError& e) {
    return report_error(e, kConfig);
  } catch (const pairscale::ValidationError& e) {
    return report_error(e, kValidation);
  } catch (const pairscale::ParseError& e) {
    return report_error(e, kValidation);
  } catch (const pairscale::IdentifiabilityError& e) {
    return report_error(e, kValidation);
  } catch (const pairscale::DomainError& e) {
    return report_error(e, kValidation);
  } catch (const std::exception& e) {
    return report_error(e, kFailure);
  }
}
