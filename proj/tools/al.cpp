#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "al/commands.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Pool-based active learning experiments"};
  app.require_subcommand(1);

  al::cli::CommandOptions options;
  std::uint64_t seed = 0;
  int reps = 0;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", options.config, "Experiment config (JSON)")->required()->check(CLI::ExistingFile);
    sub->add_option("--out", options.out, "Output directory")->required();
    sub->add_option("--seed", seed, "Override the master seed");
    sub->add_option("--reps", reps, "Override the repetition count")->check(CLI::PositiveNumber);
    sub->add_option("--jobs", options.jobs, "Worker threads")->check(CLI::PositiveNumber);
    sub->add_flag("--timings", options.timings, "Record wall time per iteration");
  };

  auto* run = app.add_subcommand("run", "Run one strategy for all repetitions");
  add_common(run);

  auto* sweep = app.add_subcommand("sweep", "Run one strategy for each value of a parameter");
  add_common(sweep);
  std::string axis;
  std::vector<double> values;
  sweep->add_option("--axis", axis, "learning_rate, batch_size, dropout or noise_rate")->required();
  sweep->add_option("--values", values, "Comma-separated values")->required()->delimiter(',');

  auto* crosstrain = app.add_subcommand("crosstrain", "Train each capacity on each capacity's selections");
  add_common(crosstrain);

  auto* report = app.add_subcommand("report", "Summarize an output directory");
  std::filesystem::path report_dir;
  report->add_option("dir", report_dir, "Output directory")->required();

  CLI11_PARSE(app, argc, argv);

  auto apply_overrides = [&](CLI::App* sub) {
    if (sub->count("--seed") > 0) options.seed = seed;
    if (sub->count("--reps") > 0) options.reps = reps;
  };

  if (*run) {
    apply_overrides(run);
    return al::cli::cmd_run(options, std::cerr);
  }
  if (*sweep) {
    apply_overrides(sweep);
    return al::cli::cmd_sweep(options, axis, values, std::cerr);
  }
  if (*crosstrain) {
    apply_overrides(crosstrain);
    return al::cli::cmd_crosstrain(options, std::cerr);
  }
  return al::cli::cmd_report(report_dir, std::cout, std::cerr);
}
