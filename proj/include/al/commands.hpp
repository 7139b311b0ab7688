#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace al::cli {

struct CommandOptions {
  std::filesystem::path config;
  std::filesystem::path out;
  std::optional<std::uint64_t> seed;
  std::optional<int> reps;
  int jobs = 1;
  bool timings = false;
};

// Each command returns a process exit status and reports failures on `err`.
// Inputs are fully loaded and validated before anything is written to `out`.

/// Writes records.jsonl, curves.csv and resolved_config.json.
int cmd_run(const CommandOptions& options, std::ostream& err);

/// One run directory per value, named "<axis>=<value>", plus sweep.json.
int cmd_sweep(const CommandOptions& options, const std::string& axis,
              const std::vector<double>& values, std::ostream& err);

/// Selector runs per capacity (plus a random baseline) and crosstrain.csv
/// holding the trainee x selector accuracy grid per checkpoint.
int cmd_crosstrain(const CommandOptions& options, std::ostream& err);

/// Plain-text summary of a directory written by the commands above.
int cmd_report(const std::filesystem::path& out_dir, std::ostream& out, std::ostream& err);

inline constexpr const char* kCrossTrainHeader =
    "strategy,checkpoint,selector,trainee,labelled_size,accuracy_mean,accuracy_std,repetitions";

}  // namespace al::cli
