#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "al/classifier.hpp"
#include "al/data.hpp"
#include "al/engine.hpp"

namespace al::cli {

inline constexpr int kSchemaVersion = 1;

struct DatasetDescriptor {
  enum class Format { Idx, Csv, Synthetic };
  Format format = Format::Synthetic;

  // idx
  std::filesystem::path train_images, train_labels, test_images, test_labels;
  // csv
  std::filesystem::path train_path, test_path;
  std::string label_column = "label";
  // synthetic
  data::SyntheticSpec synthetic;

  /// Share of the data held out as test set when no test file is given.
  double test_fraction = 0.2;
  std::uint64_t split_seed = 0;
  /// When set, must equal the class count found at load time.
  std::optional<int> class_count;
};

struct CrossTrainSection {
  std::vector<Capacity> capacities{Capacity::Min, Capacity::Med, Capacity::Max};
  std::vector<int> checkpoints{3, 5, 10, 15};
  /// Directory with <capacity>/records.jsonl and random/records.jsonl from an
  /// earlier crosstrain; selector runs are recomputed when absent.
  std::optional<std::filesystem::path> selector_runs;
};

/// Parsed experiment file. The classifier head is left open until the dataset
/// is loaded; see resolve_experiment().
struct RunConfigFile {
  std::string name = "experiment";
  DatasetDescriptor dataset;
  ExperimentConfig experiment;
  bool hierarchical_head = false;
  std::optional<CrossTrainSection> crosstrain;
};

/// Strict parse: unknown keys and schema_version mismatches are ConfigErrors.
/// Relative paths resolve against `base_dir`.
RunConfigFile parse_run_config(const nlohmann::json& j, const std::filesystem::path& base_dir);
RunConfigFile load_run_config(const std::filesystem::path& path);

struct LoadedData {
  ExperimentData data;
  std::vector<std::string> label_mapping;  // CSV only
};

/// Loads or generates pool and test sets. Throws ParseError/ConfigError.
LoadedData load_experiment_data(const DatasetDescriptor& descriptor);

/// Experiment config with the classifier head bound to the loaded dataset.
ExperimentConfig resolve_experiment(const RunConfigFile& file, const ExperimentData& data);

/// Fully resolved config (defaults filled in) in the input schema.
nlohmann::json to_json(const RunConfigFile& file);

}  // namespace al::cli
