#include "al/config.hpp"

#include <fstream>

#include "al/error.hpp"
#include "al/serialization.hpp"

namespace al::cli {
namespace {

std::filesystem::path resolve_path(const nlohmann::json& j, const char* key,
                                   const std::filesystem::path& base) {
  std::filesystem::path p = j.at(key).get<std::string>();
  return p.is_absolute() ? p : base / p;
}

std::string_view format_name(DatasetDescriptor::Format f) {
  switch (f) {
    case DatasetDescriptor::Format::Idx: return "idx";
    case DatasetDescriptor::Format::Csv: return "csv";
    case DatasetDescriptor::Format::Synthetic: return "synthetic";
  }
  return "unknown";
}

DatasetDescriptor parse_dataset(const nlohmann::json& j, const std::filesystem::path& base) {
  DatasetDescriptor d;
  const auto format = j.at("format").get<std::string>();
  if (format == "idx") {
    reject_unknown_keys(j, {"format", "train_images", "train_labels", "test_images", "test_labels",
                            "class_count"},
                        "dataset");
    d.format = DatasetDescriptor::Format::Idx;
    d.train_images = resolve_path(j, "train_images", base);
    d.train_labels = resolve_path(j, "train_labels", base);
    d.test_images = resolve_path(j, "test_images", base);
    d.test_labels = resolve_path(j, "test_labels", base);
  } else if (format == "csv") {
    reject_unknown_keys(j, {"format", "train_path", "test_path", "label_column", "test_fraction",
                            "split_seed", "class_count"},
                        "dataset");
    d.format = DatasetDescriptor::Format::Csv;
    d.train_path = resolve_path(j, "train_path", base);
    if (j.contains("test_path")) d.test_path = resolve_path(j, "test_path", base);
    d.label_column = j.value("label_column", d.label_column);
  } else if (format == "synthetic") {
    reject_unknown_keys(j, {"format", "class_count", "clusters_per_class", "samples_per_cluster",
                            "feature_dim", "cluster_std", "class_separation", "seed", "hierarchy",
                            "test_fraction", "split_seed"},
                        "dataset");
    d.format = DatasetDescriptor::Format::Synthetic;
    auto& s = d.synthetic;
    s.class_count = j.value("class_count", s.class_count);
    s.clusters_per_class = j.value("clusters_per_class", s.clusters_per_class);
    s.samples_per_cluster = j.value("samples_per_cluster", s.samples_per_cluster);
    s.feature_dim = j.value("feature_dim", s.feature_dim);
    s.cluster_std = j.value("cluster_std", s.cluster_std);
    s.class_separation = j.value("class_separation", s.class_separation);
    s.seed = j.value("seed", s.seed);
    s.hierarchy = j.value("hierarchy", s.hierarchy);
  } else {
    throw ConfigError("dataset.format must be idx, csv or synthetic");
  }
  d.test_fraction = j.value("test_fraction", d.test_fraction);
  d.split_seed = j.value("split_seed", d.split_seed);
  if (j.contains("class_count") && d.format != DatasetDescriptor::Format::Synthetic)
    d.class_count = j.at("class_count").get<int>();
  if (!(d.test_fraction > 0.0 && d.test_fraction < 1.0))
    throw ConfigError("dataset.test_fraction must lie in (0, 1)");
  return d;
}

void check_class_count(const DatasetDescriptor& d, const Dataset& ds) {
  if (d.class_count && *d.class_count != ds.class_count())
    throw ConfigError("dataset declares " + std::to_string(*d.class_count) + " classes but " +
                      std::to_string(ds.class_count()) + " were found in " + ds.name());
}

ExperimentData split_off_test(const Dataset& all, const DatasetDescriptor& d) {
  auto [test_ids, pool_ids] = data::stratified_split(all, d.test_fraction, d.split_seed);
  return {all.subset(pool_ids, all.name() + "/pool"), all.subset(test_ids, all.name() + "/test")};
}

}  // namespace

RunConfigFile parse_run_config(const nlohmann::json& j, const std::filesystem::path& base_dir) {
  try {
    reject_unknown_keys(j, {"schema_version", "name", "dataset", "strategy", "classifier",
                            "experiment", "crosstrain"},
                        "config");
    if (!j.contains("schema_version")) throw ConfigError("config lacks schema_version");
    const int version = j.at("schema_version").get<int>();
    if (version != kSchemaVersion)
      throw ConfigError("unsupported schema_version " + std::to_string(version) + " (expected " +
                        std::to_string(kSchemaVersion) + ")");

    RunConfigFile file;
    file.name = j.value("name", file.name);
    file.dataset = parse_dataset(j.at("dataset"), base_dir);

    auto& ex = file.experiment;
    if (j.contains("strategy")) {
      const auto& s = j.at("strategy");
      reject_unknown_keys(s, {"name", "range", "similarity_threshold", "balance_epsilon"}, "strategy");
      ex.strategy = strategy_from_string(s.at("name").get<std::string>());
      if (s.contains("range")) {
        const auto range = s.at("range").get<std::vector<double>>();
        if (range.size() != 2) throw ConfigError("strategy.range must be [lo, hi]");
        ex.strategy_params.range_lo = range[0];
        ex.strategy_params.range_hi = range[1];
      }
      ex.strategy_params.similarity_threshold =
          s.value("similarity_threshold", ex.strategy_params.similarity_threshold);
      ex.strategy_params.balance_epsilon = s.value("balance_epsilon", ex.strategy_params.balance_epsilon);
    }

    if (j.contains("classifier")) {
      auto c = j.at("classifier");
      if (c.contains("head")) {
        const auto head = c.at("head").get<std::string>();
        if (head != "flat" && head != "hierarchical")
          throw ConfigError("classifier.head must be 'flat' or 'hierarchical'");
        file.hierarchical_head = head == "hierarchical";
        c.erase("head");
      }
      ex.classifier = spec_from_json(c, FlatHead{});
    }

    if (j.contains("experiment")) {
      const auto& e = j.at("experiment");
      reject_unknown_keys(e, {"initial_per_class", "growth_fraction", "stop_fraction_of_pool",
                              "repetitions", "label_noise_rate", "master_seed"},
                          "experiment");
      ex.initial_per_class = e.value("initial_per_class", ex.initial_per_class);
      ex.growth_fraction = e.value("growth_fraction", ex.growth_fraction);
      ex.stop_fraction_of_pool = e.value("stop_fraction_of_pool", ex.stop_fraction_of_pool);
      ex.repetitions = e.value("repetitions", ex.repetitions);
      ex.label_noise_rate = e.value("label_noise_rate", ex.label_noise_rate);
      ex.master_seed = e.value("master_seed", ex.master_seed);
    }

    if (j.contains("crosstrain")) {
      const auto& c = j.at("crosstrain");
      reject_unknown_keys(c, {"capacities", "checkpoints", "selector_runs"}, "crosstrain");
      CrossTrainSection section;
      if (c.contains("capacities")) {
        section.capacities.clear();
        for (const auto& name : c.at("capacities"))
          section.capacities.push_back(capacity_from_string(name.get<std::string>()));
        if (section.capacities.empty()) throw ConfigError("crosstrain.capacities is empty");
      }
      if (c.contains("checkpoints")) section.checkpoints = c.at("checkpoints").get<std::vector<int>>();
      if (section.checkpoints.empty() ||
          !std::is_sorted(section.checkpoints.begin(), section.checkpoints.end()) ||
          section.checkpoints.front() < 0)
        throw ConfigError("crosstrain.checkpoints must be non-empty, non-negative and ascending");
      if (c.contains("selector_runs")) section.selector_runs = resolve_path(c, "selector_runs", base_dir);
      file.crosstrain = section;
    }
    return file;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("invalid config: ") + e.what());
  }
}

RunConfigFile load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config " + path.string());
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
  return parse_run_config(j, path.parent_path());
}

LoadedData load_experiment_data(const DatasetDescriptor& d) {
  LoadedData out;
  switch (d.format) {
    case DatasetDescriptor::Format::Idx: {
      auto pool = data::load_idx(d.train_images, d.train_labels, "idx/pool");
      auto test = data::load_idx(d.test_images, d.test_labels, "idx/test");
      check_class_count(d, pool);
      const int classes = std::max(pool.class_count(), test.class_count());
      // Re-wrap so both sides agree on the class count.
      auto rewrap = [classes](const Dataset& ds) {
        return Dataset(ds.name(), ds.feature_dim(), ds.features(), ds.labels(), classes);
      };
      out.data = {rewrap(pool), rewrap(test)};
      break;
    }
    case DatasetDescriptor::Format::Csv: {
      auto train = data::load_csv(d.train_path, d.label_column);
      check_class_count(d, train.dataset);
      if (d.test_path.empty()) {
        out.data = split_off_test(train.dataset, d);
      } else {
        auto test = data::load_csv(d.test_path, d.label_column, train.normalization,
                                   train.label_mapping);
        out.data = {std::move(train.dataset), std::move(test.dataset)};
      }
      out.label_mapping = train.label_mapping;
      break;
    }
    case DatasetDescriptor::Format::Synthetic: {
      const auto all = data::generate_synthetic(d.synthetic);
      out.data = split_off_test(all, d);
      break;
    }
  }
  return out;
}

ExperimentConfig resolve_experiment(const RunConfigFile& file, const ExperimentData& data) {
  ExperimentConfig ex = file.experiment;
  if (file.hierarchical_head) {
    if (!data.pool.tree())
      throw ConfigError("hierarchical head requested but the dataset has no label hierarchy");
    ex.classifier.head = HierarchicalHead{*data.pool.tree()};
  } else {
    ex.classifier.head = FlatHead{data.pool.class_count()};
  }
  return ex;
}

nlohmann::json to_json(const RunConfigFile& file) {
  const auto& d = file.dataset;
  nlohmann::json ds{{"format", format_name(d.format)}};
  switch (d.format) {
    case DatasetDescriptor::Format::Idx:
      ds["train_images"] = d.train_images.string();
      ds["train_labels"] = d.train_labels.string();
      ds["test_images"] = d.test_images.string();
      ds["test_labels"] = d.test_labels.string();
      break;
    case DatasetDescriptor::Format::Csv:
      ds["train_path"] = d.train_path.string();
      if (!d.test_path.empty()) ds["test_path"] = d.test_path.string();
      ds["label_column"] = d.label_column;
      ds["test_fraction"] = d.test_fraction;
      ds["split_seed"] = d.split_seed;
      break;
    case DatasetDescriptor::Format::Synthetic: {
      const auto& s = d.synthetic;
      ds["class_count"] = s.class_count;
      ds["clusters_per_class"] = s.clusters_per_class;
      ds["samples_per_cluster"] = s.samples_per_cluster;
      ds["feature_dim"] = s.feature_dim;
      ds["cluster_std"] = s.cluster_std;
      ds["class_separation"] = s.class_separation;
      ds["seed"] = s.seed;
      if (!s.hierarchy.empty()) ds["hierarchy"] = s.hierarchy;
      ds["test_fraction"] = d.test_fraction;
      ds["split_seed"] = d.split_seed;
      break;
    }
  }
  if (d.class_count) ds["class_count"] = *d.class_count;

  const auto& ex = file.experiment;
  nlohmann::json strategy{{"name", to_string(ex.strategy)},
                          {"range", {ex.strategy_params.range_lo, ex.strategy_params.range_hi}},
                          {"similarity_threshold", ex.strategy_params.similarity_threshold},
                          {"balance_epsilon", ex.strategy_params.balance_epsilon}};
  auto classifier = spec_to_json(ex.classifier);
  classifier["head"] = file.hierarchical_head ? "hierarchical" : "flat";
  nlohmann::json experiment{{"initial_per_class", ex.initial_per_class},
                            {"growth_fraction", ex.growth_fraction},
                            {"stop_fraction_of_pool", ex.stop_fraction_of_pool},
                            {"repetitions", ex.repetitions},
                            {"label_noise_rate", ex.label_noise_rate},
                            {"master_seed", ex.master_seed}};
  nlohmann::json j{{"schema_version", kSchemaVersion},
                   {"name", file.name},
                   {"dataset", ds},
                   {"strategy", strategy},
                   {"classifier", classifier},
                   {"experiment", experiment}};
  if (file.crosstrain) {
    std::vector<std::string> caps;
    for (auto c : file.crosstrain->capacities) caps.emplace_back(to_string(c));
    j["crosstrain"] = {{"capacities", caps}, {"checkpoints", file.crosstrain->checkpoints}};
    if (file.crosstrain->selector_runs)
      j["crosstrain"]["selector_runs"] = file.crosstrain->selector_runs->string();
  }
  return j;
}

}  // namespace al::cli
