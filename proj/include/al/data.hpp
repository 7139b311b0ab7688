#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "al/core.hpp"

namespace al::data {

/// Min-max scaling captured from a training file so a paired test file lands
/// in the same coordinates.
struct Normalization {
  std::vector<double> min;
  std::vector<double> max;
};

struct CsvDataset {
  Dataset dataset;
  Normalization normalization;
  /// Raw label text for class i; first-appearance order.
  std::vector<std::string> label_mapping;
};

/// Reads an IDX image/label pair (MNIST layout). Paths ending in ".gz" are
/// decompressed transparently. Pixels are scaled by 1/255.
/// Throws ParseError naming the byte offset on malformed input.
Dataset load_idx(const std::filesystem::path& images_path,
                 const std::filesystem::path& labels_path, std::string name = "idx");

/// Reads a comma-delimited table with a header row. Non-label columns are
/// features in header order; labels map to 0..C-1 by first appearance unless
/// `known_labels` is given (then unseen labels are a ParseError). Features are
/// min-max scaled with `normalization` when supplied, else with the file's own
/// range; values are clamped to [0, 1].
CsvDataset load_csv(const std::filesystem::path& path, const std::string& label_column,
                    const std::optional<Normalization>& normalization = std::nullopt,
                    const std::vector<std::string>& known_labels = {});

/// Writes features with round-trip precision and the label names (or ids).
void export_csv(const Dataset& dataset, const std::filesystem::path& path,
                const std::string& label_column = "label");

struct SyntheticSpec {
  int class_count = 10;
  int clusters_per_class = 5;
  int samples_per_cluster = 200;
  int feature_dim = 10;
  double cluster_std = 1.0;
  /// Minimum distance between cluster centres of different classes.
  double class_separation = 6.0;
  std::uint64_t seed = 0;
  /// Optional label hierarchy; the product of the factors must equal
  /// class_count. Classes in one subtree share a region of feature space.
  std::vector<int> hierarchy;
};

/// Isotropic Gaussian clusters, min-max normalized. Deterministic per seed.
Dataset generate_synthetic(const SyntheticSpec& spec, std::string name = "synthetic");

/// Splits ids per class so part_a holds about `fraction` of every class
/// (at least one, at most all but one). Throws InputError for a class with a
/// single sample.
std::pair<std::vector<SampleId>, std::vector<SampleId>> stratified_split(
    std::span<const int> labels, std::span<const SampleId> ids, int class_count, double fraction,
    std::uint64_t seed);

/// Convenience overload over a whole dataset.
std::pair<std::vector<SampleId>, std::vector<SampleId>> stratified_split(const Dataset& dataset,
                                                                         double fraction,
                                                                         std::uint64_t seed);

/// Exactly `per_class` ids from every class, chosen uniformly. Sorted ascending.
std::vector<SampleId> initial_seed_set(const Dataset& dataset, int per_class, std::uint64_t seed);

}  // namespace al::data
