#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string_view>
#include <variant>
#include <vector>

#include "al/core.hpp"
#include "al/network.hpp"

namespace al {

struct FlatHead {
  int class_count = 2;
};

struct HierarchicalHead {
  LabelTree tree;
};

using Head = std::variant<FlatHead, HierarchicalHead>;

/// Preset network sizes of strictly increasing parameter count.
enum class Capacity { Min, Med, Max };

std::vector<int> capacity_layers(Capacity capacity);
std::string_view to_string(Capacity capacity);
Capacity capacity_from_string(std::string_view name);

struct ClassifierSpec {
  std::vector<int> hidden_layers{32};
  double dropout_rate = 0.0;
  double learning_rate = 0.05;
  int batch_size = 32;
  int max_epochs = 1000;
  int early_stop_patience = 200;
  Head head = FlatHead{};
  std::uint64_t seed = 0;
  /// Share of the labelled data held out per class for early stopping.
  double dev_fraction = 0.1;

  /// Throws ConfigError on out-of-range fields.
  void validate() const;
  bool hierarchical() const { return std::holds_alternative<HierarchicalHead>(head); }
  /// Number of output neurons (classes, or tree nodes).
  std::size_t output_dim() const;
};

/// Copy of `base` with the hidden layers of a capacity preset.
ClassifierSpec with_capacity(ClassifierSpec base, Capacity capacity);

struct TrainedModel {
  nn::Network network;
  ClassifierSpec spec;
  double dev_accuracy_best = 0.0;
  int best_epoch = 0;
  int epochs_run = 0;
  std::size_t train_size = 0;
  std::size_t dev_size = 0;

  std::size_t input_dim() const { return network.input_dim(); }
  std::size_t embedding_dim() const { return network.embedding_dim(); }
};

/// Trains from scratch on `ids` with per-sample `labels` (indexed by id,
/// normally dataset.labels() or a noisy copy of it). A stratified dev share
/// is held out; weights from the best dev-accuracy epoch are kept. Stops at
/// max_epochs or after early_stop_patience epochs without improvement.
/// Deterministic per spec.seed. Handles both head types.
TrainedModel train(const Dataset& dataset, std::span<const SampleId> ids,
                   std::span<const int> labels, const ClassifierSpec& spec);

/// train() with the hierarchical head; throws InputError if the spec's tree
/// differs from the dataset's.
TrainedModel train_hierarchical(const Dataset& dataset, std::span<const SampleId> ids,
                                std::span<const int> labels, const ClassifierSpec& spec);

/// Softmax output of a flat model.
ProbabilityVector predict_proba(const TrainedModel& model, std::span<const float> features);

Embedding embed(const TrainedModel& model, std::span<const float> features);

struct HierPrediction {
  std::vector<double> activations;  // one sigmoid per tree node, unnormalized
  std::vector<int> decoded_path;    // root-to-leaf nodes
};

/// From the roots down, the child of the previously decoded node with the largest
/// activation (ties to the lower node index).
HierPrediction predict_hier(const TrainedModel& model, std::span<const float> features);

std::vector<int> decode_path(const LabelTree& tree, std::span<const double> activations);

/// Batched inference over dataset rows.
struct Inference {
  std::vector<ProbabilityVector> outputs;  // softmax, or per-node sigmoids
  std::vector<int> predicted_class;        // argmax, or decoded leaf ordinal
  std::optional<std::vector<double>> embeddings;  // row-major, embedding_dim wide
};

Inference infer(const TrainedModel& model, const Dataset& dataset, std::span<const SampleId> ids,
                bool with_embeddings);

struct Evaluation {
  double accuracy = 0.0;
  ConfusionMatrix confusion;
};

/// Accuracy and confusion matrix over `ids`, against the dataset's own labels.
/// Hierarchical correctness means the full decoded path equals the label
/// path. Throws InputError on an empty id set.
Evaluation evaluate(const TrainedModel& model, const Dataset& dataset,
                    std::span<const SampleId> ids);
Evaluation evaluate(const TrainedModel& model, const Dataset& dataset);

/// Binary checkpoint: magic "ALMODEL\0", u32 version, u32 length + JSON
/// metadata (spec and training summary), then per layer u32 rows, u32 cols,
/// the weights column-major and the bias, as little-endian IEEE-754 doubles.
void save_model(const TrainedModel& model, const std::filesystem::path& path);
TrainedModel load_model(const std::filesystem::path& path);

}  // namespace al
