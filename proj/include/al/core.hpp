#pragma once

#include <compare>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace al {

/// Index of a sample inside its Dataset. Ids are dense, stable for the whole
/// run, and their ascending order is the global tie-break key.
struct SampleId {
  std::uint32_t value = 0;

  constexpr auto operator<=>(const SampleId&) const = default;
};

inline constexpr SampleId make_id(std::size_t index) {
  return SampleId{static_cast<std::uint32_t>(index)};
}

/// Per-class model output. Post-softmax for flat classifiers; raw per-node
/// sigmoid activations for hierarchical ones (no sum-to-one guarantee there).
using ProbabilityVector = std::vector<double>;

/// Penultimate-layer activation vector.
using Embedding = std::vector<double>;

struct QueryBatch {
  std::vector<SampleId> ids;
  std::vector<double> scores;

  std::size_t size() const { return ids.size(); }
  bool empty() const { return ids.empty(); }
};

// ---------------------------------------------------------------------------
// Label hierarchy

enum class NodeState : std::uint8_t { Pos, Neg, NA };

struct LabelNode {
  std::string name;
  int level = 0;
  int parent = -1;  // -1 on level 0
};

/// Class hierarchy where every sample selects one node per level down to a
/// leaf. Leaves may sit at different depths.
/// Node indices double as the output-neuron index of a hierarchical head.
class LabelTree {
 public:
  LabelTree() = default;

  /// Builds a tree from nodes listed in any order. Throws InputError when a
  /// parent is missing or sits on the wrong level.
  explicit LabelTree(std::vector<LabelNode> nodes);

  /// Uniform tree: branching[0] roots, each node on level k has branching[k+1]
  /// children. Names are dotted paths ("0", "0.1", ...).
  static LabelTree uniform(std::span<const int> branching);

  /// A single level with one node per class name.
  static LabelTree flat(std::span<const std::string> class_names);

  std::size_t node_count() const { return nodes_.size(); }
  int level_count() const { return levels_; }
  const LabelNode& node(int index) const { return nodes_.at(static_cast<std::size_t>(index)); }
  const std::vector<LabelNode>& nodes() const { return nodes_; }

  /// Children of `parent` in ascending index order; parent -1 yields the roots.
  const std::vector<int>& children(int parent) const;

  /// Childless nodes, ascending. Class i corresponds to leaves()[i].
  const std::vector<int>& leaves() const { return leaves_; }

  /// Root-to-leaf chain for a leaf node.
  std::vector<int> path_to(int leaf) const;

  bool operator==(const LabelTree& other) const;

 private:
  std::vector<LabelNode> nodes_;
  std::vector<std::vector<int>> children_;  // index 0 holds the roots
  std::vector<int> leaves_;
  int levels_ = 0;
};

struct HierLabel {
  std::vector<NodeState> states;
};

/// Path nodes are Pos, their siblings (same parent) Neg, everything else NA.
/// Throws InputError if `leaf_path` is not a root-to-leaf chain.
HierLabel derive_hier_label(const LabelTree& tree, std::span<const int> leaf_path);

// ---------------------------------------------------------------------------
// Dataset

/// Immutable feature matrix plus labels. Features are row-major 32-bit reals
/// normalized to [0, 1]. When a tree is attached, label i names tree.leaves()[i].
class Dataset {
 public:
  Dataset() = default;
  Dataset(std::string name, std::size_t feature_dim, std::vector<float> features,
          std::vector<int> labels, int class_count,
          std::optional<LabelTree> tree = std::nullopt,
          std::vector<std::string> class_names = {});

  const std::string& name() const { return name_; }
  std::size_t size() const { return labels_.size(); }
  std::size_t feature_dim() const { return feature_dim_; }
  int class_count() const { return class_count_; }
  const std::vector<int>& labels() const { return labels_; }
  int label(SampleId id) const { return labels_.at(id.value); }
  const std::vector<float>& features() const { return features_; }
  std::span<const float> row(SampleId id) const;
  const std::optional<LabelTree>& tree() const { return tree_; }
  const std::vector<std::string>& class_names() const { return class_names_; }

  /// Per-class sample counts.
  std::vector<std::size_t> class_histogram() const;

  /// New dataset holding the given rows, renumbered densely in the given order.
  Dataset subset(std::span<const SampleId> ids, std::string name = {}) const;

 private:
  std::string name_;
  std::size_t feature_dim_ = 0;
  std::vector<float> features_;
  std::vector<int> labels_;
  int class_count_ = 0;
  std::optional<LabelTree> tree_;
  std::vector<std::string> class_names_;
};

/// Ids 0..n-1.
std::vector<SampleId> all_ids(std::size_t n);

// ---------------------------------------------------------------------------
// Pool

/// Partition of a dataset's ids into labelled and unlabelled sets.
class Pool {
 public:
  Pool(std::size_t dataset_size, std::span<const SampleId> labelled);

  const std::vector<SampleId>& labelled() const { return labelled_; }
  /// Ascending ids.
  const std::vector<SampleId>& unlabelled() const { return unlabelled_; }
  bool is_labelled(SampleId id) const { return in_labelled_.at(id.value) != 0; }
  std::size_t total() const { return in_labelled_.size(); }

  /// Moves ids from unlabelled to labelled (appended in the given order).
  /// Throws InputError on unknown, duplicate, or already-labelled ids.
  void annotate(std::span<const SampleId> ids);

 private:
  std::vector<std::uint8_t> in_labelled_;
  std::vector<SampleId> labelled_;
  std::vector<SampleId> unlabelled_;
};

// ---------------------------------------------------------------------------
// ConfusionMatrix

/// Rows are true classes, columns predicted classes.
class ConfusionMatrix {
 public:
  ConfusionMatrix() = default;
  explicit ConfusionMatrix(int class_count);

  int class_count() const { return classes_; }
  std::uint64_t at(int truth, int predicted) const;
  void add(int truth, int predicted);

  std::uint64_t row_sum(int truth) const;
  std::uint64_t total() const;
  std::uint64_t trace() const;
  /// counts[i][i] / rowsum_i, or nullopt for an empty row.
  std::optional<double> recall(int cls) const;

  const std::vector<std::uint64_t>& counts() const { return counts_; }
  bool operator==(const ConfusionMatrix&) const = default;

 private:
  int classes_ = 0;
  std::vector<std::uint64_t> counts_;
};

ConfusionMatrix build_confusion_matrix(std::span<const std::pair<int, int>> predictions,
                                       int class_count);

}  // namespace al

template <>
struct std::hash<al::SampleId> {
  std::size_t operator()(const al::SampleId& id) const noexcept {
    return std::hash<std::uint32_t>{}(id.value);
  }
};
