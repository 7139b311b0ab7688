#include "al/core.hpp"

#include <algorithm>
#include <numeric>

#include "al/error.hpp"

namespace al {

// ---------------------------------------------------------------------------
// LabelTree

LabelTree::LabelTree(std::vector<LabelNode> nodes) : nodes_(std::move(nodes)) {
  if (nodes_.empty()) throw InputError("label tree has no nodes");
  const int n = static_cast<int>(nodes_.size());
  children_.assign(nodes_.size() + 1, {});
  for (int i = 0; i < n; ++i) {
    const auto& node = nodes_[static_cast<std::size_t>(i)];
    if (node.level < 0) throw InputError("label tree node '" + node.name + "' has negative level");
    levels_ = std::max(levels_, node.level + 1);
    if (node.level == 0) {
      if (node.parent != -1)
        throw InputError("level-0 node '" + node.name + "' must not have a parent");
      children_[0].push_back(i);
      continue;
    }
    if (node.parent < 0 || node.parent >= n)
      throw InputError("node '" + node.name + "' has a broken parent link");
    if (nodes_[static_cast<std::size_t>(node.parent)].level != node.level - 1)
      throw InputError("node '" + node.name + "' has a parent outside the previous level");
    children_[static_cast<std::size_t>(node.parent) + 1].push_back(i);
  }
  if (children_[0].empty()) throw InputError("label tree has no level-0 nodes");
  for (int i = 0; i < n; ++i) {
    if (children_[static_cast<std::size_t>(i) + 1].empty()) leaves_.push_back(i);
  }
}

LabelTree LabelTree::uniform(std::span<const int> branching) {
  if (branching.empty()) throw InputError("uniform tree needs at least one level");
  std::vector<LabelNode> nodes;
  std::vector<int> frontier{-1};
  for (std::size_t level = 0; level < branching.size(); ++level) {
    if (branching[level] < 1) throw InputError("tree branching factors must be positive");
    std::vector<int> next;
    for (int parent : frontier) {
      for (int c = 0; c < branching[level]; ++c) {
        std::string name = parent < 0 ? std::to_string(c)
                                      : nodes[static_cast<std::size_t>(parent)].name + "." +
                                            std::to_string(c);
        nodes.push_back({std::move(name), static_cast<int>(level), parent});
        next.push_back(static_cast<int>(nodes.size()) - 1);
      }
    }
    frontier = std::move(next);
  }
  return LabelTree(std::move(nodes));
}

LabelTree LabelTree::flat(std::span<const std::string> class_names) {
  std::vector<LabelNode> nodes;
  for (const auto& name : class_names) nodes.push_back({name, 0, -1});
  return LabelTree(std::move(nodes));
}

const std::vector<int>& LabelTree::children(int parent) const {
  return children_.at(static_cast<std::size_t>(parent + 1));
}

std::vector<int> LabelTree::path_to(int leaf) const {
  std::vector<int> path;
  for (int cur = leaf; cur >= 0; cur = node(cur).parent) path.push_back(cur);
  std::reverse(path.begin(), path.end());
  return path;
}

bool LabelTree::operator==(const LabelTree& other) const {
  if (nodes_.size() != other.nodes_.size()) return false;
  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    const auto& a = nodes_[i];
    const auto& b = other.nodes_[i];
    if (a.name != b.name || a.level != b.level || a.parent != b.parent) return false;
  }
  return true;
}

HierLabel derive_hier_label(const LabelTree& tree, std::span<const int> leaf_path) {
  if (leaf_path.empty()) throw InputError("label path is empty");
  HierLabel label{std::vector<NodeState>(tree.node_count(), NodeState::NA)};
  int parent = -1;
  for (int node : leaf_path) {
    if (node < 0 || node >= static_cast<int>(tree.node_count()))
      throw InputError("label path references unknown node " + std::to_string(node));
    if (tree.node(node).parent != parent)
      throw InputError("label path is broken at node '" + tree.node(node).name + "'");
    for (int sibling : tree.children(parent)) label.states[static_cast<std::size_t>(sibling)] = NodeState::Neg;
    label.states[static_cast<std::size_t>(node)] = NodeState::Pos;
    parent = node;
  }
  if (!tree.children(parent).empty())
    throw InputError("label path ends at inner node '" + tree.node(parent).name + "'");
  return label;
}

// ---------------------------------------------------------------------------
// Dataset

Dataset::Dataset(std::string name, std::size_t feature_dim, std::vector<float> features,
                 std::vector<int> labels, int class_count, std::optional<LabelTree> tree,
                 std::vector<std::string> class_names)
    : name_(std::move(name)),
      feature_dim_(feature_dim),
      features_(std::move(features)),
      labels_(std::move(labels)),
      class_count_(class_count),
      tree_(std::move(tree)),
      class_names_(std::move(class_names)) {
  if (class_count_ <= 0) throw InputError("dataset '" + name_ + "' needs a positive class count");
  if (feature_dim_ == 0) throw InputError("dataset '" + name_ + "' has zero feature dimension");
  if (features_.size() != labels_.size() * feature_dim_)
    throw InputError("dataset '" + name_ + "': feature storage does not match " +
                     std::to_string(labels_.size()) + " rows of dimension " +
                     std::to_string(feature_dim_));
  for (std::size_t i = 0; i < labels_.size(); ++i) {
    if (labels_[i] < 0 || labels_[i] >= class_count_)
      throw InputError("dataset '" + name_ + "': label " + std::to_string(labels_[i]) +
                       " of sample " + std::to_string(i) + " outside [0, " +
                       std::to_string(class_count_) + ")");
  }
  if (tree_ && static_cast<int>(tree_->leaves().size()) != class_count_)
    throw InputError("dataset '" + name_ + "': label tree has " +
                     std::to_string(tree_->leaves().size()) + " leaves but " +
                     std::to_string(class_count_) + " classes");
}

std::span<const float> Dataset::row(SampleId id) const {
  if (id.value >= labels_.size())
    throw InputError("sample id " + std::to_string(id.value) + " outside dataset '" + name_ + "'");
  return {features_.data() + static_cast<std::size_t>(id.value) * feature_dim_, feature_dim_};
}

std::vector<std::size_t> Dataset::class_histogram() const {
  std::vector<std::size_t> hist(static_cast<std::size_t>(class_count_), 0);
  for (int y : labels_) ++hist[static_cast<std::size_t>(y)];
  return hist;
}

Dataset Dataset::subset(std::span<const SampleId> ids, std::string name) const {
  std::vector<float> feats;
  feats.reserve(ids.size() * feature_dim_);
  std::vector<int> labels;
  labels.reserve(ids.size());
  for (SampleId id : ids) {
    auto r = row(id);
    feats.insert(feats.end(), r.begin(), r.end());
    labels.push_back(labels_[id.value]);
  }
  return Dataset(name.empty() ? name_ : std::move(name), feature_dim_, std::move(feats),
                 std::move(labels), class_count_, tree_, class_names_);
}

std::vector<SampleId> all_ids(std::size_t n) {
  std::vector<SampleId> ids(n);
  for (std::size_t i = 0; i < n; ++i) ids[i] = make_id(i);
  return ids;
}

// ---------------------------------------------------------------------------
// Pool

Pool::Pool(std::size_t dataset_size, std::span<const SampleId> labelled)
    : in_labelled_(dataset_size, 0) {
  for (SampleId id : labelled) {
    if (id.value >= dataset_size)
      throw InputError("labelled id " + std::to_string(id.value) + " outside pool");
    if (in_labelled_[id.value]) throw InputError("duplicate labelled id " + std::to_string(id.value));
    in_labelled_[id.value] = 1;
    labelled_.push_back(id);
  }
  unlabelled_.reserve(dataset_size - labelled_.size());
  for (std::size_t i = 0; i < dataset_size; ++i)
    if (!in_labelled_[i]) unlabelled_.push_back(make_id(i));
}

void Pool::annotate(std::span<const SampleId> ids) {
  for (SampleId id : ids) {
    if (id.value >= in_labelled_.size())
      throw InputError("annotated id " + std::to_string(id.value) + " outside pool");
    if (in_labelled_[id.value])
      throw InputError("sample " + std::to_string(id.value) + " is already labelled");
    in_labelled_[id.value] = 1;
    labelled_.push_back(id);
  }
  std::erase_if(unlabelled_, [&](SampleId id) { return in_labelled_[id.value] != 0; });
}

// ---------------------------------------------------------------------------
// ConfusionMatrix

ConfusionMatrix::ConfusionMatrix(int class_count)
    : classes_(class_count),
      counts_(static_cast<std::size_t>(class_count) * static_cast<std::size_t>(class_count), 0) {
  if (class_count <= 0) throw InputError("confusion matrix needs a positive class count");
}

std::uint64_t ConfusionMatrix::at(int truth, int predicted) const {
  if (truth < 0 || truth >= classes_ || predicted < 0 || predicted >= classes_)
    throw InputError("confusion matrix index out of range");
  return counts_[static_cast<std::size_t>(truth * classes_ + predicted)];
}

void ConfusionMatrix::add(int truth, int predicted) {
  if (truth < 0 || truth >= classes_ || predicted < 0 || predicted >= classes_)
    throw InputError("class pair (" + std::to_string(truth) + ", " + std::to_string(predicted) +
                     ") outside class count " + std::to_string(classes_));
  ++counts_[static_cast<std::size_t>(truth * classes_ + predicted)];
}

std::uint64_t ConfusionMatrix::row_sum(int truth) const {
  std::uint64_t s = 0;
  for (int p = 0; p < classes_; ++p) s += at(truth, p);
  return s;
}

std::uint64_t ConfusionMatrix::total() const {
  return std::accumulate(counts_.begin(), counts_.end(), std::uint64_t{0});
}

std::uint64_t ConfusionMatrix::trace() const {
  std::uint64_t s = 0;
  for (int c = 0; c < classes_; ++c) s += at(c, c);
  return s;
}

std::optional<double> ConfusionMatrix::recall(int cls) const {
  const auto rows = row_sum(cls);
  if (rows == 0) return std::nullopt;
  return static_cast<double>(at(cls, cls)) / static_cast<double>(rows);
}

ConfusionMatrix build_confusion_matrix(std::span<const std::pair<int, int>> predictions,
                                       int class_count) {
  ConfusionMatrix cm(class_count);
  for (auto [truth, predicted] : predictions) cm.add(truth, predicted);
  return cm;
}

}  // namespace al
