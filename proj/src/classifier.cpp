#include "al/classifier.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>
#include <random>

#include "al/error.hpp"
#include "al/random.hpp"
#include "al/serialization.hpp"

namespace al {
namespace {

static_assert(std::endian::native == std::endian::little,
              "checkpoint layout assumes a little-endian host");

constexpr char kMagic[8] = {'A', 'L', 'M', 'O', 'D', 'E', 'L', '\0'};
constexpr std::uint32_t kCheckpointVersion = 1;

Eigen::MatrixXd gather(const Dataset& dataset, std::span<const SampleId> ids) {
  Eigen::MatrixXd x(static_cast<Eigen::Index>(dataset.feature_dim()),
                    static_cast<Eigen::Index>(ids.size()));
  for (std::size_t c = 0; c < ids.size(); ++c) {
    const auto row = dataset.row(ids[c]);
    for (std::size_t r = 0; r < row.size(); ++r)
      x(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = row[r];
  }
  return x;
}

Eigen::VectorXd as_column(std::span<const float> features) {
  Eigen::VectorXd v(static_cast<Eigen::Index>(features.size()));
  for (std::size_t i = 0; i < features.size(); ++i) v(static_cast<Eigen::Index>(i)) = features[i];
  return v;
}

// Per-leaf target and mask columns for the hierarchical head.
struct NodeTargets {
  Eigen::MatrixXd target;  // nodes x leaves
  Eigen::MatrixXd mask;
};

NodeTargets node_targets(const LabelTree& tree) {
  const auto nodes = static_cast<Eigen::Index>(tree.node_count());
  const auto leaves = static_cast<Eigen::Index>(tree.leaves().size());
  NodeTargets t{Eigen::MatrixXd::Zero(nodes, leaves), Eigen::MatrixXd::Zero(nodes, leaves)};
  for (Eigen::Index leaf = 0; leaf < leaves; ++leaf) {
    const auto label = derive_hier_label(tree, tree.path_to(tree.leaves()[static_cast<std::size_t>(leaf)]));
    for (Eigen::Index n = 0; n < nodes; ++n) {
      const auto s = label.states[static_cast<std::size_t>(n)];
      t.target(n, leaf) = s == NodeState::Pos ? 1.0 : 0.0;
      t.mask(n, leaf) = s == NodeState::NA ? 0.0 : 1.0;
    }
  }
  return t;
}

nn::Targets batch_targets(const ClassifierSpec& spec, const NodeTargets* nodes,
                          std::span<const SampleId> ids, std::span<const int> labels) {
  nn::Targets t;
  if (!spec.hierarchical()) {
    t.classes.reserve(ids.size());
    for (SampleId id : ids) t.classes.push_back(labels[id.value]);
    return t;
  }
  const auto rows = nodes->target.rows();
  t.node_target.resize(rows, static_cast<Eigen::Index>(ids.size()));
  t.node_mask.resize(rows, static_cast<Eigen::Index>(ids.size()));
  for (std::size_t c = 0; c < ids.size(); ++c) {
    const auto leaf = labels[ids[c].value];
    t.node_target.col(static_cast<Eigen::Index>(c)) = nodes->target.col(leaf);
    t.node_mask.col(static_cast<Eigen::Index>(c)) = nodes->mask.col(leaf);
  }
  return t;
}

int argmax(const Eigen::VectorXd& v) {
  Eigen::Index best = 0;
  for (Eigen::Index i = 1; i < v.size(); ++i)
    if (v(i) > v(best)) best = i;
  return static_cast<int>(best);
}

std::vector<int> leaf_ordinals(const LabelTree& tree) {
  std::vector<int> ordinal(tree.node_count(), -1);
  for (std::size_t i = 0; i < tree.leaves().size(); ++i)
    ordinal[static_cast<std::size_t>(tree.leaves()[i])] = static_cast<int>(i);
  return ordinal;
}

// Predicted class per column: argmax for flat, decoded leaf ordinal for trees.
std::vector<int> predicted_classes(const ClassifierSpec& spec, const Eigen::MatrixXd& outputs) {
  std::vector<int> pred(static_cast<std::size_t>(outputs.cols()));
  if (!spec.hierarchical()) {
    for (Eigen::Index c = 0; c < outputs.cols(); ++c) pred[static_cast<std::size_t>(c)] = argmax(outputs.col(c));
    return pred;
  }
  const auto& tree = std::get<HierarchicalHead>(spec.head).tree;
  const auto ordinal = leaf_ordinals(tree);
  std::vector<double> col(static_cast<std::size_t>(outputs.rows()));
  for (Eigen::Index c = 0; c < outputs.cols(); ++c) {
    for (Eigen::Index r = 0; r < outputs.rows(); ++r) col[static_cast<std::size_t>(r)] = outputs(r, c);
    const auto path = decode_path(tree, col);
    pred[static_cast<std::size_t>(c)] = ordinal[static_cast<std::size_t>(path.back())];
  }
  return pred;
}

void check_head_matches(const Dataset& dataset, const ClassifierSpec& spec) {
  if (const auto* flat = std::get_if<FlatHead>(&spec.head)) {
    if (flat->class_count != dataset.class_count())
      throw InputError("classifier has " + std::to_string(flat->class_count) +
                       " classes, dataset has " + std::to_string(dataset.class_count()));
    return;
  }
  const auto& tree = std::get<HierarchicalHead>(spec.head).tree;
  if (static_cast<int>(tree.leaves().size()) != dataset.class_count())
    throw InputError("label tree leaves do not match the dataset's classes");
}

// Stratified dev hold-out; singleton classes stay entirely in training.
std::pair<std::vector<SampleId>, std::vector<SampleId>> dev_split(std::span<const SampleId> ids,
                                                                  std::span<const int> labels,
                                                                  int classes, double fraction,
                                                                  std::uint64_t seed) {
  std::vector<std::vector<SampleId>> by_class(static_cast<std::size_t>(classes));
  for (SampleId id : ids) by_class[static_cast<std::size_t>(labels[id.value])].push_back(id);
  std::mt19937_64 rng(seed);
  std::vector<SampleId> dev;
  std::vector<SampleId> fit;
  for (auto& members : by_class) {
    std::sort(members.begin(), members.end());
    if (members.size() < 2) {
      fit.insert(fit.end(), members.begin(), members.end());
      continue;
    }
    std::shuffle(members.begin(), members.end(), rng);
    const auto n = static_cast<long>(members.size());
    const long take = std::clamp(std::lround(fraction * static_cast<double>(n)), 1L, n - 1);
    dev.insert(dev.end(), members.begin(), members.begin() + take);
    fit.insert(fit.end(), members.begin() + take, members.end());
  }
  std::sort(dev.begin(), dev.end());
  std::sort(fit.begin(), fit.end());
  return {std::move(fit), std::move(dev)};
}

template <typename T>
void write_pod(std::ostream& out, const T& value) {
  out.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

template <typename T>
T read_pod(std::istream& in, const std::filesystem::path& path) {
  T value{};
  in.read(reinterpret_cast<char*>(&value), sizeof(T));
  if (!in) throw ParseError(path.string() + ": truncated checkpoint at byte offset " +
                            std::to_string(static_cast<long long>(in.tellg())));
  return value;
}

}  // namespace

// ---------------------------------------------------------------------------

std::vector<int> capacity_layers(Capacity capacity) {
  switch (capacity) {
    case Capacity::Min: return {32};
    case Capacity::Med: return {128, 64};
    case Capacity::Max: return {256, 128, 64};
  }
  return {};
}

std::string_view to_string(Capacity capacity) {
  switch (capacity) {
    case Capacity::Min: return "min";
    case Capacity::Med: return "med";
    case Capacity::Max: return "max";
  }
  return "unknown";
}

Capacity capacity_from_string(std::string_view name) {
  if (name == "min") return Capacity::Min;
  if (name == "med") return Capacity::Med;
  if (name == "max") return Capacity::Max;
  throw ConfigError("unknown capacity '" + std::string(name) + "' (expected min, med or max)");
}

ClassifierSpec with_capacity(ClassifierSpec base, Capacity capacity) {
  base.hidden_layers = capacity_layers(capacity);
  return base;
}

void ClassifierSpec::validate() const {
  for (int w : hidden_layers)
    if (w <= 0) throw ConfigError("hidden layer widths must be positive");
  if (!(dropout_rate >= 0.0 && dropout_rate < 1.0)) throw ConfigError("dropout must lie in [0, 1)");
  if (!(learning_rate > 0.0) || !std::isfinite(learning_rate))
    throw ConfigError("learning rate must be positive");
  if (batch_size <= 0) throw ConfigError("batch size must be positive");
  if (max_epochs <= 0) throw ConfigError("max_epochs must be positive");
  if (early_stop_patience <= 0) throw ConfigError("early_stop_patience must be positive");
  if (!(dev_fraction > 0.0 && dev_fraction < 1.0)) throw ConfigError("dev_fraction must lie in (0, 1)");
  if (const auto* flat = std::get_if<FlatHead>(&head); flat && flat->class_count < 2)
    throw ConfigError("a flat head needs at least two classes");
}

std::size_t ClassifierSpec::output_dim() const {
  if (const auto* flat = std::get_if<FlatHead>(&head))
    return static_cast<std::size_t>(flat->class_count);
  return std::get<HierarchicalHead>(head).tree.node_count();
}

TrainedModel train(const Dataset& dataset, std::span<const SampleId> ids,
                   std::span<const int> labels, const ClassifierSpec& spec) {
  spec.validate();
  check_head_matches(dataset, spec);
  if (labels.size() != dataset.size())
    throw InputError("label vector must cover every dataset row");
  if (ids.size() < 10)
    throw TrainingError("training needs at least 10 labelled samples, got " +
                        std::to_string(ids.size()));

  auto [fit_ids, dev_ids] = dev_split(ids, labels, dataset.class_count(), spec.dev_fraction,
                                      derive_seed(spec.seed, {4}));
  std::vector<std::size_t> per_class(static_cast<std::size_t>(dataset.class_count()), 0);
  for (SampleId id : fit_ids) ++per_class[static_cast<std::size_t>(labels[id.value])];
  for (std::size_t c = 0; c < per_class.size(); ++c)
    if (per_class[c] == 0)
      throw TrainingError("class " + std::to_string(c) + " has no samples in the training portion");
  // Degenerate hold-out (every class a singleton): evaluate on the fit set.
  if (dev_ids.empty()) dev_ids = fit_ids;

  const auto head = spec.hierarchical() ? nn::HeadType::Sigmoid : nn::HeadType::Softmax;
  std::optional<NodeTargets> nodes;
  if (spec.hierarchical()) nodes = node_targets(std::get<HierarchicalHead>(spec.head).tree);

  TrainedModel model;
  model.spec = spec;
  model.network = nn::Network(dataset.feature_dim(), spec.hidden_layers, spec.output_dim(), head,
                              derive_seed(spec.seed, {1}));
  model.train_size = fit_ids.size();
  model.dev_size = dev_ids.size();

  const Eigen::MatrixXd x_fit = gather(dataset, fit_ids);
  const Eigen::MatrixXd x_dev = gather(dataset, dev_ids);
  std::vector<int> dev_labels;
  for (SampleId id : dev_ids) dev_labels.push_back(labels[id.value]);

  std::mt19937_64 order_rng(derive_seed(spec.seed, {2}));
  std::mt19937_64 dropout_rng(derive_seed(spec.seed, {3}));
  std::vector<std::size_t> order(fit_ids.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  const auto batch = static_cast<std::size_t>(spec.batch_size);

  auto best_layers = model.network.layers();
  double best_accuracy = -1.0;
  std::vector<nn::Layer> gradient;
  std::vector<SampleId> batch_ids;
  std::vector<Eigen::Index> batch_cols;
  for (int epoch = 1; epoch <= spec.max_epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), order_rng);
    bool diverged = false;
    for (std::size_t start = 0; start < order.size(); start += batch) {
      const std::size_t stop = std::min(order.size(), start + batch);
      batch_ids.clear();
      batch_cols.clear();
      for (std::size_t k = start; k < stop; ++k) {
        batch_ids.push_back(fit_ids[order[k]]);
        batch_cols.push_back(static_cast<Eigen::Index>(order[k]));
      }
      const Eigen::MatrixXd xb = x_fit(Eigen::all, batch_cols);
      const auto targets = batch_targets(spec, nodes ? &*nodes : nullptr, batch_ids, labels);
      const double loss =
          model.network.loss_and_gradient(xb, targets, gradient, spec.dropout_rate, &dropout_rng);
      if (!std::isfinite(loss)) {
        diverged = true;
        break;
      }
      model.network.sgd_step(gradient, spec.learning_rate);
    }
    model.epochs_run = epoch;
    if (diverged) break;

    const auto pred = predicted_classes(spec, model.network.forward(x_dev));
    std::size_t correct = 0;
    for (std::size_t i = 0; i < pred.size(); ++i) correct += pred[i] == dev_labels[i] ? 1 : 0;
    const double accuracy = static_cast<double>(correct) / static_cast<double>(pred.size());
    if (accuracy > best_accuracy) {
      best_accuracy = accuracy;
      best_layers = model.network.layers();
      model.best_epoch = epoch;
    } else if (epoch - model.best_epoch >= spec.early_stop_patience) {
      break;
    }
  }
  model.network.layers() = std::move(best_layers);
  model.dev_accuracy_best = std::max(best_accuracy, 0.0);
  return model;
}

TrainedModel train_hierarchical(const Dataset& dataset, std::span<const SampleId> ids,
                                std::span<const int> labels, const ClassifierSpec& spec) {
  const auto* head = std::get_if<HierarchicalHead>(&spec.head);
  if (head == nullptr) throw InputError("train_hierarchical needs a hierarchical head");
  if (!dataset.tree() || !(*dataset.tree() == head->tree))
    throw InputError("classifier label tree does not match the dataset's tree");
  return train(dataset, ids, labels, spec);
}

ProbabilityVector predict_proba(const TrainedModel& model, std::span<const float> features) {
  if (model.spec.hierarchical()) throw InputError("predict_proba needs a flat model");
  const Eigen::VectorXd out = model.network.forward(as_column(features));
  return {out.data(), out.data() + out.size()};
}

Embedding embed(const TrainedModel& model, std::span<const float> features) {
  if (features.size() != model.input_dim())
    throw InputError("input has " + std::to_string(features.size()) + " features, model expects " +
                     std::to_string(model.input_dim()));
  const Eigen::VectorXd e = model.network.embed(as_column(features));
  return {e.data(), e.data() + e.size()};
}

std::vector<int> decode_path(const LabelTree& tree, std::span<const double> activations) {
  std::vector<int> path;
  int parent = -1;
  for (;;) {
    const auto& kids = tree.children(parent);
    if (kids.empty()) break;
    int best = kids.front();
    for (int k : kids)
      if (activations[static_cast<std::size_t>(k)] > activations[static_cast<std::size_t>(best)]) best = k;
    path.push_back(best);
    parent = best;
  }
  return path;
}

HierPrediction predict_hier(const TrainedModel& model, std::span<const float> features) {
  const auto* head = std::get_if<HierarchicalHead>(&model.spec.head);
  if (head == nullptr) throw InputError("predict_hier needs a hierarchical model");
  const Eigen::VectorXd out = model.network.forward(as_column(features));
  HierPrediction p;
  p.activations.assign(out.data(), out.data() + out.size());
  p.decoded_path = decode_path(head->tree, p.activations);
  return p;
}

Inference infer(const TrainedModel& model, const Dataset& dataset, std::span<const SampleId> ids,
                bool with_embeddings) {
  if (dataset.feature_dim() != model.input_dim())
    throw InputError("dataset has " + std::to_string(dataset.feature_dim()) +
                     " features, model expects " + std::to_string(model.input_dim()));
  constexpr std::size_t kChunk = 2048;
  Inference out;
  out.outputs.reserve(ids.size());
  out.predicted_class.reserve(ids.size());
  if (with_embeddings) out.embeddings.emplace().reserve(ids.size() * model.embedding_dim());
  const auto& last = model.network.layers().back();
  for (std::size_t start = 0; start < ids.size(); start += kChunk) {
    const auto chunk = ids.subspan(start, std::min(kChunk, ids.size() - start));
    const Eigen::MatrixXd e = model.network.embed(gather(dataset, chunk));
    Eigen::MatrixXd z = last.weight * e;
    z.colwise() += last.bias;
    const Eigen::MatrixXd y = model.spec.hierarchical() ? nn::sigmoid(z) : nn::softmax_columns(z);
    for (Eigen::Index c = 0; c < y.cols(); ++c) {
      out.outputs.emplace_back(y.col(c).data(), y.col(c).data() + y.rows());
      if (with_embeddings)
        out.embeddings->insert(out.embeddings->end(), e.col(c).data(), e.col(c).data() + e.rows());
    }
    const auto pred = predicted_classes(model.spec, y);
    out.predicted_class.insert(out.predicted_class.end(), pred.begin(), pred.end());
  }
  return out;
}

Evaluation evaluate(const TrainedModel& model, const Dataset& dataset,
                    std::span<const SampleId> ids) {
  if (ids.empty()) throw InputError("cannot evaluate on an empty dataset");
  const auto inference = infer(model, dataset, ids, false);
  Evaluation ev{0.0, ConfusionMatrix(dataset.class_count())};
  for (std::size_t i = 0; i < ids.size(); ++i)
    ev.confusion.add(dataset.label(ids[i]), inference.predicted_class[i]);
  ev.accuracy = static_cast<double>(ev.confusion.trace()) / static_cast<double>(ev.confusion.total());
  return ev;
}

Evaluation evaluate(const TrainedModel& model, const Dataset& dataset) {
  const auto ids = all_ids(dataset.size());
  return evaluate(model, dataset, ids);
}

void save_model(const TrainedModel& model, const std::filesystem::path& path) {
  nlohmann::json meta{{"spec", spec_to_json(model.spec)},
                      {"input_dim", model.input_dim()},
                      {"dev_accuracy_best", model.dev_accuracy_best},
                      {"best_epoch", model.best_epoch},
                      {"epochs_run", model.epochs_run},
                      {"train_size", model.train_size},
                      {"dev_size", model.dev_size}};
  const auto text = meta.dump();
  const auto tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw ParseError("cannot write " + tmp);
    out.write(kMagic, sizeof(kMagic));
    write_pod(out, kCheckpointVersion);
    write_pod(out, static_cast<std::uint32_t>(text.size()));
    out.write(text.data(), static_cast<std::streamsize>(text.size()));
    for (const auto& layer : model.network.layers()) {
      write_pod(out, static_cast<std::uint32_t>(layer.weight.rows()));
      write_pod(out, static_cast<std::uint32_t>(layer.weight.cols()));
      out.write(reinterpret_cast<const char*>(layer.weight.data()),
                static_cast<std::streamsize>(layer.weight.size() * sizeof(double)));
      out.write(reinterpret_cast<const char*>(layer.bias.data()),
                static_cast<std::streamsize>(layer.bias.size() * sizeof(double)));
    }
    if (!out) throw ParseError("failed writing " + tmp);
  }
  std::filesystem::rename(tmp, path);
}

TrainedModel load_model(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot open " + path.string());
  char magic[8] = {};
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0)
    throw ParseError(path.string() + ": not a model checkpoint (bad magic at byte offset 0)");
  const auto version = read_pod<std::uint32_t>(in, path);
  if (version != kCheckpointVersion)
    throw ParseError(path.string() + ": unsupported checkpoint version " + std::to_string(version));
  const auto length = read_pod<std::uint32_t>(in, path);
  std::string text(length, '\0');
  in.read(text.data(), length);
  if (!in) throw ParseError(path.string() + ": truncated metadata");

  nlohmann::json meta;
  try {
    meta = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(path.string() + ": corrupt metadata: " + e.what());
  }
  TrainedModel model;
  model.spec = spec_from_json(meta.at("spec"), FlatHead{});
  model.dev_accuracy_best = meta.at("dev_accuracy_best").get<double>();
  model.best_epoch = meta.at("best_epoch").get<int>();
  model.epochs_run = meta.at("epochs_run").get<int>();
  model.train_size = meta.at("train_size").get<std::size_t>();
  model.dev_size = meta.at("dev_size").get<std::size_t>();
  const auto head = model.spec.hierarchical() ? nn::HeadType::Sigmoid : nn::HeadType::Softmax;
  model.network = nn::Network(meta.at("input_dim").get<std::size_t>(), model.spec.hidden_layers,
                              model.spec.output_dim(), head, 0);
  for (auto& layer : model.network.layers()) {
    const auto rows = read_pod<std::uint32_t>(in, path);
    const auto cols = read_pod<std::uint32_t>(in, path);
    if (rows != layer.weight.rows() || cols != layer.weight.cols())
      throw ParseError(path.string() + ": layer shape disagrees with the stored spec");
    in.read(reinterpret_cast<char*>(layer.weight.data()),
            static_cast<std::streamsize>(layer.weight.size() * sizeof(double)));
    in.read(reinterpret_cast<char*>(layer.bias.data()),
            static_cast<std::streamsize>(layer.bias.size() * sizeof(double)));
    if (!in) throw ParseError(path.string() + ": truncated weights");
  }
  return model;
}

}  // namespace al
