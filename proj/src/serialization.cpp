#include "al/serialization.hpp"

#include <algorithm>
#include <string>

#include "al/error.hpp"

namespace al {

void reject_unknown_keys(const nlohmann::json& j, std::initializer_list<std::string_view> allowed,
                         std::string_view context) {
  if (!j.is_object()) throw ConfigError(std::string(context) + " must be an object");
  for (const auto& [key, value] : j.items()) {
    if (std::find(allowed.begin(), allowed.end(), key) == allowed.end())
      throw ConfigError("unknown key '" + key + "' in " + std::string(context));
  }
}

nlohmann::json tree_to_json(const LabelTree& tree) {
  auto nodes = nlohmann::json::array();
  for (const auto& n : tree.nodes())
    nodes.push_back({{"name", n.name}, {"level", n.level}, {"parent", n.parent}});
  return {{"nodes", nodes}};
}

LabelTree tree_from_json(const nlohmann::json& j) {
  reject_unknown_keys(j, {"nodes"}, "tree");
  std::vector<LabelNode> nodes;
  for (const auto& n : j.at("nodes")) {
    reject_unknown_keys(n, {"name", "level", "parent"}, "tree node");
    nodes.push_back({n.at("name").get<std::string>(), n.at("level").get<int>(),
                     n.value("parent", -1)});
  }
  return LabelTree(std::move(nodes));
}

nlohmann::json spec_to_json(const ClassifierSpec& spec) {
  nlohmann::json head;
  if (const auto* flat = std::get_if<FlatHead>(&spec.head)) {
    head = {{"type", "flat"}, {"class_count", flat->class_count}};
  } else {
    head = {{"type", "hierarchical"},
            {"tree", tree_to_json(std::get<HierarchicalHead>(spec.head).tree)}};
  }
  return {{"hidden_layers", spec.hidden_layers},
          {"dropout", spec.dropout_rate},
          {"learning_rate", spec.learning_rate},
          {"batch_size", spec.batch_size},
          {"max_epochs", spec.max_epochs},
          {"early_stop_patience", spec.early_stop_patience},
          {"dev_fraction", spec.dev_fraction},
          {"seed", spec.seed},
          {"head", head}};
}

ClassifierSpec spec_from_json(const nlohmann::json& j, const Head& head) {
  reject_unknown_keys(j,
                      {"hidden_layers", "capacity", "dropout", "learning_rate", "batch_size",
                       "max_epochs", "early_stop_patience", "dev_fraction", "seed", "head"},
                      "classifier");
  ClassifierSpec spec;
  spec.head = head;
  try {
    if (j.contains("hidden_layers") && j.contains("capacity"))
      throw ConfigError("classifier: give either hidden_layers or capacity, not both");
    if (j.contains("hidden_layers")) spec.hidden_layers = j.at("hidden_layers").get<std::vector<int>>();
    if (j.contains("capacity"))
      spec.hidden_layers = capacity_layers(capacity_from_string(j.at("capacity").get<std::string>()));
    spec.dropout_rate = j.value("dropout", spec.dropout_rate);
    spec.learning_rate = j.value("learning_rate", spec.learning_rate);
    spec.batch_size = j.value("batch_size", spec.batch_size);
    spec.max_epochs = j.value("max_epochs", spec.max_epochs);
    spec.early_stop_patience = j.value("early_stop_patience", spec.early_stop_patience);
    spec.dev_fraction = j.value("dev_fraction", spec.dev_fraction);
    spec.seed = j.value("seed", spec.seed);
    if (j.contains("head")) {
      const auto& h = j.at("head");
      const auto type = h.at("type").get<std::string>();
      if (type == "flat") {
        reject_unknown_keys(h, {"type", "class_count"}, "classifier.head");
        spec.head = FlatHead{h.at("class_count").get<int>()};
      } else if (type == "hierarchical") {
        reject_unknown_keys(h, {"type", "tree"}, "classifier.head");
        spec.head = HierarchicalHead{tree_from_json(h.at("tree"))};
      } else {
        throw ConfigError("classifier.head.type must be 'flat' or 'hierarchical'");
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("classifier: ") + e.what());
  } catch (const InputError& e) {
    throw ConfigError(std::string("classifier: ") + e.what());
  }
  return spec;
}

nlohmann::json confusion_to_json(const ConfusionMatrix& cm) {
  auto rows = nlohmann::json::array();
  for (int t = 0; t < cm.class_count(); ++t) {
    auto row = nlohmann::json::array();
    for (int p = 0; p < cm.class_count(); ++p) row.push_back(cm.at(t, p));
    rows.push_back(std::move(row));
  }
  return rows;
}

ConfusionMatrix confusion_from_json(const nlohmann::json& j) {
  const int classes = static_cast<int>(j.size());
  ConfusionMatrix cm(classes);
  for (int t = 0; t < classes; ++t) {
    const auto& row = j.at(static_cast<std::size_t>(t));
    if (static_cast<int>(row.size()) != classes) throw ParseError("confusion matrix is not square");
    for (int p = 0; p < classes; ++p) {
      const auto count = row.at(static_cast<std::size_t>(p)).get<std::uint64_t>();
      for (std::uint64_t k = 0; k < count; ++k) cm.add(t, p);
    }
  }
  return cm;
}

}  // namespace al
