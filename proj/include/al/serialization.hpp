#pragma once

#include <json.hpp>

#include "al/classifier.hpp"
#include "al/core.hpp"

namespace al {

nlohmann::json tree_to_json(const LabelTree& tree);
LabelTree tree_from_json(const nlohmann::json& j);

nlohmann::json spec_to_json(const ClassifierSpec& spec);
/// Strict: unknown keys are a ConfigError. Missing keys keep their defaults,
/// except the head which must be supplied by `head` when absent.
ClassifierSpec spec_from_json(const nlohmann::json& j, const Head& head);

nlohmann::json confusion_to_json(const ConfusionMatrix& cm);
ConfusionMatrix confusion_from_json(const nlohmann::json& j);

/// Throws ConfigError naming the first key of `j` not in `allowed`.
void reject_unknown_keys(const nlohmann::json& j, std::initializer_list<std::string_view> allowed,
                         std::string_view context);

}  // namespace al
