#pragma once

#include <nlohmann/json.hpp>

#include "detdsci/dataset.hpp"

namespace detdsci::dataset {

[[nodiscard]] nlohmann::json image_to_json(const AnnotatedImage& image);
/// Throws ParseError naming the missing or mistyped field.
[[nodiscard]] AnnotatedImage image_from_json(const nlohmann::json& doc);

[[nodiscard]] nlohmann::json manifest_to_json(const SplitManifest& manifest);
[[nodiscard]] SplitManifest manifest_from_json(const nlohmann::json& doc);

}  // namespace detdsci::dataset
