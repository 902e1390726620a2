#pragma once

#include "frdw/controller.hpp"
#include "frdw/pipeline.hpp"

#include <nlohmann/json.hpp>

namespace frdw::detail {

using nlohmann::json;

// Reads key into out when present; a present key of the wrong type is a ConfigError.
template <typename T>
void read_field(const json& j, const char* key, T& out) {
  if (!j.contains(key) || j.at(key).is_null()) return;
  try {
    out = j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config field '") + key + "': " + e.what());
  }
}

json to_json(const AugmentSpec& a);
AugmentSpec augment_from_json(const json& j, AugmentSpec base = {});

json to_json(const ClassifierSpec& c);
ClassifierSpec classifier_from_json(const json& j, ClassifierSpec base = {});

json to_json(const PipelineSpec& p);
PipelineSpec pipeline_spec_from_json(const json& j, PipelineSpec base = {});

json to_json(const FrdwConfig& f);
FrdwConfig frdw_from_json(const json& j, FrdwConfig base = {});

} // namespace frdw::detail
