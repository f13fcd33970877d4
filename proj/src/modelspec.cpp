#include <json.hpp>

#include "mmsi/error.hpp"
#include "mmsi/linmodels.hpp"

namespace mmsi {

using nlohmann::json;

namespace {

std::string text_field(const json& j, const char* key, std::size_t index) {
  const json& v = j.at(key);
  if (!v.is_string())
    throw Error(ErrorCode::Schema, "model " + std::to_string(index) + ": '" + key + "' must be a string");
  return v.get<std::string>();
}

}  // namespace

std::vector<ModelSpec> parse_model_specs(const std::string& json_text) {
  json root;
  try {
    root = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw Error(ErrorCode::Schema, std::string("model file is not valid JSON: ") + e.what());
  }
  Alternative fallback = Alternative::TwoSided;
  const json* list = &root;
  if (root.is_object()) {
    if (root.contains("alternative")) fallback = parse_alternative(text_field(root, "alternative", 0));
    if (!root.contains("models")) throw Error(ErrorCode::Schema, "model file lacks 'models'");
    list = &root.at("models");
  }
  if (!list->is_array() || list->empty())
    throw Error(ErrorCode::Schema, "model file must list at least one model");

  std::vector<ModelSpec> specs;
  std::size_t index = 0;
  for (const json& m : *list) {
    if (!m.is_object()) throw Error(ErrorCode::Schema, "model " + std::to_string(index) + " is not an object");
    if (!m.contains("endpoint")) throw Error(ErrorCode::Schema, "model " + std::to_string(index) + " lacks 'endpoint'");
    ModelSpec s;
    s.endpoint = text_field(m, "endpoint", index);
    if (m.contains("subset")) s.subset = text_field(m, "subset", index);
    if (m.contains("family")) s.family = parse_family(text_field(m, "family", index));
    s.direction = m.contains("direction") ? parse_alternative(text_field(m, "direction", index)) : fallback;
    if (m.contains("label")) s.label = text_field(m, "label", index);
    if (m.contains("group")) s.group = text_field(m, "group", index);
    specs.push_back(std::move(s));
    ++index;
  }
  return specs;
}

void check_model_specs(const Dataset& data, const std::vector<ModelSpec>& specs) {
  for (const ModelSpec& s : specs) {
    if (!data.has_endpoint(s.endpoint))
      throw Error(ErrorCode::Schema, "model '" + s.display_label() + "' names missing column '" + s.endpoint + "'");
    if (s.subset == "all") continue;
    const std::string flag = s.subset.rfind('!', 0) == 0 ? s.subset.substr(1) : s.subset;
    if (!data.has_subgroup(flag))
      throw Error(ErrorCode::Schema, "model '" + s.display_label() + "' names missing subgroup column '" + flag + "'");
  }
}

}  // namespace mmsi
