#include "config_json.hpp"

#include <algorithm>

#include <json.hpp>

namespace storyalign::cli {

namespace {

std::string scalar_text(const nlohmann::json& v) {
  if (v.is_string()) return v.get<std::string>();
  if (v.is_boolean()) return v.get<bool>() ? "true" : "false";
  return v.dump();
}

nlohmann::ordered_json typed(const std::string& text) {
  if (text == "true") return true;
  if (text == "false") return false;
  try {
    auto v = nlohmann::ordered_json::parse(text);
    if (v.is_number()) return v;
  } catch (const nlohmann::json::exception&) {
  }
  return text;
}

}  // namespace

std::string ConfigJSON::to_config(const CLI::App* app, bool default_also, bool, std::string) const {
  nlohmann::ordered_json j = nlohmann::ordered_json::object();
  for (const CLI::Option* opt : app->get_options()) {
    if (opt->get_lnames().empty() || opt->get_configurable() == false) continue;
    const std::string& name = opt->get_lnames().front();
    if (name == "help" || name == "config") continue;
    std::string key = name;
    std::replace(key.begin(), key.end(), '-', '_');
    if (opt->count() > 0) {
      const auto& results = opt->results();
      if (opt->get_expected_max() > 1) {
        nlohmann::ordered_json arr = nlohmann::ordered_json::array();
        for (const auto& r : results) arr.push_back(typed(r));
        j[key] = arr;
      } else if (opt->get_type_size() == 0) {
        j[key] = true;
      } else {
        j[key] = typed(results.back());
      }
    } else if (default_also) {
      if (opt->get_type_size() == 0) {
        j[key] = false;
      } else if (!opt->get_default_str().empty()) {
        j[key] = typed(opt->get_default_str());
      }
    }
  }
  return j.dump(1);
}

std::vector<CLI::ConfigItem> ConfigJSON::from_config(std::istream& input) const {
  nlohmann::json j;
  try {
    input >> j;
  } catch (const nlohmann::json::exception& e) {
    throw CLI::ConversionError(std::string("config file is not valid JSON: ") + e.what());
  }
  if (!j.is_object()) throw CLI::ConversionError("config file must hold a JSON object");

  std::vector<CLI::ConfigItem> items;
  for (const auto& [key, value] : j.items()) {
    CLI::ConfigItem item;
    if (!section.empty()) item.parents = {section};
    item.name = key;
    std::replace(item.name.begin(), item.name.end(), '_', '-');
    if (value.is_object()) throw CLI::ConversionError("config key '" + key + "' holds a nested object");
    if (value.is_array()) {
      for (const auto& v : value) item.inputs.push_back(scalar_text(v));
    } else if (!value.is_null()) {
      item.inputs.push_back(scalar_text(value));
    } else {
      continue;
    }
    items.push_back(std::move(item));
  }
  return items;
}

}  // namespace storyalign::cli
