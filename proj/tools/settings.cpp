#include "settings.hpp"

#include <cstdlib>
#include <fstream>

namespace tarif::cli {

void Settings::merge(const json& layer, const std::string& source, bool mark_user) {
  if (!layer.is_object()) throw UsageProblem(source + ": expected a flat JSON object");
  for (const auto& [key, value] : layer.items()) {
    if (!values_.contains(key)) throw UsageProblem(source + ": unknown key '" + key + "'");
    const json& current = values_[key];
    const bool ok = (current.is_number() && value.is_number()) ||
                    (current.is_boolean() && value.is_boolean()) ||
                    (current.is_string() && value.is_string());
    if (!ok) throw UsageProblem(source + ": key '" + key + "' has the wrong type");
    if (current.is_number_integer() && !value.is_number_integer()) {
      throw UsageProblem(source + ": key '" + key + "' must be an integer");
    }
    if (current.is_number_unsigned() && value.is_number_integer() && value.get<std::int64_t>() < 0) {
      throw UsageProblem(source + ": key '" + key + "' must be non-negative");
    }
    if (current.is_number_float()) {
      values_[key] = value.get<double>();
    } else if (current.is_number_unsigned()) {
      values_[key] = value.get<std::uint64_t>();
    } else {
      values_[key] = value;
    }
    if (mark_user) user_keys_.insert(key);
  }
}

void Settings::set_text(const std::string& key, const std::string& text, const std::string& source) {
  if (!values_.contains(key)) throw UsageProblem(source + ": unknown key '" + key + "'");
  json& slot = values_[key];
  try {
    std::size_t used = 0;
    if (slot.is_boolean()) {
      if (text == "true" || text == "1") slot = true;
      else if (text == "false" || text == "0") slot = false;
      else throw UsageProblem(source + ": '" + text + "' is not a boolean");
      used = text.size();
    } else if (slot.is_number_unsigned()) {
      if (!text.empty() && text[0] == '-') throw UsageProblem(source + ": '" + text + "' must be non-negative");
      slot = std::stoull(text, &used);
    } else if (slot.is_number_integer()) {
      slot = std::stoll(text, &used);
    } else if (slot.is_number()) {
      slot = std::stod(text, &used);
    } else {
      slot = text;
      used = text.size();
    }
    if (used != text.size()) throw UsageProblem(source + ": cannot parse '" + text + "'");
  } catch (const std::logic_error&) {
    throw UsageProblem(source + ": cannot parse '" + text + "' for key '" + key + "'");
  }
  user_keys_.insert(key);
}

json Settings::section(const std::string& prefix) const {
  json out = json::object();
  const std::string p = prefix + ".";
  for (const auto& [key, value] : values_.items()) {
    if (key.rfind(p, 0) == 0) out[key.substr(p.size())] = value;
  }
  return out;
}

json read_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw UsageProblem("cannot read " + path.string());
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw UsageProblem(path.string() + ": " + e.what());
  }
}

std::filesystem::path data_path(const std::string& path) {
  std::filesystem::path p(path);
  if (p.is_relative()) {
    if (const char* root = std::getenv("TARIF_DATA_DIR"); root && *root) return std::filesystem::path(root) / p;
  }
  return p;
}

}  // namespace tarif::cli
