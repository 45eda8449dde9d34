#pragma once

// Flat dotted-key settings shared by every subcommand. A command declares its
// defaults; values are layered defaults < config file < manifest < flags, and
// every value is coerced to the type of its default.

#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>

#include <json.hpp>

namespace tarif::cli {

using json = nlohmann::json;

/// Usage problems (bad flags, unknown keys, conflicting options): exit 2.
class UsageProblem : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class Settings {
 public:
  explicit Settings(json defaults) : values_(std::move(defaults)) {}

  /// Overlay a flat object; keys must already exist. Unmarked layers (a
  /// replayed manifest) do not count as user-set for conflict checks.
  void merge(const json& layer, const std::string& source, bool mark_user = true);
  /// Overlay one textual value (from a flag or --set key=value).
  void set_text(const std::string& key, const std::string& text, const std::string& source);

  bool user_set(const std::string& key) const { return user_keys_.count(key) > 0; }
  const json& values() const noexcept { return values_; }

  template <typename T>
  T get(const std::string& key) const {
    return values_.at(key).get<T>();
  }
  /// Sub-object with the given prefix stripped ("tarif.lambda" -> "lambda").
  json section(const std::string& prefix) const;

 private:
  json values_;
  std::set<std::string> user_keys_;
};

json read_json_file(const std::filesystem::path& path);

/// Relative paths resolve under TARIF_DATA_DIR when that variable is set.
std::filesystem::path data_path(const std::string& path);

}  // namespace tarif::cli
