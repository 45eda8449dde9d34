#pragma once

#include <filesystem>
#include <string>

#include <json.hpp>

namespace tarif::cli {

inline constexpr const char* kToolVersion = "0.1.0";

/// manifest.json in the output directory. Written when the run starts and
/// rewritten with artifacts and the end time when it finishes.
class Manifest {
 public:
  Manifest(std::filesystem::path out_dir, std::string command, nlohmann::json config);

  void start();
  void add_artifact(const std::string& name, const std::filesystem::path& path);
  void note(const std::string& key, nlohmann::json value) { info_[key] = std::move(value); }
  void finish(int exit_code);

  const std::filesystem::path& dir() const noexcept { return dir_; }

 private:
  void write() const;

  std::filesystem::path dir_;
  nlohmann::json body_;
  nlohmann::json info_ = nlohmann::json::object();
};

}  // namespace tarif::cli
