#include "manifest.hpp"

#include <chrono>
#include <ctime>
#include <fstream>
#include <stdexcept>

namespace tarif::cli {

namespace {

std::string utc_now() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

}  // namespace

Manifest::Manifest(std::filesystem::path out_dir, std::string command, nlohmann::json config)
    : dir_(std::move(out_dir)) {
  body_ = {{"command", std::move(command)},
           {"config", std::move(config)},
           {"seed", nullptr},
           {"tool_version", kToolVersion},
           {"artifacts", nlohmann::json::object()},
           {"started_at", nullptr},
           {"finished_at", nullptr}};
  if (body_["config"].contains("seed")) body_["seed"] = body_["config"]["seed"];
}

void Manifest::start() {
  std::filesystem::create_directories(dir_);
  body_["started_at"] = utc_now();
  write();
}

void Manifest::add_artifact(const std::string& name, const std::filesystem::path& path) {
  const auto rel = path.lexically_relative(dir_);
  body_["artifacts"][name] = (rel.empty() || rel.string().starts_with("..") ? path : rel).generic_string();
}

void Manifest::finish(int exit_code) {
  body_["finished_at"] = utc_now();
  body_["exit_code"] = exit_code;
  body_["info"] = info_;
  write();
}

void Manifest::write() const {
  std::ofstream out(dir_ / "manifest.json");
  if (!out) throw std::runtime_error("cannot write " + (dir_ / "manifest.json").string());
  out << body_.dump(2) << '\n';
}

}  // namespace tarif::cli
