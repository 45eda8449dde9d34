#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>

#include <json.hpp>

#include "tarif/linalg.hpp"

namespace tarif {

// CSV: one matrix row per line, comma separated, no header. Values are
// written with 17 significant digits so a read-back is bit-exact.
void write_csv(std::ostream& out, const Matrix& m);
void write_csv(const std::filesystem::path& path, const Matrix& m);
Matrix read_csv(std::istream& in);
Matrix read_csv(const std::filesystem::path& path);

// JSON form {"rows":R,"cols":C,"data":[row-major values]}.
nlohmann::json to_json(const Matrix& m);
Matrix matrix_from_json(const nlohmann::json& j);

std::string format_double(double v);

}  // namespace tarif
