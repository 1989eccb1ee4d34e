#pragma once

#include <nlohmann/json_fwd.hpp>

#include <iosfwd>
#include <string>

#include "ikit/linalg.hpp"

namespace ikit {

/// Shortest round-trip decimal form of a double ('.' decimal point,
/// locale-independent). Shared by every CSV writer so outputs are
/// byte-stable across runs.
std::string format_double(double v);

// CSV: one row per line, comma separated, no header.
std::string matrix_to_csv(const Matrix& m);
Matrix matrix_from_csv(std::istream& in);
void write_matrix_csv(const std::string& path, const Matrix& m);
Matrix read_matrix_csv(const std::string& path);

// JSON object {rows, cols, data:[...]} with row-major data.
nlohmann::json matrix_to_json(const Matrix& m);
Matrix matrix_from_json(const nlohmann::json& j);

void write_text_file(const std::string& path, const std::string& content);
std::string read_text_file(const std::string& path);

}  // namespace ikit
