#pragma once

#include <filesystem>
#include <string>
#include <variant>

#include "pqi/field.hpp"

namespace pqi {

// PQF1 binary field format:
//   ASCII header "PQF1 N L kind\n", kind in {scalar, vector}, then little-endian
//   binary64 (re, im) pairs in x-fastest order; vector fields store the three
//   component blocks consecutively.

std::string encode_pqf(const ScalarField& u);
std::string encode_pqf(const VectorField& v);
std::variant<ScalarField, VectorField> decode_pqf(const std::string& bytes);

void write_pqf(const std::filesystem::path& path, const ScalarField& u);
void write_pqf(const std::filesystem::path& path, const VectorField& v);
std::variant<ScalarField, VectorField> read_pqf(const std::filesystem::path& path);
ScalarField read_scalar_pqf(const std::filesystem::path& path);

/// Writes through a sibling temporary file and renames it into place.
void write_file_atomic(const std::filesystem::path& path, const std::string& contents);
std::string read_file(const std::filesystem::path& path);

}  // namespace pqi
