#pragma once

#include <filesystem>
#include <string>

#include "rowsolve/types.hpp"

namespace rowsolve {

/// Shortest decimal representation that round-trips to the same double,
/// locale-independent.
std::string format_double(double x);
double parse_double(const std::string& s);

/// Writes `# rows cols` then one comma-separated line per row.
void write_matrix_csv(const std::filesystem::path& file, const DenseMatrix& m);
DenseMatrix read_matrix_csv(const std::filesystem::path& file);

void write_vector_csv(const std::filesystem::path& file, const DenseVector& v);
DenseVector read_vector_csv(const std::filesystem::path& file);

}  // namespace rowsolve
