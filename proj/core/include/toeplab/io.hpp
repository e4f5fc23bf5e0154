#pragma once

#include <cstdint>
#include <ostream>
#include <string>
#include <string_view>

#include <Eigen/Dense>
#include <Eigen/Sparse>

namespace toeplab {

/// Shortest round-trip decimal form ("0.1", "1e-10", "-3"); '.' separator regardless of locale.
std::string format_double(double value);

std::uint64_t fnv1a64(std::string_view bytes);

/// Matrix Market coordinate/real/symmetric: lower triangle only, 1-based indices.
void write_matrix_market_symmetric(std::ostream& out, const Eigen::SparseMatrix<double>& a,
                                   std::string_view comment = {});
void write_matrix_market_symmetric(std::ostream& out, const Eigen::MatrixXd& a,
                                   std::string_view comment = {});

/// Reads a coordinate real general/symmetric Matrix Market file (symmetric entries are mirrored).
Eigen::SparseMatrix<double> read_matrix_market(std::istream& in);

} // namespace toeplab
