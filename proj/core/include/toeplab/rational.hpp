#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>
#include <boost/multiprecision/cpp_int.hpp>

namespace toeplab {

using Rational = boost::multiprecision::cpp_rational;

/// Parses "a/b", "a" or a plain decimal literal ("-0.125") into an exact rational.
Rational parse_rational(std::string_view text);

/// "127/360", "-2", "0".
std::string to_string(const Rational& value);

double to_double(const Rational& value);

/// Small dense matrix over exact rationals, row-major.
///
/// Used for the finite-element integrals and the published symbol
/// coefficients, which are all short fractions. Sizes are tiny (at most
/// (p+1)^2 per side), so no effort goes into performance.
class RationalMatrix {
public:
    RationalMatrix() = default;
    RationalMatrix(std::size_t rows, std::size_t cols);

    static RationalMatrix identity(std::size_t n);
    /// Row-major list of fraction strings; throws std::invalid_argument on a ragged table.
    static RationalMatrix from_strings(const std::vector<std::vector<std::string>>& rows);

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }

    Rational& operator()(std::size_t i, std::size_t j) { return data_[i * cols_ + j]; }
    const Rational& operator()(std::size_t i, std::size_t j) const { return data_[i * cols_ + j]; }

    RationalMatrix transpose() const;
    /// Gauss-Jordan elimination; throws std::domain_error if singular.
    RationalMatrix inverse() const;
    /// Gaussian elimination; exact.
    Rational determinant() const;
    bool is_zero() const;
    bool is_symmetric() const;

    Eigen::MatrixXd to_eigen() const;

    friend RationalMatrix operator+(const RationalMatrix& a, const RationalMatrix& b);
    friend RationalMatrix operator-(const RationalMatrix& a, const RationalMatrix& b);
    friend RationalMatrix operator*(const RationalMatrix& a, const RationalMatrix& b);
    friend RationalMatrix operator*(const Rational& c, const RationalMatrix& a);
    friend RationalMatrix operator-(const RationalMatrix& a);
    friend bool operator==(const RationalMatrix& a, const RationalMatrix& b);

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<Rational> data_;
};

/// Kronecker product a (x) b: entry (i*rb + k, j*cb + l) = a(i,j) * b(k,l).
RationalMatrix kron(const RationalMatrix& a, const RationalMatrix& b);

/// Flip (exchange) matrix: ones on the anti-diagonal.
RationalMatrix flip_matrix(std::size_t n);

} // namespace toeplab
