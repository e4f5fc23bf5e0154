#pragma once

#include <array>
#include <compare>
#include <cstdint>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "toeplab/rational.hpp"

namespace toeplab {

class SymbolError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Two-level multi-index of a Fourier coefficient.
struct Index2 {
    int j1 = 0;
    int j2 = 0;

    friend auto operator<=>(const Index2&, const Index2&) = default;
    Index2 operator-() const { return {-j1, -j2}; }
};

struct SymbolCoefficient {
    Eigen::MatrixXd block;
    /// Present when the block is known as exact fractions.
    std::optional<RationalMatrix> exact;
};

/// Matrix-valued trigonometric polynomial
///   f(t1, t2) = sum_j  fhat_j exp(i (j1 t1 + j2 t2))
/// with real s x s coefficient blocks and finite support.
///
/// The constructor enforces the Hermitian-symbol condition fhat_{-j} = fhat_j^T,
/// so f(t) is Hermitian for every t.
class MatrixSymbol {
public:
    MatrixSymbol(int s, std::map<Index2, SymbolCoefficient> coeffs);

    static MatrixSymbol exact(int s, const std::map<Index2, RationalMatrix>& coeffs);
    static MatrixSymbol numeric(int s, const std::map<Index2, Eigen::MatrixXd>& coeffs);

    int block_size() const { return s_; }
    const std::map<Index2, SymbolCoefficient>& coefficients() const { return coeffs_; }
    const SymbolCoefficient* find(Index2 j) const;
    /// Componentwise max |j| over the support.
    Index2 degree() const;
    bool is_exact() const;

    Eigen::MatrixXcd operator()(double t1, double t2) const;

    /// Stable 64-bit FNV-1a hash of the canonical JSON form; used as a cache key.
    std::uint64_t fingerprint() const;

private:
    int s_;
    std::map<Index2, SymbolCoefficient> coeffs_;
};

/// Symbol of the staggered-DG pressure operator with the published exact
/// coefficients. Only p = 2 is tabulated; other degrees come from assembly.
MatrixSymbol builtin_dg_symbol(int p);

Eigen::MatrixXcd eval(const MatrixSymbol& sym, std::array<double, 2> theta);

/// Ascending eigenvalues of a Hermitian matrix.
Eigen::VectorXd hermitian_eigenvalues(const Eigen::MatrixXcd& a);

enum class GridKind {
    Half,     ///< G_n: nodes (j pi/n, k pi/n), j,k = 0..n-1
    Periodic  ///< J_n: nodes (2 pi j/n, 2 pi k/n), j,k = 0..n-1
};

std::array<double, 2> grid_node(GridKind grid, int n, int j, int k);
std::string to_string(GridKind grid);
GridKind parse_grid_kind(const std::string& text);

/// Eigenvalue functions of a symbol sampled on a square grid.
struct EigenSample {
    int n = 0;
    GridKind grid = GridKind::Half;
    int s = 0;
    /// values[l][j * n + k] = lambda_{l+1}(f(theta_jk)), ascending in l at each node.
    std::vector<std::vector<double>> values;
    /// Per-l (min, max) over the sample.
    std::vector<std::pair<double, double>> intervals;

    std::size_t node_count() const { return static_cast<std::size_t>(n) * static_cast<std::size_t>(n); }
    std::array<double, 2> theta(std::size_t node) const;
};

/// Evaluates f at every grid node and records its ascending eigenvalues.
/// Work is split over `threads` workers (0 = hardware concurrency); each node
/// writes to its own slot, so the result does not depend on the schedule.
EigenSample sample_eigs(const MatrixSymbol& sym, int n, GridKind grid, unsigned threads = 0);

struct DetTaylor {
    double value = 0.0;
    std::array<double, 2> gradient{};
    std::array<std::array<double, 2>, 2> hessian{};
};

/// Value, gradient and Hessian of det f at theta0 from exact derivatives of the
/// trigonometric terms, combined column-wise through the multilinearity of the
/// determinant (Jacobi's formula in adjugate form, valid at singular points).
DetTaylor det_taylor(const MatrixSymbol& sym, std::array<double, 2> theta0);
DetTaylor det_taylor_at_origin(const MatrixSymbol& sym);

struct ExactDetTaylor {
    Rational value;
    std::array<Rational, 2> gradient;
    std::array<std::array<Rational, 2>, 2> hessian;
};

/// Same expansion at the origin in exact arithmetic. There every derivative
/// of f is a real or purely imaginary combination of the coefficient blocks,
/// so the determinant terms stay rational. Returns nullopt unless every
/// coefficient is exact.
std::optional<ExactDetTaylor> det_taylor_exact_at_origin(const MatrixSymbol& sym);

/// Order alpha of the zero of lambda_1(f) at the origin, from a least-squares
/// fit of log lambda_1 against log |theta| over the grid nodes in a small disc
/// around the origin (origin excluded). Requires n >= 8.
double min_eig_zero_order(const EigenSample& sample);

nlohmann::json to_json(const MatrixSymbol& sym);
MatrixSymbol symbol_from_json(const nlohmann::json& doc);

/// CSV with header "l,j,k,theta1,theta2,lambda"; l is 1-based, rows ordered by l then node.
void write_sample_csv(std::ostream& out, const EigenSample& sample);

} // namespace toeplab
