#pragma once

#include <cstddef>
#include <map>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <nlohmann/json.hpp>

#include "toeplab/rational.hpp"
#include "toeplab/structured.hpp"
#include "toeplab/symbol.hpp"

namespace toeplab {

class AssemblyError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Polynomial with exact rational coefficients, c[k] multiplies x^k.
class Polynomial {
public:
    Polynomial() = default;
    explicit Polynomial(std::vector<Rational> coeffs);

    static Polynomial constant(const Rational& c);
    static Polynomial monomial_x();

    const std::vector<Rational>& coefficients() const { return c_; }
    Rational operator()(const Rational& x) const;
    Polynomial derivative() const;
    /// x -> p(x + shift)
    Polynomial shifted(const Rational& shift) const;
    Rational integrate(const Rational& a, const Rational& b) const;

    // Hidden friends: keeps these out of ordinary lookup for unrelated operands.
    friend Polynomial operator+(const Polynomial& a, const Polynomial& b) { return add(a, b); }
    friend Polynomial operator*(const Polynomial& a, const Polynomial& b) { return multiply(a, b); }
    friend Polynomial operator*(const Rational& s, const Polynomial& a) { return scale(s, a); }

private:
    static Polynomial add(const Polynomial& a, const Polynomial& b);
    static Polynomial multiply(const Polynomial& a, const Polynomial& b);
    static Polynomial scale(const Rational& s, const Polynomial& a);
    void trim();
    std::vector<Rational> c_;
};

/// Nodal Lagrange basis on the unit reference element plus the staggered
/// couplings between a main element and the dual element that straddles its
/// edges. The dual element [0, 1] is centered on the edge at 1/2 shared by
/// the main element on its left (local coordinate x + 1/2) and the one on its
/// right (local coordinate x - 1/2). All integrals are exact.
struct Basis1D {
    int p = 0;
    std::vector<Rational> nodes;
    std::vector<Polynomial> functions;

    /// int_0^1 phi_k phi_l
    RationalMatrix mass;
    /// Dual-element gradient of the right main element:
    /// int_{1/2}^1 psi_k phi_l'(x - 1/2) + psi_k(1/2) phi_l(0)
    RationalMatrix r_tilde;
    /// Dual-element gradient of the left main element (sign folded in):
    /// -int_0^{1/2} psi_k phi_l'(x + 1/2) + psi_k(1/2) phi_l(1)
    RationalMatrix l_tilde;
    /// Main-element divergence of the dual element to its right:
    /// int_{1/2}^1 phi_k psi_l'(x - 1/2) + phi_k(1/2) psi_l(0)
    RationalMatrix l_bar;
    /// Main-element divergence of the dual element to its left:
    /// -int_0^{1/2} phi_k psi_l'(x + 1/2) + phi_k(1/2) psi_l(1)
    RationalMatrix r_bar;
    /// Masses of a dual element cut at a wall, keeping [1/2, 1] (left wall) or [0, 1/2] (right wall).
    RationalMatrix mass_cut_left;
    RationalMatrix mass_cut_right;
};

/// Equispaced nodes k/p, k = 0..p. Requires p >= 1.
Basis1D build_basis(int p);

/// One-dimensional pressure operators with unit mesh and time scaling.
struct HOperators {
    RationalMatrix right;   ///< -(l_bar M^-1 r_tilde), coupling to the right neighbour
    RationalMatrix left;    ///< -(r_bar M^-1 l_tilde), coupling to the left neighbour
    RationalMatrix center;  ///< l_bar M^-1 l_tilde + r_bar M^-1 r_tilde
    /// Change of the center operator in a cell touching a wall on its left
    /// (right) when the dual element there is cut and the outside pressure is
    /// the homogeneous Dirichlet value.
    RationalMatrix wall_left;
    RationalMatrix wall_right;
};

HOperators build_h_operators(const Basis1D& basis);

enum class BoundaryCondition { Dirichlet, Periodic };
std::string to_string(BoundaryCondition bc);
BoundaryCondition parse_boundary_condition(const std::string& text);

/// Two-dimensional pressure operator K_N on an n1 x n2 grid of unit cells.
/// Local dofs are ordered x-index slow, y-index fast; cells follow the
/// BlockLattice order. The interior is a five-point block stencil; under
/// Dirichlet conditions the cells along the walls carry modified center blocks.
class PressureOperator {
public:
    const BlockLattice& lattice() const { return lattice_; }
    BoundaryCondition boundary() const { return bc_; }
    int degree() const { return p_; }

    /// Interior stencil as a symbol: center, (+-1, 0) and (0, +-1) blocks.
    const MatrixSymbol& symbol() const { return symbol_; }

    /// Block coupling cell i to cell j (flat cell indices), zero if they do not interact.
    Eigen::MatrixXd block(std::size_t i, std::size_t j) const;
    /// Exact center block of a cell.
    const RationalMatrix& exact_center(std::size_t cell) const;

    Eigen::VectorXd apply(const Eigen::VectorXd& x) const;
    Eigen::SparseMatrix<double> sparse() const;
    Eigen::MatrixXd dense(std::size_t guard = kDenseGuard) const;
    void write_matrix_market(std::ostream& out) const;

private:
    friend PressureOperator assemble_pressure_operator(const Basis1D&, int, int, BoundaryCondition);
    PressureOperator(BlockLattice lattice, BoundaryCondition bc, int p, MatrixSymbol symbol);

    int neighbour(int i, int d, int n) const;

    BlockLattice lattice_;
    BoundaryCondition bc_;
    int p_;
    MatrixSymbol symbol_;
    std::vector<RationalMatrix> exact_centers_;   // distinct center blocks
    std::vector<Eigen::MatrixXd> centers_;        // same, in floating point
    std::vector<std::size_t> center_of_cell_;     // cell -> index into centers_
    Eigen::MatrixXd minus_x_, plus_x_, minus_y_, plus_y_;
};

/// Builds K_N from the basis integrals. For p = 2 the interior stencil is
/// checked entrywise against the tabulated exact symbol and any mismatch
/// throws AssemblyError. Requires n1, n2 >= 4.
PressureOperator assemble_pressure_operator(const Basis1D& basis, int n1, int n2, BoundaryCondition bc);

/// E_n = K_N - T_n(f) for a Dirichlet operator, split into its diagonal slabs
/// (fixed level-1 index, s * n2 rows each) and the 9x9 diagonal cell blocks
/// inside each slab.
struct BoundaryReport {
    BlockLattice lattice;
    Eigen::SparseMatrix<double> boundary_part;

    bool slab_block_diagonal = false;  ///< nothing outside the s*n2 diagonal slabs
    bool cell_block_diagonal = false;  ///< nothing outside the s x s cell diagonal
    int distinct_slab_kinds = 0;       ///< number of different diagonal slabs
    bool interior_slabs_identical = false;

    /// Diagonal cell blocks e_i, i = 1..n2, of the first, an interior and the last slab.
    std::vector<Eigen::MatrixXd> left;
    std::vector<Eigen::MatrixXd> middle;
    std::vector<Eigen::MatrixXd> right;

    bool middle_interior_zero = false;    ///< e^(c)_i = 0 for 1 < i < n2
    bool left_interior_constant = false;  ///< e^(l)_i equal for 1 < i < n2
    bool right_interior_constant = false;
    bool middle_flip = false;             ///< e^(c)_n = J e^(c)_1 J
    /// e^(r)_1 = J e^(l)_n J and e^(r)_n = J e^(l)_1 J (ends swap under the flip).
    bool flip_crossed_ends = false;
    /// e^(r)_i = J e^(l)_i J for every i, ends included.
    bool flip_same_index = false;
    /// e^(r)_i = J e^(l)_i J for 1 < i < n2.
    bool flip_interior = false;

    double min_eig_left = 0.0;
    double min_eig_middle = 0.0;
    double min_eig_right = 0.0;
    double min_eig = 0.0;
    double norm2 = 0.0;
    bool psd = false;
    std::size_t rank = 0;
    double rank_threshold = 0.0;

    nlohmann::json to_json() const;
};

/// Relative threshold for numerical rank: singular values above this times the largest count.
inline constexpr double kRankRelTol = 1e-10;

BoundaryReport extract_boundary_part(const PressureOperator& op);

} // namespace toeplab
