#pragma once

#include <complex>
#include <cstddef>
#include <map>
#include <memory>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include "toeplab/fft.hpp"
#include "toeplab/symbol.hpp"

namespace toeplab {

/// Thrown when a dense export would exceed its row limit.
class GuardExceeded : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

inline constexpr std::size_t kDenseGuard = 40000;

/// Dimensions of a 2-level block matrix. Unknowns are ordered with the block
/// coordinate fastest, then the level-2 index, then the level-1 index:
/// global index = s * (i1 * n2 + i2) + a, i.e. the Kronecker order
/// (level 1) x (level 2) x (block).
struct BlockLattice {
    int n1 = 0;
    int n2 = 0;
    int s = 0;

    BlockLattice() = default;
    BlockLattice(int n1, int n2, int s);

    std::size_t n_hat() const { return static_cast<std::size_t>(n1) * static_cast<std::size_t>(n2); }
    std::size_t N() const { return n_hat() * static_cast<std::size_t>(s); }
    std::size_t cell(int i1, int i2) const { return static_cast<std::size_t>(i1) * n2 + i2; }
    std::size_t offset(int i1, int i2) const { return cell(i1, i2) * s; }

    friend bool operator==(const BlockLattice&, const BlockLattice&) = default;
};

/// Coefficients that enter the size-n circulant, reduced modulo n: the block
/// at residue (m1, m2) is the sum of fhat_j over support points with
/// |j_t| <= n_t - 1 and j = m (mod n). Keys lie in [0, n1) x [0, n2).
std::map<Index2, Eigen::MatrixXd> fold_coefficients(const MatrixSymbol& sym, int n1, int n2);

/// T_n(f): block (i, j) = fhat_{i-j}.
class BlockToeplitz {
public:
    BlockToeplitz(MatrixSymbol symbol, int n1, int n2);

    const BlockLattice& lattice() const { return lattice_; }
    const MatrixSymbol& symbol() const { return symbol_; }

    /// Direct stencil application, O(|support| s^2 n_hat).
    Eigen::VectorXd apply(const Eigen::VectorXd& x) const;
    /// Same product through a circulant of doubled dimensions.
    Eigen::VectorXd apply_embedded(const Eigen::VectorXd& x) const;

private:
    MatrixSymbol symbol_;
    BlockLattice lattice_;
    // Support points that can reach inside the lattice.
    std::vector<std::pair<Index2, Eigen::MatrixXd>> terms_;
};

/// C_n(f): block (i, j) = sum of fhat_m with i - j = m (mod n), |m_t| <= n_t - 1.
///
/// Diagonalized as (F (x) I_s) D (F (x) I_s)^* where D holds the n_hat
/// Hermitian blocks S_n(f)(theta_r), theta_r = 2 pi r / n. The blocks and FFT
/// plans are built lazily on first use and shared read-only afterwards.
class BlockCirculant {
public:
    BlockCirculant(MatrixSymbol symbol, int n1, int n2);

    const BlockLattice& lattice() const { return lattice_; }
    const MatrixSymbol& symbol() const { return symbol_; }

    /// Block r = r1 * n2 + r2 is S_n(f)(2 pi r1 / n1, 2 pi r2 / n2).
    const std::vector<Eigen::MatrixXcd>& spectral_blocks() const;
    const Fft2& fft() const;

    Eigen::VectorXcd apply(const Eigen::VectorXcd& x) const;
    /// Real product; the imaginary part of the FFT result is discarded.
    Eigen::VectorXd apply(const Eigen::VectorXd& x) const;

private:
    struct Lazy;
    MatrixSymbol symbol_;
    BlockLattice lattice_;
    std::shared_ptr<Lazy> lazy_;
};

Eigen::MatrixXd toeplitz_dense(const MatrixSymbol& sym, const BlockLattice& lattice,
                               std::size_t guard = kDenseGuard);
Eigen::SparseMatrix<double> toeplitz_sparse(const MatrixSymbol& sym, const BlockLattice& lattice);
Eigen::MatrixXd circulant_dense(const MatrixSymbol& sym, const BlockLattice& lattice,
                                std::size_t guard = kDenseGuard);

const std::vector<Eigen::MatrixXcd>& circulant_spectral_blocks(const BlockCirculant& circ);
Eigen::VectorXd circulant_matvec(const BlockCirculant& circ, const Eigen::VectorXd& x);
Eigen::VectorXd toeplitz_matvec(const BlockToeplitz& toep, const Eigen::VectorXd& x);

/// Eigenvalues of all spectral blocks, sorted ascending: the spectrum of C_n(f).
Eigen::VectorXd circulant_eigenvalues(const BlockCirculant& circ);

/// Spectral blocks keyed by r in the symbol JSON layout: {"s", "blocks": [{"r": [r1, r2], "re": .., "im": ..}]}.
nlohmann::json spectral_blocks_json(const BlockCirculant& circ);

} // namespace toeplab
