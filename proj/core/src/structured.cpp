#include "toeplab/structured.hpp"

#include <algorithm>
#include <cmath>
#include <mutex>
#include <numbers>
#include <string>

namespace toeplab {

namespace {

void check_guard(const BlockLattice& lattice, std::size_t guard) {
    if (lattice.N() > guard) {
        throw GuardExceeded("dense matrix of order " + std::to_string(lattice.N()) + " exceeds the guard of " +
                            std::to_string(guard) + " rows");
    }
}

void check_length(const BlockLattice& lattice, Eigen::Index size) {
    if (static_cast<std::size_t>(size) != lattice.N()) {
        throw std::invalid_argument("vector length " + std::to_string(size) + " does not match matrix order " +
                                    std::to_string(lattice.N()));
    }
}

bool reaches(Index2 j, int n1, int n2) { return std::abs(j.j1) <= n1 - 1 && std::abs(j.j2) <= n2 - 1; }

int mod(int a, int n) { return ((a % n) + n) % n; }

} // namespace

BlockLattice::BlockLattice(int n1_, int n2_, int s_) : n1(n1_), n2(n2_), s(s_) {
    if (n1 <= 0 || n2 <= 0 || s <= 0) throw std::invalid_argument("lattice dimensions must be positive");
}

std::map<Index2, Eigen::MatrixXd> fold_coefficients(const MatrixSymbol& sym, int n1, int n2) {
    std::map<Index2, Eigen::MatrixXd> folded;
    for (const auto& [j, c] : sym.coefficients()) {
        if (!reaches(j, n1, n2)) continue;
        const Index2 m{mod(j.j1, n1), mod(j.j2, n2)};
        auto [it, inserted] = folded.try_emplace(m, c.block);
        if (!inserted) it->second += c.block;
    }
    return folded;
}

// ---------------------------------------------------------------------------
// Toeplitz

BlockToeplitz::BlockToeplitz(MatrixSymbol symbol, int n1, int n2)
    : symbol_(std::move(symbol)), lattice_(n1, n2, symbol_.block_size()) {
    for (const auto& [j, c] : symbol_.coefficients())
        if (reaches(j, n1, n2)) terms_.emplace_back(j, c.block);
}

Eigen::VectorXd BlockToeplitz::apply(const Eigen::VectorXd& x) const {
    check_length(lattice_, x.size());
    const int n1 = lattice_.n1, n2 = lattice_.n2, s = lattice_.s;
    Eigen::VectorXd y = Eigen::VectorXd::Zero(x.size());
    for (const auto& [j, block] : terms_) {
        // y_i += fhat_j x_{i - j} for every i with i - j inside the lattice.
        const int lo1 = std::max(0, j.j1), hi1 = std::min(n1, n1 + j.j1);
        const int lo2 = std::max(0, j.j2), hi2 = std::min(n2, n2 + j.j2);
        for (int i1 = lo1; i1 < hi1; ++i1) {
            for (int i2 = lo2; i2 < hi2; ++i2) {
                y.segment(lattice_.offset(i1, i2), s).noalias() +=
                    block * x.segment(lattice_.offset(i1 - j.j1, i2 - j.j2), s);
            }
        }
    }
    return y;
}

Eigen::VectorXd BlockToeplitz::apply_embedded(const Eigen::VectorXd& x) const {
    check_length(lattice_, x.size());
    const int n1 = lattice_.n1, n2 = lattice_.n2, s = lattice_.s;
    std::map<Index2, Eigen::MatrixXd> reachable;
    for (const auto& [j, block] : terms_) reachable.emplace(j, block);
    // Offsets of T_n lie in (-n, n), so they stay distinct modulo 2n.
    const BlockCirculant big(MatrixSymbol::numeric(s, reachable), 2 * n1, 2 * n2);
    const BlockLattice& bl = big.lattice();
    Eigen::VectorXd padded = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(bl.N()));
    for (int i1 = 0; i1 < n1; ++i1)
        for (int i2 = 0; i2 < n2; ++i2) padded.segment(bl.offset(i1, i2), s) = x.segment(lattice_.offset(i1, i2), s);
    const Eigen::VectorXd full = big.apply(padded);
    Eigen::VectorXd y(x.size());
    for (int i1 = 0; i1 < n1; ++i1)
        for (int i2 = 0; i2 < n2; ++i2) y.segment(lattice_.offset(i1, i2), s) = full.segment(bl.offset(i1, i2), s);
    return y;
}

// ---------------------------------------------------------------------------
// Circulant

struct BlockCirculant::Lazy {
    std::once_flag blocks_once;
    std::vector<Eigen::MatrixXcd> blocks;
    std::once_flag fft_once;
    std::unique_ptr<Fft2> fft;
};

BlockCirculant::BlockCirculant(MatrixSymbol symbol, int n1, int n2)
    : symbol_(std::move(symbol)), lattice_(n1, n2, symbol_.block_size()), lazy_(std::make_shared<Lazy>()) {}

const std::vector<Eigen::MatrixXcd>& BlockCirculant::spectral_blocks() const {
    std::call_once(lazy_->blocks_once, [this] {
        const int n1 = lattice_.n1, n2 = lattice_.n2, s = lattice_.s;
        const auto folded = fold_coefficients(symbol_, n1, n2);
        lazy_->blocks.assign(lattice_.n_hat(), Eigen::MatrixXcd::Zero(s, s));
        for (int r1 = 0; r1 < n1; ++r1) {
            for (int r2 = 0; r2 < n2; ++r2) {
                auto& d = lazy_->blocks[lattice_.cell(r1, r2)];
                for (const auto& [m, block] : folded) {
                    // Reduce the phase index exactly before converting to an angle.
                    const double phase = 2.0 * std::numbers::pi *
                                         (static_cast<double>(mod(m.j1 * r1, n1)) / n1 +
                                          static_cast<double>(mod(m.j2 * r2, n2)) / n2);
                    d += std::polar(1.0, phase) * block.cast<std::complex<double>>();
                }
            }
        }
    });
    return lazy_->blocks;
}

const Fft2& BlockCirculant::fft() const {
    std::call_once(lazy_->fft_once,
                   [this] { lazy_->fft = std::make_unique<Fft2>(lattice_.n1, lattice_.n2, lattice_.s); });
    return *lazy_->fft;
}

Eigen::VectorXcd BlockCirculant::apply(const Eigen::VectorXcd& x) const {
    check_length(lattice_, x.size());
    const auto& blocks = spectral_blocks();
    const Fft2& f = fft();
    const int s = lattice_.s;
    Eigen::VectorXcd work = x;
    f.backward(work.data());
    Eigen::VectorXcd tmp(s);
    for (std::size_t r = 0; r < blocks.size(); ++r) {
        auto seg = work.segment(static_cast<Eigen::Index>(r) * s, s);
        tmp.noalias() = blocks[r] * seg;
        seg = tmp;
    }
    f.forward(work.data());
    work /= static_cast<double>(lattice_.n_hat());
    return work;
}

Eigen::VectorXd BlockCirculant::apply(const Eigen::VectorXd& x) const {
    return apply(Eigen::VectorXcd(x.cast<std::complex<double>>())).real();
}

// ---------------------------------------------------------------------------
// Free functions

Eigen::MatrixXd toeplitz_dense(const MatrixSymbol& sym, const BlockLattice& lattice, std::size_t guard) {
    check_guard(lattice, guard);
    if (lattice.s != sym.block_size()) throw std::invalid_argument("lattice block size does not match the symbol");
    const int n1 = lattice.n1, n2 = lattice.n2, s = lattice.s;
    const auto N = static_cast<Eigen::Index>(lattice.N());
    Eigen::MatrixXd a = Eigen::MatrixXd::Zero(N, N);
    for (const auto& [j, c] : sym.coefficients()) {
        for (int i1 = std::max(0, j.j1); i1 < std::min(n1, n1 + j.j1); ++i1)
            for (int i2 = std::max(0, j.j2); i2 < std::min(n2, n2 + j.j2); ++i2)
                a.block(lattice.offset(i1, i2), lattice.offset(i1 - j.j1, i2 - j.j2), s, s) = c.block;
    }
    return a;
}

Eigen::SparseMatrix<double> toeplitz_sparse(const MatrixSymbol& sym, const BlockLattice& lattice) {
    if (lattice.s != sym.block_size()) throw std::invalid_argument("lattice block size does not match the symbol");
    const int n1 = lattice.n1, n2 = lattice.n2, s = lattice.s;
    std::vector<Eigen::Triplet<double>> triplets;
    triplets.reserve(sym.coefficients().size() * lattice.n_hat() * s * s);
    for (const auto& [j, c] : sym.coefficients()) {
        for (int i1 = std::max(0, j.j1); i1 < std::min(n1, n1 + j.j1); ++i1)
            for (int i2 = std::max(0, j.j2); i2 < std::min(n2, n2 + j.j2); ++i2) {
                const auto row = static_cast<Eigen::Index>(lattice.offset(i1, i2));
                const auto col = static_cast<Eigen::Index>(lattice.offset(i1 - j.j1, i2 - j.j2));
                for (int a = 0; a < s; ++a)
                    for (int b = 0; b < s; ++b)
                        if (c.block(a, b) != 0.0) triplets.emplace_back(row + a, col + b, c.block(a, b));
            }
    }
    const auto N = static_cast<Eigen::Index>(lattice.N());
    Eigen::SparseMatrix<double> t(N, N);
    t.setFromTriplets(triplets.begin(), triplets.end());
    return t;
}

Eigen::MatrixXd circulant_dense(const MatrixSymbol& sym, const BlockLattice& lattice, std::size_t guard) {
    check_guard(lattice, guard);
    if (lattice.s != sym.block_size()) throw std::invalid_argument("lattice block size does not match the symbol");
    const int n1 = lattice.n1, n2 = lattice.n2, s = lattice.s;
    const auto N = static_cast<Eigen::Index>(lattice.N());
    Eigen::MatrixXd a = Eigen::MatrixXd::Zero(N, N);
    for (const auto& [m, block] : fold_coefficients(sym, n1, n2)) {
        for (int i1 = 0; i1 < n1; ++i1)
            for (int i2 = 0; i2 < n2; ++i2)
                a.block(lattice.offset(i1, i2), lattice.offset(mod(i1 - m.j1, n1), mod(i2 - m.j2, n2)), s, s) = block;
    }
    return a;
}

const std::vector<Eigen::MatrixXcd>& circulant_spectral_blocks(const BlockCirculant& circ) {
    return circ.spectral_blocks();
}

Eigen::VectorXd circulant_matvec(const BlockCirculant& circ, const Eigen::VectorXd& x) { return circ.apply(x); }

Eigen::VectorXd toeplitz_matvec(const BlockToeplitz& toep, const Eigen::VectorXd& x) { return toep.apply(x); }

Eigen::VectorXd circulant_eigenvalues(const BlockCirculant& circ) {
    const auto& blocks = circ.spectral_blocks();
    const int s = circ.lattice().s;
    Eigen::VectorXd all(static_cast<Eigen::Index>(blocks.size()) * s);
    for (std::size_t r = 0; r < blocks.size(); ++r)
        all.segment(static_cast<Eigen::Index>(r) * s, s) = hermitian_eigenvalues(blocks[r]);
    std::sort(all.begin(), all.end());
    return all;
}

nlohmann::json spectral_blocks_json(const BlockCirculant& circ) {
    const BlockLattice& lat = circ.lattice();
    nlohmann::json blocks = nlohmann::json::array();
    const auto& d = circ.spectral_blocks();
    for (int r1 = 0; r1 < lat.n1; ++r1) {
        for (int r2 = 0; r2 < lat.n2; ++r2) {
            const auto& b = d[lat.cell(r1, r2)];
            nlohmann::json re = nlohmann::json::array(), im = nlohmann::json::array();
            for (Eigen::Index i = 0; i < b.rows(); ++i) {
                nlohmann::json rr = nlohmann::json::array(), ii = nlohmann::json::array();
                for (Eigen::Index k = 0; k < b.cols(); ++k) {
                    rr.push_back(b(i, k).real());
                    ii.push_back(b(i, k).imag());
                }
                re.push_back(std::move(rr));
                im.push_back(std::move(ii));
            }
            blocks.push_back({{"r", {r1, r2}}, {"re", std::move(re)}, {"im", std::move(im)}});
        }
    }
    return {{"s", lat.s}, {"n", {lat.n1, lat.n2}}, {"blocks", std::move(blocks)}};
}

} // namespace toeplab
