#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numbers>

#include "helpers.hpp"
#include "toeplab/dense_eig.hpp"
#include "toeplab/structured.hpp"

using namespace toeplab;
using testing::constant_symbol;
using testing::random_symbol;
using testing::random_vector;
using testing::scalar_laplace;

namespace {

double rel_err(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
    return (a - b).norm() / std::max(1.0, b.norm());
}

} // namespace

TEST_CASE("lattice bookkeeping") {
    const BlockLattice lat(3, 5, 9);
    CHECK(lat.n_hat() == 15);
    CHECK(lat.N() == 135);
    CHECK(lat.offset(1, 2) == 9 * 7);
    CHECK_THROWS_AS(BlockLattice(0, 3, 1), std::invalid_argument);
}

TEST_CASE("dense Toeplitz places coefficient blocks by index difference") {
    const MatrixSymbol f = builtin_dg_symbol(2);
    const BlockLattice lat(2, 2, 9);
    const Eigen::MatrixXd t = toeplitz_dense(f, lat);
    CHECK(t.rows() == 36);
    // i = (0, 0), j = (0, 1): i - j = (0, -1)
    CHECK(t.block(lat.offset(0, 0), lat.offset(0, 1), 9, 9) == f.find({0, -1})->block);
    CHECK(t.block(lat.offset(0, 1), lat.offset(0, 0), 9, 9) == f.find({0, 1})->block);
    CHECK(t.block(lat.offset(1, 0), lat.offset(0, 0), 9, 9) == f.find({1, 0})->block);
    CHECK(t.block(lat.offset(0, 0), lat.offset(1, 1), 9, 9).isZero(0.0));
    CHECK((t - t.transpose()).cwiseAbs().maxCoeff() <= 1e-14);
    CHECK_THROWS_AS(toeplitz_dense(f, BlockLattice(100, 100, 9)), GuardExceeded);
}

TEST_CASE("dense Toeplitz of a constant symbol is block diagonal") {
    Eigen::MatrixXd a(2, 2);
    a << 2, 1, 1, 3;
    const BlockLattice lat(3, 2, 2);
    const Eigen::MatrixXd t = toeplitz_dense(constant_symbol(a), lat);
    for (std::size_t c = 0; c < lat.n_hat(); ++c) CHECK(t.block(2 * c, 2 * c, 2, 2) == a);
    CHECK(t.sum() == doctest::Approx(a.sum() * 6));
}

TEST_CASE("scalar Laplace-like Toeplitz matrix") {
    const Eigen::MatrixXd t = toeplitz_dense(scalar_laplace(), BlockLattice(3, 3, 1));
    for (int i = 0; i < 9; ++i) {
        CHECK(t(i, i) == 2.0);
        for (int j = 0; j < 9; ++j) {
            const int d = std::abs(i - j);
            const bool neighbour = (d == 3) || (d == 1 && i / 3 == j / 3);
            if (i != j) CHECK(t(i, j) == (neighbour ? -0.5 : 0.0));
        }
    }
}

TEST_CASE("dense circulant wraps the stencil") {
    const MatrixSymbol f = builtin_dg_symbol(2);
    const BlockLattice lat4(4, 4, 9);
    const Eigen::MatrixXd c = circulant_dense(f, lat4);
    const Eigen::MatrixXd f0 = f(0, 0).real();
    for (int i1 = 0; i1 < 4; ++i1)
        for (int i2 = 0; i2 < 4; ++i2) {
            Eigen::MatrixXd row = Eigen::MatrixXd::Zero(9, 9);
            for (std::size_t j = 0; j < lat4.n_hat(); ++j) row += c.block(lat4.offset(i1, i2), 9 * j, 9, 9);
            CHECK((row - f0).cwiseAbs().maxCoeff() <= 1e-14);
        }

    const BlockLattice lat2(2, 2, 9);
    const Eigen::MatrixXd c2 = circulant_dense(f, lat2);
    const Eigen::MatrixXd both = f.find({1, 0})->block + f.find({-1, 0})->block;
    CHECK((c2.block(lat2.offset(0, 0), lat2.offset(1, 0), 9, 9) - both).cwiseAbs().maxCoeff() <= 1e-15);
}

TEST_CASE("scalar circulant spectrum") {
    const BlockLattice lat(4, 4, 1);
    Eigen::VectorXd eigs = symmetric_eigenvalues(circulant_dense(scalar_laplace(), lat));
    std::vector<double> expected;
    for (int j = 0; j < 4; ++j)
        for (int k = 0; k < 4; ++k)
            expected.push_back(2 - std::cos(2 * std::numbers::pi * j / 4) - std::cos(2 * std::numbers::pi * k / 4));
    std::sort(expected.begin(), expected.end());
    for (int i = 0; i < 16; ++i) CHECK(eigs(i) == doctest::Approx(expected[i]).epsilon(1e-12));
}

TEST_CASE("spectral blocks reproduce the circulant spectrum") {
    const MatrixSymbol f = builtin_dg_symbol(2);
    const BlockCirculant circ(f, 8, 8);
    const Eigen::VectorXd dense = symmetric_eigenvalues(circulant_dense(f, circ.lattice()));
    const Eigen::VectorXd blocks = circulant_eigenvalues(circ);
    CHECK((dense - blocks).cwiseAbs().maxCoeff() <= 1e-10);

    const auto& d = circulant_spectral_blocks(circ);
    CHECK((d[0] - f(0, 0)).cwiseAbs().maxCoeff() <= 1e-14);
    CHECK((d[0] * Eigen::VectorXcd::Ones(9)).norm() <= 1e-13);
    // Degree 1 < n / 2: blocks equal the symbol at the Fourier nodes.
    const auto& r = d[circ.lattice().cell(3, 5)];
    CHECK((r - f(2 * std::numbers::pi * 3 / 8, 2 * std::numbers::pi * 5 / 8)).cwiseAbs().maxCoeff() <= 1e-13);
}

TEST_CASE("spectral identity with folding holds for random symbols and small n") {
    std::mt19937_64 rng(19);
    for (int trial = 0; trial < 16; ++trial) {
        const int s = 1 + trial % 4;
        const MatrixSymbol f = random_symbol(rng, s, 1 + trial % 2);
        const int n1 = 1 + trial % 5, n2 = 2 + trial % 3;
        const BlockCirculant circ(f, n1, n2);
        const Eigen::VectorXd dense = symmetric_eigenvalues(circulant_dense(f, circ.lattice()));
        CHECK((dense - circulant_eigenvalues(circ)).cwiseAbs().maxCoeff() <= 1e-10 * std::max(1.0, dense.cwiseAbs().maxCoeff()));
    }
}

TEST_CASE("constant symbol: every spectral block is the constant") {
    Eigen::MatrixXd a(2, 2);
    a << 2, 1, 1, 3;
    const BlockCirculant circ(constant_symbol(a), 3, 4);
    for (const auto& b : circ.spectral_blocks()) CHECK((b.real() - a).cwiseAbs().maxCoeff() <= 1e-15);
    std::mt19937_64 rng(1);
    const Eigen::VectorXd x = random_vector(rng, 24);
    const Eigen::VectorXd y = circulant_matvec(circ, x);
    for (int c = 0; c < 12; ++c) CHECK((y.segment(2 * c, 2) - a * x.segment(2 * c, 2)).norm() <= 1e-14);
}

TEST_CASE("FFT circulant matvec agrees with the dense product") {
    const MatrixSymbol f = builtin_dg_symbol(2);
    std::mt19937_64 rng(5);
    for (int n : {4, 5, 8}) {
        const BlockCirculant circ(f, n, n);
        const Eigen::MatrixXd c = circulant_dense(f, circ.lattice());
        const Eigen::VectorXd x = random_vector(rng, c.rows());
        CHECK(rel_err(circulant_matvec(circ, x), c * x) <= 1e-11);
        const Eigen::VectorXd ones = Eigen::VectorXd::Ones(c.rows());
        CHECK(circulant_matvec(circ, ones).cwiseAbs().maxCoeff() <= 1e-12 * c.rows());
    }
    const BlockCirculant circ(f, 4, 4);
    CHECK_THROWS_AS(circulant_matvec(circ, Eigen::VectorXd::Zero(3)), std::invalid_argument);
}

TEST_CASE("Toeplitz matvec: stencil, embedding and dense agree") {
    const MatrixSymbol f = builtin_dg_symbol(2);
    std::mt19937_64 rng(9);
    for (auto [n1, n2] : {std::pair{4, 4}, std::pair{3, 6}, std::pair{8, 8}}) {
        const BlockToeplitz t(f, n1, n2);
        const Eigen::MatrixXd d = toeplitz_dense(f, t.lattice());
        const Eigen::VectorXd x = random_vector(rng, d.rows());
        const Eigen::VectorXd ref = d * x;
        CHECK(rel_err(toeplitz_matvec(t, x), ref) <= 1e-12);
        CHECK(rel_err(t.apply_embedded(x), ref) <= 1e-12);
        CHECK(rel_err(Eigen::VectorXd(toeplitz_sparse(f, t.lattice()) * x), ref) <= 1e-14);
    }
    const BlockToeplitz t(f, 4, 4);
    CHECK(toeplitz_matvec(t, Eigen::VectorXd::Zero(144)).isZero(0.0));
}

TEST_CASE("Toeplitz matvec of the scalar Laplace-like symbol is the 5-point stencil") {
    std::mt19937_64 rng(2);
    const int n = 5;
    const BlockToeplitz t(scalar_laplace(), n, n);
    const Eigen::VectorXd x = random_vector(rng, n * n);
    const Eigen::VectorXd y = toeplitz_matvec(t, x);
    for (int j = 1; j < n - 1; ++j)
        for (int k = 1; k < n - 1; ++k) {
            const int i = j * n + k;
            const double expect = 2 * x(i) - 0.5 * (x(i - n) + x(i + n) + x(i - 1) + x(i + 1));
            CHECK(y(i) == doctest::Approx(expect).epsilon(1e-14));
        }
}

TEST_CASE("matvec oracles on random symbols") {
    std::mt19937_64 rng(23);
    for (int trial = 0; trial < 20; ++trial) {
        const int s = 1 + trial % 4;
        const MatrixSymbol f = random_symbol(rng, s, 1 + trial % 2);
        const int n1 = 2 + trial % 4, n2 = 3 + trial % 3;
        const BlockToeplitz t(f, n1, n2);
        const BlockCirculant c(f, n1, n2);
        const Eigen::VectorXd x = random_vector(rng, static_cast<Eigen::Index>(t.lattice().N()));
        const Eigen::MatrixXd td = toeplitz_dense(f, t.lattice());
        CHECK((td - td.transpose()).cwiseAbs().maxCoeff() <= 1e-14);
        CHECK(rel_err(t.apply(x), td * x) <= 1e-12);
        CHECK(rel_err(t.apply_embedded(x), td * x) <= 1e-12);
        CHECK(rel_err(c.apply(x), circulant_dense(f, c.lattice()) * x) <= 1e-11);
    }
}

TEST_CASE("extremal eigenvalues of T_n lie inside the symbol range") {
    const MatrixSymbol f = builtin_dg_symbol(2);
    const EigenSample fine = sample_eigs(f, 200, GridKind::Half);
    const double lo = fine.intervals.front().first, hi = fine.intervals.back().second;
    for (int n = 4; n <= 12; n += 2) {
        const Eigen::VectorXd e = symmetric_eigenvalues(toeplitz_dense(f, BlockLattice(n, n, 9)));
        CHECK(e(0) > lo);
        CHECK(e(e.size() - 1) < hi);
    }
}

TEST_CASE("spectral blocks JSON") {
    const BlockCirculant circ(builtin_dg_symbol(2), 2, 3);
    const auto j = spectral_blocks_json(circ);
    CHECK(j.at("blocks").size() == 6);
    CHECK(j.at("blocks")[4].at("r") == nlohmann::json::array({1, 1}));
    CHECK(j.at("blocks")[0].at("re").size() == 9);
}
