#pragma once

#include <cstdint>
#include <map>
#include <random>

#include <Eigen/Dense>

#include "toeplab/symbol.hpp"

namespace testing {

using toeplab::Index2;
using toeplab::MatrixSymbol;

inline MatrixSymbol constant_symbol(const Eigen::MatrixXd& a) {
    return MatrixSymbol::numeric(static_cast<int>(a.rows()), {{{0, 0}, a}});
}

/// 2 - cos t1 - cos t2
inline MatrixSymbol scalar_laplace() {
    auto m = [](double v) { return Eigen::MatrixXd::Constant(1, 1, v); };
    return MatrixSymbol::numeric(1, {{{0, 0}, m(2.0)}, {{1, 0}, m(-0.5)}, {{-1, 0}, m(-0.5)},
                                     {{0, 1}, m(-0.5)}, {{0, -1}, m(-0.5)}});
}

/// Scalar symbol squared by convolving its Fourier coefficients.
inline MatrixSymbol scalar_square(const MatrixSymbol& f) {
    std::map<Index2, Eigen::MatrixXd> out;
    for (const auto& [a, ca] : f.coefficients()) {
        for (const auto& [b, cb] : f.coefficients()) {
            const Index2 j{a.j1 + b.j1, a.j2 + b.j2};
            auto [it, fresh] = out.try_emplace(j, Eigen::MatrixXd::Zero(1, 1));
            it->second += ca.block * cb.block;
        }
    }
    return MatrixSymbol::numeric(1, out);
}

/// Random Hermitian-symmetric symbol with s x s blocks and support in [-deg, deg]^2.
inline MatrixSymbol random_symbol(std::mt19937_64& rng, int s, int deg) {
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    std::bernoulli_distribution keep(0.6);
    std::map<Index2, Eigen::MatrixXd> c;
    auto rnd = [&] {
        Eigen::MatrixXd m(s, s);
        for (int i = 0; i < s; ++i)
            for (int j = 0; j < s; ++j) m(i, j) = u(rng);
        return m;
    };
    Eigen::MatrixXd c0 = rnd();
    c[{0, 0}] = c0 + c0.transpose();
    for (int j1 = 0; j1 <= deg; ++j1) {
        for (int j2 = -deg; j2 <= deg; ++j2) {
            const Index2 j{j1, j2};
            if (j1 == 0 && j2 <= 0) continue;
            if (!keep(rng)) continue;
            Eigen::MatrixXd b = rnd();
            c[j] = b;
            c[-j] = b.transpose();
        }
    }
    return MatrixSymbol::numeric(s, c);
}

inline Eigen::VectorXd random_vector(std::mt19937_64& rng, Eigen::Index n) {
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    Eigen::VectorXd v(n);
    for (Eigen::Index i = 0; i < n; ++i) v(i) = u(rng);
    return v;
}

} // namespace testing
