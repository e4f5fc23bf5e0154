#include <doctest.h>

#include <chrono>
#include <cmath>
#include <complex>
#include <numbers>
#include <random>
#include <sstream>

#include "helpers.hpp"
#include "toeplab/dense_eig.hpp"
#include "toeplab/krylov.hpp"

using namespace toeplab;
using testing::constant_symbol;
using testing::random_vector;

namespace {

PressureOperator pressure(int n, BoundaryCondition bc = BoundaryCondition::Dirichlet) {
    return assemble_pressure_operator(build_basis(2), n, n, bc);
}

LinearOperator dense_operator(const Eigen::MatrixXd& a) {
    return [a](const Eigen::VectorXd& x) -> Eigen::VectorXd { return a * x; };
}

/// (F kron I_s) with F_{r,j} = exp(-2 pi i <r, j/n>), the forward transform as a dense matrix.
Eigen::MatrixXcd dense_forward(const BlockLattice& lat) {
    const auto N = static_cast<Eigen::Index>(lat.N());
    Eigen::MatrixXcd f = Eigen::MatrixXcd::Zero(N, N);
    for (int r1 = 0; r1 < lat.n1; ++r1)
        for (int r2 = 0; r2 < lat.n2; ++r2)
            for (int j1 = 0; j1 < lat.n1; ++j1)
                for (int j2 = 0; j2 < lat.n2; ++j2) {
                    const double phase = -2.0 * std::numbers::pi *
                                         (static_cast<double>(r1 * j1) / lat.n1 + static_cast<double>(r2 * j2) / lat.n2);
                    const std::complex<double> w = std::polar(1.0, phase);
                    for (int a = 0; a < lat.s; ++a)
                        f(static_cast<Eigen::Index>(lat.offset(r1, r2)) + a, static_cast<Eigen::Index>(lat.offset(j1, j2)) + a) = w;
                }
    return f;
}

Eigen::MatrixXd dense_strang(const MatrixSymbol& sym, const BlockLattice& lat) {
    const double N = static_cast<double>(lat.N());
    return circulant_dense(sym, lat) + Eigen::MatrixXd::Constant(lat.N(), lat.N(), 1.0 / (N * N));
}

Eigen::MatrixXd apply_columns(const Preconditioner& p, Eigen::Index n) {
    Eigen::MatrixXd out(n, n);
    for (Eigen::Index j = 0; j < n; ++j) out.col(j) = p.apply(Eigen::VectorXd::Unit(n, j));
    return out;
}

} // namespace

TEST_CASE("cg on trivial systems") {
    const Eigen::VectorXd b = Eigen::VectorXd::LinSpaced(6, 1.0, 6.0);
    const auto id = cg(dense_operator(Eigen::MatrixXd::Identity(6, 6)), b, Eigen::VectorXd::Zero(6));
    CHECK(id.report.iterations == 1);
    CHECK(id.report.converged);
    CHECK((id.x - b).norm() <= 1e-14);

    Eigen::MatrixXd d = Eigen::MatrixXd::Zero(2, 2);
    d(0, 0) = 1.0;
    d(1, 1) = 1e4;
    const auto two = cg(dense_operator(d), Eigen::Vector2d(1.0, 1.0), Eigen::VectorXd::Zero(2));
    CHECK(two.report.converged);
    CHECK(two.report.iterations <= 2);
    CHECK(two.x(1) == doctest::Approx(1e-4));

    // Exact initial guess: nothing to do.
    const auto done = cg(dense_operator(Eigen::MatrixXd::Identity(6, 6)), b, b);
    CHECK(done.report.iterations == 0);
    CHECK(done.report.converged);
    const auto zero = cg(dense_operator(Eigen::MatrixXd::Identity(3, 3)), Eigen::VectorXd::Zero(3), Eigen::VectorXd::Zero(3));
    CHECK(zero.report.converged);
    CHECK(zero.report.iterations == 0);
}

TEST_CASE("cg failure modes") {
    Eigen::MatrixXd indefinite = Eigen::MatrixXd::Identity(2, 2);
    indefinite(1, 1) = -1.0;
    CHECK_THROWS_AS(cg(dense_operator(indefinite), Eigen::Vector2d(0.0, 1.0), Eigen::VectorXd::Zero(2)),
                    IndefiniteOperatorError);

    const PressureOperator op = pressure(8);
    const Eigen::VectorXd b = smooth_rhs(op.lattice(), 2, BoundaryCondition::Dirichlet, 3);
    SolveOptions opts;
    opts.max_iter = 5;
    const auto capped = cg(as_operator(op), b, Eigen::VectorXd::Zero(b.size()), opts);
    CHECK_FALSE(capped.report.converged);
    CHECK(capped.report.iterations == 5);
    CHECK(capped.report.residual_history.size() == 6);

    CHECK_THROWS_AS(cg(as_operator(op), b, Eigen::VectorXd::Zero(3)), std::invalid_argument);
}

TEST_CASE("cg reaches the relative tolerance on the pressure operator") {
    const PressureOperator op = pressure(12);
    const Eigen::VectorXd b = smooth_rhs(op.lattice(), 2, BoundaryCondition::Dirichlet, 9);
    const auto res = cg(as_operator(op), b, Eigen::VectorXd::Zero(b.size()));
    REQUIRE(res.report.converged);
    const auto& h = res.report.residual_history;
    CHECK(h.size() == res.report.iterations + 1);
    CHECK(h.back() <= 1e-8 * h.front());
    CHECK(res.report.final_residual <= 1e-7 * h.front());
    // Check against a direct solve.
    const Eigen::VectorXd x = op.dense().llt().solve(b);
    CHECK((res.x - x).norm() <= 1e-6 * x.norm());
}

TEST_CASE("cg iterations grow linearly with n") {
    std::vector<double> iters;
    for (int n : {16, 32}) {
        const PressureOperator op = pressure(n);
        const Eigen::VectorXd b = smooth_rhs(op.lattice(), 2, BoundaryCondition::Dirichlet, 42);
        iters.push_back(static_cast<double>(cg(as_operator(op), b, Eigen::VectorXd::Zero(b.size())).report.iterations));
    }
    const double ratio = iters[1] / iters[0];
    CHECK(ratio >= 1.7);
    CHECK(ratio <= 2.3);
}

TEST_CASE("Strang correction is the Fourier image of e e^T / N^2") {
    const MatrixSymbol f = builtin_dg_symbol(2);
    const BlockLattice lat(4, 4, 9);
    const StrangPreconditioner p = build_strang(f, lat);

    const Eigen::MatrixXcd f00 = eval(f, {0.0, 0.0});
    const double w = 1.0 / (81.0 * 16.0);
    CHECK((p.blocks()[0] - f00 - Eigen::MatrixXcd::Constant(9, 9, w)).norm() <= 1e-13);
    CHECK(p.zero_block_eigenvalues()(0) > 0.0);

    // D = (1/n_hat) Bwd X Fwd block-diagonalizes a circulant X; apply it to e e^T / N^2.
    const Eigen::MatrixXcd fwd = dense_forward(lat);
    const double N = static_cast<double>(lat.N());
    const Eigen::MatrixXcd x = Eigen::MatrixXcd::Constant(lat.N(), lat.N(), 1.0 / (N * N));
    const Eigen::MatrixXcd image = fwd.adjoint() * x * fwd / static_cast<double>(lat.n_hat());
    Eigen::MatrixXcd expected = Eigen::MatrixXcd::Zero(lat.N(), lat.N());
    expected.topLeftCorner(9, 9).setConstant(w);
    CHECK((image - expected).cwiseAbs().maxCoeff() <= 1e-15);

    // The other blocks are the plain circulant ones.
    const BlockCirculant circ(f, 4, 4);
    const auto& plain = circulant_spectral_blocks(circ);
    for (std::size_t r = 1; r < plain.size(); ++r) CHECK((p.blocks()[r] - plain[r]).norm() == 0.0);
    CHECK(p.max_block_condition() >= 1.0);
}

TEST_CASE("Strang application matches the dense inverse") {
    const MatrixSymbol f = builtin_dg_symbol(2);
    for (int n : {4, 6, 8}) {
        const BlockLattice lat(n, n, 9);
        const StrangPreconditioner p = build_strang(f, lat);
        const Eigen::MatrixXd dense = dense_strang(f, lat);
        const Eigen::MatrixXd inv = dense.inverse();
        std::mt19937_64 rng(static_cast<std::uint64_t>(n));
        for (int k = 0; k < 3; ++k) {
            const Eigen::VectorXd r = random_vector(rng, static_cast<Eigen::Index>(lat.N()));
            const Eigen::VectorXd z = p.apply(r);
            CHECK((z - inv * r).norm() <= 1e-10 * (inv * r).norm());
            CHECK((dense * z - r).norm() <= 1e-10 * r.norm());
        }
    }
}

TEST_CASE("Strang preconditioner is symmetric positive definite") {
    const BlockLattice lat(8, 8, 9);
    const StrangPreconditioner p = build_strang(builtin_dg_symbol(2), lat);
    const Eigen::MatrixXd pinv = apply_columns(p, static_cast<Eigen::Index>(lat.N()));
    CHECK((pinv - pinv.transpose()).cwiseAbs().maxCoeff() <= 1e-9 * pinv.cwiseAbs().maxCoeff());
    std::mt19937_64 rng(5);
    for (int k = 0; k < 100; ++k) {
        const Eigen::VectorXd x = random_vector(rng, static_cast<Eigen::Index>(lat.N()));
        CHECK(x.dot(p.apply(x)) > 0.0);
    }
    const Eigen::MatrixXd sym = 0.5 * (pinv + pinv.transpose());
    CHECK(symmetric_eigenvalues(sym)(0) > 0.0);
}

TEST_CASE("Strang build rejects a singular corrected block") {
    const MatrixSymbol zero = constant_symbol(Eigen::MatrixXd::Zero(2, 2));
    try {
        (void)build_strang(zero, BlockLattice(4, 4, 2));
        FAIL("expected PreconditionerError");
    } catch (const PreconditionerError& e) {
        CHECK(e.eigenvalues().size() == 2);
        CHECK(std::abs(e.eigenvalues()(0)) <= 1e-15);
    }
    CHECK_THROWS_AS(build_strang(builtin_dg_symbol(2), BlockLattice(4, 4, 4)), std::invalid_argument);
}

TEST_CASE("identity symbol: Strang PCG behaves like CG") {
    const BlockLattice lat(6, 6, 3);
    const StrangPreconditioner p = build_strang(constant_symbol(Eigen::MatrixXd::Identity(3, 3)), lat);
    std::mt19937_64 rng(2);
    const Eigen::VectorXd r = random_vector(rng, static_cast<Eigen::Index>(lat.N()));
    CHECK((p.apply(r) - r).norm() <= 1e-3 * r.norm());

    const PressureOperator op = pressure(8);
    const Eigen::VectorXd b = smooth_rhs(op.lattice(), 2, BoundaryCondition::Dirichlet, 4);
    const Eigen::VectorXd x0 = Eigen::VectorXd::Zero(b.size());
    const auto plain = cg(as_operator(op), b, x0);
    const auto ident = pcg(as_operator(op), IdentityPreconditioner{}, b, x0);
    CHECK(plain.report.iterations == ident.report.iterations);
    CHECK(plain.report.residual_history == ident.report.residual_history);
    CHECK(ident.report.preconditioner == "none");
}

TEST_CASE("PCG and CG agree and PCG needs fewer iterations") {
    const PressureOperator op = pressure(16);
    const StrangPreconditioner p = build_strang(op.symbol(), op.lattice());
    const Eigen::VectorXd b = smooth_rhs(op.lattice(), 2, BoundaryCondition::Dirichlet, 42);
    const Eigen::VectorXd x0 = Eigen::VectorXd::Zero(b.size());
    const auto a = cg(as_operator(op), b, x0);
    const auto c = pcg(as_operator(op), p, b, x0);
    REQUIRE(a.report.converged);
    REQUIRE(c.report.converged);
    CHECK((a.x - c.x).norm() <= 1e-6 * a.x.norm());
    CHECK(c.report.iterations < a.report.iterations);
    CHECK(c.report.preconditioner == "strang");
}

TEST_CASE("PCG iterations grow slowly on the Dirichlet operator") {
    std::vector<double> iters;
    for (int n : {16, 32}) {
        const PressureOperator op = pressure(n);
        const StrangPreconditioner p = build_strang(op.symbol(), op.lattice());
        const Eigen::VectorXd b = smooth_rhs(op.lattice(), 2, BoundaryCondition::Dirichlet, 42);
        iters.push_back(static_cast<double>(pcg(as_operator(op), p, b, Eigen::VectorXd::Zero(b.size())).report.iterations));
    }
    CHECK(iters[1] / iters[0] <= 1.3);
}

TEST_CASE("periodic system: Strang PCG terminates in at most two iterations") {
    for (int n : {8, 16, 24}) {
        const PressureOperator op = pressure(n, BoundaryCondition::Periodic);
        // The periodic operator is the circulant itself.
        const BlockCirculant circ(op.symbol(), n, n);
        std::mt19937_64 rng(static_cast<std::uint64_t>(n));
        const Eigen::VectorXd v = random_vector(rng, static_cast<Eigen::Index>(op.lattice().N()));
        CHECK((op.apply(v) - circulant_matvec(circ, v)).norm() <= 1e-12 * v.norm());

        const Eigen::VectorXd b = smooth_rhs(op.lattice(), 2, BoundaryCondition::Periodic, 42);
        CHECK(std::abs(b.sum()) <= 1e-12 * b.norm() * std::sqrt(static_cast<double>(b.size())));
        const StrangPreconditioner p = build_strang(op.symbol(), op.lattice());
        const auto res = pcg(as_operator(op), p, b, Eigen::VectorXd::Zero(b.size()));
        CHECK(res.report.converged);
        CHECK(res.report.iterations <= 2);
        MESSAGE("periodic n = " << n << ": " << res.report.iterations << " PCG iteration(s)");
    }
}

TEST_CASE("preconditioner application scales like N log N") {
    std::vector<double> xs, ys;
    for (int n : {32, 64, 128}) {
        const BlockLattice lat(n, n, 9);
        const StrangPreconditioner p = build_strang(builtin_dg_symbol(2), lat);
        std::mt19937_64 rng(1);
        const Eigen::VectorXd r = random_vector(rng, static_cast<Eigen::Index>(lat.N()));
        double best = 1e300;
        for (int rep = 0; rep < 5; ++rep) {
            const auto t0 = std::chrono::steady_clock::now();
            const Eigen::VectorXd z = p.apply(r);
            const double dt = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
            CHECK(z.size() == r.size());
            best = std::min(best, dt);
        }
        const double N = static_cast<double>(lat.N());
        xs.push_back(std::log(N * std::log(N)));
        ys.push_back(std::log(best));
    }
    const double mx = (xs[0] + xs[1] + xs[2]) / 3, my = (ys[0] + ys[1] + ys[2]) / 3;
    double sxy = 0, sxx = 0;
    for (int i = 0; i < 3; ++i) {
        sxy += (xs[i] - mx) * (ys[i] - my);
        sxx += (xs[i] - mx) * (xs[i] - mx);
    }
    const double slope = sxy / sxx;
    MESSAGE("log-log slope against N log N: " << slope);
    CHECK(slope <= 1.2);
}

TEST_CASE("smooth right-hand sides") {
    const BlockLattice lat(8, 8, 9);
    const Eigen::VectorXd a = smooth_rhs(lat, 2, BoundaryCondition::Dirichlet, 7);
    CHECK(a == smooth_rhs(lat, 2, BoundaryCondition::Dirichlet, 7));
    CHECK(a != smooth_rhs(lat, 2, BoundaryCondition::Dirichlet, 8));
    CHECK(a.norm() > 0.0);
    // Nodes on the walls carry zero for Dirichlet data.
    for (int i2 = 0; i2 < 8; ++i2)
        for (int ay = 0; ay < 3; ++ay) CHECK(std::abs(a(static_cast<Eigen::Index>(lat.offset(0, i2)) + ay)) <= 1e-15);
    const Eigen::VectorXd p = smooth_rhs(lat, 2, BoundaryCondition::Periodic, 7);
    CHECK(std::abs(p.mean()) <= 1e-15);
    CHECK_THROWS_AS(smooth_rhs(lat, 1, BoundaryCondition::Dirichlet, 7), std::invalid_argument);
    CHECK(project_mean_zero(Eigen::Vector3d(1.0, 2.0, 3.0)).isApprox(Eigen::Vector3d(-1.0, 0.0, 1.0)));
}

TEST_CASE("iteration benchmark") {
    BenchConfig cfg;
    cfg.steps = 4;
    const auto rows = bench_iterations({8, 12, 16}, cfg);
    REQUIRE(rows.size() == 12);
    for (std::size_t i = 0; i < rows.size(); i += 2) {
        CHECK(rows[i].guess == GuessMode::Trivial);
        CHECK(rows[i + 1].guess == GuessMode::Warm);
        CHECK(rows[i + 1].avg_iters <= rows[i].avg_iters);
        CHECK(rows[i].converged_all);
        CHECK(rows[i].error.empty());
        CHECK(rows[i].iterations.size() == 4);
    }
    // CG trivial column against a linear law in n.
    std::vector<double> ns, its;
    for (const auto& r : rows)
        if (r.solver == "cg" && r.guess == GuessMode::Trivial) {
            ns.push_back(r.n);
            its.push_back(r.avg_iters);
        }
    const double mn = (ns[0] + ns[1] + ns[2]) / 3, mi = (its[0] + its[1] + its[2]) / 3;
    double sxy = 0, sxx = 0;
    for (int i = 0; i < 3; ++i) {
        sxy += (ns[i] - mn) * (its[i] - mi);
        sxx += (ns[i] - mn) * (ns[i] - mn);
    }
    const double slope = sxy / sxx, icept = mi - slope * mn;
    for (int i = 0; i < 3; ++i) CHECK(std::abs(slope * ns[i] + icept - its[i]) <= 0.1 * its[i]);
    CHECK(its[0] < its[1]);
    CHECK(its[1] < its[2]);

    // Same rows on two threads.
    BenchConfig par = cfg;
    par.threads = 2;
    const auto rows2 = bench_iterations({8, 12, 16}, par);
    for (std::size_t i = 0; i < rows.size(); ++i) CHECK(rows2[i].iterations == rows[i].iterations);

    std::ostringstream a, b;
    write_bench_csv(a, rows);
    write_bench_csv(b, rows2);
    CHECK(a.str() == b.str());
    CHECK(a.str().rfind("n,N,solver,guess_mode,avg_iters,avg_ms,converged_all\n8,576,cg,trivial,", 0) == 0);
    std::ostringstream timed;
    write_bench_csv(timed, rows, true);
    CHECK(timed.str() != a.str());
}

TEST_CASE("benchmark edge cases") {
    BenchConfig still;
    still.drift = 0.0;
    still.steps = 3;
    const auto rows = bench_iterations({10}, still);
    for (const auto& r : rows) {
        if (r.guess != GuessMode::Warm) continue;
        for (std::size_t t = 1; t < r.iterations.size(); ++t) CHECK(r.iterations[t] <= 1);
    }
    // A failing size is reported and the sweep goes on.
    BenchConfig cfg;
    cfg.steps = 2;
    const auto mixed = bench_iterations({2, 8}, cfg);
    REQUIRE(mixed.size() == 8);
    CHECK_FALSE(mixed[0].error.empty());
    CHECK_FALSE(mixed[0].converged_all);
    CHECK(mixed[4].error.empty());
    CHECK(mixed[4].converged_all);
    std::ostringstream csv;
    write_bench_csv(csv, mixed);
    CHECK(csv.str().find("2,0,cg,trivial,,,false\n") != std::string::npos);

    CHECK_THROWS_AS(bench_iterations({}, cfg), std::invalid_argument);
    BenchConfig none = cfg;
    none.run_cg = none.run_pcg = false;
    CHECK_THROWS_AS(bench_iterations({8}, none), std::invalid_argument);
}

TEST_CASE("solve report JSON") {
    const auto res = cg(dense_operator(Eigen::MatrixXd::Identity(3, 3)), Eigen::Vector3d(1, 2, 3), Eigen::VectorXd::Zero(3));
    const auto plain = res.report.to_json();
    CHECK(plain["iterations"] == 1);
    CHECK_FALSE(plain.contains("residual_history"));
    CHECK_FALSE(plain.contains("wall_ms"));
    const auto full = res.report.to_json(true, true);
    CHECK(full["residual_history"].size() == 2);
    CHECK(full.contains("wall_ms"));
}
