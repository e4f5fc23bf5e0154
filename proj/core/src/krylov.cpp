#include "toeplab/krylov.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <numbers>
#include <random>
#include <thread>

#include "toeplab/io.hpp"

namespace toeplab {

namespace {

using Clock = std::chrono::steady_clock;

double elapsed_ms(Clock::time_point since) {
    return std::chrono::duration<double, std::milli>(Clock::now() - since).count();
}

SolveResult run_cg(const LinearOperator& a, const Preconditioner* m, const Eigen::VectorXd& b,
                   const Eigen::VectorXd& x0, const SolveOptions& options) {
    if (b.size() != x0.size()) throw std::invalid_argument("cg: b and x0 differ in length");
    if (!(options.tolerance > 0.0)) throw std::invalid_argument("cg: tolerance must be positive");
    const auto start = Clock::now();

    SolveResult out;
    SolveReport& rep = out.report;
    rep.tolerance = options.tolerance;
    rep.preconditioner = m != nullptr ? m->id() : "none";
    const std::size_t max_iter =
        options.max_iter > 0 ? options.max_iter : std::max<std::size_t>(static_cast<std::size_t>(b.size()), 100);

    Eigen::VectorXd& x = out.x;
    x = x0;
    Eigen::VectorXd r = b - a(x);
    double rnorm = r.norm();
    rep.reference_norm = options.reference_norm.value_or(rnorm);
    const double threshold = options.tolerance * rep.reference_norm;
    rep.residual_history.push_back(rnorm);

    if (rnorm <= threshold) {
        rep.converged = true;
    } else {
        Eigen::VectorXd z = m != nullptr ? m->apply(r) : r;
        double rz = r.dot(z);
        if (!(rz > 0.0)) throw IndefiniteOperatorError("pcg: preconditioner is not positive definite (r^T z <= 0)");
        Eigen::VectorXd p = z;
        Eigen::VectorXd q(b.size());
        for (std::size_t k = 1; k <= max_iter; ++k) {
            q = a(p);
            const double pq = p.dot(q);
            if (!(pq > 0.0)) throw IndefiniteOperatorError("cg: breakdown, p^T A p <= 0 at iteration " + std::to_string(k));
            const double alpha = rz / pq;
            x += alpha * p;
            r -= alpha * q;
            rnorm = r.norm();
            rep.residual_history.push_back(rnorm);
            rep.iterations = k;
            if (rnorm <= threshold) {
                rep.converged = true;
                break;
            }
            if (m != nullptr) z = m->apply(r);
            else z = r;
            const double rz_next = r.dot(z);
            if (!(rz_next > 0.0)) throw IndefiniteOperatorError("pcg: preconditioner is not positive definite (r^T z <= 0)");
            p = z + (rz_next / rz) * p;
            rz = rz_next;
        }
    }
    rep.final_residual = (b - a(x)).norm();
    rep.wall_ms = elapsed_ms(start);
    return out;
}

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ull;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
    return x ^ (x >> 31);
}

/// Uniform in [0, 1) from the raw 64-bit output, independent of the standard library's distributions.
double unit(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

struct Sequence {
    Eigen::VectorXd b;
    Eigen::VectorXd delta;
};

Sequence make_sequence(const BlockLattice& lattice, const BenchConfig& cfg, int n) {
    const std::uint64_t row_seed = splitmix64(cfg.seed ^ splitmix64(static_cast<std::uint64_t>(n)));
    Sequence seq;
    seq.b = smooth_rhs(lattice, cfg.p, cfg.bc, row_seed);
    seq.delta = smooth_rhs(lattice, cfg.p, cfg.bc, splitmix64(row_seed));
    const double dn = seq.delta.norm();
    if (dn > 0.0) seq.delta *= cfg.drift * seq.b.norm() / dn;
    return seq;
}

void bench_size(int n, const BenchConfig& cfg, std::vector<BenchRow>& rows) {
    std::vector<std::string> solvers;
    if (cfg.run_cg) solvers.emplace_back("cg");
    if (cfg.run_pcg) solvers.emplace_back("pcg");
    for (const auto& solver : solvers) {
        for (GuessMode mode : {GuessMode::Trivial, GuessMode::Warm}) {
            BenchRow row;
            row.n = n;
            row.solver = solver;
            row.guess = mode;
            rows.push_back(row);
        }
    }
    try {
        const PressureOperator op = assemble_pressure_operator(build_basis(cfg.p), n, n, cfg.bc);
        const LinearOperator a = as_operator(op);
        const Sequence seq = make_sequence(op.lattice(), cfg, n);
        std::unique_ptr<Preconditioner> strang;
        if (cfg.run_pcg) strang = std::make_unique<StrangPreconditioner>(build_strang(op.symbol(), op.lattice()));
        const IdentityPreconditioner identity;

        for (auto& row : rows) {
            row.N = op.lattice().N();
            const Preconditioner& m = row.solver == "pcg" ? *strang : static_cast<const Preconditioner&>(identity);
            Eigen::VectorXd previous;
            double total_iters = 0.0, total_ms = 0.0;
            row.converged_all = true;
            for (int t = 0; t < cfg.steps; ++t) {
                const Eigen::VectorXd bt = seq.b + static_cast<double>(t) * seq.delta;
                SolveOptions opts;
                opts.tolerance = cfg.tolerance;
                opts.reference_norm = (bt - a(bt)).norm();
                const Eigen::VectorXd& x0 = (row.guess == GuessMode::Warm && t > 0) ? previous : bt;
                SolveResult res = row.solver == "pcg" ? pcg(a, m, bt, x0, opts) : cg(a, bt, x0, opts);
                row.iterations.push_back(res.report.iterations);
                total_iters += static_cast<double>(res.report.iterations);
                total_ms += res.report.wall_ms;
                row.converged_all = row.converged_all && res.report.converged;
                previous = std::move(res.x);
            }
            row.avg_iters = total_iters / cfg.steps;
            row.avg_ms = total_ms / cfg.steps;
        }
    } catch (const std::exception& e) {
        for (auto& row : rows) {
            row.converged_all = false;
            row.error = e.what();
        }
    }
}

} // namespace

nlohmann::json SolveReport::to_json(bool with_history, bool with_timing) const {
    nlohmann::json doc{{"iterations", iterations},
                       {"converged", converged},
                       {"tolerance", tolerance},
                       {"initial_residual", residual_history.empty() ? 0.0 : residual_history.front()},
                       {"reference_norm", reference_norm},
                       {"final_residual", final_residual},
                       {"preconditioner", preconditioner}};
    if (with_history) doc["residual_history"] = residual_history;
    if (with_timing) doc["wall_ms"] = wall_ms;
    return doc;
}

Eigen::VectorXcd StrangPreconditioner::apply(const Eigen::VectorXcd& r) const {
    if (static_cast<std::size_t>(r.size()) != lattice_.N()) throw std::invalid_argument("strang: vector length mismatch");
    const int s = lattice_.s;
    Eigen::VectorXcd work = r;
    fft_->backward(work.data());
    for (std::size_t k = 0; k < factors_.size(); ++k) {
        auto seg = work.segment(static_cast<Eigen::Index>(k) * s, s);
        factors_[k].solveInPlace(seg);
    }
    fft_->forward(work.data());
    work /= static_cast<double>(lattice_.n_hat());
    return work;
}

Eigen::VectorXd StrangPreconditioner::apply(const Eigen::VectorXd& r) const {
    return apply(Eigen::VectorXcd(r.cast<std::complex<double>>())).real();
}

StrangPreconditioner build_strang(const MatrixSymbol& sym, const BlockLattice& lattice) {
    if (sym.block_size() != lattice.s) throw std::invalid_argument("build_strang: block size mismatch");
    const BlockCirculant circ(sym, lattice.n1, lattice.n2);
    StrangPreconditioner p;
    p.lattice_ = lattice;
    p.blocks_ = circulant_spectral_blocks(circ);
    const int s = lattice.s;
    const double weight = 1.0 / (static_cast<double>(s) * s * static_cast<double>(lattice.n_hat()));
    p.blocks_[0] += Eigen::MatrixXcd::Constant(s, s, weight);

    p.factors_.reserve(p.blocks_.size());
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es;
    for (std::size_t k = 0; k < p.blocks_.size(); ++k) {
        es.compute(p.blocks_[k], Eigen::EigenvaluesOnly);
        const Eigen::VectorXd ev = es.eigenvalues();
        const double lo = ev(0), hi = ev(ev.size() - 1);
        if (k == 0) p.zero_eigs_ = ev;
        Eigen::LLT<Eigen::MatrixXcd> llt(p.blocks_[k]);
        if (!(lo > 1e-14 * std::abs(hi)) || llt.info() != Eigen::Success) {
            const int r1 = static_cast<int>(k) / lattice.n2, r2 = static_cast<int>(k) % lattice.n2;
            throw PreconditionerError("build_strang: corrected spectral block (" + std::to_string(r1) + ", " +
                                          std::to_string(r2) + ") is not positive definite (smallest eigenvalue " +
                                          format_double(lo) + ")",
                                      ev);
        }
        p.max_condition_ = std::max(p.max_condition_, hi / lo);
        p.factors_.push_back(std::move(llt));
    }
    p.fft_ = std::make_shared<const Fft2>(lattice.n1, lattice.n2, s);
    return p;
}

SolveResult cg(const LinearOperator& a, const Eigen::VectorXd& b, const Eigen::VectorXd& x0,
               const SolveOptions& options) {
    return run_cg(a, nullptr, b, x0, options);
}

SolveResult pcg(const LinearOperator& a, const Preconditioner& precond, const Eigen::VectorXd& b,
                const Eigen::VectorXd& x0, const SolveOptions& options) {
    return run_cg(a, &precond, b, x0, options);
}

LinearOperator as_operator(const PressureOperator& op) {
    return [&op](const Eigen::VectorXd& x) { return op.apply(x); };
}

Eigen::VectorXd project_mean_zero(const Eigen::VectorXd& v) {
    if (v.size() == 0) return v;
    return (v.array() - v.mean()).matrix();
}

Eigen::VectorXd smooth_rhs(const BlockLattice& lattice, int p, BoundaryCondition bc, std::uint64_t seed) {
    if (p < 1 || lattice.s != (p + 1) * (p + 1)) throw std::invalid_argument("smooth_rhs: block size must be (p+1)^2");
    constexpr int kModes = 6;
    std::mt19937_64 rng(seed);
    struct Mode {
        double k1, k2, amplitude, phase1, phase2;
    };
    std::vector<Mode> modes;
    const bool periodic = bc == BoundaryCondition::Periodic;
    const double base = periodic ? 2.0 * std::numbers::pi : std::numbers::pi;
    for (int k1 = 1; k1 <= kModes; ++k1) {
        for (int k2 = 1; k2 <= kModes; ++k2) {
            const double amp = (2.0 * unit(rng) - 1.0) / (k1 * k1 + k2 * k2);
            // Dirichlet: sine series in the eigenfunctions of the Dirichlet
            // Laplacian, vanishing on the walls. Periodic: random phases.
            const double ph1 = periodic ? 2.0 * std::numbers::pi * unit(rng) : 0.0;
            const double ph2 = periodic ? 2.0 * std::numbers::pi * unit(rng) : 0.0;
            modes.push_back({base * k1, base * k2, amp, ph1, ph2});
        }
    }
    Eigen::VectorXd b(static_cast<Eigen::Index>(lattice.N()));
    for (int i1 = 0; i1 < lattice.n1; ++i1) {
        for (int i2 = 0; i2 < lattice.n2; ++i2) {
            const std::size_t off = lattice.offset(i1, i2);
            for (int ax = 0; ax <= p; ++ax) {
                for (int ay = 0; ay <= p; ++ay) {
                    const double x = (i1 + static_cast<double>(ax) / p) / lattice.n1;
                    const double y = (i2 + static_cast<double>(ay) / p) / lattice.n2;
                    double v = 0.0;
                    for (const auto& m : modes) v += m.amplitude * std::sin(m.k1 * x + m.phase1) * std::sin(m.k2 * y + m.phase2);
                    b(static_cast<Eigen::Index>(off + static_cast<std::size_t>(ax * (p + 1) + ay))) = v;
                }
            }
        }
    }
    return periodic ? project_mean_zero(b) : b;
}

std::string to_string(GuessMode mode) { return mode == GuessMode::Trivial ? "trivial" : "warm"; }

std::vector<BenchRow> bench_iterations(const std::vector<int>& sizes, const BenchConfig& config) {
    if (sizes.empty()) throw std::invalid_argument("bench_iterations: no sizes");
    if (config.steps < 1) throw std::invalid_argument("bench_iterations: steps must be positive");
    if (!config.run_cg && !config.run_pcg) throw std::invalid_argument("bench_iterations: no solver selected");
    std::vector<std::vector<BenchRow>> per_size(sizes.size());
    unsigned threads = config.threads == 0 ? std::max(1u, std::thread::hardware_concurrency()) : config.threads;
    threads = std::min<unsigned>(threads, static_cast<unsigned>(sizes.size()));
    if (threads <= 1) {
        for (std::size_t i = 0; i < sizes.size(); ++i) bench_size(sizes[i], config, per_size[i]);
    } else {
        std::atomic<std::size_t> next{0};
        std::vector<std::jthread> pool;
        for (unsigned t = 0; t < threads; ++t) {
            pool.emplace_back([&] {
                for (std::size_t i = next++; i < sizes.size(); i = next++) bench_size(sizes[i], config, per_size[i]);
            });
        }
    }
    std::vector<BenchRow> rows;
    for (auto& v : per_size) rows.insert(rows.end(), v.begin(), v.end());
    return rows;
}

void write_bench_csv(std::ostream& out, const std::vector<BenchRow>& rows, bool timings) {
    out << "n,N,solver,guess_mode,avg_iters,avg_ms,converged_all\n";
    for (const auto& r : rows) {
        out << r.n << "," << r.N << "," << r.solver << "," << to_string(r.guess) << ","
            << (r.error.empty() ? format_double(r.avg_iters) : "") << ","
            << (timings && r.error.empty() ? format_double(r.avg_ms) : "") << "," << (r.converged_all ? "true" : "false")
            << "\n";
    }
}

} // namespace toeplab
