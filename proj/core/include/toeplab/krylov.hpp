#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "toeplab/dg_assembly.hpp"
#include "toeplab/structured.hpp"
#include "toeplab/symbol.hpp"

namespace toeplab {

/// Thrown when p^T A p <= 0 during (P)CG, or when z^T r <= 0 in PCG.
class IndefiniteOperatorError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Thrown when a corrected spectral block cannot be factorized.
class PreconditionerError : public std::runtime_error {
public:
    PreconditionerError(const std::string& what, Eigen::VectorXd eigenvalues)
        : std::runtime_error(what), eigenvalues_(std::move(eigenvalues)) {}
    const Eigen::VectorXd& eigenvalues() const { return eigenvalues_; }

private:
    Eigen::VectorXd eigenvalues_;
};

using LinearOperator = std::function<Eigen::VectorXd(const Eigen::VectorXd&)>;

inline constexpr double kDefaultTolerance = 1e-8;

struct SolveOptions {
    double tolerance = kDefaultTolerance;
    /// 0 selects max(N, 100).
    std::size_t max_iter = 0;
    /// Stop when ||r_k|| <= tolerance * reference_norm; defaults to ||r_0||.
    std::optional<double> reference_norm;
};

struct SolveReport {
    std::size_t iterations = 0;
    /// ||r_k||_2 for k = 0..iterations (recursively updated residuals).
    std::vector<double> residual_history;
    /// ||b - A x|| recomputed at exit.
    double final_residual = 0.0;
    double reference_norm = 0.0;
    double tolerance = kDefaultTolerance;
    bool converged = false;
    double wall_ms = 0.0;
    std::string preconditioner;

    nlohmann::json to_json(bool with_history = false, bool with_timing = false) const;
};

struct SolveResult {
    Eigen::VectorXd x;
    SolveReport report;
};

class Preconditioner {
public:
    virtual ~Preconditioner() = default;
    /// z = P^{-1} r
    virtual Eigen::VectorXd apply(const Eigen::VectorXd& r) const = 0;
    virtual std::string id() const = 0;
};

class IdentityPreconditioner final : public Preconditioner {
public:
    Eigen::VectorXd apply(const Eigen::VectorXd& r) const override { return r; }
    std::string id() const override { return "none"; }
};

/// P = C_n(f) + e e^T / N^2 with e the all-ones vector. The rank-one term
/// only touches the zero-frequency spectral block, where it adds
/// e_s e_s^T / (s^2 n_hat). Each corrected block is Cholesky-factorized;
/// applications cost two batched FFTs plus n_hat small triangular solves.
class StrangPreconditioner final : public Preconditioner {
public:
    const BlockLattice& lattice() const { return lattice_; }
    /// Corrected spectral blocks, block r = r1 * n2 + r2.
    const std::vector<Eigen::MatrixXcd>& blocks() const { return blocks_; }
    /// Largest ratio of extreme eigenvalues over all corrected blocks.
    double max_block_condition() const { return max_condition_; }
    /// Ascending eigenvalues of the corrected zero-frequency block.
    const Eigen::VectorXd& zero_block_eigenvalues() const { return zero_eigs_; }

    Eigen::VectorXd apply(const Eigen::VectorXd& r) const override;
    Eigen::VectorXcd apply(const Eigen::VectorXcd& r) const;
    std::string id() const override { return "strang"; }

private:
    friend StrangPreconditioner build_strang(const MatrixSymbol&, const BlockLattice&);
    StrangPreconditioner() = default;

    BlockLattice lattice_;
    std::vector<Eigen::MatrixXcd> blocks_;
    std::vector<Eigen::LLT<Eigen::MatrixXcd>> factors_;
    std::shared_ptr<const Fft2> fft_;
    double max_condition_ = 0.0;
    Eigen::VectorXd zero_eigs_;
};

/// Throws PreconditionerError (with that block's eigenvalues) if a corrected
/// block is not positive definite.
StrangPreconditioner build_strang(const MatrixSymbol& sym, const BlockLattice& lattice);

/// Conjugate gradient. Throws IndefiniteOperatorError on breakdown.
SolveResult cg(const LinearOperator& a, const Eigen::VectorXd& b, const Eigen::VectorXd& x0,
               const SolveOptions& options = {});
/// Preconditioned conjugate gradient with a symmetric positive definite preconditioner.
SolveResult pcg(const LinearOperator& a, const Preconditioner& precond, const Eigen::VectorXd& b,
                const Eigen::VectorXd& x0, const SolveOptions& options = {});

/// Operator application as a LinearOperator.
LinearOperator as_operator(const PressureOperator& op);

/// Smooth pseudo-random right-hand side on the nodal points of the degree-p
/// DG grid: a sum of low Fourier modes with uniformly drawn amplitudes and
/// phases damped like 1/(k1^2 + k2^2). Periodic boundary conditions use
/// integer periods and subtract the mean, so the result is orthogonal to the
/// constants. Depends only on (lattice, p, bc, seed).
Eigen::VectorXd smooth_rhs(const BlockLattice& lattice, int p, BoundaryCondition bc, std::uint64_t seed);

/// Removes the mean, i.e. projects orthogonally to the all-ones vector.
Eigen::VectorXd project_mean_zero(const Eigen::VectorXd& v);

enum class GuessMode { Trivial, Warm };
std::string to_string(GuessMode mode);

struct BenchConfig {
    int p = 2;
    BoundaryCondition bc = BoundaryCondition::Dirichlet;
    bool run_cg = true;
    bool run_pcg = true;
    int steps = 10;
    /// ||delta b|| relative to ||b||.
    double drift = 1e-2;
    double tolerance = kDefaultTolerance;
    std::uint64_t seed = 42;
    /// Rows run on this many threads (0 = hardware concurrency).
    unsigned threads = 1;
};

struct BenchRow {
    int n = 0;
    std::size_t N = 0;
    std::string solver;
    GuessMode guess = GuessMode::Trivial;
    std::vector<std::size_t> iterations;  ///< per step
    double avg_iters = 0.0;
    double avg_ms = 0.0;
    bool converged_all = false;
    std::string error;  ///< non-empty if the row failed
};

/// For each n: assembles K_N, builds the sequence b_t = b + t * delta_b for
/// t = 0..steps-1 and solves each system with x0 = b_t (trivial guess) and with
/// x0 = the previous solution (warm guess; the first step uses b_0). Both modes
/// stop at ||r_k|| <= tolerance * ||b_t - K b_t||, the residual of the trivial
/// guess, so the two columns measure the same final accuracy. Per-row failures
/// are recorded in BenchRow::error. Row order: n, then cg before pcg, then
/// trivial before warm.
std::vector<BenchRow> bench_iterations(const std::vector<int>& sizes, const BenchConfig& config);

/// Header "n,N,solver,guess_mode,avg_iters,avg_ms,converged_all"; avg_ms is left
/// empty unless `timings` is set, so the output is reproducible by default.
void write_bench_csv(std::ostream& out, const std::vector<BenchRow>& rows, bool timings = false);

} // namespace toeplab
