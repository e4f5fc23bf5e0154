#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <nlohmann/json.hpp>

#include "toeplab/dg_assembly.hpp"
#include "toeplab/structured.hpp"
#include "toeplab/symbol.hpp"

namespace toeplab {

/// Largest order accepted by the dense eigensolver wrappers.
inline constexpr std::size_t kSpectrumGuard = 20000;
/// Slack applied at both ends of a closed interval [m, M].
inline constexpr double kIntervalSlack = 1e-12;
/// Grid size of the reference sample for the eigenvalue-function ranges.
inline constexpr int kReferenceGridSize = 500;

/// Ascending eigenvalues; throws GuardExceeded above `guard` rows.
Eigen::VectorXd dense_spectrum(const Eigen::MatrixXd& a, std::size_t guard = kSpectrumGuard);
Eigen::VectorXd dense_spectrum(const PressureOperator& op, std::size_t guard = kSpectrumGuard);
Eigen::VectorXd dense_spectrum(const BlockToeplitz& t, std::size_t guard = kSpectrumGuard);

/// Smallest eigenvalue of a sparse symmetric positive definite matrix by
/// Lanczos on the inverse (sparse LDL^T factorization, full
/// reorthogonalization). Throws std::domain_error if the matrix is not
/// positive definite.
double lowest_eigenvalue(const Eigen::SparseMatrix<double>& a);

/// Consecutive eigenvalue functions l = first..last (0-based) whose ranges
/// chain together, with the union [lo, hi] of their ranges.
struct IntervalGroup {
    int first = 0;
    int last = 0;
    double lo = 0.0;
    double hi = 0.0;

    int size() const { return last - first + 1; }
    bool contains(double x) const { return x >= lo - kIntervalSlack && x <= hi + kIntervalSlack; }
};

/// Merges l and l+1 whenever M_l > m_{l+1} + kIntervalSlack. Ranges that
/// only touch stay apart.
std::vector<IntervalGroup> interval_groups(const std::vector<std::pair<double, double>>& ranges);

struct IntervalCount {
    IntervalGroup group;
    std::size_t count = 0;
    std::size_t expected = 0;  ///< group size times n_hat

    long long excess() const { return static_cast<long long>(count) - static_cast<long long>(expected); }
};

/// Eigenvalues in each closed group interval (with slack).
std::vector<IntervalCount> interval_counts(const Eigen::VectorXd& eigs, const std::vector<IntervalGroup>& groups,
                                           std::size_t n_hat);

/// Ranges [m_l, M_l] of the eigenvalue functions on a reference grid.
struct ReferenceIntervals {
    std::uint64_t fingerprint = 0;
    int n = 0;
    GridKind grid = GridKind::Half;
    std::vector<std::pair<double, double>> ranges;
    bool from_cache = false;

    nlohmann::json to_json() const;
};

/// GLT_CACHE_DIR if set, else $XDG_CACHE_HOME/toeplab, else $HOME/.cache/toeplab.
std::optional<std::filesystem::path> default_cache_dir();

/// Samples the symbol on the reference grid, or loads a previous result
/// stored under `cache_dir` for the same (fingerprint, n, grid). A cache
/// entry whose recorded fingerprint differs is recomputed and replaced.
/// Cache write failures are ignored.
ReferenceIntervals reference_intervals(const MatrixSymbol& sym, int n = kReferenceGridSize,
                                       GridKind grid = GridKind::Half,
                                       const std::optional<std::filesystem::path>& cache_dir = default_cache_dir());

/// Nearest-sample assignment of a block of eigenvalues.
struct MatchResult {
    std::vector<std::size_t> sample;   ///< index into the sample list
    std::vector<double> residual;      ///< |lambda - sample value|
    std::vector<double> spacing;       ///< local gap of the sorted samples at the match
};

/// For each eigenvalue the nearest sample value; ties go to the lowest sample
/// index. Throws std::invalid_argument on empty inputs.
MatchResult match_eigs(std::span<const double> block, std::span<const double> samples);

struct OutlierCounts {
    /// (a) expected n_hat minus the count in the first group.
    long long deficit = 0;
    /// (b) eigenvalues above the largest range maximum plus slack.
    std::size_t exceedance = 0;
    /// (c) eigenvalues whose matching residual exceeds the local sample spacing.
    std::size_t residual = 0;

    nlohmann::json to_json() const;
};

/// Operator spectrum compared with the symbol: interval counts against the
/// reference ranges, the block partition of the sorted eigenvalues into
/// group-sized pieces, their matching against the group's samples on the
/// operator's own grid, and the outlier counts.
struct SpectralReport {
    std::string matrix_id;
    BlockLattice lattice;
    Eigen::VectorXd eigenvalues;
    ReferenceIntervals reference;
    std::vector<IntervalGroup> groups;
    std::vector<IntervalCount> counts;
    /// Per eigenvalue (ascending order): partition block, matched branch l
    /// (0-based), matched node j * n + k, residual, local spacing.
    std::vector<int> block;
    std::vector<int> branch;
    std::vector<std::size_t> node;
    std::vector<double> residual;
    std::vector<double> spacing;
    OutlierCounts outliers;

    bool above_max(std::size_t i) const;
    bool residual_outlier(std::size_t i) const { return residual[i] > spacing[i]; }

    /// Summary JSON; eigenvalue rows are included when `with_rows` is set.
    nlohmann::json to_json(bool with_rows = false) const;
    /// Header "index,value,block,branch,j,k,residual,above_max,residual_outlier".
    void write_csv(std::ostream& out) const;
};

/// Requires a square lattice with n1 == n2 and eigs.size() == N.
SpectralReport spectral_report(std::string matrix_id, const BlockLattice& lattice, Eigen::VectorXd eigs,
                               const MatrixSymbol& sym, const ReferenceIntervals& reference);

/// Outlier counts without the matching step: (c) is left at zero.
OutlierCounts outlier_report(const Eigen::VectorXd& eigs, const ReferenceIntervals& reference, std::size_t n_hat);

struct MinEigPoint {
    std::size_t n_hat = 0;
    double lambda_min = 0.0;
};

struct ScalingFit {
    double slope = 0.0;
    double intercept = 0.0;
};

/// Least-squares fit of log lambda_min against log n_hat. Needs at least three
/// points with positive values and two distinct sizes; throws std::invalid_argument otherwise.
ScalingFit minimal_eig_scaling(const std::vector<MinEigPoint>& family);

} // namespace toeplab
