#include "toeplab/spectra.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <limits>
#include <numeric>
#include <random>
#include <stdexcept>
#include <system_error>

#include <Eigen/SparseCholesky>

#include "toeplab/dense_eig.hpp"
#include "toeplab/io.hpp"

namespace toeplab {

namespace {

void check_order(std::size_t order, std::size_t guard) {
    if (order > guard) {
        throw GuardExceeded("dense eigensolve of order " + std::to_string(order) + " exceeds the guard of " +
                            std::to_string(guard) + " rows");
    }
}

std::string hex64(std::uint64_t v) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

std::optional<ReferenceIntervals> load_cached(const std::filesystem::path& file, std::uint64_t fingerprint, int n,
                                              GridKind grid) {
    std::ifstream in(file);
    if (!in) return std::nullopt;
    try {
        const auto doc = nlohmann::json::parse(in);
        if (doc.at("fingerprint").get<std::string>() != hex64(fingerprint) || doc.at("n").get<int>() != n ||
            parse_grid_kind(doc.at("grid").get<std::string>()) != grid) {
            return std::nullopt;
        }
        ReferenceIntervals ref;
        ref.fingerprint = fingerprint;
        ref.n = n;
        ref.grid = grid;
        for (const auto& r : doc.at("ranges")) ref.ranges.emplace_back(r.at(0).get<double>(), r.at(1).get<double>());
        if (ref.ranges.empty()) return std::nullopt;
        ref.from_cache = true;
        return ref;
    } catch (const std::exception&) {
        return std::nullopt;
    }
}

void store_cached(const std::filesystem::path& dir, const std::filesystem::path& file, const ReferenceIntervals& ref) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) return;
    const auto tmp = file.string() + ".tmp";
    {
        std::ofstream out(tmp);
        if (!out) return;
        out << ref.to_json().dump(2) << "\n";
        if (!out) return;
    }
    std::filesystem::rename(tmp, file, ec);
    if (ec) std::filesystem::remove(tmp, ec);
}

double max_range_top(const ReferenceIntervals& ref) {
    double top = -std::numeric_limits<double>::infinity();
    for (const auto& r : ref.ranges) top = std::max(top, r.second);
    return top;
}

} // namespace

Eigen::VectorXd dense_spectrum(const Eigen::MatrixXd& a, std::size_t guard) {
    check_order(static_cast<std::size_t>(a.rows()), guard);
    return symmetric_eigenvalues(a);
}

Eigen::VectorXd dense_spectrum(const PressureOperator& op, std::size_t guard) {
    check_order(op.lattice().N(), guard);
    return symmetric_eigenvalues(op.dense(guard));
}

Eigen::VectorXd dense_spectrum(const BlockToeplitz& t, std::size_t guard) {
    check_order(t.lattice().N(), guard);
    return symmetric_eigenvalues(toeplitz_dense(t.symbol(), t.lattice(), guard));
}

double lowest_eigenvalue(const Eigen::SparseMatrix<double>& a) {
    if (a.rows() != a.cols() || a.rows() == 0) throw std::invalid_argument("lowest_eigenvalue: matrix must be square and non-empty");
    Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> ldlt(a);
    if (ldlt.info() != Eigen::Success || !(ldlt.vectorD().minCoeff() > 0.0)) {
        throw std::domain_error("lowest_eigenvalue: matrix is not positive definite");
    }
    const Eigen::Index n = a.rows();
    const Eigen::Index max_steps = std::min<Eigen::Index>(n, 150);
    Eigen::MatrixXd v(n, max_steps + 1);
    std::mt19937_64 rng(0x5eed);
    std::uniform_real_distribution<double> uni(-1.0, 1.0);
    for (Eigen::Index i = 0; i < n; ++i) v(i, 0) = uni(rng);
    v.col(0).normalize();

    std::vector<double> alpha, beta;
    double theta = 0.0;
    for (Eigen::Index k = 0; k < max_steps; ++k) {
        Eigen::VectorXd w = ldlt.solve(v.col(k));
        alpha.push_back(w.dot(v.col(k)));
        // Two passes of classical Gram-Schmidt against the whole basis.
        for (int pass = 0; pass < 2; ++pass) w -= v.leftCols(k + 1) * (v.leftCols(k + 1).transpose() * w);
        const double b = w.norm();

        const auto m = static_cast<Eigen::Index>(alpha.size());
        Eigen::VectorXd diag = Eigen::Map<const Eigen::VectorXd>(alpha.data(), m);
        Eigen::VectorXd sub = m > 1 ? Eigen::VectorXd(Eigen::Map<const Eigen::VectorXd>(beta.data(), m - 1))
                                    : Eigen::VectorXd(0);
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> tri;
        tri.computeFromTridiagonal(diag, sub, Eigen::ComputeEigenvectors);
        theta = tri.eigenvalues()(m - 1);
        const double ritz_residual = std::abs(b * tri.eigenvectors()(m - 1, m - 1));
        if (ritz_residual <= 1e-13 * theta || b <= std::numeric_limits<double>::epsilon() * theta) break;
        beta.push_back(b);
        v.col(k + 1) = w / b;
    }
    return 1.0 / theta;
}

std::vector<IntervalGroup> interval_groups(const std::vector<std::pair<double, double>>& ranges) {
    std::vector<IntervalGroup> groups;
    for (int l = 0; l < static_cast<int>(ranges.size()); ++l) {
        const auto [lo, hi] = ranges[static_cast<std::size_t>(l)];
        if (!groups.empty() && groups.back().hi > lo + kIntervalSlack) {
            auto& g = groups.back();
            g.last = l;
            g.lo = std::min(g.lo, lo);
            g.hi = std::max(g.hi, hi);
        } else {
            groups.push_back({l, l, lo, hi});
        }
    }
    return groups;
}

std::vector<IntervalCount> interval_counts(const Eigen::VectorXd& eigs, const std::vector<IntervalGroup>& groups,
                                           std::size_t n_hat) {
    std::vector<IntervalCount> out;
    out.reserve(groups.size());
    for (const auto& g : groups) {
        IntervalCount c{g, 0, static_cast<std::size_t>(g.size()) * n_hat};
        for (Eigen::Index i = 0; i < eigs.size(); ++i)
            if (g.contains(eigs(i))) ++c.count;
        out.push_back(c);
    }
    return out;
}

nlohmann::json ReferenceIntervals::to_json() const {
    nlohmann::json r = nlohmann::json::array();
    for (const auto& [lo, hi] : ranges) r.push_back({lo, hi});
    return {{"fingerprint", hex64(fingerprint)}, {"n", n}, {"grid", to_string(grid)}, {"ranges", std::move(r)}};
}

std::optional<std::filesystem::path> default_cache_dir() {
    if (const char* dir = std::getenv("GLT_CACHE_DIR"); dir != nullptr && *dir != '\0') return std::filesystem::path(dir);
    if (const char* xdg = std::getenv("XDG_CACHE_HOME"); xdg != nullptr && *xdg != '\0') {
        return std::filesystem::path(xdg) / "toeplab";
    }
    if (const char* home = std::getenv("HOME"); home != nullptr && *home != '\0') {
        return std::filesystem::path(home) / ".cache" / "toeplab";
    }
    return std::nullopt;
}

ReferenceIntervals reference_intervals(const MatrixSymbol& sym, int n, GridKind grid,
                                       const std::optional<std::filesystem::path>& cache_dir) {
    if (n < 1) throw std::invalid_argument("reference grid size must be positive");
    const std::uint64_t fp = sym.fingerprint();
    std::optional<std::filesystem::path> file;
    if (cache_dir) {
        file = *cache_dir / ("intervals-" + hex64(fp) + "-" + to_string(grid) + "-" + std::to_string(n) + ".json");
        if (auto cached = load_cached(*file, fp, n, grid)) return *cached;
    }
    const EigenSample sample = sample_eigs(sym, n, grid);
    ReferenceIntervals ref;
    ref.fingerprint = fp;
    ref.n = n;
    ref.grid = grid;
    ref.ranges = sample.intervals;
    if (file) store_cached(*cache_dir, *file, ref);
    return ref;
}

MatchResult match_eigs(std::span<const double> block, std::span<const double> samples) {
    if (block.empty() || samples.empty()) throw std::invalid_argument("match_eigs: empty input");
    std::vector<std::size_t> order(samples.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return samples[a] < samples[b]; });
    std::vector<double> v(samples.size());
    for (std::size_t i = 0; i < order.size(); ++i) v[i] = samples[order[i]];
    const auto first_of = [&](double x) {
        return static_cast<std::size_t>(std::lower_bound(v.begin(), v.end(), x) - v.begin());
    };

    MatchResult out;
    out.sample.reserve(block.size());
    out.residual.reserve(block.size());
    out.spacing.reserve(block.size());
    for (const double lambda : block) {
        const std::size_t pos = first_of(lambda);
        std::size_t chosen;
        if (pos == v.size()) {
            chosen = first_of(v.back());
        } else if (pos == 0) {
            chosen = 0;
        } else {
            const std::size_t left = first_of(v[pos - 1]);
            const double dl = lambda - v[left];
            const double dr = v[pos] - lambda;
            if (dl < dr) chosen = left;
            else if (dr < dl) chosen = pos;
            else chosen = order[left] < order[pos] ? left : pos;
        }
        const std::size_t run_end =
            static_cast<std::size_t>(std::upper_bound(v.begin(), v.end(), v[chosen]) - v.begin());
        double spacing = 0.0;
        if (chosen > 0) spacing = std::max(spacing, v[chosen] - v[chosen - 1]);
        if (run_end < v.size()) spacing = std::max(spacing, v[run_end] - v[chosen]);
        out.sample.push_back(order[chosen]);
        out.residual.push_back(std::abs(lambda - v[chosen]));
        out.spacing.push_back(spacing);
    }
    return out;
}

nlohmann::json OutlierCounts::to_json() const {
    return {{"deficit", deficit}, {"exceedance", exceedance}, {"residual", residual}};
}

OutlierCounts outlier_report(const Eigen::VectorXd& eigs, const ReferenceIntervals& reference, std::size_t n_hat) {
    OutlierCounts out;
    const auto groups = interval_groups(reference.ranges);
    if (!groups.empty()) {
        const auto counts = interval_counts(eigs, {groups.front()}, n_hat);
        out.deficit = -counts.front().excess();
    }
    const double top = max_range_top(reference);
    for (Eigen::Index i = 0; i < eigs.size(); ++i)
        if (eigs(i) > top + kIntervalSlack) ++out.exceedance;
    return out;
}

bool SpectralReport::above_max(std::size_t i) const {
    return eigenvalues(static_cast<Eigen::Index>(i)) > max_range_top(reference) + kIntervalSlack;
}

SpectralReport spectral_report(std::string matrix_id, const BlockLattice& lattice, Eigen::VectorXd eigs,
                               const MatrixSymbol& sym, const ReferenceIntervals& reference) {
    if (lattice.n1 != lattice.n2) throw std::invalid_argument("spectral_report: the lattice must be square");
    if (static_cast<std::size_t>(eigs.size()) != lattice.N()) {
        throw std::invalid_argument("spectral_report: eigenvalue count does not match the lattice");
    }
    if (static_cast<int>(reference.ranges.size()) != lattice.s || sym.block_size() != lattice.s) {
        throw std::invalid_argument("spectral_report: block size mismatch");
    }
    std::sort(eigs.begin(), eigs.end());

    SpectralReport r;
    r.matrix_id = std::move(matrix_id);
    r.lattice = lattice;
    r.eigenvalues = std::move(eigs);
    r.reference = reference;
    r.groups = interval_groups(reference.ranges);
    const std::size_t n_hat = lattice.n_hat();
    r.counts = interval_counts(r.eigenvalues, r.groups, n_hat);
    r.outliers = outlier_report(r.eigenvalues, reference, n_hat);

    const std::size_t N = lattice.N();
    r.block.resize(N);
    r.branch.resize(N);
    r.node.resize(N);
    r.residual.resize(N);
    r.spacing.resize(N);

    const EigenSample local = sample_eigs(sym, lattice.n1, reference.grid);
    std::size_t start = 0;
    for (std::size_t t = 0; t < r.groups.size(); ++t) {
        const auto& g = r.groups[t];
        const std::size_t len = static_cast<std::size_t>(g.size()) * n_hat;
        std::vector<double> samples;
        samples.reserve(len);
        for (int l = g.first; l <= g.last; ++l) {
            const auto& vals = local.values[static_cast<std::size_t>(l)];
            samples.insert(samples.end(), vals.begin(), vals.end());
        }
        const auto match = match_eigs(std::span<const double>(r.eigenvalues.data() + start, len), samples);
        for (std::size_t i = 0; i < len; ++i) {
            const std::size_t e = start + i;
            r.block[e] = static_cast<int>(t);
            r.branch[e] = g.first + static_cast<int>(match.sample[i] / n_hat);
            r.node[e] = match.sample[i] % n_hat;
            r.residual[e] = match.residual[i];
            r.spacing[e] = match.spacing[i];
            if (r.residual_outlier(e)) ++r.outliers.residual;
        }
        start += len;
    }
    return r;
}

nlohmann::json SpectralReport::to_json(bool with_rows) const {
    nlohmann::json doc;
    doc["matrix"] = matrix_id;
    doc["n"] = {lattice.n1, lattice.n2};
    doc["s"] = lattice.s;
    doc["N"] = lattice.N();
    doc["reference"] = reference.to_json();
    nlohmann::json g = nlohmann::json::array();
    for (const auto& c : counts) {
        g.push_back({{"l", {c.group.first + 1, c.group.last + 1}},
                     {"interval", {c.group.lo, c.group.hi}},
                     {"count", c.count},
                     {"expected", c.expected}});
    }
    doc["groups"] = std::move(g);
    doc["outliers"] = outliers.to_json();
    doc["lambda_min"] = eigenvalues.size() > 0 ? eigenvalues(0) : 0.0;
    doc["lambda_max"] = eigenvalues.size() > 0 ? eigenvalues(eigenvalues.size() - 1) : 0.0;
    if (with_rows) {
        nlohmann::json rows = nlohmann::json::array();
        for (std::size_t i = 0; i < residual.size(); ++i) {
            rows.push_back({{"value", eigenvalues(static_cast<Eigen::Index>(i))},
                            {"block", block[i] + 1},
                            {"branch", branch[i] + 1},
                            {"node", node[i]},
                            {"residual", residual[i]}});
        }
        doc["eigenvalues"] = std::move(rows);
    }
    return doc;
}

void SpectralReport::write_csv(std::ostream& out) const {
    out << "index,value,block,branch,j,k,residual,above_max,residual_outlier\n";
    const auto n = static_cast<std::size_t>(lattice.n2);
    for (std::size_t i = 0; i < residual.size(); ++i) {
        out << i + 1 << "," << format_double(eigenvalues(static_cast<Eigen::Index>(i))) << "," << block[i] + 1 << ","
            << branch[i] + 1 << "," << node[i] / n << "," << node[i] % n << "," << format_double(residual[i]) << ","
            << (above_max(i) ? 1 : 0) << "," << (residual_outlier(i) ? 1 : 0) << "\n";
    }
}

ScalingFit minimal_eig_scaling(const std::vector<MinEigPoint>& family) {
    if (family.size() < 3) throw std::invalid_argument("minimal_eig_scaling: need at least three sizes");
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (const auto& p : family) {
        if (p.n_hat == 0 || !(p.lambda_min > 0.0)) {
            throw std::invalid_argument("minimal_eig_scaling: sizes and eigenvalues must be positive");
        }
        const double x = std::log(static_cast<double>(p.n_hat));
        const double y = std::log(p.lambda_min);
        sx += x;
        sy += y;
        sxx += x * x;
        sxy += x * y;
    }
    const auto m = static_cast<double>(family.size());
    const double denom = m * sxx - sx * sx;
    if (!(denom > 1e-12 * m * sxx)) throw std::invalid_argument("minimal_eig_scaling: degenerate fit (one size only)");
    ScalingFit fit;
    fit.slope = (m * sxy - sx * sy) / denom;
    fit.intercept = (sy - fit.slope * sx) / m;
    return fit;
}

} // namespace toeplab
