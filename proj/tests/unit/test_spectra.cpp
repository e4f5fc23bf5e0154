#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "helpers.hpp"
#include "toeplab/dense_eig.hpp"
#include "toeplab/dg_assembly.hpp"
#include "toeplab/spectra.hpp"

using namespace toeplab;
using testing::constant_symbol;
using testing::scalar_laplace;

namespace {

const ReferenceIntervals& builtin_reference() {
    static const ReferenceIntervals ref = reference_intervals(builtin_dg_symbol(2), kReferenceGridSize, GridKind::Half,
                                                              std::nullopt);
    return ref;
}

PressureOperator dirichlet(int n) {
    return assemble_pressure_operator(build_basis(2), n, n, BoundaryCondition::Dirichlet);
}

std::filesystem::path fresh_dir(const std::string& name) {
    auto dir = std::filesystem::temp_directory_path() / ("toeplab-test-" + name);
    std::filesystem::remove_all(dir);
    return dir;
}

double median(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    return v[v.size() / 2];
}

/// Mean of a tent function over a list of values.
double tent_mean(const std::vector<double>& values, double c, double w) {
    double sum = 0.0;
    for (double x : values) sum += std::max(0.0, 1.0 - std::abs(x - c) / w);
    return sum / static_cast<double>(values.size());
}

std::vector<double> all_sample_values(const EigenSample& s) {
    std::vector<double> out;
    for (const auto& v : s.values) out.insert(out.end(), v.begin(), v.end());
    return out;
}

} // namespace

TEST_CASE("dense spectrum of small operators") {
    const Eigen::VectorXd k = dense_spectrum(dirichlet(4));
    CHECK(k.size() == 144);
    CHECK(k(0) > 0.0);
    CHECK(std::is_sorted(k.begin(), k.end()));

    const auto& ref = builtin_reference();
    const Eigen::VectorXd t = dense_spectrum(BlockToeplitz(builtin_dg_symbol(2), 4, 4));
    CHECK(t(0) > ref.ranges.front().first);
    CHECK(t(t.size() - 1) < ref.ranges.back().second);

    const Eigen::VectorXd ones = dense_spectrum(Eigen::MatrixXd::Identity(7, 7));
    CHECK((ones.array() - 1.0).abs().maxCoeff() <= 1e-15);

    CHECK_THROWS_AS(dense_spectrum(Eigen::MatrixXd::Identity(5, 5), 4), GuardExceeded);
    CHECK_THROWS_AS(dense_spectrum(dirichlet(48)), GuardExceeded);
}

TEST_CASE("reference ranges group as the four chains of the builtin symbol") {
    const auto groups = interval_groups(builtin_reference().ranges);
    REQUIRE(groups.size() == 4);
    const int first[] = {0, 1, 3, 6};
    const int last[] = {0, 2, 5, 8};
    for (std::size_t t = 0; t < 4; ++t) {
        CHECK(groups[t].first == first[t]);
        CHECK(groups[t].last == last[t]);
    }
    // Touching ranges stay apart, overlapping ones merge.
    const auto touch = interval_groups({{0.0, 1.0}, {1.0, 2.0}, {1.5, 3.0}});
    REQUIRE(touch.size() == 2);
    CHECK(touch[1].first == 1);
    CHECK(touch[1].hi == 3.0);
}

TEST_CASE("interval counts") {
    Eigen::VectorXd e(5);
    e << -1.0, 0.0, 0.5, 1.0 + 5e-13, 7.0;
    const IntervalGroup everything{0, 0, -1e300, 1e300};
    CHECK(interval_counts(e, {everything}, 5).front().count == 5);
    const IntervalGroup unit{0, 0, 0.0, 1.0};
    const auto c = interval_counts(e, {unit}, 2).front();
    CHECK(c.count == 3);
    CHECK(c.expected == 2);
    CHECK(c.excess() == 1);
}

TEST_CASE("Dirichlet operator counts at n = 10 and 15") {
    const auto& ref = builtin_reference();
    const std::size_t expected_first[] = {64, 169};
    const long long expected_deficit[] = {36, 56};
    int row = 0;
    for (int n : {10, 15}) {
        const SpectralReport r =
            spectral_report("K", BlockLattice(n, n, 9), dense_spectrum(dirichlet(n)), builtin_dg_symbol(2), ref);
        CHECK(r.counts.front().count == expected_first[row]);
        CHECK(r.outliers.deficit == expected_deficit[row]);
        CHECK(r.outliers.exceedance == static_cast<std::size_t>(4 * n));
        const double ratio = static_cast<double>(r.outliers.deficit) / std::sqrt(9.0 * n * n);
        CHECK(ratio >= 1.1);
        CHECK(ratio <= 1.4);
        ++row;
    }
}

TEST_CASE("block partition sizes") {
    const int n = 6;
    const SpectralReport r =
        spectral_report("K", BlockLattice(n, n, 9), dense_spectrum(dirichlet(n)), builtin_dg_symbol(2), builtin_reference());
    std::vector<std::size_t> sizes(r.groups.size(), 0);
    for (int b : r.block) ++sizes[static_cast<std::size_t>(b)];
    REQUIRE(sizes.size() == 4);
    CHECK(sizes[0] == 36);
    CHECK(sizes[1] == 72);
    CHECK(sizes[2] == 108);
    CHECK(sizes[3] == 108);
    std::size_t total = 0;
    for (auto s : sizes) total += s;
    CHECK(total == r.lattice.N());
    // Matched branches stay inside their block's chain.
    for (std::size_t i = 0; i < r.block.size(); ++i) {
        const auto& g = r.groups[static_cast<std::size_t>(r.block[i])];
        CHECK(r.branch[i] >= g.first);
        CHECK(r.branch[i] <= g.last);
    }
}

TEST_CASE("matching") {
    const std::vector<double> samples{3.0, 1.0, 2.0, 1.0, 5.0};
    const auto same = match_eigs(samples, samples);
    for (std::size_t i = 0; i < samples.size(); ++i) {
        CHECK(same.residual[i] == 0.0);
        CHECK(samples[same.sample[i]] == samples[i]);
    }
    // Duplicate values resolve to the lowest index.
    CHECK(same.sample[3] == 1);
    // Equidistant: 1.5 is as close to 1 (index 1) as to 2 (index 2).
    const std::vector<double> mid{1.5, 4.0, 9.0};
    const auto m = match_eigs(mid, samples);
    CHECK(m.sample[0] == 1);
    CHECK(m.sample[1] == 0);
    CHECK(m.residual[1] == 1.0);
    CHECK(m.sample[2] == 4);
    CHECK(m.residual[2] == 4.0);
    CHECK(m.spacing[2] == 2.0);

    CHECK_THROWS_AS(match_eigs({}, samples), std::invalid_argument);
    CHECK_THROWS_AS(match_eigs(samples, {}), std::invalid_argument);
}

TEST_CASE("circulant eigenvalues are exact samples on the periodic grid") {
    const int n = 12;
    const BlockCirculant c(scalar_laplace(), n, n);
    const Eigen::VectorXd e = circulant_eigenvalues(c);
    const EigenSample s = sample_eigs(scalar_laplace(), n, GridKind::Periodic);
    const auto m = match_eigs(std::span<const double>(e.data(), static_cast<std::size_t>(e.size())), s.values[0]);
    for (double r : m.residual) CHECK(r <= 1e-12);

    const MatrixSymbol f = builtin_dg_symbol(2);
    const Eigen::VectorXd eb = circulant_eigenvalues(BlockCirculant(f, 6, 6));
    const auto mb = match_eigs(std::span<const double>(eb.data(), static_cast<std::size_t>(eb.size())),
                               all_sample_values(sample_eigs(f, 6, GridKind::Periodic)));
    for (double r : mb.residual) CHECK(r <= 1e-12);
}

TEST_CASE("samples used as eigenvalues produce no outliers") {
    const int n = 8;
    const MatrixSymbol f = builtin_dg_symbol(2);
    const EigenSample s = sample_eigs(f, n, GridKind::Half);
    ReferenceIntervals ref;
    ref.n = n;
    ref.ranges = s.intervals;
    const auto values = all_sample_values(s);
    const Eigen::VectorXd eigs = Eigen::Map<const Eigen::VectorXd>(values.data(), static_cast<Eigen::Index>(values.size()));
    const SpectralReport r = spectral_report("samples", BlockLattice(n, n, 9), eigs, f, ref);
    CHECK(r.outliers.deficit == 0);
    CHECK(r.outliers.exceedance == 0);
    CHECK(r.outliers.residual == 0);
    for (double x : r.residual) CHECK(x == 0.0);
}

TEST_CASE("matching residuals of regular eigenvalues shrink as n doubles") {
    const auto& ref = builtin_reference();
    const MatrixSymbol f = builtin_dg_symbol(2);
    std::vector<double> medians;
    for (int n : {6, 12}) {
        const SpectralReport r = spectral_report("K", BlockLattice(n, n, 9), dense_spectrum(dirichlet(n)), f, ref);
        std::vector<double> regular;
        for (std::size_t i = 0; i < r.residual.size(); ++i)
            if (!r.residual_outlier(i) && !r.above_max(i)) regular.push_back(r.residual[i]);
        medians.push_back(median(regular));
    }
    CHECK(medians[1] < medians[0]);
}

TEST_CASE("spectral distribution: tent averages approach the symbol samples") {
    const std::pair<double, double> tents[] = {{0.1, 0.1}, {0.45, 0.2}, {1.2, 0.5}, {3.0, 2.0}};
    const MatrixSymbol f = builtin_dg_symbol(2);
    for (const auto [c, w] : tents) {
        std::vector<double> gaps;
        for (int n : {4, 8, 16}) {
            const Eigen::VectorXd e = dense_spectrum(BlockToeplitz(f, n, n));
            const std::vector<double> eigs(e.begin(), e.end());
            gaps.push_back(std::abs(tent_mean(eigs, c, w) - tent_mean(all_sample_values(sample_eigs(f, n, GridKind::Half)), c, w)));
        }
        CHECK(gaps[1] < gaps[0]);
        CHECK(gaps[2] < gaps[1]);
    }
    const MatrixSymbol lap = scalar_laplace();
    for (const auto [c, w] : {std::pair{0.5, 0.5}, std::pair{2.0, 1.0}}) {
        std::vector<double> gaps;
        for (int n : {8, 16, 32}) {
            const Eigen::VectorXd e = dense_spectrum(BlockToeplitz(lap, n, n));
            const std::vector<double> eigs(e.begin(), e.end());
            gaps.push_back(std::abs(tent_mean(eigs, c, w) - tent_mean(sample_eigs(lap, n, GridKind::Half).values[0], c, w)));
        }
        CHECK(gaps[1] < gaps[0]);
        CHECK(gaps[2] < gaps[1]);
    }
}

TEST_CASE("Lanczos lowest eigenvalue agrees with the dense solver") {
    const MatrixSymbol f = builtin_dg_symbol(2);
    const BlockLattice lat(8, 8, 9);
    const double lanczos = lowest_eigenvalue(toeplitz_sparse(f, lat));
    const double dense = dense_spectrum(BlockToeplitz(f, 8, 8))(0);
    CHECK(std::abs(lanczos - dense) <= 1e-10 * dense);

    const PressureOperator k = dirichlet(8);
    const double k_min = lowest_eigenvalue(k.sparse());
    CHECK(std::abs(k_min - dense_spectrum(k)(0)) <= 1e-10 * k_min);
    // The boundary part is positive semidefinite, so it can only raise the bottom.
    CHECK(lanczos <= k_min);

    Eigen::SparseMatrix<double> indefinite(2, 2);
    indefinite.insert(0, 0) = 1.0;
    indefinite.insert(1, 1) = -1.0;
    CHECK_THROWS_AS(lowest_eigenvalue(indefinite), std::domain_error);
}

TEST_CASE("decay of the minimal eigenvalue") {
    const MatrixSymbol f = builtin_dg_symbol(2);
    std::vector<MinEigPoint> family;
    for (int n : {8, 16, 32}) {
        const BlockLattice lat(n, n, 9);
        const double t_min = lowest_eigenvalue(toeplitz_sparse(f, lat));
        family.push_back({lat.n_hat(), t_min});
        const double k_min = lowest_eigenvalue(dirichlet(n).sparse());
        CHECK(t_min <= k_min);
    }
    CHECK(minimal_eig_scaling(family).slope == doctest::Approx(-1.0).epsilon(0.1));

    std::vector<MinEigPoint> scalar;
    for (int n : {16, 32, 64}) {
        const BlockLattice lat(n, n, 1);
        scalar.push_back({lat.n_hat(), lowest_eigenvalue(toeplitz_sparse(scalar_laplace(), lat))});
    }
    CHECK(minimal_eig_scaling(scalar).slope == doctest::Approx(-1.0).epsilon(0.1));

    std::vector<MinEigPoint> flat;
    for (int n : {4, 8, 16}) {
        const BlockLattice lat(n, n, 2);
        const double lmin = lowest_eigenvalue(toeplitz_sparse(constant_symbol(Eigen::MatrixXd::Identity(2, 2)), lat));
        CHECK(lmin == doctest::Approx(1.0));
        flat.push_back({lat.n_hat(), lmin});
    }
    CHECK(std::abs(minimal_eig_scaling(flat).slope) <= 1e-12);

    CHECK_THROWS_AS(minimal_eig_scaling({{4, 1.0}, {16, 0.5}}), std::invalid_argument);
    CHECK_THROWS_AS(minimal_eig_scaling({{4, 1.0}, {4, 0.5}, {4, 0.7}}), std::invalid_argument);
    CHECK_THROWS_AS(minimal_eig_scaling({{4, 1.0}, {8, 0.0}, {16, 0.7}}), std::invalid_argument);
}

TEST_CASE("reference ranges are cached by fingerprint, size and grid") {
    const auto dir = fresh_dir("cache");
    const MatrixSymbol f = builtin_dg_symbol(2);
    const ReferenceIntervals first = reference_intervals(f, 40, GridKind::Half, dir);
    CHECK_FALSE(first.from_cache);
    const ReferenceIntervals second = reference_intervals(f, 40, GridKind::Half, dir);
    CHECK(second.from_cache);
    CHECK(second.ranges == first.ranges);
    CHECK_FALSE(reference_intervals(f, 40, GridKind::Periodic, dir).from_cache);
    CHECK_FALSE(reference_intervals(scalar_laplace(), 40, GridKind::Half, dir).from_cache);

    // An entry whose recorded fingerprint disagrees is recomputed.
    for (const auto& entry : std::filesystem::directory_iterator(dir)) {
        std::ifstream in(entry.path());
        auto doc = nlohmann::json::parse(in);
        if (doc["n"] != 40 || doc["grid"] != "half" || doc["ranges"].size() != 9) continue;
        doc["fingerprint"] = "0000000000000000";
        doc["ranges"][0][1] = 123.0;
        std::ofstream(entry.path()) << doc.dump();
    }
    const ReferenceIntervals third = reference_intervals(f, 40, GridKind::Half, dir);
    CHECK_FALSE(third.from_cache);
    CHECK(third.ranges == first.ranges);
    std::filesystem::remove_all(dir);
}

TEST_CASE("report serialization") {
    const int n = 4;
    const SpectralReport r =
        spectral_report("K", BlockLattice(n, n, 9), dense_spectrum(dirichlet(n)), builtin_dg_symbol(2), builtin_reference());
    std::ostringstream csv;
    r.write_csv(csv);
    const std::string text = csv.str();
    CHECK(text.rfind("index,value,block,branch,j,k,residual,above_max,residual_outlier\n", 0) == 0);
    CHECK(std::count(text.begin(), text.end(), '\n') == 1 + 144);
    const auto doc = r.to_json(true);
    CHECK(doc["N"] == 144);
    CHECK(doc["groups"].size() == 4);
    CHECK(doc["eigenvalues"].size() == 144);
    CHECK(doc["outliers"]["exceedance"] == r.outliers.exceedance);

    CHECK_THROWS_AS(spectral_report("K", BlockLattice(4, 5, 9), Eigen::VectorXd::Zero(180), builtin_dg_symbol(2),
                                    builtin_reference()),
                    std::invalid_argument);
}
