#include "toeplab/symbol.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>
#include <ostream>
#include <thread>

#include "toeplab/io.hpp"

namespace toeplab {

namespace {

using Table = std::vector<std::vector<std::string>>;

// Coefficients of the k = 2, p = 2 pressure symbol; local dofs ordered with the
// level-1 (x) index slow and the level-2 (y) index fast.
const Table kCenter = {
    {"127/360", "41/480", "-43/320", "41/480", "-1/360", "-2/45", "-43/320", "-2/45", "13/288"},
    {"41/480", "103/90", "41/480", "-1/360", "5/24", "-1/360", "-2/45", "-113/240", "-2/45"},
    {"-43/320", "41/480", "127/360", "-2/45", "-1/360", "41/480", "13/288", "-2/45", "-43/320"},
    {"41/480", "-1/360", "-2/45", "103/90", "5/24", "-113/240", "41/480", "-1/360", "-2/45"},
    {"-1/360", "5/24", "-1/360", "5/24", "158/45", "5/24", "-1/360", "5/24", "-1/360"},
    {"-2/45", "-1/360", "41/480", "-113/240", "5/24", "103/90", "-2/45", "-1/360", "41/480"},
    {"-43/320", "-2/45", "13/288", "41/480", "-1/360", "-2/45", "127/360", "41/480", "-43/320"},
    {"-2/45", "-113/240", "-2/45", "-1/360", "5/24", "-1/360", "41/480", "103/90", "41/480"},
    {"13/288", "-2/45", "-43/320", "-2/45", "-1/360", "41/480", "-43/320", "41/480", "127/360"},
};

const Table kMinusX = {
    {"5/288", "5/576", "-5/1152", "23/720", "23/1440", "-23/2880", "-11/1440", "-11/2880", "11/5760"},
    {"5/576", "5/72", "5/576", "23/1440", "23/180", "23/1440", "-11/2880", "-11/360", "-11/2880"},
    {"-5/1152", "5/576", "5/288", "-23/2880", "23/1440", "23/720", "11/5760", "-11/2880", "-11/1440"},
    {"-17/144", "-17/288", "17/576", "-47/360", "-47/720", "47/1440", "23/720", "23/1440", "-23/2880"},
    {"-17/288", "-17/36", "-17/288", "-47/720", "-47/90", "-47/720", "23/1440", "23/180", "23/1440"},
    {"17/576", "-17/288", "-17/144", "47/1440", "-47/720", "-47/360", "-23/2880", "23/1440", "23/720"},
    {"-7/288", "-7/576", "7/1152", "-17/144", "-17/288", "17/576", "5/288", "5/576", "-5/1152"},
    {"-7/576", "-7/72", "-7/576", "-17/288", "-17/36", "-17/288", "5/576", "5/72", "5/576"},
    {"7/1152", "-7/576", "-7/288", "17/576", "-17/288", "-17/144", "-5/1152", "5/576", "5/288"},
};

const Table kMinusY = {
    {"5/288", "23/720", "-11/1440", "5/576", "23/1440", "-11/2880", "-5/1152", "-23/2880", "11/5760"},
    {"-17/144", "-47/360", "23/720", "-17/288", "-47/720", "23/1440", "17/576", "47/1440", "-23/2880"},
    {"-7/288", "-17/144", "5/288", "-7/576", "-17/288", "5/576", "7/1152", "17/576", "-5/1152"},
    {"5/576", "23/1440", "-11/2880", "5/72", "23/180", "-11/360", "5/576", "23/1440", "-11/2880"},
    {"-17/288", "-47/720", "23/1440", "-17/36", "-47/90", "23/180", "-17/288", "-47/720", "23/1440"},
    {"-7/576", "-17/288", "5/576", "-7/72", "-17/36", "5/72", "-7/576", "-17/288", "5/576"},
    {"-5/1152", "-23/2880", "11/5760", "5/576", "23/1440", "-11/2880", "5/288", "23/720", "-11/1440"},
    {"17/576", "47/1440", "-23/2880", "-17/288", "-47/720", "23/1440", "-17/144", "-47/360", "23/720"},
    {"7/1152", "17/576", "-5/1152", "-7/576", "-17/288", "5/576", "-7/288", "-17/144", "5/288"},
};

bool blocks_transposed(const SymbolCoefficient& a, const SymbolCoefficient& b) {
    if (a.exact && b.exact) return *a.exact == b.exact->transpose();
    const double scale = std::max(1.0, a.block.cwiseAbs().maxCoeff());
    return (a.block - b.block.transpose()).cwiseAbs().maxCoeff() <= 1e-14 * scale;
}

} // namespace

MatrixSymbol::MatrixSymbol(int s, std::map<Index2, SymbolCoefficient> coeffs) : s_(s), coeffs_(std::move(coeffs)) {
    if (s_ <= 0) throw SymbolError("block size must be positive");
    if (coeffs_.empty()) throw SymbolError("symbol has no coefficients");
    for (auto& [j, c] : coeffs_) {
        if (c.exact) {
            if (c.exact->rows() != static_cast<std::size_t>(s_) || c.exact->cols() != static_cast<std::size_t>(s_)) {
                throw SymbolError("exact coefficient block has wrong shape");
            }
            c.block = c.exact->to_eigen();
        }
        if (c.block.rows() != s_ || c.block.cols() != s_) throw SymbolError("coefficient block has wrong shape");
        if (!c.block.allFinite()) throw SymbolError("coefficient block has non-finite entries");
    }
    for (const auto& [j, c] : coeffs_) {
        auto mirror = coeffs_.find(-j);
        if (mirror == coeffs_.end()) {
            throw SymbolError("Hermitian-symbol condition violated: missing coefficient at -(" + std::to_string(j.j1) +
                              "," + std::to_string(j.j2) + ")");
        }
        if (!blocks_transposed(c, mirror->second)) {
            throw SymbolError("Hermitian-symbol condition violated at (" + std::to_string(j.j1) + "," +
                              std::to_string(j.j2) + "): block at -j is not the transpose");
        }
    }
}

MatrixSymbol MatrixSymbol::exact(int s, const std::map<Index2, RationalMatrix>& coeffs) {
    std::map<Index2, SymbolCoefficient> c;
    for (const auto& [j, m] : coeffs) c.emplace(j, SymbolCoefficient{m.to_eigen(), m});
    return MatrixSymbol(s, std::move(c));
}

MatrixSymbol MatrixSymbol::numeric(int s, const std::map<Index2, Eigen::MatrixXd>& coeffs) {
    std::map<Index2, SymbolCoefficient> c;
    for (const auto& [j, m] : coeffs) c.emplace(j, SymbolCoefficient{m, std::nullopt});
    return MatrixSymbol(s, std::move(c));
}

const SymbolCoefficient* MatrixSymbol::find(Index2 j) const {
    auto it = coeffs_.find(j);
    return it == coeffs_.end() ? nullptr : &it->second;
}

Index2 MatrixSymbol::degree() const {
    Index2 d;
    for (const auto& [j, c] : coeffs_) {
        d.j1 = std::max(d.j1, std::abs(j.j1));
        d.j2 = std::max(d.j2, std::abs(j.j2));
    }
    return d;
}

bool MatrixSymbol::is_exact() const {
    return std::all_of(coeffs_.begin(), coeffs_.end(), [](const auto& kv) { return kv.second.exact.has_value(); });
}

Eigen::MatrixXcd MatrixSymbol::operator()(double t1, double t2) const {
    Eigen::MatrixXcd f = Eigen::MatrixXcd::Zero(s_, s_);
    for (const auto& [j, c] : coeffs_) {
        const std::complex<double> phase = std::polar(1.0, j.j1 * t1 + j.j2 * t2);
        f += phase * c.block.cast<std::complex<double>>();
    }
    return f;
}

std::uint64_t MatrixSymbol::fingerprint() const { return fnv1a64(to_json(*this).dump()); }

MatrixSymbol builtin_dg_symbol(int p) {
    if (p != 2) {
        throw SymbolError("no builtin coefficients for p = " + std::to_string(p) +
                          " (only p = 2 is tabulated; assemble the operator to obtain other degrees)");
    }
    const RationalMatrix center = RationalMatrix::from_strings(kCenter);
    const RationalMatrix minus_x = RationalMatrix::from_strings(kMinusX);
    const RationalMatrix minus_y = RationalMatrix::from_strings(kMinusY);
    return MatrixSymbol::exact(9, {{{0, 0}, center},
                                   {{-1, 0}, minus_x},
                                   {{1, 0}, minus_x.transpose()},
                                   {{0, -1}, minus_y},
                                   {{0, 1}, minus_y.transpose()}});
}

Eigen::MatrixXcd eval(const MatrixSymbol& sym, std::array<double, 2> theta) { return sym(theta[0], theta[1]); }

Eigen::VectorXd hermitian_eigenvalues(const Eigen::MatrixXcd& a) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> solver(a, Eigen::EigenvaluesOnly);
    if (solver.info() != Eigen::Success) throw std::runtime_error("Hermitian eigensolver did not converge");
    return solver.eigenvalues();
}

std::array<double, 2> grid_node(GridKind grid, int n, int j, int k) {
    const double step = grid == GridKind::Half ? std::numbers::pi / n : 2.0 * std::numbers::pi / n;
    return {j * step, k * step};
}

std::string to_string(GridKind grid) { return grid == GridKind::Half ? "half" : "periodic"; }

GridKind parse_grid_kind(const std::string& text) {
    if (text == "half") return GridKind::Half;
    if (text == "periodic") return GridKind::Periodic;
    throw std::invalid_argument("unknown grid kind '" + text + "' (expected half or periodic)");
}

std::array<double, 2> EigenSample::theta(std::size_t node) const {
    return grid_node(grid, n, static_cast<int>(node / n), static_cast<int>(node % n));
}

EigenSample sample_eigs(const MatrixSymbol& sym, int n, GridKind grid, unsigned threads) {
    if (n < 1) throw std::invalid_argument("sample_eigs: n must be >= 1");
    const int s = sym.block_size();
    EigenSample out;
    out.n = n;
    out.grid = grid;
    out.s = s;
    const std::size_t nodes = out.node_count();
    out.values.assign(s, std::vector<double>(nodes));

    // Pre-split the coefficient list so the inner loop avoids map traversal.
    std::vector<std::pair<Index2, Eigen::MatrixXcd>> terms;
    for (const auto& [j, c] : sym.coefficients()) terms.emplace_back(j, c.block.cast<std::complex<double>>());

    auto work = [&](int row_begin, int row_end) {
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> solver(s);
        Eigen::MatrixXcd f(s, s);
        for (int j = row_begin; j < row_end; ++j) {
            for (int k = 0; k < n; ++k) {
                const auto t = grid_node(grid, n, j, k);
                f.setZero();
                for (const auto& [idx, block] : terms) f += std::polar(1.0, idx.j1 * t[0] + idx.j2 * t[1]) * block;
                solver.compute(f, Eigen::EigenvaluesOnly);
                const std::size_t node = static_cast<std::size_t>(j) * n + k;
                for (int l = 0; l < s; ++l) out.values[l][node] = solver.eigenvalues()[l];
            }
        }
    };

    unsigned workers = threads == 0 ? std::max(1u, std::thread::hardware_concurrency()) : threads;
    workers = std::min<unsigned>(workers, static_cast<unsigned>(n));
    if (workers <= 1) {
        work(0, n);
    } else {
        std::vector<std::jthread> pool;
        const int chunk = (n + static_cast<int>(workers) - 1) / static_cast<int>(workers);
        for (int begin = 0; begin < n; begin += chunk) pool.emplace_back(work, begin, std::min(n, begin + chunk));
    }

    out.intervals.resize(s);
    for (int l = 0; l < s; ++l) {
        auto [lo, hi] = std::minmax_element(out.values[l].begin(), out.values[l].end());
        out.intervals[l] = {*lo, *hi};
    }
    return out;
}

DetTaylor det_taylor(const MatrixSymbol& sym, std::array<double, 2> theta0) {
    const int s = sym.block_size();
    using Mat = Eigen::MatrixXcd;
    const std::complex<double> I(0.0, 1.0);
    Mat f = Mat::Zero(s, s);
    std::array<Mat, 2> d1{Mat::Zero(s, s), Mat::Zero(s, s)};
    std::array<std::array<Mat, 2>, 2> d2{{{Mat::Zero(s, s), Mat::Zero(s, s)}, {Mat::Zero(s, s), Mat::Zero(s, s)}}};
    for (const auto& [j, c] : sym.coefficients()) {
        const std::array<double, 2> jj{static_cast<double>(j.j1), static_cast<double>(j.j2)};
        const Mat term = std::polar(1.0, jj[0] * theta0[0] + jj[1] * theta0[1]) * c.block.cast<std::complex<double>>();
        f += term;
        for (int a = 0; a < 2; ++a) {
            d1[a] += (I * jj[a]) * term;
            for (int b = 0; b < 2; ++b) d2[a][b] += (-jj[a] * jj[b]) * term;
        }
    }

    // d/da det = sum_i det(f with column i <- column i of d_a f)
    // d2/dadb det = sum_i det(.. col i <- d_ab f ..) + sum_{i != k} det(.. col i <- d_a f, col k <- d_b f ..)
    auto replaced = [&](int i, const Mat& ci, int k = -1, const Mat* ck = nullptr) {
        Mat m = f;
        m.col(i) = ci.col(i);
        if (ck != nullptr) m.col(k) = ck->col(k);
        return m.determinant();
    };

    DetTaylor out;
    out.value = f.determinant().real();
    for (int a = 0; a < 2; ++a) {
        std::complex<double> g = 0.0;
        for (int i = 0; i < s; ++i) g += replaced(i, d1[a]);
        out.gradient[a] = g.real();
    }
    for (int a = 0; a < 2; ++a) {
        for (int b = a; b < 2; ++b) {
            std::complex<double> h = 0.0;
            for (int i = 0; i < s; ++i) {
                h += replaced(i, d2[a][b]);
                for (int k = 0; k < s; ++k)
                    if (k != i) h += replaced(i, d1[a], k, &d1[b]);
            }
            out.hessian[a][b] = out.hessian[b][a] = h.real();
        }
    }
    return out;
}

DetTaylor det_taylor_at_origin(const MatrixSymbol& sym) { return det_taylor(sym, {0.0, 0.0}); }

std::optional<ExactDetTaylor> det_taylor_exact_at_origin(const MatrixSymbol& sym) {
    if (!sym.is_exact()) return std::nullopt;
    const auto s = static_cast<std::size_t>(sym.block_size());
    // At the origin: f = F, d_a f = i A_a, d_a d_b f = -B_ab with F, A, B real.
    RationalMatrix f(s, s);
    std::array<RationalMatrix, 2> a{RationalMatrix(s, s), RationalMatrix(s, s)};
    std::array<std::array<RationalMatrix, 2>, 2> b{
        {{RationalMatrix(s, s), RationalMatrix(s, s)}, {RationalMatrix(s, s), RationalMatrix(s, s)}}};
    for (const auto& [j, c] : sym.coefficients()) {
        const std::array<Rational, 2> jj{Rational(j.j1), Rational(j.j2)};
        f = f + *c.exact;
        for (int p = 0; p < 2; ++p) {
            a[p] = a[p] + jj[p] * *c.exact;
            for (int q = 0; q < 2; ++q) b[p][q] = b[p][q] + (jj[p] * jj[q]) * *c.exact;
        }
    }
    auto replaced = [&](std::size_t i, const RationalMatrix& ci, std::size_t k = 0, const RationalMatrix* ck = nullptr) {
        RationalMatrix m = f;
        for (std::size_t r = 0; r < s; ++r) {
            m(r, i) = ci(r, i);
            if (ck != nullptr) m(r, k) = (*ck)(r, k);
        }
        return m.determinant();
    };

    ExactDetTaylor out;
    out.value = f.determinant();
    // The first derivative is i times a real number; det f is real, so it vanishes.
    out.gradient = {Rational(0), Rational(0)};
    for (int p = 0; p < 2; ++p) {
        for (int q = p; q < 2; ++q) {
            Rational h = 0;
            for (std::size_t i = 0; i < s; ++i) {
                h -= replaced(i, b[p][q]);
                for (std::size_t k = 0; k < s; ++k)
                    if (k != i) h -= replaced(i, a[p], k, &a[q]);
            }
            out.hessian[p][q] = out.hessian[q][p] = h;
        }
    }
    return out;
}

double min_eig_zero_order(const EigenSample& sample) {
    if (sample.n < 8) throw std::invalid_argument("min_eig_zero_order: sample too coarse (n < 8)");
    const int radius = std::max(3, sample.n / 16);
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    int count = 0;
    for (int j = 0; j <= radius; ++j) {
        for (int k = 0; k <= radius; ++k) {
            if ((j == 0 && k == 0) || j * j + k * k > radius * radius) continue;
            const auto t = grid_node(sample.grid, sample.n, j, k);
            const double lambda = sample.values[0][static_cast<std::size_t>(j) * sample.n + k];
            if (!(lambda > 0.0)) {
                throw std::domain_error("min_eig_zero_order: lambda_1 is not positive away from the origin");
            }
            const double x = std::log(std::hypot(t[0], t[1]));
            const double y = std::log(lambda);
            sx += x;
            sy += y;
            sxx += x * x;
            sxy += x * y;
            ++count;
        }
    }
    const double denom = count * sxx - sx * sx;
    return (count * sxy - sx * sy) / denom;
}

nlohmann::json to_json(const MatrixSymbol& sym) {
    nlohmann::json doc;
    doc["s"] = sym.block_size();
    nlohmann::json coeffs = nlohmann::json::array();
    for (const auto& [j, c] : sym.coefficients()) {
        nlohmann::json block = nlohmann::json::array();
        for (Eigen::Index r = 0; r < c.block.rows(); ++r) {
            nlohmann::json row = nlohmann::json::array();
            for (Eigen::Index q = 0; q < c.block.cols(); ++q) {
                if (c.exact) {
                    row.push_back(to_string((*c.exact)(static_cast<std::size_t>(r), static_cast<std::size_t>(q))));
                } else {
                    row.push_back(c.block(r, q));
                }
            }
            block.push_back(std::move(row));
        }
        coeffs.push_back({{"j", {j.j1, j.j2}}, {"block", std::move(block)}});
    }
    doc["coeffs"] = std::move(coeffs);
    return doc;
}

MatrixSymbol symbol_from_json(const nlohmann::json& doc) {
    try {
        const int s = doc.at("s").get<int>();
        std::map<Index2, SymbolCoefficient> coeffs;
        for (const auto& entry : doc.at("coeffs")) {
            const auto& jj = entry.at("j");
            if (!jj.is_array() || jj.size() != 2) throw SymbolError("coefficient index must be [j1, j2]");
            const Index2 j{jj[0].get<int>(), jj[1].get<int>()};
            const auto& rows = entry.at("block");
            if (!rows.is_array() || rows.size() != static_cast<std::size_t>(s)) {
                throw SymbolError("coefficient block must have s rows");
            }
            bool all_exact = true;
            RationalMatrix exact(s, s);
            Eigen::MatrixXd block(s, s);
            for (int r = 0; r < s; ++r) {
                if (!rows[r].is_array() || rows[r].size() != static_cast<std::size_t>(s)) {
                    throw SymbolError("coefficient block must have s columns");
                }
                for (int q = 0; q < s; ++q) {
                    const auto& v = rows[r][q];
                    if (v.is_string()) {
                        exact(r, q) = parse_rational(v.get<std::string>());
                        block(r, q) = to_double(exact(r, q));
                    } else if (v.is_number_integer()) {
                        exact(r, q) = Rational(v.get<long long>());
                        block(r, q) = v.get<double>();
                    } else {
                        all_exact = false;
                        block(r, q) = v.get<double>();
                    }
                }
            }
            if (!coeffs.emplace(j, SymbolCoefficient{block, all_exact ? std::optional(exact) : std::nullopt}).second) {
                throw SymbolError("duplicate coefficient index");
            }
        }
        return MatrixSymbol(s, std::move(coeffs));
    } catch (const nlohmann::json::exception& e) {
        throw SymbolError(std::string("malformed symbol JSON: ") + e.what());
    } catch (const std::invalid_argument& e) {
        throw SymbolError(std::string("malformed symbol JSON: ") + e.what());
    }
}

void write_sample_csv(std::ostream& out, const EigenSample& sample) {
    out << "l,j,k,theta1,theta2,lambda\n";
    for (int l = 0; l < sample.s; ++l) {
        for (int j = 0; j < sample.n; ++j) {
            for (int k = 0; k < sample.n; ++k) {
                const auto t = grid_node(sample.grid, sample.n, j, k);
                out << l + 1 << ',' << j << ',' << k << ',' << format_double(t[0]) << ',' << format_double(t[1]) << ','
                    << format_double(sample.values[l][static_cast<std::size_t>(j) * sample.n + k]) << '\n';
            }
        }
    }
}

} // namespace toeplab
