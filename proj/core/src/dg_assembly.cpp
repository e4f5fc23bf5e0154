#include "toeplab/dg_assembly.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>

#include "toeplab/dense_eig.hpp"
#include "toeplab/io.hpp"

namespace toeplab {

// ---------------------------------------------------------------------------
// Polynomial

Polynomial::Polynomial(std::vector<Rational> coeffs) : c_(std::move(coeffs)) { trim(); }

Polynomial Polynomial::constant(const Rational& c) { return Polynomial({c}); }

Polynomial Polynomial::monomial_x() { return Polynomial({Rational(0), Rational(1)}); }

void Polynomial::trim() {
    while (!c_.empty() && c_.back() == 0) c_.pop_back();
}

Rational Polynomial::operator()(const Rational& x) const {
    Rational acc = 0;
    for (auto it = c_.rbegin(); it != c_.rend(); ++it) acc = acc * x + *it;
    return acc;
}

Polynomial Polynomial::derivative() const {
    if (c_.size() <= 1) return {};
    std::vector<Rational> d(c_.size() - 1);
    for (std::size_t k = 1; k < c_.size(); ++k) d[k - 1] = Rational(static_cast<long long>(k)) * c_[k];
    return Polynomial(std::move(d));
}

Polynomial Polynomial::shifted(const Rational& shift) const {
    // Horner in polynomial arithmetic: p(x + s) = (..(c_n (x+s) + c_{n-1})(x+s) ..) + c_0.
    const Polynomial xs({shift, Rational(1)});
    Polynomial acc;
    for (auto it = c_.rbegin(); it != c_.rend(); ++it) acc = acc * xs + constant(*it);
    return acc;
}

Rational Polynomial::integrate(const Rational& a, const Rational& b) const {
    // Antiderivative x * sum_k c_k x^k / (k + 1), evaluated by Horner.
    Rational fa = 0, fb = 0;
    for (std::size_t k = c_.size(); k-- > 0;) {
        const Rational coef = c_[k] / Rational(static_cast<long long>(k + 1));
        fa = fa * a + coef;
        fb = fb * b + coef;
    }
    return fb * b - fa * a;
}

Polynomial Polynomial::add(const Polynomial& a, const Polynomial& b) {
    std::vector<Rational> c(std::max(a.c_.size(), b.c_.size()), Rational(0));
    for (std::size_t k = 0; k < a.c_.size(); ++k) c[k] += a.c_[k];
    for (std::size_t k = 0; k < b.c_.size(); ++k) c[k] += b.c_[k];
    return Polynomial(std::move(c));
}

Polynomial Polynomial::multiply(const Polynomial& a, const Polynomial& b) {
    if (a.c_.empty() || b.c_.empty()) return {};
    std::vector<Rational> c(a.c_.size() + b.c_.size() - 1, Rational(0));
    for (std::size_t i = 0; i < a.c_.size(); ++i)
        for (std::size_t j = 0; j < b.c_.size(); ++j) c[i + j] += a.c_[i] * b.c_[j];
    return Polynomial(std::move(c));
}

Polynomial Polynomial::scale(const Rational& s, const Polynomial& a) {
    std::vector<Rational> c = a.c_;
    for (auto& v : c) v *= s;
    return Polynomial(std::move(c));
}

// ---------------------------------------------------------------------------
// Basis

namespace {

const Rational kHalf(1, 2);

RationalMatrix gram(const std::vector<Polynomial>& f, const Rational& a, const Rational& b) {
    RationalMatrix m(f.size(), f.size());
    for (std::size_t k = 0; k < f.size(); ++k)
        for (std::size_t l = k; l < f.size(); ++l) m(k, l) = m(l, k) = (f[k] * f[l]).integrate(a, b);
    return m;
}

} // namespace

Basis1D build_basis(int p) {
    if (p < 1) throw std::invalid_argument("build_basis: degree must be >= 1");
    Basis1D b;
    b.p = p;
    const auto n = static_cast<std::size_t>(p) + 1;
    for (int k = 0; k <= p; ++k) b.nodes.emplace_back(k, p);
    for (std::size_t k = 0; k < n; ++k) {
        Polynomial phi = Polynomial::constant(1);
        for (std::size_t m = 0; m < n; ++m) {
            if (m == k) continue;
            const Rational inv = Rational(1) / (b.nodes[k] - b.nodes[m]);
            phi = phi * (inv * (Polynomial::monomial_x() + Polynomial::constant(-b.nodes[m])));
        }
        b.functions.push_back(std::move(phi));
    }

    const auto& phi = b.functions;  // main-element basis
    const auto& psi = b.functions;  // dual-element basis, same reference functions
    b.mass = gram(phi, 0, 1);
    b.mass_cut_left = gram(psi, kHalf, 1);
    b.mass_cut_right = gram(psi, 0, kHalf);

    b.r_tilde = RationalMatrix(n, n);
    b.l_tilde = RationalMatrix(n, n);
    b.l_bar = RationalMatrix(n, n);
    b.r_bar = RationalMatrix(n, n);
    for (std::size_t k = 0; k < n; ++k) {
        for (std::size_t l = 0; l < n; ++l) {
            b.r_tilde(k, l) = (psi[k] * phi[l].derivative().shifted(-kHalf)).integrate(kHalf, 1) +
                              psi[k](kHalf) * phi[l](0);
            b.l_tilde(k, l) = -(psi[k] * phi[l].derivative().shifted(kHalf)).integrate(0, kHalf) +
                              psi[k](kHalf) * phi[l](1);
            b.l_bar(k, l) = (phi[k] * psi[l].derivative().shifted(-kHalf)).integrate(kHalf, 1) +
                            phi[k](kHalf) * psi[l](0);
            b.r_bar(k, l) = -(phi[k] * psi[l].derivative().shifted(kHalf)).integrate(0, kHalf) +
                            phi[k](kHalf) * psi[l](1);
        }
    }
    return b;
}

HOperators build_h_operators(const Basis1D& basis) {
    RationalMatrix m_inv;
    try {
        m_inv = basis.mass.inverse();
    } catch (const std::domain_error&) {
        throw AssemblyError("singular mass matrix");
    }
    HOperators h;
    h.right = -(basis.l_bar * m_inv * basis.r_tilde);
    h.left = -(basis.r_bar * m_inv * basis.l_tilde);
    h.center = basis.l_bar * m_inv * basis.l_tilde + basis.r_bar * m_inv * basis.r_tilde;
    // A wall on the left removes the left neighbour from the dual element
    // there and leaves only its inner half; symmetrically on the right.
    h.wall_left = basis.r_bar * (basis.mass_cut_left.inverse() - m_inv) * basis.r_tilde;
    h.wall_right = basis.l_bar * (basis.mass_cut_right.inverse() - m_inv) * basis.l_tilde;
    return h;
}

std::string to_string(BoundaryCondition bc) { return bc == BoundaryCondition::Dirichlet ? "dirichlet" : "periodic"; }

BoundaryCondition parse_boundary_condition(const std::string& text) {
    if (text == "dirichlet") return BoundaryCondition::Dirichlet;
    if (text == "periodic") return BoundaryCondition::Periodic;
    throw std::invalid_argument("unknown boundary condition '" + text + "' (expected dirichlet or periodic)");
}

// ---------------------------------------------------------------------------
// PressureOperator

PressureOperator::PressureOperator(BlockLattice lattice, BoundaryCondition bc, int p, MatrixSymbol symbol)
    : lattice_(lattice), bc_(bc), p_(p), symbol_(std::move(symbol)) {
    minus_x_ = symbol_.find({-1, 0})->block;
    plus_x_ = symbol_.find({1, 0})->block;
    minus_y_ = symbol_.find({0, -1})->block;
    plus_y_ = symbol_.find({0, 1})->block;
}

int PressureOperator::neighbour(int i, int d, int n) const {
    const int j = i + d;
    if (j >= 0 && j < n) return j;
    if (bc_ == BoundaryCondition::Periodic) return (j + n) % n;
    return -1;
}

const RationalMatrix& PressureOperator::exact_center(std::size_t cell) const {
    return exact_centers_.at(center_of_cell_.at(cell));
}

Eigen::MatrixXd PressureOperator::block(std::size_t i, std::size_t j) const {
    const int s = lattice_.s, n1 = lattice_.n1, n2 = lattice_.n2;
    if (i >= lattice_.n_hat() || j >= lattice_.n_hat()) throw std::out_of_range("cell index out of range");
    const int i1 = static_cast<int>(i) / n2, i2 = static_cast<int>(i) % n2;
    const int j1 = static_cast<int>(j) / n2, j2 = static_cast<int>(j) % n2;
    Eigen::MatrixXd out = Eigen::MatrixXd::Zero(s, s);
    if (i == j) out += centers_[center_of_cell_[i]];
    // Offsets i - j = (-1, 0) etc.; with periodic wrap several may coincide for tiny n.
    if (j2 == i2 && neighbour(i1, 1, n1) == j1) out += minus_x_;
    if (j2 == i2 && neighbour(i1, -1, n1) == j1) out += plus_x_;
    if (j1 == i1 && neighbour(i2, 1, n2) == j2) out += minus_y_;
    if (j1 == i1 && neighbour(i2, -1, n2) == j2) out += plus_y_;
    return out;
}

Eigen::VectorXd PressureOperator::apply(const Eigen::VectorXd& x) const {
    if (static_cast<std::size_t>(x.size()) != lattice_.N()) {
        throw std::invalid_argument("PressureOperator::apply: vector length does not match the operator");
    }
    const int s = lattice_.s, n1 = lattice_.n1, n2 = lattice_.n2;
    Eigen::VectorXd y(x.size());
    for (int i1 = 0; i1 < n1; ++i1) {
        const int xp = neighbour(i1, 1, n1), xm = neighbour(i1, -1, n1);
        for (int i2 = 0; i2 < n2; ++i2) {
            const int yp = neighbour(i2, 1, n2), ym = neighbour(i2, -1, n2);
            auto yi = y.segment(lattice_.offset(i1, i2), s);
            yi.noalias() = centers_[center_of_cell_[lattice_.cell(i1, i2)]] * x.segment(lattice_.offset(i1, i2), s);
            if (xp >= 0) yi.noalias() += minus_x_ * x.segment(lattice_.offset(xp, i2), s);
            if (xm >= 0) yi.noalias() += plus_x_ * x.segment(lattice_.offset(xm, i2), s);
            if (yp >= 0) yi.noalias() += minus_y_ * x.segment(lattice_.offset(i1, yp), s);
            if (ym >= 0) yi.noalias() += plus_y_ * x.segment(lattice_.offset(i1, ym), s);
        }
    }
    return y;
}

Eigen::SparseMatrix<double> PressureOperator::sparse() const {
    const int s = lattice_.s, n1 = lattice_.n1, n2 = lattice_.n2;
    std::vector<Eigen::Triplet<double>> triplets;
    triplets.reserve(lattice_.n_hat() * 5 * s * s);
    auto put = [&](std::size_t row, std::size_t col, const Eigen::MatrixXd& b) {
        for (int a = 0; a < s; ++a)
            for (int c = 0; c < s; ++c)
                if (b(a, c) != 0.0)
                    triplets.emplace_back(static_cast<Eigen::Index>(row) + a, static_cast<Eigen::Index>(col) + c,
                                          b(a, c));
    };
    for (int i1 = 0; i1 < n1; ++i1) {
        const int xp = neighbour(i1, 1, n1), xm = neighbour(i1, -1, n1);
        for (int i2 = 0; i2 < n2; ++i2) {
            const int yp = neighbour(i2, 1, n2), ym = neighbour(i2, -1, n2);
            const std::size_t row = lattice_.offset(i1, i2);
            put(row, row, centers_[center_of_cell_[lattice_.cell(i1, i2)]]);
            if (xp >= 0) put(row, lattice_.offset(xp, i2), minus_x_);
            if (xm >= 0) put(row, lattice_.offset(xm, i2), plus_x_);
            if (yp >= 0) put(row, lattice_.offset(i1, yp), minus_y_);
            if (ym >= 0) put(row, lattice_.offset(i1, ym), plus_y_);
        }
    }
    const auto N = static_cast<Eigen::Index>(lattice_.N());
    Eigen::SparseMatrix<double> k(N, N);
    k.setFromTriplets(triplets.begin(), triplets.end());
    return k;
}

Eigen::MatrixXd PressureOperator::dense(std::size_t guard) const {
    if (lattice_.N() > guard) {
        throw GuardExceeded("dense operator of order " + std::to_string(lattice_.N()) + " exceeds the guard of " +
                            std::to_string(guard) + " rows");
    }
    return Eigen::MatrixXd(sparse());
}

void PressureOperator::write_matrix_market(std::ostream& out) const {
    write_matrix_market_symmetric(out, sparse(),
                                  "pressure operator p=" + std::to_string(p_) + " n=" + std::to_string(lattice_.n1) +
                                      "x" + std::to_string(lattice_.n2) + " bc=" + to_string(bc_));
}

PressureOperator assemble_pressure_operator(const Basis1D& basis, int n1, int n2, BoundaryCondition bc) {
    if (n1 < 4 || n2 < 4) throw std::invalid_argument("assemble_pressure_operator: n1 and n2 must be >= 4");
    const HOperators h = build_h_operators(basis);
    const RationalMatrix& m = basis.mass;
    const auto q = static_cast<int>(m.rows());
    const int s = q * q;

    // Local 2D dof (ax, ay) -> q * ax + ay, so kron(A, B) acts with A along x and B along y.
    const RationalMatrix center = kron(h.center, m) + kron(m, h.center);
    const RationalMatrix minus_x = kron(h.right, m);
    const RationalMatrix minus_y = kron(m, h.right);
    const RationalMatrix plus_x = kron(h.left, m);
    const RationalMatrix plus_y = kron(m, h.left);

    if (plus_x != minus_x.transpose() || plus_y != minus_y.transpose() || !center.is_symmetric()) {
        throw AssemblyError("assembled stencil is not symmetric");
    }
    MatrixSymbol symbol =
        MatrixSymbol::exact(s, {{{0, 0}, center}, {{-1, 0}, minus_x}, {{1, 0}, plus_x}, {{0, -1}, minus_y}, {{0, 1}, plus_y}});

    if (basis.p == 2) {
        const MatrixSymbol reference = builtin_dg_symbol(2);
        for (const auto& [j, c] : reference.coefficients()) {
            const SymbolCoefficient* mine = symbol.find(j);
            if (mine == nullptr || !(*mine->exact == *c.exact)) {
                throw AssemblyError("interior stencil block (" + std::to_string(j.j1) + "," + std::to_string(j.j2) +
                                    ") does not match the tabulated p = 2 coefficients");
            }
        }
    }

    PressureOperator op(BlockLattice(n1, n2, s), bc, basis.p, std::move(symbol));
    const std::size_t cells = op.lattice_.n_hat();
    op.center_of_cell_.assign(cells, 0);
    if (bc == BoundaryCondition::Periodic) {
        op.exact_centers_.push_back(center);
    } else {
        // Wall corrections per direction: index 0 interior, 1 low wall, 2 high wall.
        const std::array<RationalMatrix, 3> wall_x{RationalMatrix(s, s), kron(h.wall_left, m), kron(h.wall_right, m)};
        const std::array<RationalMatrix, 3> wall_y{RationalMatrix(s, s), kron(m, h.wall_left), kron(m, h.wall_right)};
        auto side = [](int i, int n) { return i == 0 ? 1 : (i == n - 1 ? 2 : 0); };
        std::map<std::pair<int, int>, std::size_t> kinds;
        for (int i1 = 0; i1 < n1; ++i1) {
            for (int i2 = 0; i2 < n2; ++i2) {
                const auto key = std::make_pair(side(i1, n1), side(i2, n2));
                auto it = kinds.find(key);
                if (it == kinds.end()) {
                    it = kinds.emplace(key, op.exact_centers_.size()).first;
                    op.exact_centers_.push_back(center + wall_x[key.first] + wall_y[key.second]);
                }
                op.center_of_cell_[op.lattice_.cell(i1, i2)] = it->second;
            }
        }
    }
    for (const auto& c : op.exact_centers_) op.centers_.push_back(c.to_eigen());
    return op;
}

// ---------------------------------------------------------------------------
// Boundary part

namespace {

Eigen::MatrixXd flip(const Eigen::MatrixXd& a) { return a.reverse(); }

bool close(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b, double scale) {
    return (a - b).cwiseAbs().maxCoeff() <= 1e-13 * std::max(1.0, scale);
}

nlohmann::json matrix_json(const Eigen::MatrixXd& a) {
    nlohmann::json rows = nlohmann::json::array();
    for (Eigen::Index i = 0; i < a.rows(); ++i) {
        nlohmann::json row = nlohmann::json::array();
        for (Eigen::Index j = 0; j < a.cols(); ++j) row.push_back(a(i, j));
        rows.push_back(std::move(row));
    }
    return rows;
}

double min_eig(const std::vector<Eigen::MatrixXd>& blocks) {
    double m = std::numeric_limits<double>::infinity();
    for (const auto& b : blocks) m = std::min(m, symmetric_eigenvalues(b)(0));
    return m;
}

} // namespace

BoundaryReport extract_boundary_part(const PressureOperator& op) {
    if (op.boundary() != BoundaryCondition::Dirichlet) {
        throw std::invalid_argument("extract_boundary_part: requires a Dirichlet operator");
    }
    const BlockLattice& lat = op.lattice();
    const int s = lat.s, n1 = lat.n1, n2 = lat.n2;
    BoundaryReport rep;
    rep.lattice = lat;
    Eigen::SparseMatrix<double> e = op.sparse() - toeplitz_sparse(op.symbol(), lat);
    e.prune(0.0);
    rep.boundary_part = e;

    rep.slab_block_diagonal = true;
    rep.cell_block_diagonal = true;
    const auto slab = static_cast<Eigen::Index>(s) * n2;
    for (Eigen::Index k = 0; k < e.outerSize(); ++k) {
        for (Eigen::SparseMatrix<double>::InnerIterator it(e, k); it; ++it) {
            if (it.row() / slab != it.col() / slab) rep.slab_block_diagonal = false;
            if (it.row() / s != it.col() / s) rep.cell_block_diagonal = false;
        }
    }

    // Diagonal slabs compared as dense s*n2 blocks.
    std::vector<Eigen::MatrixXd> slabs;
    for (int i1 = 0; i1 < n1; ++i1) slabs.emplace_back(Eigen::MatrixXd(e.block(i1 * slab, i1 * slab, slab, slab)));
    std::vector<Eigen::MatrixXd> kinds;
    for (const auto& sl : slabs) {
        if (std::none_of(kinds.begin(), kinds.end(), [&](const auto& k) { return k == sl; })) kinds.push_back(sl);
    }
    rep.distinct_slab_kinds = static_cast<int>(kinds.size());
    rep.interior_slabs_identical = true;
    for (int i1 = 2; i1 < n1 - 1; ++i1) rep.interior_slabs_identical &= slabs[i1] == slabs[1];

    auto cells_of = [&](const Eigen::MatrixXd& sl) {
        std::vector<Eigen::MatrixXd> out;
        for (int i2 = 0; i2 < n2; ++i2) out.emplace_back(sl.block(i2 * s, i2 * s, s, s));
        return out;
    };
    rep.left = cells_of(slabs.front());
    rep.middle = cells_of(slabs[1]);
    rep.right = cells_of(slabs.back());

    double scale = 0.0;
    for (const auto* group : {&rep.left, &rep.middle, &rep.right})
        for (const auto& b : *group) scale = std::max(scale, b.cwiseAbs().maxCoeff());

    rep.middle_interior_zero = true;
    rep.left_interior_constant = true;
    rep.right_interior_constant = true;
    rep.flip_interior = true;
    for (int i = 1; i < n2 - 1; ++i) {
        rep.middle_interior_zero &= rep.middle[i].isZero(0.0);
        rep.left_interior_constant &= rep.left[i] == rep.left[1];
        rep.right_interior_constant &= rep.right[i] == rep.right[1];
        rep.flip_interior &= close(rep.right[i], flip(rep.left[i]), scale);
    }
    rep.middle_flip = close(rep.middle.back(), flip(rep.middle.front()), scale);
    rep.flip_crossed_ends = close(rep.right.front(), flip(rep.left.back()), scale) &&
                            close(rep.right.back(), flip(rep.left.front()), scale);
    rep.flip_same_index = rep.flip_interior && close(rep.right.front(), flip(rep.left.front()), scale) &&
                          close(rep.right.back(), flip(rep.left.back()), scale);

    rep.min_eig_left = min_eig(rep.left);
    rep.min_eig_middle = min_eig(rep.middle);
    rep.min_eig_right = min_eig(rep.right);

    // Eigenvalues, 2-norm and rank from the diagonal cell blocks when E is
    // cell-block diagonal; otherwise fall back to the full matrix.
    std::vector<Eigen::VectorXd> svals;
    std::vector<double> eigs_min;
    if (rep.cell_block_diagonal) {
        for (std::size_t c = 0; c < lat.n_hat(); ++c) {
            const auto off = static_cast<Eigen::Index>(c) * s;
            const Eigen::MatrixXd b(e.block(off, off, s, s));
            if (b.isZero(0.0)) continue;
            svals.push_back(singular_values(b));
            eigs_min.push_back(symmetric_eigenvalues(b)(0));
        }
    } else {
        const Eigen::MatrixXd full(e);
        svals.push_back(singular_values(full));
        eigs_min.push_back(symmetric_eigenvalues(full)(0));
    }
    rep.norm2 = 0.0;
    for (const auto& sv : svals)
        if (sv.size() > 0) rep.norm2 = std::max(rep.norm2, sv(0));
    rep.min_eig = eigs_min.empty() ? 0.0 : std::min(0.0, *std::min_element(eigs_min.begin(), eigs_min.end()));
    rep.psd = rep.min_eig >= -1e-12 * std::max(1.0, rep.norm2);
    rep.rank_threshold = kRankRelTol * rep.norm2;
    rep.rank = 0;
    for (const auto& sv : svals)
        for (Eigen::Index i = 0; i < sv.size(); ++i)
            if (sv(i) > rep.rank_threshold) ++rep.rank;
    return rep;
}

nlohmann::json BoundaryReport::to_json() const {
    nlohmann::json j;
    j["n"] = {lattice.n1, lattice.n2};
    j["s"] = lattice.s;
    j["slab_block_diagonal"] = slab_block_diagonal;
    j["cell_block_diagonal"] = cell_block_diagonal;
    j["distinct_slab_kinds"] = distinct_slab_kinds;
    j["interior_slabs_identical"] = interior_slabs_identical;
    j["middle_interior_zero"] = middle_interior_zero;
    j["left_interior_constant"] = left_interior_constant;
    j["right_interior_constant"] = right_interior_constant;
    j["flip"] = {{"middle_last_vs_first", middle_flip},
                 {"right_first_vs_left_last", flip_crossed_ends},
                 {"right_i_vs_left_i_all", flip_same_index},
                 {"right_i_vs_left_i_interior", flip_interior}};
    j["min_eigenvalue"] = {{"left", min_eig_left}, {"middle", min_eig_middle}, {"right", min_eig_right}, {"all", min_eig}};
    j["psd"] = psd;
    j["norm2"] = norm2;
    j["rank"] = rank;
    j["rank_threshold"] = rank_threshold;
    auto named = [](const std::vector<Eigen::MatrixXd>& blocks) {
        nlohmann::json arr = nlohmann::json::array();
        const std::size_t n = blocks.size();
        for (std::size_t i : {std::size_t{0}, std::size_t{1}, n - 1})
            if (i < n) arr.push_back({{"i", i + 1}, {"block", matrix_json(blocks[i])}});
        return arr;
    };
    j["blocks"] = {{"left", named(left)}, {"middle", named(middle)}, {"right", named(right)}};
    return j;
}

} // namespace toeplab
