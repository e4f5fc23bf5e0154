#include "cli.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "toeplab/io.hpp"
#include "toeplab/krylov.hpp"
#include "toeplab/spectra.hpp"
#include "toeplab/structured.hpp"

namespace toeplab::cli {

namespace {

/// Convergence failure that still carries a report to print.
struct NotConverged {};

template <class T>
T parse_number(const std::string& text, const char* what) {
    T value{};
    const char* first = text.data();
    const char* last = text.data() + text.size();
    auto [ptr, ec] = std::from_chars(first, last, value);
    if (ec != std::errc{} || ptr != last) throw std::invalid_argument(std::string("bad ") + what + ": '" + text + "'");
    return value;
}

std::vector<std::string> split(const std::string& text, char sep) {
    std::vector<std::string> parts;
    std::string cur;
    std::istringstream in(text);
    while (std::getline(in, cur, sep)) parts.push_back(cur);
    if (!text.empty() && text.back() == sep) parts.emplace_back();
    return parts;
}

std::array<double, 2> parse_theta(const std::string& text) {
    const auto parts = split(text, ',');
    if (parts.size() != 2) throw std::invalid_argument("--theta expects two comma-separated angles, got '" + text + "'");
    return {parse_number<double>(parts[0], "angle"), parse_number<double>(parts[1], "angle")};
}

MatrixSymbol load_symbol(const RunConfig& cfg) {
    if (!cfg.symbol_file.empty()) {
        std::ifstream in(cfg.symbol_file);
        if (!in) throw std::invalid_argument("cannot read symbol file '" + cfg.symbol_file + "'");
        nlohmann::json doc;
        try {
            doc = nlohmann::json::parse(in);
        } catch (const nlohmann::json::exception& e) {
            throw std::invalid_argument("symbol file '" + cfg.symbol_file + "' is not valid JSON: " + e.what());
        }
        return symbol_from_json(doc);
    }
    if (cfg.p == 2) return builtin_dg_symbol(2);
    return assemble_pressure_operator(build_basis(cfg.p), 4, 4, BoundaryCondition::Periodic).symbol();
}

PressureOperator assemble(const RunConfig& cfg, int n, BoundaryCondition bc) {
    return assemble_pressure_operator(build_basis(cfg.p), n, n, bc);
}

std::size_t order(const RunConfig& cfg, int n) {
    return static_cast<std::size_t>(cfg.p + 1) * (cfg.p + 1) * static_cast<std::size_t>(n) * static_cast<std::size_t>(n);
}

void check_dense_guard(const RunConfig& cfg, const std::vector<int>& sizes) {
    for (int n : sizes) {
        if (order(cfg, n) > kSpectrumGuard) {
            throw GuardExceeded("n = " + std::to_string(n) + " gives a dense eigenproblem of order " +
                                std::to_string(order(cfg, n)) + ", above the guard of " + std::to_string(kSpectrumGuard));
        }
    }
}

ReferenceIntervals reference_for(const RunConfig& cfg, const MatrixSymbol& sym) {
    return reference_intervals(sym, cfg.reference_n, GridKind::Half, cfg.cache_dir);
}

nlohmann::json matrix_json(const Eigen::MatrixXd& m) {
    nlohmann::json rows = nlohmann::json::array();
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        nlohmann::json row = nlohmann::json::array();
        for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
        rows.push_back(std::move(row));
    }
    return rows;
}

// symbol --------------------------------------------------------------------

void symbol_eval(const RunConfig& cfg, std::ostream& out) {
    const MatrixSymbol sym = load_symbol(cfg);
    const Eigen::MatrixXcd f = eval(sym, cfg.theta);
    if (cfg.format == "json") {
        const Eigen::VectorXd sums = f.real().rowwise().sum();
        out << nlohmann::json{{"theta", {cfg.theta[0], cfg.theta[1]}},
                              {"s", sym.block_size()},
                              {"re", matrix_json(f.real())},
                              {"im", matrix_json(f.imag())},
                              {"row_sums", std::vector<double>(sums.begin(), sums.end())}}
                   .dump(2)
            << "\n";
        return;
    }
    out << "row,col,re,im\n";
    for (Eigen::Index i = 0; i < f.rows(); ++i)
        for (Eigen::Index j = 0; j < f.cols(); ++j)
            out << i + 1 << "," << j + 1 << "," << format_double(f(i, j).real()) << "," << format_double(f(i, j).imag())
                << "\n";
}

void symbol_sample(const RunConfig& cfg, std::ostream& out) {
    const EigenSample s = sample_eigs(load_symbol(cfg), cfg.n, cfg.grid, cfg.threads);
    write_sample_csv(out, s);
}

void symbol_det_taylor(const RunConfig& cfg, std::ostream& out) {
    const MatrixSymbol sym = load_symbol(cfg);
    const DetTaylor t = det_taylor_at_origin(sym);
    nlohmann::json doc{{"theta0", {0.0, 0.0}},
                       {"value", t.value},
                       {"gradient", {t.gradient[0], t.gradient[1]}},
                       {"hessian", {{t.hessian[0][0], t.hessian[0][1]}, {t.hessian[1][0], t.hessian[1][1]}}}};
    if (const auto exact = det_taylor_exact_at_origin(sym)) {
        auto str = [](const Rational& r) { return to_string(r); };
        doc["exact"] = {{"value", str(exact->value)},
                        {"gradient", {str(exact->gradient[0]), str(exact->gradient[1])}},
                        {"hessian", nlohmann::json::array({nlohmann::json::array({str(exact->hessian[0][0]),
                                                                                    str(exact->hessian[0][1])}),
                                                           nlohmann::json::array({str(exact->hessian[1][0]),
                                                                                    str(exact->hessian[1][1])})})}};
    }
    out << doc.dump(2) << "\n";
}

void symbol_intervals(const RunConfig& cfg, std::ostream& out) {
    const ReferenceIntervals ref = reference_intervals(load_symbol(cfg), cfg.n, cfg.grid, cfg.cache_dir);
    if (cfg.format == "json") {
        nlohmann::json doc = ref.to_json();
        nlohmann::json groups = nlohmann::json::array();
        for (const auto& g : interval_groups(ref.ranges)) groups.push_back({g.first + 1, g.last + 1});
        doc["groups"] = std::move(groups);
        out << doc.dump(2) << "\n";
        return;
    }
    out << "l,m,M\n";
    for (std::size_t l = 0; l < ref.ranges.size(); ++l)
        out << l + 1 << "," << format_double(ref.ranges[l].first) << "," << format_double(ref.ranges[l].second) << "\n";
}

void symbol_export(const RunConfig& cfg, std::ostream& out) { out << to_json(load_symbol(cfg)).dump(2) << "\n"; }

// spectra -------------------------------------------------------------------

SpectralReport dirichlet_report(const RunConfig& cfg, int n, const ReferenceIntervals& ref) {
    const PressureOperator op = assemble(cfg, n, BoundaryCondition::Dirichlet);
    return spectral_report("K_N", op.lattice(), dense_spectrum(op), op.symbol(), ref);
}

void spectra_table12(const RunConfig& cfg, std::ostream& out, bool table1) {
    check_dense_guard(cfg, cfg.sizes);
    const ReferenceIntervals ref = reference_for(cfg, load_symbol(cfg));
    out << (table1 ? "n,eigs_in_first_interval,expected,outliers,ratio\n" : "n,outliers,ratio,residual_outliers\n");
    for (int n : cfg.sizes) {
        const SpectralReport r = dirichlet_report(cfg, n, ref);
        const double root = std::sqrt(static_cast<double>(r.lattice.N()));
        if (table1) {
            const auto& first = r.counts.front();
            out << n << "," << first.count << "," << first.expected << "," << r.outliers.deficit << ","
                << format_double(static_cast<double>(r.outliers.deficit) / root) << "\n";
        } else {
            out << n << "," << r.outliers.exceedance << ","
                << format_double(static_cast<double>(r.outliers.exceedance) / root) << "," << r.outliers.residual << "\n";
        }
    }
}

void spectra_table3(const RunConfig& cfg, std::ostream& out) {
    out << "n,rank\n";
    for (int n : cfg.sizes) out << n << "," << extract_boundary_part(assemble(cfg, n, BoundaryCondition::Dirichlet)).rank << "\n";
}

void spectra_compare(const RunConfig& cfg, std::ostream& out) {
    check_dense_guard(cfg, {cfg.n});
    const PressureOperator op = assemble(cfg, cfg.n, BoundaryCondition::Dirichlet);
    const Eigen::VectorXd eigs = dense_spectrum(op);
    const EigenSample s = sample_eigs(op.symbol(), cfg.n, GridKind::Half, cfg.threads);
    std::vector<double> samples;
    for (const auto& v : s.values) samples.insert(samples.end(), v.begin(), v.end());
    std::sort(samples.begin(), samples.end());
    out << "index,eigenvalue,sample\n";
    for (Eigen::Index i = 0; i < eigs.size(); ++i)
        out << i + 1 << "," << format_double(eigs(i)) << "," << format_double(samples[static_cast<std::size_t>(i)]) << "\n";
}

void spectra_blocks(const RunConfig& cfg, std::ostream& out) {
    check_dense_guard(cfg, {cfg.n});
    const ReferenceIntervals ref = reference_for(cfg, load_symbol(cfg));
    const SpectralReport r = dirichlet_report(cfg, cfg.n, ref);
    const EigenSample s = sample_eigs(load_symbol(cfg), cfg.n, GridKind::Half, cfg.threads);
    out << "block,index,eigenvalue,sample\n";
    std::size_t start = 0;
    for (std::size_t t = 0; t < r.groups.size(); ++t) {
        std::vector<double> samples;
        for (int l = r.groups[t].first; l <= r.groups[t].last; ++l) {
            const auto& v = s.values[static_cast<std::size_t>(l)];
            samples.insert(samples.end(), v.begin(), v.end());
        }
        std::sort(samples.begin(), samples.end());
        for (std::size_t i = 0; i < samples.size(); ++i)
            out << t + 1 << "," << i + 1 << "," << format_double(r.eigenvalues(static_cast<Eigen::Index>(start + i))) << ","
                << format_double(samples[i]) << "\n";
        start += samples.size();
    }
}

void spectra_report(const RunConfig& cfg, std::ostream& out) {
    check_dense_guard(cfg, {cfg.n});
    const SpectralReport r = dirichlet_report(cfg, cfg.n, reference_for(cfg, load_symbol(cfg)));
    if (cfg.format == "json") out << r.to_json(cfg.rows).dump(2) << "\n";
    else r.write_csv(out);
}

void spectra_eblocks(const RunConfig& cfg, std::ostream& out) {
    out << extract_boundary_part(assemble(cfg, cfg.n, BoundaryCondition::Dirichlet)).to_json().dump(2) << "\n";
}

void spectra_export(const RunConfig& cfg, std::ostream& out) {
    const PressureOperator op = assemble(cfg, cfg.n, cfg.bc);
    if (cfg.kind == "operator") {
        op.write_matrix_market(out);
    } else if (cfg.kind == "toeplitz") {
        write_matrix_market_symmetric(out, toeplitz_sparse(op.symbol(), op.lattice()), "T_n(f)");
    } else {
        out << spectral_blocks_json(BlockCirculant(op.symbol(), cfg.n, cfg.n)).dump(2) << "\n";
    }
}

// solve / bench -------------------------------------------------------------

bool solve(const RunConfig& cfg, std::ostream& out) {
    const PressureOperator op = assemble(cfg, cfg.n, cfg.bc);
    const LinearOperator a = as_operator(op);
    const Eigen::VectorXd b = smooth_rhs(op.lattice(), cfg.p, cfg.bc, cfg.seed);
    std::unique_ptr<Preconditioner> m;
    if (cfg.pre == Preconditioning::Strang) m = std::make_unique<StrangPreconditioner>(build_strang(op.symbol(), op.lattice()));
    else m = std::make_unique<IdentityPreconditioner>();
    SolveOptions opts;
    opts.tolerance = cfg.tolerance;
    opts.max_iter = cfg.max_iter;
    const Eigen::VectorXd zero = Eigen::VectorXd::Zero(b.size());

    SolveResult res = pcg(a, *m, b, zero, opts);
    std::optional<SolveReport> first;
    if (cfg.warm) {
        // One drift step, restarted from the previous solution.
        Eigen::VectorXd delta = smooth_rhs(op.lattice(), cfg.p, cfg.bc, cfg.seed + 1);
        delta *= cfg.drift * b.norm() / delta.norm();
        first = res.report;
        res = pcg(a, *m, b + delta, res.x, opts);
    }
    nlohmann::json doc{{"n", cfg.n},
                       {"N", op.lattice().N()},
                       {"p", cfg.p},
                       {"bc", to_string(cfg.bc)},
                       {"seed", cfg.seed},
                       {"warm", cfg.warm}};
    doc["report"] = res.report.to_json(cfg.history, cfg.timings);
    if (first) doc["first_solve"] = first->to_json(cfg.history, cfg.timings);
    out << doc.dump(2) << "\n";
    return res.report.converged && (!first || first->converged);
}

bool bench(const RunConfig& cfg, std::ostream& out) {
    BenchConfig bc;
    bc.p = cfg.p;
    bc.bc = cfg.bc;
    bc.run_cg = cfg.pre != Preconditioning::Strang;
    bc.run_pcg = cfg.pre != Preconditioning::None;
    bc.steps = cfg.steps;
    bc.drift = cfg.drift;
    bc.tolerance = cfg.tolerance;
    bc.seed = cfg.seed;
    bc.threads = cfg.threads;
    const auto rows = bench_iterations(cfg.sizes, bc);
    write_bench_csv(out, rows, cfg.timings);
    return std::all_of(rows.begin(), rows.end(), [](const BenchRow& r) { return r.converged_all; });
}

bool dispatch(const RunConfig& cfg, std::ostream& out) {
    const std::string& c = cfg.command;
    const std::string& s = cfg.subcommand;
    if (c == "symbol") {
        if (s == "eval") symbol_eval(cfg, out);
        else if (s == "sample") symbol_sample(cfg, out);
        else if (s == "det-taylor") symbol_det_taylor(cfg, out);
        else if (s == "intervals") symbol_intervals(cfg, out);
        else symbol_export(cfg, out);
        return true;
    }
    if (c == "spectra") {
        if (s == "table1") spectra_table12(cfg, out, true);
        else if (s == "table2") spectra_table12(cfg, out, false);
        else if (s == "table3") spectra_table3(cfg, out);
        else if (s == "compare") spectra_compare(cfg, out);
        else if (s == "blocks") spectra_blocks(cfg, out);
        else if (s == "report") spectra_report(cfg, out);
        else if (s == "eblocks") spectra_eblocks(cfg, out);
        else spectra_export(cfg, out);
        return true;
    }
    if (c == "solve") return solve(cfg, out);
    return bench(cfg, out);
}

} // namespace

std::vector<int> parse_sizes(const std::string& text) {
    std::vector<int> sizes;
    if (text.find(':') != std::string::npos) {
        const auto parts = split(text, ':');
        if (parts.size() != 3) throw std::invalid_argument("--sizes range must be start:stop:step, got '" + text + "'");
        const int start = parse_number<int>(parts[0], "size"), stop = parse_number<int>(parts[1], "size"),
                  step = parse_number<int>(parts[2], "step");
        if (step <= 0) throw std::invalid_argument("--sizes step must be positive");
        for (int n = start; n <= stop; n += step) sizes.push_back(n);
    } else if (!text.empty()) {
        for (const auto& part : split(text, ',')) sizes.push_back(parse_number<int>(part, "size"));
    }
    if (sizes.empty()) throw std::invalid_argument("--sizes selects no sizes: '" + text + "'");
    return sizes;
}

void RunConfig::validate() const {
    auto fail = [](const std::string& msg) { throw std::invalid_argument(msg); };
    if (p < 1) fail("--p must be at least 1");
    if (!(tolerance > 0.0) || !(tolerance < 1.0)) fail("--tol must lie in (0, 1)");
    if (reference_n < 1) fail("--ref-n must be positive");
    if (format != "csv" && format != "json") fail("--format must be csv or json");
    const bool uses_n = (command == "symbol" && (subcommand == "sample" || subcommand == "intervals")) ||
                        (command == "spectra" && subcommand != "table1" && subcommand != "table2" &&
                         subcommand != "table3") ||
                        command == "solve";
    if (uses_n) {
        const int min_n = command == "symbol" ? 1 : 4;
        if (n < min_n) fail("--n must be at least " + std::to_string(min_n));
    }
    const bool uses_sizes = command == "bench" || (command == "spectra" && (subcommand == "table1" ||
                                                                            subcommand == "table2" ||
                                                                            subcommand == "table3"));
    if (uses_sizes) {
        if (sizes.empty()) fail("--sizes selects no sizes");
        const int min_n = command == "bench" ? 1 : 4;
        for (int s : sizes)
            if (s < min_n) fail("--sizes entries must be at least " + std::to_string(min_n));
    }
    if (steps < 1) fail("--steps must be positive");
    if (!(drift >= 0.0)) fail("--drift must be non-negative");
    if (command == "spectra" && subcommand == "eblocks" && bc != BoundaryCondition::Dirichlet) {
        fail("eblocks needs the Dirichlet operator");
    }
}

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    RunConfig cfg;
    std::string theta = "0,0", sizes, bc = "dirichlet", grid = "half", pre, cache_dir;
    std::uint64_t seed = 42;
    bool no_cache = false;

    CLI::App app{"Spectral analysis and circulant-preconditioned CG for 2-level block Toeplitz matrices "
                 "generated by the staggered-DG pressure symbol.",
                 "toeplab"};
    app.require_subcommand(1);
    app.set_help_all_flag("--help-all", "Show help for all subcommands");

    auto common = [&](CLI::App* sub) {
        sub->add_option("--out,-o", cfg.out, "Output file (default: standard output)");
        sub->add_option("--p", cfg.p, "Polynomial degree of the DG basis")->capture_default_str();
    };
    auto symbol_source = [&](CLI::App* sub) {
        sub->add_option("--symbol", cfg.symbol_file, "Symbol JSON file instead of the DG pressure symbol");
    };
    auto format = [&](CLI::App* sub) {
        sub->add_option("--format", cfg.format, "csv or json")->capture_default_str();
    };
    auto cache = [&](CLI::App* sub) {
        sub->add_option("--cache-dir", cache_dir, "Cache for reference ranges (default: $GLT_CACHE_DIR)");
        sub->add_flag("--no-cache", no_cache, "Do not read or write the reference cache");
        sub->add_option("--ref-n", cfg.reference_n, "Grid size of the reference sample")->capture_default_str();
    };
    auto threads = [&](CLI::App* sub) {
        sub->add_option("--threads", cfg.threads, "Worker threads (0 = all cores)")->capture_default_str();
    };

    CLI::App* symbol = app.add_subcommand("symbol", "Evaluate and sample the symbol");
    symbol->require_subcommand(1);
    CLI::App* s_eval = symbol->add_subcommand("eval", "f(theta) as a matrix");
    s_eval->add_option("--theta", theta, "Angles t1,t2")->capture_default_str();
    CLI::App* s_sample = symbol->add_subcommand("sample", "Eigenvalue functions on a grid (CSV)");
    s_sample->add_option("--n", cfg.n, "Grid size")->required();
    s_sample->add_option("--grid", grid, "half (j pi/n) or periodic (2 pi j/n)")->capture_default_str();
    CLI::App* s_det = symbol->add_subcommand("det-taylor", "Value, gradient and Hessian of det f at the origin (JSON)");
    CLI::App* s_int = symbol->add_subcommand("intervals", "Ranges [m_l, M_l] of the eigenvalue functions");
    s_int->add_option("--n", cfg.n, "Grid size")->capture_default_str();
    s_int->add_option("--grid", grid, "half or periodic")->capture_default_str();
    CLI::App* s_export = symbol->add_subcommand("export", "Symbol coefficients as JSON");
    for (CLI::App* sub : {s_eval, s_sample, s_det, s_int, s_export}) {
        common(sub);
        symbol_source(sub);
    }
    for (CLI::App* sub : {s_eval, s_int}) format(sub);
    cache(s_int);
    threads(s_sample);
    cfg.n = 0;
    s_int->callback([&] {
        if (cfg.n == 0) cfg.n = kReferenceGridSize;
    });

    CLI::App* spectra = app.add_subcommand("spectra", "Spectra of the pressure operator against the symbol");
    spectra->require_subcommand(1);
    CLI::App* t1 = spectra->add_subcommand("table1", "Eigenvalues in the first range and deficit outliers");
    CLI::App* t2 = spectra->add_subcommand("table2", "Eigenvalues above the top range and matching outliers");
    CLI::App* t3 = spectra->add_subcommand("table3", "Numerical rank of the boundary part");
    for (CLI::App* sub : {t1, t2, t3}) {
        sub->add_option("--sizes", sizes, "start:stop:step or a comma list")->default_str("10:40:5");
        common(sub);
    }
    CLI::App* cmp = spectra->add_subcommand("compare", "Sorted eigenvalues against sorted samples");
    CLI::App* blk = spectra->add_subcommand("blocks", "Block partition against the grouped samples");
    CLI::App* rep = spectra->add_subcommand("report", "Full spectral report");
    CLI::App* eb = spectra->add_subcommand("eblocks", "Structure of the boundary part (JSON)");
    CLI::App* ex = spectra->add_subcommand("export", "Matrix Market or spectral-block export");
    for (CLI::App* sub : {cmp, blk, rep, eb, ex}) {
        sub->add_option("--n", cfg.n, "Grid size")->required();
        common(sub);
    }
    for (CLI::App* sub : {t1, t2, blk, rep}) cache(sub);
    for (CLI::App* sub : {cmp, blk}) threads(sub);
    format(rep);
    rep->add_flag("--rows", cfg.rows, "Include per-eigenvalue rows in JSON output");
    ex->add_option("--bc", bc, "dirichlet or periodic")->capture_default_str();
    ex->add_option("--kind", cfg.kind, "operator, toeplitz or blocks")
        ->check(CLI::IsMember({"operator", "toeplitz", "blocks"}))
        ->capture_default_str();

    CLI::App* solve_cmd = app.add_subcommand("solve", "Solve K_N x = b for a seeded smooth b (JSON report)");
    solve_cmd->add_option("--n", cfg.n, "Grid size")->required();
    solve_cmd->add_option("--bc", bc, "dirichlet or periodic")->capture_default_str();
    solve_cmd->add_option("--pre", pre, "none or strang")->default_str("none");
    solve_cmd->add_flag("--warm", cfg.warm,
                        "Solve once, drift b by --drift relative, and report the second solve started from the first "
                        "solution");
    solve_cmd->add_flag("--history", cfg.history, "Include the residual history");
    solve_cmd->add_option("--max-iter", cfg.max_iter, "Iteration cap (0 = max(N, 100))")->capture_default_str();

    CLI::App* bench_cmd = app.add_subcommand(
        "bench", "Average CG/PCG iterations over a drifting right-hand side (CSV). Each size solves b_t = b + t db, "
                 "t = 0..steps-1, ||db|| = drift ||b||, with x0 = b_t (trivial) and x0 = previous solution (warm); "
                 "both stop at tol times the residual of the trivial guess.");
    bench_cmd->add_option("--sizes", sizes, "start:stop:step or a comma list")->default_str("16,24,32");
    bench_cmd->add_option("--bc", bc, "dirichlet or periodic")->capture_default_str();
    bench_cmd->add_option("--pre", pre, "none, strang or both")->default_str("both");
    bench_cmd->add_option("--steps", cfg.steps, "Right-hand sides per size")->capture_default_str();
    threads(bench_cmd);

    for (CLI::App* sub : {solve_cmd, bench_cmd}) {
        common(sub);
        sub->add_option("--tol", cfg.tolerance, "Relative residual tolerance")->capture_default_str();
        sub->add_option("--seed", seed, "Seed of the right-hand side")->capture_default_str();
        sub->add_option("--drift", cfg.drift, "Relative size of the right-hand-side drift")->capture_default_str();
        sub->add_flag("--timings", cfg.timings, "Report wall-clock times (output is then not reproducible)");
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? kOk : kValidation;
    }

    try {
        CLI::App* leaf = &app;
        while (!leaf->get_subcommands().empty()) {
            leaf = leaf->get_subcommands().front();
            if (leaf->get_parent() == &app) cfg.command = leaf->get_name();
            else cfg.subcommand = leaf->get_name();
        }
        cfg.seed = seed;
        cfg.bc = parse_boundary_condition(bc);
        cfg.grid = parse_grid_kind(grid);
        cfg.theta = parse_theta(theta);
        if (cfg.command == "bench" || (cfg.command == "spectra" && cfg.subcommand.rfind("table", 0) == 0)) {
            cfg.sizes = parse_sizes(sizes.empty() ? (cfg.command == "bench" ? "16,24,32" : "10:40:5") : sizes);
        }
        if (pre.empty()) pre = cfg.command == "bench" ? "both" : "none";
        if (pre == "none") cfg.pre = Preconditioning::None;
        else if (pre == "strang") cfg.pre = Preconditioning::Strang;
        else if (pre == "both" && cfg.command == "bench") cfg.pre = Preconditioning::Both;
        else throw std::invalid_argument("--pre must be none or strang" + std::string(cfg.command == "bench" ? " or both" : ""));
        if (no_cache) cfg.cache_dir.reset();
        else if (!cache_dir.empty()) cfg.cache_dir = std::filesystem::path(cache_dir);
        else cfg.cache_dir = default_cache_dir();
        cfg.validate();

        std::ostringstream buf;
        bool ok = true;
        std::string failure;
        try {
            ok = dispatch(cfg, buf);
        } catch (const IndefiniteOperatorError& e) {
            ok = false;
            failure = e.what();
        }
        if (cfg.out.empty()) {
            out << buf.str();
        } else {
            std::ofstream file(cfg.out, std::ios::binary);
            if (!file) throw std::invalid_argument("cannot write '" + cfg.out + "'");
            file << buf.str();
        }
        if (!ok) {
            err << "toeplab: " << (failure.empty() ? "solver did not converge" : failure) << "\n";
            return kNotConverged;
        }
        return kOk;
    } catch (const GuardExceeded& e) {
        err << "toeplab: " << e.what() << "\n";
        return kGuardExceeded;
    } catch (const std::invalid_argument& e) {
        err << "toeplab: " << e.what() << "\n";
        return kValidation;
    } catch (const SymbolError& e) {
        err << "toeplab: " << e.what() << "\n";
        return kValidation;
    } catch (const AssemblyError& e) {
        err << "toeplab: " << e.what() << "\n";
        return kValidation;
    } catch (const std::exception& e) {
        err << "toeplab: " << e.what() << "\n";
        return kFailure;
    }
}

} // namespace toeplab::cli
