#include "toeplab/io.hpp"

#include <array>
#include <charconv>
#include <sstream>
#include <stdexcept>
#include <vector>

namespace toeplab {

std::string format_double(double value) {
    std::array<char, 64> buf{};
    auto [end, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), value);
    if (ec != std::errc{}) throw std::runtime_error("format_double failed");
    return std::string(buf.data(), end);
}

std::uint64_t fnv1a64(std::string_view bytes) {
    std::uint64_t h = 1469598103934665603ull;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return h;
}

namespace {

void write_header(std::ostream& out, Eigen::Index rows, Eigen::Index cols, std::size_t nnz,
                  std::string_view comment) {
    out << "%%MatrixMarket matrix coordinate real symmetric\n";
    if (!comment.empty()) out << "% " << comment << "\n";
    out << rows << " " << cols << " " << nnz << "\n";
}

} // namespace

void write_matrix_market_symmetric(std::ostream& out, const Eigen::SparseMatrix<double>& a,
                                   std::string_view comment) {
    struct Entry {
        Eigen::Index row, col;
        double value;
    };
    std::vector<Entry> entries;
    // column-major iteration gives (col, row) order; Matrix Market readers do not care,
    // but a fixed order keeps exports byte-stable.
    for (Eigen::Index k = 0; k < a.outerSize(); ++k) {
        for (Eigen::SparseMatrix<double>::InnerIterator it(a, k); it; ++it) {
            if (it.row() >= it.col() && it.value() != 0.0) entries.push_back({it.row(), it.col(), it.value()});
        }
    }
    write_header(out, a.rows(), a.cols(), entries.size(), comment);
    for (const auto& e : entries) out << e.row + 1 << " " << e.col + 1 << " " << format_double(e.value) << "\n";
}

void write_matrix_market_symmetric(std::ostream& out, const Eigen::MatrixXd& a, std::string_view comment) {
    std::size_t nnz = 0;
    for (Eigen::Index j = 0; j < a.cols(); ++j)
        for (Eigen::Index i = j; i < a.rows(); ++i)
            if (a(i, j) != 0.0) ++nnz;
    write_header(out, a.rows(), a.cols(), nnz, comment);
    for (Eigen::Index j = 0; j < a.cols(); ++j)
        for (Eigen::Index i = j; i < a.rows(); ++i)
            if (a(i, j) != 0.0) out << i + 1 << " " << j + 1 << " " << format_double(a(i, j)) << "\n";
}

Eigen::SparseMatrix<double> read_matrix_market(std::istream& in) {
    std::string line;
    if (!std::getline(in, line) || line.rfind("%%MatrixMarket", 0) != 0) {
        throw std::runtime_error("missing Matrix Market banner");
    }
    std::istringstream banner(line);
    std::string tag, object, format, field, symmetry;
    banner >> tag >> object >> format >> field >> symmetry;
    if (object != "matrix" || format != "coordinate" || (field != "real" && field != "integer")) {
        throw std::runtime_error("unsupported Matrix Market type: " + line);
    }
    const bool symmetric = symmetry == "symmetric";
    if (!symmetric && symmetry != "general") throw std::runtime_error("unsupported symmetry: " + symmetry);

    while (std::getline(in, line) && !line.empty() && line[0] == '%') {
    }
    std::istringstream size_line(line);
    Eigen::Index rows = 0, cols = 0;
    std::size_t nnz = 0;
    if (!(size_line >> rows >> cols >> nnz)) throw std::runtime_error("bad Matrix Market size line");

    std::vector<Eigen::Triplet<double>> triplets;
    triplets.reserve(symmetric ? 2 * nnz : nnz);
    for (std::size_t k = 0; k < nnz; ++k) {
        Eigen::Index i = 0, j = 0;
        double v = 0.0;
        if (!(in >> i >> j >> v)) throw std::runtime_error("truncated Matrix Market body");
        triplets.emplace_back(i - 1, j - 1, v);
        if (symmetric && i != j) triplets.emplace_back(j - 1, i - 1, v);
    }
    Eigen::SparseMatrix<double> a(rows, cols);
    a.setFromTriplets(triplets.begin(), triplets.end());
    return a;
}

} // namespace toeplab
