#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "toeplab/dg_assembly.hpp"
#include "toeplab/symbol.hpp"

namespace toeplab::cli {

enum ExitCode : int {
    kOk = 0,
    kFailure = 1,
    kValidation = 2,
    kGuardExceeded = 3,
    kNotConverged = 4,
};

enum class Preconditioning { None, Strang, Both };

/// Everything a command needs, filled from the flags and validated before anything runs.
struct RunConfig {
    std::string command;
    std::string subcommand;

    int n = 0;
    std::vector<int> sizes;
    int p = 2;
    BoundaryCondition bc = BoundaryCondition::Dirichlet;
    GridKind grid = GridKind::Half;
    std::array<double, 2> theta{0.0, 0.0};
    double tolerance = 1e-8;
    std::uint64_t seed = 42;
    std::string out;            ///< empty: standard output
    std::string format = "csv";
    std::optional<std::filesystem::path> cache_dir;
    int reference_n = 500;
    std::string symbol_file;    ///< custom symbol JSON instead of the DG symbol
    std::string kind = "operator";
    Preconditioning pre = Preconditioning::None;
    bool warm = false;
    bool history = false;
    bool timings = false;
    bool rows = false;
    int steps = 10;
    double drift = 1e-2;
    unsigned threads = 1;
    std::size_t max_iter = 0;

    /// Throws std::invalid_argument with a message naming the offending flag.
    void validate() const;
};

/// "10:40:5" (inclusive range with step) or "16,24,32".
std::vector<int> parse_sizes(const std::string& text);

/// Parses argv, runs one command and returns its exit code. Results go to
/// `out` (or the --out file), diagnostics to `err`.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

} // namespace toeplab::cli
