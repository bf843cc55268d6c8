#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "eflux/fd_oracle.hpp"
#include "eflux/flux_calculus.hpp"
#include "eflux/probability_engine.hpp"
#include "eflux/process_models.hpp"

namespace eflux {

constexpr int kManifestSchemaVersion = 1;

struct GridSection {
    double x = 0.0;
    double t = 1.0;
    double x_lo = -1.0;  // scan range
    double x_hi = 1.0;
    double dx = 0.01;
    std::vector<int> counts{8};
};

struct RunSection {
    std::size_t trials = 10000;
    std::uint64_t seed = 1;
    Method method = Method::MonteCarlo;
    unsigned threads = 0;  // 0: hardware concurrency
    std::string outdir = "out";
    double tolerance = 1e-5;  // quadrature
};

struct SamplePathSection {
    double lo = -2.0;
    double hi = 2.0;
    double dy = 0.01;
};

struct CdfSection {
    bool vertex = false;
    int index = 1;  // 1-based
    std::vector<double> s{-1.0, -0.5, 0.0, 0.5, 1.0};
};

struct ShockDensitySection {
    std::vector<double> dx{1e-2, 5e-3, 2.5e-3};
};

struct SpectrumSection {
    std::vector<int> n{100, 200};
};

struct VarianceLawSection {
    std::vector<double> t_grid{0.25, 0.5, 0.75, 1.0};
    double lo = -4.0;
    double hi = 4.0;
    double dy = 2e-3;
};

struct ConvergeSection {
    double x = 0.5;
    double t = 0.25;
    std::vector<int> levels{4, 6, 8, 10};
    double alpha = 0.5;
};

struct FdCompareSection {
    FdEnsembleOptions ensemble{};
    // Smooth Burgers check on 0.5 + 0.25 sin(2 pi x), periodic on [0, 1].
    std::vector<double> convergence_dx{1.0 / 50, 1.0 / 100, 1.0 / 200};
    double convergence_t = 0.3;
};

struct RunConfig {
    FluxSpec flux = AbsoluteValueFlux{};
    ProcessSpec process{};
    GridSection grid{};
    RunSection run{};
    SamplePathSection sample_path{};
    CdfSection cdf{};
    ShockDensitySection shock_density{};
    SpectrumSection spectrum{};
    VarianceLawSection variance_law{};
    ConvergeSection converge{};
    FdCompareSection fd_compare{};
};

// Strict JSON: unknown keys, wrong types and bad enum names throw ConfigError.
// Missing keys take the defaults above.
RunConfig parse_config(const std::string& text);
RunConfig load_config(const std::string& path);
// Canonical form listing every field; parse(serialize(c)) reproduces c.
std::string serialize_config(const RunConfig& config);

const std::vector<std::string>& subcommands();

struct RunOutput {
    std::string csv;
    std::string summary_json;  // extra scalar results for the manifest
    std::string plot_script;   // gnuplot
};

// Runs one subcommand in memory. Engine errors propagate.
RunOutput run_subcommand(const std::string& name, const RunConfig& config);

// Runs and writes <outdir>/<name>.csv, <name>.gp and manifest.json.
void execute(const std::string& name, const RunConfig& config);

// Maps an exception to (exit code, machine-readable tag).
struct ErrorCode {
    int exit_code;
    const char* tag;
};
ErrorCode classify_error(const std::exception& e);

}  // namespace eflux
