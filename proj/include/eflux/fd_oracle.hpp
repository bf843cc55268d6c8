#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "eflux/flux_calculus.hpp"
#include "eflux/process_models.hpp"

namespace eflux {

enum class FdBoundary { Periodic, Outflow };
enum class FdScheme { LaxFriedrichs, EngquistOsher };

struct FdConfig {
    double dx = 0.01;
    double cfl = 0.9;
    FdBoundary boundary = FdBoundary::Outflow;
    FdScheme scheme = FdScheme::LaxFriedrichs;
};

// Conservative monotone solver for w_t + H(w)_x = 0 on cell averages. The
// time step is cfl dx / max|H'| over the range of the initial data, which the
// scheme never leaves.
class FdSolver {
public:
    FdSolver(FluxSpec flux, std::vector<double> w0, FdConfig config);

    // One step of size min(dt(), t_end - time()).
    void step(double t_end);
    void advance_to(double t_end);

    const std::vector<double>& state() const { return w_; }
    double time() const { return time_; }
    double dt() const { return dt_; }
    double speed() const { return speed_; }
    long steps() const { return steps_; }

private:
    double numerical_flux(double u, double v) const;

    FluxSpec flux_;
    FdConfig config_;
    std::vector<double> w_;
    std::vector<double> f_;
    double speed_ = 0.0;
    double dt_ = 0.0;
    double time_ = 0.0;
    long steps_ = 0;
    double lo_ = 0.0;  // data range, for the Engquist-Osher split
    double hi_ = 0.0;
};

void validate(const FdConfig& config);

std::vector<double> evolve(const FluxSpec& flux, const std::vector<double>& w0, double t_end,
                           const FdConfig& config);

// Cell centers lo + (k + 1/2) dx; the interval length must be a multiple of dx.
std::vector<double> cell_centers(double lo, double hi, double dx);

// Sum of |w_{k+1} - w_k| (plus the wrap-around term when periodic).
double total_variation(const std::vector<double>& w, bool periodic = false);

// FD against Hopf-Lax on smooth deterministic data. g is the antiderivative of
// the initial data, so FD starts from exact cell averages. The Hopf-Lax
// reference minimizes over a dense grid of spacing hl_dy on [hl_lo, hl_hi].
struct FdConvergenceRow {
    double dx = 0.0;
    double l1 = 0.0;
    long steps = 0;
};
struct FdConvergence {
    std::vector<FdConvergenceRow> rows;
    double slope = 0.0;  // least-squares fit of log l1 against log dx
};

FdConvergence fd_hopf_lax_convergence(const PowerLawFlux& flux,
                                      const std::function<double(double)>& g,
                                      const std::function<double(double)>& gprime, double lo,
                                      double hi, double t, const std::vector<double>& dxs,
                                      const FdConfig& base, double hl_lo, double hl_hi,
                                      double hl_dy);

// Ensemble study: each seed draws one path of g' at the FD cell centers, which
// feeds both solvers. Statistics are taken over cells inside the window.
struct FdEnsembleOptions {
    double lo = -10.0;
    double hi = 10.0;
    double window_lo = -1.0;
    double window_hi = 1.0;
    std::vector<double> t_grid{0.25, 0.5, 0.75, 1.0};
    int seeds = 200;
    std::uint64_t seed = 1;
    FdConfig fd{};
};

struct FdEnsembleRow {
    double t = 0.0;
    double tv_fd = 0.0, tv_fd_se = 0.0;
    double tv_hl = 0.0, tv_hl_se = 0.0;
    double var_fd = 0.0, var_fd_se = 0.0;  // Var w(x0, t), x0 the center nearest 0
    double var_hl = 0.0, var_hl_se = 0.0;
    double l1 = 0.0, l1_se = 0.0;  // window L1 distance FD vs Hopf-Lax
    int truncated = 0;             // Hopf-Lax windows hitting the path edge
};

struct FdEnsemble {
    std::vector<FdEnsembleRow> rows;
    double x0 = 0.0;
    int seeds = 0;
};

FdEnsemble compare_with_hopf_lax(const PowerLawFlux& flux, const ProcessSpec& process,
                                 const FdEnsembleOptions& options);

}  // namespace eflux
