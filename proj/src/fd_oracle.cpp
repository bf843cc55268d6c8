#include "eflux/fd_oracle.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "eflux/errors.hpp"
#include "eflux/hopf_lax_core.hpp"
#include "eflux/probability_engine.hpp"
#include "eflux/rng.hpp"

namespace eflux {

namespace {

double fit_log_slope(const std::vector<double>& x, const std::vector<double>& y)
{
    double mx = 0.0, my = 0.0;
    std::size_t n = 0;
    for (std::size_t i = 0; i < x.size(); ++i)
        if (x[i] > 0.0 && y[i] > 0.0) {
            mx += std::log(x[i]);
            my += std::log(y[i]);
            ++n;
        }
    if (n < 2)
        return std::numeric_limits<double>::quiet_NaN();
    mx /= static_cast<double>(n);
    my /= static_cast<double>(n);
    double sxy = 0.0, sxx = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i)
        if (x[i] > 0.0 && y[i] > 0.0) {
            const double a = std::log(x[i]) - mx;
            sxy += a * (std::log(y[i]) - my);
            sxx += a * a;
        }
    return sxy / sxx;
}

std::size_t cell_count(double lo, double hi, double dx)
{
    if (!(hi > lo) || !(dx > 0.0))
        throw DomainError("cell grid needs hi > lo and dx > 0");
    const double r = (hi - lo) / dx;
    const double n = std::round(r);
    if (n < 2.0 || std::abs(r - n) > 1e-9 * std::max(1.0, n))
        throw DomainError("interval length must be a multiple of dx");
    return static_cast<std::size_t>(n);
}

}  // namespace

void validate(const FdConfig& config)
{
    if (!(config.dx > 0.0))
        throw DomainError("dx must be positive");
    if (!(config.cfl > 0.0) || config.cfl > 1.0)
        throw DomainError("CFL number must lie in (0, 1], got " + std::to_string(config.cfl));
}

FdSolver::FdSolver(FluxSpec flux, std::vector<double> w0, FdConfig config)
    : flux_(std::move(flux)), config_(config), w_(std::move(w0))
{
    validate(flux_);
    validate(config_);
    if (w_.size() < 2)
        throw DomainError("need at least two cells");
    for (double v : w_)
        if (!std::isfinite(v))
            throw DomainError("initial data must be finite");
    const auto [mn, mx] = std::minmax_element(w_.begin(), w_.end());
    lo_ = *mn;
    hi_ = *mx;
    speed_ = max_flux_speed(flux_, lo_, hi_);
    dt_ = speed_ > 0.0 ? config_.cfl * config_.dx / speed_ : std::numeric_limits<double>::infinity();
    f_.resize(w_.size() + 1);
}

double FdSolver::numerical_flux(double u, double v) const
{
    if (config_.scheme == FdScheme::LaxFriedrichs)
        return 0.5 * (flux_value(flux_, u) + flux_value(flux_, v)) - 0.5 * speed_ * (v - u);

    // Engquist-Osher for convex H: upwind split about a minimizer.
    if (const auto p0 = flux_minimizer(flux_)) {
        return flux_value(flux_, std::max(u, *p0)) + flux_value(flux_, std::min(v, *p0)) -
               flux_value(flux_, *p0);
    }
    // No minimizer: H is monotone.
    const auto& poly = std::get<PolygonalFlux>(flux_);
    return poly.slopes.front() >= 0.0 ? flux_value(flux_, u) : flux_value(flux_, v);
}

void FdSolver::step(double t_end)
{
    const double remaining = t_end - time_;
    if (!(remaining > 0.0))
        return;
    const double h = std::min(dt_, remaining);
    const std::size_t n = w_.size();
    const bool periodic = config_.boundary == FdBoundary::Periodic;
    // f_[k] is the flux through the left face of cell k
    for (std::size_t k = 0; k <= n; ++k) {
        double u, v;
        if (k == 0) {
            u = periodic ? w_[n - 1] : w_[0];
            v = w_[0];
        } else if (k == n) {
            u = w_[n - 1];
            v = periodic ? w_[0] : w_[n - 1];
        } else {
            u = w_[k - 1];
            v = w_[k];
        }
        f_[k] = numerical_flux(u, v);
    }
    if (periodic)
        f_[n] = f_[0];
    const double r = h / config_.dx;
    for (std::size_t k = 0; k < n; ++k)
        w_[k] -= r * (f_[k + 1] - f_[k]);
    // the last step may be short; land on t_end exactly
    time_ = h == remaining ? t_end : time_ + h;
    ++steps_;
}

void FdSolver::advance_to(double t_end)
{
    if (t_end < time_)
        throw DomainError("cannot evolve backwards in time");
    while (time_ < t_end)
        step(t_end);
}

std::vector<double> evolve(const FluxSpec& flux, const std::vector<double>& w0, double t_end,
                           const FdConfig& config)
{
    if (!(t_end > 0.0))
        throw DomainError("t_end must be positive");
    FdSolver solver(flux, w0, config);
    solver.advance_to(t_end);
    return solver.state();
}

std::vector<double> cell_centers(double lo, double hi, double dx)
{
    const std::size_t n = cell_count(lo, hi, dx);
    std::vector<double> xs(n);
    for (std::size_t k = 0; k < n; ++k)
        xs[k] = lo + (static_cast<double>(k) + 0.5) * dx;
    return xs;
}

double total_variation(const std::vector<double>& w, bool periodic)
{
    double tv = 0.0;
    for (std::size_t k = 1; k < w.size(); ++k)
        tv += std::abs(w[k] - w[k - 1]);
    if (periodic && w.size() > 1)
        tv += std::abs(w.front() - w.back());
    return tv;
}

FdConvergence fd_hopf_lax_convergence(const PowerLawFlux& flux,
                                      const std::function<double(double)>& g,
                                      const std::function<double(double)>& gprime, double lo,
                                      double hi, double t, const std::vector<double>& dxs,
                                      const FdConfig& base, double hl_lo, double hl_hi,
                                      double hl_dy)
{
    if (!(t > 0.0))
        throw DomainError("t must be positive");
    if (!(hl_lo <= lo && hl_hi >= hi))
        throw DomainError("Hopf-Lax path must cover the FD interval");
    const auto n_hl = static_cast<std::size_t>(std::llround((hl_hi - hl_lo) / hl_dy)) + 1;
    const DensePath path = dense_path(g, gprime, hl_lo, hl_hi, n_hl);

    FdConvergence out;
    std::vector<double> hs, errs;
    for (double dx : dxs) {
        FdConfig cfg = base;
        cfg.dx = dx;
        const auto xs = cell_centers(lo, hi, dx);
        std::vector<double> w0(xs.size());
        for (std::size_t k = 0; k < xs.size(); ++k)
            w0[k] = (g(xs[k] + 0.5 * dx) - g(xs[k] - 0.5 * dx)) / dx;
        FdSolver solver(flux, std::move(w0), cfg);
        solver.advance_to(t);

        std::vector<double> err(xs.size());
        parallel_for(xs.size(), [&](std::size_t k) {
            err[k] = std::abs(solver.state()[k] - solve_power_law(flux, path, xs[k], t).result.w);
        });
        double l1 = 0.0;
        for (double e : err)
            l1 += e * dx;
        out.rows.push_back({dx, l1, solver.steps()});
        hs.push_back(dx);
        errs.push_back(l1);
    }
    out.slope = fit_log_slope(hs, errs);
    return out;
}

FdEnsemble compare_with_hopf_lax(const PowerLawFlux& flux, const ProcessSpec& process,
                                 const FdEnsembleOptions& opt)
{
    validate(process);
    validate(opt.fd);
    if (opt.seeds < 2)
        throw DomainError("need at least two seeds");
    if (opt.t_grid.empty() || !std::is_sorted(opt.t_grid.begin(), opt.t_grid.end()) ||
        !(opt.t_grid.front() > 0.0))
        throw DomainError("t grid must be positive and increasing");
    if (!(opt.window_lo >= opt.lo && opt.window_hi <= opt.hi && opt.window_lo < opt.window_hi))
        throw DomainError("statistics window must lie inside the domain");

    const double dx = opt.fd.dx;
    const auto xs = cell_centers(opt.lo, opt.hi, dx);
    std::vector<std::size_t> window;
    for (std::size_t k = 0; k < xs.size(); ++k)
        if (xs[k] >= opt.window_lo && xs[k] <= opt.window_hi)
            window.push_back(k);
    if (window.size() < 2)
        throw DomainError("statistics window holds fewer than two cells");
    std::size_t centre = window.front();
    for (std::size_t k : window)
        if (std::abs(xs[k]) < std::abs(xs[centre]))
            centre = k;

    const std::size_t nt = opt.t_grid.size();
    const auto seeds = static_cast<std::size_t>(opt.seeds);
    // per seed, per t
    std::vector<double> tv_fd(seeds * nt), tv_hl(seeds * nt), w0_fd(seeds * nt),
        w0_hl(seeds * nt), l1(seeds * nt);
    std::vector<int> trunc(seeds * nt);

    parallel_for(seeds, [&](std::size_t s) {
        RngStream rng = RngStream::derive(opt.seed, s);
        const PathSample sample = sample_path(process, xs, rng);
        const DensePath path = dense_path(sample);
        FdSolver solver(flux, sample.gprime, opt.fd);
        std::vector<double> fd_win(window.size()), hl_win(window.size());
        for (std::size_t it = 0; it < nt; ++it) {
            const double t = opt.t_grid[it];
            solver.advance_to(t);
            int tr = 0;
            double dist = 0.0;
            for (std::size_t m = 0; m < window.size(); ++m) {
                const std::size_t k = window[m];
                const auto sol = solve_power_law(flux, path, xs[k], t);
                fd_win[m] = solver.state()[k];
                hl_win[m] = sol.result.w;
                tr += sol.truncated ? 1 : 0;
                dist += std::abs(fd_win[m] - hl_win[m]) * dx;
                if (k == centre) {
                    w0_fd[s * nt + it] = fd_win[m];
                    w0_hl[s * nt + it] = hl_win[m];
                }
            }
            tv_fd[s * nt + it] = total_variation(fd_win);
            tv_hl[s * nt + it] = total_variation(hl_win);
            l1[s * nt + it] = dist;
            trunc[s * nt + it] = tr;
        }
    });

    FdEnsemble out;
    out.x0 = xs[centre];
    out.seeds = opt.seeds;
    auto column = [&](const std::vector<double>& v, std::size_t it) {
        std::vector<double> c(seeds);
        for (std::size_t s = 0; s < seeds; ++s)
            c[s] = v[s * nt + it];
        return moments(c);
    };
    for (std::size_t it = 0; it < nt; ++it) {
        FdEnsembleRow row;
        row.t = opt.t_grid[it];
        const Moments a = column(tv_fd, it), b = column(tv_hl, it), c = column(w0_fd, it),
                      d = column(w0_hl, it), e = column(l1, it);
        row.tv_fd = a.mean;
        row.tv_fd_se = a.se;
        row.tv_hl = b.mean;
        row.tv_hl_se = b.se;
        row.var_fd = c.var;
        row.var_fd_se = c.var_se;
        row.var_hl = d.var;
        row.var_hl_se = d.var_se;
        row.l1 = e.mean;
        row.l1_se = e.se;
        for (std::size_t s = 0; s < seeds; ++s)
            row.truncated += trunc[s * nt + it];
        out.rows.push_back(row);
    }
    return out;
}

}  // namespace eflux
