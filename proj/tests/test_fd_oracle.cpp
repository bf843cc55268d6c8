#include <algorithm>
#include <cmath>
#include <numbers>

#include "doctest.h"
#include "eflux/errors.hpp"
#include "eflux/fd_oracle.hpp"
#include "eflux/hopf_lax_core.hpp"
#include "eflux/rng.hpp"

using namespace eflux;

namespace {

const FluxSpec kBurgers = PowerLawFlux{2.0};

std::vector<double> riemann(const std::vector<double>& xs, double wl, double wr)
{
    std::vector<double> w(xs.size());
    for (std::size_t k = 0; k < xs.size(); ++k)
        w[k] = xs[k] < 0.0 ? wl : wr;
    return w;
}

// First x where w drops through level, linearly interpolated.
double crossing(const std::vector<double>& xs, const std::vector<double>& w, double level)
{
    for (std::size_t k = 1; k < w.size(); ++k)
        if (w[k - 1] >= level && w[k] < level)
            return xs[k - 1] + (w[k - 1] - level) / (w[k - 1] - w[k]) * (xs[k] - xs[k - 1]);
    return NAN;
}

std::vector<double> noisy(std::size_t n, std::uint64_t seed)
{
    RngStream rng(seed);
    std::vector<double> w(n);
    for (auto& v : w)
        v = rng.normal();
    return w;
}

// Smooth Burgers data 0.5 + 0.25 sin(2 pi x) and its antiderivative.
double g_smooth(double y)
{
    return 0.5 * y - 0.25 / (2.0 * std::numbers::pi) * std::cos(2.0 * std::numbers::pi * y);
}
double w_smooth(double y) { return 0.5 + 0.25 * std::sin(2.0 * std::numbers::pi * y); }

// Characteristics: w(x, t) = w0(y) with y + t w0(y) = x, solved by Newton.
double burgers_exact(double x, double t)
{
    double y = x - t * w_smooth(x);
    for (int it = 0; it < 60; ++it) {
        const double f = y + t * w_smooth(y) - x;
        const double df = 1.0 + t * 0.5 * std::numbers::pi * std::cos(2.0 * std::numbers::pi * y);
        y -= f / df;
    }
    return w_smooth(y);
}

}  // namespace

TEST_CASE("CFL numbers outside (0, 1] are rejected")
{
    const std::vector<double> w(10, 1.0);
    FdConfig cfg;
    cfg.cfl = 1.2;
    CHECK_THROWS_AS(FdSolver(kBurgers, w, cfg), DomainError);
    cfg.cfl = 0.0;
    CHECK_THROWS_AS(evolve(kBurgers, w, 0.1, cfg), DomainError);
    cfg.cfl = 1.0;
    CHECK_NOTHROW(evolve(kBurgers, w, 0.1, cfg));
    CHECK_THROWS_AS(evolve(kBurgers, w, 0.0, FdConfig{}), DomainError);
}

TEST_CASE("time step follows the data range")
{
    FdConfig cfg;
    cfg.dx = 0.01;
    cfg.cfl = 0.8;
    FdSolver abs_solver(AbsoluteValueFlux{}, {-3.0, 2.0, 5.0}, cfg);
    CHECK(abs_solver.speed() == 1.0);
    CHECK(abs_solver.dt() == doctest::Approx(0.008));
    FdSolver burgers(kBurgers, {-3.0, 2.0, 0.5}, cfg);
    CHECK(burgers.speed() == 3.0);
}

TEST_CASE("Riemann shock moves at the Rankine-Hugoniot speed")
{
    const double dx = 0.01;
    const auto xs = cell_centers(-1.0, 1.0, dx);
    for (auto scheme : {FdScheme::LaxFriedrichs, FdScheme::EngquistOsher}) {
        FdConfig cfg;
        cfg.dx = dx;
        cfg.scheme = scheme;
        const auto w = evolve(kBurgers, riemann(xs, 1.0, 0.0), 0.5, cfg);
        const double pos = crossing(xs, w, 0.5);
        INFO("scheme " << static_cast<int>(scheme) << " shock at " << pos);
        CHECK(std::abs(pos - 0.25) <= 2.0 * dx);
    }
}

TEST_CASE("rarefaction fan error is first order up to a log factor")
{
    // Starting from a jump, monotone first-order schemes lose a log: the L1
    // error scales like dx |log dx|, so its log-slope creeps up toward 1.
    const double t = 0.5;
    const std::vector<double> hs{0.02, 0.01, 0.005};
    for (auto scheme : {FdScheme::LaxFriedrichs, FdScheme::EngquistOsher}) {
        std::vector<double> errs, scaled;
        for (double dx : hs) {
            const auto xs = cell_centers(-2.0, 2.0, dx);
            FdConfig cfg;
            cfg.dx = dx;
            cfg.scheme = scheme;
            const auto w = evolve(kBurgers, riemann(xs, -1.0, 1.0), t, cfg);
            double err = 0.0;
            for (std::size_t k = 0; k < xs.size(); ++k) {
                const double exact = std::clamp(xs[k] / t, -1.0, 1.0);
                err += std::abs(w[k] - exact) * dx;
            }
            errs.push_back(err);
            scaled.push_back(err / (dx * std::abs(std::log(dx))));
        }
        const double slope = std::log(errs[0] / errs[2]) / std::log(hs[0] / hs[2]);
        MESSAGE("scheme " << static_cast<int>(scheme) << " L1 " << errs[0] << " " << errs[1] << " "
                          << errs[2] << " slope " << slope);
        CHECK(errs[1] < errs[0]);
        CHECK(errs[2] < errs[1]);
        CHECK(scaled[2] <= 1.1 * scaled[0]);
        CHECK(scaled[2] <= 1.0);
    }
}

TEST_CASE("constant data are preserved exactly")
{
    const std::vector<FluxSpec> fluxes{kBurgers, AbsoluteValueFlux{},
                                       PolygonalFlux{{-1.0, 0.5, 2.0}, {0.0, 1.0}, 0.0, {}},
                                       PowerLawFlux{3.0}};
    for (const auto& flux : fluxes)
        for (auto scheme : {FdScheme::LaxFriedrichs, FdScheme::EngquistOsher})
            for (auto boundary : {FdBoundary::Periodic, FdBoundary::Outflow}) {
                FdConfig cfg;
                cfg.dx = 0.05;
                cfg.scheme = scheme;
                cfg.boundary = boundary;
                const std::vector<double> w0(40, 0.7);
                const auto w = evolve(flux, w0, 1.0, cfg);
                for (double v : w)
                    CHECK(v == 0.7);
            }
}

TEST_CASE("periodic runs conserve mass")
{
    const std::vector<FluxSpec> fluxes{kBurgers, AbsoluteValueFlux{},
                                       PolygonalFlux{{-1.0, 0.5, 2.0}, {0.0, 1.0}, 0.0, {}}};
    for (const auto& flux : fluxes)
        for (auto scheme : {FdScheme::LaxFriedrichs, FdScheme::EngquistOsher}) {
            FdConfig cfg;
            cfg.dx = 0.01;
            cfg.scheme = scheme;
            cfg.boundary = FdBoundary::Periodic;
            const auto w0 = noisy(300, 11);
            const auto w = evolve(flux, w0, 2.0, cfg);
            double m0 = 0.0, m1 = 0.0, scale = 0.0;
            for (std::size_t k = 0; k < w.size(); ++k) {
                m0 += w0[k] * cfg.dx;
                m1 += w[k] * cfg.dx;
                scale += std::abs(w0[k]) * cfg.dx;
            }
            CHECK(std::abs(m1 - m0) <= 1e-12 * scale);
        }
}

TEST_CASE("total variation never grows within a step")
{
    const std::vector<FluxSpec> fluxes{kBurgers, AbsoluteValueFlux{},
                                       PolygonalFlux{{-2.0, 0.0, 1.0}, {-0.5, 0.5}, 0.0, {}},
                                       PowerLawFlux{4.0}};
    for (const auto& flux : fluxes)
        for (auto scheme : {FdScheme::LaxFriedrichs, FdScheme::EngquistOsher})
            for (auto boundary : {FdBoundary::Periodic, FdBoundary::Outflow}) {
                FdConfig cfg;
                cfg.dx = 0.02;
                cfg.scheme = scheme;
                cfg.boundary = boundary;
                const bool periodic = boundary == FdBoundary::Periodic;
                FdSolver s(flux, noisy(200, 5), cfg);
                double tv = total_variation(s.state(), periodic);
                int grew = 0;
                while (s.time() < 1.0) {
                    s.step(1.0);
                    const double next = total_variation(s.state(), periodic);
                    if (next > tv * (1.0 + 1e-13))
                        ++grew;
                    tv = next;
                }
                CHECK(grew == 0);
                CHECK(s.steps() > 10);
            }
}

TEST_CASE("Hopf-Lax reference matches characteristics before the shock")
{
    // The dense minimization quantizes y* to hl_dy, so w is off by at most
    // hl_dy / (2 t) on smooth data.
    const double t = 0.3, dy = 1e-5;
    const auto path = dense_path(g_smooth, w_smooth, -1.0, 2.0, 300001);
    for (double x : {0.0, 0.13, 0.5, 0.77, 0.99}) {
        const double w = solve_power_law(PowerLawFlux{2.0}, path, x, t).result.w;
        CHECK(std::abs(w - burgers_exact(x, t)) <= dy / t);
    }
}

TEST_CASE("FD and Hopf-Lax profiles converge on smooth Burgers data")
{
    FdConfig cfg;
    cfg.boundary = FdBoundary::Periodic;
    const auto conv = fd_hopf_lax_convergence(PowerLawFlux{2.0}, g_smooth, w_smooth, 0.0, 1.0, 0.3,
                                              {1.0 / 50, 1.0 / 100, 1.0 / 200}, cfg, -1.0, 2.0,
                                              1e-5);
    REQUIRE(conv.rows.size() == 3);
    for (const auto& r : conv.rows)
        MESSAGE("dx " << r.dx << " L1 " << r.l1 << " steps " << r.steps);
    MESSAGE("slope " << conv.slope);
    CHECK(conv.rows[0].l1 > conv.rows[1].l1);
    CHECK(conv.rows[1].l1 > conv.rows[2].l1);
    CHECK(conv.slope >= 0.8);
}

TEST_CASE("ensemble study is reproducible and well formed")
{
    ProcessSpec bm;
    bm.domain_lo = -10.0;
    bm.domain_hi = 10.0;
    FdEnsembleOptions opt;
    opt.seeds = 24;
    opt.seed = 3;
    opt.fd.dx = 0.02;
    const auto a = compare_with_hopf_lax(PowerLawFlux{2.0}, bm, opt);
    set_thread_count(1);
    const auto b = compare_with_hopf_lax(PowerLawFlux{2.0}, bm, opt);
    set_thread_count(0);
    REQUIRE(a.rows.size() == 4);
    CHECK(std::abs(a.x0) == doctest::Approx(0.01));
    for (std::size_t i = 0; i < 4; ++i) {
        CHECK(a.rows[i].tv_fd == b.rows[i].tv_fd);
        CHECK(a.rows[i].var_hl == b.rows[i].var_hl);
        CHECK(a.rows[i].l1 == b.rows[i].l1);
        CHECK(a.rows[i].tv_fd > 0.0);
        CHECK(a.rows[i].var_fd > 0.0);
    }
    // the FD solution is smoother than the exact one
    CHECK(a.rows[0].tv_fd < a.rows[0].tv_hl);
    CHECK_THROWS_AS(
        [&] {
            auto bad = opt;
            bad.window_hi = 11.0;
            compare_with_hopf_lax(PowerLawFlux{2.0}, bm, bad);
        }(),
        DomainError);
}
