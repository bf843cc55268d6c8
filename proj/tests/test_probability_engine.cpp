#include <cmath>
#include <memory>
#include <numeric>

#include "doctest.h"
#include "eflux/errors.hpp"
#include "eflux/probability_engine.hpp"
#include "test_support.hpp"

using namespace eflux;

namespace {

// H with slopes (-1, 0, 1) and kinks at -c, c; L(q) = c |q| on [-1, 1].
FluxSpec two_segment(double c = 0.5)
{
    return PolygonalFlux{{-1.0, 0.0, 1.0}, {-c, c}, 0.0, std::nullopt};
}

ProcessSpec bm(double sigma = 1.0)
{
    ProcessSpec s;
    s.sigma = sigma;
    return s;
}

// g = 5 (y - 0.5)^2 - 1.25, no randomness
ProcessSpec well()
{
    ProcessSpec s;
    s.sigma = 0.0;
    s.drift = {-5.0, 10.0};
    return s;
}

bool near(double a, double b) { return std::abs(a - b) < 1e-9; }

// Independent unit-variance objective values at the interior points (mean
// chosen to cancel the L term) and deterministic, far-away vertices.
ProcessSpec exchangeable(const std::vector<double>& interior, double lslope)
{
    auto is_interior = [interior](double y) {
        for (double p : interior)
            if (near(y, p))
                return true;
        return false;
    };
    auto k = std::make_shared<CustomKernel>();
    k->cov_g = [is_interior](double s, double t) { return near(s, t) && is_interior(s) ? 1.0 : 0.0; };
    k->cov_x = [](double, double) { return 0.0; };
    k->cov_gx = [](double, double) { return 0.0; };
    k->mean_g = [is_interior, lslope](double y) { return is_interior(y) ? -lslope * std::abs(y) : 100.0; };
    ProcessSpec s;
    s.kind = ProcessKind::Custom;
    s.custom = k;
    return s;
}

}  // namespace

TEST_CASE("deterministic minimum on the second segment")
{
    const auto mc = segment_probabilities_mc(two_segment(), well(), 0.0, 1.0, {3}, 50, 1);
    const auto qd = segment_probabilities_quadrature(two_segment(), well(), 0.0, 1.0, {1});
    for (const auto* p : {&mc, &qd}) {
        REQUIRE(p->p.size() == 5);
        CHECK(p->p[1] == 1.0);
        CHECK(std::accumulate(p->p.begin(), p->p.end(), 0.0) == 1.0);
    }
    // w on the right segment is L' = -1/2 there, and matches solve_path.
    const VariationalGrid grid = build_grid(two_segment(), 0.0, 1.0, {3});
    RngStream rng(3);
    const auto r = solve_path(grid, restrict_path(grid, sample_path(well(), grid.points, rng)));
    CHECK(r.location.segment == 1);
    CHECK(expected_solution(qd) == r.w);
    CHECK(expected_solution(mc) == r.w);
    CHECK(expected_slope_average(qd) == -r.w);
}

TEST_CASE("exchangeable pair splits evenly")
{
    // x = 0, t = 1, one interior point per segment at -1/2 and 1/2
    const ProcessSpec p = exchangeable({-0.5, 0.5}, 0.5);
    const auto qd = segment_probabilities_quadrature(two_segment(), p, 0.0, 1.0, {1});
    CHECK(qd.p[0] == doctest::Approx(0.5).epsilon(1e-6));
    CHECK(qd.p[1] == doctest::Approx(0.5).epsilon(1e-6));
    for (int j = 2; j < 5; ++j)
        CHECK(qd.p[static_cast<std::size_t>(j)] == doctest::Approx(0.0).epsilon(1e-12));

    const auto mc = segment_probabilities_mc(two_segment(), p, 0.0, 1.0, {1}, 20000, 11);
    CHECK(within_se(mc.p[0], mc.se[0], 0.5));
    CHECK(within_se(mc.p[1], mc.se[1], 0.5));
    double total = 0.0;
    for (double v : mc.p)
        total += v * 20000.0;
    CHECK(total == 20000.0);

    // a single candidate is the minimum with certainty
    CHECK(minimum_probability(Eigen::VectorXd::Constant(1, 0.3), Eigen::MatrixXd::Identity(1, 1), 0) == 1.0);
}

TEST_CASE("quadrature agrees with sampling on a five-candidate instance")
{
    const auto flux = two_segment(0.3);
    const ProcessSpec p = bm();
    const auto qd = segment_probabilities_quadrature(flux, p, 0.3, 0.5, {1});
    const double total = std::accumulate(qd.p.begin(), qd.p.end(), 0.0);
    CHECK(total == doctest::Approx(1.0).epsilon(1e-6));
    const std::size_t trials = 200000;
    const auto mc = segment_probabilities_mc(flux, p, 0.3, 0.5, {1}, trials, 5);
    for (std::size_t c = 0; c < qd.p.size(); ++c) {
        const double se = std::sqrt(qd.p[c] * (1 - qd.p[c]) / trials);
        INFO("class " << c << " quadrature " << qd.p[c] << " mc " << mc.p[c]);
        CHECK(within_se(mc.p[c], se, qd.p[c], 4.0));
    }
    // full expectation, vertex terms included
    INFO("E{w} quadrature " << qd.expected_w << " mc " << mc.expected_w << " +- " << mc.expected_w_se);
    CHECK(within_se(mc.expected_w, mc.expected_w_se, qd.expected_w, 4.0));
    for (int j = 0; j < 3; ++j)
        CHECK(within_se(mc.vertex_terms[static_cast<std::size_t>(j)], mc.vertex_terms_se[static_cast<std::size_t>(j)],
                        qd.vertex_terms[static_cast<std::size_t>(j)], 4.0));
    CHECK(expected_solution(mc) == doctest::Approx(mc.expected_w).epsilon(1e-12));
}

TEST_CASE("mirror-symmetric instance has zero mean solution")
{
    // BM anchored at x = 0 and L even: y -> -y flips w
    const auto qd = segment_probabilities_quadrature(two_segment(), bm(), 0.0, 0.8, {1});
    CHECK(std::abs(qd.expected_w) < 1e-6);
    CHECK(qd.p[0] == doctest::Approx(qd.p[1]).epsilon(1e-6));
    const auto mc = segment_probabilities_mc(two_segment(), bm(), 0.0, 0.8, {2}, 40000, 8);
    CHECK(within_se(mc.expected_w, mc.expected_w_se, 0.0));
}

TEST_CASE("dimension cap")
{
    CHECK_THROWS_AS(segment_probabilities_quadrature(two_segment(), bm(), 0.2, 0.5, {3}), DimensionCapError);
    CHECK_NOTHROW(segment_probabilities_quadrature(two_segment(), bm(), 0.2, 0.5, {2, 1}));
}

TEST_CASE("minimum cdf")
{
    // a vertex is a single Gaussian candidate: F(mean) = 1/2
    const auto cs = candidate_set(two_segment(), bm(), 0.4, 0.5, {1});
    const std::size_t v = cs.grid.vertex_index[2];
    const double mu = cs.mean(static_cast<Eigen::Index>(v));
    const double sd = std::sqrt(cs.cov(static_cast<Eigen::Index>(v), static_cast<Eigen::Index>(v)));
    const auto single = minimum_cdf(two_segment(), bm(), 0.4, 0.5, {1}, {true, 2}, {mu, mu + sd}, Method::Quadrature);
    CHECK(single.values[0] == doctest::Approx(0.5).epsilon(1e-8));
    CHECK(single.values[1] == doctest::Approx(0.5 * std::erfc(-1.0 / std::sqrt(2.0))).epsilon(1e-8));

    // two i.i.d. standard normals on the left segment: F(0) = 1 - 1/4
    const ProcessSpec p = exchangeable({-2.0 / 3.0, -1.0 / 3.0, 1.0 / 3.0, 2.0 / 3.0}, 0.5);
    std::vector<double> s;
    for (int i = -12; i <= 12; ++i)
        s.push_back(0.25 * i);
    const auto q = minimum_cdf(two_segment(), p, 0.0, 1.0, {2}, {false, 0}, s, Method::Quadrature);
    CHECK(q.values[12] == doctest::Approx(0.75).epsilon(1e-8));
    const auto m = minimum_cdf(two_segment(), p, 0.0, 1.0, {2}, {false, 0}, s, Method::MonteCarlo, 20000, 2);
    CHECK(within_se(m.values[12], m.se[12], 0.75));
    for (std::size_t i = 0; i < s.size(); ++i) {
        CHECK(q.values[i] >= 0.0);
        CHECK(q.values[i] <= 1.0);
        if (i > 0) {
            CHECK(q.values[i] >= q.values[i - 1] - 1e-9);
            CHECK(m.values[i] >= m.values[i - 1]);
        }
    }
    const double tail = 0.5 * std::erfc(3.0 / std::sqrt(2.0));
    CHECK(q.values.front() == doctest::Approx(1.0 - (1.0 - tail) * (1.0 - tail)).epsilon(1e-8));
    CHECK(q.values.back() > 1.0 - 1e-4);
}

TEST_CASE("Richardson weights")
{
    const auto w = richardson_weights({1e-2, 5e-3, 2.5e-3});
    CHECK(w[0] == doctest::Approx(1.0 / 3.0));
    CHECK(w[1] == doctest::Approx(-2.0));
    CHECK(w[2] == doctest::Approx(8.0 / 3.0));
    // exact for quadratics in the step
    const std::vector<double> h{0.3, 0.2, 0.05};
    const auto v = richardson_weights(h);
    double e = 0.0;
    for (std::size_t i = 0; i < h.size(); ++i)
        e += v[i] * (2.0 - h[i] + 4.0 * h[i] * h[i]);
    CHECK(e == doctest::Approx(2.0).epsilon(1e-12));
    CHECK_THROWS_AS(richardson_weights({1e-2, 1e-2}), DomainError);
    CHECK_THROWS_AS(richardson_weights({5e-3, 1e-2}), DomainError);
}

TEST_CASE("shock densities: admissibility and agreement with finite differences")
{
    // x at the anchor: the middle vertex has g' = 0 exactly
    const auto flux = two_segment();
    const auto qd = shock_density_quadrature(flux, bm(), 0.0, 0.5, {1});
    REQUIRE(qd.d.size() == 2);
    CHECK(qd.d[0] < qd.d[1]);
    CHECK(qd.segment_to_segment(1, 0) == 0.0);  // d_1 <= d_0
    CHECK(qd.segment_to_segment(0, 1) > 0.0);
    // middle vertex: d_1 + g' = 1/2 > 0 blocks segment 1 -> vertex, and
    // d_0 + g' = -1/2 < 0 blocks vertex -> segment 0
    CHECK(qd.segment_to_vertex(1, 1) == 0.0);
    CHECK(qd.vertex_to_segment(1, 0) == 0.0);
    CHECK(qd.segment_to_vertex(0, 1) > 0.0);

    const auto mc = shock_density_mc(flux, bm(), 0.0, 0.5, {1}, {1e-2, 5e-3, 2.5e-3}, 200000, 17);
    CHECK(mc.segment_to_segment(1, 0) == 0.0);
    // one event at the finest step is the resolution of the estimator
    const double floor = 8.0 / 3.0 / (2.5e-3 * 200000.0);
    auto agree = [floor](double est, double se, double truth) {
        INFO("mc " << est << " +- " << se << " quadrature " << truth);
        CHECK(std::abs(est - truth) <= 4.0 * se + floor);
    };
    agree(mc.segment_to_segment(0, 1), mc.segment_to_segment_se(0, 1), qd.segment_to_segment(0, 1));
    for (int i = 0; i < 2; ++i)
        for (int j = 0; j < 3; ++j) {
            agree(mc.segment_to_vertex(i, j), mc.segment_to_vertex_se(i, j), qd.segment_to_vertex(i, j));
            agree(mc.vertex_to_segment(j, i), mc.vertex_to_segment_se(j, i), qd.vertex_to_segment(j, i));
        }
    agree(mc.total_density, mc.total_density_se, qd.total_density);

    // no randomness: nothing switches away from isolated x
    const auto det = shock_density_quadrature(flux, well(), 0.1, 1.0, {1});
    CHECK(det.total_density == 0.0);
    const auto detmc = shock_density_mc(flux, well(), 0.1, 1.0, {1}, {1e-2, 5e-3}, 200, 1);
    CHECK(detmc.total_density == 0.0);
}

TEST_CASE("spectrum of the integrated random walk precision")
{
    for (int n : {100, 200}) {
        const auto r = spectrum_report(n);
        CHECK(r.eigenvalues.front() > 0.0);
        CHECK(std::is_sorted(r.eigenvalues.begin(), r.eigenvalues.end()));
        CHECK(r.fraction_within_1pct >= 0.5);
        CHECK(r.unit_matches);
        CHECK_FALSE(r.literal_matches);
        MESSAGE("N=" << n << " median " << r.median << " fraction " << r.fraction_within_1pct
                     << " literal median " << r.median_literal << " ratio " << r.top_to_middle_ratio);
        CHECK(r.top_to_middle_ratio > 8.0);
    }
    CHECK_THROWS_AS(spectrum_report(4), DomainError);
}

TEST_CASE("truncated spectrum")
{
    const CovarianceModel model = build_covariance_model(bm(), {0.5, 1.0, 1.5});
    const auto full = truncated_spectrum_probability(model, 3);
    for (std::size_t k = 0; k < 3; ++k)
        CHECK(full.truncated[k] == doctest::Approx(full.exact[k]).epsilon(1e-8));
    CHECK(full.max_abs_error < 1e-8);
    const auto one = truncated_spectrum_probability(model, 1);
    MESSAGE("n'=1 error " << one.max_abs_error);
    CHECK(std::accumulate(one.truncated.begin(), one.truncated.end(), 0.0) ==
          doctest::Approx(1.0).epsilon(1e-6));
    const auto flat = truncated_spectrum_probability(model, 2, TruncationMode::Flatten);
    MESSAGE("n'=2 flattened error " << flat.max_abs_error);
    CHECK_THROWS_AS(truncated_spectrum_probability(model, 4), DomainError);

    // orthogonal change of variables leaves an orthant probability unchanged
    const Eigen::MatrixXd& U = model.eigenvectors;
    const Eigen::MatrixXd rebuilt = U * model.eigenvalues.cwiseInverse().asDiagonal() * U.transpose();
    const Eigen::Vector3d lo(-0.1, 0.0, 0.2);
    CHECK(orthant_probability(model.mean, rebuilt, lo) ==
          doctest::Approx(orthant_probability(model.mean, model.sigma, lo)).epsilon(1e-8));
}

TEST_CASE("variance law")
{
    for (double j : {2.0, 3.0, 4.0}) {
        const auto r = variance_law(PowerLawFlux{j}, bm(), 0.3, 0.5, 200, 4);
        CHECK(r.residual <= 1e-12);
        CHECK(r.var_w > 0.0);
        if (j == 2)
            CHECK(r.truncated == 0);
        else
            MESSAGE("j=" << j << ": " << r.truncated << " of 200 windows reach the path edge");
    }
    const auto det = variance_law(PowerLawFlux{2.0}, well(), 0.3, 0.5, 20, 4);
    CHECK(det.var_w == 0.0);

    std::vector<double> v, se;
    for (double x : {0.2, 0.4, 0.6}) {
        const auto r = variance_law(PowerLawFlux{2.0}, bm(), x, 0.5, 1500, 21, {}, -3.0, 3.0, 4e-3);
        v.push_back(r.var_w);
        se.push_back(r.var_w_se);
    }
    MESSAGE("Var(w) at x = 0.2, 0.4, 0.6: " << v[0] << " " << v[1] << " " << v[2]);
    for (std::size_t i = 1; i < 3; ++i)
        CHECK(v[i] >= v[i - 1] - 3.0 * std::hypot(se[i], se[i - 1]));

    const auto grid = variance_law(PowerLawFlux{2.0}, bm(), 0.0, 0.5, 300, 9, {0.25, 0.5, 1.0}, -3.0, 3.0, 4e-3);
    CHECK(grid.var_w0.size() == 3);
    MESSAGE("fit p " << grid.fit_p << " Var(w(0,t)) exponent " << grid.fit_w_exponent);
}

TEST_CASE("shock monotonicity study")
{
    ProcessSpec mono;
    mono.sigma = 0.0;
    mono.drift = {1.0};
    const auto zero = shock_monotonicity_study(mono, {0.25, 0.5}, 1.0, 2.0, 0.01, 8, 3, 1);
    for (const auto& r : zero.rows)
        CHECK(r.density == 0.0);

    const auto s = shock_monotonicity_study(bm(), {0.25, 0.5}, 1.0, 2.0, 0.01, 16, 60, 2);
    REQUIRE(s.rows.size() == 2);
    for (const auto& r : s.rows) {
        CHECK(r.density > 0.0);
        CHECK(r.i_to_ii + r.i_to_iii + r.ii_to_iii + r.other == doctest::Approx(r.density));
    }
    REQUIRE(s.diff_mean.size() == 1);
    CHECK(s.diff_mean[0] == doctest::Approx(s.rows[1].density - s.rows[0].density));
}

TEST_CASE("convergence study")
{
    const auto c = convergence_study(0.5, 0.25, {4, 6, 8, 10}, 2000, 3);
    for (const auto& r : c.rows)
        CHECK(r.p_left + r.p_interior + r.p_right == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(c.tail_bound == doctest::Approx(0.1875));
    CHECK(c.tail_frequency <= c.tail_bound);
    CHECK(c.successive_diff.size() == 3);
    CHECK_THROWS_AS(convergence_study(0.1, 0.25, {4, 6}, 10, 1), DomainError);
    CHECK_THROWS_AS(convergence_study(0.5, 0.25, {6, 4}, 10, 1), DomainError);
}

TEST_CASE("Monte Carlo results do not depend on the worker count")
{
    set_thread_count(1);
    const auto a = segment_probabilities_mc(two_segment(), bm(), 0.3, 0.5, {2}, 3000, 9);
    set_thread_count(4);
    const auto b = segment_probabilities_mc(two_segment(), bm(), 0.3, 0.5, {2}, 3000, 9);
    set_thread_count(0);
    CHECK(a.p == b.p);
    CHECK(a.expected_w == b.expected_w);
}
