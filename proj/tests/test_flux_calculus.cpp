#include <cmath>
#include <random>

#include "doctest.h"
#include "eflux/errors.hpp"
#include "eflux/flux_calculus.hpp"

using namespace eflux;

namespace {

// sup_p (p q - H(p)) over a dense grid that contains every kink of H
double brute_conjugate(const FluxSpec& H, double q, double lo, double hi,
                       const std::vector<double>& kinks)
{
    double best = -INFINITY;
    const int n = 20000;
    for (int k = 0; k <= n; ++k) {
        const double p = lo + (hi - lo) * k / n;
        best = std::max(best, p * q - flux_value(H, p));
    }
    for (double p : kinks)
        best = std::max(best, p * q - flux_value(H, p));
    return best;
}

PolygonalFlux three_piece()
{
    return PolygonalFlux{{-2.0, -0.5, 0.25, 1.5}, {-1.0, 0.2, 0.9}, 0.3, std::nullopt};
}

}  // namespace

TEST_CASE("power-law transform")
{
    const auto L2 = legendre(PowerLawFlux{2.0});
    CHECK(L2(0.7).value() == doctest::Approx(0.245).epsilon(1e-15));
    CHECK(L2.derivative(-0.3) == doctest::Approx(-0.3));

    const auto L4 = legendre(PowerLawFlux{4.0});
    CHECK(L4(2.0).value() == doctest::Approx(0.75 * std::pow(2.0, 4.0 / 3.0)));
    CHECK(L4.derivative(8.0) == doctest::Approx(2.0));
    CHECK(L4.derivative(-8.0) == doctest::Approx(-2.0));
    CHECK(!L4.is_polygonal());
}

TEST_CASE("absolute value transform and its polygonal twin")
{
    const auto La = legendre(AbsoluteValueFlux{});
    CHECK(La.q_min() == -1.0);
    CHECK(La.q_max() == 1.0);
    CHECK(La(0.3).value() == 0.0);
    CHECK(La(-1.0).value() == 0.0);
    CHECK(!La(1.5).is_finite());
    CHECK(!La(-1.0000001).is_finite());

    const auto Lp = legendre(PolygonalFlux{{-1.0, 1.0}, {0.0}, 0.0, std::nullopt});
    REQUIRE(Lp.pieces().size() == 1);
    CHECK(Lp.pieces()[0].q_lo == -1.0);
    CHECK(Lp.pieces()[0].q_hi == 1.0);
    for (double q : {-1.0, -0.4, 0.0, 0.8, 1.0})
        CHECK(Lp(q) == La(q));
    CHECK(!Lp(1.01).is_finite());
}

TEST_CASE("eval_shifted")
{
    const auto La = legendre(AbsoluteValueFlux{});
    CHECK(eval_shifted(La, 0.0, 1.0, 0.5).value() == 0.0);
    CHECK(!eval_shifted(La, 0.0, 1.0, 2.0).is_finite());
    CHECK(!eval_shifted(La, 0.0, 1.0, -1.5).is_finite());
    CHECK(eval_shifted(La, 0.0, 1.0, 1.0).is_finite());

    const auto L2 = legendre(PowerLawFlux{2.0});
    CHECK(eval_shifted(L2, 1.0, 2.0, 0.0).value() == doctest::Approx(0.25));
    CHECK_THROWS_AS(eval_shifted(L2, 1.0, 0.0, 0.0), DomainError);
}

TEST_CASE("polygonal transform matches a dense conjugate and the slope statement")
{
    const PolygonalFlux H = three_piece();
    CHECK(flux_value(H, -1.0) == doctest::Approx(0.3));
    const auto L = legendre(H);
    CHECK(L.q_min() == -2.0);
    CHECK(L.q_max() == 1.5);
    REQUIRE(L.pieces().size() == 3);
    for (std::size_t i = 0; i < 3; ++i) {
        // on [m_i, m_{i+1}] the slope of L is c_i
        CHECK(L.pieces()[i].slope == doctest::Approx(H.breakpoints[i]));
        CHECK(L.pieces()[i].q_lo == doctest::Approx(H.slopes[i]));
        CHECK(L.pieces()[i].q_hi == doctest::Approx(H.slopes[i + 1]));
    }
    for (double q = -2.0; q <= 1.5; q += 0.0625)
        CHECK(L(q).value() == doctest::Approx(brute_conjugate(H, q, -4.0, 4.0, H.breakpoints))
                                  .epsilon(1e-12));
    CHECK(!L(1.5000001).is_finite());
    CHECK(!L(-2.1).is_finite());
}

TEST_CASE("involution at slope-interval midpoints")
{
    std::mt19937_64 gen(7);
    std::uniform_real_distribution<double> u(0.05, 1.0);
    for (int rep = 0; rep < 20; ++rep) {
        PolygonalFlux H;
        const int N = 1 + rep % 5;
        double m = -2.0 * u(gen), c = -1.0 + u(gen) - 0.5;
        H.slopes.push_back(m);
        for (int i = 0; i < N; ++i) {
            H.breakpoints.push_back(c);
            c += u(gen);
            m += u(gen);
            H.slopes.push_back(m);
        }
        H.offset = u(gen) - 0.5;
        const auto L = legendre(H);

        // L*(p) = max over the kinks and support ends of L of (p q - L(q))
        std::vector<double> qs;
        for (const auto& piece : L.pieces())
            qs.push_back(piece.q_lo);
        qs.push_back(L.q_max());
        auto conj = [&](double p) {
            double best = -INFINITY;
            for (double q : qs)
                best = std::max(best, p * q - L(q).value());
            return best;
        };
        for (int i = 0; i + 1 < N; ++i) {
            const double p = 0.5 * (H.breakpoints[i] + H.breakpoints[i + 1]);
            CHECK(std::abs(conj(p) - flux_value(H, p)) <= 1e-12);
        }
        for (double p : H.breakpoints)
            CHECK(std::abs(conj(p) - flux_value(H, p)) <= 1e-12);
    }
}

TEST_CASE("L' is nondecreasing on the support")
{
    for (const FluxSpec& f : {FluxSpec{three_piece()}, FluxSpec{PowerLawFlux{3.0}},
                              FluxSpec{AbsoluteValueFlux{}}}) {
        const auto L = legendre(f);
        const double lo = std::isfinite(L.q_min()) ? L.q_min() : -5.0;
        const double hi = std::isfinite(L.q_max()) ? L.q_max() : 5.0;
        double prev = -INFINITY;
        for (int k = 0; k < 1000; ++k) {
            const double q = lo + (hi - lo) * k / 999.0;
            const double d = L.derivative(q);
            CHECK(d >= prev);
            prev = d;
        }
    }
}

TEST_CASE("Fenchel equality for power laws")
{
    std::mt19937_64 gen(11);
    std::uniform_real_distribution<double> u(-3.0, 3.0);
    for (double j : {2.0, 3.0, 4.0, 2.5}) {
        const FluxSpec H = PowerLawFlux{j};
        const auto L = legendre(H);
        for (int k = 0; k < 100; ++k) {
            const double q = u(gen);
            const double p = L.derivative(q);
            CHECK(std::abs(L(q).value() - (q * p - flux_value(H, p))) <= 1e-10);
        }
    }
}

TEST_CASE("polygonalize")
{
    auto parabola = [](int segments, double lo, double hi) {
        std::vector<std::pair<double, double>> s;
        for (int k = 0; k <= segments; ++k) {
            const double p = lo + (hi - lo) * k / segments;
            s.emplace_back(p, p * p / 2.0);
        }
        return s;
    };
    const auto three = polygonalize(parabola(2, -1.0, 1.0));
    REQUIRE(three.slopes.size() == 2);
    CHECK(three.slopes[0] == doctest::Approx(-0.5));
    CHECK(three.slopes[1] == doctest::Approx(0.5));
    CHECK(three.breakpoints == std::vector<double>{0.0});

    const auto fine = polygonalize(parabola(64, -1.0, 1.0));
    const auto L = legendre(fine);
    CHECK(std::abs(L(0.5).value() - 0.125) <= 1e-2);
    double prev_err = INFINITY;
    for (int segs : {4, 16, 64}) {
        const double err = std::abs(legendre(polygonalize(parabola(segs, -1.0, 1.0)))(0.5).value() - 0.125);
        CHECK(err <= prev_err);
        prev_err = err;
    }

    const auto two = polygonalize({{0.0, 1.0}, {2.0, 3.0}});
    const auto L2 = legendre(two);
    CHECK(L2.q_min() == 1.0);
    CHECK(L2.q_max() == 1.0);
    // H(p) = p + 1, so L(1) = -1
    CHECK(L2(1.0).value() == doctest::Approx(-1.0));
    CHECK(!L2(1.1).is_finite());

    CHECK_THROWS_AS(polygonalize({{0.0, 0.0}, {1.0, 1.0}, {2.0, 1.5}}), DomainError);
    CHECK_THROWS_AS(polygonalize({{0.0, 0.0}}), DomainError);
}

TEST_CASE("flux validation and speeds")
{
    CHECK_THROWS_AS(validate(FluxSpec{PolygonalFlux{{1.0, 0.0}, {0.0}, 0.0, std::nullopt}}),
                    DomainError);
    CHECK_THROWS_AS(validate(FluxSpec{PolygonalFlux{{-1.0, 0.0, 1.0}, {0.0}, 0.0, std::nullopt}}),
                    DomainError);
    CHECK_THROWS_AS(validate(FluxSpec{PowerLawFlux{1.5}}), DomainError);
    CHECK_THROWS_AS(as_polygonal(PowerLawFlux{2.0}), DomainError);

    CHECK(max_flux_speed(AbsoluteValueFlux{}, -3.0, 2.0) == 1.0);
    CHECK(max_flux_speed(PowerLawFlux{2.0}, -3.0, 2.0) == 3.0);
    CHECK(max_flux_speed(three_piece(), 0.3, 0.5) == 0.25);
    CHECK(max_flux_speed(three_piece(), -5.0, 0.5) == 2.0);
    CHECK(*flux_minimizer(three_piece()) == 0.2);
    CHECK(!flux_minimizer(PolygonalFlux{{0.5, 1.0}, {0.0}, 0.0, std::nullopt}));
}
