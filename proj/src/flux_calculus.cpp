#include "eflux/flux_calculus.hpp"

#include <algorithm>
#include <string>

#include "eflux/errors.hpp"

namespace eflux {

namespace {

template <class... Ts>
struct overloaded : Ts... {
    using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

void validate_polygonal(const PolygonalFlux& f)
{
    if (f.slopes.empty())
        throw DomainError("polygonal flux needs at least one slope");
    if (f.slopes.size() != f.breakpoints.size() + 1)
        throw DomainError("polygonal flux needs exactly one more slope than breakpoints");
    for (std::size_t i = 1; i < f.slopes.size(); ++i)
        if (!(f.slopes[i] > f.slopes[i - 1]))
            throw DomainError("polygonal flux slopes must be strictly increasing");
    for (std::size_t i = 1; i < f.breakpoints.size(); ++i)
        if (!(f.breakpoints[i] > f.breakpoints[i - 1]))
            throw DomainError("polygonal flux breakpoints must be strictly increasing");
    for (double v : f.slopes)
        if (!std::isfinite(v))
            throw DomainError("polygonal flux slopes must be finite");
    for (double v : f.breakpoints)
        if (!std::isfinite(v))
            throw DomainError("polygonal flux breakpoints must be finite");
    if (f.breakpoints.empty() && !f.pivot)
        throw DomainError("affine flux needs a pivot point");
}

// H with H(c_1) = 0 (or H(0) = 0 when there are no kinks).
double raw_polygonal(const PolygonalFlux& f, double p)
{
    const auto& m = f.slopes;
    const auto& c = f.breakpoints;
    if (c.empty())
        return m[0] * p;
    if (p <= c[0])
        return m[0] * (p - c[0]);
    double h = 0.0;
    std::size_t k = 0;
    while (k + 1 < c.size() && p > c[k + 1]) {
        h += m[k + 1] * (c[k + 1] - c[k]);
        ++k;
    }
    return h + m[k + 1] * (p - c[k]);
}

double polygonal_value(const PolygonalFlux& f, double p)
{
    const double pivot = f.pivot ? *f.pivot : f.breakpoints.front();
    return raw_polygonal(f, p) - raw_polygonal(f, pivot) + f.offset;
}

}  // namespace

void validate(const FluxSpec& flux)
{
    std::visit(overloaded{
                   [](const PolygonalFlux& f) { validate_polygonal(f); },
                   [](const PowerLawFlux& f) {
                       if (!(f.j >= 2.0) || !std::isfinite(f.j))
                           throw DomainError("power-law flux needs j >= 2");
                   },
                   [](const AbsoluteValueFlux&) {},
               },
               flux);
}

bool has_finite_support(const FluxSpec& flux)
{
    return !std::holds_alternative<PowerLawFlux>(flux);
}

PolygonalFlux as_polygonal(const FluxSpec& flux)
{
    validate(flux);
    if (const auto* p = std::get_if<PolygonalFlux>(&flux))
        return *p;
    if (std::holds_alternative<AbsoluteValueFlux>(flux))
        return PolygonalFlux{{-1.0, 1.0}, {0.0}, 0.0, std::nullopt};
    throw DomainError("power-law flux has no polygonal form");
}

double flux_value(const FluxSpec& flux, double p)
{
    return std::visit(overloaded{
                          [p](const PolygonalFlux& f) { return polygonal_value(f, p); },
                          [p](const PowerLawFlux& f) { return std::pow(std::abs(p), f.j) / f.j; },
                          [p](const AbsoluteValueFlux&) { return std::abs(p); },
                      },
                      flux);
}

double max_flux_speed(const FluxSpec& flux, double lo, double hi)
{
    if (lo > hi)
        std::swap(lo, hi);
    return std::visit(overloaded{
                          [&](const PolygonalFlux& f) {
                              const auto& m = f.slopes;
                              const auto& c = f.breakpoints;
                              double best = 0.0;
                              for (std::size_t k = 0; k < m.size(); ++k) {
                                  // slope m_k holds on [c_{k-1}, c_k]
                                  const double a = k == 0 ? -INFINITY : c[k - 1];
                                  const double b = k == c.size() ? INFINITY : c[k];
                                  if (a <= hi && b >= lo)
                                      best = std::max(best, std::abs(m[k]));
                              }
                              return best;
                          },
                          [&](const PowerLawFlux& f) {
                              return std::pow(std::max(std::abs(lo), std::abs(hi)), f.j - 1.0);
                          },
                          [](const AbsoluteValueFlux&) { return 1.0; },
                      },
                      flux);
}

std::optional<double> flux_minimizer(const FluxSpec& flux)
{
    if (const auto* f = std::get_if<PolygonalFlux>(&flux)) {
        const auto& m = f->slopes;
        const auto& c = f->breakpoints;
        if (c.empty())
            return m[0] == 0.0 ? f->pivot : std::nullopt;
        if (m[0] > 0.0 || m.back() < 0.0)
            return std::nullopt;
        for (std::size_t k = 0; k < c.size(); ++k)
            if (m[k + 1] >= 0.0)
                return c[k];
        return std::nullopt;
    }
    return 0.0;
}

double ExtendedReal::value() const
{
    if (!finite_)
        throw DomainError("value() of +infinity");
    return value_;
}

LegendreTransform LegendreTransform::polygonal(std::vector<AffinePiece> pieces)
{
    if (pieces.empty())
        throw DomainError("polygonal Legendre transform needs a piece");
    LegendreTransform L;
    L.pieces_ = std::move(pieces);
    L.q_min_ = L.pieces_.front().q_lo;
    L.q_max_ = L.pieces_.back().q_hi;
    return L;
}

LegendreTransform LegendreTransform::power_law(double j)
{
    if (!(j >= 2.0))
        throw DomainError("power-law flux needs j >= 2");
    LegendreTransform L;
    L.j_ = j;
    return L;
}

ExtendedReal LegendreTransform::operator()(double q) const
{
    if (!in_support(q))
        return ExtendedReal::infinity();
    if (!is_polygonal())
        return (j_ - 1.0) / j_ * std::pow(std::abs(q), j_ / (j_ - 1.0));
    auto it = std::lower_bound(pieces_.begin(), pieces_.end(), q,
                               [](const AffinePiece& a, double v) { return a.q_hi < v; });
    if (it == pieces_.end())
        it = pieces_.end() - 1;
    return it->slope * q + it->intercept;
}

double LegendreTransform::derivative(double q) const
{
    if (!in_support(q))
        throw DomainError("L' requested outside the finite support");
    if (!is_polygonal())
        return std::copysign(std::pow(std::abs(q), 1.0 / (j_ - 1.0)), q);
    for (const auto& piece : pieces_)
        if (q >= piece.q_lo && q < piece.q_hi)
            return piece.slope;
    return pieces_.back().slope;
}

LegendreTransform legendre(const FluxSpec& flux)
{
    validate(flux);
    if (const auto* p = std::get_if<PowerLawFlux>(&flux))
        return LegendreTransform::power_law(p->j);

    const PolygonalFlux f = as_polygonal(flux);
    const auto& m = f.slopes;
    const auto& c = f.breakpoints;
    if (c.empty()) {
        // Affine H: L is finite at the single slope.
        return LegendreTransform::polygonal({{m[0], m[0], *f.pivot, -f.offset}});
    }

    // Upper envelope of the lines q -> c_k q - H(c_k), slopes increasing.
    struct Line {
        double slope;
        double intercept;
    };
    auto cross = [](const Line& a, const Line& b) {
        return (a.intercept - b.intercept) / (b.slope - a.slope);
    };
    std::vector<Line> hull;
    for (double ck : c) {
        Line line{ck, -polygonal_value(f, ck)};
        while (hull.size() >= 2 &&
               cross(hull[hull.size() - 2], line) <= cross(hull[hull.size() - 2], hull.back()))
            hull.pop_back();
        hull.push_back(line);
    }

    const double q_lo = m.front();
    const double q_hi = m.back();
    std::vector<AffinePiece> pieces;
    for (std::size_t k = 0; k < hull.size(); ++k) {
        double a = k == 0 ? q_lo : cross(hull[k - 1], hull[k]);
        double b = k + 1 == hull.size() ? q_hi : cross(hull[k], hull[k + 1]);
        a = std::max(a, q_lo);
        b = std::min(b, q_hi);
        if (b > a)
            pieces.push_back({a, b, hull[k].slope, hull[k].intercept});
    }
    return LegendreTransform::polygonal(std::move(pieces));
}

ExtendedReal eval_shifted(const LegendreTransform& L, double x, double t, double y)
{
    if (!(t > 0.0))
        throw DomainError("eval_shifted needs t > 0");
    return t * L((x - y) / t);
}

PolygonalFlux polygonalize(const std::vector<std::pair<double, double>>& samples)
{
    if (samples.size() < 2)
        throw DomainError("polygonalize needs at least two samples");
    std::vector<double> slopes;
    for (std::size_t k = 1; k < samples.size(); ++k) {
        const double dp = samples[k].first - samples[k - 1].first;
        if (!(dp > 0.0))
            throw DomainError("polygonalize needs strictly increasing abscissae");
        slopes.push_back((samples[k].second - samples[k - 1].second) / dp);
        if (slopes.size() > 1 && !(slopes.back() > slopes[slopes.size() - 2]))
            throw DomainError("polygonalize: samples are not strictly convex at p = " +
                              std::to_string(samples[k - 1].first));
    }
    PolygonalFlux f;
    f.slopes = std::move(slopes);
    if (samples.size() == 2) {
        f.pivot = samples[0].first;
        f.offset = samples[0].second;
        return f;
    }
    for (std::size_t k = 1; k + 1 < samples.size(); ++k)
        f.breakpoints.push_back(samples[k].first);
    f.offset = samples[1].second;
    return f;
}

}  // namespace eflux
