#pragma once

#include <cmath>
#include <limits>
#include <optional>
#include <utility>
#include <variant>
#include <vector>

namespace eflux {

// Convex piecewise-linear H. slopes m_1 < ... < m_{N+1}, kinks c_1 < ... < c_N.
// H(pivot) = offset, where pivot defaults to c_1. With no kinks H is affine and
// pivot must be given.
struct PolygonalFlux {
    std::vector<double> slopes;
    std::vector<double> breakpoints;
    double offset = 0.0;
    std::optional<double> pivot;
};

// H(p) = |p|^j / j
struct PowerLawFlux {
    double j = 2.0;
};

// H(p) = |p|
struct AbsoluteValueFlux {};

using FluxSpec = std::variant<PolygonalFlux, PowerLawFlux, AbsoluteValueFlux>;

void validate(const FluxSpec& flux);
bool has_finite_support(const FluxSpec& flux);

// Polygonal view of a flux with finite Legendre support; AbsoluteValue maps to
// slopes (-1, 1) with a kink at 0.
PolygonalFlux as_polygonal(const FluxSpec& flux);

double flux_value(const FluxSpec& flux, double p);
// max |H'| over [lo, hi]
double max_flux_speed(const FluxSpec& flux, double lo, double hi);
// A minimizer of H, if H is bounded below.
std::optional<double> flux_minimizer(const FluxSpec& flux);

// Real number or +infinity, kept apart so that no sentinel float leaks into
// comparisons.
class ExtendedReal {
public:
    ExtendedReal(double v) : value_(v), finite_(true) {}
    static ExtendedReal infinity() { return ExtendedReal(); }

    bool is_finite() const { return finite_; }
    double value() const;

    friend bool operator<(const ExtendedReal& a, const ExtendedReal& b)
    {
        if (!a.finite_)
            return false;
        return !b.finite_ || a.value_ < b.value_;
    }
    friend bool operator==(const ExtendedReal& a, const ExtendedReal& b)
    {
        return a.finite_ == b.finite_ && (!a.finite_ || a.value_ == b.value_);
    }
    friend ExtendedReal operator+(const ExtendedReal& a, double b)
    {
        return a.finite_ ? ExtendedReal(a.value_ + b) : a;
    }
    friend ExtendedReal operator*(double s, const ExtendedReal& a)
    {
        return a.finite_ ? ExtendedReal(s * a.value_) : a;
    }

private:
    ExtendedReal() : value_(0.0), finite_(false) {}
    double value_;
    bool finite_;
};

struct AffinePiece {
    double q_lo;
    double q_hi;
    double slope;
    double intercept;
};

class LegendreTransform {
public:
    static LegendreTransform polygonal(std::vector<AffinePiece> pieces);
    static LegendreTransform power_law(double j);

    bool is_polygonal() const { return !pieces_.empty(); }
    double q_min() const { return q_min_; }
    double q_max() const { return q_max_; }
    bool in_support(double q) const { return q >= q_min_ && q <= q_max_; }

    ExtendedReal operator()(double q) const;
    // L'(q); at a kink the right slope, at q_max the left one.
    double derivative(double q) const;

    const std::vector<AffinePiece>& pieces() const { return pieces_; }
    double exponent() const { return j_; }

private:
    std::vector<AffinePiece> pieces_;
    double j_ = 0.0;
    double q_min_ = -std::numeric_limits<double>::infinity();
    double q_max_ = std::numeric_limits<double>::infinity();
};

LegendreTransform legendre(const FluxSpec& flux);

// t L((x - y) / t)
ExtendedReal eval_shifted(const LegendreTransform& L, double x, double t, double y);

// Secant interpolant through samples (p_k, H(p_k)), p strictly increasing.
PolygonalFlux polygonalize(const std::vector<std::pair<double, double>>& samples);

}  // namespace eflux
