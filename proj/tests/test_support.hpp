#pragma once

#include <cmath>
#include <vector>

// Sample covariance and its standard error from per-sample centred products.
struct CovEstimate {
    double value;
    double se;
};

inline CovEstimate estimate_cov(const std::vector<double>& a, const std::vector<double>& b)
{
    const double n = static_cast<double>(a.size());
    double ma = 0.0, mb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        ma += a[i];
        mb += b[i];
    }
    ma /= n;
    mb /= n;
    double m = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i)
        m += (a[i] - ma) * (b[i] - mb);
    m /= n;
    double v = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = (a[i] - ma) * (b[i] - mb) - m;
        v += d * d;
    }
    v /= (n - 1.0);
    return {m * n / (n - 1.0), std::sqrt(v / n)};
}

inline bool within_se(double estimate, double se, double truth, double k = 3.0)
{
    return std::abs(estimate - truth) <= k * se;
}

// Composite Gauss-Legendre (5 points) on [a, b] with `panels` panels.
template <class F>
double gl_integrate(F f, double a, double b, int panels = 200)
{
    static const double x[5] = {-0.9061798459386640, -0.5384693101056831, 0.0,
                                0.5384693101056831, 0.9061798459386640};
    static const double w[5] = {0.2369268850561891, 0.4786286704993665, 0.5688888888888889,
                                0.4786286704993665, 0.2369268850561891};
    const double h = (b - a) / panels;
    double acc = 0.0;
    for (int p = 0; p < panels; ++p) {
        const double c = a + (p + 0.5) * h;
        for (int k = 0; k < 5; ++k)
            acc += w[k] * f(c + 0.5 * h * x[k]);
    }
    return acc * 0.5 * h;
}

// Same, with the interval split at a known kink.
template <class F>
double gl_integrate_split(F f, double a, double b, double kink, int panels = 64)
{
    const double lo = std::min(a, b), hi = std::max(a, b);
    const double sgn = b >= a ? 1.0 : -1.0;
    if (kink <= lo || kink >= hi)
        return gl_integrate(f, a, b, panels);
    return sgn * (gl_integrate(f, lo, kink, panels) + gl_integrate(f, kink, hi, panels));
}
