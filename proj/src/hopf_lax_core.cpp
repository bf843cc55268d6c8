#include "eflux/hopf_lax_core.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "eflux/csv.hpp"
#include "eflux/errors.hpp"

namespace eflux {

double VariationalGrid::max_spacing() const
{
    double h = 0.0;
    for (std::size_t k = 1; k < points.size(); ++k)
        h = std::max(h, points[k] - points[k - 1]);
    return h;
}

VariationalGrid build_grid(const FluxSpec& flux, double x, double t, std::vector<int> counts)
{
    if (!(t > 0.0))
        throw DomainError("grid needs t > 0");
    if (!has_finite_support(flux))
        throw DomainError("variational grid needs a polygonal or absolute-value flux");
    const PolygonalFlux poly = as_polygonal(flux);
    const int N = static_cast<int>(poly.breakpoints.size());
    if (N < 1)
        throw DomainError("variational grid needs at least one flux breakpoint");
    if (counts.size() == 1 && N > 1)
        counts.assign(static_cast<std::size_t>(N), counts[0]);
    if (static_cast<int>(counts.size()) != N)
        throw DomainError("points_per_segment must have one entry per segment");
    for (int n : counts)
        if (n < 1)
            throw DomainError("every segment needs at least one interior point");

    const LegendreTransform L = legendre(flux);
    if (static_cast<int>(L.pieces().size()) != N)
        throw NumericalError("Legendre transform lost a segment");

    VariationalGrid grid;
    grid.x = x;
    grid.t = t;
    grid.counts = counts;

    auto push = [&](double y, double q, PointRole role, int owner) {
        const ExtendedReal l = L(q);
        if (!l.is_finite())
            throw NumericalError("grid point outside the finite support of L");
        grid.points.push_back(y);
        grid.q.push_back(q);
        grid.lterm.push_back(t * l.value());
        grid.roles.push_back(role);
        grid.owner.push_back(owner);
    };

    const auto& m = poly.slopes;
    for (int k = 0; k <= N; ++k) {
        const double qv = m[static_cast<std::size_t>(N - k)];
        grid.vertex_index.push_back(grid.points.size());
        push(x - qv * t, qv, PointRole::Vertex, k);
        if (k == N)
            break;
        const double a = x - qv * t;
        const double b = x - m[static_cast<std::size_t>(N - k - 1)] * t;
        const int n = counts[static_cast<std::size_t>(k)];
        for (int j = 1; j <= n; ++j) {
            const double y = a + (b - a) * j / (n + 1);
            push(y, (x - y) / t, PointRole::Interior, k);
        }
        grid.segment_values.push_back(L.pieces()[static_cast<std::size_t>(N - 1 - k)].slope);
    }
    return grid;
}

SamplePath restrict_path(const VariationalGrid& grid, const PathSample& path)
{
    SamplePath out;
    out.g.reserve(grid.size());
    out.gprime.reserve(grid.size());
    for (double y : grid.points) {
        const long k = path.find(y);
        if (k < 0) {
            std::ostringstream msg;
            msg << "path does not cover grid point " << y;
            throw DomainError(msg.str());
        }
        out.g.push_back(path.g[static_cast<std::size_t>(k)]);
        out.gprime.push_back(path.gprime[static_cast<std::size_t>(k)]);
    }
    return out;
}

std::vector<double> objective(const VariationalGrid& grid, const SamplePath& path)
{
    if (path.g.size() != grid.size())
        throw DomainError("path and grid sizes differ");
    std::vector<double> y(grid.size());
    for (std::size_t k = 0; k < grid.size(); ++k)
        y[k] = path.g[k] + grid.lterm[k];
    return y;
}

std::size_t greatest_argmin(const std::vector<double>& values)
{
    std::size_t best = 0;
    for (std::size_t k = 1; k < values.size(); ++k)
        if (values[k] <= values[best])
            best = k;
    return best;
}

MinimizerResult solve_path(const VariationalGrid& grid, const SamplePath& path)
{
    if (path.gprime.size() != grid.size() ||
        (!path.gprime_left.empty() && path.gprime_left.size() != grid.size()))
        throw DomainError("path and grid sizes differ");
    const std::vector<double> y = objective(grid, path);
    const std::size_t k = greatest_argmin(y);

    MinimizerResult r;
    r.index = k;
    r.y_star = grid.points[k];
    r.q_value = y[k];
    if (grid.roles[k] == PointRole::Interior) {
        r.location = {LocationKind::SegmentInterior, grid.owner[k], -1};
        r.w = grid.segment_values[static_cast<std::size_t>(grid.owner[k])];
        r.w_left = r.w;
    } else {
        r.location = {LocationKind::VertexOfL, -1, grid.owner[k]};
        r.w = path.gprime[k];
        r.w_left = r.w;
        if (!path.gprime_left.empty() && path.gprime_left[k] != path.gprime[k]) {
            r.location.kind = LocationKind::Coincident;
            r.w_left = path.gprime_left[k];
        }
    }
    return r;
}

DensePath dense_path(const std::function<double(double)>& g,
                     const std::function<double(double)>& gprime, double lo, double hi,
                     std::size_t n)
{
    if (n < 2 || !(hi > lo))
        throw DomainError("dense path needs n >= 2 and hi > lo");
    DensePath p;
    p.y0 = lo;
    p.dy = (hi - lo) / static_cast<double>(n - 1);
    p.g.resize(n);
    p.gprime.resize(n);
    for (std::size_t k = 0; k < n; ++k) {
        const double y = p.y(k);
        p.g[k] = g(y);
        p.gprime[k] = gprime(y);
    }
    return p;
}

DensePath dense_path(const PathSample& path)
{
    const std::size_t n = path.points.size();
    if (n < 2)
        throw DomainError("dense path needs at least two points");
    DensePath p;
    p.y0 = path.points.front();
    p.dy = (path.points.back() - path.points.front()) / static_cast<double>(n - 1);
    for (std::size_t k = 0; k < n; ++k)
        if (std::abs(path.points[k] - p.y(k)) > 1e-9 * std::max(1.0, std::abs(p.y(k))))
            throw DomainError("dense path needs a uniform grid");
    p.g = path.g;
    p.gprime = path.gprime;
    return p;
}

PowerLawSolution solve_power_law(const PowerLawFlux& flux, const DensePath& path, double x, double t)
{
    if (!(t > 0.0))
        throw DomainError("solve_power_law needs t > 0");
    if (!(flux.j >= 2.0))
        throw DomainError("power-law flux needs j >= 2");
    const std::size_t n = path.g.size();
    if (n < 2 || (!path.gprime.empty() && path.gprime.size() != n))
        throw DomainError("dense path is malformed");

    double slope = 0.0;
    if (!path.gprime.empty()) {
        for (double v : path.gprime)
            slope = std::max(slope, std::abs(v));
    } else {
        for (std::size_t k = 1; k < n; ++k)
            slope = std::max(slope, std::abs(path.g[k] - path.g[k - 1]) / path.dy);
    }
    const double j = flux.j;
    const double Q = std::pow(slope + 1.0, j - 1.0);

    PowerLawSolution sol;
    sol.window_lo = std::max(x - Q * t, path.y0);
    sol.window_hi = std::min(x + Q * t, path.y_end());
    if (sol.window_lo > sol.window_hi)
        throw DomainError("dense path does not reach the minimization window");
    const auto k_lo = static_cast<std::size_t>(std::ceil((sol.window_lo - path.y0) / path.dy - 1e-9));
    const auto k_hi = std::min(
        n - 1, static_cast<std::size_t>(std::floor((sol.window_hi - path.y0) / path.dy + 1e-9)));

    const double e = j / (j - 1.0);
    const double c = (j - 1.0) / j;
    std::size_t best = k_lo;
    double best_val = INFINITY;
    for (std::size_t k = k_lo; k <= k_hi; ++k) {
        const double q = (x - path.y(k)) / t;
        const double l = j == 2.0 ? 0.5 * q * q : c * std::pow(std::abs(q), e);
        const double v = t * l + path.g[k];
        if (v <= best_val) {
            best_val = v;
            best = k;
        }
    }
    sol.truncated = best == k_lo || best == k_hi;

    const double ys = path.y(best);
    const double d = x - ys;
    MinimizerResult& r = sol.result;
    r.index = best;
    r.y_star = ys;
    r.q_value = best_val;
    r.location = {LocationKind::SegmentInterior, -1, -1};
    r.w = std::copysign(std::pow(std::abs(d), 1.0 / (j - 1.0)) * std::pow(t, -1.0 / (j - 1.0)), d);
    r.w_left = r.w;
    const double via_derivative = legendre(flux).derivative(d / t);
    if (std::abs(r.w - via_derivative) > 1e-12 * std::max(1.0, std::abs(r.w)))
        throw NumericalError("solution value disagrees with L'((x - y*)/t)");
    return sol;
}

int ScanProfile::shock_count() const
{
    return static_cast<int>(
        std::count_if(points.begin(), points.end(), [](const ScanPoint& p) { return p.shock; }));
}

std::vector<double> scan_points(double x_lo, double x_hi, double dx)
{
    if (!(dx > 0.0) || !(x_hi >= x_lo))
        throw DomainError("scan needs dx > 0 and x_hi >= x_lo");
    const auto n = static_cast<std::size_t>(std::floor((x_hi - x_lo) / dx + 1e-9));
    std::vector<double> xs(n + 1);
    for (std::size_t k = 0; k <= n; ++k)
        xs[k] = x_lo + static_cast<double>(k) * dx;
    return xs;
}

std::vector<double> scan_support(const FluxSpec& flux, double t, const std::vector<double>& xs,
                                 const std::vector<int>& counts)
{
    std::vector<double> pts;
    for (double x : xs) {
        const auto grid = build_grid(flux, x, t, counts);
        pts.insert(pts.end(), grid.points.begin(), grid.points.end());
    }
    std::sort(pts.begin(), pts.end());
    return pts;
}

namespace {

int region_of(const Location& loc)
{
    if (loc.kind == LocationKind::SegmentInterior)
        return 2;
    return loc.vertex == 0 ? 1 : 3;
}

std::string region_label(const Location& a, const Location& b)
{
    const int ra = region_of(a), rb = region_of(b);
    if (ra == 1 && rb == 2)
        return "I->II";
    if (ra == 1 && rb == 3)
        return "I->III";
    if (ra == 2 && rb == 3)
        return "II->III";
    return "other";
}

}  // namespace

ScanProfile scan_x(const FluxSpec& flux, double t, const std::vector<double>& xs,
                   const std::vector<int>& counts, const PathSample& path)
{
    const bool absolute = std::holds_alternative<AbsoluteValueFlux>(flux);
    ScanProfile prof;
    prof.t = t;
    prof.points.reserve(xs.size());
    double prev_h = 0.0;
    for (std::size_t k = 0; k < xs.size(); ++k) {
        const auto grid = build_grid(flux, xs[k], t, counts);
        const auto r = solve_path(grid, restrict_path(grid, path));
        ScanPoint p;
        p.x = xs[k];
        p.w = r.w;
        p.y_star = r.y_star;
        p.location = r.location;
        const double h = grid.max_spacing();
        if (k > 0) {
            const ScanPoint& prev = prof.points.back();
            // A class change only counts as a shock when the minimizer jumps;
            // a minimizer sliding onto a vertex is a continuous transition.
            const double step = xs[k] - xs[k - 1];
            const double tol = 1.5 * (std::max(h, prev_h) + step);
            if (!(prev.location == p.location) && p.y_star - prev.y_star > tol) {
                p.shock = true;
                if (absolute)
                    p.region_transition = region_label(prev.location, p.location);
            }
        }
        prev_h = h;
        prof.points.push_back(std::move(p));
    }
    return prof;
}

ScanProfile scan_x(const FluxSpec& flux, const ProcessSpec& process, double t, double x_lo,
                   double x_hi, double dx, RngStream& rng, const std::vector<int>& counts)
{
    const auto xs = scan_points(x_lo, x_hi, dx);
    const auto path = sample_path(process, scan_support(flux, t, xs, counts), rng);
    return scan_x(flux, t, xs, counts, path);
}

std::string location_name(const Location& loc)
{
    switch (loc.kind) {
    case LocationKind::SegmentInterior:
        return "segment";
    case LocationKind::VertexOfL:
        return "vertex";
    case LocationKind::Coincident:
        return "coincident";
    }
    return "unknown";
}

int location_index(const Location& loc)
{
    return (loc.kind == LocationKind::SegmentInterior ? loc.segment : loc.vertex) + 1;
}

std::string profile_csv(const ScanProfile& profile)
{
    std::ostringstream out;
    out << "x,w,location_class,segment_index,shock_flag,region_transition\n";
    for (const auto& p : profile.points)
        out << num(p.x) << ',' << num(p.w) << ',' << location_name(p.location) << ','
            << location_index(p.location) << ',' << (p.shock ? 1 : 0) << ','
            << p.region_transition << '\n';
    return out.str();
}

}  // namespace eflux
