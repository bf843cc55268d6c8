#pragma once

#include <functional>
#include <string>
#include <vector>

#include "eflux/flux_calculus.hpp"
#include "eflux/process_models.hpp"

namespace eflux {

enum class PointRole { Vertex, Interior };

// Candidate points for min_y { g(y) + t L((x - y) / t) }. Vertices of L map to
// r_k = x - m_{N+2-k} t (left to right); grid segment i lies between r_i and
// r_{i+1} and carries the constant solution value segment_values[i].
// All indices are 0-based here.
struct VariationalGrid {
    double x = 0.0;
    double t = 1.0;
    std::vector<double> points;
    std::vector<PointRole> roles;
    std::vector<int> owner;  // vertex k or segment i
    std::vector<double> q;
    std::vector<double> lterm;  // t L(q), always finite
    std::vector<int> counts;
    std::vector<double> segment_values;
    std::vector<std::size_t> vertex_index;

    int segments() const { return static_cast<int>(counts.size()); }
    int vertices() const { return static_cast<int>(vertex_index.size()); }
    std::size_t size() const { return points.size(); }
    std::size_t interior_count() const { return points.size() - vertex_index.size(); }
    // y-slope of t L((x - y) / t) on segment i
    double segment_slope(int i) const { return -segment_values[static_cast<std::size_t>(i)]; }
    double max_spacing() const;
};

// counts gives n_i per segment; a single entry is applied to every segment.
VariationalGrid build_grid(const FluxSpec& flux, double x, double t, std::vector<int> counts);

// g and g' restricted to a grid. gprime_left is optional (left derivative,
// only meaningful where g has a kink).
struct SamplePath {
    std::vector<double> gprime;
    std::vector<double> g;
    std::vector<double> gprime_left;
};

SamplePath restrict_path(const VariationalGrid& grid, const PathSample& path);
std::vector<double> objective(const VariationalGrid& grid, const SamplePath& path);

enum class LocationKind { SegmentInterior, VertexOfL, Coincident };

struct Location {
    LocationKind kind = LocationKind::SegmentInterior;
    int segment = -1;
    int vertex = -1;

    friend bool operator==(const Location&, const Location&) = default;
};

struct MinimizerResult {
    double y_star = 0.0;
    std::size_t index = 0;
    Location location;
    double q_value = 0.0;
    double w = 0.0;
    double w_left = 0.0;
};

// Largest index attaining the minimum.
std::size_t greatest_argmin(const std::vector<double>& values);

MinimizerResult solve_path(const VariationalGrid& grid, const SamplePath& path);

// g (and g') on a uniform grid y_k = y0 + k dy.
struct DensePath {
    double y0 = 0.0;
    double dy = 1.0;
    std::vector<double> g;
    std::vector<double> gprime;

    double y(std::size_t k) const { return y0 + static_cast<double>(k) * dy; }
    double y_end() const { return y(g.size() - 1); }
};

DensePath dense_path(const std::function<double(double)>& g,
                     const std::function<double(double)>& gprime, double lo, double hi,
                     std::size_t n);
// Path already sampled on a uniform grid.
DensePath dense_path(const PathSample& path);

struct PowerLawSolution {
    MinimizerResult result;
    bool truncated = false;
    double window_lo = 0.0;
    double window_hi = 0.0;
};

// Brute-force minimization over the dense grid inside [x - Q t, x + Q t],
// Q = (max |g'| + 1)^(j-1), clipped to the coverage.
PowerLawSolution solve_power_law(const PowerLawFlux& flux, const DensePath& path, double x, double t);

struct ScanPoint {
    double x = 0.0;
    double w = 0.0;
    double y_star = 0.0;
    Location location;
    bool shock = false;
    std::string region_transition;  // AbsoluteValue only: "I->II", "I->III", "II->III", "other"
};

struct ScanProfile {
    double t = 0.0;
    std::vector<ScanPoint> points;
    int shock_count() const;
};

std::vector<double> scan_points(double x_lo, double x_hi, double dx);

// Every grid point needed to scan xs at time t.
std::vector<double> scan_support(const FluxSpec& flux, double t, const std::vector<double>& xs,
                                 const std::vector<int>& counts);

// Scan over a path sampled once on a superset of all per-x grids.
ScanProfile scan_x(const FluxSpec& flux, double t, const std::vector<double>& xs,
                   const std::vector<int>& counts, const PathSample& path);

ScanProfile scan_x(const FluxSpec& flux, const ProcessSpec& process, double t, double x_lo,
                   double x_hi, double dx, RngStream& rng, const std::vector<int>& counts = {8});

// x, w, location_class, segment_index, shock_flag, region_transition
std::string profile_csv(const ScanProfile& profile);

std::string location_name(const Location& loc);
int location_index(const Location& loc);  // 1-based segment or vertex number

}  // namespace eflux
