#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <vector>

#include "eflux/flux_calculus.hpp"
#include "eflux/gaussian_quadrature.hpp"
#include "eflux/hopf_lax_core.hpp"
#include "eflux/process_models.hpp"

namespace eflux {

// Largest number of grid candidates the nested quadrature accepts.
constexpr int kQuadratureDimensionCap = 7;

enum class Method { Quadrature, MonteCarlo };

// Joint Gaussian law of the objective values Y_k = g(y_k) + t L(q_k) on a grid
// (indices 0..n-1) followed by g' at each vertex (indices n..n+V-1).
struct CandidateSet {
    VariationalGrid grid;
    Eigen::VectorXd mean;
    Eigen::MatrixXd cov;

    int candidates() const { return static_cast<int>(grid.size()); }
    int slope_row(int vertex) const { return candidates() + vertex; }
};

CandidateSet candidate_set(const FluxSpec& flux, const ProcessSpec& process, double x, double t,
                           const std::vector<int>& counts);

// Class numbering shared by every estimator: segments 0..N-1, then vertices N..2N.
int class_of(const VariationalGrid& grid, const Location& loc);

struct SegmentProbabilities {
    std::vector<double> p;   // 2N+1 entries
    std::vector<double> se;  // zero for quadrature
    // E[g'(y*) ; minimum at vertex j], the vertex contribution to E{w}
    std::vector<double> vertex_terms;
    std::vector<double> vertex_terms_se;
    std::vector<double> segment_values;  // w on each segment
    double expected_w = 0.0;
    double expected_w_se = 0.0;
    Method method = Method::Quadrature;
    std::size_t trials = 0;

    int segments() const { return static_cast<int>(segment_values.size()); }
};

SegmentProbabilities segment_probabilities_mc(const FluxSpec& flux, const ProcessSpec& process,
                                              double x, double t, const std::vector<int>& counts,
                                              std::size_t trials, std::uint64_t master_seed);

// Throws DimensionCapError above kQuadratureDimensionCap candidates.
SegmentProbabilities segment_probabilities_quadrature(const FluxSpec& flux,
                                                      const ProcessSpec& process, double x,
                                                      double t, const std::vector<int>& counts,
                                                      const QuadratureOptions& opts = {});

// sum_i p_i w_i + sum_j E[g'(y*) ; vertex j]
double expected_solution(const SegmentProbabilities& probs);
// sum_i p_i d_i with d_i = -w_i the y-slope of the L term, i.e. the weighted
// average of -c_{N+1-i}. Opposite in sign to the segment part above and
// missing the vertex terms; kept for comparison.
double expected_slope_average(const SegmentProbabilities& probs);

struct CdfTarget {
    bool vertex = false;
    int index = 0;  // 0-based segment or vertex
};

struct CdfCurve {
    CdfTarget target;
    std::vector<double> s;
    std::vector<double> values;
    std::vector<double> se;
    Method method = Method::Quadrature;
};

// F(s) = P(min over the target's candidates <= s).
CdfCurve minimum_cdf(const FluxSpec& flux, const ProcessSpec& process, double x, double t,
                     const std::vector<int>& counts, CdfTarget target, const std::vector<double>& s,
                     Method method, std::size_t trials = 0, std::uint64_t master_seed = 0,
                     const QuadratureOptions& opts = {});

struct ShockDensityResult {
    // Densities per unit x of a left-to-right change of the minimizer class.
    Eigen::MatrixXd segment_to_segment;  // N x N
    Eigen::MatrixXd segment_to_vertex;   // N x (N+1)
    Eigen::MatrixXd vertex_to_segment;   // (N+1) x N
    Eigen::MatrixXd segment_to_segment_se;
    Eigen::MatrixXd segment_to_vertex_se;
    Eigen::MatrixXd vertex_to_segment_se;
    double total_density = 0.0;
    double total_density_se = 0.0;
    std::vector<double> d;  // y-slope of the L term on each segment
    Method method = Method::Quadrature;
    std::size_t trials = 0;
    std::vector<double> dx;
};

// Richardson weights that extrapolate values at the given steps to step 0.
std::vector<double> richardson_weights(const std::vector<double>& steps);

// Finite difference P{class a at x, class b at x + dx} / dx over a strictly
// decreasing dx sequence, extrapolated to dx = 0 trial by trial.
ShockDensityResult shock_density_mc(const FluxSpec& flux, const ProcessSpec& process, double x,
                                    double t, const std::vector<int>& counts,
                                    const std::vector<double>& dx, std::size_t trials,
                                    std::uint64_t master_seed);

ShockDensityResult shock_density_quadrature(const FluxSpec& flux, const ProcessSpec& process,
                                            double x, double t, const std::vector<int>& counts,
                                            const QuadratureOptions& opts = {});

// Sigma_ij = min(i,j)^2 (max(i,j)/2 - min(i,j)/6), i, j = 1..N (unit spacing),
// and its inverse A. The literal scaling divides Sigma by N^3, multiplying A by N^3.
struct SpectrumReport {
    int n = 0;
    std::vector<double> diag;
    std::vector<double> eigenvalues;  // of A, ascending
    double median = 0.0;
    double fraction_within_1pct = 0.0;
    double median_literal = 0.0;
    double reference = 14.354;
    bool unit_matches = false;
    bool literal_matches = false;
    double top_to_middle_ratio = 0.0;  // lambda_N / lambda_ceil(N/2)
};

SpectrumReport spectrum_report(int n);

enum class TruncationMode { Drop, Flatten };

struct TruncatedProbabilities {
    std::vector<double> truncated;  // per candidate
    std::vector<double> exact;
    double max_abs_error = 0.0;
    int kept = 0;
};

// Probabilities that each candidate is the minimum, computed in the rotated
// coordinates of A = Sigma^-1 keeping the n' eigendirections with the smallest
// eigenvalues of A (largest variance). Flatten also sets those eigenvalues to
// the smallest one. keep = dimension reproduces the exact result.
TruncatedProbabilities truncated_spectrum_probability(const CovarianceModel& model, int keep,
                                                      TruncationMode mode = TruncationMode::Drop,
                                                      const QuadratureOptions& opts = {});

struct VarianceLawResult {
    double var_w = 0.0;
    double var_w_se = 0.0;
    double var_transformed = 0.0;  // t^(-2/(j-1)) Var(sgn(x-y*)|x-y*|^(1/(j-1)))
    double residual = 0.0;         // relative
    std::size_t truncated = 0;     // samples whose minimizing window hit the path edge
    std::vector<double> t_grid;
    std::vector<double> var_w0;       // Var(w(0, t))
    std::vector<double> mean_abs_y0;  // E|y*(0, t)|
    std::vector<double> var_y0;       // Var(y*(0, t))
    double fit_p = 0.0;               // Var(y*) ~ E|y*|^p
    double fit_w_exponent = 0.0;      // Var(w(0,t)) ~ t^e
};

// Dense-grid power-law solutions on paths sampled over [lo, hi] with spacing dy.
VarianceLawResult variance_law(const PowerLawFlux& flux, const ProcessSpec& process, double x,
                               double t, std::size_t trials, std::uint64_t master_seed,
                               const std::vector<double>& t_grid = {}, double lo = -4.0,
                               double hi = 4.0, double dy = 2e-3);

struct ShockRow {
    double t = 0.0;
    double density = 0.0;  // jumps per unit x, averaged over seeds
    double se = 0.0;
    double i_to_ii = 0.0;
    double i_to_iii = 0.0;
    double ii_to_iii = 0.0;
    double other = 0.0;
    double local_probability = 0.0;  // P(jump within the first local_width of the window)
    double local_se = 0.0;
};

struct ShockMonotonicity {
    std::vector<ShockRow> rows;
    // Paired per-seed differences of each t against the previous one.
    std::vector<double> diff_mean;
    std::vector<double> diff_se;
    std::vector<double> local_diff_mean;
    std::vector<double> local_diff_se;
    std::size_t seeds = 0;
};

ShockMonotonicity shock_monotonicity_study(const ProcessSpec& process,
                                           const std::vector<double>& t_grid, double x_lo,
                                           double x_hi, double dx, int interior,
                                           std::size_t seeds, std::uint64_t master_seed,
                                           double local_width = 0.1);

struct ConvergenceRow {
    int level = 0;
    double p_left = 0.0;
    double p_interior = 0.0;
    double p_right = 0.0;
};

struct ConvergenceStudy {
    std::vector<ConvergenceRow> rows;
    std::vector<double> successive_diff;  // |P_M - P_next| for the left endpoint
    int tail_level = 0;
    double tail_alpha = 0.5;
    double tail_frequency = 0.0;  // P{sup |I_M - I_finest| > alpha}
    double tail_bound = 0.0;      // 3 (2^-M)^2 / alpha^4
    std::size_t trials = 0;
};

// Minimum of the discretized integrated BM over [x - t, x + t] (AbsoluteValue
// flux), classified as left endpoint, interior node or right endpoint.
ConvergenceStudy convergence_study(double x, double t, const std::vector<int>& levels,
                                   std::size_t trials, std::uint64_t master_seed,
                                   double tail_alpha = 0.5);

// Mean and standard error of a per-trial sample, summed in index order.
struct Moments {
    double mean = 0.0;
    double se = 0.0;
    double var = 0.0;
    double var_se = 0.0;
};
Moments moments(const std::vector<double>& v);

}  // namespace eflux
