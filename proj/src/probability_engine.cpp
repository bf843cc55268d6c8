#include "eflux/probability_engine.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <string>

#include "eflux/errors.hpp"
#include "eflux/rng.hpp"

namespace eflux {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

void require_trials(std::size_t trials, std::size_t minimum)
{
    if (trials < minimum)
        throw DomainError("need at least " + std::to_string(minimum) + " trials");
}

void require_cap(int n)
{
    if (n > kQuadratureDimensionCap)
        throw DimensionCapError("quadrature handles at most " +
                                std::to_string(kQuadratureDimensionCap) + " candidates, got " +
                                std::to_string(n) + "; use the Monte Carlo estimator");
}

// Greatest minimizer over candidates given in increasing y.
std::size_t argmin_last(const std::vector<double>& v)
{
    std::size_t best = 0;
    for (std::size_t k = 1; k < v.size(); ++k)
        if (v[k] <= v[best])
            best = k;
    return best;
}

double slope_fit(const std::vector<double>& x, const std::vector<double>& y)
{
    std::vector<double> lx, ly;
    for (std::size_t i = 0; i < x.size(); ++i)
        if (x[i] > 0.0 && y[i] > 0.0) {
            lx.push_back(std::log(x[i]));
            ly.push_back(std::log(y[i]));
        }
    if (lx.size() < 2)
        return kNaN;
    const double n = static_cast<double>(lx.size());
    double mx = 0.0, my = 0.0;
    for (std::size_t i = 0; i < lx.size(); ++i) {
        mx += lx[i];
        my += ly[i];
    }
    mx /= n;
    my /= n;
    double sxy = 0.0, sxx = 0.0;
    for (std::size_t i = 0; i < lx.size(); ++i) {
        sxy += (lx[i] - mx) * (ly[i] - my);
        sxx += (lx[i] - mx) * (lx[i] - mx);
    }
    return sxx > 0.0 ? sxy / sxx : kNaN;
}

}  // namespace

Moments moments(const std::vector<double>& v)
{
    Moments m;
    const double n = static_cast<double>(v.size());
    if (v.empty())
        return m;
    // shifted by the first sample so constant data give exactly zero spread
    const double x0 = v.front();
    double shift = 0.0;
    for (double x : v)
        shift += x - x0;
    shift /= n;
    m.mean = x0 + shift;
    if (v.size() < 2)
        return m;
    double m2 = 0.0, m4 = 0.0;
    for (double x : v) {
        const double d = (x - x0 - shift) * (x - x0 - shift);
        m2 += d;
        m4 += d * d;
    }
    m.var = m2 / (n - 1.0);
    m.se = std::sqrt(m.var / n);
    const double pop = m2 / n;
    m.var_se = std::sqrt(std::max(0.0, m4 / n - pop * pop) / n);
    return m;
}

CandidateSet candidate_set(const FluxSpec& flux, const ProcessSpec& process, double x, double t,
                           const std::vector<int>& counts)
{
    validate(process);
    CandidateSet cs;
    cs.grid = build_grid(flux, x, t, counts);
    const auto& g = cs.grid;
    for (double y : g.points)
        if (!in_domain(process, y))
            throw DomainError("grid point " + std::to_string(y) + " outside the process domain");
    const int n = cs.candidates();
    const int V = g.vertices();
    cs.mean.resize(n + V);
    cs.cov.resize(n + V, n + V);
    std::vector<double> r(static_cast<std::size_t>(V));
    for (int j = 0; j < V; ++j)
        r[static_cast<std::size_t>(j)] = g.points[g.vertex_index[static_cast<std::size_t>(j)]];
    for (int k = 0; k < n; ++k) {
        const double yk = g.points[static_cast<std::size_t>(k)];
        cs.mean(k) = mean_g(process, yk) + g.lterm[static_cast<std::size_t>(k)];
        for (int l = 0; l <= k; ++l)
            cs.cov(k, l) = cs.cov(l, k) = cov_g(process, yk, g.points[static_cast<std::size_t>(l)]);
        for (int j = 0; j < V; ++j)
            cs.cov(k, n + j) = cs.cov(n + j, k) = cov_gx(process, yk, r[static_cast<std::size_t>(j)]);
    }
    for (int j = 0; j < V; ++j) {
        cs.mean(n + j) = mean_x(process, r[static_cast<std::size_t>(j)]);
        for (int i = 0; i <= j; ++i)
            cs.cov(n + j, n + i) = cs.cov(n + i, n + j) =
                cov_x(process, r[static_cast<std::size_t>(j)], r[static_cast<std::size_t>(i)]);
    }
    return cs;
}

int class_of(const VariationalGrid& grid, const Location& loc)
{
    if (loc.kind == LocationKind::SegmentInterior)
        return loc.segment;
    return grid.segments() + loc.vertex;
}

namespace {

int class_of_point(const VariationalGrid& grid, std::size_t k)
{
    return grid.roles[k] == PointRole::Interior ? grid.owner[k] : grid.segments() + grid.owner[k];
}

}  // namespace

SegmentProbabilities segment_probabilities_mc(const FluxSpec& flux, const ProcessSpec& process,
                                              double x, double t, const std::vector<int>& counts,
                                              std::size_t trials, std::uint64_t master_seed)
{
    require_trials(trials, 1);
    validate(process);
    const VariationalGrid grid = build_grid(flux, x, t, counts);
    const int N = grid.segments();
    const int classes = 2 * N + 1;

    std::vector<int> cls(trials);
    std::vector<double> w(trials);
    parallel_for(trials, [&](std::size_t k) {
        RngStream rng = RngStream::derive(master_seed, k);
        const PathSample ps = sample_path(process, grid.points, rng);
        const MinimizerResult r = solve_path(grid, restrict_path(grid, ps));
        cls[k] = class_of(grid, r.location);
        w[k] = r.w;
    });

    SegmentProbabilities out;
    out.method = Method::MonteCarlo;
    out.trials = trials;
    out.segment_values = grid.segment_values;
    std::vector<std::size_t> hits(static_cast<std::size_t>(classes), 0);
    for (int c : cls)
        ++hits[static_cast<std::size_t>(c)];
    const double T = static_cast<double>(trials);
    for (int c = 0; c < classes; ++c) {
        const double p = static_cast<double>(hits[static_cast<std::size_t>(c)]) / T;
        out.p.push_back(p);
        out.se.push_back(std::sqrt(p * (1.0 - p) / T));
    }
    std::vector<double> term(trials);
    for (int j = 0; j <= N; ++j) {
        for (std::size_t k = 0; k < trials; ++k)
            term[k] = cls[k] == N + j ? w[k] : 0.0;
        const Moments m = moments(term);
        out.vertex_terms.push_back(m.mean);
        out.vertex_terms_se.push_back(m.se);
    }
    const Moments mw = moments(w);
    out.expected_w = mw.mean;
    out.expected_w_se = mw.se;
    return out;
}

SegmentProbabilities segment_probabilities_quadrature(const FluxSpec& flux,
                                                      const ProcessSpec& process, double x,
                                                      double t, const std::vector<int>& counts,
                                                      const QuadratureOptions& opts)
{
    const CandidateSet cs = candidate_set(flux, process, x, t, counts);
    const int n = cs.candidates();
    require_cap(n);
    const auto& grid = cs.grid;
    const int N = grid.segments();

    SegmentProbabilities out;
    out.method = Method::Quadrature;
    out.segment_values = grid.segment_values;
    out.p.assign(static_cast<std::size_t>(2 * N + 1), 0.0);
    out.se.assign(out.p.size(), 0.0);
    out.vertex_terms.assign(static_cast<std::size_t>(N + 1), 0.0);
    out.vertex_terms_se.assign(static_cast<std::size_t>(N + 1), 0.0);

    const Eigen::VectorXd my = cs.mean.head(n);
    const Eigen::MatrixXd sy = cs.cov.topLeftCorner(n, n);
    for (int k = 0; k < n; ++k)
        out.p[static_cast<std::size_t>(class_of_point(grid, static_cast<std::size_t>(k)))] +=
            minimum_probability(my, sy, k, opts);
    for (int j = 0; j <= N; ++j) {
        const int k = static_cast<int>(grid.vertex_index[static_cast<std::size_t>(j)]);
        out.vertex_terms[static_cast<std::size_t>(j)] =
            minimum_first_moment(cs.mean, cs.cov, n, k, cs.slope_row(j), opts);
    }
    out.expected_w = expected_solution(out);
    return out;
}

double expected_solution(const SegmentProbabilities& probs)
{
    const int N = probs.segments();
    double e = 0.0;
    for (int i = 0; i < N; ++i)
        e += probs.p[static_cast<std::size_t>(i)] * probs.segment_values[static_cast<std::size_t>(i)];
    for (double v : probs.vertex_terms)
        e += v;
    return e;
}

double expected_slope_average(const SegmentProbabilities& probs)
{
    double e = 0.0;
    for (int i = 0; i < probs.segments(); ++i)
        e -= probs.p[static_cast<std::size_t>(i)] * probs.segment_values[static_cast<std::size_t>(i)];
    return e;
}

CdfCurve minimum_cdf(const FluxSpec& flux, const ProcessSpec& process, double x, double t,
                     const std::vector<int>& counts, CdfTarget target, const std::vector<double>& s,
                     Method method, std::size_t trials, std::uint64_t master_seed,
                     const QuadratureOptions& opts)
{
    const CandidateSet cs = candidate_set(flux, process, x, t, counts);
    const auto& grid = cs.grid;
    std::vector<int> members;
    if (target.vertex) {
        if (target.index < 0 || target.index >= grid.vertices())
            throw DomainError("cdf target vertex out of range");
        members.push_back(static_cast<int>(grid.vertex_index[static_cast<std::size_t>(target.index)]));
    } else {
        if (target.index < 0 || target.index >= grid.segments())
            throw DomainError("cdf target segment out of range");
        for (std::size_t k = 0; k < grid.size(); ++k)
            if (grid.roles[k] == PointRole::Interior && grid.owner[k] == target.index)
                members.push_back(static_cast<int>(k));
    }

    CdfCurve out;
    out.target = target;
    out.s = s;
    out.method = method;
    if (method == Method::Quadrature) {
        require_cap(static_cast<int>(members.size()));
        Eigen::VectorXd m;
        Eigen::MatrixXd S;
        select(cs.mean, cs.cov, members, m, S);
        std::vector<QuadRow> rows(members.size());
        for (double sv : s) {
            for (auto& r : rows) {
                r.kind = RowKind::AtLeast;
                r.lower = sv;
                r.strict = true;
            }
            const double above = gaussian_expectation(m, S, rows, opts);
            out.values.push_back(std::clamp(1.0 - above, 0.0, 1.0));
            out.se.push_back(0.0);
        }
        return out;
    }

    require_trials(trials, 1);
    std::vector<double> mins(trials);
    parallel_for(trials, [&](std::size_t k) {
        RngStream rng = RngStream::derive(master_seed, k);
        const PathSample ps = sample_path(process, grid.points, rng);
        const SamplePath sp = restrict_path(grid, ps);
        double best = std::numeric_limits<double>::infinity();
        for (int i : members) {
            const auto u = static_cast<std::size_t>(i);
            best = std::min(best, sp.g[u] + grid.lterm[u]);
        }
        mins[k] = best;
    });
    const double T = static_cast<double>(trials);
    for (double sv : s) {
        std::size_t below = 0;
        for (double v : mins)
            below += v <= sv ? 1 : 0;
        const double p = static_cast<double>(below) / T;
        out.values.push_back(p);
        out.se.push_back(std::sqrt(p * (1.0 - p) / T));
    }
    return out;
}

std::vector<double> richardson_weights(const std::vector<double>& steps)
{
    if (steps.empty())
        throw DomainError("Richardson extrapolation needs at least one step");
    for (std::size_t i = 0; i < steps.size(); ++i) {
        if (!(steps[i] > 0.0))
            throw DomainError("finite-difference steps must be positive");
        if (i > 0 && !(steps[i] < steps[i - 1]))
            throw DomainError("finite-difference steps must be strictly decreasing");
    }
    std::vector<double> w(steps.size(), 1.0);
    for (std::size_t m = 0; m < steps.size(); ++m)
        for (std::size_t l = 0; l < steps.size(); ++l)
            if (l != m)
                w[m] *= -steps[l] / (steps[m] - steps[l]);
    return w;
}

namespace {

ShockDensityResult empty_shock_result(const VariationalGrid& grid, Method method)
{
    const int N = grid.segments();
    ShockDensityResult r;
    r.method = method;
    r.segment_to_segment = Eigen::MatrixXd::Zero(N, N);
    r.segment_to_vertex = Eigen::MatrixXd::Zero(N, N + 1);
    r.vertex_to_segment = Eigen::MatrixXd::Zero(N + 1, N);
    r.segment_to_segment_se = r.segment_to_segment;
    r.segment_to_vertex_se = r.segment_to_vertex;
    r.vertex_to_segment_se = r.vertex_to_segment;
    for (int i = 0; i < N; ++i)
        r.d.push_back(grid.segment_slope(i));
    return r;
}

// Matrix entry for a class pair, or nullptr for vertex-to-vertex and no change.
double* pick(Eigen::MatrixXd& ss, Eigen::MatrixXd& sv, Eigen::MatrixXd& vs, int N, int a, int b)
{
    if (a == b)
        return nullptr;
    if (a < N && b < N)
        return &ss(a, b);
    if (a < N)
        return &sv(a, b - N);
    if (b < N)
        return &vs(a - N, b);
    return nullptr;
}

double* value_entry(ShockDensityResult& r, int N, int a, int b)
{
    return pick(r.segment_to_segment, r.segment_to_vertex, r.vertex_to_segment, N, a, b);
}

double* se_entry(ShockDensityResult& r, int N, int a, int b)
{
    return pick(r.segment_to_segment_se, r.segment_to_vertex_se, r.vertex_to_segment_se, N, a, b);
}

}  // namespace

ShockDensityResult shock_density_mc(const FluxSpec& flux, const ProcessSpec& process, double x,
                                    double t, const std::vector<int>& counts,
                                    const std::vector<double>& dx, std::size_t trials,
                                    std::uint64_t master_seed)
{
    require_trials(trials, 2);
    validate(process);
    const std::vector<double> weights = richardson_weights(dx);
    const VariationalGrid grid = build_grid(flux, x, t, counts);
    const LegendreTransform L = legendre(flux);
    const int N = grid.segments();
    const std::size_t M = dx.size();
    const std::size_t n = grid.size();

    // Interior candidates stay at fixed y while x moves; vertices move with x.
    std::vector<double> support = grid.points;
    for (double h : dx)
        for (std::size_t j : grid.vertex_index)
            support.push_back(grid.points[j] + h);
    std::vector<std::vector<double>> shifted_lterm(M, std::vector<double>(n));
    for (std::size_t m = 0; m < M; ++m)
        for (std::size_t k = 0; k < n; ++k) {
            if (grid.roles[k] == PointRole::Vertex) {
                shifted_lterm[m][k] = grid.lterm[k];
                continue;
            }
            const ExtendedReal l = eval_shifted(L, x + dx[m], t, grid.points[k]);
            if (!l.is_finite())
                throw DomainError("finite-difference step moves a candidate off the support of L");
            shifted_lterm[m][k] = l.value();
        }

    std::vector<int> from(trials);
    std::vector<int> to(trials * M);
    parallel_for(trials, [&](std::size_t k) {
        RngStream rng = RngStream::derive(master_seed, k);
        const PathSample ps = sample_path(process, support, rng);
        const MinimizerResult r0 = solve_path(grid, restrict_path(grid, ps));
        from[k] = class_of(grid, r0.location);
        std::vector<std::pair<double, double>> cand(n);  // (y, value)
        for (std::size_t m = 0; m < M; ++m) {
            for (std::size_t i = 0; i < n; ++i) {
                const double y = grid.points[i] + (grid.roles[i] == PointRole::Vertex ? dx[m] : 0.0);
                const long idx = ps.find(y);
                if (idx < 0)
                    throw NumericalError("shifted candidate missing from the sampled path");
                cand[i] = {y, ps.g[static_cast<std::size_t>(idx)] + shifted_lterm[m][i]};
            }
            // order by y so ties resolve to the largest y
            std::vector<std::size_t> order(n);
            for (std::size_t i = 0; i < n; ++i)
                order[i] = i;
            std::stable_sort(order.begin(), order.end(),
                             [&](std::size_t a, std::size_t b) { return cand[a].first < cand[b].first; });
            std::vector<double> vals(n);
            for (std::size_t i = 0; i < n; ++i)
                vals[i] = cand[order[i]].second;
            to[k * M + m] = class_of_point(grid, order[argmin_last(vals)]);
        }
    });

    ShockDensityResult out = empty_shock_result(grid, Method::MonteCarlo);
    out.trials = trials;
    out.dx = dx;
    const int C = 2 * N + 1;
    std::vector<double> sum(static_cast<std::size_t>(C * C), 0.0), sq(sum.size(), 0.0);
    double tsum = 0.0, tsq = 0.0;
    std::map<int, double> touched;
    for (std::size_t k = 0; k < trials; ++k) {
        touched.clear();
        double total = 0.0;
        for (std::size_t m = 0; m < M; ++m) {
            const int a = from[k], b = to[k * M + m];
            if (value_entry(out, N, a, b) == nullptr)
                continue;
            const double v = weights[m] / dx[m];
            touched[a * C + b] += v;
            total += v;
        }
        for (const auto& [key, v] : touched) {
            sum[static_cast<std::size_t>(key)] += v;
            sq[static_cast<std::size_t>(key)] += v * v;
        }
        tsum += total;
        tsq += total * total;
    }
    const double T = static_cast<double>(trials);
    auto finish = [&](double s, double q, double& mean, double& se) {
        mean = s / T;
        se = std::sqrt(std::max(0.0, (q - T * mean * mean) / (T - 1.0)) / T);
    };
    for (int a = 0; a < C; ++a)
        for (int b = 0; b < C; ++b) {
            double* v = value_entry(out, N, a, b);
            if (v == nullptr)
                continue;
            finish(sum[static_cast<std::size_t>(a * C + b)], sq[static_cast<std::size_t>(a * C + b)], *v,
                   *se_entry(out, N, a, b));
        }
    finish(tsum, tsq, out.total_density, out.total_density_se);
    return out;
}

ShockDensityResult shock_density_quadrature(const FluxSpec& flux, const ProcessSpec& process,
                                            double x, double t, const std::vector<int>& counts,
                                            const QuadratureOptions& opts)
{
    const CandidateSet cs = candidate_set(flux, process, x, t, counts);
    const int n = cs.candidates();
    require_cap(n);
    const auto& grid = cs.grid;
    const int N = grid.segments();
    ShockDensityResult out = empty_shock_result(grid, Method::Quadrature);

    for (int a = 0; a < n; ++a)
        for (int b = 0; b < n; ++b) {
            const int ca = class_of_point(grid, static_cast<std::size_t>(a));
            const int cb = class_of_point(grid, static_cast<std::size_t>(b));
            double* entry = value_entry(out, N, ca, cb);
            if (entry == nullptr)
                continue;
            std::vector<int> others;
            for (int k = 0; k < n; ++k)
                if (k != a && k != b)
                    others.push_back(k);
            if (ca < N && cb < N) {
                // Y_b - Y_a drifts by -(d_j - d_i) dx; only d_j > d_i can switch.
                const double rate = out.d[static_cast<std::size_t>(cb)] - out.d[static_cast<std::size_t>(ca)];
                if (rate > 0.0)
                    *entry += rate * pair_density(cs.mean, cs.cov, a, b, others, -1, {}, {}, opts);
            } else if (ca < N) {
                const double di = out.d[static_cast<std::size_t>(ca)];
                *entry += pair_density(cs.mean, cs.cov, a, b, others, cs.slope_row(cb - N),
                                       [di](double v) { return std::max(0.0, -(di + v)); }, {-di}, opts);
            } else {
                const double dj = out.d[static_cast<std::size_t>(cb)];
                *entry += pair_density(cs.mean, cs.cov, a, b, others, cs.slope_row(ca - N),
                                       [dj](double v) { return std::max(0.0, dj + v); }, {-dj}, opts);
            }
        }
    out.total_density = out.segment_to_segment.sum() + out.segment_to_vertex.sum() +
                        out.vertex_to_segment.sum();
    return out;
}

SpectrumReport spectrum_report(int n)
{
    if (n < 8)
        throw DomainError("spectrum report needs N >= 8");
    Eigen::MatrixXd S(n, n);
    for (int i = 1; i <= n; ++i)
        for (int j = 1; j <= n; ++j) {
            const double lo = std::min(i, j), hi = std::max(i, j);
            S(i - 1, j - 1) = lo * lo * (hi / 2.0 - lo / 6.0);
        }
    const Eigen::LLT<Eigen::MatrixXd> llt(S);
    if (llt.info() != Eigen::Success)
        throw NumericalError("spectrum matrix is not positive definite");
    Eigen::MatrixXd A = llt.solve(Eigen::MatrixXd::Identity(n, n));
    A = 0.5 * (A + A.transpose());

    SpectrumReport r;
    r.n = n;
    for (int i = 0; i < n; ++i)
        r.diag.push_back(A(i, i));
    std::vector<double> sorted = r.diag;
    std::sort(sorted.begin(), sorted.end());
    const std::size_t h = sorted.size() / 2;
    r.median = sorted.size() % 2 ? sorted[h] : 0.5 * (sorted[h - 1] + sorted[h]);
    std::size_t close = 0;
    for (double d : r.diag)
        close += std::abs(d - r.median) <= 0.01 * std::abs(r.median) ? 1 : 0;
    r.fraction_within_1pct = static_cast<double>(close) / n;
    r.median_literal = r.median * std::pow(static_cast<double>(n), 3);
    r.unit_matches = std::abs(r.median - r.reference) <= 0.01 * r.reference;
    r.literal_matches = std::abs(r.median_literal - r.reference) <= 0.01 * r.reference;

    const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(A);
    if (es.info() != Eigen::Success)
        throw NumericalError("eigen decomposition failed");
    for (int i = 0; i < n; ++i)
        r.eigenvalues.push_back(es.eigenvalues()(i));
    r.top_to_middle_ratio = r.eigenvalues.back() / r.eigenvalues[static_cast<std::size_t>((n + 1) / 2 - 1)];
    return r;
}

TruncatedProbabilities truncated_spectrum_probability(const CovarianceModel& model, int keep,
                                                      TruncationMode mode,
                                                      const QuadratureOptions& opts)
{
    const int n = static_cast<int>(model.mean.size());
    if (keep < 1 || keep > n)
        throw DomainError("number of kept eigendirections must lie in [1, dimension]");
    require_cap(n);

    // Sigma' = U_k diag(1 / lambda_k) U_k^T over the kept directions of A.
    Eigen::VectorXd inv(keep);
    for (int i = 0; i < keep; ++i) {
        const double lam = mode == TruncationMode::Flatten ? model.eigenvalues(0) : model.eigenvalues(i);
        inv(i) = 1.0 / lam;
    }
    const Eigen::MatrixXd U = model.eigenvectors.leftCols(keep);
    const Eigen::MatrixXd S = U * inv.asDiagonal() * U.transpose();

    TruncatedProbabilities out;
    out.kept = keep;
    for (int k = 0; k < n; ++k) {
        out.exact.push_back(minimum_probability(model.mean, model.sigma, k, opts));
        out.truncated.push_back(minimum_probability(model.mean, S, k, opts));
        out.max_abs_error = std::max(out.max_abs_error, std::abs(out.truncated.back() - out.exact.back()));
    }
    return out;
}

VarianceLawResult variance_law(const PowerLawFlux& flux, const ProcessSpec& process, double x,
                               double t, std::size_t trials, std::uint64_t master_seed,
                               const std::vector<double>& t_grid, double lo, double hi, double dy)
{
    require_trials(trials, 2);
    validate(FluxSpec{flux});
    validate(process);
    if (!(t > 0.0) || !(dy > 0.0) || !(hi > lo) || x < lo || x > hi)
        throw DomainError("variance law needs t > 0, dy > 0 and x inside [lo, hi]");
    for (double tg : t_grid)
        if (!(tg > 0.0))
            throw DomainError("t grid entries must be positive");
    if (!t_grid.empty() && (0.0 < lo || 0.0 > hi))
        throw DomainError("t grid study evaluates at x = 0, which must lie inside [lo, hi]");
    const auto cells = static_cast<std::size_t>(std::llround((hi - lo) / dy));
    std::vector<double> points(cells + 1);
    for (std::size_t k = 0; k <= cells; ++k)
        points[k] = lo + (hi - lo) * static_cast<double>(k) / static_cast<double>(cells);
    if (!in_domain(process, lo) || !in_domain(process, hi))
        throw DomainError("path window lies outside the process domain");

    const double e = 1.0 / (flux.j - 1.0);
    const std::size_t G = t_grid.size();
    std::vector<double> w(trials), z(trials), w0(trials * G), y0(trials * G);
    std::vector<unsigned char> trunc(trials);
    parallel_for(trials, [&](std::size_t k) {
        RngStream rng = RngStream::derive(master_seed, k);
        const DensePath path = dense_path(sample_path(process, points, rng));
        const PowerLawSolution s = solve_power_law(flux, path, x, t);
        const double d = x - s.result.y_star;
        w[k] = s.result.w;
        z[k] = std::copysign(std::pow(std::abs(d), e), d);
        trunc[k] = s.truncated ? 1 : 0;
        for (std::size_t i = 0; i < G; ++i) {
            const PowerLawSolution s0 = solve_power_law(flux, path, 0.0, t_grid[i]);
            w0[k * G + i] = s0.result.w;
            y0[k * G + i] = s0.result.y_star;
        }
    });

    VarianceLawResult out;
    const Moments mw = moments(w);
    out.var_w = mw.var;
    out.var_w_se = mw.var_se;
    out.var_transformed = std::pow(t, -2.0 * e) * moments(z).var;
    const double scale = std::max(std::abs(out.var_w), std::abs(out.var_transformed));
    out.residual = scale > 0.0 ? std::abs(out.var_w - out.var_transformed) / scale : 0.0;
    for (unsigned char c : trunc)
        out.truncated += c;
    out.t_grid = t_grid;
    std::vector<double> col(trials);
    for (std::size_t i = 0; i < G; ++i) {
        for (std::size_t k = 0; k < trials; ++k)
            col[k] = w0[k * G + i];
        out.var_w0.push_back(moments(col).var);
        for (std::size_t k = 0; k < trials; ++k)
            col[k] = y0[k * G + i];
        out.var_y0.push_back(moments(col).var);
        for (std::size_t k = 0; k < trials; ++k)
            col[k] = std::abs(y0[k * G + i]);
        out.mean_abs_y0.push_back(moments(col).mean);
    }
    out.fit_p = slope_fit(out.mean_abs_y0, out.var_y0);
    out.fit_w_exponent = slope_fit(out.t_grid, out.var_w0);
    return out;
}

ShockMonotonicity shock_monotonicity_study(const ProcessSpec& process,
                                           const std::vector<double>& t_grid, double x_lo,
                                           double x_hi, double dx, int interior,
                                           std::size_t seeds, std::uint64_t master_seed,
                                           double local_width)
{
    require_trials(seeds, 2);
    validate(process);
    if (t_grid.empty())
        throw DomainError("t grid is empty");
    for (std::size_t i = 0; i < t_grid.size(); ++i)
        if (!(t_grid[i] > 0.0) || (i > 0 && !(t_grid[i] > t_grid[i - 1])))
            throw DomainError("t grid must be positive and strictly increasing");
    if (!(x_hi > x_lo) || !(dx > 0.0) || interior < 1)
        throw DomainError("shock study needs x_lo < x_hi, dx > 0 and at least one interior point");

    const FluxSpec flux = AbsoluteValueFlux{};
    const std::vector<double> xs = scan_points(x_lo, x_hi, dx);
    const std::vector<int> counts{interior};
    std::vector<double> support;
    for (double t : t_grid) {
        const auto s = scan_support(flux, t, xs, counts);
        support.insert(support.end(), s.begin(), s.end());
    }
    std::sort(support.begin(), support.end());
    support.erase(std::unique(support.begin(), support.end()), support.end());
    for (double y : {support.front(), support.back()})
        if (!in_domain(process, y))
            throw DomainError("shock study window leaves the process domain");

    const std::size_t G = t_grid.size();
    const double width = x_hi - x_lo;
    // per seed and t: density, I->II, I->III, II->III, other, local indicator
    constexpr std::size_t F = 6;
    std::vector<double> stats(seeds * G * F, 0.0);
    parallel_for(seeds, [&](std::size_t k) {
        RngStream rng = RngStream::derive(master_seed, k);
        const PathSample ps = sample_path(process, support, rng);
        for (std::size_t i = 0; i < G; ++i) {
            const ScanProfile prof = scan_x(flux, t_grid[i], xs, counts, ps);
            double* row = &stats[(k * G + i) * F];
            for (const ScanPoint& p : prof.points) {
                if (!p.shock)
                    continue;
                row[0] += 1.0 / width;
                if (p.region_transition == "I->II")
                    row[1] += 1.0 / width;
                else if (p.region_transition == "I->III")
                    row[2] += 1.0 / width;
                else if (p.region_transition == "II->III")
                    row[3] += 1.0 / width;
                else
                    row[4] += 1.0 / width;
                if (p.x <= x_lo + local_width)
                    row[5] = 1.0;
            }
        }
    });

    ShockMonotonicity out;
    out.seeds = seeds;
    std::vector<double> col(seeds);
    auto column = [&](std::size_t i, std::size_t f) {
        for (std::size_t k = 0; k < seeds; ++k)
            col[k] = stats[(k * G + i) * F + f];
        return moments(col);
    };
    for (std::size_t i = 0; i < G; ++i) {
        ShockRow r;
        r.t = t_grid[i];
        const Moments d = column(i, 0);
        r.density = d.mean;
        r.se = d.se;
        r.i_to_ii = column(i, 1).mean;
        r.i_to_iii = column(i, 2).mean;
        r.ii_to_iii = column(i, 3).mean;
        r.other = column(i, 4).mean;
        const Moments l = column(i, 5);
        r.local_probability = l.mean;
        r.local_se = l.se;
        out.rows.push_back(r);
    }
    for (std::size_t i = 1; i < G; ++i)
        for (std::size_t f : {std::size_t{0}, std::size_t{5}}) {
            for (std::size_t k = 0; k < seeds; ++k)
                col[k] = stats[(k * G + i) * F + f] - stats[(k * G + i - 1) * F + f];
            const Moments m = moments(col);
            (f == 0 ? out.diff_mean : out.local_diff_mean).push_back(m.mean);
            (f == 0 ? out.diff_se : out.local_diff_se).push_back(m.se);
        }
    return out;
}

ConvergenceStudy convergence_study(double x, double t, const std::vector<int>& levels,
                                   std::size_t trials, std::uint64_t master_seed,
                                   double tail_alpha)
{
    require_trials(trials, 1);
    if (levels.empty())
        throw DomainError("level grid is empty");
    for (std::size_t i = 0; i < levels.size(); ++i)
        if (levels[i] < 1 || (i > 0 && levels[i] <= levels[i - 1]))
            throw DomainError("levels must be positive and strictly increasing");
    if (!(t > 0.0) || x - t < 0.0 || x + t > 1.0)
        throw DomainError("window [x - t, x + t] must lie inside [0, 1]");
    if (!(tail_alpha > 0.0))
        throw DomainError("tail threshold must be positive");

    const std::size_t G = levels.size();
    const int finest = levels.back();
    std::vector<unsigned char> cases(trials * G);
    std::vector<unsigned char> exceed(trials);
    parallel_for(trials, [&](std::size_t k) {
        RngStream rng = RngStream::derive(master_seed, k);
        const DyadicRefinement ref(finest, rng);
        const DiscretizedBm top = ref.level(finest);
        for (std::size_t i = 0; i < G; ++i) {
            const DiscretizedBm bm = ref.level(levels[i]);
            std::vector<double> vals{bm.integral_at(x - t)};
            const double h = bm.width();
            const std::size_t cells = bm.values.size();
            for (std::size_t nd = 1; nd < cells; ++nd) {
                const double y = static_cast<double>(nd) * h;
                if (y > x - t && y < x + t)
                    vals.push_back(bm.node_integrals[nd]);
            }
            vals.push_back(bm.integral_at(x + t));
            const std::size_t a = argmin_last(vals);
            cases[k * G + i] = a == 0 ? 0 : (a + 1 == vals.size() ? 2 : 1);
            if (i == 0)
                exceed[k] = sup_integral_difference(bm, top) > tail_alpha ? 1 : 0;
        }
    });

    ConvergenceStudy out;
    out.trials = trials;
    const double T = static_cast<double>(trials);
    for (std::size_t i = 0; i < G; ++i) {
        std::size_t c[3] = {0, 0, 0};
        for (std::size_t k = 0; k < trials; ++k)
            ++c[cases[k * G + i]];
        out.rows.push_back({levels[i], c[0] / T, c[1] / T, c[2] / T});
    }
    for (std::size_t i = 1; i < G; ++i)
        out.successive_diff.push_back(std::abs(out.rows[i].p_left - out.rows[i - 1].p_left));
    out.tail_level = levels.front();
    out.tail_alpha = tail_alpha;
    std::size_t hits = 0;
    for (unsigned char e : exceed)
        hits += e;
    out.tail_frequency = static_cast<double>(hits) / T;
    const double h = std::ldexp(1.0, -out.tail_level);
    out.tail_bound = 3.0 * h * h / std::pow(tail_alpha, 4);
    return out;
}

}  // namespace eflux
