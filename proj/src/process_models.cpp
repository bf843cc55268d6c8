#include "eflux/process_models.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "eflux/errors.hpp"

namespace eflux {

namespace {

// Cov(S(a), S(b)) for one-sided integrated BM, a, b >= 0.
double ibm(double a, double b)
{
    const double m = std::min(a, b);
    const double M = std::max(a, b);
    return m * m * (M / 2.0 - m / 6.0);
}

// Cov(S(a), W(b)) for one-sided BM, a, b >= 0.
double ibm_cross(double a, double b)
{
    return a <= b ? a * a / 2.0 : a * b - b * b / 2.0;
}

double sign(double v) { return (v > 0.0) - (v < 0.0); }

// Variance of the OU integral over a window of length tau (unit sigma).
double ou_window(double alpha, double tau)
{
    const double z = alpha * std::abs(tau);
    const double var = 1.0 / (2.0 * alpha);
    return 2.0 * var * (z + std::expm1(-z)) / (alpha * alpha);
}

double ou_h(double alpha, double z)
{
    return sign(z) * -std::expm1(-alpha * std::abs(z)) / alpha;
}

double bridge_clamp(const ProcessSpec& spec, double u, bool& zeroed)
{
    zeroed = false;
    if (u < 0.0) {
        zeroed = true;
        return 0.0;
    }
    if (u > spec.T) {
        if (spec.outside == BridgeOutside::Zero) {
            zeroed = true;
            return 0.0;
        }
        return spec.T;
    }
    return u;
}

bool bridge_inside(const ProcessSpec& spec, double u) { return u >= 0.0 && u <= spec.T; }

void check_domain(const ProcessSpec& spec, double y)
{
    if (!in_domain(spec, y)) {
        std::ostringstream msg;
        msg << "point " << y << " outside process domain [" << spec.domain_lo << ", "
            << spec.domain_hi << "]";
        throw DomainError(msg.str());
    }
}

double unit_cov_x(const ProcessSpec& spec, double u, double v)
{
    switch (spec.kind) {
    case ProcessKind::BrownianMotion:
        return u * v > 0.0 ? std::min(std::abs(u), std::abs(v)) : 0.0;
    case ProcessKind::BrownianBridge:
        if (!bridge_inside(spec, u) || !bridge_inside(spec, v))
            return 0.0;
        return std::min(u, v) - u * v / spec.T;
    case ProcessKind::OrnsteinUhlenbeck:
        return std::exp(-spec.alpha * std::abs(u - v)) / (2.0 * spec.alpha);
    case ProcessKind::Custom:
        return spec.custom->cov_x(u + spec.anchor, v + spec.anchor);
    }
    return 0.0;
}

double unit_cov_g(const ProcessSpec& spec, double u, double v)
{
    switch (spec.kind) {
    case ProcessKind::BrownianMotion:
        return u * v > 0.0 ? ibm(std::abs(u), std::abs(v)) : 0.0;
    case ProcessKind::BrownianBridge: {
        bool zu = false, zv = false;
        const double a = bridge_clamp(spec, u, zu);
        const double b = bridge_clamp(spec, v, zv);
        if (zu || zv)
            return 0.0;
        return ibm(a, b) - a * a * b * b / (4.0 * spec.T);
    }
    case ProcessKind::OrnsteinUhlenbeck:
        return 0.5 * (ou_window(spec.alpha, u) + ou_window(spec.alpha, v) -
                      ou_window(spec.alpha, v - u));
    case ProcessKind::Custom:
        return spec.custom->cov_g(u + spec.anchor, v + spec.anchor);
    }
    return 0.0;
}

double unit_cov_gx(const ProcessSpec& spec, double u, double v)
{
    switch (spec.kind) {
    case ProcessKind::BrownianMotion:
        if (u * v <= 0.0)
            return 0.0;
        return sign(u) * ibm_cross(std::abs(u), std::abs(v));
    case ProcessKind::BrownianBridge: {
        bool zu = false;
        const double a = bridge_clamp(spec, u, zu);
        if (zu || !bridge_inside(spec, v))
            return 0.0;
        return ibm_cross(a, v) - a * a * v / (2.0 * spec.T);
    }
    case ProcessKind::OrnsteinUhlenbeck:
        return (ou_h(spec.alpha, u - v) - ou_h(spec.alpha, -v)) / (2.0 * spec.alpha);
    case ProcessKind::Custom:
        return spec.custom->cov_gx(u + spec.anchor, v + spec.anchor);
    }
    return 0.0;
}

double drift_x(const ProcessSpec& spec, double u)
{
    double acc = 0.0, pw = 1.0;
    for (double a : spec.drift) {
        acc += a * pw;
        pw *= u;
    }
    return acc;
}

double drift_g(const ProcessSpec& spec, double u)
{
    double acc = 0.0, pw = u;
    for (std::size_t k = 0; k < spec.drift.size(); ++k) {
        acc += spec.drift[k] * pw / static_cast<double>(k + 1);
        pw *= u;
    }
    return acc;
}

std::vector<double> sorted_unique(std::vector<double> points)
{
    std::sort(points.begin(), points.end());
    std::vector<double> out;
    out.reserve(points.size());
    for (double p : points) {
        if (!out.empty() && p - out.back() <= 1e-12 * std::max(1.0, std::abs(p)))
            continue;
        out.push_back(p);
    }
    return out;
}

// (X, I) of a standard BM and its integral, stepped exactly.
struct BmState {
    double w = 0.0;
    double s = 0.0;

    void step(double h, RngStream& rng)
    {
        const double z1 = rng.normal();
        const double z2 = rng.normal();
        const double dw = std::sqrt(h) * z1;
        const double di = 0.5 * h * dw + std::sqrt(h * h * h / 12.0) * z2;
        s += w * h + di;
        w += dw;
    }
};

// (X, I) of a stationary OU process with k(0) = 1/(2 alpha).
struct OuState {
    double x = 0.0;
    double s = 0.0;
    double alpha = 1.0;

    void step(double h, RngStream& rng)
    {
        const double z1 = rng.normal();
        const double z2 = rng.normal();
        const double z = alpha * h;
        const double a = alpha;
        double v2, c;
        if (z < 0.1) {
            // z - 2(1 - e^-z) + (1 - e^-2z)/2 and (1 - e^-z) - (1 - e^-2z)/2 by series
            double term = z;  // z^k / k!
            double sv = 0.0, sc = 0.0;
            for (int k = 2; k <= 24; ++k) {
                term *= z / k;
                const double sg = (k % 2 == 1) ? 1.0 : -1.0;
                const double p2 = std::ldexp(1.0, k - 1);
                sv += sg * (p2 - 2.0) * term;
                sc += sg * (1.0 - p2) * term;
            }
            v2 = sv / (a * a * a);
            c = sc / (a * a);
        } else {
            const double e1 = -std::expm1(-z);
            const double e2 = -std::expm1(-2.0 * z);
            v2 = (z - 2.0 * e1 + 0.5 * e2) / (a * a * a);
            c = (e1 - 0.5 * e2) / (a * a);
        }
        const double v1 = -std::expm1(-2.0 * z) / (2.0 * a);
        const double e1 = std::sqrt(v1) * z1;
        const double cond = std::max(0.0, v2 - c * c / v1);
        const double e2 = (v1 > 0.0 ? c / v1 * e1 : 0.0) + std::sqrt(cond) * z2;
        s += x * -std::expm1(-z) / a + e2;
        x = std::exp(-z) * x + e1;
    }
};

}  // namespace

void validate(const ProcessSpec& spec)
{
    if (!(spec.domain_lo < spec.domain_hi))
        throw DomainError("process domain must be a nonempty interval");
    if (!std::isfinite(spec.anchor))
        throw DomainError("process anchor must be finite");
    if (!(spec.sigma >= 0.0) || !std::isfinite(spec.sigma))
        throw DomainError("process sigma must be finite and >= 0");
    if (spec.kind == ProcessKind::BrownianBridge && !(spec.T > 0.0))
        throw DomainError("Brownian bridge needs T > 0");
    if (spec.kind == ProcessKind::OrnsteinUhlenbeck && !(spec.alpha > 0.0))
        throw DomainError("Ornstein-Uhlenbeck needs alpha > 0");
    if (spec.kind == ProcessKind::Custom &&
        (!spec.custom || !spec.custom->cov_x || !spec.custom->cov_g || !spec.custom->cov_gx))
        throw DomainError("custom process needs covariance kernels");
}

bool in_domain(const ProcessSpec& spec, double y)
{
    return y >= spec.domain_lo && y <= spec.domain_hi;
}

bool is_deterministic(const ProcessSpec& spec) { return spec.sigma == 0.0; }

double cov_x(const ProcessSpec& spec, double s, double t)
{
    return spec.sigma * spec.sigma * unit_cov_x(spec, s - spec.anchor, t - spec.anchor);
}

double cov_g(const ProcessSpec& spec, double s, double t)
{
    return spec.sigma * spec.sigma * unit_cov_g(spec, s - spec.anchor, t - spec.anchor);
}

double cov_gx(const ProcessSpec& spec, double s, double t)
{
    return spec.sigma * spec.sigma * unit_cov_gx(spec, s - spec.anchor, t - spec.anchor);
}

double mean_x(const ProcessSpec& spec, double y)
{
    double m = drift_x(spec, y - spec.anchor);
    if (spec.kind == ProcessKind::Custom && spec.custom->mean_x)
        m += spec.custom->mean_x(y);
    return m;
}

double mean_g(const ProcessSpec& spec, double y)
{
    double m = drift_g(spec, y - spec.anchor);
    if (spec.kind == ProcessKind::Custom && spec.custom->mean_g)
        m += spec.custom->mean_g(y);
    return m;
}

double covariance(const ProcessSpec& spec, double s, double t)
{
    validate(spec);
    if (spec.kind == ProcessKind::Custom)
        throw DomainError("custom processes have no closed-form covariance");
    check_domain(spec, s);
    check_domain(spec, t);
    return spec.integrated ? cov_g(spec, s, t) : cov_x(spec, s, t);
}

Eigen::MatrixXd cholesky_factor(const Eigen::MatrixXd& S, const std::vector<double>& labels)
{
    const Eigen::Index n = S.rows();
    Eigen::MatrixXd L = Eigen::MatrixXd::Zero(n, n);
    for (Eigen::Index j = 0; j < n; ++j) {
        double d = S(j, j) - L.row(j).head(j).squaredNorm();
        if (!(d > 0.0)) {
            std::ostringstream msg;
            msg << "singular covariance at point ";
            if (static_cast<std::size_t>(j) < labels.size())
                msg << labels[j];
            else
                msg << "#" << j;
            msg << " (pivot " << d << ")";
            throw NumericalError(msg.str());
        }
        L(j, j) = std::sqrt(d);
        for (Eigen::Index i = j + 1; i < n; ++i)
            L(i, j) = (S(i, j) - L.row(i).head(j).dot(L.row(j).head(j))) / L(j, j);
    }
    return L;
}

CovarianceModel CovarianceModel::from_matrix(std::vector<double> points, Eigen::VectorXd mean,
                                             Eigen::MatrixXd sigma)
{
    const Eigen::Index n = sigma.rows();
    if (sigma.cols() != n || mean.size() != n || static_cast<Eigen::Index>(points.size()) != n)
        throw DomainError("covariance model: inconsistent sizes");
    if (!sigma.isApprox(sigma.transpose(), 1e-12) && n > 0)
        throw DomainError("covariance model: matrix not symmetric");

    CovarianceModel m;
    m.points = std::move(points);
    m.mean = std::move(mean);
    m.sigma = 0.5 * (sigma + sigma.transpose());

    const double max_diag = n > 0 ? m.sigma.diagonal().maxCoeff() : 0.0;
    bool degenerate = max_diag <= 0.0;
    for (Eigen::Index i = 0; i < n && !degenerate; ++i)
        degenerate = m.sigma(i, i) <= 1e-14 * max_diag;
    if (degenerate)
        m.jitter = max_diag > 0.0 ? 1e-12 * max_diag : 1e-12;

    Eigen::MatrixXd reg = m.sigma;
    reg.diagonal().array() += m.jitter;
    m.chol = cholesky_factor(reg, m.points);

    const Eigen::MatrixXd Linv =
        m.chol.triangularView<Eigen::Lower>().solve(Eigen::MatrixXd::Identity(n, n));
    m.inverse = Linv.transpose() * Linv;
    m.inverse = 0.5 * (m.inverse + m.inverse.transpose());

    // Eigenpairs of the inverse from those of the covariance: more accurate
    // at the small end than decomposing the inverse directly.
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(reg);
    if (es.info() != Eigen::Success)
        throw NumericalError("eigendecomposition failed");
    const Eigen::VectorXd lam = es.eigenvalues();
    if (n > 0 && !(lam(0) > 0.0))
        throw NumericalError("covariance not positive definite after jitter");
    m.eigenvalues.resize(n);
    m.eigenvectors.resize(n, n);
    for (Eigen::Index k = 0; k < n; ++k) {
        m.eigenvalues(k) = 1.0 / lam(n - 1 - k);
        m.eigenvectors.col(k) = es.eigenvectors().col(n - 1 - k);
    }
    return m;
}

CovarianceModel build_covariance_model(const ProcessSpec& spec, const std::vector<double>& points)
{
    validate(spec);
    for (std::size_t i = 0; i < points.size(); ++i) {
        check_domain(spec, points[i]);
        if (i > 0 && !(points[i] > points[i - 1]))
            throw DomainError("covariance model points must be strictly increasing");
    }
    const Eigen::Index n = static_cast<Eigen::Index>(points.size());
    Eigen::MatrixXd S(n, n);
    Eigen::VectorXd mu(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        mu(i) = spec.integrated ? mean_g(spec, points[i]) : mean_x(spec, points[i]);
        for (Eigen::Index j = 0; j <= i; ++j) {
            const double c = spec.integrated ? cov_g(spec, points[i], points[j])
                                             : cov_x(spec, points[i], points[j]);
            S(i, j) = c;
            S(j, i) = c;
        }
    }
    return CovarianceModel::from_matrix(points, std::move(mu), std::move(S));
}

Eigen::VectorXd sample_joint(const CovarianceModel& model, RngStream& rng)
{
    Eigen::VectorXd z(model.mean.size());
    for (Eigen::Index i = 0; i < z.size(); ++i)
        z(i) = rng.normal();
    return model.mean + model.chol * z;
}

long PathSample::find(double y) const
{
    const double tol = 1e-12 * std::max(1.0, std::abs(y));
    auto it = std::lower_bound(points.begin(), points.end(), y - tol);
    if (it != points.end() && std::abs(*it - y) <= tol)
        return static_cast<long>(it - points.begin());
    return -1;
}

PathSample evaluate_path(std::vector<double> points, const std::function<double(double)>& g,
                         const std::function<double(double)>& gprime)
{
    PathSample path;
    path.points = sorted_unique(std::move(points));
    for (double y : path.points) {
        path.g.push_back(g(y));
        path.gprime.push_back(gprime(y));
    }
    return path;
}

PathSample sample_path(const ProcessSpec& spec, std::vector<double> points, RngStream& rng)
{
    validate(spec);
    PathSample path;
    path.points = sorted_unique(std::move(points));
    const std::size_t n = path.points.size();
    for (double y : path.points)
        check_domain(spec, y);
    path.g.assign(n, 0.0);
    path.gprime.assign(n, 0.0);

    const double a = spec.anchor;

    if (spec.kind == ProcessKind::Custom) {
        Eigen::MatrixXd S(2 * n, 2 * n);
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < n; ++j) {
                const double yi = path.points[i], yj = path.points[j];
                S(i, j) = cov_x(spec, yi, yj);
                S(n + i, n + j) = cov_g(spec, yi, yj);
                S(n + i, j) = cov_gx(spec, yi, yj);
                S(j, n + i) = S(n + i, j);
            }
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(S);
        const Eigen::VectorXd root = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
        Eigen::VectorXd z(2 * n);
        for (Eigen::Index i = 0; i < z.size(); ++i)
            z(i) = rng.normal();
        const Eigen::VectorXd v = es.eigenvectors() * root.cwiseProduct(z);
        for (std::size_t i = 0; i < n; ++i) {
            path.gprime[i] = v(i);
            path.g[i] = v(n + i);
        }
    } else {
        // Right of the anchor forward in time, left of it backward.
        auto split = std::lower_bound(path.points.begin(), path.points.end(), a);
        const std::size_t first_right = static_cast<std::size_t>(split - path.points.begin());

        if (spec.kind == ProcessKind::BrownianMotion) {
            BmState st;
            double prev = 0.0;
            for (std::size_t i = first_right; i < n; ++i) {
                const double u = path.points[i] - a;
                st.step(u - prev, rng);
                prev = u;
                path.gprime[i] = st.w;
                path.g[i] = st.s;
            }
            BmState left;
            prev = 0.0;
            for (std::size_t i = first_right; i-- > 0;) {
                const double r = a - path.points[i];
                left.step(r - prev, rng);
                prev = r;
                path.gprime[i] = left.w;
                path.g[i] = -left.s;
            }
        } else if (spec.kind == ProcessKind::OrnsteinUhlenbeck) {
            const double x0 = std::sqrt(1.0 / (2.0 * spec.alpha)) * rng.normal();
            OuState st{x0, 0.0, spec.alpha};
            double prev = 0.0;
            for (std::size_t i = first_right; i < n; ++i) {
                const double u = path.points[i] - a;
                st.step(u - prev, rng);
                prev = u;
                path.gprime[i] = st.x;
                path.g[i] = st.s;
            }
            OuState left{x0, 0.0, spec.alpha};
            prev = 0.0;
            for (std::size_t i = first_right; i-- > 0;) {
                const double r = a - path.points[i];
                left.step(r - prev, rng);
                prev = r;
                path.gprime[i] = left.x;
                path.g[i] = -left.s;
            }
        } else {
            // Bridge: BM on [0, T] including T, then pinned.
            const double T = spec.T;
            std::vector<std::size_t> inside;
            for (std::size_t i = first_right; i < n; ++i)
                if (path.points[i] - a <= T)
                    inside.push_back(i);
            BmState st;
            double prev = 0.0;
            std::vector<double> w(inside.size()), s(inside.size());
            for (std::size_t k = 0; k < inside.size(); ++k) {
                const double u = path.points[inside[k]] - a;
                st.step(u - prev, rng);
                prev = u;
                w[k] = st.w;
                s[k] = st.s;
            }
            st.step(T - prev, rng);
            const double wT = st.w;
            for (std::size_t k = 0; k < inside.size(); ++k) {
                const double u = path.points[inside[k]] - a;
                path.gprime[inside[k]] = w[k] - u / T * wT;
                path.g[inside[k]] = s[k] - u * u / (2.0 * T) * wT;
            }
            const double zT = st.s - T / 2.0 * wT;
            for (std::size_t i = first_right; i < n; ++i)
                if (path.points[i] - a > T)
                    path.g[i] = spec.outside == BridgeOutside::HoldConstant ? zT : 0.0;
        }

        for (std::size_t i = 0; i < n; ++i) {
            path.gprime[i] *= spec.sigma;
            path.g[i] *= spec.sigma;
        }
    }

    for (std::size_t i = 0; i < n; ++i) {
        path.gprime[i] += mean_x(spec, path.points[i]);
        path.g[i] += mean_g(spec, path.points[i]);
    }
    return path;
}

double DiscretizedBm::value_at(double t) const
{
    const auto pieces = static_cast<long>(values.size());
    long n = static_cast<long>(std::floor(t * static_cast<double>(pieces)));
    n = std::clamp(n, 0L, pieces - 1);
    return values[static_cast<std::size_t>(n)];
}

double DiscretizedBm::integral_at(double t) const
{
    const auto pieces = static_cast<long>(values.size());
    long n = static_cast<long>(std::floor(t * static_cast<double>(pieces)));
    n = std::clamp(n, 0L, pieces - 1);
    const auto k = static_cast<std::size_t>(n);
    return node_integrals[k] + values[k] * (t - static_cast<double>(n) * width());
}

DyadicRefinement::DyadicRefinement(int max_level, RngStream& rng) : max_level_(max_level)
{
    if (max_level < 0 || max_level > 26)
        throw DomainError("dyadic level must be in [0, 26]");
    const std::size_t steps = std::size_t{1} << max_level;
    const double sd = std::sqrt(1.0 / static_cast<double>(steps));
    walk_.resize(steps + 1);
    walk_[0] = 0.0;
    for (std::size_t k = 1; k <= steps; ++k)
        walk_[k] = walk_[k - 1] + sd * rng.normal();
}

DiscretizedBm DyadicRefinement::level(int M) const
{
    if (M < 0 || M > max_level_)
        throw DomainError("requested level exceeds the refinement depth");
    const std::size_t pieces = std::size_t{1} << M;
    const std::size_t stride = std::size_t{1} << (max_level_ - M);
    DiscretizedBm out;
    out.level = M;
    out.values.resize(pieces);
    out.node_integrals.resize(pieces + 1);
    out.node_integrals[0] = 0.0;
    const double width = 1.0 / static_cast<double>(pieces);
    for (std::size_t n = 0; n < pieces; ++n) {
        out.values[n] = walk_[(n + 1) * stride];
        out.node_integrals[n + 1] = out.node_integrals[n] + out.values[n] * width;
    }
    return out;
}

DiscretizedBm discretize_bm(int M, RngStream& rng)
{
    return DyadicRefinement(M, rng).level(M);
}

double sup_integral_difference(const DiscretizedBm& a, const DiscretizedBm& b)
{
    const DiscretizedBm& fine = a.level >= b.level ? a : b;
    const DiscretizedBm& coarse = a.level >= b.level ? b : a;
    double best = 0.0;
    for (std::size_t k = 0; k < fine.node_integrals.size(); ++k) {
        const double t = static_cast<double>(k) * fine.width();
        best = std::max(best, std::abs(fine.node_integrals[k] - coarse.integral_at(t)));
    }
    return best;
}

}  // namespace eflux
