#include "eflux/gaussian_quadrature.hpp"

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <cmath>

#include "eflux/errors.hpp"

namespace eflux {

namespace {

double upper_tail(double z) { return 0.5 * std::erfc(z / std::sqrt(2.0)); }

double normal_density(double e) { return std::exp(-0.5 * e * e) / std::sqrt(2.0 * M_PI); }

constexpr double kCut = 6.5;

class Integrator {
public:
    Integrator(const Eigen::VectorXd& mean, const Eigen::MatrixXd& cov,
               const std::vector<QuadRow>& rows, const QuadratureOptions& opts)
        : mean_(mean), rows_(rows), opts_(opts)
    {
        const Eigen::Index n = mean.size();
        if (cov.rows() != n || cov.cols() != n || static_cast<Eigen::Index>(rows.size()) != n)
            throw DomainError("quadrature: inconsistent sizes");
        for (Eigen::Index k = 0; k < n; ++k) {
            const auto& r = rows[static_cast<std::size_t>(k)];
            if (r.ref >= k)
                throw DomainError("quadrature: a bound may only refer to an earlier row");
            if (r.kind == RowKind::Weighted && !r.weight)
                throw DomainError("quadrature: weighted row without a weight");
        }
        factor(cov);
        e_.assign(static_cast<std::size_t>(cols_), 0.0);
        y_.assign(static_cast<std::size_t>(n), 0.0);
    }

    double run() { return level(0); }

private:
    void factor(const Eigen::MatrixXd& S)
    {
        const Eigen::Index n = S.rows();
        double scale = 0.0;
        for (Eigen::Index k = 0; k < n; ++k)
            scale = std::max(scale, S(k, k));
        L_ = Eigen::MatrixXd::Zero(n, n);
        own_.assign(static_cast<std::size_t>(n), -1);
        before_.assign(static_cast<std::size_t>(n), 0);
        std::vector<Eigen::Index> col_row;
        cols_ = 0;
        for (Eigen::Index k = 0; k < n; ++k) {
            before_[static_cast<std::size_t>(k)] = cols_;
            for (Eigen::Index c = 0; c < cols_; ++c) {
                const Eigen::Index r = col_row[static_cast<std::size_t>(c)];
                double v = S(k, r);
                for (Eigen::Index d = 0; d < c; ++d)
                    v -= L_(k, d) * L_(r, d);
                L_(k, c) = v / L_(r, c);
            }
            const double resid = S(k, k) - L_.row(k).head(cols_).squaredNorm();
            if (resid > opts_.rank_tolerance * scale && resid > 0.0) {
                L_(k, cols_) = std::sqrt(resid);
                own_[static_cast<std::size_t>(k)] = cols_;
                col_row.push_back(k);
                ++cols_;
            }
        }
    }

    double cond_mean(Eigen::Index k) const
    {
        double m = mean_(k);
        const Eigen::Index nb = before_[static_cast<std::size_t>(k)];
        for (Eigen::Index c = 0; c < nb; ++c)
            m += L_(k, c) * e_[static_cast<std::size_t>(c)];
        return m;
    }

    template <class F>
    double integrate(F f, double a, double b) const
    {
        return boost::math::quadrature::gauss_kronrod<double, 31>::integrate(
            f, a, b, opts_.max_depth, opts_.tolerance);
    }

    double level(Eigen::Index k)
    {
        const Eigen::Index n = mean_.size();
        if (k == n)
            return 1.0;
        const auto& row = rows_[static_cast<std::size_t>(k)];
        const std::size_t ks = static_cast<std::size_t>(k);
        const Eigen::Index own = own_[ks];
        const double cm = cond_mean(k);
        const double sd = own >= 0 ? L_(k, own) : 0.0;
        const bool last = k + 1 == n;

        auto set = [&](double e) {
            if (own >= 0)
                e_[static_cast<std::size_t>(own)] = e;
            y_[ks] = cm + sd * e;
        };

        // Integrals run over the standardized innovation e with the normal
        // density as weight, truncated at 6.5 standard deviations.
        auto body = [&](double e) {
            set(e);
            double w = 1.0;
            if (row.kind == RowKind::Weighted) {
                w = row.weight(y_[ks]);
                if (w == 0.0)
                    return 0.0;
            }
            return normal_density(e) * w * level(k + 1);
        };

        switch (row.kind) {
        case RowKind::Free:
            if (sd == 0.0 || last) {
                set(0.0);
                return level(k + 1);
            }
            return integrate(body, -kCut, kCut);
        case RowKind::Weighted: {
            if (sd == 0.0) {
                set(0.0);
                const double w = row.weight(y_[ks]);
                return w == 0.0 ? 0.0 : w * level(k + 1);
            }
            std::vector<double> cuts{-kCut};
            for (double kink : row.kinks) {
                const double e = (kink - cm) / sd;
                if (e > cuts.back() && e < kCut)
                    cuts.push_back(e);
            }
            cuts.push_back(kCut);
            double acc = 0.0;
            for (std::size_t i = 0; i + 1 < cuts.size(); ++i)
                acc += integrate(body, cuts[i], cuts[i + 1]);
            return acc;
        }
        case RowKind::AtLeast: {
            const double bound = row.lower + (row.ref >= 0 ? y_[static_cast<std::size_t>(row.ref)] : 0.0);
            if (sd == 0.0) {
                set(0.0);
                const bool ok = row.strict ? y_[ks] > bound : y_[ks] >= bound;
                return ok ? level(k + 1) : 0.0;
            }
            const double lo = (bound - cm) / sd;
            if (last)
                return upper_tail(lo);
            if (lo >= kCut)
                return 0.0;
            return integrate(body, std::max(lo, -kCut), kCut);
        }
        }
        return 0.0;
    }

    const Eigen::VectorXd& mean_;
    const std::vector<QuadRow>& rows_;
    QuadratureOptions opts_;
    Eigen::MatrixXd L_;
    std::vector<Eigen::Index> own_;
    std::vector<Eigen::Index> before_;
    Eigen::Index cols_ = 0;
    std::vector<double> e_;
    std::vector<double> y_;
};

}  // namespace

double gaussian_expectation(const Eigen::VectorXd& mean, const Eigen::MatrixXd& cov,
                            const std::vector<QuadRow>& rows, const QuadratureOptions& opts)
{
    if (mean.size() == 0)
        return 1.0;
    Integrator integ(mean, cov, rows, opts);
    return integ.run();
}

double orthant_probability(const Eigen::VectorXd& mean, const Eigen::MatrixXd& cov,
                           const Eigen::VectorXd& lower, const QuadratureOptions& opts)
{
    std::vector<QuadRow> rows(static_cast<std::size_t>(mean.size()));
    for (Eigen::Index k = 0; k < mean.size(); ++k) {
        rows[static_cast<std::size_t>(k)].kind = RowKind::AtLeast;
        rows[static_cast<std::size_t>(k)].lower = lower(k);
    }
    return gaussian_expectation(mean, cov, rows, opts);
}

void select(const Eigen::VectorXd& mean, const Eigen::MatrixXd& cov, const std::vector<int>& idx,
            Eigen::VectorXd& mean_out, Eigen::MatrixXd& cov_out)
{
    const auto n = static_cast<Eigen::Index>(idx.size());
    mean_out.resize(n);
    cov_out.resize(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
        mean_out(i) = mean(idx[static_cast<std::size_t>(i)]);
        for (Eigen::Index j = 0; j < n; ++j)
            cov_out(i, j) = cov(idx[static_cast<std::size_t>(i)], idx[static_cast<std::size_t>(j)]);
    }
}

double minimum_probability(const Eigen::VectorXd& mean, const Eigen::MatrixXd& cov, int j,
                           const QuadratureOptions& opts)
{
    return minimum_expectation(mean, cov, static_cast<int>(mean.size()), j, -1, {}, {}, opts);
}

double minimum_expectation(const Eigen::VectorXd& mean, const Eigen::MatrixXd& cov, int candidates,
                           int j, int weight_index, const std::function<double(double)>& weight,
                           const std::vector<double>& kinks, const QuadratureOptions& opts)
{
    const int n = candidates;
    if (n < 1 || n > mean.size() || j < 0 || j >= n)
        throw DomainError("minimum_expectation: index out of range");
    if (weight_index >= mean.size())
        throw DomainError("minimum_expectation: weight index out of range");
    const bool weighted = weight_index >= 0;
    // weight row first, then the orthant of the differences Y_k - Y_j; ties go
    // to the larger index
    Eigen::MatrixXd A = Eigen::MatrixXd::Zero(n - 1 + (weighted ? 1 : 0), mean.size());
    std::vector<QuadRow> rows;
    Eigen::Index r = 0;
    if (weighted) {
        A(r++, weight_index) = 1.0;
        QuadRow row;
        row.kind = RowKind::Weighted;
        row.weight = weight;
        row.kinks = kinks;
        rows.push_back(row);
    }
    for (int k = 0; k < n; ++k) {
        if (k == j)
            continue;
        A(r, k) = 1.0;
        A(r, j) = -1.0;
        ++r;
        QuadRow row;
        row.kind = RowKind::AtLeast;
        row.strict = k > j;
        rows.push_back(row);
    }
    if (rows.empty())
        return 1.0;
    return gaussian_expectation(A * mean, A * cov * A.transpose(), rows, opts);
}

double minimum_first_moment(const Eigen::VectorXd& mean, const Eigen::MatrixXd& cov, int candidates,
                            int j, int weight_index, const QuadratureOptions& opts)
{
    const int n = candidates;
    if (n < 1 || n > mean.size() || j < 0 || j >= n || weight_index < 0 || weight_index >= mean.size())
        throw DomainError("minimum_first_moment: index out of range");
    const double mu_x = mean(weight_index);
    if (n == 1)
        return mu_x;
    Eigen::MatrixXd A = Eigen::MatrixXd::Zero(n - 1, mean.size());
    std::vector<bool> strict;
    for (int k = 0, r = 0; k < n; ++k) {
        if (k == j)
            continue;
        A(r, k) = 1.0;
        A(r, j) = -1.0;
        strict.push_back(k > j);
        ++r;
    }
    const Eigen::VectorXd m = A * mean;
    const Eigen::MatrixXd S = A * cov * A.transpose();
    const Eigen::VectorXd c = A * cov.col(weight_index);
    const Eigen::Index d = m.size();
    auto orthant = [&](const Eigen::VectorXd& mm, const Eigen::MatrixXd& SS, Eigen::Index skip) {
        std::vector<QuadRow> rows;
        for (Eigen::Index k = 0; k < d; ++k) {
            if (k == skip)
                continue;
            QuadRow row;
            row.kind = RowKind::AtLeast;
            row.strict = strict[static_cast<std::size_t>(k)];
            rows.push_back(row);
        }
        if (skip < 0)
            return gaussian_expectation(mm, SS, rows, opts);
        std::vector<int> keep;
        for (Eigen::Index k = 0; k < d; ++k)
            if (k != skip)
                keep.push_back(static_cast<int>(k));
        Eigen::VectorXd ms;
        Eigen::MatrixXd Ss;
        select(mm, SS, keep, ms, Ss);
        return gaussian_expectation(ms, Ss, rows, opts);
    };

    // E[(X - mu) 1{D >= 0}] = sum_l Cov(X, D_l) f_l(0) P(D_-l >= 0 | D_l = 0)
    double acc = mu_x * orthant(m, S, -1);
    const double scale = S.diagonal().maxCoeff();
    for (Eigen::Index l = 0; l < d; ++l) {
        const double var = S(l, l);
        if (c(l) == 0.0 || !(var > 1e-13 * scale))
            continue;
        const double z = m(l) / std::sqrt(var);
        const double density = std::exp(-0.5 * z * z) / std::sqrt(2.0 * M_PI * var);
        const Eigen::VectorXd col = S.col(l);
        const Eigen::VectorXd mc = m - col * (m(l) / var);
        const Eigen::MatrixXd Sc = S - col * col.transpose() / var;
        acc += c(l) * density * (d == 1 ? 1.0 : orthant(mc, Sc, l));
    }
    return acc;
}

double pair_density(const Eigen::VectorXd& mean, const Eigen::MatrixXd& cov, int a, int b,
                    const std::vector<int>& others, int weight_index,
                    const std::function<double(double)>& weight, const std::vector<double>& kinks,
                    const QuadratureOptions& opts)
{
    const Eigen::VectorXd c = cov.col(b) - cov.col(a);
    const double var = c(b) - c(a);
    const double mu = mean(b) - mean(a);
    const double scale = std::max(cov(a, a), cov(b, b));
    if (!(var > 1e-13 * scale) || !(var > 0.0)) {
        if (mu != 0.0)
            return 0.0;
        throw NumericalError("pair density: the two candidates coincide");
    }
    const double sd = std::sqrt(var);
    const double z = mu / sd;
    const double density = std::exp(-0.5 * z * z) / (sd * std::sqrt(2.0 * M_PI));

    const Eigen::VectorXd m = mean - c * (mu / var);
    const Eigen::MatrixXd S = cov - c * c.transpose() / var;

    const bool weighted = weight_index >= 0;
    const auto rows_n = static_cast<Eigen::Index>(others.size()) + (weighted ? 1 : 0);
    if (rows_n == 0)
        return density;
    Eigen::MatrixXd A = Eigen::MatrixXd::Zero(rows_n, mean.size());
    std::vector<QuadRow> rows;
    Eigen::Index r = 0;
    if (weighted) {
        A(r++, weight_index) = 1.0;
        QuadRow row;
        row.kind = RowKind::Weighted;
        row.weight = weight;
        row.kinks = kinks;
        rows.push_back(row);
    }
    for (int k : others) {
        A(r, k) = 1.0;
        A(r, a) -= 1.0;
        ++r;
        QuadRow row;
        row.kind = RowKind::AtLeast;
        rows.push_back(row);
    }
    return density * gaussian_expectation(A * m, A * S * A.transpose(), rows, opts);
}

}  // namespace eflux
