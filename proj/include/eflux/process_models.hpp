#pragma once

#include <Eigen/Dense>
#include <functional>
#include <memory>
#include <vector>

#include "eflux/rng.hpp"

namespace eflux {

enum class ProcessKind { BrownianMotion, BrownianBridge, OrnsteinUhlenbeck, Custom };

// Behaviour of the integrated bridge outside [anchor, anchor + T].
enum class BridgeOutside { HoldConstant, Zero };

// User-supplied second-order structure for Custom processes. X is the process
// (g'), G its integral from the anchor (g).
struct CustomKernel {
    std::function<double(double, double)> cov_x;
    std::function<double(double, double)> cov_g;
    std::function<double(double, double)> cov_gx;  // Cov(G(s), X(t))
    std::function<double(double)> mean_x;
    std::function<double(double)> mean_g;
};

// X is BM / bridge / stationary OU started at the anchor, scaled by sigma,
// plus a polynomial drift sum_k drift[k] (y - anchor)^k. G(y) = int_anchor^y X.
// `integrated` selects whether covariance() describes G or X.
struct ProcessSpec {
    ProcessKind kind = ProcessKind::BrownianMotion;
    bool integrated = true;
    double anchor = 0.0;
    double domain_lo = -8.0;
    double domain_hi = 8.0;
    double T = 1.0;
    double alpha = 1.0;
    double sigma = 1.0;
    std::vector<double> drift;
    BridgeOutside outside = BridgeOutside::HoldConstant;
    std::shared_ptr<const CustomKernel> custom;
};

void validate(const ProcessSpec& spec);
bool in_domain(const ProcessSpec& spec, double y);
bool is_deterministic(const ProcessSpec& spec);

// Closed-form second moments; all arguments are absolute coordinates.
double covariance(const ProcessSpec& spec, double s, double t);
double cov_x(const ProcessSpec& spec, double s, double t);
double cov_g(const ProcessSpec& spec, double s, double t);
double cov_gx(const ProcessSpec& spec, double s, double t);
double mean_x(const ProcessSpec& spec, double y);
double mean_g(const ProcessSpec& spec, double y);

struct CovarianceModel {
    std::vector<double> points;
    Eigen::VectorXd mean;
    Eigen::MatrixXd sigma;
    Eigen::MatrixXd inverse;  // of sigma + jitter I
    Eigen::MatrixXd chol;
    // Eigenpairs of the inverse, eigenvalues ascending.
    Eigen::MatrixXd eigenvectors;
    Eigen::VectorXd eigenvalues;
    double jitter = 0.0;

    static CovarianceModel from_matrix(std::vector<double> points, Eigen::VectorXd mean,
                                       Eigen::MatrixXd sigma);
};

CovarianceModel build_covariance_model(const ProcessSpec& spec, const std::vector<double>& points);
Eigen::VectorXd sample_joint(const CovarianceModel& model, RngStream& rng);

// Lower-triangular L with L L^T = S. Throws NumericalError naming the row that
// fails; `labels` maps rows to coordinates for the message.
Eigen::MatrixXd cholesky_factor(const Eigen::MatrixXd& S, const std::vector<double>& labels = {});

// One realization of (X, G) on a sorted point list.
struct PathSample {
    std::vector<double> points;
    std::vector<double> gprime;
    std::vector<double> g;

    // Index of y in points, or -1 when absent (relative tolerance 1e-12).
    long find(double y) const;
};

// Exact joint sampling: Markov stepping for BM, bridge and OU, Cholesky for
// Custom. Points are sorted and deduplicated.
PathSample sample_path(const ProcessSpec& spec, std::vector<double> points, RngStream& rng);

// Deterministic path from closed forms, for tests and drift-only data.
PathSample evaluate_path(std::vector<double> points, const std::function<double(double)>& g,
                         const std::function<double(double)>& gprime);

// Piecewise-constant walk on 2^M equal pieces of [0, 1]. values[n] is the
// walk at the right end of piece n, so W_M(1-) = W(1).
struct DiscretizedBm {
    int level = 0;
    std::vector<double> values;
    std::vector<double> node_integrals;  // I_M at n 2^-M, n = 0..2^M

    double width() const { return 1.0 / static_cast<double>(values.size()); }
    double value_at(double t) const;     // right-continuous
    double integral_at(double t) const;  // exact, piecewise linear
};

// A fine walk at max_level whose coarser levels subsample it, so every level
// lives on one probability space.
class DyadicRefinement {
public:
    DyadicRefinement(int max_level, RngStream& rng);
    DiscretizedBm level(int M) const;
    int max_level() const { return max_level_; }

private:
    int max_level_;
    std::vector<double> walk_;  // B(k 2^-max_level), k = 0..2^max_level
};

DiscretizedBm discretize_bm(int M, RngStream& rng);

// sup_t |I_a(t) - I_b(t)|, attained at the finer nodes.
double sup_integral_difference(const DiscretizedBm& a, const DiscretizedBm& b);

}  // namespace eflux
