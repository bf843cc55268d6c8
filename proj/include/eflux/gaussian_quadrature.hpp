#pragma once

#include <Eigen/Dense>
#include <functional>
#include <vector>

namespace eflux {

// One coordinate of a Gaussian vector visited in order. AtLeast rows require
// Y_k >= lower + Y_ref (ref < k, or -1 for a constant bound); strict only
// matters when the row is deterministic given the earlier ones.
enum class RowKind { Free, Weighted, AtLeast };

struct QuadRow {
    RowKind kind = RowKind::Free;
    int ref = -1;
    double lower = 0.0;
    bool strict = false;
    std::function<double(double)> weight;
    std::vector<double> kinks;  // values of Y_k where the weight is not smooth
};

struct QuadratureOptions {
    double tolerance = 1e-5;
    unsigned max_depth = 10;
    double rank_tolerance = 1e-12;
};

// E[ prod_k weight_k(Y_k) * prod_k 1{Y_k >= bound_k} ] for Y ~ N(mean, cov).
// Rows are conditioned one at a time (semidefinite Cholesky in the given
// order) and each new direction is integrated in probability space.
double gaussian_expectation(const Eigen::VectorXd& mean, const Eigen::MatrixXd& cov,
                            const std::vector<QuadRow>& rows, const QuadratureOptions& opts = {});

// P(Y_k >= lower_k for all k)
double orthant_probability(const Eigen::VectorXd& mean, const Eigen::MatrixXd& cov,
                           const Eigen::VectorXd& lower, const QuadratureOptions& opts = {});

// P(j is the greatest minimizer of Y)
double minimum_probability(const Eigen::VectorXd& mean, const Eigen::MatrixXd& cov, int j,
                           const QuadratureOptions& opts = {});

// E[ weight(Z_w) ; j is the greatest minimizer of Z_0..Z_{candidates-1} ].
// The weight coordinate may lie outside the candidate block.
double minimum_expectation(const Eigen::VectorXd& mean, const Eigen::MatrixXd& cov, int candidates,
                           int j, int weight_index, const std::function<double(double)>& weight,
                           const std::vector<double>& kinks = {},
                           const QuadratureOptions& opts = {});

// Same with the identity weight, reduced by Stein's identity to conditional
// orthant probabilities one dimension lower.
double minimum_first_moment(const Eigen::VectorXd& mean, const Eigen::MatrixXd& cov, int candidates,
                            int j, int weight_index, const QuadratureOptions& opts = {});

// E[ weight(Z_w) ; Z_a <= Z_k for k in others | Z_b = Z_a ] times the density
// of Z_b - Z_a at 0. weight_index < 0 means no weight.
double pair_density(const Eigen::VectorXd& mean, const Eigen::MatrixXd& cov, int a, int b,
                    const std::vector<int>& others, int weight_index,
                    const std::function<double(double)>& weight,
                    const std::vector<double>& kinks = {}, const QuadratureOptions& opts = {});

// Gaussian vector restricted to a subset of coordinates.
void select(const Eigen::VectorXd& mean, const Eigen::MatrixXd& cov, const std::vector<int>& idx,
            Eigen::VectorXd& mean_out, Eigen::MatrixXd& cov_out);

}  // namespace eflux
