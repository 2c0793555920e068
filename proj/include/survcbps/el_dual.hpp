#pragma once

#include <Eigen/Dense>

namespace survcbps {

struct DualOptions {
  double tolerance = 1e-8;  // on the infinity norm of the dual gradient
  int max_iterations = 100;
};

// Solution of the inner empirical-likelihood problem
//   max_lambda sum_i log*(1 + lambda' g_i),
// where log* is the log extended by a quadratic below 1/n.
struct ELDualState {
  Eigen::VectorXd lambda;
  double inner_objective = 0.0;
  double grad_norm = 0.0;
  int iterations = 0;
  bool converged = false;
  // d log*(z) / dz at z_i = 1 + lambda' g_i; equals 1 / z_i on the log branch.
  Eigen::VectorXd log_slope;
  double min_denominator = 1.0;  // min_i (1 + lambda' g_i)
};

// Pseudo-logarithm with quadratic continuation below `threshold`, and its
// first two derivatives.
double pseudo_log(double z, double threshold) noexcept;
double pseudo_log_d1(double z, double threshold) noexcept;
double pseudo_log_d2(double z, double threshold) noexcept;

// Damped Newton with step halving. `lambda_init` may be empty (start at 0) or
// a warm start of length m. Throws DataError on non-finite input; returns
// converged == false when the iteration budget runs out.
ELDualState solve_inner_dual(const Eigen::MatrixXd& gmat, const Eigen::VectorXd& lambda_init = {},
                             const DualOptions& options = {});

// Empirical-likelihood weights w_i = 1 / (n (1 + lambda' g_i)).
Eigen::VectorXd el_weights(const Eigen::MatrixXd& gmat, const ELDualState& state);

}  // namespace survcbps
