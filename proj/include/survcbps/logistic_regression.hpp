#pragma once

#include <Eigen/Dense>

#include <string>
#include <vector>

namespace survcbps {

struct LogisticFit {
  Eigen::VectorXd coef;      // intercept first when fitted with one
  bool intercept = false;
  int iterations = 0;
  bool converged = false;
  std::vector<std::string> warnings;
};

// Ridge-penalized logistic regression of `d` on `x` by Newton-Raphson,
// minimizing -loglik + ridge/2 * ||coef||^2 (the intercept is not penalized).
LogisticFit fit_logistic(const Eigen::MatrixXd& x, const Eigen::VectorXi& d, double ridge, bool intercept,
                         int max_iter = 100, double tol = 1e-10);

}  // namespace survcbps
