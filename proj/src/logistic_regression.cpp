#include "survcbps/logistic_regression.hpp"

#include "survcbps/estimating.hpp"

#include <cmath>

namespace survcbps {

namespace {

double penalized_nll(const Eigen::MatrixXd& z, const Eigen::VectorXd& y, const Eigen::VectorXd& coef,
                     const Eigen::VectorXd& ridge_diag) {
  const Eigen::VectorXd eta = z * coef;
  double nll = 0.0;
  for (Eigen::Index i = 0; i < eta.size(); ++i) {
    // log(1 + exp(eta)) - y * eta, evaluated stably
    const double e = eta[i];
    nll += (e > 0 ? e + std::log1p(std::exp(-e)) : std::log1p(std::exp(e))) - y[i] * e;
  }
  return nll + 0.5 * coef.cwiseAbs2().dot(ridge_diag);
}

}  // namespace

LogisticFit fit_logistic(const Eigen::MatrixXd& x, const Eigen::VectorXi& d, double ridge, bool intercept,
                         int max_iter, double tol) {
  const Eigen::Index n = x.rows();
  const Eigen::Index k = x.cols() + (intercept ? 1 : 0);
  Eigen::MatrixXd z(n, k);
  if (intercept) {
    z.col(0).setOnes();
    z.rightCols(x.cols()) = x;
  } else {
    z = x;
  }
  const Eigen::VectorXd y = d.cast<double>();
  Eigen::VectorXd ridge_diag = Eigen::VectorXd::Constant(k, ridge);
  if (intercept) ridge_diag[0] = 0.0;

  LogisticFit fit;
  fit.intercept = intercept;
  fit.coef = Eigen::VectorXd::Zero(k);
  double current = penalized_nll(z, y, fit.coef, ridge_diag);
  for (int it = 0; it < max_iter; ++it) {
    fit.iterations = it + 1;
    const Eigen::VectorXd eta = z * fit.coef;
    const Eigen::VectorXd mu = eta.unaryExpr([](double e) { return logistic(e); });
    const Eigen::VectorXd w = (mu.array() * (1.0 - mu.array())).matrix();
    const Eigen::VectorXd grad = z.transpose() * (mu - y) + ridge_diag.cwiseProduct(fit.coef);
    if (grad.lpNorm<Eigen::Infinity>() <= tol * static_cast<double>(n)) {
      fit.converged = true;
      break;
    }
    Eigen::MatrixXd hess = z.transpose() * (z.array().colwise() * w.array()).matrix();
    hess.diagonal() += ridge_diag;
    hess.diagonal().array() += 1e-12;
    const Eigen::VectorXd step = hess.ldlt().solve(grad);
    double t = 1.0;
    bool moved = false;
    for (int h = 0; h < 40; ++h, t *= 0.5) {
      const Eigen::VectorXd trial = fit.coef - t * step;
      const double value = penalized_nll(z, y, trial, ridge_diag);
      if (std::isfinite(value) && value <= current) {
        fit.coef = trial;
        current = value;
        moved = true;
        break;
      }
    }
    if (!moved) break;
    if ((t * step).lpNorm<Eigen::Infinity>() <= tol) {
      fit.converged = true;
      break;
    }
  }
  if (!fit.converged) fit.warnings.push_back("logistic regression did not converge");
  if (fit.coef.lpNorm<Eigen::Infinity>() > 15.0)
    fit.warnings.push_back("logistic regression coefficients are very large (possible separation)");
  return fit;
}

}  // namespace survcbps
