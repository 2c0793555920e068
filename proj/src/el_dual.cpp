#include "survcbps/el_dual.hpp"

#include "survcbps/errors.hpp"

#include <cmath>

namespace survcbps {

double pseudo_log(double z, double threshold) noexcept {
  if (z >= threshold) return std::log(z);
  const double r = z / threshold;
  return std::log(threshold) - 1.5 + 2.0 * r - 0.5 * r * r;
}

double pseudo_log_d1(double z, double threshold) noexcept {
  if (z >= threshold) return 1.0 / z;
  return 2.0 / threshold - z / (threshold * threshold);
}

double pseudo_log_d2(double z, double threshold) noexcept {
  if (z >= threshold) return -1.0 / (z * z);
  return -1.0 / (threshold * threshold);
}

namespace {

constexpr double kMaxDecrement = 1e-6;

struct Evaluation {
  double value = 0.0;
  Eigen::VectorXd z;
};

Evaluation evaluate_dual(const Eigen::MatrixXd& g, const Eigen::VectorXd& lambda, double threshold) {
  Evaluation e;
  e.z = (g * lambda).array() + 1.0;
  for (Eigen::Index i = 0; i < e.z.size(); ++i) e.value += pseudo_log(e.z[i], threshold);
  return e;
}

}  // namespace

ELDualState solve_inner_dual(const Eigen::MatrixXd& gmat, const Eigen::VectorXd& lambda_init,
                             const DualOptions& options) {
  if (!gmat.allFinite()) throw DataError("inner dual: moment matrix contains non-finite entries");
  const Eigen::Index n = gmat.rows();
  const Eigen::Index m = gmat.cols();
  if (n == 0) throw DataError("inner dual: empty moment matrix");
  const double threshold = 1.0 / static_cast<double>(n);

  ELDualState state;
  state.lambda = lambda_init.size() == m && lambda_init.allFinite() ? lambda_init : Eigen::VectorXd::Zero(m);
  Evaluation current = evaluate_dual(gmat, state.lambda, threshold);
  if (lambda_init.size() == m) {
    // A warm start that is worse than the origin is discarded.
    Evaluation origin = evaluate_dual(gmat, Eigen::VectorXd::Zero(m), threshold);
    if (!(current.value >= origin.value)) {
      state.lambda.setZero();
      current = std::move(origin);
    }
  }

  Eigen::VectorXd d1(n), d2(n), grad(m);
  for (int it = 0;; ++it) {
    for (Eigen::Index i = 0; i < n; ++i) {
      d1[i] = pseudo_log_d1(current.z[i], threshold);
      d2[i] = pseudo_log_d2(current.z[i], threshold);
    }
    grad.noalias() = gmat.transpose() * d1;
    state.grad_norm = grad.lpNorm<Eigen::Infinity>();
    state.iterations = it;

    const Eigen::MatrixXd scaled = gmat.array().colwise() * (-d2.array()).sqrt();
    Eigen::MatrixXd hess = Eigen::MatrixXd::Zero(m, m);
    hess.selfadjointView<Eigen::Lower>().rankUpdate(scaled.transpose());
    hess = hess.selfadjointView<Eigen::Lower>();
    Eigen::LDLT<Eigen::MatrixXd> ldlt(hess);
    Eigen::VectorXd step = ldlt.solve(grad);
    if (ldlt.info() != Eigen::Success || !step.allFinite() || step.dot(grad) <= 0.0) {
      const double ridge = 1e-10 * (hess.trace() / static_cast<double>(m) + 1.0);
      hess.diagonal().array() += ridge;
      step = hess.ldlt().solve(grad);
      if (!step.allFinite() || step.dot(grad) <= 0.0) step = grad;
    }

    // When 0 is outside the convex hull of the rows the objective is unbounded
    // and the gradient only decays like 1/|lambda|; the Newton decrement stays
    // of order n there, so it separates a true stationary point.
    const double decrement = step.dot(grad);
    if (state.grad_norm <= options.tolerance && decrement <= kMaxDecrement) {
      state.converged = true;
      break;
    }
    if (it >= options.max_iterations) break;

    // Near the optimum the Newton gain falls below the rounding error of the
    // summed objective; allow that much slack so the step is not halved away.
    const double slack = 1e-13 * (static_cast<double>(n) + std::abs(current.value));
    bool accepted = false;
    double t = 1.0;
    for (int h = 0; h < 50; ++h, t *= 0.5) {
      const Eigen::VectorXd trial = state.lambda + t * step;
      Evaluation candidate = evaluate_dual(gmat, trial, threshold);
      if (candidate.value >= current.value - slack) {
        state.lambda = trial;
        current = std::move(candidate);
        accepted = true;
        break;
      }
    }
    if (!accepted) break;
  }

  state.inner_objective = current.value;
  state.log_slope = d1;
  state.min_denominator = current.z.minCoeff();
  return state;
}

Eigen::VectorXd el_weights(const Eigen::MatrixXd& gmat, const ELDualState& state) {
  const double inv_n = 1.0 / static_cast<double>(gmat.rows());
  const Eigen::VectorXd z = (gmat * state.lambda).array() + 1.0;
  return (inv_n / z.array()).matrix();
}

}  // namespace survcbps
