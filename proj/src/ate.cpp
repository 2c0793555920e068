#include "survcbps/ate.hpp"

#include "survcbps/errors.hpp"

#include <boost/math/distributions/normal.hpp>

#include <algorithm>
#include <cmath>
#include <numeric>

namespace survcbps {

namespace {

struct IpcwTerms {
  Eigen::VectorXd w1;  // D Delta / (pi K1(Y))
  Eigen::VectorXd w0;  // (1 - D) Delta / ((1 - pi) K0(Y))
};

IpcwTerms ipcw_terms(const Dataset& data, const Eigen::VectorXd& scores, const CensorModels& k) {
  const Eigen::Index n = data.n();
  IpcwTerms t{Eigen::VectorXd::Zero(n), Eigen::VectorXd::Zero(n)};
  for (Eigen::Index i = 0; i < n; ++i) {
    if (data.delta()[i] == 0) continue;
    const double y = data.y()[i];
    if (data.d()[i] == 1)
      t.w1[i] = 1.0 / (scores[i] * k.treated(y));
    else
      t.w0[i] = 1.0 / ((1.0 - scores[i]) * k.control(y));
  }
  return t;
}

Eigen::VectorXd clipped_scores(const Dataset& data, const PropensityParams& params) {
  return MomentModel(data, CensorModels{CensorSurvival::identity(Arm::treated), CensorSurvival::identity(Arm::control)},
                     params.clip)
      .scores(params.beta);
}

double weighted_mean(const Eigen::VectorXd& w, const Eigen::VectorXd& y, const char* arm) {
  const double total = w.sum();
  if (!(total > 0.0)) throw DegenerateError(std::string("no uncensored subjects in the ") + arm + " arm");
  return w.dot(y) / total;
}

}  // namespace

std::pair<double, double> ipcw_ipw_means(const Dataset& data, const Eigen::VectorXd& scores, const CensorModels& k) {
  const IpcwTerms t = ipcw_terms(data, scores, k);
  return {weighted_mean(t.w1, data.y(), "treated"), weighted_mean(t.w0, data.y(), "control")};
}

std::pair<double, double> ipcw_ipw_means(const Dataset& data, const PropensityParams& params,
                                         const CensorModels& k) {
  return ipcw_ipw_means(data, clipped_scores(data, params), k);
}

NormalizedWeights normalized_weights(const Dataset& data, const PropensityParams& params) {
  const Eigen::VectorXd pi = clipped_scores(data, params);
  NormalizedWeights w{Eigen::VectorXd::Zero(data.n()), Eigen::VectorXd::Zero(data.n())};
  for (Eigen::Index i = 0; i < data.n(); ++i) {
    if (data.d()[i] == 1)
      w.treated[i] = 1.0 / pi[i];
    else
      w.control[i] = 1.0 / (1.0 - pi[i]);
  }
  const double s1 = w.treated.sum();
  const double s0 = w.control.sum();
  if (!(s1 > 0.0)) throw DegenerateError("treated arm is empty");
  if (!(s0 > 0.0)) throw DegenerateError("control arm is empty");
  w.treated /= s1;
  w.control /= s0;
  return w;
}

double weighted_median(std::span<const double> y, std::span<const double> w) {
  if (y.size() != w.size()) throw Error("weighted median: size mismatch");
  std::vector<std::size_t> order;
  double total = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    if (w[i] < 0.0 || !std::isfinite(w[i])) throw Error("weighted median: weights must be finite and nonnegative");
    if (w[i] > 0.0) {
      order.push_back(i);
      total += w[i];
    }
  }
  if (order.empty()) throw DegenerateError("weighted median: all weights are zero");
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return y[a] < y[b]; });
  const double target = 0.5 * total * (1.0 - 1e-12);
  double cumulative = 0.0;
  for (std::size_t k = 0; k < order.size(); ++k) {
    cumulative += w[order[k]];
    const bool last_of_tie = k + 1 == order.size() || y[order[k + 1]] != y[order[k]];
    if (last_of_tie && cumulative >= target) return y[order[k]];
  }
  return y[order.back()];
}

double weighted_median(const Eigen::VectorXd& y, const Eigen::VectorXd& w) {
  return weighted_median(std::span<const double>(y.data(), static_cast<std::size_t>(y.size())),
                         std::span<const double>(w.data(), static_cast<std::size_t>(w.size())));
}

SandwichResult sandwich_covariance(const PELFit& fit, const Dataset& data, const CensorModels& k, double score_clip) {
  if (fit.active_set.empty()) throw DegenerateError("sandwich covariance: the active set is empty");
  const MomentModel model(data, k, score_clip);
  const Eigen::MatrixXd g = model.moments(fit.beta_hat);
  const Eigen::MatrixXd full_jac = model.mean_jacobian(fit.beta_hat);
  const auto s = static_cast<Eigen::Index>(fit.active_set.size());

  SandwichResult out;
  out.active_set = fit.active_set;
  out.jacobian.resize(model.m(), s);
  for (Eigen::Index c = 0; c < s; ++c) out.jacobian.col(c) = full_jac.col(fit.active_set[static_cast<std::size_t>(c)]);
  out.second_moment = (g.transpose() * g) / static_cast<double>(model.n());

  Eigen::MatrixXd v = out.second_moment;
  Eigen::LDLT<Eigen::MatrixXd> vldlt(v);
  const double rcond = vldlt.rcond();
  if (vldlt.info() != Eigen::Success || !(rcond > 1e-12) || !vldlt.isPositive()) {
    v.diagonal().array() += 1e-8 * v.trace();
    vldlt.compute(v);
    out.regularized = true;
  }
  const Eigen::MatrixXd info = out.jacobian.transpose() * vldlt.solve(out.jacobian);
  Eigen::LDLT<Eigen::MatrixXd> ildlt(info);
  if (ildlt.info() != Eigen::Success || !(ildlt.rcond() > 1e-13) || !ildlt.isPositive())
    throw SingularMatrixError("sandwich covariance: G' V^-1 G is singular");
  out.sigma = ildlt.solve(Eigen::MatrixXd::Identity(s, s));
  out.sigma = 0.5 * (out.sigma + out.sigma.transpose()).eval();
  return out;
}

Eigen::VectorXd ate_gradient(const Dataset& data, const Eigen::VectorXd& beta, std::span<const Eigen::Index> active,
                             const CensorModels& k, double score_clip, double fd_step) {
  Eigen::VectorXd grad(static_cast<Eigen::Index>(active.size()));
  PropensityParams params{beta, score_clip};
  for (std::size_t c = 0; c < active.size(); ++c) {
    const Eigen::Index j = active[c];
    const double h = fd_step * (1.0 + std::abs(beta[j]));
    params.beta[j] = beta[j] + h;
    const auto [p1, p0] = ipcw_ipw_means(data, params, k);
    params.beta[j] = beta[j] - h;
    const auto [m1, m0] = ipcw_ipw_means(data, params, k);
    params.beta[j] = beta[j];
    grad[static_cast<Eigen::Index>(c)] = ((p1 - p0) - (m1 - m0)) / (2.0 * h);
  }
  return grad;
}

double normal_quantile(double p) { return boost::math::quantile(boost::math::normal(), p); }

double effective_sample_size(const Eigen::VectorXd& w) {
  const double sq = w.squaredNorm();
  return sq > 0.0 ? w.sum() * w.sum() / sq : 0.0;
}

ATEResult ate_with_ci(const Dataset& data, const PELFit& fit, const CensorModels& k, const AteOptions& options) {
  if (!fit.converged) throw ConvergenceError("propensity fit did not converge");
  if (!(options.level > 0.0 && options.level < 1.0)) throw Error("confidence level must lie in (0, 1)");
  const PropensityParams params{fit.beta_hat, options.score_clip};
  const Eigen::VectorXd pi = clipped_scores(data, params);
  const IpcwTerms terms = ipcw_terms(data, pi, k);
  const auto n = static_cast<double>(data.n());

  ATEResult r;
  r.level = options.level;
  r.mu1 = weighted_mean(terms.w1, data.y(), "treated");
  r.mu0 = weighted_mean(terms.w0, data.y(), "control");
  r.ate = r.mu1 - r.mu0;
  r.n_effective_1 = effective_sample_size(terms.w1);
  r.n_effective_0 = effective_sample_size(terms.w0);

  const NormalizedWeights w = normalized_weights(data, params);
  r.median1 = weighted_median(data.y(), w.treated);
  r.median0 = weighted_median(data.y(), w.control);
  r.median_diff = r.median1 - r.median0;

  // Influence of the ratio means at fixed beta.
  const double mean_w1 = terms.w1.mean();
  const double mean_w0 = terms.w0.mean();
  Eigen::VectorXd influence = (terms.w1.array() * (data.y().array() - r.mu1) / mean_w1 -
                               terms.w0.array() * (data.y().array() - r.mu0) / mean_w0)
                                  .matrix();

  if (!fit.active_set.empty()) {
    const Eigen::VectorXd grad_h = ate_gradient(data, fit.beta_hat, fit.active_set, k, options.score_clip,
                                                options.fd_step);
    if (grad_h.cwiseAbs().maxCoeff() > 0.0) {
      const SandwichResult sw = sandwich_covariance(fit, data, k, options.score_clip);
      if (sw.regularized) r.warnings.push_back("moment covariance was singular; a ridge was added");
      r.se_propensity = std::sqrt(std::max(grad_h.dot(sw.sigma * grad_h), 0.0) / n);

      // Influence of beta_active: -Sigma G' V^-1 g_i.
      const MomentModel model(data, k, options.score_clip);
      const Eigen::MatrixXd g = model.moments(fit.beta_hat);
      Eigen::MatrixXd v = sw.second_moment;
      if (sw.regularized) v.diagonal().array() += 1e-8 * v.trace();
      const Eigen::MatrixXd projector = sw.sigma * sw.jacobian.transpose() * v.ldlt().solve(Eigen::MatrixXd::Identity(v.rows(), v.cols()));
      const Eigen::VectorXd direction = projector.transpose() * grad_h;  // m
      influence -= g * direction;
    }
  }
  r.se = std::sqrt(influence.squaredNorm()) / n;

  const double z = normal_quantile(0.5 + 0.5 * options.level);
  r.ci_low = r.ate - z * r.se;
  r.ci_high = r.ate + z * r.se;
  if (r.n_effective_1 < 10.0 || r.n_effective_0 < 10.0)
    r.warnings.push_back("effective sample size below 10 in at least one arm");
  return r;
}

}  // namespace survcbps
