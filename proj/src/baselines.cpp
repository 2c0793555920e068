#include "survcbps/baselines.hpp"

#include "survcbps/errors.hpp"
#include "survcbps/logistic_regression.hpp"
#include "survcbps/pel.hpp"
#include "survcbps/rng.hpp"

#include <algorithm>
#include <cmath>
#include <functional>

namespace survcbps {

namespace {

constexpr std::uint64_t kBootstrapStream = 0xB0075;

struct PointEstimate {
  double mu1 = 0.0;
  double mu0 = 0.0;
};

ATEResult with_bootstrap(const Dataset& data, const CensorModels& k, const BaselineOptions& options,
                         const std::function<PointEstimate(const Dataset&, const CensorModels&)>& estimate,
                         std::vector<std::string> warnings) {
  ATEResult r;
  r.level = options.level;
  const PointEstimate point = estimate(data, k);
  r.mu1 = point.mu1;
  r.mu0 = point.mu0;
  r.ate = r.mu1 - r.mu0;
  r.warnings = std::move(warnings);

  const Eigen::Index n = data.n();
  std::vector<double> draws;
  draws.reserve(static_cast<std::size_t>(options.bootstrap));
  std::vector<Eigen::Index> rows(static_cast<std::size_t>(n));
  int failures = 0;
  for (int b = 0; b < options.bootstrap; ++b) {
    auto rng = make_stream(options.seed, {kBootstrapStream, static_cast<std::uint64_t>(b)});
    std::uniform_int_distribution<Eigen::Index> pick(0, n - 1);
    for (auto& row : rows) row = pick(rng);
    try {
      const Dataset resample = data.select_rows(rows);
      const CensorModels kb = fit_censoring_models(resample, options.km_floor);
      const PointEstimate e = estimate(resample, kb);
      if (std::isfinite(e.mu1 - e.mu0)) draws.push_back(e.mu1 - e.mu0);
      else ++failures;
    } catch (const Error&) {
      ++failures;
    }
  }
  if (draws.size() < 2) throw DegenerateError("bootstrap: fewer than two usable resamples");
  if (failures > 0) r.warnings.push_back(std::to_string(failures) + " bootstrap resamples were degenerate and skipped");
  double mean = 0.0;
  for (double v : draws) mean += v;
  mean /= static_cast<double>(draws.size());
  double ss = 0.0;
  for (double v : draws) ss += (v - mean) * (v - mean);
  r.se = std::sqrt(ss / static_cast<double>(draws.size() - 1));
  const double z = normal_quantile(0.5 + 0.5 * options.level);
  r.ci_low = r.ate - z * r.se;
  r.ci_high = r.ate + z * r.se;
  return r;
}

void attach_descriptives(ATEResult& r, const Dataset& data, const Eigen::VectorXd& scores, const CensorModels& k) {
  Eigen::VectorXd w1 = Eigen::VectorXd::Zero(data.n()), w0 = Eigen::VectorXd::Zero(data.n());
  Eigen::VectorXd ipcw1 = w1, ipcw0 = w0;
  for (Eigen::Index i = 0; i < data.n(); ++i) {
    const bool event = data.delta()[i] == 1;
    if (data.d()[i] == 1) {
      w1[i] = 1.0 / scores[i];
      if (event) ipcw1[i] = w1[i] / k.treated(data.y()[i]);
    } else {
      w0[i] = 1.0 / (1.0 - scores[i]);
      if (event) ipcw0[i] = w0[i] / k.control(data.y()[i]);
    }
  }
  r.median1 = weighted_median(data.y(), w1);
  r.median0 = weighted_median(data.y(), w0);
  r.median_diff = r.median1 - r.median0;
  r.n_effective_1 = effective_sample_size(ipcw1);
  r.n_effective_0 = effective_sample_size(ipcw0);
}

Eigen::VectorXd linear_fit_predict(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, const Eigen::MatrixXd& x_all,
                                   double ridge, std::vector<std::string>* warnings) {
  const Eigen::Index k = x.cols() + 1;
  Eigen::MatrixXd z(x.rows(), k);
  z.col(0).setOnes();
  z.rightCols(x.cols()) = x;
  Eigen::VectorXd coef;
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(z);
  if (x.rows() >= k && qr.rank() == k) {
    coef = qr.solve(y);
  } else {
    Eigen::MatrixXd gram = z.transpose() * z;
    gram.diagonal().tail(x.cols()).array() += std::max(ridge, 1e-6) * (1.0 + gram.diagonal().tail(x.cols()).mean());
    gram(0, 0) += 1e-12;
    coef = gram.ldlt().solve(z.transpose() * y);
    if (warnings) warnings->push_back("outcome regression is rank deficient; ridge fallback used");
  }
  Eigen::MatrixXd z_all(x_all.rows(), k);
  z_all.col(0).setOnes();
  z_all.rightCols(x_all.cols()) = x_all;
  return z_all * coef;
}

}  // namespace

std::string_view estimator_name(EstimatorKind kind) noexcept {
  switch (kind) {
    case EstimatorKind::proposed: return "proposed";
    case EstimatorKind::naive_ipw: return "naive_ipw";
    case EstimatorKind::cbps_unpenalized: return "cbps_unpenalized";
    case EstimatorKind::aipw: return "aipw";
  }
  return "unknown";
}

std::optional<EstimatorKind> parse_estimator(std::string_view name) noexcept {
  for (auto kind : {EstimatorKind::proposed, EstimatorKind::naive_ipw, EstimatorKind::cbps_unpenalized,
                    EstimatorKind::aipw})
    if (estimator_name(kind) == name) return kind;
  return std::nullopt;
}

Eigen::VectorXd naive_scores(const Dataset& data, const BaselineOptions& options, std::vector<std::string>* warnings) {
  if (data.n() <= data.p() + 1 && warnings)
    warnings->push_back("n does not exceed p + 1; logistic MLE relies on the ridge term");
  LogisticFit fit = fit_logistic(data.x(), data.d(), options.ridge, true);
  if (!fit.warnings.empty()) {
    if (warnings) warnings->push_back("logistic MLE unstable (possible separation); ridge fallback used");
    fit = fit_logistic(data.x(), data.d(), std::max(options.ridge, 1e-2), true);
  }
  Eigen::MatrixXd z(data.n(), data.p() + 1);
  z.col(0).setOnes();
  z.rightCols(data.p()) = data.x();
  const Eigen::VectorXd eta = z * fit.coef;
  return eta.unaryExpr([&](double e) { return std::clamp(logistic(e), options.score_clip, 1.0 - options.score_clip); });
}

Eigen::VectorXd ipcw_response(const Dataset& data, const CensorModels& k) {
  Eigen::VectorXd out = Eigen::VectorXd::Zero(data.n());
  for (Eigen::Index i = 0; i < data.n(); ++i) {
    if (data.delta()[i] == 0) continue;
    const Arm arm = data.d()[i] == 1 ? Arm::treated : Arm::control;
    out[i] = data.y()[i] / k[arm](data.y()[i]);
  }
  return out;
}

std::pair<double, double> aipw_means(const Dataset& data, const Eigen::VectorXd& scores,
                                     const Eigen::VectorXd& response, const Eigen::VectorXd& fitted1,
                                     const Eigen::VectorXd& fitted0) {
  const Eigen::Index n = data.n();
  double s1 = 0.0, s0 = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    s1 += fitted1[i];
    s0 += fitted0[i];
    if (data.d()[i] == 1)
      s1 += (response[i] - fitted1[i]) / scores[i];
    else
      s0 += (response[i] - fitted0[i]) / (1.0 - scores[i]);
  }
  return {s1 / static_cast<double>(n), s0 / static_cast<double>(n)};
}

ATEResult fit_naive_ipw(const Dataset& data, const CensorModels& k, const BaselineOptions& options) {
  data.require_estimable();
  std::vector<std::string> warnings;
  const Eigen::VectorXd scores = naive_scores(data, options, &warnings);
  auto estimate = [&](const Dataset& d, const CensorModels& km) {
    const auto [mu1, mu0] = ipcw_ipw_means(d, naive_scores(d, options), km);
    return PointEstimate{mu1, mu0};
  };
  ATEResult r = with_bootstrap(data, k, options, estimate, std::move(warnings));
  attach_descriptives(r, data, scores, k);
  return r;
}

ATEResult fit_cbps_unpenalized(const Dataset& data, const CensorModels& k, const BaselineOptions& options) {
  data.require_estimable();
  if (data.p() + 2 > data.n()) throw DegenerateError("unpenalized CBPS needs p + 2 <= n");
  PelOptions pel;
  pel.score_clip = options.score_clip;
  const PELFit fit = fit_pel(data, k, 0.0, pel);
  if (!fit.converged) throw ConvergenceError("unpenalized CBPS fit did not converge");
  AteOptions ate;
  ate.level = options.level;
  ate.score_clip = options.score_clip;
  ATEResult r = ate_with_ci(data, fit, k, ate);
  r.warnings.insert(r.warnings.end(), fit.warnings.begin(), fit.warnings.end());
  return r;
}

ATEResult fit_aipw(const Dataset& data, const CensorModels& k, const BaselineOptions& options) {
  data.require_estimable();
  std::vector<std::string> warnings;
  auto estimate_impl = [&](const Dataset& d, const CensorModels& km, std::vector<std::string>* warn) {
    const Eigen::VectorXd scores = naive_scores(d, options, warn);
    const Eigen::VectorXd response = ipcw_response(d, km);
    Eigen::VectorXd fitted[2];
    for (int arm = 0; arm < 2; ++arm) {
      std::vector<Eigen::Index> rows;
      for (Eigen::Index i = 0; i < d.n(); ++i)
        if (d.d()[i] == arm) rows.push_back(i);
      Eigen::MatrixXd xa(static_cast<Eigen::Index>(rows.size()), d.p());
      Eigen::VectorXd ya(static_cast<Eigen::Index>(rows.size()));
      for (std::size_t r = 0; r < rows.size(); ++r) {
        xa.row(static_cast<Eigen::Index>(r)) = d.x().row(rows[r]);
        ya[static_cast<Eigen::Index>(r)] = response[rows[r]];
      }
      if (rows.empty()) throw DegenerateError("AIPW: empty arm");
      fitted[arm] = linear_fit_predict(xa, ya, d.x(), options.ridge, warn);
    }
    const auto [mu1, mu0] = aipw_means(d, scores, response, fitted[1], fitted[0]);
    return PointEstimate{mu1, mu0};
  };
  const PointEstimate point = estimate_impl(data, k, &warnings);
  auto estimate = [&](const Dataset& d, const CensorModels& km) {
    if (&d == &data) return point;
    return estimate_impl(d, km, nullptr);
  };
  ATEResult r = with_bootstrap(data, k, options, estimate, std::move(warnings));
  attach_descriptives(r, data, naive_scores(data, options), k);
  return r;
}

ATEResult run_baseline(const BaselineSpec& spec, const Dataset& data, const CensorModels& k) {
  switch (spec.kind) {
    case EstimatorKind::naive_ipw: return fit_naive_ipw(data, k, spec.options);
    case EstimatorKind::cbps_unpenalized: return fit_cbps_unpenalized(data, k, spec.options);
    case EstimatorKind::aipw: return fit_aipw(data, k, spec.options);
    case EstimatorKind::proposed: break;
  }
  throw Error("run_baseline: the proposed estimator is not a baseline");
}

}  // namespace survcbps
