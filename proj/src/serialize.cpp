#include "survcbps/serialize.hpp"

#include <cmath>

namespace survcbps {

namespace {

nlohmann::json number(double v) { return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr); }

}  // namespace

nlohmann::json to_json(const ATEResult& r) {
  return {{"mu1", number(r.mu1)},
          {"mu0", number(r.mu0)},
          {"ate", number(r.ate)},
          {"se", number(r.se)},
          {"se_propensity", number(r.se_propensity)},
          {"ci_low", number(r.ci_low)},
          {"ci_high", number(r.ci_high)},
          {"level", r.level},
          {"median1", number(r.median1)},
          {"median0", number(r.median0)},
          {"median_diff", number(r.median_diff)},
          {"n_effective_1", number(r.n_effective_1)},
          {"n_effective_0", number(r.n_effective_0)},
          {"warnings", r.warnings}};
}

nlohmann::json to_json(const DatasetSummary& s) {
  return {{"n", s.n},
          {"p", s.p},
          {"treated_fraction", s.treated_fraction},
          {"censoring_rate", s.censoring_rate},
          {"censoring_rate_treated", s.censoring_rate_treated},
          {"censoring_rate_control", s.censoring_rate_control}};
}

nlohmann::json fit_diagnostics(const PELFit& fit, const Dataset& data) {
  nlohmann::json coef = nlohmann::json::object();
  nlohmann::json active = nlohmann::json::array();
  const auto& names = data.covariate_names();
  for (Eigen::Index j = 0; j < fit.beta_hat.size(); ++j) coef[names[static_cast<std::size_t>(j)]] = fit.beta_hat[j];
  for (auto j : fit.active_set) active.push_back(names[static_cast<std::size_t>(j)]);
  return {{"tau", fit.tau},
          {"coefficients", coef},
          {"active_covariates", active},
          {"converged", fit.converged},
          {"outer_iterations", fit.outer_iterations},
          {"objective", fit.objective_trace.empty() ? nlohmann::json(nullptr) : number(fit.objective_trace.back())},
          {"el_term", number(fit.el_term)},
          {"dual_converged", fit.dual.converged},
          {"dual_grad_norm", number(fit.dual.grad_norm)},
          {"fit_warnings", fit.warnings}};
}

}  // namespace survcbps
