#include "fixtures.hpp"
#include "survcbps/baselines.hpp"
#include "survcbps/errors.hpp"
#include "survcbps/pel.hpp"
#include "survcbps/sim.hpp"

#include <doctest.h>

#include <random>

using namespace survcbps;

TEST_CASE("estimator names round-trip") {
  for (auto kind : {EstimatorKind::proposed, EstimatorKind::naive_ipw, EstimatorKind::cbps_unpenalized,
                    EstimatorKind::aipw})
    CHECK(parse_estimator(estimator_name(kind)) == kind);
  CHECK_FALSE(parse_estimator("tmle").has_value());
}

TEST_CASE("naive IPW agrees with the difference in means under randomization") {
  std::mt19937_64 rng(101);
  const Dataset data = fixtures::random_dataset(rng, 400, 3, Eigen::VectorXd::Zero(3), 0.0);
  BaselineOptions options;
  options.bootstrap = 100;
  const ATEResult r = fit_naive_ipw(data, fit_censoring_models(data), options);
  double s1 = 0, n1 = 0, s0 = 0, n0 = 0;
  for (Eigen::Index i = 0; i < data.n(); ++i) (data.d()[i] ? s1 : s0) += data.y()[i], (data.d()[i] ? n1 : n0) += 1;
  CHECK(r.se > 0.0);
  CHECK(std::abs(r.ate - (s1 / n1 - s0 / n0)) <= 3.0 * r.se);
  CHECK(r.ci_low < r.ate);
  CHECK(r.ci_high > r.ate);
}

TEST_CASE("bootstrap is reproducible for a fixed seed") {
  std::mt19937_64 rng(103);
  const Dataset data = fixtures::random_dataset(rng, 150, 2, Eigen::Vector2d(0.3, 0.3));
  const CensorModels k = fit_censoring_models(data);
  BaselineOptions options;
  options.bootstrap = 50;
  const ATEResult a = fit_naive_ipw(data, k, options);
  const ATEResult b = fit_naive_ipw(data, k, options);
  CHECK(a.se == b.se);
  options.seed = 7;
  const ATEResult c = fit_naive_ipw(data, k, options);
  CHECK(c.ate == a.ate);
  CHECK(c.se != a.se);
}

TEST_CASE("unpenalized CBPS is the tau = 0 EL fit") {
  std::mt19937_64 rng(107);
  const Dataset data = fixtures::random_dataset(rng, 300, 3, Eigen::Vector3d(0.5, -0.5, 0.2));
  const CensorModels k = fit_censoring_models(data);
  const ATEResult r = fit_cbps_unpenalized(data, k);
  const PELFit fit = fit_pel(data, k, 0.0);
  const ATEResult expected = ate_with_ci(data, fit, k);
  CHECK(std::abs(r.ate - expected.ate) <= 1e-12);
  CHECK(std::abs(r.se - expected.se) <= 1e-12);
  CHECK(fit.active_set.size() == 3);

  // Balance under the empirical-likelihood weights.
  const Eigen::MatrixXd g = stack_g({fit.beta_hat, 0.01}, data, k);
  const Eigen::VectorXd w = el_weights(g, fit.dual);
  CHECK((g.transpose() * w).cwiseAbs().maxCoeff() <= 1e-6);

  // Tiny positive tau converges to the same point.
  PelOptions no_threshold;
  no_threshold.threshold = false;
  const PELFit near = fit_pel(data, k, 1e-8, no_threshold);
  CHECK((near.beta_hat - fit.beta_hat).cwiseAbs().maxCoeff() <= 1e-4);
}

TEST_CASE("AIPW with zero outcome models is the unnormalized IPW estimate") {
  std::mt19937_64 rng(109);
  const Dataset data = fixtures::random_dataset(rng, 200, 2, Eigen::Vector2d(0.5, -0.5));
  const CensorModels k = fit_censoring_models(data);
  const Eigen::VectorXd scores = naive_scores(data, BaselineOptions{});
  const Eigen::VectorXd response = ipcw_response(data, k);
  const Eigen::VectorXd zero = Eigen::VectorXd::Zero(data.n());
  const auto [mu1, mu0] = aipw_means(data, scores, response, zero, zero);
  double s1 = 0.0, s0 = 0.0;
  for (Eigen::Index i = 0; i < data.n(); ++i) {
    const double ytilde = data.delta()[i] ? data.y()[i] / (data.d()[i] ? k.treated : k.control)(data.y()[i]) : 0.0;
    if (data.d()[i])
      s1 += ytilde / scores[i];
    else
      s0 += ytilde / (1.0 - scores[i]);
  }
  CHECK(std::abs(mu1 - s1 / 200.0) <= 1e-10);
  CHECK(std::abs(mu0 - s0 / 200.0) <= 1e-10);
}

TEST_CASE("AIPW is centred on zero under a null effect") {
  SimConfig config;
  config.n = 300;
  config.p = 5;
  config.beta_nonzero = 2;
  config.gamma_nonzero = 0;
  int within = 0;
  for (int s = 0; s < 10; ++s) {
    const Dataset data = generate_dataset(config, replication_seed(5, s), 0.3).data;
    BaselineOptions options;
    options.bootstrap = 60;
    const ATEResult r = fit_aipw(data, fit_censoring_models(data), options);
    within += std::abs(r.ate) <= 3.0 * r.se;
  }
  CHECK(within >= 9);
}

TEST_CASE("baselines reject degenerate inputs") {
  const Dataset data = fixtures::make({1, 2, 3}, {1, 0, 0}, {1, 0, 0}, {{0}, {1}, {2}});
  const CensorModels k{CensorSurvival::identity(Arm::treated), CensorSurvival::identity(Arm::control)};
  CHECK_THROWS_AS(fit_naive_ipw(data, k), DegenerateError);
  CHECK_THROWS_AS(fit_aipw(data, k), DegenerateError);
  CHECK_THROWS_AS(run_baseline(BaselineSpec{EstimatorKind::proposed, {}}, data, k), Error);
}
