#include "oracles.hpp"
#include "survcbps/el_dual.hpp"
#include "survcbps/errors.hpp"

#include <doctest.h>

#include <limits>
#include <random>

using namespace survcbps;

TEST_CASE("zero moment matrix gives lambda = 0") {
  const ELDualState s = solve_inner_dual(Eigen::MatrixXd::Zero(6, 3), {});
  CHECK(s.converged);
  CHECK(s.lambda.cwiseAbs().maxCoeff() == 0.0);
  CHECK(s.inner_objective == 0.0);
}

TEST_CASE("symmetric two-point column gives lambda = 0") {
  Eigen::MatrixXd g(2, 1);
  g << 1.0, -1.0;
  const ELDualState s = solve_inner_dual(g, Eigen::VectorXd::Constant(1, 0.3));
  CHECK(s.converged);
  CHECK(std::abs(s.lambda[0]) <= 1e-12);
}

TEST_CASE("inner dual agrees with a derivative-free maximizer on 5 x 2 fixtures") {
  std::mt19937_64 rng(17);
  std::normal_distribution<double> normal;
  int tested = 0;
  while (tested < 25) {
    Eigen::MatrixXd g(5, 2);
    for (auto& v : g.reshaped()) v = normal(rng) + 0.2;
    const ELDualState s = solve_inner_dual(g, {});
    if (!s.converged || s.min_denominator < 0.2) continue;  // keep clearly feasible fixtures
    ++tested;
    const Eigen::VectorXd ref =
        oracle::nelder_mead_max([&](const Eigen::VectorXd& l) { return oracle::dual_objective(g, l); },
                                Eigen::VectorXd::Zero(2));
    CHECK(std::abs(s.inner_objective - oracle::dual_objective(g, ref)) <= 1e-6);
    CHECK((s.lambda - ref).cwiseAbs().maxCoeff() <= 1e-6);
  }
}

TEST_CASE("orthonormal centred columns give a small multiplier") {
  std::mt19937_64 rng(4);
  std::normal_distribution<double> normal;
  const Eigen::Index n = 2000;
  Eigen::MatrixXd g(n, 3);
  for (auto& v : g.reshaped()) v = normal(rng);
  g.rowwise() -= g.colwise().mean();
  g = Eigen::HouseholderQR<Eigen::MatrixXd>(g).householderQ() * Eigen::MatrixXd::Identity(n, 3);
  g *= std::sqrt(static_cast<double>(n));  // unit second moments, exact zero means
  const ELDualState s = solve_inner_dual(g, {});
  CHECK(s.converged);
  CHECK(s.lambda.norm() <= 1e-8);
}

TEST_CASE("converged states satisfy the gradient and weight conditions") {
  std::mt19937_64 rng(29);
  std::normal_distribution<double> normal;
  for (int trial = 0; trial < 50; ++trial) {
    Eigen::MatrixXd g(40, 4);
    for (auto& v : g.reshaped()) v = normal(rng) + 0.3;
    const ELDualState s = solve_inner_dual(g, {});
    REQUIRE(s.converged);
    CHECK(s.grad_norm <= 1e-8);
    CHECK(s.min_denominator > 0.0);
    if (s.min_denominator >= 1.0 / 40.0) {
      const Eigen::VectorXd w = el_weights(g, s);
      CHECK(w.minCoeff() > 0.0);
      CHECK((g.transpose() * w).cwiseAbs().maxCoeff() <= 1e-6);
      CHECK(w.sum() == doctest::Approx(1.0).epsilon(1e-8));
    }
    // The objective is never below the value at lambda = 0.
    CHECK(s.inner_objective >= -1e-12);
  }
}

TEST_CASE("warm start reaches the same optimum") {
  std::mt19937_64 rng(31);
  std::normal_distribution<double> normal;
  Eigen::MatrixXd g(30, 3);
  for (auto& v : g.reshaped()) v = normal(rng) + 0.25;
  const ELDualState cold = solve_inner_dual(g, {});
  const ELDualState warm = solve_inner_dual(g, cold.lambda + Eigen::VectorXd::Constant(3, 0.05));
  const ELDualState bad = solve_inner_dual(g, Eigen::VectorXd::Constant(3, 50.0));
  CHECK((cold.lambda - warm.lambda).cwiseAbs().maxCoeff() <= 1e-8);
  CHECK((cold.lambda - bad.lambda).cwiseAbs().maxCoeff() <= 1e-8);
}

TEST_CASE("infeasible moments are reported as non-converged") {
  Eigen::MatrixXd g(4, 1);
  g << 1.0, 2.0, 0.5, 3.0;  // zero outside the convex hull
  const ELDualState s = solve_inner_dual(g, {});
  CHECK_FALSE(s.converged);
}

TEST_CASE("non-finite input is rejected") {
  Eigen::MatrixXd g = Eigen::MatrixXd::Ones(3, 2);
  g(1, 1) = std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS_AS(solve_inner_dual(g, {}), DataError);
}

TEST_CASE("pseudo-log is C2 at the threshold and matches the reference") {
  const double eps = 0.05;
  CHECK(pseudo_log(eps * (1 - 1e-12), eps) == doctest::Approx(std::log(eps)).epsilon(1e-9));
  CHECK(pseudo_log_d1(eps * (1 - 1e-12), eps) == doctest::Approx(1.0 / eps).epsilon(1e-9));
  CHECK(pseudo_log_d2(eps * (1 - 1e-12), eps) == doctest::Approx(-1.0 / (eps * eps)).epsilon(1e-9));
  for (double z : {-3.0, -0.1, 0.0, 0.01, 0.049, 0.05, 0.2, 4.0})
    CHECK(pseudo_log(z, eps) == doctest::Approx(oracle::log_star(z, eps)).epsilon(1e-14));
}
