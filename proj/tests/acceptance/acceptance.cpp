#include "cli.hpp"
#include "fixtures.hpp"
#include "oracles.hpp"
#include "survcbps/ate.hpp"
#include "survcbps/el_dual.hpp"
#include "survcbps/estimating.hpp"
#include "survcbps/km.hpp"
#include "survcbps/pel.hpp"
#include "survcbps/scad.hpp"
#include "survcbps/sim.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

using namespace survcbps;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* format, auto... args) {
  char buffer[512];
  std::snprintf(buffer, sizeof buffer, format, args...);
  return buffer;
}

int workers() { return static_cast<int>(std::max(1u, std::thread::hardware_concurrency())); }

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t h = v.size() / 2;
  return v.size() % 2 ? v[h] : 0.5 * (v[h - 1] + v[h]);
}

// Rows are a random cloud shifted so that 0 stays strictly inside its convex hull.
Eigen::MatrixXd feasible_moments(std::mt19937_64& rng, Eigen::Index n, Eigen::Index m) {
  std::normal_distribution<double> normal;
  std::uniform_real_distribution<double> unif;
  Eigen::MatrixXd g(n, m);
  for (auto& v : g.reshaped()) v = normal(rng);
  g.rowwise() -= g.colwise().mean();
  const Eigen::RowVectorXd anchor = g.row(static_cast<Eigen::Index>(unif(rng) * static_cast<double>(n)) % n);
  g.rowwise() -= 0.6 * unif(rng) * anchor;
  return g;
}

Outcome dual_vs_brute_force() {
  std::mt19937_64 rng(20240601);
  const auto start = std::chrono::steady_clock::now();
  double worst_obj = 0.0, worst_lambda = 0.0, worst_balance = 0.0;
  int fixtures_run = 0, failures = 0;
  for (int trial = 0; trial < 120; ++trial) {
    const Eigen::Index n = 6 + trial % 15;
    const Eigen::Index m = 1 + trial % 4;
    const Eigen::MatrixXd g = feasible_moments(rng, n, m);
    const ELDualState state = solve_inner_dual(g);
    const Eigen::VectorXd brute =
        oracle::nelder_mead_max([&](const Eigen::VectorXd& l) { return oracle::dual_objective(g, l); },
                                Eigen::VectorXd::Zero(m));
    ++fixtures_run;
    if (!state.converged) {
      ++failures;
      continue;
    }
    const double obj_gap = std::abs(state.inner_objective - oracle::dual_objective(g, brute));
    const double lambda_gap = (state.lambda - brute).cwiseAbs().maxCoeff();
    const double balance = (g.transpose() * el_weights(g, state)).cwiseAbs().maxCoeff();
    worst_obj = std::max(worst_obj, obj_gap);
    worst_lambda = std::max(worst_lambda, lambda_gap);
    worst_balance = std::max(worst_balance, balance);
    if (obj_gap > 1e-6 || lambda_gap > 1e-4 || balance > 1e-6) ++failures;
  }
  const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return {failures == 0 && fixtures_run >= 100 && seconds < 10.0,
          fmt("%d fixtures, %d failures, max |dQ| %.2e, max |dlambda| %.2e, max balance %.2e, %.2f s", fixtures_run,
              failures, worst_obj, worst_lambda, worst_balance, seconds)};
}

Outcome derivative_checks() {
  std::mt19937_64 rng(20240602);
  std::normal_distribution<double> normal(0.0, 0.4);
  double worst_jac = 0.0, worst_grad = 0.0;
  int jac_cases = 0, grad_cases = 0;
  for (int trial = 0; trial < 60; ++trial) {
    const Eigen::Index p = 1 + trial % 3;
    const Dataset data = fixtures::random_dataset(rng, 40, p, Eigen::VectorXd::Constant(p, 0.3));
    const CensorModels k = fit_censoring_models(data);
    Eigen::VectorXd beta(p);
    for (auto& b : beta) b = normal(rng);

    auto mean_g = [&](const Eigen::VectorXd& b) {
      return Eigen::VectorXd(stack_g({b, 1e-6}, data, k).colwise().mean().transpose());
    };
    const Eigen::MatrixXd analytic = jacobian_g({beta, 1e-6}, data, k);
    const Eigen::MatrixXd numeric = oracle::fd_jacobian(mean_g, beta, 1e-5);
    worst_jac = std::max(worst_jac, ((analytic - numeric).array().abs() / (1.0 + analytic.array().abs())).maxCoeff());
    ++jac_cases;

    const MomentModel model(data, k, 1e-6);
    const ELDualState state = el_profile(beta, model);
    if (!state.converged) continue;
    const Eigen::VectorXd grad = el_profile_gradient(beta, model, state);
    auto profile = [&](const Eigen::VectorXd& b) {
      return Eigen::VectorXd::Constant(1, el_profile(b, model, state.lambda).inner_objective);
    };
    const Eigen::VectorXd fd = oracle::fd_jacobian(profile, beta, 1e-6).row(0).transpose();
    worst_grad = std::max(worst_grad, ((grad - fd).array().abs() / (1.0 + grad.array().abs())).maxCoeff());
    ++grad_cases;
  }
  return {worst_jac <= 1e-4 && worst_grad <= 1e-4 && grad_cases >= 30,
          fmt("jacobian: %d fixtures, max rel err %.2e; profile gradient: %d fixtures, max rel err %.2e", jac_cases,
              worst_jac, grad_cases, worst_grad)};
}

Outcome km_brute_force() {
  std::mt19937_64 rng(20240603);
  std::uniform_int_distribution<int> time(1, 4), coin(0, 1);
  double worst = 0.0;
  int fits = 0, ties = 0;
  for (int trial = 0; trial < 2000; ++trial) {
    const int n = 1 + trial % 10;
    std::vector<double> y(n);
    std::vector<int> delta(n), d(n);
    std::vector<std::vector<double>> x(n, std::vector<double>{0.0});
    for (int i = 0; i < n; ++i) {
      y[i] = trial % 2 ? time(rng) : time(rng) + 0.5 * coin(rng) + 0.1 * i;
      delta[i] = coin(rng);
      d[i] = coin(rng);
    }
    ties += std::set<double>(y.begin(), y.end()).size() < y.size();
    const Dataset data = fixtures::make(y, delta, d, x);
    for (Arm arm : {Arm::treated, Arm::control}) {
      const int want = arm == Arm::treated ? 1 : 0;
      if (std::count(d.begin(), d.end(), want) == 0) continue;
      const CensorSurvival km = fit_censoring_km(data, arm);
      std::vector<double> ya;
      std::vector<int> da;
      for (int i = 0; i < n; ++i)
        if (d[i] == want) ya.push_back(y[i]), da.push_back(delta[i]);
      std::vector<double> points{0.0, 100.0};
      for (double t : y) points.insert(points.end(), {t, t - 0.05, t + 0.05});
      for (double u : points) {
        const double expected = std::max(oracle::km_censoring(ya, da, u), km.floor());
        worst = std::max(worst, std::abs(km(u) - expected));
      }
      ++fits;
    }
  }
  return {worst <= 1e-12 && ties > 0, fmt("%d arm fits (%d fixtures with ties), max |err| %.2e", fits, ties, worst)};
}

Outcome zero_censoring_reduction() {
  std::mt19937_64 rng(20240604);
  std::normal_distribution<double> normal(0.0, 0.7);
  double worst = 0.0;
  for (int trial = 0; trial < 200; ++trial) {
    const Eigen::Index p = 1 + trial % 4;
    const Dataset data = fixtures::random_dataset(rng, 30 + trial, p, Eigen::VectorXd::Constant(p, 0.5), 0.0);
    Eigen::VectorXd beta(p);
    for (auto& b : beta) b = normal(rng);
    const double clip = 0.01;
    std::vector<double> y(data.n()), pi(data.n());
    std::vector<int> d(data.n());
    for (Eigen::Index i = 0; i < data.n(); ++i) {
      y[i] = data.y()[i];
      d[i] = data.d()[i];
      pi[i] = std::clamp(oracle::logistic(data.x().row(i).dot(beta)), clip, 1.0 - clip);
    }
    const auto [mu1, mu0] = ipcw_ipw_means(data, PropensityParams{beta, clip}, fit_censoring_models(data));
    const auto [h1, h0] = oracle::hajek(y, d, pi);
    worst = std::max({worst, std::abs(mu1 - h1), std::abs(mu0 - h0)});
  }
  return {worst <= 1e-12, fmt("200 fixtures, max |err| %.2e", worst)};
}

Outcome scad_checks() {
  double worst_closed = 0.0, worst_fd = 0.0;
  for (double lambda : {0.05, 0.3, 1.0, 2.0}) {
    const ScadParams params{lambda, 3.7};
    for (int i = 0; i < 1000; ++i) {
      const double t = 5.0 * lambda * i / 999.0;
      worst_closed = std::max(worst_closed, std::abs(scad_derivative(t, params) - oracle::scad_derivative(t, lambda, 3.7)));
      const double h = 1e-6 * std::max(lambda, 1.0);
      if (t < 2 * h || std::abs(t - lambda) < 2 * h || std::abs(t - 3.7 * lambda) < 2 * h) continue;
      const double fd = (scad_value(t + h, params) - scad_value(t - h, params)) / (2.0 * h);
      worst_fd = std::max(worst_fd, std::abs(fd - scad_derivative(t, params)));
    }
  }
  return {worst_closed <= 1e-12 && worst_fd <= 1e-6,
          fmt("closed form max |err| %.2e, numerical derivative max |err| %.2e", worst_closed, worst_fd)};
}

SimConfig proposed_only(Eigen::Index n, Eigen::Index p, int nonzero, int reps) {
  SimConfig c;
  c.n = n;
  c.p = p;
  c.beta_nonzero = nonzero;
  c.replications = reps;
  c.estimators = {EstimatorKind::proposed};
  c.bootstrap = 2;
  return c;
}

Outcome sparsity() {
  const SimConfig c = proposed_only(1000, 50, 10, 50);
  const SimReport report = run_study(c, workers());
  const Eigen::VectorXd beta = c.beta();
  int zero_pairs = 0, zero_hits = 0, support_pairs = 0, sign_hits = 0, failed = 0;
  for (const auto& rep : report.replications) {
    const EstimateRecord& e = rep.estimates.front().second;
    if (!e.ok) ++failed;
    for (Eigen::Index j = 0; j < c.p; ++j) {
      const double b = e.ok ? e.beta_hat[static_cast<std::size_t>(j)] : std::nan("");
      if (beta[j] == 0.0) {
        ++zero_pairs;
        zero_hits += b == 0.0;
      } else {
        ++support_pairs;
        sign_hits += (b > 0.0 && beta[j] > 0.0) || (b < 0.0 && beta[j] < 0.0);
      }
    }
  }
  const double zero_rate = 100.0 * zero_hits / zero_pairs;
  const double sign_rate = 100.0 * sign_hits / support_pairs;
  return {zero_rate >= 90.0 && sign_rate >= 80.0,
          fmt("exact zeros %.1f%%, sign agreement %.1f%%, %d failed fits", zero_rate, sign_rate, failed)};
}

std::vector<double> estimation_errors(Eigen::Index n) {
  const SimConfig c = proposed_only(n, 10, 3, 50);
  const SimReport report = run_study(c, workers());
  const Eigen::VectorXd beta = c.beta();
  std::vector<double> errors;
  for (const auto& rep : report.replications) {
    const EstimateRecord& e = rep.estimates.front().second;
    if (!e.ok) {
      errors.push_back(std::numeric_limits<double>::infinity());
      continue;
    }
    errors.push_back((Eigen::Map<const Eigen::VectorXd>(e.beta_hat.data(), c.p) - beta).norm());
  }
  return errors;
}

Outcome consistency_trend() {
  const double small = median(estimation_errors(250));
  const double large = median(estimation_errors(1000));
  return {large <= 0.85 * small, fmt("median error %.4f at n=250, %.4f at n=1000, ratio %.3f", small, large, large / small)};
}

const EstimatorRow& row_of(const SimReport& report, EstimatorKind kind) {
  return *std::find_if(report.rows.begin(), report.rows.end(), [&](const EstimatorRow& r) { return r.kind == kind; });
}

Outcome benchmark_table() {
  const SimConfig c = load_sim_config(fs::path(SURVCBPS_SOURCE_DIR) / "configs" / "benchmark.conf");
  const auto start = std::chrono::steady_clock::now();
  const SimReport report = run_study(c, workers());
  const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  const EstimatorRow& prop = row_of(report, EstimatorKind::proposed);
  const EstimatorRow& ipw = row_of(report, EstimatorKind::naive_ipw);
  const bool pass = c.n == 300 && c.p == 20 && c.replications == 100 && prop.coverage_pct >= 88.0 &&
                    prop.coverage_pct <= 99.0 && prop.rmse < ipw.rmse && std::abs(prop.bias) <= std::abs(ipw.bias) &&
                    seconds < 1200.0;
  return {pass, fmt("proposed bias %.4f rmse %.4f coverage %.1f%%; IPW bias %.4f rmse %.4f; %.0f s", prop.bias,
                    prop.rmse, prop.coverage_pct, ipw.bias, ipw.rmse, seconds)};
}

Outcome se_calibration() {
  const SimConfig c = proposed_only(500, 10, 3, 200);
  const SimReport report = run_study(c, workers());
  const EstimatorRow& prop = row_of(report, EstimatorKind::proposed);
  const double ratio = prop.mean_se / prop.sd_estimate;
  return {std::abs(ratio - 1.0) <= 0.3,
          fmt("mean SE %.4f, SD of estimates %.4f, ratio %.3f, %d failed fits", prop.mean_se, prop.sd_estimate, ratio,
              prop.n_fail)};
}

Outcome determinism() {
  const fs::path dir = fs::temp_directory_path() / "survcbps_acceptance_determinism";
  fs::remove_all(dir);
  fs::create_directories(dir);
  std::ofstream(dir / "study.conf") << "n = 200\np = 10\nbeta_nonzero = 3\nreplications = 12\nbootstrap = 40\n";
  std::string csv[2];
  int codes[2];
  const char* counts[2] = {"1", "8"};
  for (int i = 0; i < 2; ++i) {
    std::ostringstream out, err;
    const fs::path target = dir / (std::string("w") + counts[i]);
    codes[i] = cli::run({"survcbps", "simulate", "--config", (dir / "study.conf").string(), "--workers", counts[i],
                         "--out-dir", target.string()},
                        out, err);
    std::ifstream in(target / "report.csv", std::ios::binary);
    csv[i].assign(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
  }
  return {codes[0] == 0 && codes[1] == 0 && !csv[0].empty() && csv[0] == csv[1],
          fmt("exit codes %d/%d, CSV sizes %zu/%zu bytes, identical: %s", codes[0], codes[1], csv[0].size(),
              csv[1].size(), csv[0] == csv[1] ? "yes" : "no")};
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria{
      {"inner dual vs brute-force maximizer", dual_vs_brute_force},
      {"jacobian and profile gradient vs finite differences", derivative_checks},
      {"Kaplan-Meier vs brute-force product limit", km_brute_force},
      {"zero censoring reduces to Hajek IPW", zero_censoring_reduction},
      {"SCAD derivative and value", scad_checks},
      {"sparsity at n=1000, p=50", sparsity},
      {"consistency trend n=250 to n=1000", consistency_trend},
      {"benchmark study ordering and coverage", benchmark_table},
      {"standard error calibration", se_calibration},
      {"determinism across worker counts", determinism},
  };
  std::set<int> only;
  for (int i = 1; i < argc; ++i) only.insert(std::atoi(argv[i]));
  int failures = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const int id = static_cast<int>(i) + 1;
    if (!only.empty() && !only.count(id)) continue;
    const auto start = std::chrono::steady_clock::now();
    Outcome outcome;
    try {
      outcome = criteria[i].second();
    } catch (const std::exception& e) {
      outcome = {false, std::string("exception: ") + e.what()};
    }
    const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    failures += !outcome.pass;
    std::cout << "criterion " << id << ": " << (outcome.pass ? "PASS" : "FAIL") << " | " << criteria[i].first << " | "
              << outcome.detail << " | " << fmt("%.1f s", seconds) << std::endl;
  }
  return failures == 0 ? 0 : 1;
}
