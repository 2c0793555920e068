#pragma once

#include "survcbps/dataset.hpp"
#include "survcbps/km.hpp"

#include <Eigen/Dense>

#include <random>
#include <vector>

namespace fixtures {

inline survcbps::Dataset make(std::vector<double> y, std::vector<int> delta, std::vector<int> d,
                              const std::vector<std::vector<double>>& x) {
  const auto n = static_cast<Eigen::Index>(y.size());
  const auto p = x.empty() ? Eigen::Index{0} : static_cast<Eigen::Index>(x.front().size());
  Eigen::MatrixXd xm(n, p);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < p; ++j) xm(i, j) = x[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
  return survcbps::Dataset(Eigen::Map<Eigen::VectorXd>(y.data(), n), Eigen::Map<Eigen::VectorXi>(delta.data(), n),
                           Eigen::Map<Eigen::VectorXi>(d.data(), n), xm);
}

// Small random dataset with logistic treatment, Weibull-like times and
// independent censoring; each arm is guaranteed an observed event.
inline survcbps::Dataset random_dataset(std::mt19937_64& rng, Eigen::Index n, Eigen::Index p,
                                        const Eigen::VectorXd& beta, double censor_rate = 0.3) {
  std::normal_distribution<double> normal;
  std::exponential_distribution<double> expo(1.0);
  std::uniform_real_distribution<double> unif;
  for (;;) {
    Eigen::MatrixXd x(n, p);
    Eigen::VectorXd y(n);
    Eigen::VectorXi delta(n), d(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      for (Eigen::Index j = 0; j < p; ++j) x(i, j) = normal(rng);
      const double eta = beta.size() ? x.row(i).dot(beta) : 0.0;
      d[i] = unif(rng) < 1.0 / (1.0 + std::exp(-eta)) ? 1 : 0;
      const double t = 2.0 * std::pow(expo(rng), 1.0 / 1.5) * (d[i] ? 1.2 : 1.0);
      const double c = censor_rate > 0.0 ? expo(rng) / censor_rate : 1e300;
      y[i] = std::min(t, c);
      delta[i] = t <= c ? 1 : 0;
    }
    survcbps::Dataset data(y, delta, d, x);
    if (data.arm_events(survcbps::Arm::treated) > 0 && data.arm_events(survcbps::Arm::control) > 0 &&
        data.arm_size(survcbps::Arm::treated) >= 2 && data.arm_size(survcbps::Arm::control) >= 2)
      return data;
  }
}

}  // namespace fixtures
