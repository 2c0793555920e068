#pragma once

#include "survcbps/dataset.hpp"
#include "survcbps/estimating.hpp"
#include "survcbps/km.hpp"
#include "survcbps/pel.hpp"

#include <Eigen/Dense>

#include <span>
#include <string>
#include <utility>
#include <vector>

namespace survcbps {

struct ATEResult {
  double mu1 = 0.0;
  double mu0 = 0.0;
  double ate = 0.0;
  double median1 = 0.0;
  double median0 = 0.0;
  double median_diff = 0.0;
  double se = 0.0;             // total: outcome sampling plus propensity estimation
  double se_propensity = 0.0;  // delta-method term sqrt(grad_h' Sigma grad_h / n) alone
  double ci_low = 0.0;
  double ci_high = 0.0;
  double level = 0.95;
  double n_effective_1 = 0.0;
  double n_effective_0 = 0.0;
  std::vector<std::string> warnings;
};

// Ratio (Hajek) form of the censoring-adjusted IPW means:
//   mu1 = sum D Delta Y / (pi K1(Y)) / sum D Delta / (pi K1(Y)), mu0 analogously.
std::pair<double, double> ipcw_ipw_means(const Dataset& data, const PropensityParams& params, const CensorModels& k);

// Same, from precomputed scores (no clipping applied here).
std::pair<double, double> ipcw_ipw_means(const Dataset& data, const Eigen::VectorXd& scores, const CensorModels& k);

struct NormalizedWeights {
  Eigen::VectorXd treated;  // D_i / pi_i, normalized to sum 1
  Eigen::VectorXd control;  // (1 - D_i) / (1 - pi_i), normalized to sum 1
};

NormalizedWeights normalized_weights(const Dataset& data, const PropensityParams& params);

// Smallest y with sum_{y_i <= y} w_i >= 0.5 * sum w. Weights need not be
// normalized; zero weights are ignored.
double weighted_median(std::span<const double> y, std::span<const double> w);
double weighted_median(const Eigen::VectorXd& y, const Eigen::VectorXd& w);

struct SandwichResult {
  Eigen::MatrixXd sigma;        // (G' V^-1 G)^-1, estimates n Cov(beta_active)
  Eigen::MatrixXd jacobian;     // G, m x s
  Eigen::MatrixXd second_moment;  // V, m x m
  std::vector<Eigen::Index> active_set;
  bool regularized = false;     // V needed a ridge to be inverted
};

SandwichResult sandwich_covariance(const PELFit& fit, const Dataset& data, const CensorModels& k,
                                   double score_clip = kDefaultScoreClip);

struct AteOptions {
  double level = 0.95;
  double score_clip = kDefaultScoreClip;
  double fd_step = 1e-5;  // relative central-difference step for grad h
};

// Point estimate, weighted medians and a normal-theory interval. The reported
// se combines the influence of the weighted means with the delta-method term
// for the active propensity coefficients.
ATEResult ate_with_ci(const Dataset& data, const PELFit& fit, const CensorModels& k, const AteOptions& options = {});

// Gradient of h(beta_active) = mu1 - mu0 by central differences, with K fixed.
Eigen::VectorXd ate_gradient(const Dataset& data, const Eigen::VectorXd& beta, std::span<const Eigen::Index> active,
                             const CensorModels& k, double score_clip, double fd_step);

double normal_quantile(double p);

// Kish effective sample size (sum w)^2 / sum w^2.
double effective_sample_size(const Eigen::VectorXd& w);

}  // namespace survcbps
