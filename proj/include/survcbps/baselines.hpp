#pragma once

#include "survcbps/ate.hpp"
#include "survcbps/dataset.hpp"
#include "survcbps/km.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

namespace survcbps {

enum class EstimatorKind { proposed, naive_ipw, cbps_unpenalized, aipw };

std::string_view estimator_name(EstimatorKind kind) noexcept;
std::optional<EstimatorKind> parse_estimator(std::string_view name) noexcept;

struct BaselineOptions {
  int bootstrap = 200;
  std::uint64_t seed = 42;
  double level = 0.95;
  double score_clip = kDefaultScoreClip;
  double km_floor = kDefaultKmFloor;
  double ridge = 1e-6;
};

struct BaselineSpec {
  EstimatorKind kind = EstimatorKind::naive_ipw;
  BaselineOptions options;
};

// Logistic MLE (with intercept, small ridge) plugged into the IPCW ratio means;
// bootstrap standard error with the censoring model refitted per resample.
ATEResult fit_naive_ipw(const Dataset& data, const CensorModels& k, const BaselineOptions& options = {});

// Unpenalized stacked CBPS (the tau = 0 EL fit) with the sandwich interval.
ATEResult fit_cbps_unpenalized(const Dataset& data, const CensorModels& k, const BaselineOptions& options = {});

// Augmented IPW with per-arm linear regressions of the IPCW response
// Delta Y / K_D(Y) on X, logistic MLE scores, bootstrap interval.
ATEResult fit_aipw(const Dataset& data, const CensorModels& k, const BaselineOptions& options = {});

ATEResult run_baseline(const BaselineSpec& spec, const Dataset& data, const CensorModels& k);

// Propensity scores of the naive logistic model (clipped).
Eigen::VectorXd naive_scores(const Dataset& data, const BaselineOptions& options, std::vector<std::string>* warnings = nullptr);

// IPCW response Delta_i Y_i / K_{D_i}(Y_i).
Eigen::VectorXd ipcw_response(const Dataset& data, const CensorModels& k);

// mu_t = mean[ m_t(X) + 1{D = t} (Ytilde - m_t(X)) / pi_t ] for both arms.
std::pair<double, double> aipw_means(const Dataset& data, const Eigen::VectorXd& scores,
                                     const Eigen::VectorXd& response, const Eigen::VectorXd& fitted1,
                                     const Eigen::VectorXd& fitted0);

}  // namespace survcbps
