#pragma once

#include "survcbps/baselines.hpp"
#include "survcbps/dataset.hpp"

#include <Eigen/Dense>
#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace survcbps {

enum class CovarianceKind { identity, ar };

struct SimConfig {
  Eigen::Index n = 1000;
  Eigen::Index p = 50;
  CovarianceKind covariance = CovarianceKind::identity;
  double ar_rho = 0.5;
  // Nonzero treatment coefficients on the leading coordinates, alternating sign.
  int beta_nonzero = 10;
  double beta_magnitude = 0.4;
  // Outcome heterogeneity coefficients on the leading coordinates.
  int gamma_nonzero = 5;
  double gamma_magnitude = 0.2;
  double lambda0 = 2.0;  // Weibull scale
  double shape = 1.5;    // Weibull shape
  double censor_rate_target = 0.3;
  int replications = 100;
  std::uint64_t seed = 42;
  std::vector<EstimatorKind> estimators{EstimatorKind::proposed, EstimatorKind::naive_ipw,
                                        EstimatorKind::cbps_unpenalized, EstimatorKind::aipw};
  int bootstrap = 200;
  double level = 0.95;
  bool record_timing = false;

  void validate() const;
  Eigen::VectorXd beta() const;
  Eigen::VectorXd gamma() const;
  Eigen::MatrixXd covariance_matrix() const;
};

// Flat "key = value" format with '#' comments.
SimConfig parse_sim_config(std::istream& in);
SimConfig load_sim_config(const std::filesystem::path& path);
void apply_config_entry(SimConfig& config, const std::string& key, const std::string& value);

nlohmann::json to_json(const SimConfig& config);
SimConfig sim_config_from_json(const nlohmann::json& j);

struct SimTruth {
  Eigen::VectorXd t0;          // potential time under control
  Eigen::VectorXd t1;          // potential time under treatment
  Eigen::VectorXd censor;      // censoring time (+inf without censoring)
  Eigen::VectorXd propensity;  // true P(D = 1 | X)
};

struct GeneratedData {
  Dataset data;
  SimTruth truth;
};

// Exponential censoring rate whose expected censored fraction on a 1e5-draw
// pilot equals config.censor_rate_target (bisection).
double calibrate_censoring_rate(const SimConfig& config, int pilot_draws = 100000);

GeneratedData generate_dataset(const SimConfig& config, std::uint64_t rep_seed);
GeneratedData generate_dataset(const SimConfig& config, std::uint64_t rep_seed, double censoring_rate);

struct TrueAte {
  double ate = 0.0;
  double se = 0.0;
  double mean1 = 0.0;
  double mean0 = 0.0;
};

// Monte Carlo over X of E[T1 - T0 | X] = lambda0 Gamma(1 + 1/k) (exp(X'gamma) - 1).
TrueAte true_ate(const SimConfig& config, int draws = 1000000);

struct EstimateRecord {
  bool ok = false;
  double ate = 0.0;
  double se = 0.0;
  double ci_low = 0.0;
  double ci_high = 0.0;
  double runtime_ms = 0.0;
  std::string error;
  // Proposed method only.
  std::optional<double> tau;
  std::vector<double> beta_hat;
  std::vector<Eigen::Index> active_set;
};

struct ReplicationRecord {
  int rep = 0;
  double censoring_fraction = 0.0;
  std::vector<std::pair<EstimatorKind, EstimateRecord>> estimates;
};

struct EstimatorRow {
  EstimatorKind kind = EstimatorKind::proposed;
  double bias = 0.0;
  double rmse = 0.0;
  double coverage_pct = 0.0;
  double mean_se = 0.0;
  double sd_estimate = 0.0;
  int n_ok = 0;
  int n_fail = 0;
  double mean_runtime_ms = 0.0;
};

struct SimReport {
  SimConfig config;
  double true_ate = 0.0;
  double true_ate_se = 0.0;
  double censoring_rate_parameter = 0.0;
  std::vector<EstimatorRow> rows;  // canonical estimator order
  std::vector<ReplicationRecord> replications;
  bool excessive_failures = false;  // some estimator failed in more than 5% of replications
};

inline constexpr int kReportSchemaVersion = 1;

std::uint64_t replication_seed(std::uint64_t seed, int rep) noexcept;

// One replication: generate, then fit every requested estimator.
ReplicationRecord run_replication(const SimConfig& config, int rep, double censoring_rate);

SimReport run_study(const SimConfig& config, int workers = 1);

std::vector<EstimatorRow> aggregate(const std::vector<ReplicationRecord>& reps, std::vector<EstimatorKind> kinds,
                                    double truth, bool record_timing);

void write_report_csv(const SimReport& report, std::ostream& out);
nlohmann::json report_to_json(const SimReport& report);

// Renders the per-estimator summary table from a JSON dump; throws DataError on an
// unsupported schema version or an empty replication list.
std::string render_report(const nlohmann::json& dump);

std::string display_name(EstimatorKind kind);

}  // namespace survcbps
