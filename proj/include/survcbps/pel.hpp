#pragma once

#include "survcbps/dataset.hpp"
#include "survcbps/el_dual.hpp"
#include "survcbps/estimating.hpp"
#include "survcbps/km.hpp"
#include "survcbps/scad.hpp"

#include <Eigen/Dense>

#include <optional>
#include <string>
#include <vector>

namespace survcbps {

struct PelOptions {
  double score_clip = kDefaultScoreClip;
  double scad_a = kDefaultScadShape;
  double lqa_eps = kDefaultLqaEps;
  // Coefficients below this magnitude (on the standardized scale) are set to 0.
  double zero_threshold = 1e-4;
  bool threshold = true;
  double step_tolerance = 1e-6;
  int max_outer_iterations = 200;
  int max_backtracks = 30;
  bool standardize = true;
  double init_ridge = 1e-4;
  DualOptions dual;
};

struct PELFit {
  Eigen::VectorXd beta_hat;          // original covariate scale
  std::vector<Eigen::Index> active_set;
  double tau = 0.0;
  ELDualState dual;                  // at beta_hat
  int outer_iterations = 0;
  std::vector<double> objective_trace;  // accepted steps, standardized-scale objective
  bool converged = false;
  double el_term = 0.0;              // sum_i log*(1 + lambda' g_i) at beta_hat
  double penalty_term = 0.0;         // n sum_j p_tau(|b_j|) on the standardized scale
  std::vector<std::string> warnings;
};

// Q(beta) = sum_i log*(1 + lambda*' g_i(beta)) + n sum_j p_tau(|beta_j|), with
// lambda* the inner maximizer. The penalty is applied to beta as given
// (original covariate scale). A non-converged inner problem yields +infinity.
double pel_objective(const Eigen::VectorXd& beta, const Dataset& data, const CensorModels& k,
                     const ScadParams& scad, double score_clip = kDefaultScoreClip);

// Inner EL term only, returning the dual state for inspection.
ELDualState el_profile(const Eigen::VectorXd& beta, const MomentModel& model,
                       const Eigen::VectorXd& lambda_warm = {}, const DualOptions& options = {});

// Envelope gradient of the EL term: sum_i J_i' lambda* / (1 + lambda*' g_i).
Eigen::VectorXd el_profile_gradient(const Eigen::VectorXd& beta, const MomentModel& model,
                                    const ELDualState& state);

// Penalized EL fit at a single tuning level. tau == 0 fits the unpenalized
// stacked CBPS problem (thresholding is then disabled as well).
PELFit fit_pel(const Dataset& data, const CensorModels& k, double tau, const PelOptions& options = {});

// Lower-level entry point with an explicit start (standardized scale when
// options.standardize is set) and dual warm start; used by select_tau.
class PelSolver {
 public:
  PelSolver(const Dataset& data, const CensorModels& k, const PelOptions& options = {});

  Eigen::Index n() const noexcept { return model_.n(); }
  Eigen::Index p() const noexcept { return model_.p(); }
  const MomentModel& model() const noexcept { return model_; }  // standardized covariates
  const Eigen::VectorXd& scales() const noexcept { return scales_; }

  // Ridge-logistic start (no intercept) on the standardized scale, falling back
  // to zero when the EL problem is infeasible there.
  Eigen::VectorXd initial_beta() const;

  PELFit fit(double tau, const Eigen::VectorXd& start, Eigen::VectorXd* dual_warm = nullptr) const;

 private:
  struct Evaluation {
    ELDualState dual;
    double penalty = 0.0;
    double objective = 0.0;
    bool ok = false;
  };
  Evaluation evaluate(const Eigen::VectorXd& b, double tau, const Eigen::VectorXd& lambda_warm) const;

  PelOptions options_;
  Eigen::VectorXd scales_;
  MomentModel model_;
};

// Default grid: `count` log-spaced values in [lo, hi] * sqrt(max(log p, 1) / n).
std::vector<double> default_tau_grid(Eigen::Index n, Eigen::Index p, int count = 20, double lo = 0.01,
                                     double hi = 2.0);

struct TauPathEntry {
  double tau = 0.0;
  double bic = 0.0;
  double el_term = 0.0;
  Eigen::Index df = 0;
  bool converged = false;
  bool failed = false;
};

struct TauSelection {
  double tau = 0.0;
  PELFit fit;
  std::vector<TauPathEntry> path;  // ascending tau
};

// Fits each tau and minimizes 2 * el_term + |active_set| * log n; ties go to
// the larger tau. Converged fits are preferred over non-converged ones.
TauSelection select_tau(const Dataset& data, const CensorModels& k, std::vector<double> grid,
                        const PelOptions& options = {});

}  // namespace survcbps
