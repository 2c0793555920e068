#pragma once

#include "survcbps/dataset.hpp"
#include "survcbps/km.hpp"

#include <Eigen/Dense>

#include <utility>

namespace survcbps {

inline constexpr double kDefaultScoreClip = 0.01;

// Logistic propensity model pi(x) = logistic(x'beta), truncated to [clip, 1 - clip].
// No intercept is added; supply a constant covariate column if one is wanted.
struct PropensityParams {
  Eigen::VectorXd beta;
  double clip = kDefaultScoreClip;
};

// Overflow-free logistic function.
double logistic(double eta) noexcept;

double propensity(const PropensityParams& params, const Eigen::Ref<const Eigen::VectorXd>& x);

// Balance part, (D/pi - (1 - D)/(1 - pi)) x.
Eigen::VectorXd g_balance(const PropensityParams& params, const ObservedRecord& record);

// Censoring calibration parts,
//   (D Delta / (pi K1(Y)) - 1,  (1 - D) Delta / ((1 - pi) K0(Y)) - 1).
std::pair<double, double> g_censor(const PropensityParams& params, const ObservedRecord& record,
                                   const CensorSurvival& k1, const CensorSurvival& k0);

// n x (p + 2) matrix whose row i is (g_balance_i, g_censor_i).
Eigen::MatrixXd stack_g(const PropensityParams& params, const Dataset& data, const CensorModels& k);

// (p + 2) x p derivative of the column means of stack_g with respect to beta.
// Rows whose score sits on a clip boundary contribute nothing.
Eigen::MatrixXd jacobian_g(const PropensityParams& params, const Dataset& data, const CensorModels& k);

// Batch evaluator used by the solvers. Holds a copy of the data together with
// the IPCW factors Delta_i / K_{D_i}(Y_i), which do not depend on beta.
class MomentModel {
 public:
  MomentModel(Dataset data, const CensorModels& k, double clip = kDefaultScoreClip);

  Eigen::Index n() const noexcept { return data_.n(); }
  Eigen::Index p() const noexcept { return data_.p(); }
  Eigen::Index m() const noexcept { return data_.p() + 2; }
  double clip() const noexcept { return clip_; }
  const Dataset& data() const noexcept { return data_; }

  // D_i Delta_i / K1(Y_i) and (1 - D_i) Delta_i / K0(Y_i).
  const Eigen::VectorXd& ipcw_treated() const noexcept { return ipcw1_; }
  const Eigen::VectorXd& ipcw_control() const noexcept { return ipcw0_; }

  Eigen::VectorXd scores(const Eigen::VectorXd& beta) const;
  Eigen::MatrixXd moments(const Eigen::VectorXd& beta) const;
  Eigen::MatrixXd mean_jacobian(const Eigen::VectorXd& beta) const;

  // sum_i w_i J_i' v_i, where J_i = dg_i/dbeta and v_i = lambda for every row.
  // This is the envelope gradient of sum_i log(1 + lambda' g_i) when w_i is
  // the derivative of the log at 1 + lambda' g_i.
  Eigen::VectorXd weighted_jacobian_transpose(const Eigen::VectorXd& beta, const Eigen::VectorXd& row_weights,
                                              const Eigen::VectorXd& lambda) const;

 private:
  struct Slopes {
    Eigen::VectorXd balance;   // s_i: d balance_i / d beta = -s_i x_i x_i'
    Eigen::VectorXd treated;   // t1_i: d cal1_i / d beta = -t1_i x_i'
    Eigen::VectorXd control;   // t0_i: d cal0_i / d beta = +t0_i x_i'
  };
  Slopes slopes(const Eigen::VectorXd& beta) const;

  Dataset data_;
  Eigen::VectorXd ipcw1_;
  Eigen::VectorXd ipcw0_;
  double clip_;
};

}  // namespace survcbps
