#include "survcbps/estimating.hpp"

#include "survcbps/errors.hpp"

#include <algorithm>
#include <cmath>

namespace survcbps {

namespace {

void check_clip(double clip) {
  if (!(clip > 0.0 && clip < 0.5)) throw Error("score clip must lie in (0, 0.5)");
}

double clipped(double raw, double clip) { return std::clamp(raw, clip, 1.0 - clip); }

}  // namespace

double logistic(double eta) noexcept {
  if (eta >= 0.0) return 1.0 / (1.0 + std::exp(-eta));
  const double e = std::exp(eta);
  return e / (1.0 + e);
}

double propensity(const PropensityParams& params, const Eigen::Ref<const Eigen::VectorXd>& x) {
  check_clip(params.clip);
  if (x.size() != params.beta.size())
    throw DataError("propensity: covariate dimension " + std::to_string(x.size()) + " does not match beta dimension " +
                    std::to_string(params.beta.size()));
  return clipped(logistic(x.dot(params.beta)), params.clip);
}

Eigen::VectorXd g_balance(const PropensityParams& params, const ObservedRecord& record) {
  const double pi = propensity(params, record.x);
  const double factor = record.d / pi - (1 - record.d) / (1.0 - pi);
  return factor * record.x;
}

std::pair<double, double> g_censor(const PropensityParams& params, const ObservedRecord& record,
                                   const CensorSurvival& k1, const CensorSurvival& k0) {
  const double pi = propensity(params, record.x);
  const double treated = record.d * record.delta / (pi * k1(record.y)) - 1.0;
  const double control = (1 - record.d) * record.delta / ((1.0 - pi) * k0(record.y)) - 1.0;
  return {treated, control};
}

Eigen::MatrixXd stack_g(const PropensityParams& params, const Dataset& data, const CensorModels& k) {
  return MomentModel(data, k, params.clip).moments(params.beta);
}

Eigen::MatrixXd jacobian_g(const PropensityParams& params, const Dataset& data, const CensorModels& k) {
  return MomentModel(data, k, params.clip).mean_jacobian(params.beta);
}

MomentModel::MomentModel(Dataset data, const CensorModels& k, double clip)
    : data_(std::move(data)), ipcw1_(data_.n()), ipcw0_(data_.n()), clip_(clip) {
  check_clip(clip_);
  for (Eigen::Index i = 0; i < data_.n(); ++i) {
    const double y = data_.y()[i];
    const int event = data_.delta()[i];
    const int d = data_.d()[i];
    ipcw1_[i] = d * event == 0 ? 0.0 : 1.0 / k.treated(y);
    ipcw0_[i] = (1 - d) * event == 0 ? 0.0 : 1.0 / k.control(y);
  }
}

Eigen::VectorXd MomentModel::scores(const Eigen::VectorXd& beta) const {
  if (beta.size() != p()) throw DataError("beta has dimension " + std::to_string(beta.size()) + ", expected " +
                                          std::to_string(p()));
  const Eigen::VectorXd eta = data_.x() * beta;
  return eta.unaryExpr([this](double e) { return clipped(logistic(e), clip_); });
}

Eigen::MatrixXd MomentModel::moments(const Eigen::VectorXd& beta) const {
  const Eigen::VectorXd pi = scores(beta);
  const auto& d = data_.d();
  Eigen::MatrixXd g(n(), m());
  Eigen::VectorXd factor(n());
  for (Eigen::Index i = 0; i < n(); ++i) {
    factor[i] = d[i] == 1 ? 1.0 / pi[i] : -1.0 / (1.0 - pi[i]);
    g(i, p()) = ipcw1_[i] / pi[i] - 1.0;
    g(i, p() + 1) = ipcw0_[i] / (1.0 - pi[i]) - 1.0;
  }
  g.leftCols(p()) = data_.x().array().colwise() * factor.array();
  return g;
}

MomentModel::Slopes MomentModel::slopes(const Eigen::VectorXd& beta) const {
  const Eigen::VectorXd eta = data_.x() * beta;
  Slopes s{Eigen::VectorXd::Zero(n()), Eigen::VectorXd::Zero(n()), Eigen::VectorXd::Zero(n())};
  for (Eigen::Index i = 0; i < n(); ++i) {
    const double raw = logistic(eta[i]);
    if (raw < clip_ || raw > 1.0 - clip_) continue;
    const double odds = raw / (1.0 - raw);
    s.balance[i] = data_.d()[i] == 1 ? 1.0 / odds : odds;
    s.treated[i] = ipcw1_[i] / odds;
    s.control[i] = ipcw0_[i] * odds;
  }
  return s;
}

Eigen::MatrixXd MomentModel::mean_jacobian(const Eigen::VectorXd& beta) const {
  const Slopes s = slopes(beta);
  const auto& x = data_.x();
  const double inv_n = 1.0 / static_cast<double>(n());
  Eigen::MatrixXd jac(m(), p());
  jac.topRows(p()) = -inv_n * (x.transpose() * (x.array().colwise() * s.balance.array()).matrix());
  jac.row(p()) = -inv_n * (x.transpose() * s.treated).transpose();
  jac.row(p() + 1) = inv_n * (x.transpose() * s.control).transpose();
  return jac;
}

Eigen::VectorXd MomentModel::weighted_jacobian_transpose(const Eigen::VectorXd& beta,
                                                         const Eigen::VectorXd& row_weights,
                                                         const Eigen::VectorXd& lambda) const {
  const Slopes s = slopes(beta);
  const auto& x = data_.x();
  const Eigen::VectorXd xl = x * lambda.head(p());
  const double l1 = lambda[p()];
  const double l0 = lambda[p() + 1];
  const Eigen::VectorXd coef =
      row_weights.array() * (-s.balance.array() * xl.array() - s.treated.array() * l1 + s.control.array() * l0);
  return x.transpose() * coef;
}

}  // namespace survcbps
