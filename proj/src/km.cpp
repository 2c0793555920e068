#include "survcbps/km.hpp"

#include "survcbps/errors.hpp"

#include <algorithm>
#include <numeric>

namespace survcbps {

CensorSurvival::CensorSurvival(Arm group, std::vector<double> jump_times, std::vector<double> values,
                               double floor)
    : group_(group), jump_times_(std::move(jump_times)), values_(std::move(values)), floor_(floor) {
  if (jump_times_.size() != values_.size()) throw Error("censoring survival: size mismatch");
  if (!(floor_ > 0.0 && floor_ <= 1.0)) throw Error("censoring survival: floor must lie in (0, 1]");
}

CensorSurvival CensorSurvival::identity(Arm group, double floor) { return CensorSurvival(group, {}, {}, floor); }

double CensorSurvival::operator()(double u) const {
  // Number of jumps strictly before u.
  const auto k = std::lower_bound(jump_times_.begin(), jump_times_.end(), u) - jump_times_.begin();
  const double v = k == 0 ? 1.0 : values_[static_cast<std::size_t>(k - 1)];
  return std::max(v, floor_);
}

CensorSurvival fit_censoring_km(const Dataset& data, Arm group, double floor) {
  std::vector<Eigen::Index> rows;
  for (Eigen::Index i = 0; i < data.n(); ++i)
    if (data.d()[i] == arm_value(group)) rows.push_back(i);
  if (rows.empty()) throw DegenerateError("censoring model: arm " + std::to_string(arm_value(group)) + " is empty");

  const auto& y = data.y();
  const auto& delta = data.delta();
  std::sort(rows.begin(), rows.end(), [&](Eigen::Index a, Eigen::Index b) { return y[a] < y[b]; });

  std::vector<double> times, values;
  double surv = 1.0;
  std::size_t at_risk = rows.size();
  std::size_t k = 0;
  while (k < rows.size()) {
    const double t = y[rows[k]];
    std::size_t censor_events = 0, failures = 0;
    std::size_t j = k;
    for (; j < rows.size() && y[rows[j]] == t; ++j) (delta[rows[j]] == 0 ? censor_events : failures)++;
    // Failures at t precede the censoring jump at t.
    const std::size_t risk = at_risk - failures;
    if (censor_events > 0) {
      surv *= 1.0 - static_cast<double>(censor_events) / static_cast<double>(risk);
      times.push_back(t);
      values.push_back(surv);
    }
    at_risk -= j - k;
    k = j;
  }
  return CensorSurvival(group, std::move(times), std::move(values), floor);
}

CensorModels fit_censoring_models(const Dataset& data, double floor) {
  return CensorModels{fit_censoring_km(data, Arm::treated, floor), fit_censoring_km(data, Arm::control, floor)};
}

}  // namespace survcbps
