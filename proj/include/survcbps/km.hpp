#pragma once

#include "survcbps/dataset.hpp"

#include <vector>

namespace survcbps {

inline constexpr double kDefaultKmFloor = 0.05;

// Product-limit estimate of K_j(u) = P(C >= u | D = j), with censoring
// (delta == 0) playing the role of the event. Evaluation uses the left limit
//   K(u) = prod_{t_k < u} (1 - d_k / n_k),
// then clamps from below at `floor`.
class CensorSurvival {
 public:
  CensorSurvival(Arm group, std::vector<double> jump_times, std::vector<double> values, double floor);

  // No censoring observed: K == 1 everywhere.
  static CensorSurvival identity(Arm group, double floor = kDefaultKmFloor);

  Arm group() const noexcept { return group_; }
  const std::vector<double>& jump_times() const noexcept { return jump_times_; }
  // values()[k] is the product over jumps 0..k, i.e. K(u) for t_k < u <= t_{k+1}, before clamping.
  const std::vector<double>& values() const noexcept { return values_; }
  double floor() const noexcept { return floor_; }

  double operator()(double u) const;

 private:
  Arm group_;
  std::vector<double> jump_times_;
  std::vector<double> values_;
  double floor_;
};

// Fit within {i : D_i = group}. Ties at equal y: subjects with delta == 1 leave
// the risk set before the censoring jump at that time.
CensorSurvival fit_censoring_km(const Dataset& data, Arm group, double floor = kDefaultKmFloor);

inline double evaluate(const CensorSurvival& k, double u) { return k(u); }

// Both arms fitted on the same data; the usual input to the estimating functions.
struct CensorModels {
  CensorSurvival treated;
  CensorSurvival control;

  const CensorSurvival& operator[](Arm arm) const { return arm == Arm::treated ? treated : control; }
};

CensorModels fit_censoring_models(const Dataset& data, double floor = kDefaultKmFloor);

}  // namespace survcbps
