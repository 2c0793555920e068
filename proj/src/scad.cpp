#include "survcbps/scad.hpp"

#include "survcbps/errors.hpp"

#include <algorithm>
#include <cmath>

namespace survcbps {

void validate(const ScadParams& params) {
  if (!(params.lambda > 0.0)) throw Error("SCAD lambda must be positive");
  if (!(params.a > 2.0)) throw Error("SCAD shape a must exceed 2");
}

double scad_derivative(double beta_abs, const ScadParams& params) {
  const double lambda = params.lambda;
  if (params.lasso || beta_abs <= lambda) return lambda;
  return std::max(params.a * lambda - beta_abs, 0.0) / (params.a - 1.0);
}

double scad_value(double beta_abs, const ScadParams& params) {
  const double lambda = params.lambda;
  const double a = params.a;
  if (params.lasso || beta_abs <= lambda) return lambda * beta_abs;
  if (beta_abs <= a * lambda)
    return -(beta_abs * beta_abs - 2.0 * a * lambda * beta_abs + lambda * lambda) / (2.0 * (a - 1.0));
  return lambda * lambda * (a + 1.0) / 2.0;
}

double lqa_weight(double beta_current, const ScadParams& params, double eps) {
  const double b = std::abs(beta_current);
  return scad_derivative(b, params) / (b + eps);
}

}  // namespace survcbps
