#pragma once

namespace survcbps {

inline constexpr double kDefaultScadShape = 3.7;
inline constexpr double kDefaultLqaEps = 1e-6;

struct ScadParams {
  double lambda = 0.1;  // tuning level
  double a = kDefaultScadShape;
  bool lasso = false;   // debugging mode: derivative is lambda everywhere
};

void validate(const ScadParams& params);

// p'(|b|) = lambda * ( 1{|b| <= lambda} + (a lambda - |b|)_+ / ((a - 1) lambda) 1{|b| > lambda} )
double scad_derivative(double beta_abs, const ScadParams& params);

// Antiderivative of scad_derivative with p(0) = 0.
double scad_value(double beta_abs, const ScadParams& params);

// Local quadratic approximation coefficient p'(|b|) / (|b| + eps).
double lqa_weight(double beta_current, const ScadParams& params, double eps = kDefaultLqaEps);

}  // namespace survcbps
