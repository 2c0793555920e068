#pragma once

#include "survcbps/ate.hpp"
#include "survcbps/dataset.hpp"
#include "survcbps/pel.hpp"

#include <json.hpp>

namespace survcbps {

// Flat document: mu1, mu0, ate, se, ci_low, ci_high, median1, median0,
// median_diff, n_effective_1, n_effective_0, warnings (plus se_propensity, level).
nlohmann::json to_json(const ATEResult& r);

nlohmann::json to_json(const DatasetSummary& s);

// Coefficients by covariate name, tuning level, active covariates and solver diagnostics.
nlohmann::json fit_diagnostics(const PELFit& fit, const Dataset& data);

}  // namespace survcbps
