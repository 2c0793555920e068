#pragma once

#include "survcbps/ate.hpp"
#include "survcbps/dataset.hpp"
#include "survcbps/km.hpp"
#include "survcbps/pel.hpp"

#include <optional>
#include <vector>

namespace survcbps {

struct ProposedOptions {
  PelOptions pel;
  std::optional<double> tau;  // fixed tuning level; otherwise select over `grid`
  std::vector<double> grid;   // empty: default_tau_grid(n, p)
  AteOptions ate;
};

struct ProposedFit {
  PELFit fit;
  std::vector<TauPathEntry> path;
  ATEResult result;
};

// Penalized EL propensity fit (fixed or BIC-selected tau) followed by the
// censoring-adjusted IPW estimate with its interval. Throws ConvergenceError
// when the selected fit did not converge; `partial`, when given, receives the
// fit so that callers can still report diagnostics.
ProposedFit fit_proposed(const Dataset& data, const CensorModels& k, const ProposedOptions& options = {},
                         ProposedFit* partial = nullptr);

}  // namespace survcbps
