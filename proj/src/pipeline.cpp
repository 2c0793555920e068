#include "survcbps/pipeline.hpp"

#include "survcbps/errors.hpp"

namespace survcbps {

ProposedFit fit_proposed(const Dataset& data, const CensorModels& k, const ProposedOptions& options,
                         ProposedFit* partial) {
  data.require_estimable();
  ProposedOptions opts = options;
  opts.pel.score_clip = options.ate.score_clip;

  ProposedFit out;
  if (opts.tau) {
    if (!(*opts.tau > 0.0)) throw Error("tau must be positive");
    out.fit = fit_pel(data, k, *opts.tau, opts.pel);
    out.path.push_back(TauPathEntry{*opts.tau, 0.0, out.fit.el_term,
                                    static_cast<Eigen::Index>(out.fit.active_set.size()), out.fit.converged, false});
  } else {
    std::vector<double> grid = opts.grid.empty() ? default_tau_grid(data.n(), data.p()) : opts.grid;
    TauSelection sel = select_tau(data, k, std::move(grid), opts.pel);
    out.fit = std::move(sel.fit);
    out.path = std::move(sel.path);
  }
  if (partial) *partial = out;
  out.result = ate_with_ci(data, out.fit, k, opts.ate);
  out.result.warnings.insert(out.result.warnings.end(), out.fit.warnings.begin(), out.fit.warnings.end());
  return out;
}

}  // namespace survcbps
