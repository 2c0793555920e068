#include "survcbps/pel.hpp"

#include "survcbps/errors.hpp"
#include "survcbps/logistic_regression.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace survcbps {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

Eigen::VectorXd column_scales(const Eigen::MatrixXd& x, bool standardize) {
  Eigen::VectorXd s = Eigen::VectorXd::Ones(x.cols());
  if (!standardize || x.rows() < 2) return s;
  for (Eigen::Index j = 0; j < x.cols(); ++j) {
    const double mean = x.col(j).mean();
    const double var = (x.col(j).array() - mean).square().sum() / static_cast<double>(x.rows() - 1);
    if (var > 1e-24) s[j] = std::sqrt(var);
  }
  return s;
}

Dataset scaled_copy(const Dataset& data, const Eigen::VectorXd& scales) {
  Eigen::MatrixXd x = data.x().array().rowwise() / scales.transpose().array();
  return data.with_covariates(std::move(x));
}

double penalty_sum(const Eigen::VectorXd& b, double tau, double a) {
  if (tau <= 0.0) return 0.0;
  const ScadParams scad{tau, a};
  double total = 0.0;
  for (Eigen::Index j = 0; j < b.size(); ++j) total += scad_value(std::abs(b[j]), scad);
  return total;
}

}  // namespace

ELDualState el_profile(const Eigen::VectorXd& beta, const MomentModel& model, const Eigen::VectorXd& lambda_warm,
                       const DualOptions& options) {
  return solve_inner_dual(model.moments(beta), lambda_warm, options);
}

Eigen::VectorXd el_profile_gradient(const Eigen::VectorXd& beta, const MomentModel& model,
                                    const ELDualState& state) {
  return model.weighted_jacobian_transpose(beta, state.log_slope, state.lambda);
}

double pel_objective(const Eigen::VectorXd& beta, const Dataset& data, const CensorModels& k,
                     const ScadParams& scad, double score_clip) {
  validate(scad);
  const MomentModel model(data, k, score_clip);
  const ELDualState state = el_profile(beta, model);
  if (!state.converged) return kInf;
  double penalty = 0.0;
  for (Eigen::Index j = 0; j < beta.size(); ++j) penalty += scad_value(std::abs(beta[j]), scad);
  return state.inner_objective + static_cast<double>(data.n()) * penalty;
}

PelSolver::PelSolver(const Dataset& data, const CensorModels& k, const PelOptions& options)
    : options_(options),
      scales_(column_scales(data.x(), options.standardize)),
      model_(scaled_copy(data, scales_), k, options.score_clip) {}

PelSolver::Evaluation PelSolver::evaluate(const Eigen::VectorXd& b, double tau,
                                          const Eigen::VectorXd& lambda_warm) const {
  Evaluation e;
  e.dual = el_profile(b, model_, lambda_warm, options_.dual);
  e.penalty = static_cast<double>(n()) * penalty_sum(b, tau, options_.scad_a);
  e.objective = e.dual.inner_objective + e.penalty;
  e.ok = e.dual.converged && std::isfinite(e.objective);
  return e;
}

Eigen::VectorXd PelSolver::initial_beta() const {
  const LogisticFit start = fit_logistic(model_.data().x(), model_.data().d(), options_.init_ridge, false);
  Eigen::VectorXd b = start.coef;
  if (!b.allFinite() || !el_profile(b, model_, {}, options_.dual).converged) b = Eigen::VectorXd::Zero(p());
  return b;
}

PELFit PelSolver::fit(double tau, const Eigen::VectorXd& start, Eigen::VectorXd* dual_warm) const {
  if (!(tau >= 0.0) || !std::isfinite(tau)) throw Error("tuning level must be finite and nonnegative");
  if (start.size() != p()) throw Error("start vector has the wrong dimension");
  const bool penalized = tau > 0.0;
  const bool threshold = penalized && options_.threshold;
  const auto nd = static_cast<double>(n());
  const ScadParams scad{penalized ? tau : 1.0, options_.scad_a};

  PELFit result;
  result.tau = tau;
  if (n() < model_.m())
    result.warnings.push_back("more moment conditions than observations; the inner problem may be ill-posed");

  auto apply_threshold = [&](Eigen::VectorXd& b) {
    if (!threshold) return;
    for (Eigen::Index j = 0; j < b.size(); ++j)
      if (std::abs(b[j]) < options_.zero_threshold) b[j] = 0.0;
  };

  Eigen::VectorXd b = start;
  apply_threshold(b);
  Evaluation current = evaluate(b, tau, dual_warm ? *dual_warm : Eigen::VectorXd());
  if (!current.ok) {
    // Retry from the origin before giving up.
    Eigen::VectorXd zero = Eigen::VectorXd::Zero(p());
    Evaluation at_zero = evaluate(zero, tau, {});
    if (!at_zero.ok) throw ConvergenceError("inner empirical-likelihood problem is infeasible at the start point");
    b = zero;
    current = std::move(at_zero);
    result.warnings.push_back("start point infeasible; restarted from zero");
  }
  result.objective_trace.push_back(current.objective);

  for (int it = 1; it <= options_.max_outer_iterations; ++it) {
    result.outer_iterations = it;

    std::vector<Eigen::Index> free;
    for (Eigen::Index j = 0; j < p(); ++j)
      if (!threshold || b[j] != 0.0) free.push_back(j);
    if (free.empty()) {
      result.converged = true;
      break;
    }

    const Eigen::MatrixXd g = model_.moments(b);
    const Eigen::VectorXd grad = el_profile_gradient(b, model_, current.dual);
    const Eigen::MatrixXd jac = model_.mean_jacobian(b);
    Eigen::MatrixXd second = (g.transpose() * g) / nd;
    second.diagonal().array() += 1e-10 * (second.trace() / static_cast<double>(model_.m()) + 1e-12);
    const Eigen::LLT<Eigen::MatrixXd> llt(second);
    const Eigen::MatrixXd whitened = llt.matrixL().solve(jac);
    const Eigen::MatrixXd hess = nd * (whitened.transpose() * whitened);

    const auto k = static_cast<Eigen::Index>(free.size());
    Eigen::MatrixXd sys(k, k);
    Eigen::VectorXd rhs(k);
    for (Eigen::Index r = 0; r < k; ++r) {
      const Eigen::Index jr = free[static_cast<std::size_t>(r)];
      rhs[r] = -grad[jr];
      for (Eigen::Index c = 0; c < k; ++c) {
        const Eigen::Index jc = free[static_cast<std::size_t>(c)];
        sys(r, c) = hess(jr, jc);
        rhs[r] += hess(jr, jc) * b[jc];
      }
      if (penalized) sys(r, r) += nd * lqa_weight(b[jr], scad, options_.lqa_eps);
    }
    sys.diagonal().array() += 1e-10 * (sys.diagonal().cwiseAbs().maxCoeff() + 1.0);
    const Eigen::VectorXd solved = sys.ldlt().solve(rhs);

    Eigen::VectorXd direction = Eigen::VectorXd::Zero(p());
    for (Eigen::Index r = 0; r < k; ++r) {
      const Eigen::Index j = free[static_cast<std::size_t>(r)];
      direction[j] = solved[r] - b[j];
    }
    if (!direction.allFinite()) {
      result.warnings.push_back("non-finite Newton direction");
      break;
    }

    bool accepted = false;
    bool any_feasible = false;
    double t = 1.0;
    Eigen::VectorXd next;
    for (int h = 0; h <= options_.max_backtracks; ++h, t *= 0.5) {
      next = b + t * direction;
      apply_threshold(next);
      Evaluation trial = evaluate(next, tau, current.dual.lambda);
      if (!trial.ok) continue;
      any_feasible = true;
      if (trial.objective <= current.objective) {
        current = std::move(trial);
        accepted = true;
        break;
      }
    }
    if (!accepted) {
      if (!any_feasible && it == 1)
        throw ConvergenceError("inner empirical-likelihood problem failed at every backtracking step");
      // No descent available along the direction: stationary to working precision
      // when the proposed move is already negligible.
      result.converged = direction.lpNorm<Eigen::Infinity>() <= std::sqrt(options_.step_tolerance);
      if (!result.converged) result.warnings.push_back("line search failed to decrease the objective");
      break;
    }
    const double moved = (next - b).lpNorm<Eigen::Infinity>();
    b = std::move(next);
    result.objective_trace.push_back(current.objective);
    if (moved <= options_.step_tolerance) {
      result.converged = true;
      break;
    }
  }
  if (!result.converged && result.warnings.empty()) result.warnings.push_back("outer iteration limit reached");

  result.dual = current.dual;
  result.el_term = current.dual.inner_objective;
  result.penalty_term = current.penalty;
  result.beta_hat = b.cwiseQuotient(scales_);
  for (Eigen::Index j = 0; j < p(); ++j)
    if (b[j] != 0.0) result.active_set.push_back(j);
  if (dual_warm) *dual_warm = current.dual.lambda;
  // The dual multiplier is invariant to column scaling of the balance block only
  // up to a rescaling; report it for the original covariates.
  result.dual.lambda.head(p()) = result.dual.lambda.head(p()).cwiseQuotient(scales_);
  return result;
}

PELFit fit_pel(const Dataset& data, const CensorModels& k, double tau, const PelOptions& options) {
  const PelSolver solver(data, k, options);
  return solver.fit(tau, solver.initial_beta());
}

std::vector<double> default_tau_grid(Eigen::Index n, Eigen::Index p, int count, double lo, double hi) {
  const double scale = std::sqrt(std::max(std::log(static_cast<double>(std::max<Eigen::Index>(p, 1))), 1.0) /
                                 static_cast<double>(n));
  std::vector<double> grid;
  grid.reserve(static_cast<std::size_t>(count));
  if (count == 1) return {lo * scale};
  for (int i = 0; i < count; ++i) {
    const double f = static_cast<double>(i) / static_cast<double>(count - 1);
    grid.push_back(scale * lo * std::pow(hi / lo, f));
  }
  return grid;
}

TauSelection select_tau(const Dataset& data, const CensorModels& k, std::vector<double> grid,
                        const PelOptions& options) {
  if (grid.empty()) throw Error("tuning grid is empty");
  for (double tau : grid)
    if (!(tau > 0.0) || !std::isfinite(tau)) throw Error("tuning grid values must be positive and finite");
  std::sort(grid.begin(), grid.end());
  grid.erase(std::unique(grid.begin(), grid.end()), grid.end());

  const PelSolver solver(data, k, options);
  const Eigen::VectorXd start = solver.initial_beta();
  const double log_n = std::log(static_cast<double>(data.n()));

  TauSelection selection;
  std::optional<std::size_t> best;
  bool best_converged = false;
  double best_bic = kInf;
  std::vector<PELFit> fits;
  Eigen::VectorXd warm;
  for (double tau : grid) {
    TauPathEntry entry;
    entry.tau = tau;
    try {
      PELFit fit = solver.fit(tau, start, &warm);
      entry.el_term = fit.el_term;
      entry.df = static_cast<Eigen::Index>(fit.active_set.size());
      entry.bic = 2.0 * fit.el_term + static_cast<double>(entry.df) * log_n;
      entry.converged = fit.converged;
      // Ascending order, so "<=" breaks ties toward the larger tau.
      const bool better = (entry.converged && !best_converged) ||
                          (entry.converged == best_converged && entry.bic <= best_bic);
      if (!best || better) {
        best = fits.size();
        best_bic = entry.bic;
        best_converged = entry.converged;
      }
      fits.push_back(std::move(fit));
    } catch (const ConvergenceError&) {
      entry.failed = true;
      fits.emplace_back();
    }
    selection.path.push_back(entry);
  }
  if (!best) throw ConvergenceError("tuning selection: every fit failed");
  selection.fit = std::move(fits[*best]);
  selection.tau = selection.fit.tau;
  return selection;
}

}  // namespace survcbps
