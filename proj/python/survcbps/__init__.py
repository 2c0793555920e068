"""Survival treatment effects with penalized empirical-likelihood CBPS."""

try:
    from . import _survcbps as _core
except ImportError:
    import _survcbps as _core

Arm = _core.Arm
CensorModels = _core.CensorModels
CensorSurvival = _core.CensorSurvival
ConvergenceError = _core.ConvergenceError
DataError = _core.DataError
Dataset = _core.Dataset
DegenerateError = _core.DegenerateError
Error = _core.Error

default_tau_grid = _core.default_tau_grid
fit = _core.fit
fit_baseline = _core.fit_baseline
fit_censoring_km = _core.fit_censoring_km
fit_censoring_models = _core.fit_censoring_models
generate_dataset = _core.generate_dataset
jacobian_g = _core.jacobian_g
read_csv = _core.read_csv
render_report = _core.render_report
scad_derivative = _core.scad_derivative
scad_value = _core.scad_value
simulate = _core.simulate
solve_inner_dual = _core.solve_inner_dual
stack_g = _core.stack_g
write_csv = _core.write_csv

__all__ = [name for name in dir() if not name.startswith("_")]
