"""Spectral Kolmogorov solver, Zvonkin transform and Monte Carlo studies for
SDEs whose drift is a distribution."""

import json

from . import _core
from ._core import (
    Error,
    TimeField,
    gamma_bound_check,
    gamma_integral,
    gradient_sup,
    ks_stat,
    to_backward,
    value_sup,
    wasserstein1,
)

__all__ = [
    "Error",
    "TimeField",
    "assumption_check",
    "calibrate",
    "gamma_bound_check",
    "gamma_integral",
    "generate_drift",
    "gradient_sup",
    "kendall_trend",
    "ks_stat",
    "run_study",
    "simulate_classical",
    "simulate_virtual",
    "solve_pde",
    "to_backward",
    "value_sup",
    "wasserstein1",
]


def _dump(obj):
    return "" if obj is None else json.dumps(obj)


def generate_drift(spec, dim=1, modes=256, steps=128, horizon=1.0):
    """Drift field from a spec dict (family, seed, beta, decay, amplitude, ...)."""
    return _core.generate_drift(_dump(spec), dim, modes, steps, horizon)


def assumption_check(b, beta, q):
    return json.loads(_core.assumption_check(b, beta, q))


def solve_pde(b, lam, config=None):
    """Forward solution v and the solver report."""
    v, report = _core.solve_pde(b, lam, _dump(config))
    return v, json.loads(report)


def calibrate(b, config=None, target=0.5):
    """(lambda, [(lambda, gradient_sup), ...], v) for the first lambda meeting target."""
    return _core.calibrate(b, _dump(config), target)


def simulate_virtual(u, sim):
    """Paths of shape (paths, steps + 1, dim); u is the backward solution."""
    return _core.simulate_virtual(u, _dump(sim))


def simulate_classical(b, sim):
    return _core.simulate_classical(b, _dump(sim))


def kendall_trend(y):
    tau, p, exact = _core.kendall_trend(list(y))
    return {"tau": tau, "p_decreasing": p, "exact": exact}


def run_study(kind, config, out_root=""):
    """kind is mollify, lambda, consistency or diagnostics."""
    return json.loads(_core.run_study(kind, _dump(config), str(out_root)))
