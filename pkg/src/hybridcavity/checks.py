"""Cross-checks between independent routes to the same physical quantity.

The closed-form sideband amplitudes are compared with a direct 6x6 linear
solve and with demodulated RK4 trajectories; the analytic group delay is
compared with a central finite difference of the transmission phase.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .params import DerivedParams
from .response import a_minus_closed, fluctuation_linear_solve, group_delay_analytic, group_delay_fd
from .stability import build_drift_matrix, eigen_spectrum
from .steady_state import SteadyState
from .timedomain import demodulated_response

RESOLVENT_TOL = 1e-8
TIMEDOMAIN_TOL = 1e-3
FD_TOL = 1e-6


@dataclass(frozen=True)
class CheckResult:
    name: str
    metric: float
    threshold: float
    points: int

    @property
    def passed(self) -> bool:
        return bool(self.metric <= self.threshold)


def _rel(a, b) -> np.ndarray:
    return np.abs(np.asarray(a) - np.asarray(b)) / np.abs(np.asarray(b))


def resolvent_agreement(deltas, steady: SteadyState, dp: DerivedParams) -> CheckResult:
    """max |A-_closed - A-_solve| / |A-_solve| over ``deltas``."""
    deltas = np.asarray(deltas, dtype=float)
    closed = a_minus_closed(deltas, steady, dp)
    direct = fluctuation_linear_solve(deltas, steady, dp).A_minus / dp.eps_p
    return CheckResult("closed form vs resolvent", float(_rel(closed, direct).max()), RESOLVENT_TOL, deltas.size)


def timedomain_agreement(deltas, steady: SteadyState, dp: DerivedParams) -> CheckResult:
    """max relative A- mismatch between the closed form and demodulated RK4 runs."""
    deltas = np.asarray(deltas, dtype=float)
    errs = []
    for d in deltas:
        demod = demodulated_response(steady, dp, float(d))
        errs.append(_rel(demod.A_minus / dp.eps_p, a_minus_closed(d, steady, dp)))
    return CheckResult("closed form vs time domain", float(np.max(errs)), TIMEDOMAIN_TOL, deltas.size)


def finite_difference_agreement(deltas, steady: SteadyState, dp: DerivedParams, h: float = 1.0) -> CheckResult:
    """max relative gap between analytic and central-difference tau_g."""
    deltas = np.asarray(deltas, dtype=float)
    analytic = group_delay_analytic(deltas, steady, dp)
    fd = group_delay_fd(deltas, steady, dp, h)
    return CheckResult("analytic vs finite-difference delay", float(_rel(fd, analytic).max()), FD_TOL, deltas.size)


def trace_identity(steady: SteadyState, dp: DerivedParams) -> CheckResult:
    """|tr M - (-2 kappa_a - kappa_phi - 2 kappa_m)| relative to the expected trace."""
    M = build_drift_matrix(steady, dp).entries
    expected = -2 * dp.kappa_a - dp.kappa_phi - 2 * dp.kappa_m
    err = abs(np.trace(M) - expected) / abs(expected)
    return CheckResult("drift matrix trace", float(err), 1e-15, 1)


def eigen_residuals(steady: SteadyState, dp: DerivedParams) -> CheckResult:
    report = eigen_spectrum(build_drift_matrix(steady, dp))
    return CheckResult("eigenpair residuals / ||M||", float(report.residuals.max() / report.matrix_norm), 1e-8, 6)
