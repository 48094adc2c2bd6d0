"""Linearised drift matrix and Lyapunov stability of the steady state.

Fluctuations are ordered u = [da, da*, dL_z, dphi, dm, dm*] and obey
du/dt = M u.  The steady state is asymptotically stable iff every eigenvalue
of M has a strictly negative real part.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import BistableWarning, EigenFailure
from .params import DerivedParams, PhysicalConfig, derive_params
from .steady_state import SteadyState, all_steady_states

RESIDUAL_TOL = 1e-8
# swaps (da, da*) and (dm, dm*), fixes (dL_z, dphi)
CONJUGATION_PERMUTATION = np.array([1, 0, 2, 3, 5, 4])


@dataclass(frozen=True)
class DriftMatrix:
    entries: np.ndarray = field(repr=False)
    branch_index: int
    Delta_eff: float

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.entries))

    def resolvent(self, s: complex) -> np.ndarray:
        """s * Id - M."""
        return s * np.eye(6) - self.entries


@dataclass(frozen=True)
class StabilityReport:
    eigenvalues: np.ndarray = field(repr=False)
    max_real: float
    stable: bool
    margin: float
    residuals: np.ndarray = field(repr=False)
    matrix_norm: float


def build_drift_matrix(steady: SteadyState, dp: DerivedParams) -> DriftMatrix:
    """The 6x6 drift matrix at the given steady state.

    The dm* row is the complex conjugate of the dm row, so that
    P conj(M) P = M holds for complex a_s (P swaps the conjugate pairs).
    """
    a = steady.a_s
    ac = np.conj(a)
    D = steady.Delta_eff
    gp, gm = dp.g_phi, dp.g_m
    M = np.array(
        [
            [-(1j * D + dp.kappa_a), 0, 0, 1j * gp * a, -1j * gm * a, -1j * gm * a],
            [0, 1j * D - dp.kappa_a, 0, -1j * gp * ac, 1j * gm * ac, 1j * gm * ac],
            [gp * ac, gp * a, -dp.kappa_phi, -dp.omega_phi, 0, 0],
            [0, 0, dp.omega_phi, 0, 0, 0],
            [-1j * gm * ac, -1j * gm * a, 0, 0, -(1j * dp.omega_m + dp.kappa_m), 0],
            [1j * gm * ac, 1j * gm * a, 0, 0, 0, 1j * dp.omega_m - dp.kappa_m],
        ],
        dtype=complex,
    )
    return DriftMatrix(M, steady.branch_index, steady.Delta_eff)


def _eigpair_residuals(M: np.ndarray, w: np.ndarray, v: np.ndarray) -> np.ndarray:
    v = v / np.linalg.norm(v, axis=0)
    return np.linalg.norm(M @ v - v * w, axis=0)


def eigen_spectrum(drift: DriftMatrix, margin: float = 0.0, max_refine: int = 3) -> StabilityReport:
    """Eigenvalues of the drift matrix with residual verification.

    Every eigenpair must satisfy ||M v - lambda v|| <= 1e-8 ||M||.  Pairs that
    fail are refined by inverse iteration, up to ``max_refine`` sweeps.

    Raises
    ------
    EigenFailure
        If some eigenpair still fails the residual check.
    """
    M = drift.entries
    if not np.all(np.isfinite(M)):
        raise EigenFailure("drift matrix has non-finite entries")
    norm = drift.norm
    w, v = np.linalg.eig(M)
    res = _eigpair_residuals(M, w, v)
    tol = RESIDUAL_TOL * norm
    for _ in range(max_refine):
        bad = np.flatnonzero(res > tol)
        if bad.size == 0:
            break
        for j in bad:
            shift = w[j] + 1e-10 * norm
            x = v[:, j]
            for _ in range(3):
                x = np.linalg.solve(M - shift * np.eye(6), x)
                x /= np.linalg.norm(x)
            w[j] = np.vdot(x, M @ x)
            v[:, j] = x
        res = _eigpair_residuals(M, w, v)
    if np.any(res > tol):
        raise EigenFailure(f"eigenpair residuals {res.max():.3g} exceed {tol:.3g}")
    order = np.lexsort((w.imag, w.real))
    w, res = w[order], res[order]
    max_real = float(w.real.max())
    return StabilityReport(
        eigenvalues=w,
        max_real=max_real,
        stable=max_real < -margin,
        margin=margin,
        residuals=res,
        matrix_norm=norm,
    )


def check_stability(steady: SteadyState, dp: DerivedParams, margin: float = 0.0) -> StabilityReport:
    return eigen_spectrum(build_drift_matrix(steady, dp), margin=margin)


def conjugation_defect(drift: DriftMatrix) -> float:
    """max |P conj(M) P - M|, zero for a structurally consistent matrix."""
    p = CONJUGATION_PERMUTATION
    M = drift.entries
    return float(np.abs(np.conj(M)[np.ix_(p, p)] - M).max())


def conjugation_pairing_error(eigenvalues: np.ndarray) -> float:
    """Largest distance from an eigenvalue's conjugate to the spectrum."""
    w = np.asarray(eigenvalues)
    return float(max(np.abs(w - np.conj(x)).min() for x in w))


@dataclass(frozen=True)
class ScanPoint:
    value: float
    branch_index: int
    branch_count: int
    steady: SteadyState
    report: StabilityReport


def stability_scan(cfg: PhysicalConfig, field_name: str, values: Sequence, margin: float = 0.0) -> list[ScanPoint]:
    """Stability along one config field; bistable points report every branch.

    ``values`` are assigned verbatim to the config field (floats or
    `params.Ratio` instances).
    """
    out = []
    for value in values:
        dp = derive_params(cfg.replace(**{field_name: value}))
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", BistableWarning)
            states = all_steady_states(dp)
        for st in states:
            out.append(ScanPoint(
                value=value,
                branch_index=st.branch_index,
                branch_count=st.branch_count,
                steady=st,
                report=check_stability(st, dp, margin),
            ))
    return out
