"""Steady-state amplitudes and the self-consistent effective detuning.

Eliminating phi_s, m_s and |a_s|^2 from the mean-field equations leaves a
real cubic for the effective detuning Delta:

    (Delta_a - Delta) (kappa_a^2 + Delta^2) = C eps_c^2,
    C = g_phi^2 / omega_phi + 2 g_m^2 omega_m / (omega_m^2 + kappa_m^2).

One or three real roots exist; three roots mean optical bistability.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .errors import BistableWarning, BranchOutOfRange
from .params import DerivedParams

_RESIDUAL_TOL = 1e-10


@dataclass(frozen=True)
class SteadyState:
    a_s: complex
    n_cav: float
    phi_s: float
    L_zs: float
    m_s: complex
    Delta_eff: float
    branch_count: int
    branch_index: int

    @property
    def bistable(self) -> bool:
        return self.branch_count > 1


def shift_coefficient(dp: DerivedParams) -> float:
    """C such that Delta_a - Delta = C |a_s|^2."""
    return (
        dp.g_phi**2 / dp.omega_phi
        + 2.0 * dp.g_m**2 * dp.omega_m / (dp.omega_m**2 + dp.kappa_m**2)
    )


def cubic_residual(dp: DerivedParams, delta: float) -> float:
    """(Delta_a - Delta)(kappa_a^2 + Delta^2) - C eps_c^2."""
    return (dp.Delta_a - delta) * (dp.kappa_a**2 + delta**2) - shift_coefficient(dp) * dp.eps_c**2


def _residual_scale(dp: DerivedParams, delta: float) -> float:
    drive = shift_coefficient(dp) * dp.eps_c**2
    if drive > 0:
        return drive
    return max(abs(dp.Delta_a) * (dp.kappa_a**2 + delta**2), np.finfo(float).tiny)


def _polish(dp: DerivedParams, x: float, iters: int = 8) -> float:
    # Newton on the un-scaled cubic; stops once the step is below rounding
    k2 = dp.kappa_a**2
    for _ in range(iters):
        f = cubic_residual(dp, x)
        df = -(k2 + x * x) + 2.0 * x * (dp.Delta_a - x)
        if df == 0.0:
            break
        step = f / df
        x_new = x - step
        if abs(step) <= 4 * np.finfo(float).eps * max(abs(x), dp.kappa_a):
            return x_new
        x = x_new
    return x


def detuning_cubic_roots(dp: DerivedParams) -> list[float]:
    """All real roots of the detuning cubic, ascending.

    Roots are found from the companion matrix of the cubic written in the
    dimensionless variable Delta / s (s = max(|Delta_a|, kappa_a)), polished
    with Newton steps and kept only if their relative residual is below
    1e-10.
    """
    s = max(abs(dp.Delta_a), dp.kappa_a)
    da, k = dp.Delta_a / s, dp.kappa_a / s
    drive = shift_coefficient(dp) * dp.eps_c**2 / s**3
    # -(x^3) + da x^2 - k^2 x + (da k^2 - drive) = 0
    coeffs = [-1.0, da, -k * k, da * k * k - drive]
    candidates = np.roots(coeffs)

    roots: list[float] = []
    for z in candidates:
        if abs(z.imag) > 1e-6 * max(abs(z), k):
            continue
        x = _polish(dp, float(z.real) * s)
        if abs(cubic_residual(dp, x)) / _residual_scale(dp, x) >= _RESIDUAL_TOL:
            continue
        if any(abs(x - r) <= 1e-9 * max(abs(r), dp.kappa_a) for r in roots):
            continue
        roots.append(x)
    if not roots:
        # a depressed cubic always has a real root; fall back to the closest
        z = min(candidates, key=lambda c: abs(c.imag))
        roots.append(_polish(dp, float(z.real) * s, iters=50))
    return sorted(roots)


def default_branch(roots: list[float]) -> int:
    """Index of the root connected to the undriven solution Delta = Delta_a.

    The cubic's left side is positive only for Delta < Delta_a and the upper
    root is the one that tends to Delta_a as the drive vanishes.
    """
    return len(roots) - 1


def state_from_detuning(dp: DerivedParams, delta: float, branch_count: int = 1,
                        branch_index: int = 0) -> SteadyState:
    a_s = dp.eps_c / complex(dp.kappa_a, delta)
    n_cav = abs(a_s) ** 2
    phi_s = dp.g_phi * n_cav / dp.omega_phi
    m_s = -1j * dp.g_m * n_cav / complex(dp.kappa_m, dp.omega_m)
    return SteadyState(
        a_s=a_s,
        n_cav=n_cav,
        phi_s=phi_s,
        L_zs=0.0,
        m_s=m_s,
        Delta_eff=float(delta),
        branch_count=branch_count,
        branch_index=branch_index,
    )


def solve_steady_state(dp: DerivedParams, branch: int | None = None) -> SteadyState:
    """Steady state on the requested branch (default: low-power branch).

    Issues a `BistableWarning` when three real roots exist.

    Raises
    ------
    BranchOutOfRange
        If ``branch`` is not smaller than the number of real roots.
    """
    roots = detuning_cubic_roots(dp)
    if len(roots) > 1:
        warnings.warn(
            f"{len(roots)} steady-state branches at P_c={dp.P_c:g} W; "
            "branch_count records the multiplicity",
            BistableWarning,
            stacklevel=2,
        )
    if branch is None:
        branch = default_branch(roots)
    if not 0 <= branch < len(roots):
        raise BranchOutOfRange(f"branch {branch} requested, {len(roots)} available")
    return state_from_detuning(dp, roots[branch], len(roots), branch)


def all_steady_states(dp: DerivedParams) -> list[SteadyState]:
    roots = detuning_cubic_roots(dp)
    return [state_from_detuning(dp, r, len(roots), i) for i, r in enumerate(roots)]
