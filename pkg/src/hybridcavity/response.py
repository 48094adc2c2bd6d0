"""Linear probe response: back-action kernel, sideband amplitudes, delay.

With the ansatz da(t) = A- exp(-i delta t) + A+ exp(+i delta t) the
linearised equations close on A- and (A+)*.  Writing the mechanical and
magnon susceptibilities into a single kernel

    F(delta) = i S [ g_phi^2 omega_phi / (omega_phi^2 - delta^2 - i kappa_phi delta)
                   + 2 g_m^2 omega_m / (omega_m^2 - (delta + i kappa_m)^2) ]

(S = |a_s|^2, or a_s^2 under the literal-square convention) gives

    A- / eps_p = (kappa_a - i delta - i Delta + F)
                 / (F^2 + (kappa_a - i delta)^2 + (Delta + i F)^2).

The factor 2 on the magnon term comes from g_m coupling to m + m^dagger; it
is the same factor that appears in the static detuning shift.  The output
field is eps_out = 2 kappa_a A- / eps_p, the transmission t_p = 1 - eps_out
and the group delay tau_g = d arg(t_p) / d delta.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import (
    GridPointError,
    PoleError,
    SingularDenominator,
    SingularSystem,
    ZeroTransmission,
)
from .params import DerivedParams, IntensityConvention, config_hash
from .stability import DriftMatrix, build_drift_matrix
from .steady_state import SteadyState

POLE_TOL = 1e-30
ZERO_TRANSMISSION_TOL = 1e-14
SINGULAR_COND = 1e14


def intensity_factor(steady: SteadyState, dp: DerivedParams) -> complex:
    if IntensityConvention(dp.convention) is IntensityConvention.LITERAL_SQUARE:
        return complex(steady.a_s**2)
    return complex(steady.n_cav)


def _denominators(delta, dp: DerivedParams):
    d_rot = dp.omega_phi**2 - delta**2 - 1j * dp.kappa_phi * delta
    d_mag = dp.omega_m**2 - (delta + 1j * dp.kappa_m) ** 2
    if np.any(np.abs(d_rot) < POLE_TOL):
        raise PoleError("rotational susceptibility pole")
    if np.any(np.abs(d_mag) < POLE_TOL):
        raise PoleError("magnon susceptibility pole")
    return d_rot, d_mag


def backaction_kernel(delta, steady: SteadyState, dp: DerivedParams):
    """F(delta) in rad/s; accepts scalars or arrays."""
    delta = np.asarray(delta, dtype=float)
    S = intensity_factor(steady, dp)
    d_rot, d_mag = _denominators(delta, dp)
    F = 1j * S * (
        dp.g_phi**2 * dp.omega_phi / d_rot
        + 2.0 * dp.g_m**2 * dp.omega_m / d_mag
    )
    return F[()] if F.ndim == 0 else F


def backaction_kernel_derivative(delta, steady: SteadyState, dp: DerivedParams):
    """dF/d delta, from the rational form of the kernel."""
    delta = np.asarray(delta, dtype=float)
    S = intensity_factor(steady, dp)
    d_rot, d_mag = _denominators(delta, dp)
    dF = 1j * S * (
        dp.g_phi**2 * dp.omega_phi * (2.0 * delta + 1j * dp.kappa_phi) / d_rot**2
        + 2.0 * dp.g_m**2 * dp.omega_m * 2.0 * (delta + 1j * dp.kappa_m) / d_mag**2
    )
    return dF[()] if dF.ndim == 0 else dF


def _closed_form_parts(delta, steady: SteadyState, dp: DerivedParams):
    delta = np.asarray(delta, dtype=float)
    F = backaction_kernel(delta, steady, dp)
    D, k = steady.Delta_eff, dp.kappa_a
    num = k - 1j * delta - 1j * D + F
    den = F**2 + (k - 1j * delta) ** 2 + (D + 1j * F) ** 2
    scale = (k + np.abs(delta) + abs(D) + np.abs(F)) ** 2
    if np.any(np.abs(den) < POLE_TOL * scale):
        raise SingularDenominator("A- denominator vanishes (parametric instability point)")
    return delta, F, num, den


def a_minus_closed(delta, steady: SteadyState, dp: DerivedParams):
    """Anti-Stokes amplitude A- per unit eps_p."""
    _, _, num, den = _closed_form_parts(delta, steady, dp)
    return num / den


def a_plus_closed(delta, steady: SteadyState, dp: DerivedParams):
    """Stokes amplitude A+ per unit eps_p (conjugate of the closed da* equation)."""
    delta, F, num, den = _closed_form_parts(delta, steady, dp)
    a_minus = num / den
    phase = steady.a_s.conjugate() / steady.a_s if steady.a_s != 0 else 1.0
    a_plus_conj = -F * phase * a_minus / (dp.kappa_a - 1j * steady.Delta_eff - 1j * delta + F)
    return np.conj(a_plus_conj)


def output_field(delta, steady: SteadyState, dp: DerivedParams):
    """eps_out = 2 kappa_a A- / eps_p: real part absorption, imaginary part dispersion."""
    return 2.0 * dp.kappa_a * a_minus_closed(delta, steady, dp)


def transmission(delta, steady: SteadyState, dp: DerivedParams):
    return 1.0 - output_field(delta, steady, dp)


def transmission_phase(delta, steady: SteadyState, dp: DerivedParams):
    """Principal value of arg(t_p)."""
    return np.angle(transmission(delta, steady, dp))


def group_delay_analytic(delta, steady: SteadyState, dp: DerivedParams):
    """tau_g = Im(t_p' / t_p) in seconds, with the derivative in closed form.

    Raises
    ------
    ZeroTransmission
        Where |t_p| < 1e-14 and the phase is undefined.
    """
    delta, F, num, den = _closed_form_parts(delta, steady, dp)
    dF = backaction_kernel_derivative(delta, steady, dp)
    D, k = steady.Delta_eff, dp.kappa_a
    dnum = -1j + dF
    dden = 2.0 * F * dF - 2j * (k - 1j * delta) + 2j * (D + 1j * F) * dF
    a = num / den
    da = (dnum * den - num * dden) / den**2
    t = 1.0 - 2.0 * k * a
    if np.any(np.abs(t) < ZERO_TRANSMISSION_TOL):
        raise ZeroTransmission("|t_p| below 1e-14; transmission phase undefined")
    tau = np.imag(-2.0 * k * da / t)
    return tau[()] if np.ndim(tau) == 0 else tau


def group_delay_fd(delta, steady: SteadyState, dp: DerivedParams, h: float):
    """Central-difference group delay with step ``h`` (rad/s).

    The two phases are reconciled onto one branch by taking the argument of
    their ratio, so 2 pi wraps between delta - h and delta + h cancel.
    """
    if h <= 0:
        raise ValueError("h must be positive")
    delta = np.asarray(delta, dtype=float)
    t_hi = transmission(delta + h, steady, dp)
    t_lo = transmission(delta - h, steady, dp)
    if np.any(np.abs(t_hi) < ZERO_TRANSMISSION_TOL) or np.any(np.abs(t_lo) < ZERO_TRANSMISSION_TOL):
        raise ZeroTransmission("|t_p| below 1e-14; transmission phase undefined")
    tau = np.angle(t_hi / t_lo) / (2.0 * h)
    return tau[()] if np.ndim(tau) == 0 else tau


# ---------------------------------------------------------------------------
# independent route: the 6x6 resolvent of the drift matrix
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class FluctuationAmplitudes:
    """Sideband amplitudes of (da, dm, dphi) from the resolvent solve."""

    A_minus: np.ndarray
    A_plus: np.ndarray
    M_minus: np.ndarray
    M_plus: np.ndarray
    Phi: np.ndarray
    u_minus: np.ndarray = field(repr=False)
    u_plus: np.ndarray = field(repr=False)


def _solve_batched(drift: DriftMatrix, s: np.ndarray, rhs: np.ndarray) -> np.ndarray:
    R = s[:, None, None] * np.eye(6) - drift.entries
    cond = np.linalg.cond(R)
    bad = np.flatnonzero(~np.isfinite(cond) | (cond > SINGULAR_COND))
    if bad.size:
        raise SingularSystem(f"resolvent singular at grid index {int(bad[0])} (cond={cond[bad[0]]:.3g})")
    b = np.broadcast_to(rhs, (s.size, 6))[..., None]
    return np.linalg.solve(R, b)[..., 0]


def fluctuation_linear_solve(delta, steady: SteadyState, dp: DerivedParams,
                             drift: DriftMatrix | None = None) -> FluctuationAmplitudes:
    """Solve (-i delta - M) u- = b and (+i delta - M) u+ = c directly.

    b = (eps_p, 0, 0, 0, 0, 0) drives the exp(-i delta t) component of da and
    c = (0, eps_p, 0, 0, 0, 0) the exp(+i delta t) component of da*; the
    results are absolute amplitudes (not per unit eps_p).  A- and M- are
    u-[0] and u-[4]; A+ and M+ are u+[0] and u+[4]; Phi is u-[3].
    """
    if drift is None:
        drift = build_drift_matrix(steady, dp)
    d = np.atleast_1d(np.asarray(delta, dtype=float))
    b = np.zeros(6, dtype=complex)
    b[0] = dp.eps_p
    c = np.zeros(6, dtype=complex)
    c[1] = dp.eps_p
    u_minus = _solve_batched(drift, -1j * d, b)
    u_plus = _solve_batched(drift, 1j * d, c)
    squeeze = np.ndim(delta) == 0

    def pick(arr):
        return arr[0] if squeeze else arr

    return FluctuationAmplitudes(
        A_minus=pick(u_minus[:, 0]),
        A_plus=pick(u_plus[:, 0]),
        M_minus=pick(u_minus[:, 4]),
        M_plus=pick(u_plus[:, 4]),
        Phi=pick(u_minus[:, 3]),
        u_minus=pick(u_minus),
        u_plus=pick(u_plus),
    )


# ---------------------------------------------------------------------------
# spectra
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ResponsePoint:
    delta: float
    F_val: complex
    A_minus: complex
    A_plus: complex
    eps_out: complex
    t_p: complex
    phi_t: float
    tau_g: float


@dataclass(frozen=True)
class ResponseSpectrum:
    """Response on an increasing delta grid; phi_t is unwrapped along the grid."""

    delta_grid: np.ndarray
    F_val: np.ndarray
    A_minus: np.ndarray
    A_plus: np.ndarray
    eps_out: np.ndarray
    t_p: np.ndarray
    phi_t: np.ndarray
    tau_g: np.ndarray
    steady: SteadyState
    params_hash: str | None = None

    def __len__(self) -> int:
        return self.delta_grid.size

    def point(self, i: int) -> ResponsePoint:
        return ResponsePoint(
            delta=float(self.delta_grid[i]),
            F_val=complex(self.F_val[i]),
            A_minus=complex(self.A_minus[i]),
            A_plus=complex(self.A_plus[i]),
            eps_out=complex(self.eps_out[i]),
            t_p=complex(self.t_p[i]),
            phi_t=float(self.phi_t[i]),
            tau_g=float(self.tau_g[i]),
        )

    @property
    def points(self) -> list[ResponsePoint]:
        return [self.point(i) for i in range(len(self))]


def response_point(delta: float, steady: SteadyState, dp: DerivedParams) -> ResponsePoint:
    a_minus = complex(a_minus_closed(delta, steady, dp))
    eps_out = 2.0 * dp.kappa_a * a_minus
    t_p = 1.0 - eps_out
    return ResponsePoint(
        delta=float(delta),
        F_val=complex(backaction_kernel(delta, steady, dp)),
        A_minus=a_minus,
        A_plus=complex(a_plus_closed(delta, steady, dp)),
        eps_out=eps_out,
        t_p=t_p,
        phi_t=float(np.angle(t_p)),
        tau_g=float(group_delay_analytic(delta, steady, dp)),
    )


def default_delta_grid(dp: DerivedParams, lo: float = 0.5, hi: float = 1.5, n: int = 2001) -> np.ndarray:
    return np.linspace(lo, hi, n) * dp.omega_phi


def _locate(fn, grid, steady, dp):
    """Re-run ``fn`` point by point to attach the failing grid index."""
    for i, d in enumerate(grid):
        try:
            fn(d, steady, dp)
        except (PoleError, SingularDenominator, ZeroTransmission) as exc:
            raise GridPointError(i, exc) from exc


def compute_spectrum(delta_grid, steady: SteadyState, dp: DerivedParams) -> ResponseSpectrum:
    grid = np.asarray(delta_grid, dtype=float)
    if grid.ndim != 1 or grid.size == 0:
        raise ValueError("delta grid must be a non-empty 1-D array")
    if grid.size > 1 and np.any(np.diff(grid) <= 0):
        raise ValueError("delta grid must be strictly increasing")
    try:
        F = backaction_kernel(grid, steady, dp)
        a_minus = a_minus_closed(grid, steady, dp)
        a_plus = a_plus_closed(grid, steady, dp)
        tau = group_delay_analytic(grid, steady, dp)
    except (PoleError, SingularDenominator, ZeroTransmission):
        _locate(group_delay_analytic, grid, steady, dp)
        raise
    eps_out = 2.0 * dp.kappa_a * a_minus
    t_p = 1.0 - eps_out
    phi = np.unwrap(np.angle(t_p))
    return ResponseSpectrum(
        delta_grid=grid,
        F_val=np.asarray(F),
        A_minus=np.asarray(a_minus),
        A_plus=np.asarray(a_plus),
        eps_out=np.asarray(eps_out),
        t_p=np.asarray(t_p),
        phi_t=phi,
        tau_g=np.asarray(tau),
        steady=steady,
        params_hash=config_hash(dp.config) if dp.config is not None else None,
    )
