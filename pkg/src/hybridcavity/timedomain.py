"""Time-domain oracle for the linearised fluctuation dynamics.

Integrates du/dt = M u + b(t) with the classical fixed-step RK4 scheme,
b(t) = (eps_p e^{-i delta t}, eps_p e^{+i delta t}, 0, 0, 0, 0), and reads the
sideband amplitudes off the settled trajectory by demodulation.  This path
never touches the resolvent or the closed form, so it is an independent
check on both; it is slow and is not meant for production sweeps.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import InstabilityDetected, WindowTooShort
from .params import DerivedParams
from .stability import DriftMatrix, build_drift_matrix
from .steady_state import SteadyState

MIN_STEPS_PER_FASTEST_PERIOD = 50
DEFAULT_STEPS_PER_FASTEST_PERIOD = 100
MIN_PERIODS = 20
_OVERFLOW = 1e150


@dataclass(frozen=True)
class TrajectorySpec:
    dt: float
    t_transient: float
    n_periods: int
    u0: np.ndarray = field(default_factory=lambda: np.zeros(6, dtype=complex))
    drive: bool = True
    norm_stride: int = 100

    def violations(self, steady: SteadyState, dp: DerivedParams, delta: float) -> list[str]:
        fastest = max(abs(steady.Delta_eff), dp.omega_phi, dp.omega_m, abs(delta))
        out = []
        if self.dt > (2 * math.pi / fastest) / MIN_STEPS_PER_FASTEST_PERIOD * (1 + 1e-12):
            out.append("dt exceeds 1/50 of the fastest period")
        if self.n_periods < MIN_PERIODS:
            out.append(f"n_periods must be >= {MIN_PERIODS}")
        slowest = min(dp.kappa_a, dp.kappa_phi, dp.kappa_m)
        if self.t_transient < 10.0 / slowest * (1 - 1e-12):
            out.append("t_transient shorter than 10 / min(kappa)")
        return out


def default_spec(steady: SteadyState, dp: DerivedParams, delta: float, n_periods: int = MIN_PERIODS,
                 steps_per_fastest_period: int = DEFAULT_STEPS_PER_FASTEST_PERIOD) -> TrajectorySpec:
    """Smallest spec meeting the accuracy rules, aligned to the beat period.

    dt divides the beat period 2 pi / delta exactly and the transient is a
    whole number of beat periods, so the demodulation window starts on a
    period boundary.
    """
    if delta == 0:
        raise ValueError("demodulation needs a non-zero probe detuning")
    period = 2 * math.pi / abs(delta)
    fastest = max(abs(steady.Delta_eff), dp.omega_phi, dp.omega_m, abs(delta))
    dt_max = (2 * math.pi / fastest) / steps_per_fastest_period
    steps = math.ceil(period / dt_max)
    slowest = min(dp.kappa_a, dp.kappa_phi, dp.kappa_m)
    transient_periods = math.ceil((10.0 / slowest) / period)
    return TrajectorySpec(dt=period / steps, t_transient=transient_periods * period, n_periods=n_periods)


@dataclass(frozen=True)
class Trajectory:
    """Samples of u(t).

    ``t``/``u`` cover the analysis window at every step; ``norm_t``/``norm``
    track ||u|| across the whole run at a coarser stride.
    """

    t: np.ndarray
    u: np.ndarray
    norm_t: np.ndarray = field(default_factory=lambda: np.empty(0))
    norm: np.ndarray = field(default_factory=lambda: np.empty(0))
    diverged_at: float | None = None
    dt: float | None = None


def rk4_propagators(M: np.ndarray, h: float):
    """Matrices of one classical RK4 step for u' = M u + f(t).

    Returns (P, Q0, Qh, Q1) with
    u_{n+1} = P u_n + Q0 f(t_n) + Qh f(t_n + h/2) + Q1 f(t_n + h),
    which is the RK4 update written out for a linear right-hand side.
    """
    eye = np.eye(M.shape[0], dtype=complex)
    A = h * M
    A2 = A @ A
    A3 = A2 @ A
    P = eye + A + A2 / 2 + A3 / 6 + A2 @ A2 / 24
    Q0 = h / 6 * (eye + A + A2 / 2 + A3 / 4)
    Qh = h / 6 * (4 * eye + 2 * A + A2 / 2)
    Q1 = h / 6 * eye
    return P, Q0, Qh, Q1


def integrate(spec: TrajectorySpec, steady: SteadyState, dp: DerivedParams, delta: float,
              drift: DriftMatrix | None = None, check: bool = True) -> Trajectory:
    """Fixed-step RK4 run of the driven (or free) fluctuation equations.

    The run lasts ``t_transient`` plus ``n_periods`` beat periods; the final
    window is stored at every step.  Divergence stops the run and is recorded
    in ``diverged_at`` rather than raised.
    """
    if check:
        bad = spec.violations(steady, dp, delta)
        if bad:
            raise ValueError("; ".join(bad))
    if drift is None:
        drift = build_drift_matrix(steady, dp)
    h = spec.dt
    P, Q0, Qh, Q1 = rk4_propagators(drift.entries, h)

    if spec.drive:
        b_minus = np.zeros(6, dtype=complex)
        b_minus[0] = dp.eps_p
        b_plus = np.zeros(6, dtype=complex)
        b_plus[1] = dp.eps_p
        c_minus = (Q0 + np.exp(-0.5j * delta * h) * Qh + np.exp(-1j * delta * h) * Q1) @ b_minus
        c_plus = (Q0 + np.exp(0.5j * delta * h) * Qh + np.exp(1j * delta * h) * Q1) @ b_plus
    else:
        c_minus = c_plus = np.zeros(6, dtype=complex)

    window = spec.n_periods * 2 * math.pi / abs(delta) if delta else 0.0
    n_transient = int(round(spec.t_transient / h))
    n_window = int(round(window / h))
    n_total = n_transient + n_window

    u = np.array(spec.u0, dtype=complex)
    win_u = np.empty((n_window + 1, 6), dtype=complex)
    stride = max(1, spec.norm_stride)
    norm_idx = np.arange(0, n_total + 1, stride)
    norms = np.empty(norm_idx.size)
    diverged_at = None
    k_norm = 0
    k_win = 0
    rot = np.exp(-1j * delta * h)
    phase = 1.0 + 0j  # e^{-i delta t_n}
    for n in range(n_total + 1):
        if n >= n_transient:
            win_u[k_win] = u
            k_win += 1
        if n % stride == 0:
            nu = float(np.sqrt(np.vdot(u, u).real))
            norms[k_norm] = nu
            k_norm += 1
            if not math.isfinite(nu) or nu > _OVERFLOW:
                diverged_at = n * h
                break
        if n == n_total:
            break
        u = P @ u + phase * c_minus + phase.conjugate() * c_plus
        phase *= rot
        if n % 4096 == 4095:
            phase /= abs(phase)

    t_win = (n_transient + np.arange(k_win)) * h
    return Trajectory(
        t=t_win,
        u=win_u[:k_win],
        norm_t=norm_idx[:k_norm] * h,
        norm=norms[:k_norm],
        diverged_at=diverged_at,
        dt=h,
    )


@dataclass(frozen=True)
class Demodulation:
    A_minus: complex
    A_plus: complex
    residual: float


def demodulate(traj: Trajectory, delta: float, n_periods: int, component: int = 0) -> Demodulation:
    """Project the last ``n_periods`` beat periods onto e^{-i delta t} and e^{+i delta t}.

    Uses the rectangle rule over whole periods (exact for the two tones when
    the samples divide the period evenly).  The residual is the RMS of what
    the two-tone fit leaves behind, relative to |A-|.

    Raises
    ------
    InstabilityDetected
        If the trajectory diverged.
    WindowTooShort
        If fewer than ``n_periods`` beat periods were sampled.
    """
    if traj.diverged_at is not None:
        raise InstabilityDetected(traj.diverged_at)
    t = np.asarray(traj.t)
    x = np.asarray(traj.u)
    if x.ndim == 2:
        x = x[:, component]
    if t.size < 2:
        raise WindowTooShort("no samples in the analysis window")
    dt = traj.dt if traj.dt is not None else float(t[1] - t[0])
    period = 2 * math.pi / abs(delta)
    per = period / dt
    steps = int(round(per))
    if abs(per - steps) > 1e-6 * per:
        raise ValueError("sample spacing does not divide the beat period")
    need = steps * n_periods
    if t.size < need:
        raise WindowTooShort(f"{t.size} samples, {need} needed for {n_periods} periods")
    # whole periods, dropping the closing sample that repeats the first phase
    sl = slice(t.size - need - 1, t.size - 1) if t.size > need else slice(0, need)
    t, x = t[sl], x[sl]
    e = np.exp(1j * delta * t)
    a_minus = complex(np.mean(x * e))
    a_plus = complex(np.mean(x * np.conj(e)))
    recon = a_minus * np.conj(e) + a_plus * e
    rms = float(np.sqrt(np.mean(np.abs(x - recon) ** 2)))
    scale = abs(a_minus) if a_minus != 0 else 1.0
    return Demodulation(a_minus, a_plus, rms / scale)


def demodulated_response(steady: SteadyState, dp: DerivedParams, delta: float,
                         spec: TrajectorySpec | None = None) -> Demodulation:
    """Integrate from rest and demodulate A- and A+ at ``delta``."""
    if spec is None:
        spec = default_spec(steady, dp, delta)
    traj = integrate(spec, steady, dp, delta)
    return demodulate(traj, delta, spec.n_periods)


def random_perturbation(rng: np.random.Generator, norm: float = 1e-3) -> np.ndarray:
    """Random fluctuation vector respecting the conjugate-pair structure."""
    da = complex(rng.normal(), rng.normal())
    dm = complex(rng.normal(), rng.normal())
    lz, phi = rng.normal(size=2)
    u = np.array([da, da.conjugate(), lz, phi, dm, dm.conjugate()], dtype=complex)
    return u * (norm / np.linalg.norm(u))


def free_decay(steady: SteadyState, dp: DerivedParams, u0: np.ndarray, t_end: float,
               dt: float | None = None, norm_stride: int = 10) -> Trajectory:
    """Undriven evolution from ``u0``; returns the norm history."""
    fastest = max(abs(steady.Delta_eff), dp.omega_phi, dp.omega_m)
    if dt is None:
        dt = (2 * math.pi / fastest) / MIN_STEPS_PER_FASTEST_PERIOD
    spec = TrajectorySpec(dt=dt, t_transient=t_end, n_periods=0, u0=np.asarray(u0, dtype=complex),
                          drive=False, norm_stride=norm_stride)
    return integrate(spec, steady, dp, 0.0, check=False)
