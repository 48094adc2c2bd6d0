"""Figure-level analyses: delay maps, extremal delays, conversions, phase diagrams.

The "group delay associated with rotation" (or with the magnon) is taken to
be the extremal tau_g inside a detuning window centred on omega_phi (or
omega_m).  A slow/fast conversion along a parameter axis is a sign change of
the extremum with the larger magnitude in that window.
"""
from __future__ import annotations

import math
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Iterable, Sequence

import numpy as np
from scipy import optimize

from .errors import BistableWarning, HybridCavityError
from .params import TWO_PI, DerivedParams, PhysicalConfig, Ratio, derive_params
from .response import group_delay_analytic, transmission
from .stability import check_stability
from .steady_state import SteadyState, solve_steady_state

DEFAULT_HALF_WIDTH = 0.04  # in units of omega_phi
DEFAULT_COARSE_POINTS = 801
# refinement resolution in units of kappa_m; near a zero of t_p the delay
# spikes are far narrower than the kappa_m / 100 minimum
REFINE_RESOLUTION = 1e-6

# mask reason codes written in place of delays
UNSTABLE = "unstable"
BISTABLE_UNREFINED = "bistable-unrefined"
NUMERICAL_FAILURE = "numerical-failure"

REGIMES = ("rotation", "magnon")


# ---------------------------------------------------------------------------
# axes
# ---------------------------------------------------------------------------

_SCALES = {
    "native": 1.0,
    "rad_per_s": 1.0,
    "W": 1.0,
    "mW": 1e-3,
    "uW": 1e-6,
    "m": 1.0,
    "mm": 1e-3,
    "um": 1e-6,
    "nm": 1e-9,
    "kg": 1.0,
    "mg": 1e-6,
    "hz": TWO_PI,
    "Hz": TWO_PI,
    "kHz": TWO_PI * 1e3,
    "MHz": TWO_PI * 1e6,
}


def axis_value(unit: str, value: float):
    """Config-field value for ``value`` expressed in ``unit``."""
    if unit in ("ratio_omega_phi", "ratio_g_phi"):
        return Ratio(float(value), unit[len("ratio_"):])
    try:
        return float(value) * _SCALES[unit]
    except KeyError:
        raise ValueError(f"unknown axis unit {unit!r}") from None


@dataclass(frozen=True)
class Axis:
    """Values of one config field, in ``unit``."""

    name: str
    values: np.ndarray
    unit: str = "native"

    def __post_init__(self):
        object.__setattr__(self, "values", np.asarray(self.values, dtype=float))
        if self.name not in PhysicalConfig.__dataclass_fields__:
            raise ValueError(f"unknown config field {self.name!r}")
        axis_value(self.unit, 0.0)

    @classmethod
    def linspace(cls, name: str, start: float, stop: float, count: int, unit: str = "native") -> "Axis":
        return cls(name, np.linspace(start, stop, int(count)), unit)

    def config_at(self, cfg: PhysicalConfig, value: float) -> PhysicalConfig:
        v = axis_value(self.unit, value)
        if self.name == "topological_charge":
            v = int(round(v))
        return cfg.replace(**{self.name: v})

    def configs(self, cfg: PhysicalConfig) -> list[PhysicalConfig]:
        return [self.config_at(cfg, v) for v in self.values]


# ---------------------------------------------------------------------------
# regime windows and extremal delays
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class RegimeWindow:
    center: float
    half_width: float
    label: str

    def __post_init__(self):
        if not self.half_width > 0:
            raise ValueError("window half-width must be positive")
        if self.label not in REGIMES:
            raise ValueError(f"label must be one of {REGIMES}")

    @property
    def lo(self) -> float:
        return self.center - self.half_width

    @property
    def hi(self) -> float:
        return self.center + self.half_width


def regime_windows(dp: DerivedParams, half_width: float | None = None) -> tuple[RegimeWindow, RegimeWindow]:
    """Rotation and magnon windows around omega_phi and omega_m.

    The default half-width is min(0.04 omega_phi, |omega_m - omega_phi| / 2);
    an explicit width is shrunk so the two windows at most abut.
    """
    gap = abs(dp.omega_m - dp.omega_phi)
    if half_width is None:
        half_width = DEFAULT_HALF_WIDTH * dp.omega_phi
    half_width = min(half_width, gap / 2)
    if half_width <= 0:
        raise ValueError("rotation and magnon frequencies coincide; windows are empty")
    return (
        RegimeWindow(dp.omega_phi, half_width, "rotation"),
        RegimeWindow(dp.omega_m, half_width, "magnon"),
    )


@dataclass(frozen=True)
class ExtremalDelay:
    tau_max: float
    tau_min: float
    delta_at_max: float
    delta_at_min: float

    @property
    def signal(self) -> float:
        """The extremum of larger magnitude, keeping its sign."""
        return self.tau_max if abs(self.tau_max) >= abs(self.tau_min) else self.tau_min


def _refine(fn: Callable[[float], float], grid: np.ndarray, i: int, xtol: float) -> tuple[float, float]:
    """Golden-section minimisation of ``fn`` around the discrete minimum ``i``."""
    if i == 0 or i == grid.size - 1:
        return float(grid[i]), fn(grid[i])
    a, b, c = grid[i - 1], grid[i], grid[i + 1]
    fb = fn(b)
    if not (fb < fn(a) and fb < fn(c)):
        return float(b), fb
    res = optimize.minimize_scalar(fn, bracket=(a, b, c), method="golden",
                                   options={"xtol": xtol / abs(b)})
    if res.fun < fb and a <= res.x <= c:
        return float(res.x), float(res.fun)
    return float(b), fb


def _transmission_dips(grid: np.ndarray, steady: SteadyState, dp: DerivedParams, xtol: float,
                       count: int = 3) -> list[float]:
    """Refined positions of the deepest local minima of |t_p| on ``grid``.

    A zero of t_p close to the real axis gives a tau_g spike of width about
    its distance from the axis, centred on the |t_p| minimum.  Such spikes can
    fall between coarse grid points, so they are located here explicitly.
    """
    mag = np.abs(transmission(grid, steady, dp))
    inner = np.flatnonzero((mag[1:-1] <= mag[:-2]) & (mag[1:-1] <= mag[2:])) + 1
    out = []
    for i in inner[np.argsort(mag[inner])][:count]:
        res = optimize.minimize_scalar(lambda d: float(abs(transmission(d, steady, dp))),
                                       bounds=(grid[i - 1], grid[i + 1]), method="bounded",
                                       options={"xatol": xtol})
        out.append(float(res.x))
    return out


def extremal_delay(window: RegimeWindow, steady: SteadyState, dp: DerivedParams,
                   n_coarse: int = DEFAULT_COARSE_POINTS, refine: bool = True) -> ExtremalDelay:
    """Largest and smallest tau_g inside ``window``.

    A dense grid of ``n_coarse`` points locates the discrete extrema, which
    are then refined by golden-section search to a detuning resolution of
    ``REFINE_RESOLUTION * kappa_m`` (well below the required kappa_m / 100).
    Refined minima of |t_p| are added as candidates so that spikes narrower
    than the grid spacing are not missed.
    """
    if n_coarse < 400:
        raise ValueError("at least 400 coarse points per window are required")
    grid = np.linspace(window.lo, window.hi, n_coarse)
    tau = group_delay_analytic(grid, steady, dp)
    i_max, i_min = int(np.argmax(tau)), int(np.argmin(tau))
    if not refine:
        return ExtremalDelay(float(tau[i_max]), float(tau[i_min]), float(grid[i_max]), float(grid[i_min]))
    xtol = REFINE_RESOLUTION * dp.kappa_m
    d_max, neg_max = _refine(lambda d: -float(group_delay_analytic(d, steady, dp)), grid, i_max, xtol)
    d_min, t_min = _refine(lambda d: float(group_delay_analytic(d, steady, dp)), grid, i_min, xtol)
    t_max = -neg_max
    for d in _transmission_dips(grid, steady, dp, xtol):
        t = float(group_delay_analytic(d, steady, dp))
        if t > t_max:
            d_max, t_max = d, t
        if t < t_min:
            d_min, t_min = d, t
    return ExtremalDelay(t_max, t_min, d_max, d_min)


# ---------------------------------------------------------------------------
# per-point evaluation (top level so that worker processes can pickle it)
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class OperatingPoint:
    dp: DerivedParams | None
    steady: SteadyState | None
    stable: bool
    max_real: float
    reason: str = ""


def operating_point(cfg: PhysicalConfig) -> OperatingPoint:
    """Derive, solve the default branch and classify stability."""
    try:
        dp = derive_params(cfg)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", BistableWarning)
            steady = solve_steady_state(dp)
        report = check_stability(steady, dp)
    except (HybridCavityError, np.linalg.LinAlgError, ArithmeticError):
        return OperatingPoint(None, None, False, math.nan, NUMERICAL_FAILURE)
    reason = "" if report.stable else UNSTABLE
    return OperatingPoint(dp, steady, report.stable, report.max_real, reason)


@dataclass(frozen=True)
class CellResult:
    stable: bool
    reason: str
    branch_index: int
    branch_count: int
    rotation: ExtremalDelay | None
    magnon: ExtremalDelay | None


def _extremal_cell(cfg: PhysicalConfig, half_width_ratio: float | None, n_coarse: int) -> CellResult:
    op = operating_point(cfg)
    if op.steady is None:
        return CellResult(False, op.reason, -1, 0, None, None)
    branch = (op.steady.branch_index, op.steady.branch_count)
    if not op.stable:
        return CellResult(False, op.reason, *branch, None, None)
    try:
        hw = None if half_width_ratio is None else half_width_ratio * op.dp.omega_phi
        rot_w, mag_w = regime_windows(op.dp, hw)
        rot = extremal_delay(rot_w, op.steady, op.dp, n_coarse)
        mag = extremal_delay(mag_w, op.steady, op.dp, n_coarse)
    except (HybridCavityError, ValueError, ArithmeticError):
        return CellResult(False, NUMERICAL_FAILURE, *branch, None, None)
    return CellResult(True, "", *branch, rot, mag)


def _delay_row(cfg: PhysicalConfig, delta_grid: np.ndarray):
    op = operating_point(cfg)
    n = delta_grid.size
    if op.steady is None:
        return np.full(n, np.nan), np.full(n, op.reason, dtype=object), -1, 0
    branch = (op.steady.branch_index, op.steady.branch_count)
    if not op.stable:
        return np.full(n, np.nan), np.full(n, op.reason, dtype=object), *branch
    reasons = np.full(n, "", dtype=object)
    try:
        tau = np.asarray(group_delay_analytic(delta_grid, op.steady, op.dp), dtype=float)
    except (HybridCavityError, ArithmeticError):
        tau = np.empty(n)
        for j, d in enumerate(delta_grid):
            try:
                tau[j] = group_delay_analytic(d, op.steady, op.dp)
            except (HybridCavityError, ArithmeticError):
                tau[j] = np.nan
                reasons[j] = NUMERICAL_FAILURE
    return tau, reasons, *branch


def _parallel_map(fn, args: Sequence[tuple], workers: int) -> list:
    # results land in input order, so grids do not depend on the worker count
    if workers <= 1 or len(args) <= 1:
        return [fn(*a) for a in args]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, *zip(*args)))


# ---------------------------------------------------------------------------
# delay maps
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class DelayMap:
    """tau_g over (parameter value, delta); masked cells hold NaN plus a reason."""

    axis: Axis
    delta: np.ndarray
    tau: np.ndarray
    reason: np.ndarray = field(repr=False)
    branch_index: np.ndarray = field(repr=False)
    branch_count: np.ndarray = field(repr=False)

    @property
    def mask(self) -> np.ndarray:
        """True where the cell is masked."""
        return self.reason != ""


def delay_map(cfg: PhysicalConfig, axis: Axis, delta_grid: Iterable[float], workers: int = 1) -> DelayMap:
    """Group delay over ``delta_grid`` (rad/s) for every value on ``axis``."""
    delta = np.asarray(delta_grid, dtype=float)
    rows = _parallel_map(_delay_row, [(c, delta) for c in axis.configs(cfg)], workers)
    return DelayMap(
        axis=axis,
        delta=delta,
        tau=np.vstack([r[0] for r in rows]),
        reason=np.vstack([r[1] for r in rows]),
        branch_index=np.array([r[2] for r in rows]),
        branch_count=np.array([r[3] for r in rows]),
    )


@dataclass(frozen=True)
class ExtremalProfile:
    """Regime extrema along an axis (NaN where masked)."""

    axis: Axis
    rotation_max: np.ndarray
    rotation_min: np.ndarray
    magnon_max: np.ndarray
    magnon_min: np.ndarray
    reason: np.ndarray
    branch_count: np.ndarray

    def signal(self, regime: str) -> np.ndarray:
        hi, lo = (self.rotation_max, self.rotation_min) if regime == "rotation" else (self.magnon_max, self.magnon_min)
        return np.where(np.abs(hi) >= np.abs(lo), hi, lo)


def _unpack(cells: list[CellResult]):
    def col(attr, which):
        return np.array([getattr(getattr(c, which), attr) if c.stable else np.nan for c in cells])

    return (
        col("tau_max", "rotation"), col("tau_min", "rotation"),
        col("tau_max", "magnon"), col("tau_min", "magnon"),
        np.array([c.reason for c in cells], dtype=object),
        np.array([c.branch_count for c in cells]),
    )


def extremal_profile(cfg: PhysicalConfig, axis: Axis, half_width_ratio: float | None = None,
                     n_coarse: int = DEFAULT_COARSE_POINTS, workers: int = 1) -> ExtremalProfile:
    cells = _parallel_map(_extremal_cell, [(c, half_width_ratio, n_coarse) for c in axis.configs(cfg)], workers)
    return ExtremalProfile(axis, *_unpack(cells))


# ---------------------------------------------------------------------------
# conversions
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ConversionPoint:
    parameter: str
    value: float
    regime: str
    direction: str  # "slow->fast" or "fast->slow" along increasing parameter
    bracket: tuple[float, float]
    signal_bracket: tuple[float, float]
    refined: bool = True
    note: str = ""


def _signal_at(cfg: PhysicalConfig, axis: Axis, regime: str, value: float,
               half_width_ratio: float | None, n_coarse: int) -> tuple[float, str, int]:
    cell = _extremal_cell(axis.config_at(cfg, value), half_width_ratio, n_coarse)
    if not cell.stable:
        return math.nan, cell.reason, cell.branch_count
    return getattr(cell, regime).signal, "", cell.branch_count


class _Masked(Exception):
    pass


def find_conversions(cfg: PhysicalConfig, axis: Axis, regime: str, tol: float | None = None,
                     half_width_ratio: float | None = None, n_coarse: int = DEFAULT_COARSE_POINTS,
                     profile: ExtremalProfile | None = None, workers: int = 1) -> list[ConversionPoint]:
    """Sign changes of the regime's dominant extremal delay along ``axis``.

    Each sign change between neighbouring stable axis points is bisected down
    to ``tol`` (axis units; default 1e-4 of the axis span).  Sign changes
    across masked points, or whose bisection meets a masked point, are
    returned unrefined with the reason in ``note``.  No sign change gives an
    empty list.
    """
    if regime not in REGIMES:
        raise ValueError(f"regime must be one of {REGIMES}")
    if profile is None:
        profile = extremal_profile(cfg, axis, half_width_ratio, n_coarse, workers)
    values = axis.values
    if tol is None:
        tol = 1e-4 * float(np.ptp(values)) if values.size > 1 else 1e-6
    sig = profile.signal(regime)
    ok = np.flatnonzero(np.isfinite(sig))
    out: list[ConversionPoint] = []
    for i, j in zip(ok[:-1], ok[1:]):
        s_i, s_j = sig[i], sig[j]
        if np.sign(s_i) == np.sign(s_j):
            continue
        direction = "slow->fast" if s_i > 0 else "fast->slow"
        bracket = (float(values[i]), float(values[j]))
        common = dict(parameter=axis.name, regime=regime, direction=direction,
                      bracket=bracket, signal_bracket=(float(s_i), float(s_j)))
        if j - i > 1:
            reasons = sorted(set(profile.reason[i + 1:j]))
            out.append(ConversionPoint(value=0.5 * sum(bracket), refined=False,
                                       note="unstable-bracket: " + ",".join(reasons), **common))
            continue
        if profile.branch_count[i] > 1 or profile.branch_count[j] > 1:
            out.append(ConversionPoint(value=0.5 * sum(bracket), refined=False,
                                       note=BISTABLE_UNREFINED, **common))
            continue

        def f(v):
            s, reason, _ = _signal_at(cfg, axis, regime, v, half_width_ratio, n_coarse)
            if reason:
                raise _Masked(reason)
            return s

        try:
            root = optimize.bisect(f, bracket[0], bracket[1], xtol=tol)
        except _Masked as exc:
            out.append(ConversionPoint(value=0.5 * sum(bracket), refined=False,
                                       note=f"unstable-bracket: {exc}", **common))
            continue
        out.append(ConversionPoint(value=float(root), **common))
    return out


# ---------------------------------------------------------------------------
# phase diagrams
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class PhaseDiagram:
    """Extremal delays over (g_m, omega_m); rows follow g_m, columns omega_m."""

    g_m_axis: Axis
    omega_m_axis: Axis
    rotation_max: np.ndarray
    rotation_min: np.ndarray
    magnon_max: np.ndarray
    magnon_min: np.ndarray
    reason: np.ndarray = field(repr=False)

    @property
    def stable(self) -> np.ndarray:
        return self.reason == ""


def phase_diagram(cfg: PhysicalConfig, g_m_axis: Axis, omega_m_axis: Axis,
                  half_width_ratio: float | None = None, n_coarse: int = DEFAULT_COARSE_POINTS,
                  workers: int = 1) -> PhaseDiagram:
    if g_m_axis.name != "g_m" or omega_m_axis.name != "omega_m":
        raise ValueError("phase diagrams run over the g_m and omega_m axes")
    args = []
    for g in g_m_axis.values:
        base = g_m_axis.config_at(cfg, g)
        for w in omega_m_axis.values:
            args.append((omega_m_axis.config_at(base, w), half_width_ratio, n_coarse))
    cells = _parallel_map(_extremal_cell, args, workers)
    shape = (g_m_axis.values.size, omega_m_axis.values.size)
    rmax, rmin, mmax, mmin, reason, _ = _unpack(cells)
    return PhaseDiagram(
        g_m_axis, omega_m_axis,
        rmax.reshape(shape), rmin.reshape(shape), mmax.reshape(shape), mmin.reshape(shape),
        reason.reshape(shape),
    )
