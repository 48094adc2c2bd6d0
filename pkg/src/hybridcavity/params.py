"""Physical configuration, validation and derived quantities.

Everything downstream works in SI units with angular frequencies in rad/s.
Frequencies quoted as f/2pi in Hz are converted once, here, at the parse
boundary.
"""
from __future__ import annotations

import dataclasses
import hashlib
import json
import math
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Any, Union

from .constants import HBAR, SPEED_OF_LIGHT
from .errors import ValidationError

TWO_PI = 2.0 * math.pi


class IntensityConvention(str, Enum):
    """How the steady intracavity amplitude enters the back-action kernel."""

    MODULUS_SQUARED = "ModulusSquared"  # |a_s|^2
    LITERAL_SQUARE = "LiteralSquare"  # a_s^2


@dataclass(frozen=True)
class Ratio:
    """A frequency given relative to ``omega_phi`` or ``g_phi``."""

    value: float
    reference: str  # "omega_phi" or "g_phi"

    def __post_init__(self):
        if self.reference not in ("omega_phi", "g_phi"):
            raise ValueError(f"unknown ratio reference {self.reference!r}")


Frequency = Union[float, Ratio]


@dataclass(frozen=True)
class PhysicalConfig:
    """User-facing physical parameters.

    Defaults are the operating point used throughout the numerical results:
    a 10 mm cavity at 1064 nm, a 10 mg / 10 um rotating mirror driven with
    charge l = 200, omega_phi/2pi = 0.5 MHz, omega_m = 1.15 omega_phi,
    g_m = 1.15 g_phi, Delta_a = 0.9 omega_phi, kappa_a/2pi = 150 kHz,
    kappa_phi/2pi = kappa_m/2pi = 350 Hz and P_c = 10 mW.
    """

    cavity_length: float = 10e-3
    wavelength: float = 1064e-9
    mirror_mass: float = 10e-6
    mirror_radius: float = 10e-6
    topological_charge: int = 200
    omega_phi: float = TWO_PI * 0.5e6
    omega_m: Frequency = Ratio(1.15, "omega_phi")
    g_m: Frequency = Ratio(1.15, "g_phi")
    Delta_a: Frequency = Ratio(0.9, "omega_phi")
    kappa_a: float = TWO_PI * 1.5e5
    kappa_phi: float = TWO_PI * 350.0
    kappa_m: float = TWO_PI * 350.0
    P_c: float = 10e-3
    P_p: float = 1e-6
    intensity_convention: IntensityConvention = IntensityConvention.MODULUS_SQUARED

    def replace(self, **changes) -> "PhysicalConfig":
        return dataclasses.replace(self, **changes)


FIELD_NAMES = tuple(f.name for f in dataclasses.fields(PhysicalConfig))
FREQUENCY_FIELDS = ("omega_phi", "omega_m", "g_m", "Delta_a", "kappa_a", "kappa_phi", "kappa_m")
# ratio units each frequency field may be expressed in
RATIO_UNITS = {
    "omega_m": ("ratio_omega_phi",),
    "Delta_a": ("ratio_omega_phi",),
    "g_m": ("ratio_g_phi",),
}
# fields that may legitimately be switched off
_NONNEGATIVE = ("g_m", "P_c")


@dataclass(frozen=True)
class Violation:
    field: str
    rule: str


def _is_real(x) -> bool:
    return isinstance(x, (int, float)) and not isinstance(x, bool) and math.isfinite(x)


def validate_config(cfg: PhysicalConfig) -> list[Violation]:
    """Return every invariant violation of ``cfg`` (empty when valid)."""
    out: list[Violation] = []
    for name in FIELD_NAMES:
        value = getattr(cfg, name)
        if name == "intensity_convention":
            try:
                IntensityConvention(value)
            except ValueError:
                out.append(Violation(name, "must be ModulusSquared or LiteralSquare"))
            continue
        if name == "topological_charge":
            if not (isinstance(value, int) and not isinstance(value, bool)) or value < 1:
                out.append(Violation(name, "must be an integer >= 1"))
            continue
        if isinstance(value, Ratio):
            allowed = RATIO_UNITS.get(name, ())
            if f"ratio_{value.reference}" not in allowed:
                out.append(Violation(name, f"cannot be given as a ratio to {value.reference}"))
                continue
            value = value.value
        if not _is_real(value):
            out.append(Violation(name, "must be a finite real number"))
        elif name in _NONNEGATIVE:
            if value < 0:
                out.append(Violation(name, "must be >= 0"))
        elif value <= 0:
            out.append(Violation(name, "must be > 0"))
    return out


def moment_of_inertia(mass: float, radius: float) -> float:
    """Uniform thin disc about its symmetry axis."""
    return 0.5 * mass * radius**2


def optorotational_coupling(cfg: PhysicalConfig) -> float:
    """g_phi = (c l / L) sqrt(hbar / (I omega_phi)), in rad/s."""
    inertia = moment_of_inertia(cfg.mirror_mass, cfg.mirror_radius)
    return (
        SPEED_OF_LIGHT * cfg.topological_charge / cfg.cavity_length
        * math.sqrt(HBAR / (inertia * cfg.omega_phi))
    )


def resolve_config(cfg: PhysicalConfig) -> PhysicalConfig:
    """Replace ratio-specified frequencies by absolute rad/s values.

    Idempotent: resolving an already resolved config returns an equal one.
    """
    violations = validate_config(cfg)
    if violations:
        raise ValidationError(violations)
    refs = {"omega_phi": float(cfg.omega_phi), "g_phi": optorotational_coupling(cfg)}
    changes = {}
    for name in FREQUENCY_FIELDS:
        value = getattr(cfg, name)
        if isinstance(value, Ratio):
            changes[name] = value.value * refs[value.reference]
        else:
            changes[name] = float(value)
    changes["intensity_convention"] = IntensityConvention(cfg.intensity_convention)
    return dataclasses.replace(cfg, **changes)


@dataclass(frozen=True)
class DerivedParams:
    """Resolved rates plus the quantities computed from them (SI, rad/s).

    This is the single parameter object consumed by the steady-state,
    response, stability and time-domain code.
    """

    omega_phi: float
    omega_m: float
    g_m: float
    Delta_a: float
    kappa_a: float
    kappa_phi: float
    kappa_m: float
    P_c: float
    P_p: float
    moment_of_inertia: float
    g_phi: float
    omega_a: float
    omega_c: float
    eps_c: float
    eps_p: float
    finesse_a: float
    finesse_m: float
    convention: IntensityConvention = IntensityConvention.MODULUS_SQUARED
    config: PhysicalConfig | None = field(default=None, compare=False, repr=False)

    def to_dict(self) -> dict[str, Any]:
        d = {f.name: getattr(self, f.name) for f in dataclasses.fields(self) if f.name != "config"}
        d["convention"] = self.convention.value
        return d


def derive_params(cfg: PhysicalConfig) -> DerivedParams:
    """Validate ``cfg`` and compute every derived quantity.

    Raises
    ------
    ValidationError
        If any configuration invariant fails.
    """
    res = resolve_config(cfg)
    inertia = moment_of_inertia(res.mirror_mass, res.mirror_radius)
    g_phi = optorotational_coupling(res)
    omega_a = TWO_PI * SPEED_OF_LIGHT / res.wavelength
    omega_c = omega_a - res.Delta_a
    # drive amplitudes sqrt(2 kappa_a P / (hbar omega)); the probe uses omega_c
    # as well since delta << omega_c and eps_out does not depend on eps_p
    eps_c = math.sqrt(2.0 * res.kappa_a * res.P_c / (HBAR * omega_c))
    eps_p = math.sqrt(2.0 * res.kappa_a * res.P_p / (HBAR * omega_c))
    return DerivedParams(
        omega_phi=res.omega_phi,
        omega_m=res.omega_m,
        g_m=res.g_m,
        Delta_a=res.Delta_a,
        kappa_a=res.kappa_a,
        kappa_phi=res.kappa_phi,
        kappa_m=res.kappa_m,
        P_c=res.P_c,
        P_p=res.P_p,
        moment_of_inertia=inertia,
        g_phi=g_phi,
        omega_a=omega_a,
        omega_c=omega_c,
        eps_c=eps_c,
        eps_p=eps_p,
        finesse_a=math.pi * SPEED_OF_LIGHT / (res.kappa_a * res.cavity_length),
        finesse_m=res.omega_m / res.kappa_m,
        convention=res.intensity_convention,
        config=res,
    )


# ---------------------------------------------------------------------------
# JSON config files
# ---------------------------------------------------------------------------

def _parse_frequency(name: str, raw) -> Frequency:
    if _is_real(raw):
        return float(raw)
    if not isinstance(raw, dict) or len(raw) != 1:
        raise ValueError(f"{name}: expected a number or a single-key unit object, got {raw!r}")
    (unit, value), = raw.items()
    if not _is_real(value):
        raise ValueError(f"{name}: value must be a finite number, got {value!r}")
    if unit == "hz":
        return TWO_PI * float(value)
    if unit == "rad_per_s":
        return float(value)
    if unit in RATIO_UNITS.get(name, ()):
        return Ratio(float(value), unit[len("ratio_"):])
    raise ValueError(f"{name}: unit {unit!r} not accepted here")


def config_from_dict(data: dict[str, Any]) -> PhysicalConfig:
    """Build a config from a parsed JSON document.

    Missing keys keep their default values; unknown keys are an error.
    """
    unknown = sorted(set(data) - set(FIELD_NAMES))
    if unknown:
        raise ValueError(f"unknown config keys: {', '.join(unknown)}")
    kwargs: dict[str, Any] = {}
    for name, raw in data.items():
        if name in FREQUENCY_FIELDS:
            kwargs[name] = _parse_frequency(name, raw)
        elif name == "intensity_convention":
            kwargs[name] = IntensityConvention(raw)
        else:
            kwargs[name] = raw
    cfg = PhysicalConfig(**kwargs)
    violations = validate_config(cfg)
    if violations:
        raise ValidationError(violations)
    return cfg


def load_config(path: str | Path) -> PhysicalConfig:
    with open(path, encoding="utf-8") as fh:
        data = json.load(fh)
    if not isinstance(data, dict):
        raise ValueError("config file must hold a JSON object")
    return config_from_dict(data)


def config_to_dict(cfg: PhysicalConfig) -> dict[str, Any]:
    """JSON-ready representation that `config_from_dict` reads back."""
    out: dict[str, Any] = {}
    for name in FIELD_NAMES:
        value = getattr(cfg, name)
        if isinstance(value, Ratio):
            out[name] = {f"ratio_{value.reference}": value.value}
        elif name in FREQUENCY_FIELDS:
            out[name] = {"rad_per_s": float(value)}
        elif isinstance(value, IntensityConvention):
            out[name] = value.value
        else:
            out[name] = value
    return out


def config_hash(cfg: PhysicalConfig) -> str:
    """SHA-256 of the resolved config; independent of JSON key order."""
    canonical = json.dumps(config_to_dict(resolve_config(cfg)), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()
