"""Magneto-optical dielectric correction and photon-magnon overlap coefficients.

The linear-in-M correction to the dielectric tensor of a cubic magnet with
M_0 along z acts on a field as eps_1 E = i f (M x E).  The electromagnetic
energy density E.D/2 therefore couples optical modes p, q to a magnon mode
w through the vector (i/2)(u_p* x u_q), and the coupling coefficient is

    G_pq = (calG M_s / 2) * integral_V  w . [(i/2) (u_p* x u_q)] d^3r.

With plane-wave modes and the circular labels used here (LCP = (x - i y)/sqrt2,
RCP = (x + i y)/sqrt2) this gives G_{LCP,LCP} = +calG M_s w0 V / 4 and
G_{RCP,RCP} = -calG M_s w0 V / 4, while equal linear polarisations decouple.
The (i/2) prefactor also makes G Hermitian in (p, q).
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import QuadratureWarning

SQRT_HALF = 1.0 / math.sqrt(2.0)
_POLARISATIONS = {
    "TE": np.array([1.0, 0.0, 0.0], dtype=complex),
    "TM": np.array([0.0, 1.0, 0.0], dtype=complex),
    "LCP": np.array([SQRT_HALF, -1j * SQRT_HALF, 0.0]),
    "RCP": np.array([SQRT_HALF, 1j * SQRT_HALF, 0.0]),
}
MODE_LABELS = tuple(_POLARISATIONS)


@dataclass(frozen=True)
class DielectricCorrection:
    matrix: np.ndarray
    f: float
    M_s: float
    M_x: float
    M_y: float

    def is_hermitian(self) -> bool:
        return bool(np.array_equal(self.matrix, self.matrix.conj().T))


def epsilon1(f: float, M_s: float, M_x: float, M_y: float) -> DielectricCorrection:
    """First-order magneto-optical correction to the dielectric tensor."""
    m = np.array(
        [
            [0.0, -1j * f * M_s, 1j * f * M_y],
            [1j * f * M_s, 0.0, -1j * f * M_x],
            [-1j * f * M_y, 1j * f * M_x, 0.0],
        ],
        dtype=complex,
    )
    return DielectricCorrection(m, f, M_s, M_x, M_y)


@dataclass(frozen=True)
class OpticalMode:
    """Plane-wave cavity mode ``polarization * exp(i k_z z)``."""

    polarization: np.ndarray
    k_z: float
    volume: float
    label: str

    def field(self, r: np.ndarray) -> np.ndarray:
        """Mode function at points ``r`` of shape (..., 3)."""
        z = np.asarray(r)[..., 2]
        return np.exp(1j * self.k_z * z)[..., None] * self.polarization


def optical_mode(label: str, k_z: float = 0.0, volume: float = 1.0) -> OpticalMode:
    try:
        pol = _POLARISATIONS[label]
    except KeyError:
        raise ValueError(f"unknown mode label {label!r}; expected one of {MODE_LABELS}") from None
    return OpticalMode(pol.copy(), float(k_z), float(volume), label)


@dataclass(frozen=True)
class MagnonMode:
    """Spatially uniform (Kittel) magnon mode of amplitude ``w0``."""

    direction: np.ndarray = field(default_factory=lambda: np.array([0.0, 0.0, 1.0]))
    w0: float = 1.0

    def __post_init__(self):
        n = np.linalg.norm(self.direction)
        if not math.isclose(n, 1.0, rel_tol=1e-12):
            raise ValueError("magnon direction must be a unit vector")

    def field(self, r: np.ndarray) -> np.ndarray:
        shape = np.shape(r)[:-1]
        return np.broadcast_to(self.w0 * np.asarray(self.direction, dtype=float), shape + (3,))


def _cell_centres(n: int, length: float) -> np.ndarray:
    return (np.arange(n) + 0.5) * (length / n)


def overlap_G(p: OpticalMode, q: OpticalMode, w: MagnonMode, coupling: float, M_s: float,
              box: Sequence[float] | None = None, cells: int = 32) -> complex:
    """Photon-magnon coupling coefficient by product midpoint quadrature.

    ``box`` gives the edge lengths of the rectangular integration volume and
    defaults to a cube of the optical mode volume.  The integrand is evaluated
    at every cell centre and summed with numpy's pairwise reduction over a
    fixed cell order, so the result is deterministic.

    A `QuadratureWarning` is issued when the two modes carry different k_z and
    the integrand is therefore not z-uniform.
    """
    if cells < 32:
        raise ValueError("at least 32 cells per axis are required")
    if box is None:
        side = p.volume ** (1.0 / 3.0)
        box = (side, side, side)
    lx, ly, lz = (float(b) for b in box)
    volume = lx * ly * lz
    cell_volume = volume / cells**3

    grid = np.stack(
        np.meshgrid(_cell_centres(cells, lx), _cell_centres(cells, ly), _cell_centres(cells, lz),
                    indexing="ij"),
        axis=-1,
    ).reshape(-1, 3)
    cross = np.cross(np.conj(p.field(grid)), q.field(grid))
    integrand = 0.5j * np.einsum("ij,ij->i", w.field(grid), cross)
    if p.k_z != q.k_z:
        osc = float(np.abs(integrand - integrand.mean()).max())
        warnings.warn(
            f"mode k_z mismatch ({p.k_z:g} vs {q.k_z:g}); residual oscillatory "
            f"magnitude {osc:.3g}",
            QuadratureWarning,
            stacklevel=2,
        )
    return complex(0.5 * coupling * M_s * integrand.sum() * cell_volume)


def selection_rule_table(coupling: float = 1.0, M_s: float = 1.0, w0: float = 1.0,
                         volume: float = 1.0, k_z: float = 0.0, cells: int = 32) -> dict[tuple[str, str], complex]:
    """G for every ordered pair of {TE, TM, LCP, RCP}."""
    magnon = MagnonMode(w0=w0)
    modes = {label: optical_mode(label, k_z, volume) for label in MODE_LABELS}
    return {
        (a, b): overlap_G(modes[a], modes[b], magnon, coupling, M_s, cells=cells)
        for a in MODE_LABELS
        for b in MODE_LABELS
    }


def kittel_frequency(H: float, gamma: float) -> float:
    """omega_m = gamma H for the Kittel mode (H in A/m, gamma in rad/s per A/m)."""
    if H < 0:
        raise ValueError("bias field must be non-negative")
    return gamma * H


def kittel_field(omega_m: float, gamma: float) -> float:
    """Bias field that puts the Kittel mode at ``omega_m``."""
    return omega_m / gamma
