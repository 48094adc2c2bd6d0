import math

import numpy as np
import pytest
from scipy import ndimage
from scipy.optimize import minimize_scalar

from hybridcavity.params import Ratio
from hybridcavity.response import group_delay_analytic, transmission
from hybridcavity.sweep import (
    UNSTABLE,
    Axis,
    RegimeWindow,
    axis_value,
    delay_map,
    extremal_delay,
    extremal_profile,
    find_conversions,
    phase_diagram,
    regime_windows,
)

from .conftest import solved

# sign changes of the dominant extremal delay along P_c at defaults
# (ModulusSquared), located by bisecting `spike_sign`
P_C_ROTATION_CONVERSION_MW = 0.8192039
P_C_MAGNON_CONVERSION_MW = 0.9354573


def spike_sign(cfg, regime, n=100001):
    """tau_g at the deepest |t_p| minimum of the window.

    Around a conversion the dominant extremum is the spike from a zero of t_p
    crossing the real axis; its sign flips exactly at the crossing.  Found by
    brute-force scan plus bounded minimisation, independent of the sweep code.
    """
    dp, steady = solved(cfg)
    centre = dp.omega_phi if regime == "rotation" else dp.omega_m
    hw = min(0.04 * dp.omega_phi, abs(dp.omega_m - dp.omega_phi) / 2)
    grid = np.linspace(centre - hw, centre + hw, n)
    i = int(np.argmin(np.abs(transmission(grid, steady, dp))))
    res = minimize_scalar(lambda d: abs(transmission(d, steady, dp)), bounds=(grid[i - 1], grid[i + 1]),
                          method="bounded", options={"xatol": 1e-9})
    return group_delay_analytic(res.x, steady, dp)


def test_default_windows(dp):
    rot, mag = regime_windows(dp)
    assert rot.center == dp.omega_phi and mag.center == dp.omega_m
    assert rot.half_width == pytest.approx(0.04 * dp.omega_phi)
    assert rot.hi < mag.lo


def test_windows_shrink_to_abut(dp):
    rot, mag = regime_windows(dp, half_width=0.2 * dp.omega_phi)
    assert rot.hi == pytest.approx(mag.lo, rel=1e-15)


def test_window_validation(dp, cfg):
    with pytest.raises(ValueError):
        RegimeWindow(1.0, 0.0, "rotation")
    with pytest.raises(ValueError):
        RegimeWindow(1.0, 1.0, "phonon")
    dp1, _ = solved(cfg.replace(omega_m=Ratio(1.0, "omega_phi")))
    with pytest.raises(ValueError):
        regime_windows(dp1)


def test_extremal_delay_requires_dense_grid(dp, steady):
    with pytest.raises(ValueError):
        extremal_delay(regime_windows(dp)[0], steady, dp, n_coarse=100)


def test_refinement_never_worse_and_converged(dp, steady):
    for w in regime_windows(dp):
        coarse = extremal_delay(w, steady, dp, refine=False)
        fine = extremal_delay(w, steady, dp)
        doubled = extremal_delay(w, steady, dp, n_coarse=1602)
        assert fine.tau_max >= coarse.tau_max and fine.tau_min <= coarse.tau_min
        assert fine.tau_max == pytest.approx(doubled.tau_max, rel=1e-3)
        assert fine.tau_min == pytest.approx(doubled.tau_min, rel=1e-3)
        assert w.lo <= fine.delta_at_max <= w.hi
        assert group_delay_analytic(fine.delta_at_max, steady, dp) == pytest.approx(fine.tau_max, rel=1e-12)


def test_no_magnon_feature_without_coupling(cfg):
    dp, steady = solved(cfg.replace(g_m=0.0))
    e = extremal_delay(regime_windows(dp)[1], steady, dp)
    # only the smooth cavity background remains (about 1/kappa_a)
    assert e.tau_max - e.tau_min < 1e-6
    assert max(abs(e.tau_max), abs(e.tau_min)) < 2 / dp.kappa_a


def test_axis_units():
    assert axis_value("mW", 2.0) == pytest.approx(2e-3)
    assert axis_value("kHz", 1.0) == pytest.approx(2 * math.pi * 1e3)
    assert axis_value("ratio_g_phi", 0.9) == Ratio(0.9, "g_phi")
    with pytest.raises(ValueError):
        axis_value("furlong", 1.0)
    with pytest.raises(ValueError):
        Axis("not_a_field", np.array([1.0]))


def test_delay_map_masks_unstable_rows(cfg, dp):
    axis = Axis("g_m", np.array([1.0, 5.0, 6.0]), "ratio_g_phi")
    delta = np.linspace(0.9, 1.3, 41) * dp.omega_phi
    dm = delay_map(cfg, axis, delta)
    assert dm.tau.shape == (3, 41) == dm.reason.shape
    assert list(dm.reason[:, 0]) == ["", "", UNSTABLE]
    assert np.all(np.isnan(dm.tau[2])) and np.all(np.isfinite(dm.tau[:2]))
    assert np.array_equal(dm.mask, np.isnan(dm.tau))


def test_delay_map_independent_of_workers(cfg, dp):
    axis = Axis.linspace("P_c", 0.5, 2.0, 6, "mW")
    delta = np.linspace(0.95, 1.2, 51) * dp.omega_phi
    a = delay_map(cfg, axis, delta, workers=1)
    b = delay_map(cfg, axis, delta, workers=3)
    assert a.tau.tobytes() == b.tau.tobytes()


def test_monotone_axis_has_no_conversion(cfg):
    axis = Axis.linspace("P_c", 5.0, 10.0, 21, "mW")
    assert find_conversions(cfg, axis, "rotation") == []
    assert find_conversions(cfg, axis, "magnon") == []


@pytest.mark.parametrize("regime,expected", [("rotation", P_C_ROTATION_CONVERSION_MW),
                                             ("magnon", P_C_MAGNON_CONVERSION_MW)])
def test_power_conversion_brackets_sign_change(cfg, regime, expected):
    axis = Axis.linspace("P_c", 0.5, 2.0, 61, "mW")
    tol = 1e-6
    found = find_conversions(cfg, axis, regime, tol=tol)
    assert len(found) == 1
    c = found[0]
    assert c.refined and c.regime == regime and c.direction == "fast->slow"
    assert c.value == pytest.approx(expected, abs=2e-6)
    below = spike_sign(cfg.replace(P_c=(c.value - 2 * tol) * 1e-3), regime)
    above = spike_sign(cfg.replace(P_c=(c.value + 2 * tol) * 1e-3), regime)
    assert below < 0 < above


def test_conversion_across_masked_cells_is_unrefined(cfg):
    # the default branch is unstable at 5.6-5.9 g_phi and stable again beyond
    axis = Axis(name="g_m", values=np.array([5.5, 5.6, 5.9]), unit="ratio_g_phi")
    prof = extremal_profile(cfg, axis)
    assert prof.reason[1] == UNSTABLE
    for c in find_conversions(cfg, axis, "rotation", profile=prof):
        assert not c.refined


def test_rotation_delay_insensitive_to_magnon_frequency(cfg):
    axis = Axis.linspace("omega_m", 1.14, 1.2, 7, "ratio_omega_phi")
    r = extremal_profile(cfg, axis).rotation_max
    assert (r.max() - r.min()) / r.mean() < 0.05


@pytest.fixture(scope="module")
def diagram():
    from hybridcavity.params import PhysicalConfig
    return phase_diagram(PhysicalConfig(), Axis.linspace("g_m", 4.5, 6.5, 11, "ratio_g_phi"),
                         Axis.linspace("omega_m", 1.05, 1.5, 10, "ratio_omega_phi"), workers=2)


def test_phase_diagram_extrema_ordered(diagram):
    ok = diagram.stable
    assert np.all(diagram.rotation_max[ok] >= diagram.rotation_min[ok])
    assert np.all(diagram.magnon_max[ok] >= diagram.magnon_min[ok])
    assert np.all(np.isnan(diagram.rotation_max[~ok]))
    assert set(diagram.reason[~ok]) <= {UNSTABLE}


def test_phase_diagram_single_sign_boundary(diagram):
    hi, lo = diagram.rotation_max, diagram.rotation_min
    signal = np.where(np.abs(hi) >= np.abs(lo), hi, lo)
    ok = diagram.stable
    fast = ok & (signal < 0)
    slow = ok & (signal > 0)
    assert fast.any() and slow.any()
    assert ndimage.label(fast)[1] == 1
    assert ndimage.label(slow)[1] == 1


def test_phase_diagram_axes_checked(cfg):
    with pytest.raises(ValueError):
        phase_diagram(cfg, Axis.linspace("P_c", 1, 2, 2, "mW"), Axis.linspace("omega_m", 1.1, 1.2, 2))
