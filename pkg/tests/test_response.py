import dataclasses
import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hybridcavity.errors import GridPointError, PoleError
from hybridcavity.params import IntensityConvention, Ratio, derive_params
from hybridcavity.response import (
    a_minus_closed,
    a_plus_closed,
    backaction_kernel,
    backaction_kernel_derivative,
    compute_spectrum,
    default_delta_grid,
    fluctuation_linear_solve,
    group_delay_analytic,
    group_delay_fd,
    output_field,
    response_point,
    transmission,
)
from hybridcavity.stability import check_stability
from hybridcavity.steady_state import solve_steady_state

from .conftest import solved
from .oracles import absorption_minima, rotation_only_a_minus, rotation_only_steady


def decoupled(dp):
    return dataclasses.replace(dp, g_phi=0.0, g_m=0.0)


def test_kernel_vanishes_without_coupling(dp, steady):
    assert backaction_kernel(dp.omega_phi, steady, decoupled(dp)) == 0


def test_kernel_static_limit(dp, steady):
    lossless = dataclasses.replace(dp, kappa_phi=0.0, kappa_m=0.0)
    S = steady.n_cav
    expected = 1j * S * (dp.g_phi**2 / dp.omega_phi + 2 * dp.g_m**2 / dp.omega_m)
    assert backaction_kernel(0.0, steady, lossless) == pytest.approx(expected, rel=1e-14)


def test_kernel_on_rotational_resonance(dp, steady):
    F = backaction_kernel(dp.omega_phi, steady, dp)
    rot = 1j * steady.n_cav * dp.g_phi**2 * dp.omega_phi / (-1j * dp.kappa_phi * dp.omega_phi)
    assert abs(rot) == pytest.approx(dp.g_phi**2 * steady.n_cav / dp.kappa_phi, rel=1e-14)
    assert abs(F - rot) < 0.01 * abs(rot)


def test_kernel_derivative_matches_difference(dp, steady):
    d = 1.07 * dp.omega_phi
    h = 1e-2
    fd = (backaction_kernel(d + h, steady, dp) - backaction_kernel(d - h, steady, dp)) / (2 * h)
    assert backaction_kernel_derivative(d, steady, dp) == pytest.approx(fd, rel=1e-7)


def test_kernel_pole_raises(dp, steady):
    lossless = dataclasses.replace(dp, kappa_phi=0.0)
    with pytest.raises(PoleError):
        backaction_kernel(dp.omega_phi, steady, lossless)


def test_bare_cavity_lorentzian(dp, steady):
    bare = decoupled(dp)
    delta = np.linspace(0.5, 1.5, 101) * dp.omega_phi
    ref = 1 / (dp.kappa_a + 1j * (steady.Delta_eff - delta))
    np.testing.assert_allclose(a_minus_closed(delta, steady, bare), ref, rtol=1e-12)
    solve = fluctuation_linear_solve(delta, steady, bare).A_minus / dp.eps_p
    np.testing.assert_allclose(solve, ref, rtol=1e-12)


def test_phi_vanishes_without_rotational_coupling(dp, steady):
    amps = fluctuation_linear_solve(np.array([0.9, 1.0, 1.1]) * dp.omega_phi, steady,
                                    dataclasses.replace(dp, g_phi=0.0))
    assert np.all(amps.Phi == 0)


def test_closed_form_matches_resolvent_on_1001_points(dp, steady):
    grid = default_delta_grid(dp, 0.5, 1.5, 1001)
    closed = a_minus_closed(grid, steady, dp)
    direct = fluctuation_linear_solve(grid, steady, dp)
    assert np.max(np.abs(closed - direct.A_minus / dp.eps_p) / np.abs(closed)) < 1e-8
    plus = a_plus_closed(grid, steady, dp)
    assert np.max(np.abs(plus - direct.A_plus / dp.eps_p) / np.abs(plus)) < 1e-8


@settings(max_examples=25, deadline=None)
@given(p=st.floats(0.3e-3, 15e-3), gm=st.floats(0.0, 3.0), wm=st.floats(1.05, 1.4),
       da=st.floats(0.5, 1.5), x=st.floats(0.6, 1.5),
       conv=st.sampled_from(list(IntensityConvention)))
def test_closed_form_matches_resolvent_property(cfg, p, gm, wm, da, x, conv):
    c = cfg.replace(P_c=p, g_m=Ratio(gm, "g_phi"), omega_m=Ratio(wm, "omega_phi"),
                    Delta_a=Ratio(da, "omega_phi"), intensity_convention=conv)
    dp, steady = solved(c)
    if conv is IntensityConvention.LITERAL_SQUARE:
        # the literal a_s^2 kernel is not a linearisation of the drift matrix
        return
    if not check_stability(steady, dp).stable:
        return
    d = x * dp.omega_phi
    closed = a_minus_closed(d, steady, dp)
    direct = fluctuation_linear_solve(d, steady, dp).A_minus / dp.eps_p
    assert abs(closed - direct) <= 1e-8 * abs(direct)


def test_rotation_only_degeneration(cfg):
    dp = derive_params(cfg.replace(g_m=0.0))
    steady = solve_steady_state(dp)
    Delta, a = rotation_only_steady(dp)
    grid = default_delta_grid(dp)
    ref = rotation_only_a_minus(grid, dp, Delta, a)
    got = compute_spectrum(grid, steady, dp).A_minus
    assert np.max(np.abs(got - ref) / np.abs(ref)) < 1e-12


def test_probe_power_invariance_bitwise(cfg):
    grid = None
    out = []
    for p in (1e-6, 1e-5):
        dp = derive_params(cfg.replace(P_p=p))
        steady = solve_steady_state(dp)
        grid = default_delta_grid(dp) if grid is None else grid
        s = compute_spectrum(grid, steady, dp)
        out.append((s.eps_out.tobytes(), s.tau_g.tobytes()))
    assert out[0] == out[1]


def test_resolvent_scales_with_probe(cfg):
    d1, s1 = solved(cfg)
    d2, s2 = solved(cfg.replace(P_p=4 * cfg.P_p))
    x = 1.02 * d1.omega_phi
    a1 = fluctuation_linear_solve(x, s1, d1).A_minus
    a2 = fluctuation_linear_solve(x, s2, d2).A_minus
    assert a2 == pytest.approx(2 * a1, rel=1e-12)


def test_absorption_minima_at_both_resonances(dp, steady):
    grid = default_delta_grid(dp, 0.8, 1.3, 2001)
    s = compute_spectrum(grid, steady, dp)
    mins, _ = absorption_minima(grid / dp.omega_phi, s.eps_out.real, 2)
    assert mins[0] == pytest.approx(1.00, abs=0.01)
    assert mins[1] == pytest.approx(1.15, abs=0.01)


def test_single_dip_without_magnon(cfg):
    dp, steady = solved(cfg.replace(g_m=0.0))
    grid = default_delta_grid(dp, 0.8, 1.3, 2001)
    s = compute_spectrum(grid, steady, dp)
    mins, prom = absorption_minima(grid / dp.omega_phi, s.eps_out.real, 5)
    deep = mins[prom > 1e-3]
    assert deep.size == 1 and deep[0] == pytest.approx(1.0, abs=0.01)


def test_dispersion_changes_sign_in_each_window(dp, steady):
    for centre in (dp.omega_phi, dp.omega_m):
        grid = np.linspace(centre - 10 * dp.kappa_m, centre + 10 * dp.kappa_m, 801)
        im = output_field(grid, steady, dp).imag
        assert np.any(np.sign(im[:-1]) != np.sign(im[1:]))


def test_phase_unwrap_consistency(dp, steady):
    s = compute_spectrum(default_delta_grid(dp), steady, dp)
    jumps = np.diff(s.phi_t)
    assert np.all(np.abs(jumps) < np.pi)
    assert np.sum(jumps) == pytest.approx(s.phi_t[-1] - s.phi_t[0], abs=1e-9)


def test_spectrum_point_matches_single_evaluation(dp, steady):
    grid = default_delta_grid(dp, 0.9, 1.2, 31)
    s = compute_spectrum(grid, steady, dp)
    p = response_point(grid[7], steady, dp)
    # array and scalar numpy paths may differ in the last bit
    assert s.point(7).A_minus == pytest.approx(p.A_minus, rel=1e-14)
    assert s.point(7).tau_g == pytest.approx(p.tau_g, rel=1e-13)
    assert len(s.points) == 31


def test_spectrum_rejects_unsorted_grid(dp, steady):
    with pytest.raises(ValueError):
        compute_spectrum(np.array([2.0, 1.0]) * dp.omega_phi, steady, dp)


def test_spectrum_reports_failing_index(dp, steady):
    lossless = dataclasses.replace(dp, kappa_phi=0.0)
    grid = np.array([0.9, 1.0, 1.1]) * dp.omega_phi
    with pytest.raises(GridPointError) as info:
        compute_spectrum(grid, steady, lossless)
    assert info.value.index == 1


def test_bare_cavity_delay_matches_difference(dp, steady):
    bare = decoupled(dp)
    d = steady.Delta_eff
    tau = group_delay_analytic(d, steady, bare)
    assert group_delay_fd(d, steady, bare, 1.0) == pytest.approx(tau, rel=1e-6)


def test_delay_matches_difference_across_spectrum(dp, steady):
    grid = default_delta_grid(dp, 0.5, 1.5, 401)
    tau = group_delay_analytic(grid, steady, dp)
    fd = group_delay_fd(grid, steady, dp, 1.0)
    assert np.max(np.abs(fd - tau) / np.abs(tau)) < 1e-6


def test_difference_error_quarters_with_step(dp, steady):
    d = dp.omega_phi + 0.5 * dp.kappa_m
    tau = group_delay_analytic(d, steady, dp)
    errs = [abs(group_delay_fd(d, steady, dp, h) - tau) for h in (200.0, 100.0, 50.0, 25.0)]
    ratios = np.array(errs[:-1]) / np.array(errs[1:])
    assert np.all((ratios > 3.5) & (ratios < 4.5)), ratios


def test_flat_phase_far_from_resonance(dp, steady):
    assert abs(group_delay_analytic(3 * dp.omega_phi, steady, dp)) < 1e-6


def test_transmission_definition(dp, steady):
    d = 1.1 * dp.omega_phi
    assert transmission(d, steady, dp) == 1 - 2 * dp.kappa_a * a_minus_closed(d, steady, dp)


def test_literal_square_changes_response(cfg):
    d1, s1 = solved(cfg)
    d2, s2 = solved(cfg.replace(intensity_convention=IntensityConvention.LITERAL_SQUARE))
    x = 1.001 * d1.omega_phi
    assert backaction_kernel(x, s2, d2) == pytest.approx(
        backaction_kernel(x, s1, d1) * s1.a_s**2 / abs(s1.a_s) ** 2, rel=1e-12)
