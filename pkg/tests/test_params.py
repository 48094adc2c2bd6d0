import json
import math

import pytest

from hybridcavity.constants import HBAR, SPEED_OF_LIGHT
from hybridcavity.errors import ValidationError
from hybridcavity.params import (
    IntensityConvention,
    PhysicalConfig,
    Ratio,
    config_from_dict,
    config_hash,
    config_to_dict,
    derive_params,
    load_config,
    resolve_config,
    validate_config,
)

TWO_PI = 2 * math.pi


def test_g_m_over_two_pi_matches_quoted_value(dp):
    assert dp.g_m / TWO_PI == pytest.approx(0.28, abs=0.005)


def test_finesses(dp):
    assert dp.finesse_a == pytest.approx(1e5, rel=0.02)
    assert dp.finesse_m == pytest.approx(1.64e3, rel=0.01)


def test_g_phi_direct_evaluation(dp):
    # independent evaluation: I = m r^2 / 2 with m = 10 mg, r = 10 um
    inertia = 0.5 * 10e-6 * (10e-6) ** 2
    g = SPEED_OF_LIGHT * 200 / 10e-3 * math.sqrt(HBAR / (inertia * TWO_PI * 0.5e6))
    assert dp.g_phi == pytest.approx(g, rel=1e-14)
    assert dp.g_phi / TWO_PI == pytest.approx(0.247257214, rel=1e-8)


def test_g_phi_linear_in_charge(cfg, dp):
    assert derive_params(cfg.replace(topological_charge=400)).g_phi == pytest.approx(2 * dp.g_phi, rel=1e-14)


def test_g_phi_scaling_with_mass_and_radius(cfg, dp):
    assert derive_params(cfg.replace(mirror_mass=4 * cfg.mirror_mass)).g_phi == pytest.approx(dp.g_phi / 2, rel=1e-14)
    assert derive_params(cfg.replace(mirror_radius=2 * cfg.mirror_radius)).g_phi == pytest.approx(dp.g_phi / 2, rel=1e-14)


def test_ratio_fields_resolve(dp):
    assert dp.omega_m == pytest.approx(1.15 * dp.omega_phi, rel=1e-15)
    assert dp.g_m == pytest.approx(1.15 * dp.g_phi, rel=1e-15)
    assert dp.Delta_a == pytest.approx(0.9 * dp.omega_phi, rel=1e-15)


def test_drive_amplitude(dp):
    omega_c = TWO_PI * SPEED_OF_LIGHT / 1064e-9 - dp.Delta_a
    assert dp.eps_c == pytest.approx(math.sqrt(2 * dp.kappa_a * 10e-3 / (HBAR * omega_c)), rel=1e-14)


def test_defaults_validate(cfg):
    assert validate_config(cfg) == []


@pytest.mark.parametrize("field,value", [("mirror_mass", 0.0), ("topological_charge", -3),
                                         ("kappa_a", -1.0), ("wavelength", float("nan"))])
def test_single_violation_named(cfg, field, value):
    v = validate_config(cfg.replace(**{field: value}))
    assert [x.field for x in v] == [field]
    with pytest.raises(ValidationError):
        derive_params(cfg.replace(**{field: value}))


def test_zero_coupling_and_power_allowed(cfg):
    assert validate_config(cfg.replace(g_m=0.0, P_c=0.0)) == []


def test_bad_ratio_reference_rejected(cfg):
    v = validate_config(cfg.replace(kappa_a=Ratio(1.0, "omega_phi")))
    assert [x.field for x in v] == ["kappa_a"]


def test_resolve_is_idempotent(cfg):
    once = resolve_config(cfg)
    assert resolve_config(once) == once
    assert not isinstance(once.omega_m, Ratio)


def test_derive_is_deterministic(cfg, dp):
    again = derive_params(cfg)
    assert again == dp
    assert again.to_dict() == dp.to_dict()


def test_json_round_trip(tmp_path, cfg):
    path = tmp_path / "c.json"
    path.write_text(json.dumps(config_to_dict(cfg)))
    loaded = load_config(path)
    assert derive_params(loaded) == derive_params(cfg)


def test_json_hz_and_missing_keys():
    cfg = config_from_dict({"kappa_a": {"hz": 1.5e5}, "P_c": 1e-3})
    dp = derive_params(cfg)
    assert dp.kappa_a == pytest.approx(TWO_PI * 1.5e5, rel=1e-15)
    assert dp.P_c == 1e-3
    assert dp.omega_phi == PhysicalConfig().omega_phi


def test_json_unknown_key_rejected():
    with pytest.raises(ValueError, match="unknown config keys"):
        config_from_dict({"not_a_field": 1})


def test_json_convention():
    cfg = config_from_dict({"intensity_convention": "LiteralSquare"})
    assert cfg.intensity_convention is IntensityConvention.LITERAL_SQUARE


def test_config_hash_independent_of_key_order(tmp_path, cfg):
    d = config_to_dict(cfg)
    a = config_from_dict(d)
    b = config_from_dict(dict(reversed(list(d.items()))))
    assert config_hash(a) == config_hash(b) == config_hash(cfg)
    assert config_hash(cfg.replace(P_c=2e-3)) != config_hash(cfg)


def test_ratio_and_absolute_hash_equal(cfg, dp):
    assert config_hash(cfg.replace(omega_m=dp.omega_m)) == config_hash(cfg)
