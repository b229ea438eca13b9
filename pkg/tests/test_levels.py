import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from ramanqd.levels import (build_level_system, boltzmann_ratio, spin_flip_rates,
                            charge_noise_sigma, NoiseParams, ValidationError, decay_channels,
                            TRANSITION_TABLE, UP, DOWN, TRION_UP, TRION_DOWN)

MU_B = 13.996  # GHz/T
K_B = 20.8366  # GHz/K


@pytest.fixture
def ls():
    return build_level_system()


def test_zeeman_splittings_by_hand(ls):
    z = MU_B * 2.8
    assert ls.ground_splitting == pytest.approx(0.41 * z, rel=1e-12)  # 16.07 GHz
    assert ls.ground_splitting == pytest.approx(16.067, abs=1e-3)
    assert ls.trion_splitting == pytest.approx(0.05 * z, rel=1e-12)


def test_transition_frequencies(ls):
    nu = [ls.frequency(k) for k in (1, 2, 3, 4)]
    assert nu == pytest.approx([-9.013, -7.054, 7.054, 9.013], abs=2e-3)
    # the strong lines straddle the weak ones symmetrically
    assert nu[0] + nu[3] == pytest.approx(0, abs=1e-12)
    assert nu[3] - nu[0] == pytest.approx(18.03, abs=0.01)


def test_weak_rate_is_gamma_over_74(ls):
    assert ls.gamma == pytest.approx(ls.Gamma / 74, rel=1e-12)
    assert ls.gamma == pytest.approx(0.04095, abs=1e-5)
    assert ls.transition(1).decay_rate == ls.Gamma
    assert ls.transition(3).decay_rate == ls.gamma


def test_boltzmann_ratio_by_hand(ls):
    expected = math.exp(-0.41 * MU_B * 2.8 / (K_B * 4.2))
    assert boltzmann_ratio(ls) == pytest.approx(expected, rel=1e-12)
    assert boltzmann_ratio(ls) == pytest.approx(0.832, abs=1e-3)


def test_spin_flip_detailed_balance(ls):
    noise = NoiseParams(gamma_flip_up_down=1 / 1.75)
    k_ud, k_du = spin_flip_rates(ls, noise, 0.0)
    assert k_ud == pytest.approx(1e-3 / 1.75)
    assert k_du / k_ud == pytest.approx(boltzmann_ratio(ls))
    assert 1 / (k_ud + k_du) == pytest.approx(955.0, abs=1.0)


def test_nonresonant_flips_add_to_both(ls):
    noise = NoiseParams(gamma_flip_up_down=0.5, kappa_nr_coeff=0.01)
    a0, b0 = spin_flip_rates(ls, noise, 0.0)
    a1, b1 = spin_flip_rates(ls, noise, 2.0)
    assert a1 - a0 == pytest.approx(0.02)
    assert b1 - b0 == pytest.approx(0.02)


def test_charge_noise_saturates():
    noise = NoiseParams(sigma_charge_max=0.3, I_sat_nr=0.05)
    assert charge_noise_sigma(0.0, noise) == 0.0
    assert charge_noise_sigma(0.05, noise) == pytest.approx(0.15)
    assert charge_noise_sigma(1e6, noise) == pytest.approx(0.3, rel=1e-6)
    with pytest.raises(ValidationError):
        charge_noise_sigma(-1.0, noise)


def test_decay_channels_cover_each_trion_twice(ls):
    ch = decay_channels(ls)
    assert len(ch) == 4
    for e in (TRION_UP, TRION_DOWN):
        total = sum(c.rate for c in ch if c.upper == e)
        assert total == pytest.approx(ls.Gamma + ls.gamma)


def test_table_structure():
    assert TRANSITION_TABLE[1][:2] == (UP, TRION_UP)
    assert TRANSITION_TABLE[4][:2] == (DOWN, TRION_DOWN)


@pytest.mark.parametrize("kw,field", [
    ({"branching": 0.0}, "branching"), ({"branching": 1.0}, "branching"),
    ({"Gamma": 0.0}, "Gamma"), ({"B": -1.0}, "B"), ({"T": 0.0}, "T"),
    ({"nonres_intensity": -0.1}, "nonres_intensity"),
])
def test_validation_names_field(kw, field):
    with pytest.raises(ValidationError) as e:
        build_level_system(**kw)
    assert e.value.field == field


def test_noise_validation():
    with pytest.raises(ValidationError):
        NoiseParams(sigma_charge_max=-1)
    with pytest.raises(ValidationError):
        NoiseParams(T2_star_hole=0.0)
    with pytest.raises(ValidationError):
        NoiseParams(spin_charge_correlation=1.5)
    assert NoiseParams(spin_charge_correlation=-0.3).spin_charge_correlation == -0.3


def test_transition_label_checked(ls):
    with pytest.raises(ValidationError):
        ls.transition(5)


def test_serialization_roundtrip(ls):
    d = ls.to_dict()
    assert build_level_system(**d) == ls
    n = NoiseParams(sigma_charge_max=0.2, T2_star_hole=3.0)
    assert NoiseParams(**n.to_dict()) == n


@given(B=st.floats(0.0, 10.0), g_h=st.floats(-1, 1), g_e=st.floats(-1, 1))
def test_splittings_linear_in_field(B, g_h, g_e):
    ls = build_level_system(g_e=g_e, g_h=g_h, B=B)
    assert ls.ground_splitting == pytest.approx(abs(g_h) * MU_B * B, abs=1e-9)
    nu = np.array([ls.frequency(k) for k in (1, 2, 3, 4)])
    # 1 + 4 = 2 + 3 (closed loop) and the spin-preserving pair straddles zero
    assert nu[0] + nu[3] == pytest.approx(nu[1] + nu[2], abs=1e-9)
    assert nu[0] + nu[3] == pytest.approx(0.0, abs=1e-9)


@given(T=st.floats(0.1, 300), B=st.floats(0.0, 10))
def test_boltzmann_ratio_bounds(T, B):
    r = boltzmann_ratio(build_level_system(B=B, T=T))
    assert 0 < r <= 1
