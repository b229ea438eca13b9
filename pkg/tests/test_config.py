from importlib import resources

import pytest
from hypothesis import given, settings, strategies as st

from ramanqd import config
from ramanqd.reproduce import FIGURES
from ramanqd.protocols import NOISE

BASE = """\
[scenario]
name = t
experiment = spin_relaxation
seed = 3

[experiment]
duration = 100.0
step = 10.0
"""


def test_defaults_are_calibrated():
    scn = config.loads(BASE)
    assert scn.noise() == NOISE
    assert scn.seed == 3 and scn.experiment == "spin_relaxation"
    assert scn["experiment"]["duration"] == 100.0


@pytest.mark.parametrize("fig", sorted(set(FIGURES.values())))
def test_bundled_scenarios_roundtrip(fig):
    text = resources.files("ramanqd.scenarios").joinpath(fig).read_text()
    scn = config.loads(text)
    again = config.loads(config.dumps(scn))
    assert again == scn
    assert config.dumps(again) == config.dumps(scn)


def test_unknown_key_reports_line():
    text = BASE + "bogus = 1\n"
    with pytest.raises(config.ScenarioError) as e:
        config.loads(text)
    assert e.value.line == 9 and e.value.key == "bogus"
    assert "line 9" in str(e.value)


def test_unknown_section_and_experiment():
    with pytest.raises(config.ScenarioError, match="unknown section"):
        config.loads(BASE + "[extras]\nx = 1\n")
    with pytest.raises(config.ScenarioError, match="experiment must be"):
        config.loads(BASE.replace("spin_relaxation", "teleport"))
    with pytest.raises(config.ScenarioError, match="missing"):
        config.loads("[noise]\n")


def test_bad_value_names_field():
    text = BASE + "\n[level_system]\nB = lots\n"
    with pytest.raises(config.ScenarioError) as e:
        config.loads(text)
    assert (e.value.section, e.value.key, e.value.line) == ("level_system", "B", 11)


def test_physical_validation_names_field():
    with pytest.raises(config.ScenarioError) as e:
        config.loads(BASE + "\n[level_system]\nbranching = 2.0\n")
    assert e.value.key == "branching"
    with pytest.raises(config.ScenarioError) as e:
        config.loads(BASE + "\n[detection]\nefficiency = 0\n")
    assert e.value.key == "efficiency"


def test_trajectory_budget_checked():
    text = BASE.replace("spin_relaxation", "hbt").replace(
        "duration = 100.0\nstep = 10.0", "n_traj = 500") + "\n[budget]\nmax_trajectories = 100\n"
    with pytest.raises(config.ScenarioError, match="exceeds the budget"):
        config.loads(text)


def test_with_seed_does_not_mutate():
    scn = config.loads(BASE)
    other = scn.with_seed(99)
    assert other.seed == 99 and scn.seed == 3


def test_resolved_parameters_serializable():
    import json
    json.dumps(config.resolved_parameters(config.loads(BASE)))


floats = st.floats(1e-6, 1e6, allow_nan=False)


@settings(max_examples=40, deadline=None)
@given(B=st.floats(0, 10), T=st.floats(0.1, 300), dur=floats, step=floats,
       seed=st.integers(0, 2 ** 64 - 1), sig=st.floats(0, 2), rho=st.floats(-1, 1))
def test_roundtrip_property(B, T, dur, step, seed, sig, rho):
    text = (BASE.replace("seed = 3", f"seed = {seed}")
            .replace("duration = 100.0", f"duration = {dur!r}")
            .replace("step = 10.0", f"step = {step!r}")
            + f"\n[level_system]\nB = {B!r}\nT = {T!r}\n"
            + f"\n[noise]\nsigma_charge_max = {sig!r}\nspin_charge_correlation = {rho!r}\n")
    scn = config.loads(text)
    assert config.loads(scn.to_text()) == scn
    assert scn["level_system"]["B"] == B and scn.noise().spin_charge_correlation == rho
