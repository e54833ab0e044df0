from __future__ import annotations

import json

import pytest
from hypothesis import given
from hypothesis import strategies as st

from nlar_lse.config import config_from_dict, parse_config
from nlar_lse.errors import ConfigError

MINIMAL = {"family": "linear_ar", "theta": [0.5], "T": 1000, "replicates": 1, "seed": 1}


def test_defaults(tmp_path):
    p = tmp_path / "c.json"
    p.write_text(json.dumps(MINIMAL))
    cfg = parse_config(p)
    assert cfg.M == 10.0 and cfg.C_phi == 10.0 and cfg.divergence_threshold == 1e12
    assert cfg.omega_min_fraction == 0.5 and cfg.truncate
    assert cfg.model == {"family": "linear_ar", "theta": [0.5]}
    assert cfg.noise == {"family": "standard_normal"}


def test_negative_T():
    with pytest.raises(ConfigError) as ei:
        config_from_dict(dict(MINIMAL, T=-5))
    assert ei.value.field == "T"


def test_round_trip(tmp_path):
    cfg = config_from_dict(MINIMAL)
    p = tmp_path / "c.json"
    p.write_text(cfg.to_json())
    again = parse_config(p)
    assert again == cfg and again.to_json() == cfg.to_json()


@pytest.mark.parametrize("raw, field", [
    (dict(MINIMAL, bogus=1), "bogus"),
    (dict(MINIMAL, expect={"nope": True}), "expect.nope"),
    (dict(MINIMAL, checkpoints={"count": 3, "stride": 2}), "checkpoints.stride"),
    (dict(MINIMAL, M=0), "M"),
    (dict(MINIMAL, replicates=0), "replicates"),
    (dict(MINIMAL, seed=-1), "seed"),
    (dict(MINIMAL, T=1.5), "T"),
    (dict(MINIMAL, truncate="yes"), "truncate"),
    (dict(MINIMAL, theta_0=[1, 2]), "theta_0"),
    (dict(MINIMAL, expect={"recurrence": "Sometimes"}), "expect.recurrence"),
    (dict(MINIMAL, family="nope"), "family"),
    (dict(MINIMAL, theta=[]), "model"),
    (dict(MINIMAL, noise={"family": "cauchy"}), "noise"),
    ({k: v for k, v in MINIMAL.items() if k != "T"}, "T"),
    (dict(MINIMAL, excitation={"E": [[1, 0]], "delta_grid": [0.1]}), "excitation.E"),
    (dict(MINIMAL, excitation={"E": [[-1, 1]], "delta_grid": []}), "excitation.delta_grid"),
])
def test_schema_errors_name_field(raw, field):
    with pytest.raises(ConfigError) as ei:
        config_from_dict(raw)
    assert ei.value.field == field


def test_missing_file(tmp_path):
    with pytest.raises(FileNotFoundError):
        parse_config(tmp_path / "absent.json")


def test_invalid_json(tmp_path):
    p = tmp_path / "c.json"
    p.write_text("{not json")
    with pytest.raises(ConfigError):
        parse_config(p)


def test_nested_model_block_equals_flat():
    nested = {"model": {"family": "linear_ar", "theta": [0.5]}, "T": 1000, "replicates": 1, "seed": 1}
    assert config_from_dict(nested) == config_from_dict(MINIMAL)


def test_flat_and_nested_conflict():
    with pytest.raises(ConfigError):
        config_from_dict(dict(MINIMAL, model={"family": "linear_ar", "theta": [0.5]}))


def test_tar_default_radius():
    cfg = config_from_dict({"family": "tar", "g": "identity", "theta": [0.5, -0.7], "regions": [[-2, 0], [0, 2]],
                            "T": 10, "replicates": 1, "seed": 0})
    assert cfg.C_phi == 3.0


def test_excitation_defaults():
    cfg = config_from_dict(dict(MINIMAL, excitation={"E": [[-1, 1]], "delta_grid": [0.2, 0.1]}))
    ex = cfg.excitation
    assert ex["delta_grid"] == [0.1, 0.2] and ex["box"] == [[-1.0, 1.0]]
    assert ex["samples"] == 20_000 and ex["expect_certified"] is True


def test_overrides():
    cfg = config_from_dict(MINIMAL).with_overrides(seed=9, replicates=4, output="x")
    assert (cfg.seed, cfg.replicates, cfg.output) == (9, 4, "x")


def test_digest_ignores_output():
    a = config_from_dict(MINIMAL)
    assert a.digest() == a.with_overrides(output="elsewhere").digest()
    assert a.digest() != a.with_overrides(seed=2).digest()


@given(
    st.sampled_from([
        {"family": "linear_ar", "theta": [0.5, -0.1]},
        {"family": "exar", "n": 1, "alphas": [0.3], "betas": [0.1], "gamma": 2.0},
        {"family": "tar", "g": "square", "theta": [0.2], "regions": [[0, 1]]},
        {"family": "separable", "bases": [["identity", "sin"]], "theta": [0.1, 0.2]},
    ]),
    st.integers(1, 10**6), st.integers(1, 50), st.integers(0, 2**64 - 1),
    st.floats(0.1, 100), st.booleans(), st.floats(0, 1),
)
def test_round_trip_property(model, T, reps, seed, M, trunc, omega):
    raw = {"model": model, "T": T, "replicates": reps, "seed": seed, "M": M, "truncate": trunc,
           "omega_min_fraction": omega}
    cfg = config_from_dict(raw)
    again = config_from_dict(json.loads(cfg.to_json()))
    assert again == cfg
