"""Inverse-transform sampling and the dataset container."""

import numpy as np
import pytest

import survodds as so
from survodds.errors import InvalidModelError
from survodds.simulate import Dataset, Observation


def test_sample_event_time_hand_inversion(unit_model, z0):
    # S(t | a=1) = u solves t = e^beta (1 - u) / u with R(t) = t.
    t = so.sample_event_time(2.0 / 3.0, 1, z0, unit_model, cap_at_tau=False)
    assert t == pytest.approx(1.0, rel=1e-15)
    t = so.sample_event_time(1.0 / 3.0, 1, z0, unit_model, cap_at_tau=False)
    assert t == pytest.approx(4.0, rel=1e-15)
    assert so.sample_event_time(1.0 / 3.0, 1, z0, unit_model) == unit_model.tau


def test_sample_event_time_limits_and_monotonicity(unit_model, z0):
    assert so.sample_event_time(1.0 - 1e-12, 0, z0, unit_model) < 1e-10
    u = np.linspace(0.01, 0.99, 25)
    t = so.sample_event_time(u, 0, z0, unit_model, cap_at_tau=False)
    assert np.all(np.diff(t) < 0)


def test_sample_event_time_rejects_boundary_u(unit_model, z0):
    for u in (0.0, 1.0, -0.1, 1.1):
        with pytest.raises(InvalidModelError):
            so.sample_event_time(u, 0, z0, unit_model)


def test_sampled_survival_matches_analytic(unit_model, z0):
    rng = np.random.default_rng(77)
    n = 20_000
    u = rng.random(n)
    t = so.sample_event_time(np.clip(u, 1e-12, 1 - 1e-12), 1, z0, unit_model,
                             cap_at_tau=False)
    p_hat = float(np.mean(t > 1.0))
    p = float(so.survival(1.0, 1, z0, unit_model))
    assert abs(p_hat - p) <= 4.0 * np.sqrt(p * (1 - p) / n)


def test_generate_dataset_composition(s1):
    rng = np.random.default_rng(11)
    data = so.generate_dataset(3000, s1.model, s1.treatment, s1.censoring, rng)
    assert len(data) == 3000
    assert np.all(data.x <= s1.model.tau)
    assert np.isin(data.delta, (0, 1)).all() and np.isin(data.a, (0, 1)).all()
    # events cannot sit at the horizon: follow-up is truncated there first
    assert np.all(data.x[data.delta == 1] < s1.model.tau)
    assert 0.4 < float(np.mean(data.a)) < 0.6
    assert float(np.mean(data.delta)) > 0.3


def test_generate_dataset_no_censoring_pins_survivors_at_tau(s1):
    rng = np.random.default_rng(12)
    data = so.generate_dataset(500, s1.model, s1.treatment, so.NoCensoring(), rng)
    survivors = data.delta == 0
    assert survivors.any()
    assert np.all(data.x[survivors] == s1.model.tau)


def test_csv_round_trip_is_exact(tmp_path, s1_data):
    path = tmp_path / "data.csv"
    s1_data.to_csv(path)
    back = Dataset.from_csv(path)
    np.testing.assert_array_equal(back.x, s1_data.x)
    np.testing.assert_array_equal(back.delta, s1_data.delta)
    np.testing.assert_array_equal(back.a, s1_data.a)
    np.testing.assert_array_equal(back.z, s1_data.z)
    assert back.delta.dtype == np.int64


def test_from_csv_rejects_foreign_header(tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text("time,event,arm\n1.0,1,0\n")
    with pytest.raises(InvalidModelError):
        Dataset.from_csv(path)


def test_dataset_validation():
    with pytest.raises(InvalidModelError):
        Dataset([1.0, 2.0], [1], [0, 1], [[0.0], [0.0]])
    with pytest.raises(InvalidModelError):
        Dataset([-1.0], [1], [0], [[0.0]])
    with pytest.raises(InvalidModelError):
        Dataset([1.0], [2], [0], [[0.0]])
    with pytest.raises(InvalidModelError):
        Dataset.from_observations([])


def test_observation_validation(z0):
    with pytest.raises(InvalidModelError):
        Observation(x=np.inf, delta=0, a=0, z=z0)
    with pytest.raises(InvalidModelError):
        Observation(x=1.0, delta=0, a=2, z=z0)


def test_profiles_reconstructs_rows(s1_data):
    uniq, inverse = s1_data.profiles()
    np.testing.assert_array_equal(uniq[inverse], s1_data.z)
    assert uniq.shape[0] == 2
