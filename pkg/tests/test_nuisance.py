"""Nuisance fitting: oracles, parametric working models, misspecified modes."""

import numpy as np
import pytest

import survodds as so
from survodds.errors import FitFailureError, InvalidModelError, PositivityViolationError
from survodds.nuisance import NuisanceSet
from survodds.simulate import Dataset


def test_oracle_wraps_truth_objects(s1, s1_nuis):
    assert s1_nuis.odds is s1.model.odds
    assert s1_nuis.censoring is s1.censoring
    assert s1_nuis.propensity is s1.treatment.propensity
    assert s1_nuis.provenance == "oracle"
    assert s1_nuis.validate(s1.treatment.law.support, s1.model.tau)


def test_propensity_fit_recovers_logistic_truth(s1):
    law = so.DiscreteCovariateLaw([[0.0], [1.0]], [0.5, 0.5])
    truth = so.LogisticPropensity(-0.6, np.array([1.2]))
    tm = so.TreatmentModel(truth, law)
    rng = np.random.default_rng(31)
    data = so.generate_dataset(10_000, s1.model, tm, s1.censoring, rng)
    prop, report = so.fit_propensity(data)
    assert report["converged"]
    assert abs(report["intercept"] + 0.6) < 0.15
    assert abs(report["coef"][0] - 1.2) < 0.25
    for z in law.support:
        assert abs(float(prop(z)) - float(truth(z))) < 0.03


def test_propensity_fit_rejects_single_arm(s1_data):
    one_arm = Dataset(s1_data.x, s1_data.delta, np.zeros(len(s1_data), dtype=int), s1_data.z)
    with pytest.raises(PositivityViolationError):
        so.fit_propensity(one_arm)


def test_propensity_predictions_are_clamped():
    # perfectly separated arms drive the weights to the boundary; the fitted
    # object must still return probabilities inside (0, 1)
    z = np.concatenate([np.zeros(80), np.ones(80)])[:, None]
    a = (z[:, 0] > 0).astype(int)
    data = Dataset(np.full(160, 1.0), np.ones(160, dtype=int), a, z)
    with np.errstate(over="ignore"):
        prop, _ = so.fit_propensity(data)
        hi = float(prop(np.array([50.0])))
        lo = float(prop(np.array([-50.0])))
    assert 0.0 < lo <= 1e-6
    assert 1.0 - 1e-6 <= hi < 1.0


def test_odds_fit_recovers_family_parameters(s1):
    rng = np.random.default_rng(7)
    data = so.generate_dataset(8000, s1.model, s1.treatment, s1.censoring, rng)
    odds, beta_pre, report = so.fit_odds_parametric(data)
    p = odds.params()
    assert abs(beta_pre - s1.model.beta) < 0.25
    assert abs(p["alpha"] - 1.0) < 0.2
    assert abs(p["kappa"] - 1.0) < 0.1
    assert abs(p["gamma"][0] - 0.5) < 0.25
    assert not report["kappa_fixed"]


def test_odds_fit_honors_fixed_shape(s1):
    rng = np.random.default_rng(8)
    data = so.generate_dataset(2000, s1.model, s1.treatment, s1.censoring, rng)
    odds, _, report = so.fit_odds_parametric(data, fixed_kappa=1.0)
    assert odds.params()["kappa"] == 1.0
    assert report["kappa_fixed"]


def test_odds_fit_requires_events():
    rng = np.random.default_rng(0)
    n = 150
    data = Dataset(rng.uniform(0.1, 2.0, n), np.zeros(n, dtype=int),
                   rng.integers(0, 2, n), rng.integers(0, 2, n).astype(float)[:, None])
    with pytest.raises(FitFailureError):
        so.fit_odds_parametric(data)


def test_censoring_fit_recovers_rates(s1):
    rng = np.random.default_rng(9)
    data = so.generate_dataset(20_000, s1.model, s1.treatment, s1.censoring, rng)
    cens, report = so.fit_censoring(data, tau=s1.model.tau)
    for arm in (0, 1):
        assert abs(report[f"rate{arm}"] - 0.27) < 0.05
    t = np.linspace(0.0, 2.0, 9)
    np.testing.assert_allclose(
        cens.survival(t, 1, None), np.exp(-report["rate1"] * t), rtol=1e-12
    )


def test_censoring_fit_ignores_administrative_censoring(s1):
    # without random censoring every non-event sits at tau and must not count
    rng = np.random.default_rng(10)
    data = so.generate_dataset(4000, s1.model, s1.treatment, so.NoCensoring(), rng)
    _, report = so.fit_censoring(data, tau=s1.model.tau)
    assert report["rate0"] == 0.0 and report["rate1"] == 0.0


def test_build_nuisances_modes(s1, s1_data):
    oracle = so.build_nuisances(
        "oracle", model=s1.model, censoring=s1.censoring, treatment=s1.treatment
    )
    assert oracle.provenance == "oracle"

    fitted = so.build_nuisances("fitted", data=s1_data, tau=s1.model.tau)
    assert fitted.provenance == "fitted"
    assert fitted.reports["odds"]["model"] == "loglogistic"
    assert fitted.validate(s1.treatment.law.support, s1.model.tau)

    wrong_prop = so.build_nuisances("misspecified-propensity", data=s1_data,
                                    tau=s1.model.tau)
    assert wrong_prop.provenance == "misspecified"
    assert float(wrong_prop.propensity(np.array([1.0]))) == 0.5
    assert not wrong_prop.reports["odds"]["kappa_fixed"]

    wrong_odds = so.build_nuisances("misspecified-odds", data=s1_data, tau=s1.model.tau)
    assert wrong_odds.odds.params()["kappa"] == 1.0
    assert wrong_odds.reports["propensity"]["model"] == "logistic"

    both = so.build_nuisances("misspecified", data=s1_data, tau=s1.model.tau)
    assert both.reports["odds"]["kappa_fixed"]
    assert both.reports["propensity"]["model"] == "constant"

    with pytest.raises(InvalidModelError):
        so.build_nuisances("bogus", data=s1_data)


def test_nuisance_validate_flags_degenerate_propensity(s1):
    bad = NuisanceSet(odds=s1.model.odds, censoring=s1.censoring,
                      propensity=lambda z: 1.0, provenance="oracle")
    with pytest.raises(PositivityViolationError):
        bad.validate(s1.treatment.law.support, s1.model.tau)


def test_no_censoring_survival_is_one(z0):
    nc = so.NoCensoring()
    t = np.linspace(0.0, 5.0, 11)
    np.testing.assert_array_equal(nc.survival(t, 1, z0), np.ones_like(t))
    np.testing.assert_array_equal(nc.cumulative_hazard(t, 0, z0), np.zeros_like(t))
