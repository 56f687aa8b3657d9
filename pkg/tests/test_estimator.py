"""Score evaluation, root finding, and the sandwich variance."""

import numpy as np
import pytest

import survodds as so
from survodds.errors import (
    FlatScoreError,
    HorizonError,
    NoRootError,
    NonIdentifiedError,
    SingularityError,
)
from survodds.estimator import ScoreEngine, bracketed_root
from survodds.simulate import Dataset, Observation


def _zero_index(grid):
    zeros = np.zeros_like(grid.points)
    return so.H0Solution(grid=grid, z=np.array([0.0]), h0=zeros, dh0=zeros,
                         memory=zeros, residual_profile=zeros, residual=0.0)


def test_integrand_with_zero_index_is_minus_a(s1, s1_nuis, grid600):
    zero = _zero_index(grid600)
    for a in (0, 1):
        obs = Observation(x=1.0, delta=1, a=a, z=np.array([1.0]))
        val = so.efficient_integrand(0.8, obs, s1.model.beta, s1_nuis, zero)
        assert val == pytest.approx(-float(a), abs=1e-15)


def test_integrand_raises_below_density_floor(grid600, z0):
    nuis = so.oracle_nuisances(
        so.OddsModel(0.0, so.LogLogisticOdds(1.0, 2.0), 2.0),
        so.NoCensoring(),
        so.TreatmentModel(so.ConstantPropensity(0.5),
                          so.DiscreteCovariateLaw([[0.0]], [1.0])),
    )
    obs = Observation(x=1.0, delta=1, a=0, z=z0)
    with pytest.raises(SingularityError):
        so.efficient_integrand(0.0, obs, 0.0, nuis, _zero_index(grid600))


def test_efficient_score_with_zero_index_reduces_to_naive(s1, s1_nuis, s1_data):
    grid = so.make_grid(s1.model.tau, 2000)
    zero = _zero_index(grid)
    worst = 0.0
    for obs in s1_data:
        eff = so.efficient_score(obs, s1.model.beta, s1_nuis, zero, grid)
        nai = so.naive_score(obs, s1.model.beta, s1.model.odds)
        worst = max(worst, abs(eff - nai))
    assert worst <= 1e-6


def test_efficient_score_rejects_times_beyond_grid(s1, s1_nuis, grid600, z0):
    obs = Observation(x=grid600.tau + 0.5, delta=0, a=0, z=z0)
    with pytest.raises(HorizonError):
        so.efficient_score(obs, s1.model.beta, s1_nuis, _zero_index(grid600), grid600)
    data = Dataset([grid600.tau + 0.5], [0], [0], [[0.0]])
    with pytest.raises(HorizonError):
        ScoreEngine(data, s1_nuis, grid600, "naive")


def test_score_engine_kind_validation_and_cache(s1, s1_nuis, s1_data, grid600):
    with pytest.raises(ValueError):
        ScoreEngine(s1_data, s1_nuis, grid600, "banana")
    eng = ScoreEngine(s1_data, s1_nuis, grid600, "efficient")
    first = eng.scores(s1.model.beta)
    assert eng.scores(s1.model.beta) is first


def test_score_engine_naive_matches_per_observation(s1, s1_nuis, s1_data, grid600):
    eng = ScoreEngine(s1_data, s1_nuis, grid600, "naive")
    batch = eng.scores(s1.model.beta)
    loop = np.array([so.naive_score(o, s1.model.beta, s1.model.odds) for o in s1_data])
    np.testing.assert_allclose(batch, loop, rtol=0, atol=1e-14)
    assert eng.score_sum(s1.model.beta) == pytest.approx(float(loop.sum()), rel=1e-12)


def test_bracketed_root_basics():
    root, iters, f_root = bracketed_root(lambda x: x**3 - 2.0, 0.0, 2.0)
    assert root == pytest.approx(2.0 ** (1.0 / 3.0), abs=1e-9)
    assert abs(f_root) < 1e-8
    assert iters > 0
    root, iters, _ = bracketed_root(lambda x: x, 0.0, 1.0)
    assert root == 0.0 and iters == 0
    with pytest.raises(NoRootError):
        bracketed_root(lambda x: 1.0 + x**2, -1.0, 1.0)


def test_solve_beta_consistent_at_null(s1):
    from dataclasses import replace

    model0 = replace(s1.model, beta=0.0)
    nuis = so.oracle_nuisances(model0, s1.censoring, s1.treatment)
    rng = np.random.default_rng(99)
    data = so.generate_dataset(4000, model0, s1.treatment, s1.censoring, rng)
    grid = so.make_grid(model0.tau, 300)
    for kind in ("naive", "efficient"):
        report = so.solve_beta(data, nuis, grid, kind=kind, true_beta=0.0)
        assert abs(report.beta_hat) <= 4.0 * report.se_hat
        assert report.score_mean_at_truth is not None
        assert abs(report.residual) < 1e-8 * len(data)
        assert report.kind == kind and report.n == 4000


def test_solve_beta_honors_explicit_bracket(s1, s1_nuis, s1_data, grid600):
    report = so.solve_beta(s1_data, s1_nuis, grid600, kind="naive",
                           bracket=(-0.5, 1.5))
    free = so.solve_beta(s1_data, s1_nuis, grid600, kind="naive")
    assert report.beta_hat == pytest.approx(free.beta_hat, abs=1e-8)


def test_solve_beta_degenerate_inputs(s1_nuis, grid600):
    empty = Dataset(np.empty(0), np.empty(0, dtype=int), np.empty(0, dtype=int),
                    np.empty((0, 1)))
    with pytest.raises(NoRootError):
        so.solve_beta(empty, s1_nuis, grid600, kind="naive")
    rng = np.random.default_rng(3)
    x = rng.uniform(0.1, 1.9, 50)
    one_arm = Dataset(x, np.ones(50, dtype=int), np.ones(50, dtype=int),
                      np.zeros((50, 1)))
    with pytest.raises(NonIdentifiedError):
        so.solve_beta(one_arm, s1_nuis, grid600, kind="naive")


def test_sandwich_se_scales_with_root_n(s1, s1_nuis, s1_data, grid600):
    report = so.solve_beta(s1_data, s1_nuis, grid600, kind="naive")
    stacked = Dataset(
        np.tile(s1_data.x, 4), np.tile(s1_data.delta, 4),
        np.tile(s1_data.a, 4), np.tile(s1_data.z, (4, 1)),
    )
    se_big = so.sandwich_se(stacked, report.beta_hat, s1_nuis, grid600, "naive")
    assert report.se_hat / se_big == pytest.approx(2.0, rel=1e-10)


def test_sandwich_se_flat_score(s1_nuis, grid600):
    # an all-control sample has identically zero naive scores
    data = Dataset(np.full(20, 1.0), np.ones(20, dtype=int),
                   np.zeros(20, dtype=int), np.zeros((20, 1)))
    with pytest.raises(FlatScoreError):
        so.sandwich_se(data, 0.0, s1_nuis, grid600, "naive")
