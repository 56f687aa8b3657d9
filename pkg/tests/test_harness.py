"""Replicated experiments: seeding, determinism, aggregation, failure isolation."""

import csv
from dataclasses import replace

import numpy as np
import pytest
from scipy.stats import norm

import survodds as so
from survodds.harness import run_replicate, run_scenario, summarize, write_replicates_csv


@pytest.fixture(scope="module")
def small(s1):
    return replace(s1, n=120, replicates=6, grid_m=150)


def test_replicate_seed_is_pure_function_of_indices():
    a = so.replicate_seed(20260819, 3).generate_state(4)
    b = so.replicate_seed(20260819, 3).generate_state(4)
    np.testing.assert_array_equal(a, b)
    c = so.replicate_seed(20260819, 4).generate_state(4)
    assert not np.array_equal(a, c)
    want = np.random.SeedSequence(entropy=20260819, spawn_key=(3,)).generate_state(4)
    np.testing.assert_array_equal(a, want)


def test_run_replicate_is_deterministic(small):
    rows1 = run_replicate(small, 2)
    rows2 = run_replicate(small, 2)
    assert rows1 == rows2
    assert {r["kind"] for r in rows1} == {"naive", "efficient"}
    for r in rows1:
        assert r["error"] is None
        assert np.isfinite(r["beta_hat"]) and np.isfinite(r["se_hat"])


def test_parallel_run_matches_sequential(small):
    sum1, rows1 = run_scenario(small, jobs=1)
    sum2, rows2 = run_scenario(small, jobs=2)
    assert rows1 == rows2
    assert sum1.to_dict() == sum2.to_dict()


def test_summary_statistics_recompute(small):
    summary, rows = run_scenario(small, jobs=1)
    z95 = float(norm.ppf(0.975))
    for kind in ("naive", "efficient"):
        beta = np.array([r["beta_hat"] for r in rows if r["kind"] == kind])
        se = np.array([r["se_hat"] for r in rows if r["kind"] == kind])
        s = summary.stats[kind]
        assert s["n_success"] == len(beta) and s["n_fail"] == 0
        assert s["mean_beta"] == pytest.approx(float(beta.mean()), rel=1e-12)
        assert s["bias"] == pytest.approx(float(beta.mean()) - small.model.beta, rel=1e-9)
        assert s["mc_sd"] == pytest.approx(float(beta.std(ddof=1)), rel=1e-12)
        want_cover = float(np.mean(np.abs(beta - small.model.beta) <= z95 * se))
        assert s["coverage"] == pytest.approx(want_cover)
    b_n = np.array([r["beta_hat"] for r in rows if r["kind"] == "naive"])
    b_e = np.array([r["beta_hat"] for r in rows if r["kind"] == "efficient"])
    assert summary.stats["efficient"]["var_ratio_vs_naive"] == pytest.approx(
        float(np.var(b_e, ddof=1) / np.var(b_n, ddof=1)), rel=1e-12
    )
    assert summary.stats["naive"]["var_ratio_vs_naive"] is None


def test_failed_replicates_are_isolated(s1):
    # n = 2 makes one-arm samples (and with them NonIdentifiedError) common
    tiny = replace(s1, n=2, replicates=12, grid_m=80, seed=7)
    summary, rows = run_scenario(tiny, jobs=1)
    assert len(rows) == 24
    errs = [r for r in rows if r["error"] is not None]
    assert errs, "expected at least one failed replicate at n=2"
    for r in errs:
        assert np.isnan(r["beta_hat"]) and np.isnan(r["se_hat"])
        assert r["error"].endswith("Error")
    for kind in ("naive", "efficient"):
        k_rows = [r for r in rows if r["kind"] == kind]
        n_fail = sum(r["error"] is not None for r in k_rows)
        s = summary.stats[kind]
        assert s["n_fail"] == n_fail
        assert s["n_success"] == 12 - n_fail
        finite = [r["beta_hat"] for r in k_rows if r["error"] is None]
        if finite:
            assert s["mean_beta"] == pytest.approx(float(np.mean(finite)), rel=1e-12)
    worst_rate = max(summary.stats[k]["n_fail"] for k in ("naive", "efficient")) / 12.0
    assert summary.failed == (worst_rate > 0.2)


def test_replicates_csv_layout(tmp_path, small):
    _, rows = run_scenario(small, jobs=1)
    path = tmp_path / "replicates.csv"
    write_replicates_csv(path, rows)
    with open(path, newline="") as fh:
        table = list(csv.reader(fh))
    assert table[0] == ["rep", "seed", "kind", "beta_hat", "se_hat", "iters"]
    assert len(table) == 1 + small.replicates * len(small.kinds)
    assert float(table[1][3]) == rows[0]["beta_hat"]


def test_summary_text_rendering(small):
    summary, _ = run_scenario(small, jobs=1)
    text = summary.to_text()
    assert text.startswith(f"scenario {small.name}:")
    assert "naive" in text and "efficient" in text
    assert "WARNING" not in text


def test_run_scenario_writes_artifacts(tmp_path, small):
    out = tmp_path / "run"
    summary, rows = run_scenario(replace(small, replicates=2), out_dir=str(out), jobs=1)
    assert (out / "replicates.csv").exists()
    assert (out / "summary.json").exists()
    assert (out / "summary.txt").read_text() == summary.to_text()


def test_summarize_handles_all_failures(s1):
    rows = [
        {"rep": r, "seed": 1, "kind": k, "beta_hat": float("nan"),
         "se_hat": float("nan"), "iters": 0, "error": "NoRootError"}
        for r in range(3) for k in ("naive", "efficient")
    ]
    summary = summarize(replace(s1, replicates=3), rows)
    assert summary.failed
    assert summary.stats["naive"]["n_success"] == 0
    assert np.isnan(summary.stats["naive"]["mean_beta"])
