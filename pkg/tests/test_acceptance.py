"""Acceptance battery: one test per release criterion, each printing a
PASS/FAIL line with the measured quantities.

Criteria 1-6 drive the verification checks at their shipped sizes and
tolerances.  Criterion 7 runs the full S1 experiment (500 replicates at two
sample sizes).  Criterion 8 exercises the installed command-line entry point
for byte-level reproducibility.  Every criterion also carries a wall-clock
budget, asserted here.

One clause is expected to fail; see test_criterion_7_variance_ordering.
"""

import json
import shutil
import subprocess
import time
from dataclasses import replace

import numpy as np
import pytest

import survodds as so
from survodds.harness import run_scenario
from survodds.verify import (
    check_algebra,
    check_ide,
    check_orthogonality,
    check_sampling,
    check_score_structure,
    check_towerlaw,
)

JOBS = 4


@pytest.fixture
def announce(capsys):
    """Print a criterion verdict through the capture machinery so the line
    shows up in the live test log, pass or fail."""

    def fn(num, desc, ok, detail=""):
        tag = "PASS" if ok else "FAIL"
        suffix = f"  ({detail})" if detail else ""
        with capsys.disabled():
            print(f"\n[criterion {num}] {desc}: {tag}{suffix}", flush=True)

    return fn


def _by_name(report, fragment):
    hits = [it for it in report["items"] if fragment in it["name"]]
    assert hits, f"no verification item matching {fragment!r}"
    return hits


def test_criterion_1_exact_algebra(announce):
    t0 = time.perf_counter()
    report = check_algebra()
    elapsed = time.perf_counter() - t0
    worst = max(it.get("worst", 0.0) for it in report["items"])
    announce(1, "exact model algebra", report["passed"] and elapsed < 1.0,
          f"worst deviation {worst:.2e}, {elapsed:.2f}s")
    assert report["passed"]
    assert elapsed < 1.0


def test_criterion_2_sampling_law(announce):
    t0 = time.perf_counter()
    report = check_sampling(n=10_000)
    elapsed = time.perf_counter() - t0
    worst = max(it["distance"] / it["critical"] for it in report["items"])
    announce(2, "sampled event times match the analytic law",
          report["passed"] and elapsed < 10.0,
          f"{len(report['items'])} cells, worst KS at {worst:.0%} of the 1% critical "
          f"value, {elapsed:.1f}s")
    assert report["passed"]
    assert elapsed < 10.0


def test_criterion_3_projection_solver(announce):
    t0 = time.perf_counter()
    report = check_ide()
    elapsed = time.perf_counter() - t0
    order = _by_name(report, "convergence order")[0]["order"]
    cond = max(it["residual"] for it in _by_name(report, "projection condition"))
    announce(3, "projection-index solver",
          report["passed"] and elapsed < 30.0,
          f"order {order:.3f}, worst condition residual {cond:.2e}, {elapsed:.1f}s")
    assert report["passed"]
    assert elapsed < 30.0


def test_criterion_4_score_structure(announce):
    t0 = time.perf_counter()
    report = check_score_structure()
    elapsed = time.perf_counter() - t0
    worst = _by_name(report, "reduces to the naive")[0]["worst"]
    announce(4, "efficient-score structure",
          report["passed"] and elapsed < 60.0,
          f"zero-index reduction {worst:.2e}, {elapsed:.1f}s")
    assert report["passed"]
    assert elapsed < 60.0


def test_criterion_5_orthogonality_battery(announce):
    t0 = time.perf_counter()
    report = check_orthogonality()
    elapsed = time.perf_counter() - t0
    tested = [it for it in report["items"] if it["name"].startswith("efficient vs")]
    flagged = _by_name(report, "contrast probe")[0]["flagged"]
    ok = report["passed"] and len(tested) >= 12 and len(flagged) >= 1 and elapsed < 300.0
    worst_z = max(abs(it["estimate"]) / it["se"] for it in tested)
    announce(5, "tangent-space orthogonality",
          ok,
          f"{len(tested)} elements, worst |z| {worst_z:.2f}, naive probe flags "
          f"{len(flagged)}, {elapsed:.1f}s")
    assert report["passed"]
    assert len(tested) >= 12
    assert len(flagged) >= 1
    assert elapsed < 300.0


def test_criterion_6_tower_law(announce):
    t0 = time.perf_counter()
    report = check_towerlaw()
    elapsed = time.perf_counter() - t0
    worst = max(it["gap"] / it["se"] for it in report["items"])
    announce(6, "at-risk tower law",
          report["passed"] and elapsed < 30.0,
          f"3 B functions, worst gap {worst:.2f} SE, {elapsed:.1f}s")
    assert report["passed"]
    assert elapsed < 30.0


def test_criterion_8_byte_determinism(tmp_path, announce):
    spec = {
        "name": "det",
        "beta": float(np.log(2.0)),
        "odds": {"family": "loglogistic", "alpha": 1.0, "kappa": 1.0, "gamma": [0.5]},
        "censoring": {"family": "exponential", "rate0": 0.27, "rate1": 0.27},
        "covariates": {"support": [[0.0], [1.0]], "probs": [0.5, 0.5]},
        "tau": 2.0,
        "n": 300,
        "replicates": 24,
        "grid_m": 300,
        "seed": 20260819,
    }
    scen = tmp_path / "det.json"
    scen.write_text(json.dumps(spec))
    exe = shutil.which("survodds")
    assert exe, "console script not on PATH"
    t0 = time.perf_counter()
    blobs = {}
    for tag, jobs in (("a", 1), ("b", 1), ("c", 4)):
        out = tmp_path / tag
        proc = subprocess.run(
            [exe, "simulate", "--scenario", str(scen), "--out", str(out),
             "--jobs", str(jobs)],
            capture_output=True, text=True, timeout=600,
        )
        assert proc.returncode == 0, proc.stderr
        blobs[tag] = (out / "replicates.csv").read_bytes()
    elapsed = time.perf_counter() - t0
    same_run = blobs["a"] == blobs["b"]
    same_jobs = blobs["a"] == blobs["c"]
    announce(8, "byte-identical replicate tables",
          same_run and same_jobs,
          f"rerun {'==' if same_run else '!='}, jobs 1 vs 4 "
          f"{'==' if same_jobs else '!='}, {elapsed:.1f}s")
    assert same_run
    assert same_jobs


@pytest.fixture(scope="module")
def s1_mc():
    scen = so.builtin_scenario("s1")
    t0 = time.perf_counter()
    big, _ = run_scenario(scen, jobs=JOBS)
    small, _ = run_scenario(replace(scen, n=500), jobs=JOBS)
    return {"n2000": big, "n500": small, "elapsed": time.perf_counter() - t0}


def test_criterion_7_estimation_quality(s1_mc, announce):
    truth = float(np.log(2.0))
    big, small, elapsed = s1_mc["n2000"], s1_mc["n500"], s1_mc["elapsed"]
    ok = elapsed < 1800.0 and not big.failed and not small.failed
    details = []
    for kind in ("naive", "efficient"):
        s = big.stats[kind]
        bias = abs(s["mean_beta"] - truth)
        cover = s["coverage"]
        ratio = small.stats[kind]["mc_sd"] / s["mc_sd"]
        details.append(f"{kind}: |bias| {bias:.4f}, coverage {cover:.3f}, "
                       f"sd ratio {ratio:.2f}")
        ok = ok and bias < 0.05 and 0.925 <= cover <= 0.975 and 1.6 <= ratio <= 2.4
    announce(7, "S1 estimation quality (500 replicates)", ok,
          "; ".join(details) + f"; {elapsed:.0f}s")
    assert elapsed < 1800.0
    for kind in ("naive", "efficient"):
        s = big.stats[kind]
        assert s["n_fail"] == 0
        assert abs(s["mean_beta"] - truth) < 0.05
        assert 0.925 <= s["coverage"] <= 0.975
        assert 1.6 <= small.stats[kind]["mc_sd"] / s["mc_sd"] <= 2.4


def test_criterion_7_variance_ordering(s1_mc, announce):
    """Expected to FAIL; kept red deliberately.

    The acceptance clause asks for Var(efficient) / Var(naive) <= 1.05 on S1
    with oracle nuisances.  That ordering is not attainable there: handing
    the naive score the true odds scale makes it the maximum-likelihood
    score of the one-parameter model with R known, so its asymptotic
    variance is the parametric bound 1/E[U^2], which lies strictly below
    the semiparametric bound the efficient score attains (the price of not
    knowing R).  On S1 the two information levels are E[U^2] = 0.132 versus
    0.068, predicting a ratio near 1.93, and the ratio cannot drop below
    1 + exp(-beta) pi / (1 - pi) = 1.5 even in the rare-event limit.  The
    efficient estimator's own guarantees (consistency, coverage, and beating
    the naive score under nuisance misspecification pressure) are asserted
    elsewhere; this clause is recorded as written and left failing rather
    than weakened.  See the project decision log for the derivation.
    """
    ratio = s1_mc["n2000"].stats["efficient"]["var_ratio_vs_naive"]
    announce(7, "S1 variance ordering efficient/naive <= 1.05", ratio <= 1.05,
          f"measured ratio {ratio:.3f}, parametric-oracle prediction 1.93; "
          "expected failure, see decision log")
    assert ratio <= 1.05
