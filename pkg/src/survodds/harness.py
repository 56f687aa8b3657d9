"""Replicated Monte-Carlo experiments with deterministic parallelism.

Replicate seeds are spawned from the scenario master seed by index, and
aggregation runs in replicate order whatever the execution order, so a
scenario produces byte-identical outputs at any worker count.
"""

import csv
import json
import multiprocessing
import os
from dataclasses import dataclass

import numpy as np
from scipy.stats import norm

from .errors import SurvOddsError
from .estimator import solve_beta
from .ide import make_grid
from .nuisance import build_nuisances, oracle_nuisances
from .simulate import generate_dataset

Z_95 = float(norm.ppf(0.975))

REPLICATE_HEADER = ["rep", "seed", "kind", "beta_hat", "se_hat", "iters"]


def replicate_seed(master_seed, rep):
    """The per-replicate seed sequence, a pure function of (master, index)."""
    return np.random.SeedSequence(entropy=master_seed, spawn_key=(rep,))


def run_replicate(scenario, rep):
    """One replicate: simulate, build nuisances, estimate every kind.

    Returns one row dict per estimator kind; a failed estimation yields a
    row with nan estimates and the error class name.
    """
    child = replicate_seed(scenario.seed, rep)
    seed_id = int(child.generate_state(1, np.uint64)[0])
    rng = np.random.default_rng(child)
    rows = []

    def failure_rows(exc):
        return [
            {
                "rep": rep,
                "seed": seed_id,
                "kind": kind,
                "beta_hat": float("nan"),
                "se_hat": float("nan"),
                "iters": 0,
                "error": type(exc).__name__,
            }
            for kind in scenario.kinds
        ]

    try:
        data = generate_dataset(
            scenario.n, scenario.model, scenario.treatment, scenario.censoring, rng
        )
        if scenario.nuisance_mode == "oracle":
            nuis = oracle_nuisances(scenario.model, scenario.censoring, scenario.treatment)
        else:
            nuis = build_nuisances(scenario.nuisance_mode, data=data, tau=scenario.model.tau)
        grid = make_grid(scenario.model.tau, scenario.grid_m)
    except SurvOddsError as exc:
        return failure_rows(exc)
    for kind in scenario.kinds:
        try:
            report = solve_beta(data, nuis, grid, kind=kind)
            rows.append(
                {
                    "rep": rep,
                    "seed": seed_id,
                    "kind": kind,
                    "beta_hat": report.beta_hat,
                    "se_hat": report.se_hat,
                    "iters": report.iterations,
                    "error": None,
                }
            )
        except SurvOddsError as exc:
            rows.append(
                {
                    "rep": rep,
                    "seed": seed_id,
                    "kind": kind,
                    "beta_hat": float("nan"),
                    "se_hat": float("nan"),
                    "iters": 0,
                    "error": type(exc).__name__,
                }
            )
    return rows


def _worker(args):
    scenario, rep = args
    return run_replicate(scenario, rep)


@dataclass(frozen=True)
class SummaryTable:
    """Aggregate statistics per estimator kind."""

    scenario: str
    true_beta: float
    replicates: int
    stats: dict
    failed: bool

    def to_dict(self):
        return {
            "scenario": self.scenario,
            "true_beta": self.true_beta,
            "replicates": self.replicates,
            "failed": self.failed,
            "stats": self.stats,
        }

    def to_text(self):
        lines = [
            f"scenario {self.scenario}: true beta {self.true_beta:.6f}, "
            f"{self.replicates} replicates"
        ]
        header = (
            f"{'kind':<10}{'ok':>5}{'fail':>6}{'mean':>10}{'bias':>10}"
            f"{'mc_sd':>10}{'mean_se':>10}{'cover':>8}{'vs_naive':>10}"
        )
        lines.append(header)
        for kind, s in self.stats.items():
            ratio = s["var_ratio_vs_naive"]
            lines.append(
                f"{kind:<10}{s['n_success']:>5}{s['n_fail']:>6}"
                f"{s['mean_beta']:>10.4f}{s['bias']:>10.4f}{s['mc_sd']:>10.4f}"
                f"{s['mean_se']:>10.4f}{s['coverage']:>8.3f}"
                + (f"{ratio:>10.3f}" if ratio is not None else f"{'-':>10}")
            )
        if self.failed:
            lines.append("WARNING: failure rate above 20% for at least one kind")
        return "\n".join(lines) + "\n"


def summarize(scenario, rows):
    """Build the summary table from replicate rows."""
    true_beta = scenario.model.beta
    by_kind = {kind: [r for r in rows if r["kind"] == kind] for kind in scenario.kinds}
    ok_reps = {
        kind: {r["rep"] for r in rs if np.isfinite(r["beta_hat"])}
        for kind, rs in by_kind.items()
    }
    stats = {}
    failed = False
    for kind, rs in by_kind.items():
        good = [r for r in rs if r["rep"] in ok_reps[kind]]
        n_fail = len(rs) - len(good)
        if len(rs) and n_fail / len(rs) > 0.2:
            failed = True
        if good:
            beta = np.asarray([r["beta_hat"] for r in good])
            se = np.asarray([r["se_hat"] for r in good])
            covered = np.abs(beta - true_beta) <= Z_95 * se
            entry = {
                "n_success": len(good),
                "n_fail": n_fail,
                "mean_beta": float(np.mean(beta)),
                "bias": float(np.mean(beta) - true_beta),
                "mc_sd": float(np.std(beta, ddof=1)) if len(good) > 1 else 0.0,
                "mean_se": float(np.mean(se)),
                "coverage": float(np.mean(covered)),
                "var_ratio_vs_naive": None,
            }
        else:
            entry = {
                "n_success": 0,
                "n_fail": n_fail,
                "mean_beta": float("nan"),
                "bias": float("nan"),
                "mc_sd": float("nan"),
                "mean_se": float("nan"),
                "coverage": float("nan"),
                "var_ratio_vs_naive": None,
            }
        stats[kind] = entry
    if "naive" in by_kind and "efficient" in by_kind:
        common = ok_reps["naive"] & ok_reps["efficient"]
        if len(common) > 1:
            b_n = np.asarray(
                [r["beta_hat"] for r in by_kind["naive"] if r["rep"] in common]
            )
            b_e = np.asarray(
                [r["beta_hat"] for r in by_kind["efficient"] if r["rep"] in common]
            )
            stats["efficient"]["var_ratio_vs_naive"] = float(
                np.var(b_e, ddof=1) / np.var(b_n, ddof=1)
            )
    return SummaryTable(
        scenario=scenario.name,
        true_beta=true_beta,
        replicates=scenario.replicates,
        stats=stats,
        failed=failed,
    )


def write_replicates_csv(path, rows):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(REPLICATE_HEADER)
        for r in rows:
            writer.writerow(
                [
                    r["rep"],
                    r["seed"],
                    r["kind"],
                    repr(float(r["beta_hat"])),
                    repr(float(r["se_hat"])),
                    r["iters"],
                ]
            )


def run_scenario(scenario, out_dir=None, jobs=1):
    """Run every replicate, aggregate in index order, emit artifacts.

    Returns (summary, rows).  With jobs > 1 the replicates run in a spawn
    pool; results are collected in task order, so the output is identical
    to a sequential run.
    """
    tasks = [(scenario, rep) for rep in range(scenario.replicates)]
    if jobs <= 1:
        per_rep = [_worker(t) for t in tasks]
    else:
        ctx = multiprocessing.get_context("spawn")
        chunk = max(1, scenario.replicates // (4 * jobs))
        with ctx.Pool(processes=jobs) as pool:
            per_rep = pool.map(_worker, tasks, chunksize=chunk)
    rows = [row for rep_rows in per_rep for row in rep_rows]
    summary = summarize(scenario, rows)
    if out_dir is not None:
        os.makedirs(out_dir, exist_ok=True)
        write_replicates_csv(os.path.join(out_dir, "replicates.csv"), rows)
        with open(os.path.join(out_dir, "summary.json"), "w") as fh:
            json.dump(
                {"scenario": scenario.to_dict(), "summary": summary.to_dict()},
                fh,
                indent=2,
                sort_keys=True,
            )
            fh.write("\n")
        with open(os.path.join(out_dir, "summary.txt"), "w") as fh:
            fh.write(summary.to_text())
    return summary, rows
