"""Command-line front end.

Subcommands: `simulate` (replicated experiment), `estimate` (one dataset),
`verify` (mathematical batteries), `solve-h0` (dump the projection index).
Exit codes: 0 success, 2 run-level failure, 3 invalid configuration.
"""

import argparse
import json
import os
import sys
from dataclasses import replace

import numpy as np

from .errors import ScenarioError, SurvOddsError
from .estimator import solve_beta
from .harness import run_scenario
from .ide import make_grid, solve_projection, write_h0_profiles
from .nuisance import build_nuisances, oracle_nuisances
from .scenario import builtin_names, builtin_scenario, load_scenario
from .simulate import Dataset, generate_dataset
from .verify import run_suite


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(3)


def _resolve_scenario(spec, seed=None, grid=None):
    if os.path.exists(spec):
        scen = load_scenario(spec)
    elif spec in builtin_names():
        scen = builtin_scenario(spec)
    else:
        raise ScenarioError(
            f"{spec!r} is neither a readable file nor a builtin scenario "
            f"(builtins: {builtin_names()})"
        )
    if seed is not None:
        scen = replace(scen, seed=seed)
    if grid is not None:
        scen = replace(scen, grid_m=grid)
    return scen


def _nuisances_for(scen, data):
    if scen.nuisance_mode == "oracle":
        return oracle_nuisances(scen.model, scen.censoring, scen.treatment)
    return build_nuisances(scen.nuisance_mode, data=data, tau=scen.model.tau)


def _cmd_simulate(args):
    scen = _resolve_scenario(args.scenario, args.seed, args.grid)
    summary, _ = run_scenario(scen, out_dir=args.out, jobs=args.jobs)
    print(summary.to_text(), end="")
    return 2 if summary.failed else 0


def _cmd_estimate(args):
    scen = _resolve_scenario(args.scenario, args.seed, args.grid)
    if args.data:
        data = Dataset.from_csv(args.data)
    else:
        rng = np.random.default_rng(scen.seed)
        data = generate_dataset(scen.n, scen.model, scen.treatment, scen.censoring, rng)
    if args.export_data:
        data.to_csv(args.export_data)
    nuis = _nuisances_for(scen, data)
    grid = make_grid(scen.model.tau, scen.grid_m)
    reports = {}
    for kind in scen.kinds:
        reports[kind] = solve_beta(data, nuis, grid, kind=kind).to_dict()
    payload = {"scenario": scen.name, "n": len(data), "estimates": reports}
    text = json.dumps(payload, indent=2, sort_keys=True)
    print(text)
    if args.out:
        os.makedirs(args.out, exist_ok=True)
        with open(os.path.join(args.out, "estimate.json"), "w") as fh:
            fh.write(text + "\n")
    return 0


def _cmd_verify(args):
    report = run_suite(args.suite, seed=args.seed if args.seed is not None else 20260819)
    text = json.dumps(report, indent=2, sort_keys=True)
    print(text)
    if args.out:
        os.makedirs(args.out, exist_ok=True)
        with open(os.path.join(args.out, f"verify-{args.suite}.json"), "w") as fh:
            fh.write(text + "\n")
    return 0 if report["passed"] else 2


def _cmd_solve_h0(args):
    scen = _resolve_scenario(args.scenario, args.seed, args.grid)
    nuis = oracle_nuisances(scen.model, scen.censoring, scen.treatment)
    grid = make_grid(scen.model.tau, scen.grid_m)
    sols = [
        solve_projection(grid, z, scen.model.beta, nuis)
        for z in scen.treatment.law.support
    ]
    os.makedirs(args.out, exist_ok=True)
    path = os.path.join(args.out, "h0_profiles.csv")
    write_h0_profiles(path, sols)
    print(
        json.dumps(
            {
                "profiles": [
                    {
                        "z": np.atleast_1d(s.z).tolist(),
                        "residual": s.residual,
                        "projection_residual": s.projection_residual,
                    }
                    for s in sols
                ],
                "out": path,
            },
            indent=2,
            sort_keys=True,
        )
    )
    return 0


def build_parser():
    parser = _Parser(prog="survodds", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, out_required):
        p.add_argument("--scenario", required=True,
                       help="scenario JSON file or builtin name")
        p.add_argument("--out", required=out_required, help="output directory")
        p.add_argument("--seed", type=int, default=None, help="override scenario seed")
        p.add_argument("--grid", type=int, default=None, help="override grid size")

    p_sim = sub.add_parser("simulate", help="run the replicated experiment")
    common(p_sim, out_required=True)
    p_sim.add_argument("--jobs", type=int, default=1, help="parallel workers")
    p_sim.set_defaults(fn=_cmd_simulate)

    p_est = sub.add_parser("estimate", help="estimate on one dataset")
    common(p_est, out_required=False)
    p_est.add_argument("--data", default=None, help="dataset CSV (default: simulate one)")
    p_est.add_argument("--export-data", default=None, help="write the dataset used to CSV")
    p_est.set_defaults(fn=_cmd_estimate)

    p_ver = sub.add_parser("verify", help="run a verification suite")
    p_ver.add_argument("--suite", default="all",
                       choices=["algebra", "ide", "orthogonality", "towerlaw", "all"])
    p_ver.add_argument("--seed", type=int, default=None)
    p_ver.add_argument("--out", default=None, help="output directory")
    p_ver.set_defaults(fn=_cmd_verify)

    p_h0 = sub.add_parser("solve-h0", help="solve and dump the projection index")
    common(p_h0, out_required=True)
    p_h0.set_defaults(fn=_cmd_solve_h0)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except ScenarioError as exc:
        print(f"invalid configuration: {exc}", file=sys.stderr)
        return 3
    except SurvOddsError as exc:
        print(f"run failed: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
