"""Scenario configuration: JSON schema, validation, builtin designs."""

import json
import math
from dataclasses import dataclass, replace

import numpy as np

from .errors import ScenarioError
from .families import (
    ConstantPropensity,
    DiscreteCovariateLaw,
    ExponentialCensoring,
    LogisticPropensity,
    LogLogisticOdds,
    NoCensoring,
    TabulatedOdds,
    TreatmentModel,
)
from .model import OddsModel

KNOWN_KINDS = ("naive", "efficient")
KNOWN_MODES = ("oracle", "fitted", "misspecified", "misspecified-propensity", "misspecified-odds")


@dataclass(frozen=True)
class Scenario:
    """A full experiment definition: truth objects plus harness settings."""

    name: str
    model: OddsModel
    censoring: object
    treatment: object
    n: int
    replicates: int
    grid_m: int
    kinds: tuple
    nuisance_mode: str
    seed: int

    def to_dict(self):
        return {
            "name": self.name,
            "beta": self.model.beta,
            "odds": self.model.odds.params(),
            "censoring": self.censoring.params(),
            "propensity": self.treatment.propensity.params(),
            "covariates": self.treatment.law.params(),
            "tau": self.model.tau,
            "n": self.n,
            "replicates": self.replicates,
            "grid_m": self.grid_m,
            "kinds": list(self.kinds),
            "nuisance_mode": self.nuisance_mode,
            "seed": self.seed,
        }


def _require(cond, msg):
    if not cond:
        raise ScenarioError(msg)


def _build_odds(spec):
    _require(isinstance(spec, dict) and "family" in spec, "odds spec needs a 'family' key")
    family = spec["family"]
    if family == "loglogistic":
        try:
            return LogLogisticOdds(spec["alpha"], spec["kappa"], spec.get("gamma", ()))
        except (KeyError, ValueError) as exc:
            raise ScenarioError(f"bad loglogistic odds spec: {exc}") from exc
    if family == "tabulated":
        _require("tables" in spec, "tabulated odds spec needs 'tables'")
        try:
            tables = {
                tuple(entry["z"]): (entry["t"], entry["r"]) for entry in spec["tables"]
            }
            return TabulatedOdds(tables)
        except (KeyError, TypeError, ValueError) as exc:
            raise ScenarioError(f"bad tabulated odds spec: {exc}") from exc
    raise ScenarioError(f"unknown odds family {family!r}")


def _build_censoring(spec):
    family = spec.get("family", "none") if isinstance(spec, dict) else spec
    if family == "none":
        return NoCensoring()
    if family == "exponential":
        try:
            return ExponentialCensoring(spec["rate0"], spec["rate1"])
        except (KeyError, ValueError) as exc:
            raise ScenarioError(f"bad exponential censoring spec: {exc}") from exc
    raise ScenarioError(f"unknown censoring family {family!r}")


def _build_propensity(spec):
    _require(isinstance(spec, dict) and "kind" in spec, "propensity spec needs a 'kind' key")
    if spec["kind"] == "constant":
        try:
            return ConstantPropensity(spec["value"])
        except (KeyError, ValueError) as exc:
            raise ScenarioError(f"bad constant propensity spec: {exc}") from exc
    if spec["kind"] == "logistic":
        try:
            return LogisticPropensity(spec["intercept"], spec["coef"])
        except (KeyError, ValueError) as exc:
            raise ScenarioError(f"bad logistic propensity spec: {exc}") from exc
    raise ScenarioError(f"unknown propensity kind {spec['kind']!r}")


def scenario_from_dict(raw):
    """Validate a raw dict (parsed JSON) into a Scenario."""
    _require(isinstance(raw, dict), "scenario must be a JSON object")
    for key in ("beta", "odds", "covariates", "tau", "n"):
        _require(key in raw, f"scenario is missing required key {key!r}")
    beta = raw["beta"]
    _require(isinstance(beta, (int, float)) and math.isfinite(beta), "beta must be finite")
    tau = raw["tau"]
    _require(isinstance(tau, (int, float)) and tau > 0, "tau must be positive")
    n = raw["n"]
    _require(isinstance(n, int) and n >= 1, "n must be a positive integer")
    replicates = raw.get("replicates", 1)
    _require(isinstance(replicates, int) and replicates >= 1, "replicates must be >= 1")
    grid_m = raw.get("grid_m", 600)
    _require(isinstance(grid_m, int) and grid_m >= 2, "grid_m must be an integer >= 2")
    kinds = tuple(raw.get("kinds", list(KNOWN_KINDS)))
    _require(len(kinds) >= 1, "at least one estimator kind is required")
    for kind in kinds:
        _require(kind in KNOWN_KINDS, f"unknown estimator kind {kind!r}")
    mode = raw.get("nuisance_mode", "oracle")
    _require(mode in KNOWN_MODES, f"unknown nuisance mode {mode!r}")
    seed = raw.get("seed", 0)
    _require(isinstance(seed, int) and seed >= 0, "seed must be a nonnegative integer")
    cov = raw["covariates"]
    _require(
        isinstance(cov, dict) and "support" in cov and "probs" in cov,
        "covariates spec needs 'support' and 'probs'",
    )
    try:
        law = DiscreteCovariateLaw(cov["support"], cov["probs"])
    except ValueError as exc:
        raise ScenarioError(f"bad covariate law: {exc}") from exc
    propensity = _build_propensity(raw.get("propensity", {"kind": "constant", "value": 0.5}))
    pi_vals = [float(propensity(z)) for z in law.support]
    _require(
        all(0.0 < p < 1.0 for p in pi_vals),
        f"propensity must lie strictly in (0, 1) on the support, got {pi_vals}",
    )
    model = OddsModel(beta=float(beta), odds=_build_odds(raw["odds"]), tau=float(tau))
    return Scenario(
        name=str(raw.get("name", "unnamed")),
        model=model,
        censoring=_build_censoring(raw.get("censoring", {"family": "none"})),
        treatment=TreatmentModel(propensity, law),
        n=n,
        replicates=replicates,
        grid_m=grid_m,
        kinds=kinds,
        nuisance_mode=mode,
        seed=seed,
    )


def load_scenario(path):
    try:
        with open(path) as fh:
            raw = json.load(fh)
    except OSError as exc:
        raise ScenarioError(f"cannot read scenario file {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ScenarioError(f"scenario file {path} is not valid JSON: {exc}") from exc
    return scenario_from_dict(raw)


S1 = {
    "name": "s1",
    "beta": float(np.log(2.0)),
    "odds": {"family": "loglogistic", "alpha": 1.0, "kappa": 1.0, "gamma": [0.5]},
    "censoring": {"family": "exponential", "rate0": 0.27, "rate1": 0.27},
    "propensity": {"kind": "constant", "value": 0.5},
    "covariates": {"support": [[0.0], [1.0]], "probs": [0.5, 0.5]},
    "tau": 2.0,
    "n": 2000,
    "replicates": 500,
    "grid_m": 600,
    "kinds": ["naive", "efficient"],
    "nuisance_mode": "oracle",
    "seed": 20260819,
}

S2_CONFOUNDED = {
    "name": "s2-confounded",
    "beta": float(np.log(2.0)),
    "odds": {"family": "loglogistic", "alpha": 1.2, "kappa": 1.0, "gamma": [0.6]},
    "censoring": {"family": "exponential", "rate0": 0.3, "rate1": 0.2},
    "propensity": {"kind": "logistic", "intercept": -0.6, "coef": [1.2]},
    "covariates": {"support": [[0.0], [0.5], [1.0]], "probs": [0.4, 0.35, 0.25]},
    "tau": 2.5,
    "n": 2000,
    "replicates": 500,
    "grid_m": 600,
    "kinds": ["naive", "efficient"],
    "nuisance_mode": "oracle",
    "seed": 20260820,
}

_BUILTINS = {"s1": S1, "s2-confounded": S2_CONFOUNDED}


def builtin_scenario(name, **overrides):
    """A shipped scenario by name, with optional field overrides."""
    if name not in _BUILTINS:
        raise ScenarioError(f"unknown builtin scenario {name!r}; have {sorted(_BUILTINS)}")
    scen = scenario_from_dict(_BUILTINS[name])
    return replace(scen, **overrides) if overrides else scen


def builtin_names():
    return sorted(_BUILTINS)
