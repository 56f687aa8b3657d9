"""Exact algebra of the proportional-survival-odds model.

The model says the odds of surviving past t satisfy

    S(t | a, z) / {1 - S(t | a, z)} = exp(beta * a) / R(t, z),

so the log survival odds ratio between arms equals beta at every (t, z).
R is the covariate-specific odds scale with time-derivative r; the pair is
carried by an odds-function object (see `families`).
"""

from dataclasses import dataclass

import numpy as np

from .errors import DegenerateOddsError, InvalidModelError


@dataclass(frozen=True)
class OddsModel:
    """Truth object: effect size plus the odds scale and the follow-up horizon."""

    beta: float
    odds: object
    tau: float

    def __post_init__(self):
        if not np.isfinite(self.beta):
            raise InvalidModelError(f"beta must be finite, got {self.beta}")
        if not self.tau > 0:
            raise InvalidModelError(f"tau must be positive, got {self.tau}")


def _odds_at(model, t, z):
    r_val = np.asarray(model.odds.value(t, z), dtype=float)
    if not np.all(np.isfinite(r_val)) or np.any(r_val < 0):
        raise InvalidModelError(
            f"odds function returned an inadmissible value at t={t}, z={z}: {r_val}"
        )
    return r_val


def survival(t, a, z, model):
    """S(t | a, z) = exp(beta a) / {exp(beta a) + R(t, z)}."""
    ea = np.exp(model.beta * np.asarray(a))
    return ea / (ea + _odds_at(model, t, z))


def hazard(t, a, z, model):
    """lambda(t | a, z) = r(t, z) / {exp(beta a) + R(t, z)}."""
    ea = np.exp(model.beta * np.asarray(a))
    return np.asarray(model.odds.density(t, z), dtype=float) / (ea + _odds_at(model, t, z))


def cumulative_hazard(t, a, z, model):
    """Closed form: log{(exp(beta a) + R) / exp(beta a)}; equals -log survival."""
    ea = np.exp(model.beta * np.asarray(a))
    return np.log1p(_odds_at(model, t, z) / ea)


def log_odds_ratio(t, z, model):
    """logit S(t | 1, z) - logit S(t | 0, z); constant in (t, z) by construction.

    Computed honestly from the two arm-specific survival odds, not by
    returning `model.beta`.
    """
    r_val = _odds_at(model, t, z)
    if np.any(r_val == 0.0):
        raise DegenerateOddsError(f"R(t, z) = 0 at t={t}: survival odds are infinite")
    out = []
    for a in (1, 0):
        ea = np.exp(model.beta * a)
        s = ea / (ea + r_val)
        s_bar = r_val / (ea + r_val)
        out.append(np.log(s) - np.log(s_bar))
    return out[0] - out[1]


def log_likelihood(obs, beta, odds, censoring=None, treatment=None, tau=None):
    """Log-likelihood of one observation.

    Always includes the failure-time factor
        delta * log lambda(X | A, Z) + log S(X | A, Z).
    The censoring factor (log hazard for randomly censored subjects plus the
    integrated censoring hazard) is added only when `censoring` is given, and
    the treatment/covariate factor only when `treatment` is given; neither
    involves beta.  `tau`, when given, marks subjects censored exactly at the
    horizon as administratively censored: they carry no censoring-hazard jump.

    An event at a time where the odds density vanishes returns -inf.
    """
    x, delta, a, z = obs.x, obs.delta, obs.a, obs.z
    ea = np.exp(beta * a)
    r_big = float(odds.value(x, z))
    total = a * beta - (1.0 + delta) * np.log(ea + r_big)
    if delta:
        r_small = float(odds.density(x, z))
        if r_small <= 0.0:
            return -np.inf
        total += np.log(r_small)
    if censoring is not None:
        randomly_censored = (not delta) and (tau is None or x < tau)
        if randomly_censored:
            lam_c = float(censoring.hazard(x, a, z))
            total += np.log(lam_c) if lam_c > 0.0 else -np.inf
        total -= float(censoring.cumulative_hazard(x, a, z))
    if treatment is not None:
        pi = float(treatment.propensity(z))
        total += a * np.log(pi) + (1 - a) * np.log1p(-pi)
        if treatment.law is not None:
            total += np.log(treatment.law.pmf(z))
    return float(total)


def naive_score(obs, beta, odds):
    """Score for beta of the observed-data likelihood, one observation.

    -integral of A * S(t | A, Z) dM(t); the compensator part has the closed
    form R(X, Z) / {exp(beta A) + R(X, Z)} for any odds scale.
    """
    if obs.a == 0:
        return 0.0
    ea = np.exp(beta * obs.a)
    s_x = ea / (ea + float(odds.value(obs.x, obs.z)))
    return float(-obs.a * (obs.delta * s_x - (1.0 - s_x)))


def naive_scores(x, delta, a, r_at_x, beta):
    """Vectorized naive score over a dataset; `r_at_x` holds R(X_i, Z_i)."""
    ea = np.exp(beta * a)
    s_x = ea / (ea + r_at_x)
    return -a * (delta * s_x - (1.0 - s_x))


def validate_odds_model(model, support, strict=True, n_grid=256, quad_tol=1e-3):
    """Check the model invariants on a test grid over each support profile.

    - R(0, z) = 0 (forced by S(0) = 1);
    - R nondecreasing, r nonnegative (r strictly positive on (0, tau] when
      `strict`);
    - R(t, z) agrees with the integral of r within `quad_tol` relative
      trapezoid tolerance.
    Raises InvalidModelError on the first violation.
    """
    tau = model.tau if np.isfinite(model.tau) else 1.0
    t = np.linspace(0.0, tau, n_grid + 1)
    for z in np.atleast_2d(np.asarray(support, dtype=float)):
        r_big = _odds_at(model, t, z)
        r_small = np.asarray(model.odds.density(t, z), dtype=float)
        if abs(float(r_big[0])) > 1e-12:
            raise InvalidModelError(f"R(0, z) = {r_big[0]} != 0 for z={z}")
        if np.any(np.diff(r_big) < -1e-12 * max(1.0, float(r_big[-1]))):
            raise InvalidModelError(f"R(., z) is not nondecreasing for z={z}")
        if np.any(r_small[1:] < 0):
            raise InvalidModelError(f"r(t, z) < 0 somewhere for z={z}")
        if strict and np.any(r_small[1:] <= 0):
            raise InvalidModelError(f"strict mode: r(t, z) = 0 on (0, tau] for z={z}")
        quad = np.concatenate(([0.0], np.cumsum(np.diff(t) * 0.5 * (r_small[:-1] + r_small[1:]))))
        finite = np.isfinite(r_small).all()
        if finite:
            err = np.max(np.abs(quad - r_big)) / max(1.0, float(r_big[-1]))
            if err > quad_tol:
                raise InvalidModelError(
                    f"R and the integral of r disagree (rel err {err:.2e}) for z={z}"
                )
    return True
