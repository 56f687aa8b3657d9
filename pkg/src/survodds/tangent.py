"""Sample elements of the nuisance tangent spaces and brute-force checks.

Three spaces, one per nuisance direction:
  - odds direction: integrals {dh/dt / (e^{bA} lambda) - h / e^{bA}} S dM
    indexed by smooth h(t, z) vanishing at 0;
  - censoring direction: integrals of alpha(t, A, Z) against the censoring
    martingale;
  - treatment/covariate direction: mean-zero functions b(A, Z).
The efficient score must be orthogonal to all three; the naive score is
provably orthogonal to the last two (conditional-martingale argument), so
a contrast probe that demonstrates test power has to use the odds
direction.  Everything here runs with oracle nuisances: it validates the
mathematics, not fitting error.
"""

from dataclasses import dataclass

import numpy as np

from .errors import SingularityError
from .estimator import ScoreEngine
from .ide import DENSITY_FLOOR
from .nuisance import oracle_nuisances
from .simulate import Dataset, generate_dataset


@dataclass(frozen=True)
class TestFunction:
    """Odds-direction index: h(t, z) with its analytic time derivative."""

    name: str
    h: callable
    dh: callable


def _quad_points(x, n_quad):
    return np.linspace(0.0, float(x), n_quad + 1)


def lambda1_element(obs, fn, beta, model, n_quad=512):
    """Odds-direction element for one observation.

    Jump dh(X)/r(X) - h(X)/(e^{bA} + R(X)) when an event is observed,
    minus the compensator integral of dh/(e^{bA}+R) - h r/(e^{bA}+R)^2
    by trapezoid (the two forms differ by the factor S lambda already
    absorbed).
    """
    ea = np.exp(beta * obs.a)
    t = _quad_points(obs.x, n_quad)
    r_big = np.asarray(model.odds.value(t, obs.z), dtype=float)
    r_small = np.asarray(model.odds.density(t, obs.z), dtype=float)
    h_t = np.broadcast_to(np.asarray(fn.h(t, obs.z), dtype=float), t.shape)
    dh_t = np.broadcast_to(np.asarray(fn.dh(t, obs.z), dtype=float), t.shape)
    denom = ea + r_big
    g = dh_t / denom - h_t * r_small / denom**2
    integral = float(np.trapezoid(g, t))
    jump = 0.0
    if obs.delta:
        dh_x, r_x = float(dh_t[-1]), float(r_small[-1])
        if r_x < DENSITY_FLOOR:
            if abs(dh_x) > 0.0:
                raise SingularityError(
                    f"hazard vanishes at event time {obs.x} with dh={dh_x}"
                )
            ratio = 0.0
        else:
            ratio = dh_x / r_x
        jump = ratio - float(h_t[-1]) / float(denom[-1])
    return jump - integral


def lambda2_element(obs, alpha, censoring, tau, n_quad=512):
    """Censoring-direction element: integral of alpha against dM_c.

    The jump fires only for randomly censored subjects (no event, before
    the administrative cap at tau).
    """
    t = _quad_points(obs.x, n_quad)
    g = np.broadcast_to(np.asarray(alpha(t, obs.a, obs.z), dtype=float), t.shape) * np.asarray(
        censoring.hazard(t, obs.a, obs.z), dtype=float
    )
    integral = float(np.trapezoid(g, t))
    jump = 0.0
    if obs.delta == 0 and obs.x < tau:
        jump = float(alpha(obs.x, obs.a, obs.z))
    return jump - integral


def exact_mean_b(b_raw, treatment):
    """E[b(A, Z)] as an exact sum over the discrete treatment/covariate law."""
    law = treatment.law
    total = 0.0
    for z_row, p_z in zip(law.support, law.probs):
        pi = float(treatment.propensity(z_row))
        total += p_z * (pi * float(b_raw(1, z_row)) + (1.0 - pi) * float(b_raw(0, z_row)))
    return total


def lambda3_element(obs, b_raw, treatment):
    """Treatment-direction element: b centered exactly to mean zero."""
    return float(b_raw(obs.a, obs.z)) - exact_mean_b(b_raw, treatment)


@dataclass(frozen=True)
class SpaceElement:
    """One sample tangent-space direction with scalar and batch evaluators."""

    space: str
    name: str
    single: callable
    batch: callable

    def __call__(self, obs):
        return self.single(obs)

    def evaluate(self, data):
        return self.batch(data)


def _batch_by_group(data, per_group):
    """Assemble per-subject values from a (profile, arm)-group evaluator."""
    out = np.empty(len(data))
    uniq, inverse = data.profiles()
    for p_idx in range(len(uniq)):
        for arm in (0, 1):
            idx = np.where((inverse == p_idx) & (data.a == arm))[0]
            if len(idx):
                out[idx] = per_group(uniq[p_idx], arm, idx)
    return out


def _restricted_trapezoid(grid_t, g, x):
    """Integral of g from 0 to each x, by cumulative trapezoid plus a
    linearly interpolated partial interval."""
    dt = grid_t[1] - grid_t[0]
    cum = np.concatenate(([0.0], np.cumsum(dt * 0.5 * (g[:-1] + g[1:]))))
    j = np.clip(np.searchsorted(grid_t, x, side="right") - 1, 0, len(grid_t) - 2)
    frac = (x - grid_t[j]) / dt
    g_x = g[j] + frac * (g[j + 1] - g[j])
    return cum[j] + (x - grid_t[j]) * 0.5 * (g[j] + g_x)


def lambda1_space_element(fn, beta, model, grid):
    def single(obs):
        return lambda1_element(obs, fn, beta, model)

    def batch(data):
        pts = grid.points

        def per_group(z, arm, idx):
            ea = np.exp(beta * arm)
            r_big = np.asarray(model.odds.value(pts, z), dtype=float)
            r_small = np.asarray(model.odds.density(pts, z), dtype=float)
            h_t = np.broadcast_to(np.asarray(fn.h(pts, z), dtype=float), pts.shape)
            dh_t = np.broadcast_to(np.asarray(fn.dh(pts, z), dtype=float), pts.shape)
            denom = ea + r_big
            g = dh_t / denom - h_t * r_small / denom**2
            x = np.minimum(data.x[idx], grid.tau)
            vals = -_restricted_trapezoid(pts, g, x)
            ev = data.delta[idx] == 1
            if ev.any():
                x_ev = x[ev]
                r_x = np.asarray(model.odds.density(x_ev, z), dtype=float)
                dh_x = np.broadcast_to(np.asarray(fn.dh(x_ev, z), dtype=float), x_ev.shape)
                bad = (r_x < DENSITY_FLOOR) & (np.abs(dh_x) > 0)
                if bad.any():
                    raise SingularityError(
                        f"hazard vanishes at event time {float(x_ev[np.argmax(bad)])}"
                    )
                safe_r = np.where(r_x < DENSITY_FLOOR, 1.0, r_x)
                ratio = np.where(r_x < DENSITY_FLOOR, 0.0, dh_x / safe_r)
                h_x = np.broadcast_to(np.asarray(fn.h(x_ev, z), dtype=float), x_ev.shape)
                d_x = ea + np.asarray(model.odds.value(x_ev, z), dtype=float)
                vals[ev] += ratio - h_x / d_x
            return vals

        return _batch_by_group(data, per_group)

    return SpaceElement("lambda1", f"h={fn.name}", single, batch)


def lambda2_space_element(name, alpha, censoring, tau, grid):
    def single(obs):
        return lambda2_element(obs, alpha, censoring, tau)

    def batch(data):
        pts = grid.points

        def per_group(z, arm, idx):
            g = np.broadcast_to(
                np.asarray(alpha(pts, arm, z), dtype=float), pts.shape
            ) * np.asarray(censoring.hazard(pts, arm, z), dtype=float)
            x = np.minimum(data.x[idx], grid.tau)
            vals = -_restricted_trapezoid(pts, g, x)
            cens = (data.delta[idx] == 0) & (x < tau)
            if cens.any():
                x_c = x[cens]
                vals[cens] += np.broadcast_to(
                    np.asarray(alpha(x_c, arm, z), dtype=float), x_c.shape
                )
            return vals

        return _batch_by_group(data, per_group)

    return SpaceElement("lambda2", f"alpha={name}", single, batch)


def lambda3_space_element(name, b_raw, treatment):
    center = None

    def single(obs):
        return lambda3_element(obs, b_raw, treatment)

    def batch(data):
        nonlocal center
        if center is None:
            center = exact_mean_b(b_raw, treatment)

        def per_group(z, arm, idx):
            return np.full(len(idx), float(b_raw(arm, z)) - center)

        return _batch_by_group(data, per_group)

    return SpaceElement("lambda3", f"b={name}", single, batch)


def default_test_functions(tau):
    """Odds-direction index bank; every member vanishes at t = 0."""
    return [
        TestFunction("t", lambda t, z: t, lambda t, z: np.ones_like(t)),
        TestFunction("t^2", lambda t, z: t**2, lambda t, z: 2.0 * t),
        TestFunction(
            "t*z1", lambda t, z: t * z[..., 0], lambda t, z: np.ones_like(t) * z[..., 0]
        ),
        TestFunction(
            "t*(tau-t)", lambda t, z: t * (tau - t), lambda t, z: tau - 2.0 * t
        ),
    ]


def default_alpha_functions():
    return [
        ("1", lambda t, a, z: np.ones_like(np.asarray(t, dtype=float))),
        ("a", lambda t, a, z: a * np.ones_like(np.asarray(t, dtype=float))),
        ("z1", lambda t, a, z: z[..., 0] * np.ones_like(np.asarray(t, dtype=float))),
        ("t*a", lambda t, a, z: np.asarray(t, dtype=float) * a),
        ("t^2", lambda t, a, z: np.asarray(t, dtype=float) ** 2),
    ]


def default_b_functions():
    return [
        ("a", lambda a, z: a * np.ones_like(z[..., 0])),
        ("z1", lambda a, z: z[..., 0]),
        ("a*z1", lambda a, z: a * z[..., 0]),
        ("z1^2", lambda a, z: z[..., 0] ** 2),
    ]


def make_space_elements(model, censoring, treatment, grid):
    """The shipped battery: 13 sample elements across the three spaces."""
    elems = [
        lambda1_space_element(fn, model.beta, model, grid)
        for fn in default_test_functions(model.tau)
    ]
    elems += [
        lambda2_space_element(name, alpha, censoring, model.tau, grid)
        for name, alpha in default_alpha_functions()
    ]
    elems += [
        lambda3_space_element(name, b_raw, treatment)
        for name, b_raw in default_b_functions()
    ]
    return elems


def score_element(kind, model, censoring, treatment, grid):
    """The naive or efficient score at the true beta, as a batch element."""
    nuis = oracle_nuisances(model, censoring, treatment)

    def batch(data):
        return ScoreEngine(data, nuis, grid, kind).scores(model.beta)

    def single(obs):
        return float(batch(Dataset.from_observations([obs]))[0])

    return SpaceElement("score", kind, single, batch)


def mc_inner_product(elem_x, elem_y, config, n, seed):
    """Sample mean and standard error of elem_x * elem_y over n draws.

    `config` carries the data-generating truth (model, censoring,
    treatment attributes).
    """
    rng = np.random.default_rng(seed)
    data = generate_dataset(n, config.model, config.treatment, config.censoring, rng)
    prod = np.asarray(elem_x.evaluate(data)) * np.asarray(elem_y.evaluate(data))
    est = float(np.mean(prod))
    se = float(np.std(prod, ddof=1) / np.sqrt(len(prod)))
    return est, se


@dataclass(frozen=True)
class TowerLawResult:
    lhs: float
    rhs: float
    gap: float
    se: float
    n_used: int


def tower_law_check(b_fn, t, z, model, censoring, treatment, n, seed):
    """Monte-Carlo E[B Y(t) | Z=z] against the exact two-term product form.

    The at-risk average is estimated from the simulated subjects with the
    requested covariate profile; the exact side sums B S S_c over the two
    arms with propensity weights.
    """
    rng = np.random.default_rng(seed)
    data = generate_dataset(n, model, treatment, censoring, rng)
    z = np.atleast_1d(np.asarray(z, dtype=float))
    sel = np.all(data.z == z[None, :], axis=1)
    if not sel.any():
        raise ValueError(f"no simulated subjects have z={z.tolist()}")
    at_risk = (data.x[sel] >= t).astype(float)
    b_by_arm = (float(b_fn(t, 0, z)), float(b_fn(t, 1, z)))
    b_vals = np.where(data.a[sel] == 1, b_by_arm[1], b_by_arm[0])
    draws = b_vals * at_risk
    lhs = float(np.mean(draws))
    se = float(np.std(draws, ddof=1) / np.sqrt(len(draws))) if len(draws) > 1 else 0.0
    pi = float(treatment.propensity(z))
    rhs = 0.0
    for arm, weight in ((0, 1.0 - pi), (1, pi)):
        ea = np.exp(model.beta * arm)
        s = ea / (ea + float(model.odds.value(t, z)))
        sc = float(censoring.survival(t, arm, z))
        rhs += weight * float(b_fn(t, arm, z)) * s * sc
    return TowerLawResult(lhs=lhs, rhs=rhs, gap=abs(lhs - rhs), se=se, n_used=int(sel.sum()))
