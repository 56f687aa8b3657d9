"""Per-observation scores, the estimating equation, and variance.

Two score kinds share one interface.  The naive kind is the plain
likelihood score for beta; its martingale integral has a closed form.  The
efficient kind subtracts the projection onto the odds-direction nuisance
space, which enters through the solved index h0 and its slope.

The d beta integrand V(t) = -A - dh0 * (e^{bA} + R) / (e^{bA} r) + h0 / e^{bA}
divides by the odds density, but inside the compensator integral the
density cancels:

    V(t) r e^{bA} / (e^{bA} + R)^2
        = (-A + h0 / e^{bA}) r e^{bA} / (e^{bA} + R)^2 - dh0 / (e^{bA} + R),

so quadrature never divides by r; only the event-time jump term does.
"""

from dataclasses import dataclass

import numpy as np

from .errors import (
    FlatScoreError,
    HorizonError,
    NonIdentifiedError,
    NoRootError,
    SingularityError,
)
from .ide import DENSITY_FLOOR, solve_projection
from .model import naive_scores

BRACKET_LIMIT = 10.0


def efficient_integrand(t, obs, beta, nuis, h0sol):
    """V(t) for one observation, in the literal (uncancelled) form."""
    ea = np.exp(beta * obs.a)
    r_big = float(nuis.odds.value(t, obs.z))
    r_small = float(nuis.odds.density(t, obs.z))
    if r_small < DENSITY_FLOOR:
        raise SingularityError(f"odds density {r_small} below {DENSITY_FLOOR} at t={t}")
    h0 = float(h0sol.eval_h0(t))
    dh0 = float(h0sol.eval_dh0(t))
    return -obs.a - dh0 * (ea + r_big) / (ea * r_small) + h0 / ea


def efficient_score(obs, beta, nuis, h0sol, grid):
    """Efficient score for one observation.

    Jump term delta * V(X) * S(X) minus the compensator integral of
    V r e^{bA} / (e^{bA} + R)^2 by trapezoid on the grid restricted to
    [0, X], with the partial last interval interpolated linearly.
    """
    pts = grid.points
    x = float(obs.x)
    if x > grid.tau + 1e-9 * (1.0 + grid.tau):
        raise HorizonError(f"observation time {x} beyond grid horizon {grid.tau}")
    x = min(x, grid.tau)
    ea = np.exp(beta * obs.a)
    r_big = np.asarray(nuis.odds.value(pts, obs.z), dtype=float)
    r_small = np.asarray(nuis.odds.density(pts, obs.z), dtype=float)
    denom = ea + r_big
    g = (-obs.a + h0sol.h0 / ea) * r_small * ea / denom**2 - h0sol.dh0 / denom
    j = min(max(int(np.searchsorted(pts, x, side="right")) - 1, 0), len(pts) - 2)
    dt = grid.delta
    cum = np.concatenate(([0.0], np.cumsum(dt * 0.5 * (g[:-1] + g[1:]))))
    frac = (x - pts[j]) / dt
    g_x = g[j] + frac * (g[j + 1] - g[j])
    integral = float(cum[j] + (x - pts[j]) * 0.5 * (g[j] + g_x))
    jump = 0.0
    if obs.delta:
        v_x = efficient_integrand(x, obs, beta, nuis, h0sol)
        s_x = ea / (ea + float(nuis.odds.value(x, obs.z)))
        jump = obs.delta * v_x * s_x
    return float(jump - integral)


@dataclass(frozen=True)
class ScoreReport:
    """Estimation result with solver diagnostics."""

    kind: str
    beta_hat: float
    se_hat: float
    n: int
    iterations: int
    bracket: tuple
    residual: float
    score_mean_at_truth: float = None

    def to_dict(self):
        return {
            "kind": self.kind,
            "beta_hat": self.beta_hat,
            "se_hat": self.se_hat,
            "n": self.n,
            "iterations": self.iterations,
            "bracket": list(self.bracket),
            "residual": self.residual,
            "score_mean_at_truth": self.score_mean_at_truth,
        }


class ScoreEngine:
    """Vectorized per-observation scores at trial beta values, with caching.

    Subjects are grouped by (covariate profile, arm); grid quantities are
    computed once per group and reused.  Everything that does not depend
    on beta (odds values at the observed times, quadrature bin indices) is
    precomputed; score arrays are cached per trial beta, which the root
    finder, the variance estimator, and diagnostics all share.
    """

    def __init__(self, data, nuis, grid, kind):
        if kind not in ("naive", "efficient"):
            raise ValueError(f"unknown score kind {kind!r}")
        self.data = data
        self.nuis = nuis
        self.grid = grid
        self.kind = kind
        self._cache = {}
        pts = grid.points
        x = data.x
        if float(np.max(x)) > grid.tau + 1e-9 * (1.0 + grid.tau):
            raise HorizonError(
                f"observation time {float(np.max(x))} beyond grid horizon {grid.tau}"
            )
        self.x = np.minimum(x, grid.tau)
        self.profiles, self._inverse = data.profiles()
        self._groups = []
        self.r_at_x = np.empty(len(data))
        self.rd_at_x = np.empty(len(data))
        self._bin = np.clip(np.searchsorted(pts, self.x, side="right") - 1, 0, len(pts) - 2)
        self._frac = (self.x - pts[self._bin]) / grid.delta
        for p_idx in range(len(self.profiles)):
            z = self.profiles[p_idx]
            sel = self._inverse == p_idx
            self.r_at_x[sel] = nuis.odds.value(self.x[sel], z)
            self.rd_at_x[sel] = nuis.odds.density(self.x[sel], z)
            for arm in (0, 1):
                idx = np.where(sel & (data.a == arm))[0]
                if len(idx):
                    self._groups.append((p_idx, arm, idx))
        if kind == "efficient":
            self._grid_r = [
                (
                    np.asarray(nuis.odds.value(pts, self.profiles[p]), dtype=float),
                    np.asarray(nuis.odds.density(pts, self.profiles[p]), dtype=float),
                )
                for p in range(len(self.profiles))
            ]

    def h0_solutions(self, beta):
        """Solve the projection index for every profile at this beta."""
        return [
            solve_projection(self.grid, self.profiles[p], beta, self.nuis, diagnostic=False)
            for p in range(len(self.profiles))
        ]

    def scores(self, beta):
        beta = float(beta)
        if beta in self._cache:
            return self._cache[beta]
        if self.kind == "naive":
            out = naive_scores(self.x, self.data.delta, self.data.a, self.r_at_x, beta)
        else:
            out = self._efficient_scores(beta)
        self._cache[beta] = out
        return out

    def _efficient_scores(self, beta):
        pts = self.grid.points
        dt = self.grid.delta
        sols = self.h0_solutions(beta)
        out = np.empty(len(self.data))
        for p_idx, arm, idx in self._groups:
            sol = sols[p_idx]
            r_big, r_small = self._grid_r[p_idx]
            ea = np.exp(beta * arm)
            denom = ea + r_big
            g = (-arm + sol.h0 / ea) * r_small * ea / denom**2 - sol.dh0 / denom
            cum = np.concatenate(([0.0], np.cumsum(dt * 0.5 * (g[:-1] + g[1:]))))
            j = self._bin[idx]
            x = self.x[idx]
            g_x = g[j] + self._frac[idx] * (g[j + 1] - g[j])
            integral = cum[j] + (x - pts[j]) * 0.5 * (g[j] + g_x)
            jump = np.zeros(len(idx))
            ev = self.data.delta[idx] == 1
            if ev.any():
                x_ev = x[ev]
                rd = self.rd_at_x[idx][ev]
                if np.any(rd < DENSITY_FLOOR):
                    bad = float(x_ev[np.argmax(rd < DENSITY_FLOOR)])
                    raise SingularityError(
                        f"odds density below {DENSITY_FLOOR} at event time {bad}"
                    )
                rb = self.r_at_x[idx][ev]
                h0_x = np.interp(x_ev, pts, sol.h0)
                dh0_x = np.interp(x_ev, pts, sol.dh0)
                v_x = -arm - dh0_x * (ea + rb) / (ea * rd) + h0_x / ea
                jump[ev] = v_x * ea / (ea + rb)
            out[idx] = jump - integral
        return out

    def score_sum(self, beta):
        return float(np.sum(self.scores(beta)))


def bracketed_root(f, lo, hi, xtol=1e-10, max_iter=300):
    """Root of f on [lo, hi] by bisection with secant acceleration.

    Requires a sign change on the bracket.  Returns (root, iterations,
    f(root)).  Alternates forced bisection with secant proposals, so the
    bracket width halves at least every other step.
    """
    f_lo, f_hi = f(lo), f(hi)
    if f_lo == 0.0:
        return lo, 0, f_lo
    if f_hi == 0.0:
        return hi, 0, f_hi
    if np.sign(f_lo) == np.sign(f_hi):
        raise NoRootError(f"no sign change on [{lo}, {hi}]: f={f_lo:.3e}, {f_hi:.3e}")
    it = 0
    x, f_x = lo, f_lo
    while hi - lo > xtol * (1.0 + abs(lo) + abs(hi)) and it < max_iter:
        it += 1
        use_secant = it % 2 == 0 and f_hi != f_lo
        if use_secant:
            x = hi - f_hi * (hi - lo) / (f_hi - f_lo)
            margin = 0.01 * (hi - lo)
            if not (lo + margin < x < hi - margin):
                x = 0.5 * (lo + hi)
        else:
            x = 0.5 * (lo + hi)
        f_x = f(x)
        if f_x == 0.0:
            return x, it, f_x
        if np.sign(f_x) == np.sign(f_lo):
            lo, f_lo = x, f_x
        else:
            hi, f_hi = x, f_x
    x = 0.5 * (lo + hi)
    return x, it, f(x)


def _expand_bracket(f, center, halfwidth):
    """Grow a bracket around `center` until the score sum changes sign."""
    lo = max(center - halfwidth, -BRACKET_LIMIT)
    hi = min(center + halfwidth, BRACKET_LIMIT)
    while True:
        f_lo, f_hi = f(lo), f(hi)
        if np.sign(f_lo) != np.sign(f_hi) or f_lo == 0.0 or f_hi == 0.0:
            return lo, hi
        if lo <= -BRACKET_LIMIT and hi >= BRACKET_LIMIT:
            raise NoRootError(
                f"score sum has no sign change on [{-BRACKET_LIMIT}, {BRACKET_LIMIT}]: "
                f"ends {f_lo:.3e}, {f_hi:.3e}"
            )
        lo = max(center - 2.0 * (center - lo), -BRACKET_LIMIT)
        hi = min(center + 2.0 * (hi - center), BRACKET_LIMIT)


def solve_beta(data, nuis, grid, kind="efficient", bracket=None, beta_tol=1e-10,
               true_beta=None, compute_se=True):
    """Solve the estimating equation sum_i U_i(beta) = 0.

    For the efficient kind the projection index is re-solved at every trial
    beta (the equation's coefficients depend on beta), with per-beta
    caching shared with the variance step.  The default bracket is centered
    at the naive estimate for the efficient kind and expanded on demand.
    """
    if len(data) == 0:
        raise NoRootError("empty dataset")
    if int(data.a.min()) == int(data.a.max()):
        raise NonIdentifiedError(f"all subjects in arm {int(data.a[0])}")
    engine = ScoreEngine(data, nuis, grid, kind)
    f = engine.score_sum
    if bracket is None:
        if kind == "efficient":
            naive_engine = ScoreEngine(data, nuis, grid, "naive")
            lo, hi = _expand_bracket(naive_engine.score_sum, 0.0, 1.0)
            center, _, _ = bracketed_root(naive_engine.score_sum, lo, hi, xtol=1e-6)
            lo, hi = _expand_bracket(f, center, 1.0)
        else:
            lo, hi = _expand_bracket(f, 0.0, 1.0)
    else:
        lo, hi = _expand_bracket(f, 0.5 * (bracket[0] + bracket[1]),
                                 0.5 * (bracket[1] - bracket[0]))
    root, iters, f_root = bracketed_root(f, lo, hi, xtol=beta_tol)
    if abs(f_root) >= 1e-8 * len(data):
        raise NoRootError(
            f"score sum {f_root:.3e} at beta={root} exceeds residual bound "
            f"{1e-8 * len(data):.3e}; equation may be discontinuous here"
        )
    se = sandwich_se(data, root, nuis, grid, kind, engine=engine) if compute_se else float("nan")
    mean_at_truth = None
    if true_beta is not None:
        mean_at_truth = float(np.mean(engine.scores(float(true_beta))))
    return ScoreReport(
        kind=kind,
        beta_hat=float(root),
        se_hat=se,
        n=len(data),
        iterations=iters,
        bracket=(float(lo), float(hi)),
        residual=float(f_root),
        score_mean_at_truth=mean_at_truth,
    )


def sandwich_se(data, beta_hat, nuis, grid, kind, engine=None, fd_step=None):
    """Sandwich standard error at the solved beta.

    B is the mean score slope by central finite difference (re-solving the
    projection index at the perturbed betas for the efficient kind); C is
    the mean squared score.
    """
    if engine is None:
        engine = ScoreEngine(data, nuis, grid, kind)
    n = len(data)
    step = fd_step if fd_step is not None else 1e-5 * (1.0 + abs(beta_hat))
    b = float(np.mean(engine.scores(beta_hat + step) - engine.scores(beta_hat - step))) / (
        2.0 * step
    )
    if abs(b) < 1e-10:
        raise FlatScoreError(f"score slope {b:.3e} too flat for a sandwich variance")
    c = float(np.mean(engine.scores(beta_hat) ** 2))
    return float(np.sqrt(c / (b * b * n)))
