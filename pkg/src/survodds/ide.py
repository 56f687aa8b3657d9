"""Volterra integro-differential solver for the projection index h0.

The efficient score subtracts from the naive score its projection onto the
odds-direction tangent space; the projection is indexed by a function
h0(t, z) solving, per covariate profile z,

    dh0/dt = m(t) h0 + q(t) - v(t) * integral_0^t {w(u) dh0/du - k(u) h0} du

with h0(0, z) = 0.  The coefficients are conditional expectations over the
treatment arm given Z; with binary treatment they are exact two-term sums.
The solver is a product-integration predictor-corrector: trapezoid memory
integral, explicit-Euler prediction, one trapezoid correction, with the
slope equation solved exactly (it is linear in dh0/dt).

The equation pins down h0 only up to the anchoring of its first integral:
the differential relation is shared by a one-parameter family h0 - kappa *
eta, where eta solves the same equation with forcing v.  Orthogonality to
index perturbations that are free at the horizon requires the terminal
anchoring (the instantaneous term of the condition must vanish at tau, not
at 0).  With follow-up truncated at tau the at-risk probability stays
positive there, the two anchorings differ, and only the terminal one makes
the projection residual vanish; solve_projection applies the kappa
correction, while solve_h0 exposes the raw zero-anchored march.

An independent cross-check evaluates the orthogonality condition the
equation was derived from (a conditional expectation that must vanish for
almost every t) through a separate code path.
"""

import csv
from dataclasses import dataclass, replace

import numpy as np

from .errors import CoefficientSingularityError, InvalidModelError, SolverFailureError

DENSITY_FLOOR = 1e-12


@dataclass(frozen=True)
class TimeGrid:
    """Uniform grid 0 = t_0 < ... < t_m = tau."""

    points: np.ndarray

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float)
        object.__setattr__(self, "points", pts)
        if pts.ndim != 1 or len(pts) < 2:
            raise InvalidModelError("grid needs at least two points")
        if pts[0] != 0.0:
            raise InvalidModelError(f"grid must start at 0, got {pts[0]}")
        steps = np.diff(pts)
        if np.any(steps <= 0):
            raise InvalidModelError("grid points must be strictly increasing")
        if np.max(np.abs(steps - steps[0])) > 1e-12 * max(1.0, pts[-1]):
            raise InvalidModelError("grid spacing must be uniform")

    @property
    def m(self):
        return len(self.points) - 1

    @property
    def tau(self):
        return float(self.points[-1])

    @property
    def delta(self):
        return float(self.points[1] - self.points[0])


def make_grid(tau, m):
    if tau <= 0 or m < 2:
        raise InvalidModelError(f"need tau > 0 and m >= 2, got tau={tau}, m={m}")
    return TimeGrid(np.linspace(0.0, float(tau), int(m) + 1))


def expect_given_z(g, z, pi):
    """E[g(A) | Z=z] for binary treatment: pi(z) g(1) + (1 - pi(z)) g(0)."""
    p = float(pi(z)) if callable(pi) else float(pi)
    return p * g(1) + (1.0 - p) * g(0)


def negative_treatment_target(t, a, z):
    """The target direction whose projection defines the efficient score."""
    return -a * np.ones_like(np.asarray(t, dtype=float))


@dataclass(frozen=True)
class CoefficientTable:
    """Arrays m, q, v, w, k over one grid for one covariate profile.

    psi is the density of the memory part of the forcing (the integrand
    accumulated inside q); the boundary correction needs its total.
    """

    grid: TimeGrid
    z: np.ndarray
    beta: float
    m: np.ndarray
    q: np.ndarray
    v: np.ndarray
    w: np.ndarray
    k: np.ndarray
    psi: np.ndarray


def _arm_pieces(grid, z, beta, nuis):
    """Per-arm ingredients shared by the coefficient displays."""
    t = grid.points
    r_big = np.asarray(nuis.odds.value(t, z), dtype=float)
    r_small = np.asarray(nuis.odds.density(t, z), dtype=float)
    pi1 = float(nuis.propensity(z))
    pieces = []
    for a, weight in ((0, 1.0 - pi1), (1, pi1)):
        ea = np.exp(beta * a)
        sc = np.asarray(nuis.censoring.survival(t, a, z), dtype=float)
        pieces.append((a, weight, ea, sc, ea + r_big))
    return t, r_big, r_small, pieces


def coefficients(grid, z, beta, nuis, target=negative_treatment_target,
                 require_positive_density=True):
    """Evaluate the five coefficient displays on the grid.

    `target` is the direction h(t, a, z) being projected; the efficient
    score uses h = -a.  The integral inside q is accumulated by trapezoid.
    """
    z = np.atleast_1d(np.asarray(z, dtype=float))
    t, _, r_small, pieces = _arm_pieces(grid, z, beta, nuis)
    if require_positive_density and np.any(r_small[1:] < DENSITY_FLOOR):
        j = 1 + int(np.argmax(r_small[1:] < DENSITY_FLOOR))
        raise CoefficientSingularityError(
            f"odds density below {DENSITY_FLOOR} at t={t[j]}, z={z.tolist()}"
        )
    denom = np.zeros_like(t)
    e3 = np.zeros_like(t)
    e4 = np.zeros_like(t)
    q_jump = np.zeros_like(t)
    q_mem = np.zeros_like(t)
    for a, weight, ea, sc, d in pieces:
        h_a = np.broadcast_to(np.asarray(target(t, a, z), dtype=float), t.shape)
        denom += weight * sc * ea / d**2
        e3 += weight * sc * ea / d**3
        e4 += weight * sc * ea / d**4
        q_jump += weight * h_a * sc * ea**2 / d**3
        q_mem += weight * h_a * sc * ea**2 / d**4
    if np.any(denom <= 0.0):
        j = int(np.argmax(denom <= 0.0))
        raise CoefficientSingularityError(
            f"nonpositive conditional denominator at t={t[j]}, z={z.tolist()}"
        )
    psi = r_small * q_mem
    mem = np.concatenate(([0.0], np.cumsum(np.diff(t) * 0.5 * (psi[:-1] + psi[1:]))))
    table = CoefficientTable(
        grid=grid,
        z=z,
        beta=float(beta),
        m=r_small * e3 / denom,
        q=(r_small * q_jump + r_small * mem) / denom,
        v=r_small / denom,
        w=e3,
        k=r_small * e4,
        psi=psi,
    )
    for name in ("m", "q", "v", "w", "k"):
        arr = getattr(table, name)
        if not np.all(np.isfinite(arr)):
            j = int(np.argmax(~np.isfinite(arr)))
            raise CoefficientSingularityError(
                f"coefficient {name} non-finite at t={t[j]}, z={z.tolist()}"
            )
    return table


@dataclass(frozen=True)
class H0Solution:
    """Solved projection index on one grid for one covariate profile.

    memory is the running trapezoid of w dh0 - k h0, kept because the
    boundary correction and the residual both need it.
    """

    grid: TimeGrid
    z: np.ndarray
    h0: np.ndarray
    dh0: np.ndarray
    memory: np.ndarray
    residual_profile: np.ndarray
    residual: float
    projection_residual: float = None

    def eval_h0(self, t):
        return np.interp(t, self.grid.points, self.h0)

    def eval_dh0(self, t):
        return np.interp(t, self.grid.points, self.dh0)


def _difference_slopes(dt, h0):
    """Second-order slope of sampled values: central inside, one-sided at ends."""
    deriv = np.empty_like(h0)
    deriv[1:-1] = (h0[2:] - h0[:-2]) / (2.0 * dt)
    deriv[0] = (-3.0 * h0[0] + 4.0 * h0[1] - h0[2]) / (2.0 * dt)
    deriv[-1] = (3.0 * h0[-1] - 4.0 * h0[-2] + h0[-3]) / (2.0 * dt)
    return deriv


def _ide_residual(grid, coeffs, h0, dh0, memory):
    """Difference residual of the equation.

    Uses the stored h0 values only (not the stored slopes), so it checks
    the solve through a different expression than the stepping formula.
    """
    rhs = coeffs.m * h0 + coeffs.q - coeffs.v * memory
    return _difference_slopes(grid.delta, h0) - rhs


def solve_h0(grid, z, coeffs, residual_tol=None):
    """March the equation forward from h0(0, z) = 0.

    Each step solves the slope equation exactly (linear in the new slope),
    predicts by explicit Euler, corrects once by trapezoid.  The default
    residual tolerance is 1e-4 at m=2000 panels, rescaled by (2000/m)^2 on
    other grids and by the solution magnitude when it exceeds one.
    """
    m_c, q_c, v_c, w_c, k_c = (
        coeffs.m.tolist(),
        coeffs.q.tolist(),
        coeffs.v.tolist(),
        coeffs.w.tolist(),
        coeffs.k.tolist(),
    )
    dt = grid.delta
    half = 0.5 * dt
    n_pts = len(grid.points)
    h = [0.0] * n_pts
    d = [0.0] * n_pts
    mem = [0.0] * n_pts
    d[0] = q_c[0]
    integral = 0.0
    for i in range(n_pts - 1):
        j = i + 1
        g_prev = w_c[i] * d[i] - k_c[i] * h[i]
        base = integral + half * g_prev
        mj, qj, vj, wj, kj = m_c[j], q_c[j], v_c[j], w_c[j], k_c[j]
        scale = 1.0 + vj * half * wj

        def slope(h_new):
            return (mj * h_new + qj - vj * (base - half * kj * h_new)) / scale

        d_pred = slope(h[i] + dt * d[i])
        h[j] = h[i] + half * (d[i] + d_pred)
        d[j] = slope(h[j])
        integral = base + half * (wj * d[j] - kj * h[j])
        mem[j] = integral
    h0 = np.asarray(h)
    dh0 = np.asarray(d)
    memory = np.asarray(mem)
    res_profile = _ide_residual(grid, coeffs, h0, dh0, memory)
    res = float(np.max(np.abs(res_profile)))
    if residual_tol is None:
        size = max(1.0, float(np.max(np.abs(h0))), float(np.max(np.abs(dh0))))
        residual_tol = 1e-4 * (2000.0 / grid.m) ** 2 * size
    if res > residual_tol:
        err = SolverFailureError(
            f"equation residual {res:.3e} exceeds tolerance {residual_tol:.3e} "
            f"for z={coeffs.z.tolist()}"
        )
        err.residual_profile = res_profile
        raise err
    return H0Solution(
        grid=grid, z=coeffs.z, h0=h0, dh0=dh0, memory=memory,
        residual_profile=res_profile, residual=res,
    )


def projection_condition_residual(grid, z, beta, nuis, h0sol, target=negative_treatment_target):
    """Max over the grid of the conditional expectation that must vanish.

    Built term by term from the orthogonality condition, replacing the
    at-risk indicator inside expectations by S * S_c and averaging the
    binary arm exactly.  Independent of the solver's rearrangement: the
    only shared inputs are the nuisance functions and the solved h0
    values.  The slope is recomputed from those values by differences;
    the stored slope array satisfies the stepping identity by
    construction and would make this check vacuous.

    Grid points where the odds density is below the positivity floor are
    excluded from the max (the condition holds almost everywhere, and the
    instantaneous term divides by the density).
    """
    z = np.atleast_1d(np.asarray(z, dtype=float))
    t, _, r_small, pieces = _arm_pieces(grid, z, beta, nuis)
    h0 = h0sol.h0
    dh0 = _difference_slopes(grid.delta, h0)
    inst = np.zeros_like(t)
    rate = np.zeros_like(t)
    ok = r_small >= DENSITY_FLOOR
    for a, weight, ea, sc, d in pieces:
        h_a = np.broadcast_to(np.asarray(target(t, a, z), dtype=float), t.shape)
        s = ea / d
        with np.errstate(divide="ignore", invalid="ignore"):
            brace = h_a - dh0 * d / (ea * np.where(ok, r_small, np.nan)) + h0 / ea
        inst += weight * brace * ea * s * sc / d**2
        rate += weight * (
            h_a * ea**2 * r_small * sc / d**4
            - dh0 * ea * sc / d**3
            + h0 * ea * r_small * sc / d**4
        )
    cum = np.concatenate(([0.0], np.cumsum(np.diff(t) * 0.5 * (rate[:-1] + rate[1:]))))
    # The inner integral of the condition runs from t to the horizon: the
    # instantaneous term must cancel the remaining mass, and in particular
    # vanish at tau itself.
    cond = inst - (cum[-1] - cum)
    if not ok.any():
        raise CoefficientSingularityError(
            f"odds density below {DENSITY_FLOOR} on the whole grid for z={z.tolist()}"
        )
    return float(np.max(np.abs(cond[ok])))


def solve_projection(grid, z, beta, nuis, target=negative_treatment_target,
                     residual_tol=None, diagnostic=True):
    """Projection index for one covariate profile, terminally anchored.

    Solves the zero-anchored equation twice (forcing q, then forcing v) and
    combines them so the instantaneous term of the orthogonality condition
    vanishes at the horizon.  With diagnostic=True the combined solution is
    cross-checked against the condition itself.
    """
    table = coefficients(grid, z, beta, nuis, target=target)
    base = solve_h0(grid, z, table, residual_tol=residual_tol)
    aux_table = replace(table, q=table.v, psi=np.zeros_like(table.psi))
    aux = solve_h0(grid, z, aux_table, residual_tol=residual_tol)
    forcing_total = float(np.trapezoid(table.psi, grid.points))
    scale = 1.0 - aux.memory[-1]
    if abs(scale) < 1e-10:
        raise SolverFailureError(
            f"boundary correction degenerate (1 - memory = {scale:.3e}) "
            f"for z={table.z.tolist()}"
        )
    kappa = (forcing_total - base.memory[-1]) / scale
    sol = H0Solution(
        grid=grid,
        z=table.z,
        h0=base.h0 - kappa * aux.h0,
        dh0=base.dh0 - kappa * aux.dh0,
        memory=base.memory - kappa * aux.memory,
        residual_profile=base.residual_profile - kappa * aux.residual_profile,
        residual=float(
            np.max(np.abs(base.residual_profile - kappa * aux.residual_profile))
        ),
        projection_residual=None,
    )
    if not diagnostic:
        return sol
    proj = projection_condition_residual(grid, z, beta, nuis, sol, target=target)
    return replace(sol, projection_residual=proj)


def write_h0_profiles(path, solutions):
    """Dump solved profiles to one CSV: z columns, then t,h0,dh0,residual."""
    solutions = list(solutions)
    if not solutions:
        raise InvalidModelError("no profiles to write")
    k = len(np.atleast_1d(solutions[0].z))
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow([f"z{j + 1}" for j in range(k)] + ["t", "h0", "dh0", "residual"])
        for sol in solutions:
            zvals = [repr(float(v)) for v in np.atleast_1d(sol.z)]
            for i, t in enumerate(sol.grid.points):
                writer.writerow(
                    zvals
                    + [
                        repr(float(t)),
                        repr(float(sol.h0[i])),
                        repr(float(sol.dh0[i])),
                        repr(float(sol.residual_profile[i])),
                    ]
                )
