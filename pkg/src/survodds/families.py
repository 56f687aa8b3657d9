"""Concrete odds, censoring, treatment, and covariate-law families.

An odds function object exposes
    value(t, z)   -> R(t, z), the survival odds scale, nondecreasing in t
    density(t, z) -> r(t, z) = dR/dt
    inverse(c, z) -> smallest t with R(t, z) = c  (used for sampling)
with `t` and `c` accepting scalars or 1-d arrays and `z` a covariate vector.
"""

import numpy as np
from scipy.interpolate import PchipInterpolator
from scipy.optimize import brentq

from .errors import NumericInversionError


def _gamma_shift(gamma, z):
    if len(gamma) == 0:
        return 0.0
    z = np.asarray(z, dtype=float)
    return float(np.dot(gamma, z))


class LogLogisticOdds:
    """R(t, z) = (t / alpha)^kappa * exp(gamma' z).

    Closed-form inverse, so event times can be sampled exactly.
    """

    def __init__(self, alpha, kappa, gamma=()):
        if alpha <= 0:
            raise ValueError(f"alpha must be positive, got {alpha}")
        if kappa <= 0:
            raise ValueError(f"kappa must be positive, got {kappa}")
        self.alpha = float(alpha)
        self.kappa = float(kappa)
        self.gamma = np.atleast_1d(np.asarray(gamma, dtype=float))

    def value(self, t, z):
        t = np.asarray(t, dtype=float)
        return (t / self.alpha) ** self.kappa * np.exp(_gamma_shift(self.gamma, z))

    def density(self, t, z):
        t = np.asarray(t, dtype=float)
        with np.errstate(divide="ignore"):
            out = (
                self.kappa
                / self.alpha
                * (t / self.alpha) ** (self.kappa - 1.0)
                * np.exp(_gamma_shift(self.gamma, z))
            )
        return out

    def inverse(self, c, z):
        c = np.asarray(c, dtype=float)
        scaled = c * np.exp(-_gamma_shift(self.gamma, z))
        return self.alpha * scaled ** (1.0 / self.kappa)

    def params(self):
        return {
            "family": "loglogistic",
            "alpha": self.alpha,
            "kappa": self.kappa,
            "gamma": self.gamma.tolist(),
        }


class TabulatedOdds:
    """Monotone-spline odds: one (t, R) knot table per covariate profile.

    Interpolation is shape-preserving (PCHIP), so a strictly increasing
    knot table yields a nondecreasing R with a nonnegative derivative.
    The first knot must be (0, 0).
    """

    def __init__(self, tables):
        """tables: dict mapping tuple(z) -> (t_knots, r_knots) arrays."""
        self._splines = {}
        self._tau = {}
        for key, (tk, rk) in tables.items():
            tk = np.asarray(tk, dtype=float)
            rk = np.asarray(rk, dtype=float)
            if tk[0] != 0.0 or rk[0] != 0.0:
                raise ValueError(f"knot table for z={key} must start at (0, 0)")
            if np.any(np.diff(tk) <= 0) or np.any(np.diff(rk) <= 0):
                raise ValueError(f"knot table for z={key} must be strictly increasing")
            spl = PchipInterpolator(tk, rk, extrapolate=False)
            self._splines[self._key(key)] = (spl, spl.derivative())
            self._tau[self._key(key)] = (tk[-1], rk[-1])

    @staticmethod
    def _key(z):
        return tuple(float(v) for v in np.atleast_1d(z))

    def _lookup(self, z):
        key = self._key(z)
        if key not in self._splines:
            raise KeyError(f"no odds table for covariate profile z={key}")
        return key

    def value(self, t, z):
        key = self._lookup(z)
        spl, _ = self._splines[key]
        return spl(np.asarray(t, dtype=float))

    def density(self, t, z):
        key = self._lookup(z)
        _, dspl = self._splines[key]
        return dspl(np.asarray(t, dtype=float))

    def inverse(self, c, z):
        key = self._lookup(z)
        spl, _ = self._splines[key]
        t_max, r_max = self._tau[key]
        c_arr = np.atleast_1d(np.asarray(c, dtype=float))
        out = np.empty_like(c_arr)
        for i, ci in enumerate(c_arr):
            if ci <= 0.0:
                out[i] = 0.0
            elif ci >= r_max:
                out[i] = np.inf
            else:
                try:
                    out[i] = brentq(lambda t: float(spl(t)) - ci, 0.0, t_max)
                except ValueError as exc:
                    raise NumericInversionError(
                        f"inversion failed for c={ci} on z={key}: "
                        f"R(0)={float(spl(0.0))}, R({t_max})={r_max} ({exc})"
                    ) from exc
        return out if np.ndim(c) else float(out[0])

    def params(self):
        return {"family": "tabulated", "profiles": sorted(self._splines)}


class PerturbedOdds:
    """R(t, z) + eps * h(t, z): the one-parameter tilt used to probe the
    odds-direction tangent space. `h` must vanish at t = 0."""

    def __init__(self, base, h, dh, eps):
        self.base = base
        self.h = h
        self.dh = dh
        self.eps = float(eps)

    def value(self, t, z):
        t = np.asarray(t, dtype=float)
        return self.base.value(t, z) + self.eps * self.h(t, z)

    def density(self, t, z):
        t = np.asarray(t, dtype=float)
        return self.base.density(t, z) + self.eps * self.dh(t, z)


# --- censoring -------------------------------------------------------------


class NoCensoring:
    """C = +infinity: every subject is followed to the event or to tau."""

    def survival(self, t, a, z):
        return np.ones_like(np.asarray(t, dtype=float))

    def hazard(self, t, a, z):
        return np.zeros_like(np.asarray(t, dtype=float))

    def cumulative_hazard(self, t, a, z):
        return np.zeros_like(np.asarray(t, dtype=float))

    def sample(self, rng, a, z_rows):
        return np.full(np.shape(a), np.inf)

    def params(self):
        return {"family": "none"}


class ExponentialCensoring:
    """Exponential censoring with an arm-specific rate (independent of z)."""

    def __init__(self, rate0, rate1):
        if rate0 < 0 or rate1 < 0:
            raise ValueError("censoring rates must be nonnegative")
        self.rates = (float(rate0), float(rate1))

    def _rate(self, a):
        a = np.asarray(a)
        return np.where(a == 1, self.rates[1], self.rates[0])

    def survival(self, t, a, z):
        return np.exp(-self._rate(a) * np.asarray(t, dtype=float))

    def hazard(self, t, a, z):
        return self._rate(a) * np.ones_like(np.asarray(t, dtype=float))

    def cumulative_hazard(self, t, a, z):
        return self._rate(a) * np.asarray(t, dtype=float)

    def sample(self, rng, a, z_rows):
        rate = self._rate(a)
        u = rng.random(np.shape(a))
        with np.errstate(divide="ignore"):
            draw = np.where(rate > 0, -np.log1p(-u) / np.where(rate > 0, rate, 1.0), np.inf)
        return draw

    def params(self):
        return {"family": "exponential", "rate0": self.rates[0], "rate1": self.rates[1]}


# --- treatment and covariates ----------------------------------------------


class ConstantPropensity:
    def __init__(self, p):
        if not 0.0 < p < 1.0:
            raise ValueError(f"propensity must lie in (0, 1), got {p}")
        self.p = float(p)

    def __call__(self, z):
        z = np.asarray(z, dtype=float)
        if z.ndim <= 1:
            return self.p
        return np.full(z.shape[0], self.p)

    def params(self):
        return {"kind": "constant", "value": self.p}


class LogisticPropensity:
    """pi(z) = expit(intercept + coef' z)."""

    def __init__(self, intercept, coef):
        self.intercept = float(intercept)
        self.coef = np.atleast_1d(np.asarray(coef, dtype=float))

    def __call__(self, z):
        z = np.asarray(z, dtype=float)
        eta = self.intercept + (z @ self.coef if z.ndim > 1 else float(np.dot(z, self.coef)))
        return 1.0 / (1.0 + np.exp(-eta))

    def params(self):
        return {"kind": "logistic", "intercept": self.intercept, "coef": self.coef.tolist()}


class DiscreteCovariateLaw:
    """Finite covariate support with point masses.

    Keeping Z discrete makes every conditional expectation given Z an exact
    finite sum, which the coefficient computations rely on.
    """

    def __init__(self, support, probs):
        self.support = np.atleast_2d(np.asarray(support, dtype=float))
        self.probs = np.asarray(probs, dtype=float)
        if self.support.shape[0] != self.probs.shape[0]:
            raise ValueError("support and probs length mismatch")
        if np.any(~np.isfinite(self.support)):
            raise ValueError("covariate support must be finite")
        if np.any(self.probs <= 0):
            raise ValueError("support probabilities must be positive")
        if abs(self.probs.sum() - 1.0) > 1e-12:
            raise ValueError(f"support probabilities sum to {self.probs.sum()}, not 1")
        self._cum = np.cumsum(self.probs)

    @property
    def dim(self):
        return self.support.shape[1]

    def sample_indices(self, rng, n):
        u = rng.random(n)
        return np.minimum(np.searchsorted(self._cum, u, side="right"), len(self.probs) - 1)

    def pmf(self, z):
        key = np.atleast_1d(np.asarray(z, dtype=float))
        for row, p in zip(self.support, self.probs):
            if np.array_equal(row, key):
                return float(p)
        raise KeyError(f"z={key.tolist()} is not in the covariate support")

    def params(self):
        return {"values": self.support.tolist(), "probs": self.probs.tolist()}


class TreatmentModel:
    """Joint treatment/covariate law, factorized as pi(z) * f_Z(z)."""

    def __init__(self, propensity, law):
        self.propensity = propensity
        self.law = law

    def params(self):
        return {"propensity": self.propensity.params(), "law": self.law.params()}
