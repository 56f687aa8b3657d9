"""Data containers and exact-inversion sampling for the survival odds model.

Event times are drawn by inverting the survival function: with U uniform,
S(T | a, z) = U  iff  R(T, z) = exp(beta a) (1 - U) / U, and the odds
families expose the inverse of R in t.
"""

import csv
from dataclasses import dataclass

import numpy as np

from .errors import InvalidModelError


@dataclass(frozen=True)
class Observation:
    """One subject: follow-up time, event flag, arm, covariate row."""

    x: float
    delta: int
    a: int
    z: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "z", np.atleast_1d(np.asarray(self.z, dtype=float)))
        if not (self.x >= 0 and np.isfinite(self.x)):
            raise InvalidModelError(f"follow-up time must be finite and >= 0, got {self.x}")
        if self.delta not in (0, 1) or self.a not in (0, 1):
            raise InvalidModelError(f"delta and a must be 0/1, got {self.delta}, {self.a}")


class Dataset:
    """Columnar dataset with numpy columns x, delta, a, z (2-d)."""

    def __init__(self, x, delta, a, z):
        self.x = np.asarray(x, dtype=float)
        self.delta = np.asarray(delta, dtype=np.int64)
        self.a = np.asarray(a, dtype=np.int64)
        z = np.asarray(z, dtype=float)
        if z.ndim == 1:
            z = z[:, None]
        self.z = z
        n = len(self.x)
        if not (len(self.delta) == len(self.a) == self.z.shape[0] == n):
            raise InvalidModelError("dataset columns have mismatched lengths")
        if np.any(self.x < 0) or not np.all(np.isfinite(self.x)):
            raise InvalidModelError("follow-up times must be finite and >= 0")
        for name, col in (("delta", self.delta), ("a", self.a)):
            if not np.isin(col, (0, 1)).all():
                raise InvalidModelError(f"{name} column must be 0/1")

    def __len__(self):
        return len(self.x)

    def __getitem__(self, i):
        return Observation(float(self.x[i]), int(self.delta[i]), int(self.a[i]), self.z[i])

    def __iter__(self):
        return (self[i] for i in range(len(self)))

    def profiles(self):
        """Distinct covariate rows and the inverse index mapping subjects to them."""
        uniq, inverse = np.unique(self.z, axis=0, return_inverse=True)
        return uniq, inverse.ravel()

    @classmethod
    def from_observations(cls, observations):
        obs = list(observations)
        if not obs:
            raise InvalidModelError("cannot build a dataset from zero observations")
        return cls(
            [o.x for o in obs],
            [o.delta for o in obs],
            [o.a for o in obs],
            np.vstack([o.z for o in obs]),
        )

    def to_csv(self, path):
        k = self.z.shape[1]
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["x", "delta", "a"] + [f"z{j + 1}" for j in range(k)])
            for i in range(len(self)):
                writer.writerow(
                    [repr(float(self.x[i])), int(self.delta[i]), int(self.a[i])]
                    + [repr(float(v)) for v in self.z[i]]
                )

    @classmethod
    def from_csv(cls, path):
        with open(path, newline="") as fh:
            reader = csv.reader(fh)
            header = next(reader)
            expected = ["x", "delta", "a"]
            if header[:3] != expected or any(not h.startswith("z") for h in header[3:]):
                raise InvalidModelError(f"unexpected dataset header: {header}")
            rows = [row for row in reader if row]
        if not rows:
            raise InvalidModelError(f"no data rows in {path}")
        arr = np.asarray(rows, dtype=float)
        return cls(arr[:, 0], arr[:, 1].astype(np.int64), arr[:, 2].astype(np.int64), arr[:, 3:])


def sample_event_time(u, a, z, model, cap_at_tau=True):
    """Invert S(t | a, z) = u for t; u may be an array.

    u -> 1 gives t -> 0 and u -> 0 gives t -> infinity; draws beyond the
    horizon are capped at tau when `cap_at_tau` (the cap never changes the
    observed data because follow-up stops at tau anyway).
    """
    u = np.asarray(u, dtype=float)
    if np.any(u <= 0) or np.any(u >= 1):
        raise InvalidModelError("u must lie strictly inside (0, 1)")
    target = np.exp(model.beta * a) * (1.0 - u) / u
    t = np.asarray(model.odds.inverse(target, z), dtype=float)
    if cap_at_tau:
        t = np.minimum(t, model.tau)
    return t


def generate_dataset(n, model, treatment, censoring, rng):
    """Draw n subjects from the full data-generating law.

    Draw order is fixed for reproducibility: covariates, arms, event
    uniforms, censoring times.  delta = 1 exactly when the event precedes
    both the censoring time and the horizon.
    """
    if n <= 0:
        raise InvalidModelError(f"n must be positive, got {n}")
    law = treatment.law
    idx = law.sample_indices(rng, n)
    z = law.support[idx]
    pi = np.asarray(treatment.propensity(z), dtype=float)
    a = (rng.random(n) < pi).astype(np.int64)
    u = rng.random(n)
    u = np.clip(u, np.finfo(float).tiny, 1.0 - np.finfo(float).epsneg)
    t = np.empty(n, dtype=float)
    uniq, inverse = np.unique(z, axis=0, return_inverse=True)
    inverse = inverse.ravel()
    for j in range(uniq.shape[0]):
        for arm in (0, 1):
            mask = (inverse == j) & (a == arm)
            if mask.any():
                t[mask] = sample_event_time(u[mask], arm, uniq[j], model, cap_at_tau=True)
    c = np.asarray(censoring.sample(rng, a, z), dtype=float)
    delta = ((t < c) & (t < model.tau)).astype(np.int64)
    x = np.minimum(np.minimum(t, c), model.tau)
    return Dataset(x, delta, a, z)
