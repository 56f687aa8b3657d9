"""Nuisance triple (odds scale, censoring survival, propensity).

Three provenances: oracles (truth passed through), parametric working-model
fits, and deliberately misspecified variants for sensitivity runs.  The
covariate marginal f_Z is never estimated; it cancels from every quantity
the estimator evaluates.
"""

from dataclasses import dataclass, field

import numpy as np
from scipy import optimize

from .errors import FitFailureError, InvalidModelError, PositivityViolationError
from .families import ConstantPropensity, ExponentialCensoring, LogisticPropensity, LogLogisticOdds

PROP_CLAMP = 1e-6


@dataclass(frozen=True)
class NuisanceSet:
    """Immutable bundle: R-hat with density, censoring survival, propensity."""

    odds: object
    censoring: object
    propensity: object
    provenance: str
    reports: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.provenance not in ("oracle", "fitted", "misspecified"):
            raise InvalidModelError(f"unknown provenance tag {self.provenance!r}")

    def validate(self, support, tau, n_grid=64):
        """Check the structural invariants on a grid over each support point."""
        t = np.linspace(0.0, tau, n_grid + 1)
        for z in np.atleast_2d(np.asarray(support, dtype=float)):
            r_big = np.asarray(self.odds.value(t, z), dtype=float)
            if abs(float(r_big[0])) > 1e-9:
                raise InvalidModelError(f"fitted R(0, z) = {r_big[0]} != 0 for z={z}")
            if np.any(np.diff(r_big) < -1e-9 * max(1.0, float(r_big[-1]))):
                raise InvalidModelError(f"fitted R not nondecreasing for z={z}")
            pi = float(self.propensity(z))
            if not 0.0 < pi < 1.0:
                raise PositivityViolationError(f"propensity {pi} outside (0, 1) at z={z}")
            for a in (0, 1):
                sc = np.asarray(self.censoring.survival(t, a, z), dtype=float)
                if abs(float(sc[0]) - 1.0) > 1e-12:
                    raise InvalidModelError(f"S_c(0 | a={a}, z={z}) = {sc[0]} != 1")
                if np.any(np.diff(sc) > 1e-12):
                    raise InvalidModelError(f"S_c not nonincreasing for a={a}, z={z}")
        return True


def oracle_nuisances(model, censoring, treatment):
    """Wrap the true data-generating functions; provenance 'oracle'."""
    return NuisanceSet(
        odds=model.odds,
        censoring=censoring,
        propensity=treatment.propensity,
        provenance="oracle",
    )


class _ClampedLogistic(LogisticPropensity):
    """Fitted propensity with predictions clamped away from 0 and 1."""

    def __call__(self, z):
        return np.clip(super().__call__(z), PROP_CLAMP, 1.0 - PROP_CLAMP)

    def params(self):
        out = super().params()
        out["clamp"] = PROP_CLAMP
        return out


def fit_propensity(data, max_iter=100, grad_tol=1e-8):
    """Logistic regression of A on (1, Z) by Newton iterations.

    Returns (propensity, report).  Single-arm data cannot identify a
    propensity in (0, 1) and raise immediately; separation shows up as
    non-convergence within `max_iter`.
    """
    a = np.asarray(data.a, dtype=float)
    if a.min() == a.max():
        raise PositivityViolationError(
            f"all subjects in arm {int(a[0])}: propensity not estimable"
        )
    design = np.column_stack([np.ones(len(a)), data.z])
    w = np.zeros(design.shape[1])
    grad_norm = np.inf
    for it in range(1, max_iter + 1):
        eta = design @ w
        p = 1.0 / (1.0 + np.exp(-eta))
        grad = design.T @ (a - p)
        grad_norm = float(np.max(np.abs(grad)))
        if grad_norm < grad_tol:
            break
        weight = np.clip(p * (1.0 - p), 1e-10, None)
        hess = design.T @ (design * weight[:, None])
        try:
            step = np.linalg.solve(hess, grad)
        except np.linalg.LinAlgError:
            step = np.linalg.lstsq(hess, grad, rcond=None)[0]
        w = w + step
    else:
        raise FitFailureError(
            f"propensity Newton did not converge in {max_iter} iterations "
            f"(gradient max {grad_norm:.3e}); data may be separated"
        )
    report = {
        "model": "logistic",
        "intercept": float(w[0]),
        "coef": w[1:].tolist(),
        "iterations": it,
        "grad_max": grad_norm,
        "converged": True,
    }
    return _ClampedLogistic(w[0], w[1:]), report


def _odds_negloglik_and_grad(theta, x, delta, a, z, log_x, fixed_kappa):
    """Mean negative failure-time log-likelihood for the log-logistic family.

    theta packs (beta, log alpha, log kappa, gamma...); log kappa is dropped
    from the packing when `fixed_kappa` is given.
    """
    beta, log_alpha = theta[0], theta[1]
    if fixed_kappa is None:
        kappa = np.exp(theta[2])
        gamma = theta[3:]
    else:
        kappa = fixed_kappa
        gamma = theta[2:]
    log_r_big = kappa * (log_x - log_alpha) + z @ gamma
    r_big = np.exp(log_r_big)
    e_beta = np.exp(beta * a)
    denom = e_beta + r_big
    loglik = delta * (np.log(kappa) + log_r_big - log_x) + beta * a - (1.0 + delta) * np.log(denom)
    n = len(x)
    frac = (1.0 + delta) * r_big / denom
    d_beta = np.sum(a * (1.0 - (1.0 + delta) * e_beta / denom)) / n
    d_lalpha = np.sum((delta - frac) * (-kappa)) / n
    grads = [d_beta, d_lalpha]
    if fixed_kappa is None:
        s_lk = kappa * (log_x - log_alpha)
        d_lkappa = np.sum(delta * (1.0 + s_lk) - frac * s_lk) / n
        grads.append(d_lkappa)
    if z.shape[1]:
        grads.extend(z.T @ (delta - frac) / n)
    return -np.sum(loglik) / n, -np.asarray(grads)


def fit_odds_parametric(data, fixed_kappa=None, grad_check_tol=1e-3):
    """Maximum likelihood for the log-logistic odds family.

    Maximizes the failure-time factor of the likelihood over
    (beta, alpha, kappa, gamma) by BFGS with an analytic gradient; the
    gradient is cross-checked against central differences at the start
    point.  Returns (odds, beta_pre, report); beta_pre is a by-product
    diagnostic, not the final estimator.
    """
    delta = np.asarray(data.delta, dtype=float)
    if delta.sum() == 0:
        raise FitFailureError("no events: odds scale not estimable")
    x = np.asarray(data.x, dtype=float)
    if np.any(x[delta == 1] <= 0):
        raise InvalidModelError("event at time 0 is outside the model family")
    log_x = np.log(np.clip(x, np.finfo(float).tiny, None))
    a = np.asarray(data.a, dtype=float)
    z = data.z
    k_cov = z.shape[1]
    theta0 = np.zeros(2 + (0 if fixed_kappa is not None else 1) + k_cov)
    theta0[1] = float(np.log(np.median(x[delta == 1])))

    def fun(th):
        return _odds_negloglik_and_grad(th, x, delta, a, z, log_x, fixed_kappa)

    g_analytic = fun(theta0)[1]
    g_fd = optimize.approx_fprime(theta0, lambda th: fun(th)[0], 1e-7)
    g_err = float(np.max(np.abs(g_analytic - g_fd))) / max(1.0, float(np.max(np.abs(g_analytic))))
    if g_err > grad_check_tol:
        raise FitFailureError(f"analytic gradient disagrees with finite differences ({g_err:.2e})")

    res = optimize.minimize(fun, theta0, jac=True, method="BFGS", options={"gtol": 1e-8})
    grad_max = float(np.max(np.abs(res.jac)))
    if not (res.success or grad_max < 1e-5):
        raise FitFailureError(f"odds fit did not converge: {res.message} (grad max {grad_max:.3e})")
    beta_pre = float(res.x[0])
    alpha = float(np.exp(res.x[1]))
    if fixed_kappa is None:
        kappa = float(np.exp(res.x[2]))
        gamma = res.x[3:]
    else:
        kappa = float(fixed_kappa)
        gamma = res.x[2:]
    odds = LogLogisticOdds(alpha, kappa, gamma)
    report = {
        "model": "loglogistic",
        "alpha": alpha,
        "kappa": kappa,
        "kappa_fixed": fixed_kappa is not None,
        "gamma": np.asarray(gamma).tolist(),
        "beta_pre": beta_pre,
        "iterations": int(res.nit),
        "grad_max": grad_max,
        "grad_check": g_err,
        "converged": True,
    }
    return odds, beta_pre, report


def fit_censoring(data, tau=None):
    """Exponential censoring rate per arm: censoring events over exposure.

    Subjects reaching `tau` without an event are administratively censored
    and carry no censoring-hazard jump, so they count as exposure only.
    Returns (censoring, report).
    """
    x = np.asarray(data.x, dtype=float)
    delta = np.asarray(data.delta)
    a = np.asarray(data.a)
    censored = (delta == 0) if tau is None else ((delta == 0) & (x < tau))
    rates = []
    for arm in (0, 1):
        mask = a == arm
        exposure = float(x[mask].sum())
        events = int(censored[mask].sum())
        rates.append(events / exposure if exposure > 0 else 0.0)
    report = {"model": "exponential-per-arm", "rate0": rates[0], "rate1": rates[1]}
    return ExponentialCensoring(rates[0], rates[1]), report


def build_nuisances(mode, data=None, model=None, censoring=None, treatment=None, tau=None):
    """Assemble a NuisanceSet for a named mode.

    'oracle' wraps the truth objects; 'fitted' fits all three working
    models on `data`; 'misspecified-propensity' replaces the propensity by
    a constant 0.5; 'misspecified-odds' freezes kappa at 1; plain
    'misspecified' applies both toggles.
    """
    if mode == "oracle":
        if model is None or censoring is None or treatment is None:
            raise InvalidModelError("oracle mode needs the truth objects")
        return oracle_nuisances(model, censoring, treatment)
    if mode not in ("fitted", "misspecified", "misspecified-propensity", "misspecified-odds"):
        raise InvalidModelError(f"unknown nuisance mode {mode!r}")
    if data is None:
        raise InvalidModelError(f"mode {mode!r} needs data to fit on")
    wrong_prop = mode in ("misspecified", "misspecified-propensity")
    wrong_odds = mode in ("misspecified", "misspecified-odds")
    odds, beta_pre, odds_report = fit_odds_parametric(
        data, fixed_kappa=1.0 if wrong_odds else None
    )
    cens, cens_report = fit_censoring(data, tau=tau)
    if wrong_prop:
        prop = ConstantPropensity(0.5)
        prop_report = {"model": "constant", "value": 0.5, "forced": True}
    else:
        prop, prop_report = fit_propensity(data)
    return NuisanceSet(
        odds=odds,
        censoring=cens,
        propensity=prop,
        provenance="fitted" if mode == "fitted" else "misspecified",
        reports={"odds": odds_report, "censoring": cens_report, "propensity": prop_report},
    )
