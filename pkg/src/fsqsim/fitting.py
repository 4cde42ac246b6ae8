"""Weighted nonlinear least squares with Gauss-Newton covariance.

Covariances are (J^T W J)^-1 with W = 1/sigma^2, i.e. the reported
uncertainties take the supplied error bars at face value (no reduced-chi^2
rescaling); the coverage studies in the tests rely on that convention.
"""

from dataclasses import dataclass, field

import numpy as np


class FitError(RuntimeError):
    pass


def gauss_newton(
    model,
    p0,
    x,
    y,
    sigma=None,
    jacobian=None,
    max_iterations: int = 200,
    tol: float = 1e-12,
    bounds=None,
):
    """Levenberg-damped Gauss-Newton minimizing sum(((y-model)/sigma)^2).

    Returns (params, covariance, residual_norm, converged).
    """
    p = np.asarray(p0, dtype=float).copy()
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    w = np.ones_like(y) if sigma is None else 1.0 / np.asarray(sigma, dtype=float)

    def residuals(pp):
        return (y - model(pp, x)) * w

    def jac(pp):
        if jacobian is not None:
            return -jacobian(pp, x) * w[:, None]
        out = np.empty((len(y), len(pp)))
        r0 = residuals(pp)
        for i in range(len(pp)):
            h = 1e-7 * max(abs(pp[i]), 1e-7)
            pp2 = pp.copy()
            pp2[i] += h
            out[:, i] = (residuals(pp2) - r0) / h
        return out

    def clip(pp):
        if bounds is None:
            return pp
        lo, hi = bounds
        return np.clip(pp, lo, hi)

    r = residuals(p)
    cost = float(r @ r)
    lam = 1e-6
    converged = False
    for _ in range(max_iterations):
        j = jac(p)
        g = j.T @ r
        h = j.T @ j
        stepped = False
        for _ in range(25):
            try:
                step = np.linalg.solve(h + lam * np.diag(np.maximum(np.diag(h), 1e-12)), -g)
            except np.linalg.LinAlgError:
                lam *= 10
                continue
            p_new = clip(p + step)
            r_new = residuals(p_new)
            cost_new = float(r_new @ r_new)
            if cost_new <= cost:
                stepped = True
                break
            lam *= 10
        if not stepped:
            converged = True
            break
        improvement = cost - cost_new
        p, r, cost = p_new, r_new, cost_new
        lam = max(lam / 5, 1e-14)
        if improvement < tol * max(cost, 1.0):
            converged = True
            break
    j = jac(p)
    h = j.T @ j
    try:
        cov = np.linalg.inv(h)
    except np.linalg.LinAlgError as exc:
        raise FitError("singular normal equations at the fit optimum") from exc
    return p, cov, float(np.sqrt(cost)), converged


@dataclass(frozen=True)
class DecayFit:
    """Fitted survival decay P(N) = a * F^N (+ fixed or free offset)."""

    amplitude: float
    fidelity: float
    covariance: np.ndarray = field(repr=False)
    residual_norm: float
    offset: float = 0.0
    converged: bool = True

    def __post_init__(self):
        if not 0.0 <= self.fidelity <= 1.0:
            raise ValueError("fitted fidelity outside [0, 1]")
        if np.any(np.diag(self.covariance) < 0):
            raise ValueError("negative variance in fit covariance")

    @property
    def amplitude_err(self) -> float:
        return float(np.sqrt(self.covariance[0, 0]))

    @property
    def fidelity_err(self) -> float:
        return float(np.sqrt(self.covariance[1, 1]))


def fit_power_decay(n, y, sigma=None, offset=None) -> DecayFit:
    """Fit P = a * F^n + b; ``offset`` fixes b (None leaves it free).

    Used for both two-qubit return-probability decays (b = 0) and
    randomized-benchmarking survivals (b = 0.5 or free).
    """
    n = np.asarray(n, dtype=float)
    y = np.asarray(y, dtype=float)
    if len(np.unique(n)) < (3 if offset is not None else 4):
        raise FitError("need at least 3 (4 with free offset) distinct lengths")

    b0 = 0.0 if offset is None else offset
    pos = np.clip(y - b0, 1e-6, None)
    slope, intercept = np.polyfit(n, np.log(pos), 1)
    f0 = float(np.clip(np.exp(slope), 1e-3, 1.0))
    a0 = float(np.clip(np.exp(intercept), 1e-3, 2.0))

    if offset is None:

        def model(p, x):
            return p[0] * p[1] ** x + p[2]

        p0 = [a0, f0, 0.0]
        bounds = ([0.0, 0.0, -1.0], [2.0, 1.0, 1.0])
    else:

        def model(p, x):
            return p[0] * p[1] ** x + offset

        p0 = [a0, f0]
        bounds = ([0.0, 0.0], [2.0, 1.0])

    p, cov, rn, conv = gauss_newton(model, p0, n, y, sigma, bounds=bounds)
    fitted_offset = offset if offset is not None else float(p[2])
    return DecayFit(
        amplitude=float(p[0]),
        fidelity=float(min(max(p[1], 0.0), 1.0)),
        covariance=cov[:2, :2],
        residual_norm=rn,
        offset=fitted_offset,
        converged=conv,
    )


def fit_sinusoid_fixed_period(phases, values, period, sigma=None):
    """Least-squares fit of y = offset + C*cos(2 pi phase/period + delta).

    Linear in (offset, A, B); returns (contrast C, phase delta, offset) with
    the contrast standard error.
    """
    phases = np.asarray(phases, dtype=float)
    values = np.asarray(values, dtype=float)
    w = np.ones_like(values) if sigma is None else 1.0 / np.asarray(sigma)
    omega = 2 * np.pi / period
    design = np.column_stack(
        [np.ones_like(phases), np.cos(omega * phases), np.sin(omega * phases)]
    )
    coef, *_ = np.linalg.lstsq(design * w[:, None], values * w, rcond=None)
    off, a, b = coef
    contrast = float(np.hypot(a, b))
    delta = float(np.arctan2(-b, a))
    try:
        cov = np.linalg.inv((design * w[:, None]).T @ (design * w[:, None]))
        if contrast > 0:
            grad = np.array([0.0, a / contrast, b / contrast])
            c_err = float(np.sqrt(grad @ cov @ grad))
        else:
            c_err = float(np.sqrt(max(cov[1, 1], cov[2, 2])))
    except np.linalg.LinAlgError:
        c_err = np.nan
    return contrast, delta, float(off), c_err
