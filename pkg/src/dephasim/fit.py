"""Nonlinear weighted least squares and model-specific fit wrappers.

The optimizer is a damped Gauss-Newton iteration (Levenberg-Marquardt style
trust damping) on a numerically differentiated Jacobian.  It is deliberately
dependency-free: the problems here are small and smooth, and keeping the
solver in-module makes its behaviour (step acceptance, damping schedule,
convergence tests) fully inspectable by the tests.

Wrappers cover every curve the experiment produces: Rabi oscillation, trap
relaxation, Ramsey/echo/CPMG fringes, and the Gaussian visibility decay whose
fitted width yields the coherence time T2'.  Visibility extraction is the
two-stage procedure used on the real data: fit each fringe for its
visibility, then fit the visibilities against total time.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .analytic import envelope_alpha, envelope_kappa, t2_prime
from .errors import FitError

__all__ = [
    "WeightedPoint",
    "FitResult",
    "weighted_points",
    "binomial_weights",
    "points_from_counts",
    "dominant_frequency",
    "numeric_jacobian",
    "fit_curve",
    "fit_rabi",
    "fit_t1",
    "fit_fringe",
    "fit_visibility_decay",
    "FITTERS",
]

ERROR_CONVENTION = "1-sigma local curvature scaled by residual variance"


@dataclass(frozen=True)
class WeightedPoint:
    """One observation: abscissa (seconds), value, and weight (1/variance)."""

    x: float
    y: float
    weight: float = 1.0

    def __post_init__(self):
        if not self.weight > 0:
            raise FitError(f"weight must be positive, got {self.weight}")


def binomial_weights(fractions, trials, floor: float = 1e-4):
    """Inverse binomial variance max(p*(1-p), floor)/trials.

    The floor keeps weights finite when a measured fraction is exactly 0 or 1.
    """
    p = np.asarray(fractions, dtype=float)
    variance = np.maximum(p * (1.0 - p), floor) / np.asarray(trials, dtype=float)
    return 1.0 / variance


def weighted_points(x, y, yerr=None, weights=None) -> list[WeightedPoint]:
    """Bundle arrays into WeightedPoints; yerr (1 sigma) takes priority over weights."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if yerr is not None:
        weights = 1.0 / np.asarray(yerr, dtype=float) ** 2
    if weights is None:
        weights = np.ones_like(x)
    weights = np.broadcast_to(np.asarray(weights, dtype=float), x.shape)
    return [WeightedPoint(*triple) for triple in zip(x, y, weights)]


def points_from_counts(times, successes, trials) -> list[WeightedPoint]:
    """WeightedPoints for binomial count data, weighted by inverse binomial variance."""
    successes = np.asarray(successes, dtype=float)
    trials = np.asarray(trials, dtype=float)
    fractions = successes / trials
    return weighted_points(times, fractions, weights=binomial_weights(fractions, trials))


@dataclass
class FitResult:
    """Outcome of one least-squares fit.

    ``params``/``errors`` are keyed by parameter name; errors follow
    ``error_convention``.  ``rss`` is the weighted residual sum of squares,
    ``cost_history`` the accepted-step costs (monotone non-increasing).
    """

    model: str
    params: dict[str, float]
    errors: dict[str, float]
    units: dict[str, str]
    rss: float
    iterations: int
    converged: bool
    n_points: int
    gradient_norm: float
    cost_history: list[float] = field(default_factory=list)
    error_convention: str = ERROR_CONVENTION

    def to_json_dict(self) -> dict:
        return {
            "model": self.model,
            "params": {
                name: {
                    "value": self.params[name],
                    "stderr": self.errors.get(name),
                    "unit": self.units.get(name, ""),
                }
                for name in self.params
            },
            "rss": self.rss,
            "iterations": self.iterations,
            "converged": self.converged,
            "n_points": self.n_points,
            "gradient_norm": self.gradient_norm,
            "error_convention": self.error_convention,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_json_dict(), indent=2, sort_keys=True)


def _finite_or_raise(values, theta, what: str):
    if not np.all(np.isfinite(values)):
        raise FitError(f"{what} returned non-finite values at parameters {list(theta)}")
    return values


def numeric_jacobian(curve, x: np.ndarray, theta: np.ndarray) -> np.ndarray:
    """Central-difference Jacobian d curve / d theta, step max(1e-8, 1e-6*|param|)."""
    n_params = theta.size
    jac = np.empty((x.size, n_params))
    for j in range(n_params):
        step = max(1e-8, 1e-6 * abs(theta[j]))
        hi = theta.copy()
        lo = theta.copy()
        hi[j] += step
        lo[j] -= step
        jac[:, j] = (np.asarray(curve(x, hi)) - np.asarray(curve(x, lo))) / (2 * step)
    return _finite_or_raise(jac, theta, "model Jacobian")


_COST_TOL = 1e-10
_GRAD_TOL = 1e-10


def fit_curve(
    curve,
    data: list[WeightedPoint],
    initial,
    bounds=None,
    *,
    model: str = "custom",
    param_names: tuple[str, ...] | None = None,
    units: dict[str, str] | None = None,
    max_iterations: int = 200,
) -> FitResult:
    """Minimize the weighted squared residuals of ``curve`` over the data.

    Parameters
    ----------
    curve : callable
        ``curve(x_array, theta) -> y_array``; must be finite wherever the
        optimizer can step (respect your own bounds).
    data : list of WeightedPoint
    initial : array-like
        Finite starting parameter vector; at least as many points as
        parameters are required.
    bounds : optional list of (lo, hi)
        Simple box constraints enforced by projection; use ``None`` entries
        or infinities for open sides.

    Returns
    -------
    FitResult
        Best parameters found.  ``converged`` is False when the iteration cap
        was hit; a NaN model output raises FitError instead.
    """
    theta = np.asarray(initial, dtype=float).copy()
    if not np.all(np.isfinite(theta)):
        raise FitError(f"initial guess must be finite, got {list(theta)}")
    if len(data) < theta.size:
        raise FitError(
            f"{len(data)} data points cannot constrain {theta.size} parameters"
        )
    if param_names is None:
        param_names = tuple(f"p{i}" for i in range(theta.size))
    units = dict(units or {})

    x = np.array([p.x for p in data], dtype=float)
    y = np.array([p.y for p in data], dtype=float)
    w = np.array([p.weight for p in data], dtype=float)
    sqrt_w = np.sqrt(w)

    lo = np.full(theta.size, -np.inf)
    hi = np.full(theta.size, np.inf)
    if bounds is not None:
        for j, pair in enumerate(bounds):
            if pair is None:
                continue
            if pair[0] is not None:
                lo[j] = pair[0]
            if pair[1] is not None:
                hi[j] = pair[1]
    theta = np.clip(theta, lo, hi)

    def cost_and_residuals(th):
        model_y = _finite_or_raise(np.asarray(curve(x, th), dtype=float), th, "model")
        r = y - model_y
        return float(np.sum(w * r * r)), r

    cost, residuals = cost_and_residuals(theta)
    history = [cost]
    damping = 0.0
    converged = False
    gradient_norm = math.inf
    iterations = 0

    for iterations in range(1, max_iterations + 1):
        jac = numeric_jacobian(curve, x, theta)
        design = jac * sqrt_w[:, None]
        gradient = design.T @ (sqrt_w * residuals)
        gradient_norm = float(np.linalg.norm(gradient))
        if gradient_norm < _GRAD_TOL:
            converged = True
            break

        normal = design.T @ design
        scale = np.diag(normal).copy()
        ridge = np.diag(scale + 1e-12 * max(scale.max(), 1.0))
        accepted = False
        while not accepted:
            try:
                step = np.linalg.solve(normal + damping * ridge, gradient)
            except np.linalg.LinAlgError:
                damping = max(damping * 10.0, 1e-4)
                continue
            if not np.all(np.isfinite(step)):
                damping = max(damping * 10.0, 1e-4)
                continue
            trial = np.clip(theta + step, lo, hi)
            trial_cost, trial_residuals = cost_and_residuals(trial)
            if trial_cost <= cost:
                accepted = True
            elif damping > 1e8:
                break  # no usable step in this direction; stop at best-so-far
            else:
                damping = max(damping * 10.0, 1e-4)

        if not accepted:
            break
        relative_drop = (cost - trial_cost) / max(cost, 1e-300)
        theta, cost, residuals = trial, trial_cost, trial_residuals
        history.append(cost)
        damping = 0.0 if damping < 1e-7 else damping / 10.0
        if relative_drop < _COST_TOL:
            converged = True
            break

    jac = numeric_jacobian(curve, x, theta)
    design = jac * sqrt_w[:, None]
    gradient_norm = float(np.linalg.norm(design.T @ (sqrt_w * residuals)))
    dof = max(len(data) - theta.size, 1)
    residual_variance = cost / dof
    try:
        covariance = np.linalg.inv(design.T @ design) * residual_variance
    except np.linalg.LinAlgError:
        covariance = np.linalg.pinv(design.T @ design) * residual_variance
    stderr = np.sqrt(np.clip(np.diag(covariance), 0.0, None))

    return FitResult(
        model=model,
        params=dict(zip(param_names, map(float, theta))),
        errors=dict(zip(param_names, map(float, stderr))),
        units=units,
        rss=cost,
        iterations=iterations,
        converged=converged,
        n_points=len(data),
        gradient_norm=gradient_norm,
        cost_history=history,
    )


def dominant_frequency(x, y, oversample: int = 8, max_grid: int = 20000) -> float:
    """Angular frequency of the strongest sinusoidal component of (x, y).

    Direct projection onto a cos/sin grid spanning half a cycle over the full
    record up to the Nyquist rate of the closest point spacing.  Raises
    FitError on flat data (no identifiable frequency).
    """
    x = np.asarray(x, dtype=float)
    centered = np.asarray(y, dtype=float) - np.mean(y)
    if np.max(np.abs(centered)) < 1e-12:
        raise FitError("frequency unidentifiable: flat spectrum (constant data)")
    unique_x = np.unique(x)
    if unique_x.size < 2:
        raise FitError("frequency unidentifiable: degenerate time grid")
    span = float(unique_x[-1] - unique_x[0])
    spacing = float(np.min(np.diff(unique_x)))
    n_grid = min(max_grid, max(64, int(oversample * span / spacing)))
    omegas = 2 * np.pi * np.linspace(0.5 / span, 0.5 / spacing, n_grid)
    phases = np.outer(omegas, x)
    power = (np.cos(phases) @ centered) ** 2 + (np.sin(phases) @ centered) ** 2
    return float(omegas[np.argmax(power)])


# ------------------------------------------------------------------ wrappers


def fit_rabi(data: list[WeightedPoint]) -> FitResult:
    """Fit offset + contrast*cos(omega_r*t) with a frequency-scan initialization."""
    x = np.array([p.x for p in data])
    y = np.array([p.y for p in data])
    omega0 = dominant_frequency(x, y)
    contrast0 = math.sqrt(2.0) * float(np.std(y))
    if np.mean(y[x <= np.quantile(x, 0.15)]) < np.mean(y):
        contrast0 = -contrast0  # early points below the mean: start on the flipped branch

    def curve(t, theta):
        return theta[2] + theta[1] * np.cos(theta[0] * t)

    return fit_curve(
        curve,
        data,
        [omega0, contrast0, float(np.mean(y))],
        bounds=[(0.0, None), None, None],
        model="rabi",
        param_names=("omega_r", "contrast", "offset"),
        units={"omega_r": "rad/s", "contrast": "", "offset": ""},
    )


def fit_t1(data: list[WeightedPoint]) -> FitResult:
    """Fit equilibrium + amplitude*exp(-t/T1) to a relaxation record."""
    order = np.argsort([p.x for p in data])
    x = np.array([p.x for p in data])[order]
    y = np.array([p.y for p in data])[order]
    tail = float(np.mean(y[-max(3, y.size // 5):]))
    amplitude0 = float(y[0] - tail)
    if np.ptp(y) == 0.0 or abs(amplitude0) < 1e-12:
        raise FitError("T1 unidentifiable: no decay amplitude in the data")
    below = np.nonzero(np.abs(y - tail) <= abs(amplitude0) / math.e)[0]
    t1_0 = float(x[below[0]]) if below.size and x[below[0]] > 0 else float(x[-1]) / 2
    return fit_curve(
        lambda t, theta: theta[2] + theta[1] * np.exp(-t / theta[0]),
        data,
        [t1_0, amplitude0, tail],
        bounds=[(1e-12, None), None, None],
        model="t1",
        param_names=("t1", "amplitude", "equilibrium"),
        units={"t1": "s", "amplitude": "", "equilibrium": ""},
    )


def _fringe_curve_factory(n: int, tau: float, t2_star, include_kappa: bool, invert: bool):
    """Build curve(t, theta): fraction of the visibility-scaled fringe.

    theta is (visibility, delta_prime, phase[, t2_star]); the last entry is
    present only when t2_star is co-fit (``t2_star is None``).
    """
    sign = (-1.0) ** n
    offset = 2 * n * tau

    def curve(t, theta):
        scale = theta[3] if t2_star is None else t2_star
        x = np.asarray(t, dtype=float) - offset
        phase = theta[1] * x + theta[2]
        if include_kappa:
            phase = phase + envelope_kappa(x, scale)
        w = theta[0] * sign * envelope_alpha(x, scale) * np.cos(phase)
        return (1.0 + w) / 2.0 if invert else (1.0 - w) / 2.0

    return curve


def fit_fringe(
    data: list[WeightedPoint],
    n: int,
    tau: float,
    t2_star: float | None = math.inf,
    include_kappa: bool = True,
    invert: bool = False,
) -> FitResult:
    """Fit a fraction-vs-time fringe for its visibility.

    The model is the measured-fraction map of V times the ensemble-averaged
    fringe, with a free phase offset.  ``t2_star`` fixes the envelope scale
    (``math.inf`` disables the envelope, the right choice when only
    homogeneous noise is present); passing ``None`` co-fits it.

    Parameters
    ----------
    data : list of WeightedPoint
        Fractions scanned around t = 2*n*tau (absolute times).
    n, tau : sequence geometry (n = 0, tau = 0 for Ramsey).
    t2_star : float or None
        Fixed envelope 1/e time, or None to co-fit it.
    include_kappa : bool
        Include the envelope phase chirp (meaningful only with a finite
        envelope scale).
    invert : bool
        Use the flipped fraction convention (1+w)/2.
    """
    x = np.array([p.x for p in data])
    y = np.array([p.y for p in data])
    visibility0 = min(1.0, max(0.05, float(np.ptp(y))))
    delta0 = dominant_frequency(x, y)
    theta0 = [visibility0, delta0, 0.0]
    names = ["visibility", "delta_prime", "phase"]
    bounds = [(0.0, 1.5), (0.0, None), None]
    if t2_star is None:
        span = float(np.max(x) - np.min(x))
        theta0.append(span / 2)
        names.append("t2_star")
        bounds.append((1e-9, None))
    curve = _fringe_curve_factory(n, tau, t2_star, include_kappa, invert)
    result = fit_curve(
        curve,
        data,
        theta0,
        bounds=bounds,
        model={0: "ramsey", 1: "echo_fringe"}.get(n, "cpmg_fringe"),
        param_names=tuple(names),
        units={"visibility": "", "delta_prime": "rad/s", "phase": "rad", "t2_star": "s"},
    )
    if t2_star is not None:
        result.params["t2_star"] = float(t2_star)
        result.errors["t2_star"] = 0.0
        result.units["t2_star"] = "s (held fixed)"
    return result


def fit_visibility_decay(points: list[WeightedPoint], n: int) -> FitResult:
    """Fit C0*exp(-(1/2)*(t/2n)**2*sigma_sig**2) to visibility-vs-total-time points.

    Reports the derived coherence time t2_prime = 2*sqrt(2)*n/sigma_sig with
    its error propagated as |d t2_prime / d sigma| * SE(sigma).
    """
    if n < 1:
        raise FitError(f"visibility decay requires n >= 1, got {n}")
    order = np.argsort([p.x for p in points])
    x = np.array([p.x for p in points])[order]
    y = np.array([p.y for p in points])[order]
    c0_guess = min(1.2, max(0.01, float(y[0])))
    halved = np.nonzero(y <= c0_guess / 2)[0]
    t_half = float(x[halved[0]]) if halved.size and x[halved[0]] > 0 else float(x[-1])
    sigma0 = 2 * n * math.sqrt(2 * math.log(2)) / t_half

    def curve(t, theta):
        return theta[0] * np.exp(-0.5 * (t / (2 * n)) ** 2 * theta[1] ** 2)

    result = fit_curve(
        curve,
        points,
        [c0_guess, sigma0],
        bounds=[(0.0, 1.2), (0.0, None)],
        model="visibility",
        param_names=("c0", "sigma_sig"),
        units={"c0": "", "sigma_sig": "rad/s"},
    )
    sigma = result.params["sigma_sig"]
    sigma_err = result.errors["sigma_sig"]
    coherence = t2_prime(n, sigma) if sigma > 0 else math.inf
    result.params["t2_prime"] = coherence
    result.errors["t2_prime"] = (
        coherence / sigma * sigma_err if sigma > 0 else math.inf
    )
    result.units["t2_prime"] = "s (derived)"
    return result


#: Name-addressable fitters for the CLI; options mirror the wrapper keywords.
FITTERS = {
    "rabi": fit_rabi,
    "t1": fit_t1,
    "ramsey": lambda data, **kw: fit_fringe(data, n=0, tau=0.0, **kw),
    "echo_fringe": lambda data, tau, **kw: fit_fringe(data, n=1, tau=tau, **kw),
    "cpmg_fringe": lambda data, n, tau, **kw: fit_fringe(data, n=n, tau=tau, **kw),
    "visibility": lambda data, n, **kw: fit_visibility_decay(data, n=n, **kw),
}
