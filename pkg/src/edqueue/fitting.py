"""Least-squares fitting of waiting-time histograms.

Two candidate curve shapes are supported:

* log-normal with baseline offset:
      f(t) = p0 + amplitude / (sqrt(2*pi) * varpi * t)
                  * exp(-(ln(t / t_c))^2 / (2 * varpi^2))
  where ln(t_c) and varpi play the role of mean and standard deviation of
  the log of the waiting time, and p0, amplitude are fitting constants;

* power law with exponential cutoff:
      f(t) = amplitude * t^(-alpha) * exp(-t / t0)
  with the exponent fixed to 1 or 3/2 (it is never optimized).

Both are treated as curve shapes over the histogram's range, not as
normalized densities. Fitting minimises the sum of squared differences
between bin densities and the model evaluated at bin centers, over
non-empty bins, using a damped (Levenberg-Marquardt) iteration with
analytic Jacobians. Positive parameters are optimized in log space;
the baseline offset is kept >= 0 by projection after each step.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from enum import Enum
from typing import Callable, Optional, Union

import numpy as np

from .stats import Histogram, WaitingTimeSample, _as_values, histogram as _make_histogram

__all__ = [
    "ModelKind",
    "LogNormalParams",
    "PowerLawCutoffParams",
    "FitResult",
    "Goodness",
    "ComparisonReport",
    "ALLOWED_ALPHAS",
    "eval_lognormal",
    "eval_powerlaw_cutoff",
    "lognormal_gradient",
    "powerlaw_cutoff_gradient",
    "initial_guess",
    "fit",
    "goodness",
    "compare",
]

SQRT_2PI = math.sqrt(2.0 * math.pi)

#: the only admissible power-law exponents
ALLOWED_ALPHAS = (1.0, 1.5)

#: lower clamp for the log-space spread, avoids division by zero on
#: degenerate (all-equal) samples
VARPI_MIN = 1e-3

#: positive parameters are optimized as logarithms confined to
#: [-LOG_BOUND, LOG_BOUND]; keeps runaway drift toward degenerate limits
#: (e.g. no-cutoff t0 -> infinity) finite without affecting sane fits
LOG_BOUND = math.log(1e20)

MAX_ITERATIONS = 500
SSE_RELATIVE_TOL = 1e-10
GRADIENT_TOL = 1e-8

#: two fits count as a tie when their SSEs differ by less than this,
#: relative to the better one
INDISTINGUISHABLE_REL_SSE = 0.20


class ModelKind(Enum):
    LOGNORMAL = "lognormal"
    POWERLAW_CUTOFF = "plcutoff"


@dataclass(frozen=True)
class LogNormalParams:
    p0: float
    amplitude: float
    t_c: float
    varpi: float

    def __post_init__(self):
        if self.p0 < 0:
            raise ValueError(f"p0 must be >= 0, got {self.p0}")
        if self.amplitude <= 0:
            raise ValueError(f"amplitude must be > 0, got {self.amplitude}")
        if self.t_c <= 0:
            raise ValueError(f"t_c must be > 0, got {self.t_c}")
        if self.varpi <= 0:
            raise ValueError(f"varpi must be > 0, got {self.varpi}")


@dataclass(frozen=True)
class PowerLawCutoffParams:
    amplitude: float
    alpha: float
    t0: float

    def __post_init__(self):
        if self.amplitude <= 0:
            raise ValueError(f"amplitude must be > 0, got {self.amplitude}")
        if self.alpha not in ALLOWED_ALPHAS:
            raise ValueError(f"alpha must be one of {ALLOWED_ALPHAS}, got {self.alpha}")
        if self.t0 <= 0:
            raise ValueError(f"t0 must be > 0, got {self.t0}")


ModelParams = Union[LogNormalParams, PowerLawCutoffParams]


@dataclass(frozen=True)
class Goodness:
    sse: float
    r_squared: Optional[float]  # None when all densities are equal (SST = 0)


@dataclass(frozen=True)
class FitResult:
    model: ModelKind
    params: ModelParams
    sse: float
    r_squared: Optional[float]
    n_bins: int
    converged: bool
    iterations: int
    histogram: Histogram


@dataclass(frozen=True)
class ComparisonReport:
    """Side-by-side view of two fits over the same histogram."""

    fit_a: FitResult
    fit_b: FitResult
    preferred: Optional[ModelKind]  # lower SSE; None on an exact tie
    rel_sse_difference: float
    indistinguishable: bool


def _check_positive_domain(t: np.ndarray):
    if np.any(t <= 0) or not np.all(np.isfinite(t)):
        raise ValueError("model evaluation requires finite t > 0")


def eval_lognormal(params: LogNormalParams, t):
    """Log-normal curve value at t (scalar or array), t > 0."""
    t_arr = np.asarray(t, dtype=float)
    _check_positive_domain(t_arr)
    log_ratio = np.log(t_arr / params.t_c)
    peak = np.exp(-(log_ratio**2) / (2.0 * params.varpi**2))
    out = params.p0 + params.amplitude * peak / (SQRT_2PI * params.varpi * t_arr)
    return float(out) if np.isscalar(t) else out


def eval_powerlaw_cutoff(params: PowerLawCutoffParams, t):
    """Cutoff power-law value at t (scalar or array), t > 0."""
    t_arr = np.asarray(t, dtype=float)
    _check_positive_domain(t_arr)
    out = params.amplitude * t_arr ** (-params.alpha) * np.exp(-t_arr / params.t0)
    return float(out) if np.isscalar(t) else out


def lognormal_gradient(params: LogNormalParams, t) -> np.ndarray:
    """Partial derivatives of the log-normal curve.

    Returns an array whose last axis is (d/dp0, d/damplitude, d/dt_c,
    d/dvarpi), evaluated at t (scalar t gives shape (4,)).
    """
    t_arr = np.atleast_1d(np.asarray(t, dtype=float))
    _check_positive_domain(t_arr)
    w = params.varpi
    log_ratio = np.log(t_arr / params.t_c)
    phi = np.exp(-(log_ratio**2) / (2.0 * w**2)) / (SQRT_2PI * w * t_arr)
    d_p0 = np.ones_like(t_arr)
    d_amp = phi
    d_tc = params.amplitude * phi * log_ratio / (params.t_c * w**2)
    d_w = params.amplitude * phi * (log_ratio**2 / w**2 - 1.0) / w
    grad = np.stack([d_p0, d_amp, d_tc, d_w], axis=-1)
    return grad[0] if np.isscalar(t) else grad


def powerlaw_cutoff_gradient(params: PowerLawCutoffParams, t) -> np.ndarray:
    """Partial derivatives (d/damplitude, d/dt0) of the cutoff power law."""
    t_arr = np.atleast_1d(np.asarray(t, dtype=float))
    _check_positive_domain(t_arr)
    base = t_arr ** (-params.alpha) * np.exp(-t_arr / params.t0)
    d_amp = base
    d_t0 = params.amplitude * base * t_arr / params.t0**2
    grad = np.stack([d_amp, d_t0], axis=-1)
    return grad[0] if np.isscalar(t) else grad


def _check_alpha(alpha) -> float:
    if alpha is None:
        raise ValueError("the power-law exponent is required and must be 1 or 1.5")
    alpha = float(alpha)
    if alpha not in ALLOWED_ALPHAS:
        raise ValueError(f"alpha must be one of {ALLOWED_ALPHAS}, got {alpha}")
    return alpha


def initial_guess(
    sample: Union[WaitingTimeSample, np.ndarray, list],
    model: ModelKind,
    alpha: Optional[float] = None,
) -> ModelParams:
    """Moment-based starting point for a fit, from the raw sample.

    Log-normal: t_c is the geometric mean, varpi the standard deviation of
    the log values (clamped away from zero). Cutoff power law: t0 is the
    sample mean and the amplitude matches the first occupied bin of the
    default histogram.
    """
    values = _as_values(sample)
    if values.size == 0:
        raise ValueError("cannot build an initial guess from an empty sample")
    if np.any(values <= 0):
        raise ValueError("waiting-time samples must be strictly positive")

    if model is ModelKind.LOGNORMAL:
        logs = np.log(values)
        return LogNormalParams(
            p0=0.0,
            amplitude=1.0,
            t_c=float(np.exp(logs.mean())),
            varpi=max(float(logs.std()), VARPI_MIN),
        )
    alpha = _check_alpha(alpha)
    hist = _make_histogram(values)
    first = int(np.flatnonzero(hist.counts)[0])
    center = float(hist.bin_centers()[first])
    density = float(hist.densities[first])
    return PowerLawCutoffParams(
        amplitude=density * center**alpha,
        alpha=alpha,
        t0=float(values.mean()),
    )


def _guess_from_histogram(hist: Histogram, model: ModelKind, alpha: Optional[float]) -> ModelParams:
    """Starting point when only binned data is available: histogram moments."""
    all_centers = hist.bin_centers()
    mask = (hist.counts > 0) & (all_centers > 0)
    if not np.any(mask):
        raise ValueError("histogram has no occupied bins with positive centers")
    centers = all_centers[mask]
    densities = hist.densities[mask]
    weights = hist.counts[mask].astype(float)
    weights /= weights.sum()
    mean = float(weights @ centers)
    if model is ModelKind.LOGNORMAL:
        log_c = np.log(centers)
        log_mean = float(weights @ log_c)
        log_std = math.sqrt(max(float(weights @ (log_c - log_mean) ** 2), 0.0))
        guess = LogNormalParams(
            p0=0.0, amplitude=1.0, t_c=math.exp(log_mean), varpi=max(log_std, VARPI_MIN)
        )
        # Rescale so the curve's peak roughly matches the tallest bin.
        peak_model = float(np.max(eval_lognormal(guess, centers)))
        peak_data = float(np.max(densities))
        if peak_model > 0 and peak_data > 0:
            guess = replace(guess, amplitude=peak_data / peak_model)
        return guess
    alpha = _check_alpha(alpha)
    return PowerLawCutoffParams(
        amplitude=float(densities[0]) * float(centers[0]) ** alpha,
        alpha=alpha,
        t0=mean,
    )


def _levenberg_marquardt(
    residual_fn: Callable[[np.ndarray], np.ndarray],
    jacobian_fn: Callable[[np.ndarray], np.ndarray],
    theta0: np.ndarray,
    project: Optional[Callable[[np.ndarray], np.ndarray]] = None,
    max_iterations: int = MAX_ITERATIONS,
) -> tuple[np.ndarray, float, bool, int]:
    """Damped least squares in an unconstrained parameter space.

    ``residual_fn`` returns data minus model; ``jacobian_fn`` the model's
    Jacobian (same sign as the model). Iterates until no damped step
    improves the SSE (or the iteration cap); the converged flag reports
    whether the last relative SSE decrease fell below SSE_RELATIVE_TOL or
    the final norm of J^T r is below GRADIENT_TOL.
    """
    theta = np.asarray(theta0, dtype=float)
    if project is not None:
        theta = project(theta)
    r = residual_fn(theta)
    sse = float(r @ r)
    lam = 1e-3
    converged = False
    iterations = 0
    for iterations in range(1, max_iterations + 1):
        jac = jacobian_fn(theta)
        grad = jac.T @ r
        jtj = jac.T @ jac
        damping = np.diag(jtj).copy()
        damping[damping < 1e-12] = 1e-12
        improved = False
        for _ in range(60):
            try:
                step = np.linalg.solve(jtj + lam * np.diag(damping), grad)
            except np.linalg.LinAlgError:
                lam *= 10.0
                continue
            candidate = theta + step
            if project is not None:
                clamped = project(candidate)
                pinned = clamped != candidate
                if np.any(pinned) and not np.all(pinned):
                    # re-solve for the free coordinates with the clamped ones
                    # frozen at their bounds, otherwise the projected step
                    # zigzags against the constraint
                    free = ~pinned
                    delta_pinned = clamped[pinned] - theta[pinned]
                    rhs = grad[free] - jtj[np.ix_(free, pinned)] @ delta_pinned
                    sub = jtj[np.ix_(free, free)] + lam * np.diag(damping[free])
                    try:
                        step_free = np.linalg.solve(sub, rhs)
                        refined = clamped.copy()
                        refined[free] = theta[free] + step_free
                        clamped = project(refined)
                    except np.linalg.LinAlgError:
                        pass
                candidate = clamped
            try:
                r_new = residual_fn(candidate)
                sse_new = float(r_new @ r_new)
            except (OverflowError, FloatingPointError, ValueError):
                # wild trial step (e.g. exp overflow in a log-parameter);
                # treat as rejected and raise the damping
                sse_new = math.inf
            if math.isfinite(sse_new) and sse_new < sse:
                rel_drop = (sse - sse_new) / max(sse, 1e-300)
                theta, r, sse = candidate, r_new, sse_new
                lam = max(lam / 3.0, 1e-14)
                improved = True
                if rel_drop < SSE_RELATIVE_TOL:
                    converged = True
                break
            lam *= 4.0
            if lam > 1e14:
                break
        if not improved or converged:
            break
    final_grad = jacobian_fn(theta).T @ residual_fn(theta)
    if float(np.linalg.norm(final_grad)) < GRADIENT_TOL:
        converged = True
    return theta, sse, converged, iterations


def _lognormal_pack(p: LogNormalParams) -> np.ndarray:
    return np.array([p.p0, math.log(p.amplitude), math.log(p.t_c), math.log(max(p.varpi, VARPI_MIN))])


def _lognormal_unpack(theta: np.ndarray) -> LogNormalParams:
    return LogNormalParams(
        p0=max(float(theta[0]), 0.0),
        amplitude=math.exp(theta[1]),
        t_c=math.exp(theta[2]),
        varpi=math.exp(theta[3]),
    )


def _plcutoff_pack(p: PowerLawCutoffParams) -> np.ndarray:
    return np.array([math.log(p.amplitude), math.log(p.t0)])


def _fit_arrays(
    centers: np.ndarray,
    densities: np.ndarray,
    model: ModelKind,
    init: ModelParams,
    weights: Optional[np.ndarray],
    max_iterations: int,
) -> tuple[ModelParams, float, bool, int]:
    """Core LM driver over (center, density) pairs; order-independent."""
    sqrt_w = None if weights is None else np.sqrt(weights)

    if model is ModelKind.LOGNORMAL:
        def residual_fn(theta):
            res = densities - eval_lognormal(_lognormal_unpack(theta), centers)
            return res if sqrt_w is None else res * sqrt_w

        def jacobian_fn(theta):
            params = _lognormal_unpack(theta)
            jac = lognormal_gradient(params, centers)
            # chain rule into (p0, log A, log t_c, log varpi) space
            jac = jac * np.array([1.0, params.amplitude, params.t_c, params.varpi])
            return jac if sqrt_w is None else jac * sqrt_w[:, None]

        def project(theta):
            out = np.clip(theta, -LOG_BOUND, LOG_BOUND)
            out[0] = max(theta[0], 0.0)
            out[3] = max(out[3], math.log(VARPI_MIN))
            return out

        theta, sse, converged, iterations = _levenberg_marquardt(
            residual_fn, jacobian_fn, _lognormal_pack(init), project, max_iterations
        )
        return _lognormal_unpack(theta), sse, converged, iterations

    alpha = init.alpha

    def residual_fn(theta):
        params = PowerLawCutoffParams(math.exp(theta[0]), alpha, math.exp(theta[1]))
        res = densities - eval_powerlaw_cutoff(params, centers)
        return res if sqrt_w is None else res * sqrt_w

    def jacobian_fn(theta):
        params = PowerLawCutoffParams(math.exp(theta[0]), alpha, math.exp(theta[1]))
        jac = powerlaw_cutoff_gradient(params, centers)
        jac = jac * np.array([params.amplitude, params.t0])
        return jac if sqrt_w is None else jac * sqrt_w[:, None]

    def project(theta):
        return np.clip(theta, -LOG_BOUND, LOG_BOUND)

    theta, sse, converged, iterations = _levenberg_marquardt(
        residual_fn, jacobian_fn, _plcutoff_pack(init), project, max_iterations
    )
    params = PowerLawCutoffParams(math.exp(theta[0]), alpha, math.exp(theta[1]))
    return params, sse, converged, iterations


def _nonempty(hist: Histogram) -> tuple[np.ndarray, np.ndarray]:
    mask = hist.counts > 0
    return hist.bin_centers()[mask], hist.densities[mask]


def fit(
    hist: Histogram,
    model: ModelKind,
    alpha_fixed: Optional[float] = None,
    init: Optional[ModelParams] = None,
    poisson_weights: bool = False,
    max_iterations: int = MAX_ITERATIONS,
) -> FitResult:
    """Fit one model to a histogram's non-empty bins.

    ``alpha_fixed`` (1 or 1.5) is required for the cutoff power law; the
    exponent is never optimized. ``poisson_weights`` switches to
    count-based inverse-variance weighting instead of plain least squares.
    Non-convergence is reported through the result flag, not an exception.
    """
    mask = hist.counts > 0
    n_used = int(mask.sum())
    if n_used < 5:
        raise ValueError(f"need at least 5 non-empty bins to fit, got {n_used}")
    centers, densities = _nonempty(hist)

    if model is ModelKind.POWERLAW_CUTOFF:
        if init is not None:
            if not isinstance(init, PowerLawCutoffParams):
                raise ValueError("init does not match the requested model")
            alpha = _check_alpha(init.alpha)
            if alpha_fixed is not None and float(alpha_fixed) != alpha:
                raise ValueError("alpha_fixed disagrees with init.alpha")
        else:
            alpha = _check_alpha(alpha_fixed)
    else:
        if init is not None and not isinstance(init, LogNormalParams):
            raise ValueError("init does not match the requested model")
        alpha = None

    if init is None:
        init = _guess_from_histogram(hist, model, alpha)

    weights = None
    if poisson_weights:
        # density variance per bin under Poisson counts: c / (N w)^2
        nw = hist.total_count * hist.widths[mask]
        weights = nw**2 / np.maximum(hist.counts[mask], 1)

    params, sse, converged, iterations = _fit_arrays(
        centers, densities, model, init, weights, max_iterations
    )
    quality = goodness(hist, params)
    return FitResult(
        model=model,
        params=params,
        sse=quality.sse,
        r_squared=quality.r_squared,
        n_bins=n_used,
        converged=converged,
        iterations=iterations,
        histogram=hist,
    )


def goodness(hist: Histogram, params: ModelParams) -> Goodness:
    """Unweighted SSE over non-empty bins and the matching R^2.

    R^2 is None when every bin density is identical (zero total variance).
    """
    if not np.any(hist.counts > 0):
        raise ValueError("histogram has no occupied bins")
    centers, densities = _nonempty(hist)
    if isinstance(params, LogNormalParams):
        predicted = eval_lognormal(params, centers)
    else:
        predicted = eval_powerlaw_cutoff(params, centers)
    sse = float(np.sum((densities - predicted) ** 2))
    sst = float(np.sum((densities - densities.mean()) ** 2))
    r_squared = None if sst == 0.0 else 1.0 - sse / sst
    return Goodness(sse=sse, r_squared=r_squared)


def compare(fit_a: FitResult, fit_b: FitResult) -> ComparisonReport:
    """Pit two fits of the same histogram against each other.

    Flags the pair indistinguishable when the SSE gap relative to the
    better fit is below 20%, which lets the report state a tie instead of
    forcing a winner.
    """
    ha, hb = fit_a.histogram, fit_b.histogram
    if not (np.array_equal(ha.bin_edges, hb.bin_edges) and np.array_equal(ha.counts, hb.counts)):
        raise ValueError("fits were produced from different histograms")
    better, worse = sorted((fit_a, fit_b), key=lambda f: f.sse)
    if better.sse == worse.sse:
        rel = 0.0
        preferred = None
    elif better.sse == 0.0:
        rel = math.inf
        preferred = better.model
    else:
        rel = (worse.sse - better.sse) / better.sse
        preferred = better.model
    return ComparisonReport(
        fit_a=fit_a,
        fit_b=fit_b,
        preferred=preferred,
        rel_sse_difference=rel,
        indistinguishable=rel < INDISTINGUISHABLE_REL_SSE,
    )
