"""
Core EB t-means engine

Computes the likelihood matrix of (β̂_j, s_j, ν_j) under every component of a
unimodal grid prior, where β̂_j | β_j ~ t_ν_j(β_j, s_j), and fits the mixture
weights by penalized EM. The α generalization fits β_j/s_j^α ~ g on the
rescaled data β̂_j/s_j^α with scale s_j^{1−α}.
"""

import logging
import math
from typing import Iterable, Optional, Tuple

import numpy as np
import pandas as pd

from .exceptions import LikelihoodError
from .models import FitResult, GridSpec, LikelihoodMatrix, SummaryStats, UnimodalPrior
from .stats_core import t_central_prob, t_logpdf, t_logsf
from .unimodal_prior import build_grid

logger = logging.getLogger(__name__)

DEFAULT_PENALTY = 10.0
DEFAULT_TOL = 1e-8
DEFAULT_MAX_ITER = 5000
# Relative slack allowed when checking EM monotonicity against round-off.
MONOTONE_RTOL = 1e-10


def _log1mexp(d: np.ndarray) -> np.ndarray:
    """log(1 − e^d) for d ≤ 0."""
    d = np.asarray(d, dtype=float)
    out = np.empty_like(d)
    near = d > -math.log(2.0)
    with np.errstate(divide="ignore"):
        out[near] = np.log(-np.expm1(d[near]))
        out[~near] = np.log1p(-np.exp(d[~near]))
    return out


def log_interval_mass(lo, hi, df) -> np.ndarray:
    """
    log P(lo < T ≤ hi) for the standard t law, lo ≤ hi.

    Intervals straddling 0 add two central probabilities; one-sided
    intervals are reflected to the upper half line and differenced either
    through central probabilities (near 0) or log survival functions (tails).
    """
    lo, hi, df = (np.array(v, dtype=float) for v in np.broadcast_arrays(lo, hi, df))
    shape = lo.shape
    lo, hi, df = lo.ravel(), hi.ravel(), df.ravel()
    out = np.full(lo.shape, -np.inf)

    straddle = (lo < 0) & (hi > 0)
    if np.any(straddle):
        mass = (np.asarray(t_central_prob(lo[straddle], df[straddle]))
                + np.asarray(t_central_prob(hi[straddle], df[straddle])))
        out[straddle] = np.log(mass)

    left = (hi <= 0) & ~straddle
    rlo = np.where(left, -hi, lo)
    rhi = np.where(left, -lo, hi)
    side = ~straddle & (rhi > rlo)

    near = side & (rlo < 1.0)
    if np.any(near):
        mass = (np.asarray(t_central_prob(rhi[near], df[near]))
                - np.asarray(t_central_prob(rlo[near], df[near])))
        with np.errstate(divide="ignore"):
            out[near] = np.log(np.clip(mass, 0.0, None))

    far = side & ~near
    if np.any(far):
        log_lo = np.asarray(t_logsf(rlo[far], df[far]))
        log_hi = np.asarray(t_logsf(rhi[far], df[far]))
        with np.errstate(invalid="ignore"):
            diff = np.where(np.isneginf(log_hi), -np.inf, log_hi - log_lo)
        out[far] = log_lo + _log1mexp(np.minimum(diff, 0.0))

    return out.reshape(shape)


def component_loglik(beta_hat, se, df, a, b) -> np.ndarray:
    """
    log marginal likelihood of β̂ under one prior component.

    Point mass (a = b): log f_ν((β̂ − a)/s) − log s.
    Uniform on [a, b]: log{[F_ν((β̂ − a)/s) − F_ν((β̂ − b)/s)]/(b − a)}.

    All arguments broadcast against each other.

    Raises:
        LikelihoodError: NaN input or nonpositive standard error.
    """
    arrays = np.broadcast_arrays(*(np.asarray(v, dtype=float) for v in (beta_hat, se, df, a, b)))
    beta_hat, se, df, a, b = (np.array(v) for v in arrays)
    if any(np.any(np.isnan(v)) for v in (beta_hat, se, df, a, b)):
        raise LikelihoodError("NaN passed to component_loglik")
    if np.any(se <= 0):
        raise LikelihoodError("standard errors must be positive")
    if np.any(a > b):
        raise ValueError("component intervals need a <= b")

    out = np.empty(beta_hat.shape)
    point = a == b
    if np.any(point):
        z = (beta_hat[point] - a[point]) / se[point]
        out[point] = np.asarray(t_logpdf(z, df[point])) - np.log(se[point])
    iv = ~point
    if np.any(iv):
        lo = (beta_hat[iv] - b[iv]) / se[iv]
        hi = (beta_hat[iv] - a[iv]) / se[iv]
        out[iv] = log_interval_mass(lo, hi, df[iv]) - np.log(b[iv] - a[iv])
    return out if out.ndim else float(out)


def fitting_coordinates(data: SummaryStats, alpha: float) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """
    Data on the scale the prior is fit on.

    Returns:
        (y, scale, multiplier) with y = β̂/s^α, scale = s^{1−α}, multiplier = s^α,
        so that β = multiplier·θ for θ drawn from the fitted prior.
    """
    if np.any(data.se <= 0):
        raise LikelihoodError("standard errors must be positive for the t-means solver")
    multiplier = data.se ** alpha
    return data.beta_hat / multiplier, data.se ** (1.0 - alpha), multiplier


def build_likelihood_matrix(data: SummaryStats, prior: UnimodalPrior,
                            alpha: float = 0.0) -> LikelihoodMatrix:
    """
    Likelihood matrix of every unit under every component of ``prior``.

    For α ≠ 0 the components act on θ_j = β_j/s_j^α; the Jacobian −α·ln s_j is
    added to each row so log-likelihoods refer to β̂ for every α.
    """
    y, scale, _ = fitting_coordinates(data, alpha)
    jacobian = -alpha * np.log(data.se)
    log_lik = component_loglik(
        y[:, None], scale[:, None], data.df[:, None],
        prior.lower[None, :], prior.upper[None, :],
    )
    log_lik = np.atleast_2d(log_lik) + jacobian[:, None]
    return LikelihoodMatrix(log_lik=log_lik, jacobian=jacobian, alpha=alpha, ids=data.ids)


def _penalized_objective(Lr: np.ndarray, row_max: np.ndarray, weights: np.ndarray,
                         penalty: float) -> Tuple[float, float]:
    mix = Lr @ weights
    with np.errstate(divide="ignore"):
        loglik = float(np.sum(np.log(mix)) + np.sum(row_max))
        pen = (penalty - 1.0) * math.log(weights[0]) if penalty != 1.0 else 0.0
    return loglik, loglik + pen


def is_monotone(trace: Iterable[float], rtol: float = MONOTONE_RTOL) -> bool:
    """True when an objective trace never decreases beyond round-off."""
    values = np.asarray(list(trace), dtype=float)
    if values.size < 2:
        return True
    drops = values[:-1] - values[1:]
    slack = rtol * np.maximum(1.0, np.abs(values[:-1]))
    return bool(np.all(drops <= slack))


def fit_weights(L: LikelihoodMatrix, prior: UnimodalPrior,
                penalty: float = DEFAULT_PENALTY, tol: float = DEFAULT_TOL,
                max_iter: int = DEFAULT_MAX_ITER) -> FitResult:
    """
    Maximize Σ_j log Σ_k π_k L[j][k] + (penalty − 1)·log π₀ over the simplex by EM.

    The null-weight penalty enters the M-step as (penalty − 1) pseudo-counts on
    π₀, so each EM update is a MAP-EM step and the penalized objective never
    decreases. Iteration stops when the objective gain falls below ``tol``.

    Args:
        L: Likelihood matrix (log scale).
        prior: Grid prior supplying intervals and starting weights.
        penalty: Dirichlet-style null penalty, ≥ 1.
        tol: Objective-gain stopping threshold.
        max_iter: Iteration cap.

    Returns:
        FitResult with the fitted prior, responsibilities and objective trace.

    Raises:
        LikelihoodError: a unit has zero likelihood under every component.
    """
    if penalty < 1:
        raise ValueError("penalty must be >= 1")
    log_lik = L.log_lik
    if log_lik.shape[1] != prior.n_components:
        raise ValueError("likelihood matrix and prior disagree on the number of components")

    row_max = log_lik.max(axis=1)
    dead = ~np.isfinite(row_max)
    if np.any(dead):
        j = int(np.flatnonzero(dead)[0])
        label = L.ids[j] if L.ids is not None else str(j)
        raise LikelihoodError(f"unit {label} (row {j}) has zero likelihood under every component")

    Lr = np.exp(log_lik - row_max[:, None])
    weights = prior.weights.copy()
    if penalty > 1 and weights[0] <= 0:
        weights[0] = 1.0 / len(weights)
        weights /= weights.sum()

    pseudo = np.zeros_like(weights)
    pseudo[0] = penalty - 1.0

    loglik, objective = _penalized_objective(Lr, row_max, weights, penalty)
    trace = [objective]
    converged = prior.n_components == 1
    n_iters = 0

    while not converged and n_iters < max_iter:
        mix = Lr @ weights
        counts = weights * (Lr.T @ (1.0 / mix)) + pseudo
        new_weights = counts / counts.sum()
        new_loglik, new_objective = _penalized_objective(Lr, row_max, new_weights, penalty)
        n_iters += 1
        gain = new_objective - objective
        weights, loglik, objective = new_weights, new_loglik, new_objective
        trace.append(objective)
        if gain < tol:
            converged = True

    if not converged:
        logger.warning("EM stopped after %d iterations without reaching tol=%g", n_iters, tol)
    if not is_monotone(trace):
        logger.warning("penalized objective decreased during EM")

    mix = Lr @ weights
    responsibilities = Lr * weights / mix[:, None]
    fitted = prior.with_weights(weights)
    return FitResult(
        prior=fitted,
        log_likelihood=loglik,
        penalized_objective=objective,
        responsibilities=responsibilities,
        alpha=L.alpha,
        n_iters=n_iters,
        converged=converged,
        penalty=penalty,
        objective_trace=trace,
    )


class TMeansSolver:
    """
    EB t-means solver: grid construction, likelihood matrix and weight fit.

    The grid is built on the fitting scale (β̂/s^α with scale s^{1−α}).
    """

    def __init__(self, penalty: float = DEFAULT_PENALTY, grid: Optional[GridSpec] = None,
                 alpha: float = 0.0, tol: float = DEFAULT_TOL,
                 max_iter: int = DEFAULT_MAX_ITER):
        """
        Initialize the solver.

        Args:
            penalty: Null-weight penalty (≥ 1).
            grid: Grid settings for the unimodal prior.
            alpha: Exponent of the s^α scaling.
            tol: EM objective-gain tolerance.
            max_iter: EM iteration cap.
        """
        self.penalty = penalty
        self.grid = grid or GridSpec()
        self.alpha = alpha
        self.tol = tol
        self.max_iter = max_iter

    def prior_grid(self, data: SummaryStats) -> UnimodalPrior:
        y, scale, _ = fitting_coordinates(data, self.alpha)
        return build_grid(y, scale, self.grid)

    def likelihood(self, data: SummaryStats,
                   prior: Optional[UnimodalPrior] = None) -> LikelihoodMatrix:
        prior = prior or self.prior_grid(data)
        return build_likelihood_matrix(data, prior, self.alpha)

    def fit(self, data: SummaryStats, prior: Optional[UnimodalPrior] = None) -> FitResult:
        """Fit the mixture weights to ``data``; returns the FitResult."""
        prior = prior or self.prior_grid(data)
        L = build_likelihood_matrix(data, prior, self.alpha)
        fit = fit_weights(L, prior, penalty=self.penalty, tol=self.tol, max_iter=self.max_iter)
        logger.info("t-means fit: pi0=%.4f loglik=%.4f alpha=%g iters=%d",
                    fit.pi0, fit.log_likelihood, self.alpha, fit.n_iters)
        return fit


def alpha_profile(data: SummaryStats, alphas: Iterable[float] = (0.0, 1.0),
                  penalty: float = DEFAULT_PENALTY,
                  grid: Optional[GridSpec] = None) -> pd.DataFrame:
    """
    Log-likelihood of the fitted model for each α, for comparing α values.
    """
    rows = []
    for alpha in alphas:
        fit = TMeansSolver(penalty=penalty, grid=grid, alpha=alpha).fit(data)
        rows.append({"alpha": float(alpha), "log_likelihood": fit.log_likelihood,
                     "pi0": fit.pi0})
    return pd.DataFrame(rows, columns=["alpha", "log_likelihood", "pi0"])
