"""
Unimodal effect priors

Builds the prior family used by the t-means solver: a point mass at zero plus
a geometric grid of zero-anchored uniform components. Symmetric grids use
[−c_k, c_k]; the asymmetric variant splits each scale into [−c_k, 0] and
[0, c_k].
"""

import math
from typing import Optional

import numpy as np

from .models import GridSpec, UnimodalPrior


def grid_scales(min_scale: float, max_scale: float, multiplier: float) -> np.ndarray:
    """
    Geometric sequence c_k = min_scale·multiplier^k, k = 0…K−1, with c_{K−1} ≥ max_scale.

    Returns a single scale when ``max_scale <= min_scale``.
    """
    if not max_scale > min_scale:
        return np.array([float(min_scale)])
    steps = math.log(max_scale / min_scale) / math.log(multiplier)
    count = int(math.ceil(steps - 1e-9)) + 1
    return min_scale * multiplier ** np.arange(count)


def build_grid(beta_hat: np.ndarray, se: np.ndarray,
               spec: Optional[GridSpec] = None) -> UnimodalPrior:
    """
    Construct the component grid and initialize uniform weights.

    Args:
        beta_hat: Effect estimates on the scale the prior is fit on.
        se: Matching standard errors (only finite positive values are used).
        spec: Grid settings; ``None`` uses the defaults of ``GridSpec``.

    Returns:
        UnimodalPrior whose component 0 is the point mass at 0.
    """
    spec = spec or GridSpec()
    beta_hat = np.asarray(beta_hat, dtype=float)
    se = np.asarray(se, dtype=float)
    if beta_hat.size == 0 or se.size == 0:
        raise ValueError("cannot build a grid from empty data")
    finite_se = se[np.isfinite(se) & (se > 0)]
    if spec.min_scale is None and finite_se.size == 0:
        raise ValueError("at least one finite positive standard error is required")

    min_scale = spec.min_scale if spec.min_scale is not None else float(finite_se.min()) / 10.0
    if spec.max_scale is not None:
        max_scale = spec.max_scale
    else:
        max_scale = 2.0 * float(np.max(np.abs(beta_hat[np.isfinite(beta_hat)]), initial=0.0))

    scales = grid_scales(min_scale, max_scale, spec.multiplier)
    if spec.symmetric:
        intervals = np.column_stack([-scales, scales])
    else:
        intervals = np.vstack([np.column_stack([-scales, np.zeros_like(scales)]),
                               np.column_stack([np.zeros_like(scales), scales])])
    intervals = np.vstack([[0.0, 0.0], intervals])
    weights = np.full(len(intervals), 1.0 / len(intervals))
    return UnimodalPrior(weights=weights, intervals=intervals)


def point_mass_prior() -> UnimodalPrior:
    """The degenerate prior δ₀ (a grid with K = 0)."""
    return UnimodalPrior(weights=np.array([1.0]), intervals=np.array([[0.0, 0.0]]))


def prior_cdf(g: UnimodalPrior, x):
    """Exact mixture CDF; right-continuous with a jump of π₀ at 0."""
    return g.cdf(x)


def prior_sample(g: UnimodalPrior, rng: np.random.Generator, size: int = 1) -> np.ndarray:
    """Draw a component by weight, then a uniform point within it."""
    return g.sample(rng, size)


def prior_mean(g: UnimodalPrior) -> float:
    return g.mean()


def prior_sd(g: UnimodalPrior) -> float:
    return g.sd()
