"""
Empirical Bayes moderation of estimated variances

Step 1 of the two-step strategy: fit the scaled inverse-chi-square prior
s_j⁻² ~ s₀⁻² χ²_{ν₀}/ν₀ to the observed ŝ_j² (each ŝ_j² ~ s_j² χ²_{ν_j}/ν_j)
by matching the first two moments of ln ŝ_j², then shrink every ŝ_j²
towards s₀².
"""

import logging
import math
from typing import Tuple

import numpy as np

from .exceptions import EstimationError
from .models import ModeratedStats, SummaryStats, VarianceObservations
from .stats_core import INF_DF, ScaledChiSquare, digamma, t_sf, trigamma, trigamma_inverse

logger = logging.getLogger(__name__)

# Moment excess at or below this value selects the ν₀ = ∞ branch.
MOMENT_EXCESS_FLOOR = 1e-12
# Estimates of ν₀ beyond this are reported as the infinite sentinel.
NU0_CAP = 1e6


def estimate_hyperparams(obs: VarianceObservations) -> Tuple[float, float]:
    """
    Method-of-moments estimate of (s₀², ν₀) on the log scale.

    With z_j = ln ŝ_j², E[z_j] = ln s₀² + ψ(ν_j/2) − ln(ν_j/2) − ψ(ν₀/2) + ln(ν₀/2)
    and Var[z_j] = ψ′(ν_j/2) + ψ′(ν₀/2). The sample variance of the
    df-corrected log variances minus the mean of ψ′(ν_j/2) is matched to
    ψ′(ν₀/2); s₀² then follows from the mean equation.

    Zero (or infinite-df) variances are left out of the estimate.

    Args:
        obs: Observed variances and their degrees of freedom.

    Returns:
        Tuple (s0_sq, nu0); nu0 may be ``INF_DF``.

    Raises:
        EstimationError: fewer than two usable variances.
    """
    usable = obs.usable
    n = int(usable.sum())
    if n == 0:
        raise EstimationError("all variances are zero; cannot estimate s0 and nu0")
    if n < 2:
        raise EstimationError("at least two positive variances are required to estimate s0 and nu0")

    s2 = obs.s2_hat[usable]
    half_df = obs.df[usable] / 2.0
    e = np.log(s2) - digamma(half_df) + np.log(half_df)
    e_mean = float(np.mean(e))
    e_var = float(np.sum((e - e_mean) ** 2) / (n - 1))
    excess = e_var - float(np.mean(trigamma(half_df)))

    if excess <= MOMENT_EXCESS_FLOOR:
        logger.info("log-variance spread within sampling noise (excess %.3g); nu0 = inf", excess)
        return math.exp(e_mean), INF_DF

    nu0 = 2.0 * float(trigamma_inverse(excess))
    if nu0 > NU0_CAP:
        logger.info("nu0 estimate %.3g exceeds cap %.0g; nu0 = inf", nu0, NU0_CAP)
        return math.exp(e_mean), INF_DF

    s0_sq = math.exp(e_mean + float(digamma(nu0 / 2.0)) - math.log(nu0 / 2.0))
    return s0_sq, nu0


def moderate(obs: VarianceObservations, s0_sq: float, nu0: float) -> ModeratedStats:
    """
    Posterior-shrunk variances s̃_j² = (ν₀s₀² + ν_jŝ_j²)/(ν₀ + ν_j) and ν̃_j = ν₀ + ν_j.

    ν₀ = ∞ gives s̃_j² = s₀² and ν̃_j = ∞ for every unit with finite ν_j.
    Units with ν_j = ∞ keep their known variance ŝ_j² under any ν₀.
    """
    if not s0_sq > 0:
        raise EstimationError("s0_sq must be positive")
    if not nu0 > 0:
        raise EstimationError("nu0 must be positive")

    n = len(obs)
    nu = obs.df
    if math.isinf(nu0):
        s2_tilde = np.full(n, float(s0_sq))
        nu_tilde = np.full(n, INF_DF)
    else:
        with np.errstate(invalid="ignore"):
            s2_tilde = (nu0 * s0_sq + nu * obs.s2_hat) / (nu0 + nu)
        nu_tilde = nu0 + nu
    s2_tilde = np.where(np.isinf(nu), obs.s2_hat, s2_tilde)
    return ModeratedStats(s0_sq=float(s0_sq), nu0=float(nu0),
                          s_tilde=np.sqrt(s2_tilde), nu_tilde=nu_tilde)


def squeeze_variances(obs: VarianceObservations) -> ModeratedStats:
    """Estimate the hyperparameters and moderate in one call."""
    s0_sq, nu0 = estimate_hyperparams(obs)
    logger.debug("variance prior: s0^2=%.6g nu0=%s", s0_sq, nu0)
    return moderate(obs, s0_sq, nu0)


def posterior_variance_law(s_hat_j: float, s0_sq: float, nu0: float,
                           nu_j: float) -> ScaledChiSquare:
    """
    Law of the precision s_j⁻² given ŝ_j: s̃_j⁻² χ²_{ν̃_j}/ν̃_j.

    ν₀ = ∞ is the point mass at s₀⁻².
    """
    obs = VarianceObservations(s2_hat=[s_hat_j ** 2], df=[nu_j])
    mod = moderate(obs, s0_sq, nu0)
    return ScaledChiSquare(scale=float(1.0 / mod.s2_tilde[0]), df=float(mod.nu_tilde[0]))


def moderated_t(data: SummaryStats, moderated: ModeratedStats) -> Tuple[np.ndarray, np.ndarray]:
    """
    Moderated t statistics β̂_j/s̃_j and their two-sided p-values against t_ν̃.
    """
    t_stat = data.beta_hat / moderated.s_tilde
    p_value = 2.0 * np.asarray(t_sf(np.abs(t_stat), moderated.nu_tilde))
    return t_stat, np.clip(p_value, 0.0, 1.0)
