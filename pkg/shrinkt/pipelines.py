"""
Analysis pipelines

End-to-end routes from per-unit summary statistics to posterior summaries:

- ``naive``: t-means on (β̂, ŝ, ν) without variance moderation.
- ``two_step_alpha0`` / ``two_step_alpha1``: moderate variances, then
  t-means on (β̂, s̃, ν̃) with α = 0 or α = 1.
- ``adhoc_pval2se``: moderated-t p-values turned into normal-means
  standard errors s′, then a normal-means fit.
- ``qvalue_baseline``: moderated-t p-values with Storey q-values.
"""

import logging
from dataclasses import dataclass
from enum import Enum
from typing import Optional

import numpy as np
import pandas as pd
from statsmodels.stats.multitest import multipletests

from .core import DEFAULT_PENALTY, TMeansSolver
from .exceptions import DataError, DomainError
from .models import (
    POSTERIOR_COLUMNS,
    FitResult,
    GridSpec,
    ModeratedStats,
    PosteriorSummary,
    SummaryStats,
    VarianceObservations,
)
from .posterior import CRED_LEVEL, summarize
from .stats_core import INF_DF, normal_quantile, t_quantile
from .variance_moderation import moderated_t, squeeze_variances

logger = logging.getLogger(__name__)

STOREY_LAMBDA = 0.5
P_FLOOR = 1e-300


class PipelineId(str, Enum):
    NAIVE = "naive"
    TWO_STEP_ALPHA0 = "two_step_alpha0"
    TWO_STEP_ALPHA1 = "two_step_alpha1"
    ADHOC_PVAL2SE = "adhoc_pval2se"
    QVALUE_BASELINE = "qvalue_baseline"

    @classmethod
    def parse(cls, name: str, alpha: float = 0.0) -> "PipelineId":
        """Accept enum values plus the ``two-step``/``adhoc``/``qvalue`` shorthands."""
        key = name.strip().lower().replace("-", "_")
        if key == "two_step":
            if alpha not in (0, 1):
                raise ValueError("two-step pipeline supports alpha 0 or 1")
            return cls.TWO_STEP_ALPHA1 if alpha == 1 else cls.TWO_STEP_ALPHA0
        aliases = {"adhoc": cls.ADHOC_PVAL2SE, "qvalue": cls.QVALUE_BASELINE}
        if key in aliases:
            return aliases[key]
        try:
            return cls(key)
        except ValueError:
            choices = ", ".join(p.value for p in cls)
            raise ValueError(f"unknown pipeline {name!r} (choose from {choices})") from None


ALL_PIPELINES = tuple(PipelineId)


@dataclass
class PipelineResult:
    """Output of one pipeline run on one dataset."""

    pipeline: PipelineId
    pi0_hat: float
    summary: PosteriorSummary
    data: SummaryStats
    se_moderated: np.ndarray
    df_moderated: np.ndarray
    moderated: Optional[ModeratedStats] = None
    fit: Optional[FitResult] = None

    def to_frame(self) -> pd.DataFrame:
        """Input columns, the (moderated) standard errors used, then posterior columns."""
        frame = self.data.to_frame()
        frame["se_moderated"] = self.se_moderated
        frame["df_moderated"] = self.df_moderated
        table = self.summary.table
        for col in POSTERIOR_COLUMNS:
            frame[col] = table[col].to_numpy(dtype=float)
        return frame

    def report(self) -> dict:
        """Fitted quantities printed by ``shrinkt fit``."""
        out = {
            "pipeline": self.pipeline.value,
            "pi0_hat": float(self.pi0_hat),
            "n_units": len(self.data),
            "n_excluded": int(self.summary.excluded.sum()),
        }
        if self.moderated is not None:
            out.update(self.moderated.to_dict())
        if self.fit is not None:
            out["log_likelihood"] = float(self.fit.log_likelihood)
            out["alpha"] = float(self.fit.alpha)
            out["n_iters"] = int(self.fit.n_iters)
            out["converged"] = bool(self.fit.converged)
        return out


def _expand(summary: PosteriorSummary, ids, keep: np.ndarray) -> PosteriorSummary:
    """Place summaries of the kept units into a full table; other rows are NaN and excluded."""
    table = pd.DataFrame({"id": list(ids)})
    for col in POSTERIOR_COLUMNS:
        values = np.full(len(keep), np.nan)
        values[keep] = summary.table[col].to_numpy(dtype=float)
        table[col] = values
    table["excluded"] = ~keep
    return PosteriorSummary(table=table, clamped_variances=summary.clamped_variances)


def _fit_and_summarize(data: SummaryStats, keep: np.ndarray, alpha: float,
                       penalty: float, grid: Optional[GridSpec]):
    if not np.any(keep):
        raise DataError("no units left to fit after exclusions")
    subset = data if np.all(keep) else data.subset(keep)
    fit = TMeansSolver(penalty=penalty, grid=grid, alpha=alpha).fit(subset)
    summary = summarize(fit, subset)
    if not np.all(keep):
        summary = _expand(summary, data.ids, keep)
    return fit, summary


def _moderate(data: SummaryStats) -> ModeratedStats:
    """Variance moderation; units that all carry known variances pass through unchanged."""
    if not np.any(np.isfinite(data.df)):
        logger.info("all degrees of freedom infinite; variances taken as known")
        return ModeratedStats(s0_sq=float(np.mean(data.se ** 2)) or 1.0, nu0=INF_DF,
                              s_tilde=data.se.copy(), nu_tilde=data.df.copy())
    return squeeze_variances(VarianceObservations.from_summary(data))


def run_naive(data: SummaryStats, penalty: float = DEFAULT_PENALTY,
              grid: Optional[GridSpec] = None) -> PipelineResult:
    """t-means on the unmoderated (β̂, ŝ, ν); zero standard errors are excluded."""
    keep = ~data.zero_se
    if not np.all(keep):
        logger.warning("naive pipeline: excluding %d units with zero standard error",
                       int((~keep).sum()))
    fit, summary = _fit_and_summarize(data, keep, 0.0, penalty, grid)
    return PipelineResult(
        pipeline=PipelineId.NAIVE, pi0_hat=fit.pi0, summary=summary, data=data,
        se_moderated=data.se.copy(), df_moderated=data.df.copy(), fit=fit,
    )


def run_two_step(data: SummaryStats, alpha: float = 0.0, penalty: float = DEFAULT_PENALTY,
                 grid: Optional[GridSpec] = None) -> PipelineResult:
    """
    Two-step strategy: moderate the variances, then solve the t-means
    problem on (β̂, s̃, ν̃) with β_j/s̃_j^α ~ g.
    """
    if alpha not in (0, 1):
        raise ValueError("two-step pipeline supports alpha 0 or 1")
    moderated = _moderate(data)
    moderated_data = data.with_se(moderated.s_tilde, moderated.nu_tilde)
    keep = moderated_data.se > 0
    if not np.all(keep):
        logger.warning("two-step pipeline: excluding %d units with zero moderated standard error",
                       int((~keep).sum()))
    fit, summary = _fit_and_summarize(moderated_data, keep, float(alpha), penalty, grid)
    pipeline = PipelineId.TWO_STEP_ALPHA1 if alpha == 1 else PipelineId.TWO_STEP_ALPHA0
    return PipelineResult(
        pipeline=pipeline, pi0_hat=fit.pi0, summary=summary, data=data,
        se_moderated=moderated.s_tilde, df_moderated=moderated.nu_tilde,
        moderated=moderated, fit=fit,
    )


def pval2se(beta_hat, p) -> np.ndarray:
    """
    Standard error s′ = |β̂/z| with z the two-sided normal quantile of ``p``,
    so that β̂/s′ has two-sided normal p-value ``p``.

    Units with β̂ = 0 (or p = 1) have no valid s′ and come back as NaN.

    Raises:
        DomainError: p outside (0, 1].
    """
    beta_hat = np.asarray(beta_hat, dtype=float)
    p = np.asarray(p, dtype=float)
    if np.any(np.isnan(p)) or np.any(p <= 0) or np.any(p > 1):
        raise DomainError("p-values must lie in (0, 1]")
    z = -np.asarray(normal_quantile(np.maximum(p, P_FLOOR) / 2.0))
    with np.errstate(divide="ignore", invalid="ignore"):
        s_prime = np.abs(beta_hat / z)
    invalid = (beta_hat == 0) | ~(z > 0)
    s_prime = np.where(invalid, np.nan, s_prime)
    return s_prime if s_prime.ndim else float(s_prime)


def run_adhoc(data: SummaryStats, penalty: float = DEFAULT_PENALTY,
              grid: Optional[GridSpec] = None) -> PipelineResult:
    """
    Ad hoc normal-means route: moderated-t p-values → s′ via pval2se → fit with ν = ∞.
    """
    moderated = _moderate(data)
    _, p_value = moderated_t(data, moderated)
    s_prime = np.asarray(pval2se(data.beta_hat, np.maximum(p_value, P_FLOOR)))
    keep = np.isfinite(s_prime) & (s_prime > 0)
    if not np.all(keep):
        logger.warning("adhoc pipeline: excluding %d units with zero effect estimate",
                       int((~keep).sum()))
    normal_data = data.with_se(np.where(keep, s_prime, 0.0), np.full(len(data), INF_DF))
    fit, summary = _fit_and_summarize(normal_data, keep, 0.0, penalty, grid)
    return PipelineResult(
        pipeline=PipelineId.ADHOC_PVAL2SE, pi0_hat=fit.pi0, summary=summary, data=data,
        se_moderated=moderated.s_tilde, df_moderated=moderated.nu_tilde,
        moderated=moderated, fit=fit,
    )


def storey_pi0(p_values, lam: float = STOREY_LAMBDA) -> float:
    """
    Storey's π̂₀ = #{p > λ}/((1 − λ)m) at a fixed λ, kept within (0, 1].

    A zero count is replaced by one so the estimate stays positive.
    """
    p_values = np.asarray(p_values, dtype=float)
    m = len(p_values)
    if m == 0:
        raise DataError("no p-values")
    above = max(int(np.sum(p_values > lam)), 1)
    return float(min(above / ((1.0 - lam) * m), 1.0))


def bh_adjust(p_values) -> np.ndarray:
    """Benjamini–Hochberg adjusted p-values."""
    p_values = np.asarray(p_values, dtype=float)
    if len(p_values) == 0:
        return p_values.copy()
    return multipletests(p_values, method="fdr_bh")[1]


def run_qvalue_baseline(data: SummaryStats) -> PipelineResult:
    """
    Moderated-t p-values with Storey q-values. Effect estimates stay
    unshrunk (post_mean = β̂) and bounds are moderated-t confidence bounds.
    """
    moderated = _moderate(data)
    _, p_value = moderated_t(data, moderated)
    pi0 = storey_pi0(p_value)
    q = np.minimum(pi0 * bh_adjust(p_value), 1.0)
    crit = np.asarray(t_quantile(CRED_LEVEL, moderated.nu_tilde)) * moderated.s_tilde
    nan = np.full(len(data), np.nan)
    table = pd.DataFrame({
        "id": data.ids,
        "post_mean": data.beta_hat,
        "post_sd": moderated.s_tilde,
        "lfdr": nan,
        "lfsr": nan,
        "qvalue": q,
        "lower_cred_95": data.beta_hat - crit,
        "upper_cred_95": data.beta_hat + crit,
        "excluded": False,
    })
    return PipelineResult(
        pipeline=PipelineId.QVALUE_BASELINE, pi0_hat=pi0, summary=PosteriorSummary(table=table),
        data=data, se_moderated=moderated.s_tilde, df_moderated=moderated.nu_tilde,
        moderated=moderated,
    )


def run_pipeline(pipeline, data: SummaryStats, penalty: float = DEFAULT_PENALTY,
                 grid: Optional[GridSpec] = None) -> PipelineResult:
    """Dispatch on a PipelineId (or its string value)."""
    pipeline = PipelineId(pipeline)
    if pipeline is PipelineId.NAIVE:
        return run_naive(data, penalty, grid)
    if pipeline is PipelineId.TWO_STEP_ALPHA0:
        return run_two_step(data, 0.0, penalty, grid)
    if pipeline is PipelineId.TWO_STEP_ALPHA1:
        return run_two_step(data, 1.0, penalty, grid)
    if pipeline is PipelineId.ADHOC_PVAL2SE:
        return run_adhoc(data, penalty, grid)
    return run_qvalue_baseline(data)
