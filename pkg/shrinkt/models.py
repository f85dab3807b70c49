"""
shrinkt Data Models

This module contains the core data structures shared by the variance
moderation, t-means engine, posterior summaries and simulation bench.
"""

import json
import math
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Sequence

import numpy as np
import pandas as pd

from .exceptions import DataError, DomainError


def _vector(values, name: str) -> np.ndarray:
    arr = np.atleast_1d(np.asarray(values, dtype=float))
    if arr.ndim != 1:
        raise DataError(f"{name} must be one-dimensional")
    return arr


def _json_float(value: float):
    return "inf" if math.isinf(value) else float(value)


def _from_json_float(value) -> float:
    return math.inf if value == "inf" else float(value)


@dataclass
class SummaryStats:
    """
    Per-unit triples (β̂_j, s_j, ν_j) fed to the t-means solver.

    ``se`` holds whichever standard error the pipeline uses (ŝ, s̃ or s′).
    Zero standard errors are accepted here so that they can travel to the
    moderation step; the solver itself rejects them.
    """

    beta_hat: np.ndarray
    se: np.ndarray
    df: np.ndarray
    ids: Optional[List[str]] = None

    def __post_init__(self):
        self.beta_hat = _vector(self.beta_hat, "beta_hat")
        self.se = _vector(self.se, "se")
        df = np.asarray(self.df, dtype=float)
        if df.ndim == 0:
            df = np.full(self.beta_hat.shape, float(df))
        self.df = _vector(df, "df")

        n = len(self.beta_hat)
        if len(self.se) != n or len(self.df) != n:
            raise DataError("beta_hat, se and df must have equal lengths")
        if not np.all(np.isfinite(self.beta_hat)):
            raise DataError("beta_hat must be finite")
        if not np.all(np.isfinite(self.se)) or np.any(self.se < 0):
            raise DataError("se must be finite and nonnegative")
        if np.any(np.isnan(self.df)) or np.any(self.df <= 0):
            raise DataError("df must be positive (or inf)")
        if self.ids is None:
            self.ids = [str(i + 1) for i in range(n)]
        elif len(self.ids) != n:
            raise DataError("ids must match the number of units")
        else:
            self.ids = [str(i) for i in self.ids]

    def __len__(self) -> int:
        return len(self.beta_hat)

    @property
    def zero_se(self) -> np.ndarray:
        """Units whose standard error is zero."""
        return self.se <= 0

    def subset(self, mask: np.ndarray) -> "SummaryStats":
        """Units selected by a boolean mask."""
        mask = np.asarray(mask, dtype=bool)
        return SummaryStats(
            beta_hat=self.beta_hat[mask],
            se=self.se[mask],
            df=self.df[mask],
            ids=[i for i, keep in zip(self.ids, mask) if keep],
        )

    def with_se(self, se: np.ndarray, df: Optional[np.ndarray] = None) -> "SummaryStats":
        """Same effects with replaced standard errors (and optionally df)."""
        return SummaryStats(
            beta_hat=self.beta_hat.copy(),
            se=se,
            df=self.df.copy() if df is None else df,
            ids=list(self.ids),
        )

    def to_frame(self) -> pd.DataFrame:
        """Table with ``id``, ``beta_hat``, ``se_hat`` and ``df`` columns."""
        return pd.DataFrame({
            "id": self.ids,
            "beta_hat": self.beta_hat,
            "se_hat": self.se,
            "df": self.df,
        })

    @classmethod
    def from_frame(cls, frame: pd.DataFrame) -> "SummaryStats":
        """Build from a table with the ``to_frame`` columns."""
        ids = frame["id"].astype(str).tolist() if "id" in frame.columns else None
        return cls(
            beta_hat=frame["beta_hat"].to_numpy(dtype=float),
            se=frame["se_hat"].to_numpy(dtype=float),
            df=frame["df"].to_numpy(dtype=float),
            ids=ids,
        )


@dataclass
class VarianceObservations:
    """Observed variances ŝ_j² with their degrees of freedom ν_j."""

    s2_hat: np.ndarray
    df: np.ndarray

    def __post_init__(self):
        self.s2_hat = _vector(self.s2_hat, "s2_hat")
        df = np.asarray(self.df, dtype=float)
        if df.ndim == 0:
            df = np.full(self.s2_hat.shape, float(df))
        self.df = _vector(df, "df")
        if len(self.df) != len(self.s2_hat):
            raise DataError("s2_hat and df must have equal lengths")
        if np.any(np.isnan(self.s2_hat)) or np.any(self.s2_hat < 0):
            raise DataError("variances must be nonnegative")
        if np.any(np.isnan(self.df)) or np.any(self.df <= 0):
            raise DataError("variance degrees of freedom must be positive")

    def __len__(self) -> int:
        return len(self.s2_hat)

    @classmethod
    def from_summary(cls, data: SummaryStats) -> "VarianceObservations":
        """Squared standard errors of a summary table with its df."""
        return cls(s2_hat=data.se ** 2, df=data.df)

    @property
    def usable(self) -> np.ndarray:
        """Units that enter hyperparameter estimation (finite positive ŝ², finite ν)."""
        return np.isfinite(self.s2_hat) & (self.s2_hat > 0) & np.isfinite(self.df)


@dataclass
class ModeratedStats:
    """Inverse-gamma hyperparameters plus moderated per-unit s̃_j and ν̃_j."""

    s0_sq: float
    nu0: float
    s_tilde: np.ndarray
    nu_tilde: np.ndarray

    def __post_init__(self):
        if not self.s0_sq > 0:
            raise DomainError("s0_sq must be positive")
        if not self.nu0 > 0:
            raise DomainError("nu0 must be positive (or inf)")
        self.s_tilde = _vector(self.s_tilde, "s_tilde")
        self.nu_tilde = _vector(self.nu_tilde, "nu_tilde")
        if len(self.s_tilde) != len(self.nu_tilde):
            raise DataError("s_tilde and nu_tilde must have equal lengths")

    @property
    def s2_tilde(self) -> np.ndarray:
        """Moderated variances s̃_j²."""
        return self.s_tilde ** 2

    @property
    def nu0_is_infinite(self) -> bool:
        """True when the variance prior is a point mass (ν₀ = ∞)."""
        return math.isinf(self.nu0)

    def to_dict(self) -> Dict[str, Any]:
        """Convert to dictionary representation."""
        return {"s0_sq": float(self.s0_sq), "nu0": _json_float(self.nu0)}


@dataclass
class GridSpec:
    """
    Geometric grid of zero-anchored uniform components.

    ``min_scale``/``max_scale`` default (when ``None``) to a tenth of the
    smallest standard error and twice the largest |β̂|.
    """

    multiplier: float = math.sqrt(2.0)
    symmetric: bool = True
    min_scale: Optional[float] = None
    max_scale: Optional[float] = None

    def __post_init__(self):
        if not self.multiplier > 1:
            raise ValueError("grid multiplier must exceed 1")
        for name in ("min_scale", "max_scale"):
            value = getattr(self, name)
            if value is not None and not value > 0:
                raise ValueError(f"{name} must be positive")
        if (self.min_scale is not None and self.max_scale is not None
                and not self.min_scale < self.max_scale):
            raise ValueError("min_scale must be smaller than max_scale")


@dataclass
class UnimodalPrior:
    """
    Mixture π₀δ₀ + Σ_k π_k U[a_k, b_k] with every interval containing 0.

    Component 0 is the point mass, stored as the degenerate interval [0, 0].
    """

    weights: np.ndarray
    intervals: np.ndarray

    def __post_init__(self):
        self.weights = _vector(self.weights, "weights")
        self.intervals = np.asarray(self.intervals, dtype=float).reshape(-1, 2)
        if len(self.weights) != len(self.intervals):
            raise ValueError("one weight per component is required")
        if np.any(self.weights < 0) or not np.all(np.isfinite(self.weights)):
            raise ValueError("weights must be nonnegative")
        if abs(self.weights.sum() - 1.0) > 1e-12 * len(self.weights) + 1e-12:
            raise ValueError("weights must sum to 1")
        a, b = self.intervals[:, 0], self.intervals[:, 1]
        if np.any(a > 0) or np.any(b < 0):
            raise ValueError("every component interval must contain 0")
        if a[0] != 0 or b[0] != 0:
            raise ValueError("component 0 must be the point mass at 0")

    @property
    def n_components(self) -> int:
        """Number of components, point mass included."""
        return len(self.weights)

    @property
    def pi0(self) -> float:
        """Weight on the point mass at zero."""
        return float(self.weights[0])

    @property
    def lower(self) -> np.ndarray:
        """Left interval endpoints."""
        return self.intervals[:, 0]

    @property
    def upper(self) -> np.ndarray:
        """Right interval endpoints."""
        return self.intervals[:, 1]

    def with_weights(self, weights: np.ndarray) -> "UnimodalPrior":
        """Same grid with new weights, clipped at zero and renormalized."""
        w = np.clip(np.asarray(weights, dtype=float), 0.0, None)
        return UnimodalPrior(weights=w / w.sum(), intervals=self.intervals.copy())

    def cdf(self, x):
        """Right-continuous mixture CDF (jump of size π₀ at 0)."""
        arr = np.asarray(x, dtype=float)
        a, b = self.lower, self.upper
        width = b - a
        xs = arr[..., None]
        with np.errstate(invalid="ignore", divide="ignore"):
            frac = np.where(width > 0, (xs - a) / np.where(width > 0, width, 1.0), 0.0)
        frac = np.clip(frac, 0.0, 1.0)
        frac = np.where(width > 0, frac, (xs >= a).astype(float))
        out = frac @ self.weights
        return float(out) if np.ndim(out) == 0 else out

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        """Draw ``size`` effects from the mixture."""
        comp = rng.choice(self.n_components, size=size, p=self.weights)
        return rng.uniform(self.lower[comp], self.upper[comp])

    def mean(self) -> float:
        """Prior mean."""
        return float(self.weights @ (0.5 * (self.lower + self.upper)))

    def sd(self) -> float:
        """Prior standard deviation."""
        a, b = self.lower, self.upper
        second = self.weights @ ((a * a + a * b + b * b) / 3.0)
        return float(math.sqrt(max(second - self.mean() ** 2, 0.0)))

    def to_dict(self) -> Dict[str, Any]:
        """Convert to dictionary representation."""
        return {
            "weights": self.weights.tolist(),
            "intervals": self.intervals.tolist(),
        }

    def to_json(self) -> str:
        """Convert to JSON string."""
        return json.dumps(self.to_dict(), indent=2)

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "UnimodalPrior":
        """Rebuild from ``to_dict`` output."""
        return cls(weights=np.asarray(data["weights"]), intervals=np.asarray(data["intervals"]))

    @classmethod
    def from_json(cls, text: str) -> "UnimodalPrior":
        """Rebuild from ``to_json`` output."""
        return cls.from_dict(json.loads(text))

    def save_to_file(self, filepath: str) -> None:
        """Save the prior to a JSON file."""
        with open(filepath, "w") as f:
            json.dump(self.to_dict(), f, indent=2)

    @classmethod
    def load_from_file(cls, filepath: str) -> "UnimodalPrior":
        """Load a prior saved with ``save_to_file``."""
        with open(filepath, "r") as f:
            return cls.from_dict(json.load(f))


@dataclass
class LikelihoodMatrix:
    """
    log L[j][k]: log marginal likelihood of unit j under component k.

    Entries are stored on the log scale and already include the per-unit
    Jacobian ``jacobian[j] = −α·ln s_j`` so values are comparable across α.
    """

    log_lik: np.ndarray
    jacobian: np.ndarray
    alpha: float = 0.0
    ids: Optional[List[str]] = None

    def __post_init__(self):
        self.log_lik = np.atleast_2d(np.asarray(self.log_lik, dtype=float))
        self.jacobian = _vector(self.jacobian, "jacobian")
        if len(self.jacobian) != self.log_lik.shape[0]:
            raise ValueError("one Jacobian term per unit is required")
        if np.any(np.isnan(self.log_lik)) or np.any(np.isposinf(self.log_lik)):
            raise ValueError("log-likelihood entries must be finite or -inf")

    @property
    def shape(self):
        """(units, components)."""
        return self.log_lik.shape

    @property
    def values(self) -> np.ndarray:
        """Likelihoods on the natural scale."""
        return np.exp(self.log_lik)


@dataclass
class FitResult:
    """Fitted prior weights with the EM bookkeeping needed downstream."""

    prior: UnimodalPrior
    log_likelihood: float
    penalized_objective: float
    responsibilities: np.ndarray
    alpha: float
    n_iters: int
    converged: bool
    penalty: float = 1.0
    objective_trace: List[float] = field(default_factory=list)

    def __post_init__(self):
        if not math.isfinite(self.log_likelihood):
            raise ValueError("log_likelihood must be finite")
        rows = self.responsibilities.sum(axis=1)
        if np.any(np.abs(rows - 1.0) > 1e-10):
            raise ValueError("responsibility rows must sum to 1")

    @property
    def pi0(self) -> float:
        """Fitted weight on the point mass."""
        return self.prior.pi0

    def to_dict(self) -> Dict[str, Any]:
        """Convert to dictionary representation."""
        return {
            "pi0": self.pi0,
            "log_likelihood": float(self.log_likelihood),
            "alpha": float(self.alpha),
            "penalty": float(self.penalty),
            "n_iters": int(self.n_iters),
            "converged": bool(self.converged),
            "prior": self.prior.to_dict(),
        }


POSTERIOR_COLUMNS = [
    "post_mean", "post_sd", "lfdr", "lfsr", "qvalue", "lower_cred_95", "upper_cred_95",
]


@dataclass
class PosteriorSummary:
    """
    Table of per-unit posterior summaries.

    Rows for units excluded by a pipeline carry NaN in every posterior column
    and ``excluded = True``.
    """

    table: pd.DataFrame
    clamped_variances: int = 0

    def __post_init__(self):
        missing = [c for c in POSTERIOR_COLUMNS if c not in self.table.columns]
        if missing:
            raise ValueError(f"posterior table missing required columns: {missing}")
        if "excluded" not in self.table.columns:
            self.table["excluded"] = False
        ok = ~self.table["excluded"].to_numpy(dtype=bool)
        sub = self.table.loc[ok]
        for col in ("lfdr", "lfsr", "qvalue"):
            vals = sub[col].to_numpy(dtype=float)
            vals = vals[~np.isnan(vals)]
            if np.any(vals < -1e-12) or np.any(vals > 1 + 1e-12):
                raise ValueError(f"{col} must lie in [0, 1]")
        lfdr, lfsr = sub["lfdr"].to_numpy(dtype=float), sub["lfsr"].to_numpy(dtype=float)
        both = ~(np.isnan(lfdr) | np.isnan(lfsr))
        if np.any(lfdr[both] > lfsr[both] + 1e-12):
            raise ValueError("lfdr must not exceed lfsr")

    def __len__(self) -> int:
        return len(self.table)

    def column(self, name: str) -> np.ndarray:
        """One column as a float array."""
        return self.table[name].to_numpy(dtype=float)

    @property
    def excluded(self) -> np.ndarray:
        """Mask of units the pipeline left out of the fit."""
        return self.table["excluded"].to_numpy(dtype=bool)


# ----------------------------------------------------------------------
# Simulation bench types
# ----------------------------------------------------------------------

@dataclass
class NormalMixture:
    """Finite mixture of normals Σ w_i N(μ_i, σ_i²)."""

    weights: np.ndarray
    means: np.ndarray
    sds: np.ndarray

    def __post_init__(self):
        self.weights = _vector(self.weights, "weights")
        self.means = _vector(self.means, "means")
        self.sds = _vector(self.sds, "sds")
        if not (len(self.weights) == len(self.means) == len(self.sds)):
            raise ValueError("mixture parameters must have equal lengths")
        if abs(self.weights.sum() - 1.0) > 1e-9 or np.any(self.weights < 0):
            raise ValueError("mixture weights must sum to 1")
        if np.any(self.sds <= 0):
            raise ValueError("mixture sds must be positive")

    def density(self, x):
        """Mixture density at ``x``."""
        arr = np.asarray(x, dtype=float)[..., None]
        z = (arr - self.means) / self.sds
        dens = np.exp(-0.5 * z * z) / (self.sds * math.sqrt(2.0 * math.pi))
        return dens @ self.weights

    def mean(self) -> float:
        """Mixture mean."""
        return float(self.weights @ self.means)

    def sd(self) -> float:
        """Mixture standard deviation."""
        second = self.weights @ (self.sds ** 2 + self.means ** 2)
        return float(math.sqrt(second - self.mean() ** 2))

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        """Draw ``size`` values from the mixture."""
        comp = rng.choice(len(self.weights), size=size, p=self.weights)
        return rng.normal(self.means[comp], self.sds[comp])


SCENARIO_NAMES = ("spiky", "near-normal", "flat-top", "big-normal", "bimodal")


@dataclass
class ScenarioSpec:
    """
    One simulation scenario.

    ``pi0 = None`` means π₀ is drawn uniformly from [0, 1] per dataset.
    """

    name: str
    g1: NormalMixture
    n_per_group: int
    scaling: float
    n_genes: int = 2000
    pi0: Optional[float] = None
    seed: int = 0

    def __post_init__(self):
        if self.name not in SCENARIO_NAMES:
            raise ValueError(f"unknown scenario {self.name!r}")
        if self.n_per_group < 2:
            raise ValueError("at least two samples per group are required")
        if not self.scaling > 0:
            raise ValueError("scaling must be positive")
        if self.n_genes < 1:
            raise ValueError("n_genes must be positive")
        if self.pi0 is not None and not 0 <= self.pi0 <= 1:
            raise ValueError("pi0 must lie in [0, 1]")


@dataclass
class CountMatrix:
    """
    Genes × samples read counts with a per-gene group assignment.

    ``groups[j, i]`` is 0 for group A, 1 for group B and -1 when sample i
    is not used for gene j.
    """

    counts: np.ndarray
    groups: Optional[np.ndarray] = None
    gene_ids: Optional[List[str]] = None
    sample_ids: Optional[List[str]] = None

    def __post_init__(self):
        counts = np.asarray(self.counts)
        if counts.ndim != 2:
            raise DataError("count matrix must be two-dimensional")
        if np.any(counts < 0) or not np.all(np.equal(np.mod(counts, 1), 0)):
            raise DataError("counts must be nonnegative integers")
        self.counts = counts.astype(np.int64)
        if self.groups is not None:
            self.groups = np.asarray(self.groups, dtype=np.int8)
            if self.groups.shape != self.counts.shape:
                raise DataError("group labels must match the count matrix shape")
        n_genes, n_samples = self.counts.shape
        if self.gene_ids is None:
            self.gene_ids = [f"gene{j + 1}" for j in range(n_genes)]
        if self.sample_ids is None:
            self.sample_ids = [f"sample{i + 1}" for i in range(n_samples)]

    @property
    def n_genes(self) -> int:
        """Number of genes (rows)."""
        return self.counts.shape[0]

    @property
    def n_samples(self) -> int:
        """Number of samples (columns)."""
        return self.counts.shape[1]

    @property
    def library_sizes(self) -> np.ndarray:
        """Column sums of the counts."""
        return self.counts.sum(axis=0)

    def with_counts(self, counts: np.ndarray) -> "CountMatrix":
        """Same genes and groups with replaced counts."""
        return CountMatrix(counts=counts, groups=self.groups, gene_ids=self.gene_ids,
                           sample_ids=self.sample_ids)

    def with_groups(self, groups: np.ndarray) -> "CountMatrix":
        """Same counts with a replaced group assignment."""
        return CountMatrix(counts=self.counts, groups=groups, gene_ids=self.gene_ids,
                           sample_ids=self.sample_ids)


@dataclass
class TruthRecord:
    """True effects of one simulated dataset."""

    beta_true: np.ndarray
    pi0_true: float

    def __post_init__(self):
        self.beta_true = _vector(self.beta_true, "beta_true")
        if not 0 <= self.pi0_true <= 1:
            raise ValueError("pi0_true must lie in [0, 1]")

    @property
    def null_mask(self) -> np.ndarray:
        """Units whose true effect is zero."""
        return self.beta_true == 0

    def __len__(self) -> int:
        return len(self.beta_true)

    def to_frame(self, ids: Optional[Sequence[str]] = None) -> pd.DataFrame:
        """Table with ``id``, ``beta_true`` and ``is_null`` columns."""
        ids = list(ids) if ids is not None else [str(i + 1) for i in range(len(self))]
        return pd.DataFrame({"id": ids, "beta_true": self.beta_true,
                             "is_null": self.null_mask})


EVAL_COLUMNS = [
    "pipeline", "pi0_true", "pi0_hat", "n_discoveries", "fdp", "power", "rrmse",
    "coverage_all", "coverage_neg", "coverage_pos",
]


@dataclass
class EvalReport:
    """Per-pipeline evaluation metrics for one simulated dataset."""

    table: pd.DataFrame

    def __post_init__(self):
        missing = [c for c in EVAL_COLUMNS if c not in self.table.columns]
        if missing:
            raise ValueError(f"evaluation table missing required columns: {missing}")
        for col in ("fdp", "power", "coverage_all", "coverage_neg", "coverage_pos"):
            vals = self.table[col].to_numpy(dtype=float)
            vals = vals[~np.isnan(vals)]
            if np.any(vals < 0) or np.any(vals > 1):
                raise ValueError(f"{col} must lie in [0, 1]")

    def row(self, pipeline: str) -> pd.Series:
        """Metrics row of one pipeline."""
        match = self.table[self.table["pipeline"] == pipeline]
        if match.empty:
            raise KeyError(pipeline)
        return match.iloc[0]

    def to_dict(self) -> Dict[str, Any]:
        """Convert to dictionary representation."""
        return {"rows": self.table.to_dict("records")}
