"""Core domain types and probability kernels shared by every other module.

The data model is deliberately small: a ternary symptom matrix, the 15-grade
ordinal alphabet used by physician-elicited probbase tables, a grade matrix
mapping (symptom, cause) cells onto that alphabet, and the state objects the
sampler moves around.  All types are frozen after construction and validated
eagerly; all probability kernels are pure functions working in log space.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

__all__ = [
    "YES",
    "NO",
    "MISSING",
    "PROB_EPS",
    "GRADE_LABELS",
    "GRADE_VALUES",
    "SymptomDataset",
    "LevelAlphabet",
    "RankMatrix",
    "HyperParams",
    "CondProbState",
    "CsmfState",
    "PosteriorDraws",
    "softmax_csmf",
    "naive_bayes_posterior",
    "clamp_probs",
]

# Ternary symptom encoding.  MISSING cells contribute no likelihood factor
# and no counts anywhere in the package.
YES = 1
NO = 0
MISSING = -1

# Boundary clamp for grade values used as Bernoulli probabilities; exact 0/1
# would create zero-likelihood deaths and degenerate Beta conditionals.
PROB_EPS = 1e-6

# The 15-grade ordinal alphabet and its conventional numeric translation,
# ordered from "always" down to "never".
GRADE_LABELS = (
    "I", "A+", "A", "A-", "B+", "B", "B-",
    "C+", "C", "C-", "D+", "D", "D-", "E", "N",
)
GRADE_VALUES = (
    1.0, 0.8, 0.5, 0.2, 0.1, 0.05, 0.02,
    0.01, 0.005, 0.002, 0.001, 0.0005, 0.0001, 0.00001, 0.0,
)
N_GRADES = len(GRADE_LABELS)


def clamp_probs(p: np.ndarray | float) -> np.ndarray:
    """Clip probabilities into [PROB_EPS, 1 - PROB_EPS] for use in likelihoods."""
    return np.clip(p, PROB_EPS, 1.0 - PROB_EPS)


def _as_2d_int8(values) -> np.ndarray:
    arr = np.asarray(values)
    if arr.ndim != 2:
        raise ValueError(f"symptom matrix must be 2-D, got shape {arr.shape}")
    out = arr.astype(np.int8)
    if not np.array_equal(out, arr):
        raise ValueError("symptom matrix entries must be integers in {-1, 0, 1}")
    return out


@dataclass(frozen=True)
class SymptomDataset:
    """N deaths x S symptoms with ternary entries YES / NO / MISSING."""

    death_ids: tuple[str, ...]
    symptoms: tuple[str, ...]
    values: np.ndarray  # (N, S) int8 in {YES, NO, MISSING}

    def __post_init__(self):
        object.__setattr__(self, "death_ids", tuple(self.death_ids))
        object.__setattr__(self, "symptoms", tuple(self.symptoms))
        object.__setattr__(self, "values", _as_2d_int8(self.values))
        n, s = self.values.shape
        if len(self.death_ids) != n:
            raise ValueError(f"{len(self.death_ids)} death ids for {n} matrix rows")
        if len(self.symptoms) != s:
            raise ValueError(f"{len(self.symptoms)} symptom ids for {s} matrix columns")
        if len(set(self.death_ids)) != n:
            raise ValueError("death ids must be unique")
        if len(set(self.symptoms)) != s:
            raise ValueError("symptom ids must be unique")
        bad = ~np.isin(self.values, (YES, NO, MISSING))
        if bad.any():
            i, j = np.argwhere(bad)[0]
            raise ValueError(
                f"invalid symptom value {self.values[i, j]} at "
                f"death {self.death_ids[i]!r}, symptom {self.symptoms[j]!r}"
            )
        self.values.setflags(write=False)

    @property
    def n_deaths(self) -> int:
        return self.values.shape[0]

    @property
    def n_symptoms(self) -> int:
        return self.values.shape[1]


@dataclass(frozen=True)
class LevelAlphabet:
    """Ordered grade labels with their default probability translation."""

    grades: tuple[str, ...] = GRADE_LABELS
    default_values: tuple[float, ...] = GRADE_VALUES

    def __post_init__(self):
        object.__setattr__(self, "grades", tuple(self.grades))
        object.__setattr__(self, "default_values", tuple(float(v) for v in self.default_values))
        if len(self.grades) != N_GRADES:
            raise ValueError(f"alphabet must have exactly {N_GRADES} grades")
        if len(self.default_values) != N_GRADES:
            raise ValueError("one default value per grade required")
        vals = np.asarray(self.default_values)
        if not ((vals >= 0.0).all() and (vals <= 1.0).all()):
            raise ValueError("default values must lie in [0, 1]")
        if not (np.diff(vals) < 0).all():
            raise ValueError("default values must be strictly decreasing")

    def index_of(self, grade: str) -> int:
        try:
            return self.grades.index(grade)
        except ValueError:
            raise ValueError(f"unknown grade {grade!r}") from None

    def clamped_values(self) -> np.ndarray:
        """Default values clipped away from 0/1, still strictly decreasing."""
        return clamp_probs(np.asarray(self.default_values))


@dataclass(frozen=True)
class RankMatrix:
    """S x C matrix of grade indices into a LevelAlphabet."""

    grade_of: np.ndarray  # (S, C) integer indices 0..14
    causes: tuple[str, ...]
    symptoms: tuple[str, ...] | None = None  # optional row labels from file

    def __post_init__(self):
        object.__setattr__(self, "causes", tuple(self.causes))
        arr = np.asarray(self.grade_of)
        if arr.ndim != 2:
            raise ValueError("grade matrix must be 2-D")
        grade_of = arr.astype(np.int64)
        if not np.array_equal(grade_of, arr):
            raise ValueError("grade matrix entries must be integer grade indices")
        object.__setattr__(self, "grade_of", grade_of)
        if grade_of.shape[1] != len(self.causes):
            raise ValueError("one cause id per grade matrix column required")
        if len(set(self.causes)) != len(self.causes):
            raise ValueError("cause ids must be unique")
        if grade_of.size and (grade_of.min() < 0 or grade_of.max() >= N_GRADES):
            raise ValueError(f"grade indices must lie in 0..{N_GRADES - 1}")
        if self.symptoms is not None:
            object.__setattr__(self, "symptoms", tuple(self.symptoms))
            if len(self.symptoms) != grade_of.shape[0]:
                raise ValueError("one symptom id per grade matrix row required")
        self.grade_of.setflags(write=False)

    @property
    def n_symptoms(self) -> int:
        return self.grade_of.shape[0]

    @property
    def n_causes(self) -> int:
        return self.grade_of.shape[1]

    def cond_probs(self, level_values: np.ndarray) -> np.ndarray:
        """Expand per-grade values into the S x C conditional-probability matrix."""
        level_values = np.asarray(level_values, dtype=float)
        return level_values[self.grade_of]


def _default_alpha(prior_strength: float) -> tuple[float, ...]:
    means = clamp_probs(np.asarray(GRADE_VALUES))
    return tuple(float(prior_strength * m) for m in means)


@dataclass(frozen=True)
class HyperParams:
    """Sampler hyperparameters and run-length configuration."""

    prior_strength_M: float = 100.0
    alpha_per_level: tuple[float, ...] = field(default=None)  # type: ignore[assignment]
    mh_jump_sigma_star: float = 0.1
    n_iterations: int = 10_000
    burn_in: int = 5_000
    thin: int = 20
    n_chains: int = 3
    seed: int = 0

    def __post_init__(self):
        if self.alpha_per_level is None:
            object.__setattr__(self, "alpha_per_level", _default_alpha(self.prior_strength_M))
        object.__setattr__(self, "alpha_per_level", tuple(float(a) for a in self.alpha_per_level))
        if not self.prior_strength_M > 0:
            raise ValueError("prior_strength_M must be positive")
        if len(self.alpha_per_level) != N_GRADES:
            raise ValueError(f"alpha_per_level must have {N_GRADES} entries")
        for t, a in enumerate(self.alpha_per_level):
            if not 0 < a < self.prior_strength_M:
                raise ValueError(
                    f"alpha_per_level[{t}]={a} must lie strictly between 0 and M"
                )
        if not self.mh_jump_sigma_star > 0:
            raise ValueError("mh_jump_sigma_star must be positive")
        if self.n_iterations < 1 or self.burn_in < 0 or self.burn_in >= self.n_iterations:
            raise ValueError("require 0 <= burn_in < n_iterations")
        if self.thin < 1:
            raise ValueError("thin must be >= 1")
        if self.n_chains < 1:
            raise ValueError("n_chains must be >= 1")

    def with_overrides(self, **kwargs) -> "HyperParams":
        return replace(self, **kwargs)

    def level_prior_means(self) -> np.ndarray:
        return np.asarray(self.alpha_per_level) / self.prior_strength_M


@dataclass(frozen=True)
class CondProbState:
    """Current shared value of each grade, strictly decreasing on [eps, 1-eps]."""

    level_values: np.ndarray  # (15,)

    def __post_init__(self):
        vals = np.asarray(self.level_values, dtype=float)
        object.__setattr__(self, "level_values", vals)
        if vals.shape != (N_GRADES,):
            raise ValueError(f"expected {N_GRADES} level values")
        if not (np.diff(vals) < 0).all():
            raise ValueError("level values must be strictly decreasing")
        if vals.max() > 1.0 - PROB_EPS + 1e-15 or vals.min() < PROB_EPS - 1e-15:
            raise ValueError("level values must lie within [eps, 1-eps]")
        self.level_values.setflags(write=False)


@dataclass(frozen=True)
class CsmfState:
    """CSMF block of the chain: theta with its softmax and assignment counts."""

    theta: np.ndarray  # (C,)
    mu: float
    sigma2: float
    pi: np.ndarray  # (C,), softmax(theta)
    counts_n_k: np.ndarray  # (C,) nonnegative ints summing to N

    def __post_init__(self):
        theta = np.asarray(self.theta, dtype=float)
        pi = np.asarray(self.pi, dtype=float)
        counts = np.asarray(self.counts_n_k, dtype=np.int64)
        object.__setattr__(self, "theta", theta)
        object.__setattr__(self, "pi", pi)
        object.__setattr__(self, "counts_n_k", counts)
        if not self.sigma2 > 0:
            raise ValueError("sigma2 must be positive")
        if pi.shape != theta.shape or counts.shape != theta.shape:
            raise ValueError("theta, pi and counts must share shape (C,)")
        if abs(pi.sum() - 1.0) > 1e-12 or (pi <= 0).any():
            raise ValueError("pi must be a strictly positive simplex vector")
        if np.abs(pi - softmax_csmf(theta)).max() > 1e-12:
            raise ValueError("pi must equal softmax(theta)")
        if (counts < 0).any():
            raise ValueError("assignment counts must be nonnegative")
        for a in (self.theta, self.pi, self.counts_n_k):
            a.setflags(write=False)


@dataclass(frozen=True)
class PosteriorDraws:
    """Retained multi-chain draws plus accumulated per-death cause frequencies."""

    causes: tuple[str, ...]
    pi: np.ndarray  # (n_chains, n_retained, C)
    level_values: np.ndarray  # (n_chains, n_retained, 15)
    individual: np.ndarray  # (N, C), rows sum to 1
    acceptance_rates: tuple[float, ...]  # per chain, post burn-in theta sweeps
    sigma_star: tuple[float, ...]  # per chain, frozen proposal scale

    def __post_init__(self):
        object.__setattr__(self, "causes", tuple(self.causes))
        pi = np.asarray(self.pi, dtype=float)
        lv = np.asarray(self.level_values, dtype=float)
        ind = np.asarray(self.individual, dtype=float)
        object.__setattr__(self, "pi", pi)
        object.__setattr__(self, "level_values", lv)
        object.__setattr__(self, "individual", ind)
        object.__setattr__(self, "acceptance_rates", tuple(self.acceptance_rates))
        object.__setattr__(self, "sigma_star", tuple(self.sigma_star))
        if pi.ndim != 3 or pi.shape[2] != len(self.causes):
            raise ValueError("pi draws must have shape (chains, retained, C)")
        if lv.shape[:2] != pi.shape[:2] or lv.shape[2] != N_GRADES:
            raise ValueError("level draws must have shape (chains, retained, 15)")
        if np.abs(pi.sum(axis=2) - 1.0).max() > 1e-12:
            raise ValueError("every retained pi must sum to 1 within 1e-12")
        if not (np.diff(lv, axis=2) < 0).all():
            raise ValueError("every retained level vector must be strictly decreasing")
        if ind.size and np.abs(ind.sum(axis=1) - 1.0).max() > 1e-9:
            raise ValueError("individual posterior rows must sum to 1 within 1e-9")
        for a in (self.pi, self.level_values, self.individual):
            a.setflags(write=False)

    @property
    def n_chains(self) -> int:
        return self.pi.shape[0]

    @property
    def n_retained(self) -> int:
        return self.pi.shape[1]

    def pooled_pi(self) -> np.ndarray:
        """All retained CSMF draws stacked across chains, shape (chains*retained, C)."""
        return self.pi.reshape(-1, self.pi.shape[2])

    def csmf_mean(self) -> np.ndarray:
        return self.pooled_pi().mean(axis=0)


def softmax_csmf(theta: np.ndarray) -> np.ndarray:
    """Map unconstrained scores to the CSMF simplex, exp(theta_c)/sum exp(theta_k).

    Computed with max-subtraction so arbitrarily large scores cannot overflow.
    """
    theta = np.asarray(theta, dtype=float)
    if theta.ndim != 1 or theta.size < 2:
        raise ValueError("theta must be a vector with at least 2 entries")
    if not np.isfinite(theta).all():
        raise ValueError("theta entries must be finite")
    z = np.exp(theta - theta.max())
    return z / z.sum()


def naive_bayes_posterior(
    death_row: np.ndarray,
    pi: np.ndarray,
    cond_probs: np.ndarray,
) -> np.ndarray:
    """Per-death cause posterior under the conditional-independence model.

    ``death_row`` is a ternary S-vector; MISSING entries are skipped entirely,
    contributing neither a presence nor an absence factor.  The product is
    accumulated in log space and the result normalized.  An all-MISSING row
    returns ``pi`` unchanged.

    Parameters
    ----------
    death_row : (S,) array in {YES, NO, MISSING}
    pi : (C,) simplex vector of cause weights
    cond_probs : (S, C) matrix with entries in the open interval (0, 1)
    """
    death_row = np.asarray(death_row)
    pi = np.asarray(pi, dtype=float)
    cond_probs = np.asarray(cond_probs, dtype=float)
    if cond_probs.shape != (death_row.size, pi.size):
        raise ValueError("cond_probs must have shape (S, C)")
    if (cond_probs <= 0).any() or (cond_probs >= 1).any():
        raise ValueError("cond_probs entries must lie strictly inside (0, 1)")

    yes = death_row == YES
    no = death_row == NO
    if not (yes.any() or no.any()):
        return pi.copy()

    log_post = np.log(pi)
    if yes.any():
        log_post = log_post + np.log(cond_probs[yes]).sum(axis=0)
    if no.any():
        log_post = log_post + np.log1p(-cond_probs[no]).sum(axis=0)
    log_post -= log_post.max()
    post = np.exp(log_post)
    return post / post.sum()
