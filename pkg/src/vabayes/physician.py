"""Debiasing of physician-assigned broad cause categories.

Physicians reviewing verbal autopsies code each death into one of a small set
of broad categories, but individual coding tendencies differ.  This module
estimates one confusion matrix per physician with an EM algorithm over the
coded deaths, converts raw codes into calibrated per-death category weights,
and exposes the gate that feeds those weights into the sampler's per-death
cause draws.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .core import MISSING, SymptomDataset, YES

__all__ = [
    "DEFAULT_CATEGORIES",
    "PhysicianCodes",
    "DebiasResult",
    "em_debias",
    "adjusted_posterior",
    "cause_gate_weights",
    "fit_with_physicians",
]

DEFAULT_CATEGORIES = (
    "NCD",
    "TB/AIDS",
    "other communicable",
    "maternal",
    "external",
    "unknown",
)

_THETA_FLOOR = 1e-300  # guards log of structurally-zero confusion entries
_P_FLOOR = 1e-12  # guards log of degenerate symptom probabilities


@dataclass(frozen=True)
class PhysicianCodes:
    """Per-death physician category assignments plus the cause-category map."""

    categories: tuple[str, ...]
    physician_ids: tuple[str, ...]
    assignments: tuple[tuple[int, int, int], ...]  # (death idx, physician idx, category idx)
    n_deaths: int
    chi: np.ndarray  # (C, G) binary cause-category membership

    def __post_init__(self):
        object.__setattr__(self, "categories", tuple(self.categories))
        object.__setattr__(self, "physician_ids", tuple(self.physician_ids))
        object.__setattr__(self, "assignments", tuple(tuple(a) for a in self.assignments))
        chi = np.asarray(self.chi, dtype=np.int8)
        object.__setattr__(self, "chi", chi)
        G = len(self.categories)
        if G < 2:
            raise ValueError("at least two categories required")
        if chi.ndim != 2 or chi.shape[1] != G:
            raise ValueError("chi must have shape (C, G)")
        if (chi.sum(axis=1) == 0).any():
            raise ValueError("every cause must belong to at least one category")
        M = len(self.physician_ids)
        for d, m, g in self.assignments:
            if not 0 <= d < self.n_deaths:
                raise ValueError(f"assignment death index {d} out of range")
            if not 0 <= m < M:
                raise ValueError(f"assignment physician index {m} out of range")
            if not 0 <= g < G:
                raise ValueError(f"assignment category index {g} out of range")
        self.chi.setflags(write=False)

    @property
    def n_categories(self) -> int:
        return len(self.categories)

    @property
    def n_physicians(self) -> int:
        return len(self.physician_ids)

    def coded_deaths(self) -> np.ndarray:
        """Sorted indices of deaths carrying at least one code."""
        return np.unique([d for d, _, _ in self.assignments]).astype(np.int64)


@dataclass(frozen=True)
class DebiasResult:
    """Output of the EM debiasing stage."""

    categories: tuple[str, ...]
    physician_ids: tuple[str, ...]
    t: np.ndarray  # (N, G) debiased category weights, rows sum to 1
    theta_bias: np.ndarray  # (M, G, G) per-physician confusion, rows sum to 1
    pi_cat: np.ndarray  # (G,) marginal category fractions
    p_cond: np.ndarray  # (S, G) symptom given category
    log_likelihood: tuple[float, ...]  # per EM iteration
    coded: np.ndarray  # (N,) bool, death carried at least one code
    converged: bool

    def __post_init__(self):
        for name in ("t", "theta_bias", "pi_cat", "p_cond"):
            object.__setattr__(self, name, np.asarray(getattr(self, name), dtype=float))
        object.__setattr__(self, "coded", np.asarray(self.coded, dtype=bool))
        object.__setattr__(self, "log_likelihood", tuple(self.log_likelihood))
        if np.abs(self.t.sum(axis=1) - 1.0).max() > 1e-9:
            raise ValueError("t rows must sum to 1")
        if np.abs(self.theta_bias.sum(axis=2) - 1.0).max() > 1e-9:
            raise ValueError("bias matrix rows must sum to 1")
        if abs(self.pi_cat.sum() - 1.0) > 1e-9:
            raise ValueError("pi_cat must sum to 1")
        ll = np.asarray(self.log_likelihood)
        if ll.size > 1 and (np.diff(ll) < -1e-8).any():
            raise ValueError("EM log-likelihood decreased beyond tolerance")


def _code_counts(codes: PhysicianCodes, coded: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Assignment arrays restricted to coded deaths, reindexed locally."""
    local = -np.ones(codes.n_deaths, dtype=np.int64)
    local[coded] = np.arange(coded.size)
    d = np.asarray([a[0] for a in codes.assignments], dtype=np.int64)
    m = np.asarray([a[1] for a in codes.assignments], dtype=np.int64)
    g = np.asarray([a[2] for a in codes.assignments], dtype=np.int64)
    return local[d], m, g


def em_debias(
    dataset: SymptomDataset,
    codes: PhysicianCodes,
    max_iter: int = 500,
    tol: float = 1e-6,
) -> DebiasResult:
    """Estimate physician confusion matrices and debiased category weights.

    Runs EM on the coded subset of ``dataset``: the M step refits the
    confusion matrices, the symptom-given-category probabilities and the
    category marginals from the current soft assignments, the E step
    recomputes the soft assignments.  The observed-data log-likelihood is
    tracked and must be non-decreasing.  Deaths without codes receive the
    fitted category marginal as their weight row.  MISSING symptom cells
    contribute neither likelihood factors nor denominator mass.
    """
    if not codes.assignments:
        raise ValueError("physician codes are empty; nothing to debias")

    used = sorted({m for _, m, _ in codes.assignments})
    if len(used) < codes.n_physicians:
        dropped = [codes.physician_ids[i] for i in range(codes.n_physicians) if i not in used]
        warnings.warn(f"dropping physicians with no codes: {dropped}")
        remap = {old: new for new, old in enumerate(used)}
        codes = PhysicianCodes(
            categories=codes.categories,
            physician_ids=tuple(codes.physician_ids[i] for i in used),
            assignments=tuple((d, remap[m], g) for d, m, g in codes.assignments),
            n_deaths=codes.n_deaths,
            chi=codes.chi,
        )

    G = codes.n_categories
    M = codes.n_physicians
    coded = codes.coded_deaths()
    n_coded = coded.size
    d_loc, m_arr, g_arr = _code_counts(codes, coded)

    values = dataset.values[coded]
    yes = (values == YES).astype(float)
    obs = (values != MISSING).astype(float)

    # initialization: per-death code fractions, then the implied marginal
    t = np.zeros((n_coded, G))
    np.add.at(t, (d_loc, g_arr), 1.0)
    t /= t.sum(axis=1, keepdims=True)

    trace: list[float] = []
    converged = False
    theta = np.full((M, G, G), 1.0 / G)
    p_cond = np.zeros((dataset.n_symptoms, G))
    pi_cat = t.mean(axis=0)

    for _ in range(max_iter):
        # M step
        num = np.zeros((M * G, G))  # (physician, observed g') x true g
        np.add.at(num, m_arr * G + g_arr, t[d_loc])
        num = num.reshape(M, G, G).transpose(0, 2, 1)  # (m, true g, observed g')
        row_tot = num.sum(axis=2, keepdims=True)
        theta = np.where(row_tot > 0, num / np.where(row_tot > 0, row_tot, 1.0), 1.0 / G)

        den = obs.T @ t  # (S, G) observed mass per symptom and category
        p_num = yes.T @ t
        p_cond = np.where(den > 0, p_num / np.where(den > 0, den, 1.0), 0.0)

        pi_cat = t.mean(axis=0)

        # E step plus the observed-data log-likelihood at the new parameters
        log_theta = np.log(np.maximum(theta, _THETA_FLOOR))
        log_p = np.log(np.clip(p_cond, _P_FLOOR, 1.0 - _P_FLOOR))
        log_1mp = np.log1p(-np.clip(p_cond, _P_FLOOR, 1.0 - _P_FLOOR))
        log_resp = np.tile(np.log(np.maximum(pi_cat, _THETA_FLOOR)), (n_coded, 1))
        np.add.at(log_resp, d_loc, log_theta[m_arr, :, g_arr])
        log_resp += yes @ log_p + (obs - yes) @ log_1mp

        row_max = log_resp.max(axis=1, keepdims=True)
        norm = np.exp(log_resp - row_max)
        row_sum = norm.sum(axis=1, keepdims=True)
        ll = float((np.log(row_sum) + row_max).sum())
        if trace and ll < trace[-1] - 1e-8:
            raise RuntimeError(
                f"EM log-likelihood decreased: {trace[-1]} -> {ll}"
            )
        trace.append(ll)

        t_new = norm / row_sum
        delta = np.abs(t_new - t).max()
        t = t_new
        if delta < tol:
            converged = True
            break

    t_full = np.tile(pi_cat, (dataset.n_deaths, 1))
    coded_mask = np.zeros(dataset.n_deaths, dtype=bool)
    coded_mask[coded] = True
    t_full[coded] = t

    return DebiasResult(
        categories=codes.categories,
        physician_ids=codes.physician_ids,
        t=t_full,
        theta_bias=theta,
        pi_cat=pi_cat,
        p_cond=p_cond,
        log_likelihood=tuple(trace),
        coded=coded_mask,
        converged=converged,
    )


def adjusted_posterior(nb_posterior: np.ndarray, t_row: np.ndarray, chi: np.ndarray) -> np.ndarray:
    """Gate a per-death cause posterior by debiased category weights.

    Each cause is reweighted by the total category mass it belongs to,
    ``sum_g t_g chi_cg``; causes outside every weighted category are
    suppressed.  If the gate annihilates all mass the ungated posterior is
    returned with a warning.
    """
    nb_posterior = np.asarray(nb_posterior, dtype=float)
    t_row = np.asarray(t_row, dtype=float)
    chi = np.asarray(chi)
    if (chi.sum(axis=1) == 0).any():
        raise ValueError("every cause must belong to at least one category")
    gate = chi.astype(float) @ t_row
    unnorm = gate * nb_posterior
    total = unnorm.sum()
    if total <= 0.0:
        warnings.warn("category gate removed all posterior mass; using ungated posterior")
        return nb_posterior.copy()
    return unnorm / total


def cause_gate_weights(result: DebiasResult, chi: np.ndarray) -> np.ndarray:
    """Per-death cause gates for the sampler: coded deaths get ``chi @ t``.

    Uncoded deaths keep weight one everywhere (plain per-death posterior), as
    do coded deaths whose gate would annihilate every cause.
    """
    chi = np.asarray(chi, dtype=float)
    n, _ = result.t.shape
    weights = np.ones((n, chi.shape[0]))
    coded = result.coded
    gated = result.t[coded] @ chi.T
    dead = ~(gated > 0).any(axis=1)
    if dead.any():
        warnings.warn(
            f"{int(dead.sum())} coded deaths had empty category gates; left ungated"
        )
        gated[dead] = 1.0
    weights[coded] = gated
    return weights


def fit_with_physicians(
    dataset: SymptomDataset,
    rank_matrix,
    codes: PhysicianCodes,
    hyper,
    alphabet=None,
    workers: int = 1,
    max_iter: int = 500,
    tol: float = 1e-6,
):
    """Debias physician codes, then fit the full model with gated cause draws.

    Returns ``(PosteriorDraws, DebiasResult | None)``.  Without any codes the
    fit reduces exactly to the ungated sampler (same seed, same draws).
    """
    from .sampler import fit_model

    if not codes.assignments:
        return fit_model(dataset, rank_matrix, hyper, alphabet=alphabet, workers=workers), None
    debias = em_debias(dataset, codes, max_iter=max_iter, tol=tol)
    weights = cause_gate_weights(debias, codes.chi)
    draws = fit_model(
        dataset,
        rank_matrix,
        hyper,
        alphabet=alphabet,
        cause_weights=weights,
        workers=workers,
    )
    return draws, debias
