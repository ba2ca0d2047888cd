"""The coverage acquisition in both forms, plus the tie-breaking rule.

The hard form gates on optimistic feasibility and Monte-Carlo-integrates the
newly covered feasible volume of the r-ball at the UCB prediction. The soft
form replaces the gate with a product of probit factors and the set
difference with a Gaussian-kernel novelty term, giving a smooth value with
analytic input gradients (chain rule through the GP posterior).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.spatial.distance import cdist
from scipy.special import log_ndtr

from . import gp
from .errors import DimensionMismatch
from .geometry import FeasibleRegion, OutcomeSet, ball_volume, gauss_const, new_coverage_hard

_LOG_SQRT_2PI = 0.5 * math.log(2.0 * math.pi)
DEFAULT_TIE_TOL = 1e-9


@dataclass
class OptimismSchedule:
    """beta_t = beta0 * a_t with a non-increasing anneal a_t in (0, 1].

    The default anneal is max(floor, 1/sqrt(t)); pass `anneal` to override.
    """

    beta0: float
    floor: float = 0.25
    anneal: Callable[[int], float] | None = None

    def __post_init__(self):
        if not self.beta0 > 0:
            raise ValueError("beta0 must be > 0")
        if not 0.0 < self.floor <= 1.0:
            raise ValueError("floor must lie in (0, 1]")

    def beta(self, t: int) -> float:
        if t < 1:
            raise ValueError("iteration index starts at 1")
        a_t = self.anneal(t) if self.anneal is not None else max(self.floor, 1.0 / math.sqrt(t))
        if not 0.0 < a_t <= 1.0:
            raise ValueError("anneal value must lie in (0, 1]")
        return self.beta0 * a_t


@dataclass
class SoftAcqParams:
    """Coverage resolution r, probit softness lambda, and thresholds."""

    r: float
    lam: float
    thresholds: np.ndarray

    def __init__(self, r: float, lam: float | None, thresholds):
        if not r > 0:
            raise ValueError("r must be > 0")
        self.r = float(r)
        self.lam = float(lam) if lam is not None else 0.5 * self.r
        if not self.lam > 0:
            raise ValueError("lambda must be > 0")
        self.thresholds = np.asarray(thresholds, dtype=float)
        if self.thresholds.ndim != 1:
            raise ValueError("thresholds must be a vector")


def feasibility_gate_hard(u: np.ndarray, thresholds: np.ndarray) -> int:
    """1 iff every optimistic prediction meets its threshold."""
    uv = np.asarray(u, dtype=float)
    tv = np.asarray(thresholds, dtype=float)
    if uv.shape != tv.shape:
        raise DimensionMismatch("U and thresholds disagree on m")
    return int(np.all(uv >= tv))


def p_sat(u: np.ndarray, params: SoftAcqParams) -> tuple[float, np.ndarray]:
    """Probit gate: product of Phi((U_i - tau_i)/lambda), with gradient.

    Evaluated in log space so strongly infeasible U underflow to 0 instead of
    poisoning the product; the gradient entries use the stable ratio
    exp(log phi - log Phi), so they stay finite far into the tail.
    """
    uv = np.asarray(u, dtype=float)
    if uv.shape != params.thresholds.shape:
        raise DimensionMismatch("U and thresholds disagree on m")
    z = (uv - params.thresholds) / params.lam
    log_cdf = log_ndtr(z)
    log_total = float(log_cdf.sum())
    value = math.exp(log_total) if log_total > -745.0 else 0.0
    log_pdf = -0.5 * z * z - _LOG_SQRT_2PI
    # grad_i = p_sat(U) * phi(z_i) / (lambda * Phi(z_i)) = exp(sum_{j != i} logPhi_j + logphi_i) / lambda
    if np.isneginf(log_cdf).any():
        m = z.shape[0]
        log_others = np.array(
            [log_cdf[np.arange(m) != i].sum() for i in range(m)]
        )
    else:
        log_others = log_total - log_cdf
    log_grad = log_others + log_pdf
    grad = np.where(log_grad > -745.0, np.exp(log_grad), 0.0) / params.lam
    return value, grad


def p_sat_batch(u: np.ndarray, params: SoftAcqParams) -> np.ndarray:
    """Probit gate values for rows of u (no gradients)."""
    z = (np.atleast_2d(u) - params.thresholds) / params.lam
    return np.exp(log_ndtr(z).sum(axis=1))


def novelty(
    u: np.ndarray, prior_outcomes: OutcomeSet, r: float
) -> tuple[float, np.ndarray]:
    """Soft new-coverage factor 1 - sum_s c_m(r) exp(-||U-y_s||^2 / 4r^2).

    Not clamped: dense prior neighborhoods can drive it negative, which
    simply ranks such candidates below any with positive novelty while
    keeping the gradient alive.
    """
    uv = np.asarray(u, dtype=float)
    m = uv.shape[0]
    if prior_outcomes.count == 0:
        return 1.0, np.zeros(m)
    if prior_outcomes.dim != m:
        raise DimensionMismatch("prior outcomes dimension differs from U")
    diffs = uv[None, :] - prior_outcomes.array
    sq = np.einsum("ij,ij->i", diffs, diffs)
    weights = gauss_const(m, r) * np.exp(-sq / (4.0 * r * r))
    value = 1.0 - float(weights.sum())
    grad = (weights[:, None] * diffs).sum(axis=0) / (2.0 * r * r)
    return value, grad


def novelty_batch(u: np.ndarray, prior_outcomes: OutcomeSet, r: float) -> np.ndarray:
    """Novelty values for rows of u (no gradients)."""
    arr = np.atleast_2d(u)
    if prior_outcomes.count == 0:
        return np.ones(arr.shape[0])
    m = arr.shape[1]
    sq = cdist(arr, prior_outcomes.array, "sqeuclidean")
    return 1.0 - gauss_const(m, r) * np.exp(-sq / (4.0 * r * r)).sum(axis=1)


def soft_acquisition(
    models,
    x: np.ndarray,
    schedule_beta: float,
    params: SoftAcqParams,
    prior_outcomes: OutcomeSet,
) -> tuple[float, np.ndarray]:
    """Smooth acquisition V_m(r) * p_sat(U(x)) * n(U(x)) with its x-gradient.

    U(x) is the UCB prediction; the gradient chains d value / d U through
    dU/dx = mean_grad + sqrt(beta) * std_grad per objective.
    """
    u, du_dx = gp.ucb(models, x, schedule_beta)
    m = u.shape[0]
    vol = ball_volume(m, params.r)
    sat, sat_grad = p_sat(u, params)
    nov, nov_grad = novelty(u, prior_outcomes, params.r)
    value = vol * sat * nov
    grad_u = vol * (sat_grad * nov + sat * nov_grad)
    return value, du_dx.T @ grad_u


def soft_values_batch(
    models,
    x: np.ndarray,
    schedule_beta: float,
    params: SoftAcqParams,
    prior_outcomes: OutcomeSet,
) -> tuple[np.ndarray, np.ndarray]:
    """Soft acquisition values for candidate rows of x; also returns U rows."""
    u = gp.ucb_batch(models, x, schedule_beta)
    vol = ball_volume(u.shape[1], params.r)
    values = vol * p_sat_batch(u, params) * novelty_batch(u, prior_outcomes, params.r)
    return values, u


def soft_values_from_ucb(
    u: np.ndarray, params: SoftAcqParams, prior_outcomes: OutcomeSet
) -> np.ndarray:
    """Soft acquisition values given precomputed UCB rows."""
    arr = np.atleast_2d(u)
    vol = ball_volume(arr.shape[1], params.r)
    return vol * p_sat_batch(arr, params) * novelty_batch(arr, prior_outcomes, params.r)


def hard_acquisition(
    models,
    x: np.ndarray,
    schedule_beta: float,
    params: SoftAcqParams,
    prior_outcomes: OutcomeSet,
    region: FeasibleRegion,
    n_mc: int,
    seed: int,
) -> float:
    """Gated MC estimate of the newly covered feasible volume at U(x)."""
    u, _ = gp.ucb(models, x, schedule_beta)
    if not feasibility_gate_hard(u, params.thresholds):
        return 0.0
    return new_coverage_hard(region, prior_outcomes, u, params.r, n_mc, seed)


def tie_break(
    candidates: list[tuple[int, float, np.ndarray]],
    prior_outcomes: OutcomeSet,
    tol: float = DEFAULT_TIE_TOL,
) -> int:
    """Pick among near-best candidates the one whose U is farthest from Z.

    candidates are (index, acq_value, U) triples. Values within
    tol * max(1, |best|) of the best are tied; ties resolve to the largest
    min-distance of U to the prior outcomes, then to the lowest index. With
    no prior outcomes the lowest tied index wins.
    """
    if len(candidates) == 0:
        raise ValueError("tie_break needs at least one candidate")
    best_value = max(c[1] for c in candidates)
    cutoff = best_value - tol * max(1.0, abs(best_value))
    tied = [c for c in candidates if c[1] >= cutoff]
    tied.sort(key=lambda c: c[0])
    if len(tied) == 1 or prior_outcomes.count == 0:
        return tied[0][0]
    best_idx = tied[0][0]
    best_dist = -math.inf
    for idx, _, u in tied:
        dist = float(
            np.min(np.linalg.norm(prior_outcomes.array - np.asarray(u, dtype=float), axis=1))
        )
        if dist > best_dist:
            best_dist = dist
            best_idx = idx
    return best_idx
