"""Comparison policies: random, one-step feasibility, straddle, MOO+cluster.

All policies consume the same shortlist and seeded stream interface as the
coverage policy, so paired trials (same seed) stay comparable.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np
from scipy.spatial.distance import cdist
from scipy.special import ndtr

from . import gp
from .acquisition import SoftAcqParams, feasibility_gate_hard
from .errors import EmptyShortlist
from .geometry import OutcomeSet

STRADDLE_KAPPA = 1.96
_STD_FLOOR = 1e-12


class Policy(str, enum.Enum):
    RANDOM = "random"
    ONE_STEP = "one_step"
    STRADDLE = "straddle"
    MOO_CLUSTER = "moo_cluster"
    MOC_CAS = "moc_cas"


@dataclass
class ClusterConfig:
    k: int = 5
    max_iters: int = 50
    seed: int = 0

    def __post_init__(self):
        if self.k < 1:
            raise ValueError("k must be >= 1")
        if self.max_iters < 1:
            raise ValueError("max_iters must be >= 1")


def score_random(shortlist_size: int, rng) -> int:
    """Uniform index into the shortlist; consumes exactly one draw."""
    if shortlist_size < 1:
        raise EmptyShortlist("shortlist is empty")
    return int(rng.integers(shortlist_size))


def one_step_from_moments(
    means: np.ndarray, stds: np.ndarray, thresholds: np.ndarray
) -> np.ndarray:
    """Product of per-objective tail probabilities, rows of (n, m) moments.

    Near-zero stds collapse the factor to the feasibility indicator of the mean.
    """
    mu = np.atleast_2d(means)
    sd = np.atleast_2d(stds)
    tau = np.asarray(thresholds, dtype=float)
    degenerate = sd < _STD_FLOOR
    safe_sd = np.where(degenerate, 1.0, sd)
    factors = ndtr((mu - tau) / safe_sd)
    factors = np.where(degenerate, (mu >= tau).astype(float), factors)
    return factors.prod(axis=1)


def score_one_step(models, x: np.ndarray, thresholds: np.ndarray) -> float:
    """P(all objectives meet their thresholds) under independent posteriors."""
    posts = [model.posterior(np.asarray(x, dtype=float)) for model in models]
    mu = np.array([p.mean for p in posts])
    sd = np.array([p.std for p in posts])
    return float(one_step_from_moments(mu[None, :], sd[None, :], thresholds)[0])


def straddle_from_moments(
    mean_i: np.ndarray, std_i: np.ndarray, tau_i: float, kappa: float = STRADDLE_KAPPA
) -> np.ndarray:
    return kappa * np.asarray(std_i) - np.abs(np.asarray(mean_i) - tau_i)


def straddle_objective(t: int, m: int) -> int:
    """Zero-based objective index targeted at iteration t (t starts at 1)."""
    if t < 1:
        raise ValueError("iteration index starts at 1")
    return (t - 1) % m


def score_straddle(
    models,
    x: np.ndarray,
    thresholds: np.ndarray,
    t: int,
    kappa: float = STRADDLE_KAPPA,
) -> float:
    """Level-set straddle score on the objective targeted at iteration t."""
    i = straddle_objective(t, len(models))
    post = models[i].posterior(np.asarray(x, dtype=float))
    tau = np.asarray(thresholds, dtype=float)
    return float(kappa * post.std - abs(post.mean - tau[i]))


def _kmeans_pp(points: np.ndarray, k: int, rng) -> np.ndarray:
    n = points.shape[0]
    centroids = np.empty((k, points.shape[1]))
    first = int(rng.integers(n))
    centroids[0] = points[first]
    d2 = cdist(points, centroids[:1], "sqeuclidean").ravel()
    for j in range(1, k):
        total = d2.sum()
        if total <= 0.0:
            idx = int(rng.integers(n))
        else:
            idx = int(rng.choice(n, p=d2 / total))
        centroids[j] = points[idx]
        np.minimum(d2, cdist(points, centroids[j : j + 1], "sqeuclidean").ravel(), out=d2)
    return centroids


def _nearest(points: np.ndarray, centroids: np.ndarray) -> np.ndarray:
    return cdist(points, centroids, "sqeuclidean").argmin(axis=1)


def kmeans(points: np.ndarray, config: ClusterConfig) -> tuple[np.ndarray, np.ndarray]:
    """Seeded k-means++ plus Lloyd iterations to an assignment fixpoint.

    Deterministic given config.seed. Empty clusters are re-seeded to the
    point currently farthest from its own centroid, which never increases
    the inertia.
    """
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    n = pts.shape[0]
    if n < 1:
        raise ValueError("kmeans needs at least one point")
    k = min(config.k, n)
    rng = np.random.default_rng(config.seed)
    centroids = _kmeans_pp(pts, k, rng)
    assign = _nearest(pts, centroids)
    for _ in range(config.max_iters):
        # repair empty clusters in index order before the centroid update
        for c in range(k):
            if np.any(assign == c):
                continue
            dist_own = np.linalg.norm(pts - centroids[assign], axis=1)
            centroids[c] = pts[int(dist_own.argmax())]
            assign = _nearest(pts, centroids)
        for c in range(k):
            members = assign == c
            if np.any(members):
                centroids[c] = pts[members].mean(axis=0)
        new_assign = _nearest(pts, centroids)
        if np.array_equal(new_assign, assign):
            break
        assign = new_assign
    return assign, centroids


def select_moo_cluster(
    models,
    shortlist: np.ndarray,
    beta: float,
    params: SoftAcqParams,
    prior_outcomes: OutcomeSet,
    config: ClusterConfig,
) -> int:
    """Cluster-based diverse selection among optimistically feasible candidates.

    Keeps candidates whose UCB passes the hard gate (falling back to the
    one-step maximizer when none do), clusters the kept UCB vectors, scores
    each cluster by how many members sit >= r from every prior outcome,
    and inside the best cluster returns the member farthest from the priors.
    """
    cand = np.atleast_2d(np.asarray(shortlist, dtype=float))
    if cand.shape[0] == 0:
        raise EmptyShortlist("shortlist is empty")
    u = gp.ucb_batch(models, cand, beta)
    kept = np.flatnonzero(np.all(u >= params.thresholds, axis=1))
    if kept.size == 0:
        means, stds = gp.predict_batch(models, cand)
        scores = one_step_from_moments(means, stds, params.thresholds)
        return int(scores.argmax())

    u_kept = u[kept]
    assign, centroids = kmeans(u_kept, config)
    k = centroids.shape[0]

    if prior_outcomes.count > 0:
        min_dist = cdist(u_kept, prior_outcomes.array).min(axis=1)
        uncovered = min_dist >= params.r
    else:
        min_dist = np.full(kept.size, np.inf)
        uncovered = np.ones(kept.size, dtype=bool)

    best_cluster = -1
    best_key = None
    for c in range(k):
        members = assign == c
        size = int(members.sum())
        if size == 0:
            continue
        score = int(uncovered[members].sum())
        key = (-score, -size, c)
        if best_key is None or key < best_key:
            best_key = key
            best_cluster = c

    member_ids = np.flatnonzero(assign == best_cluster)
    if prior_outcomes.count == 0:
        return int(kept[member_ids[0]])
    dists = min_dist[member_ids]
    return int(kept[member_ids[int(dists.argmax())]])
