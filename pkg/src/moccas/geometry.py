"""Objective-space coverage geometry.

The feasible region is the orthant {z : z_i >= tau_i for all i}; every volume
or fill computation intersects it with the box [tau, upper_bounds] so that the
quantities stay finite. Coverage uses open balls of radius r. Monte-Carlo
estimates are deterministic given their seed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.spatial.distance import cdist
from scipy.special import gammaln

from .errors import DimensionMismatch, EmptyReference

_OUTCOME_CHUNK = 64


@dataclass
class FeasibleRegion:
    """Thresholds tau plus the objective-space box ceiling."""

    thresholds: np.ndarray
    upper_bounds: np.ndarray

    def __init__(self, thresholds, upper_bounds=None):
        self.thresholds = np.asarray(thresholds, dtype=float)
        if self.thresholds.ndim != 1:
            raise ValueError("thresholds must be a vector")
        if upper_bounds is None:
            upper_bounds = np.ones_like(self.thresholds)
        self.upper_bounds = np.asarray(upper_bounds, dtype=float)
        if self.upper_bounds.shape != self.thresholds.shape:
            raise DimensionMismatch("upper_bounds shape differs from thresholds")
        if not np.all(self.thresholds < self.upper_bounds):
            raise ValueError("need thresholds < upper_bounds in every objective")

    @property
    def dim(self) -> int:
        return self.thresholds.shape[0]

    @property
    def box_volume(self) -> float:
        return float(np.prod(self.upper_bounds - self.thresholds))


class OutcomeSet:
    """Immutable ordered set of observed outcome vectors Z_t."""

    def __init__(self, points=None, dim: int | None = None):
        if points is None:
            if dim is None:
                raise ValueError("empty OutcomeSet needs an explicit dim")
            self._points = np.zeros((0, dim))
        else:
            arr = np.atleast_2d(np.asarray(points, dtype=float))
            if dim is not None and arr.shape[1] != dim:
                raise DimensionMismatch("points dimension differs from dim")
            self._points = arr.copy()

    @classmethod
    def empty(cls, dim: int) -> "OutcomeSet":
        return cls(None, dim=dim)

    @property
    def array(self) -> np.ndarray:
        return self._points

    @property
    def dim(self) -> int:
        return self._points.shape[1]

    @property
    def count(self) -> int:
        return self._points.shape[0]

    def append(self, z) -> "OutcomeSet":
        zv = np.asarray(z, dtype=float).reshape(1, -1)
        if zv.shape[1] != self.dim:
            raise DimensionMismatch("appended outcome has wrong dimension")
        return OutcomeSet(np.vstack([self._points, zv]))

    def __len__(self) -> int:
        return self.count


def ball_volume(m: int, r: float) -> float:
    """Volume of the m-ball of radius r: pi^(m/2) / Gamma(m/2 + 1) * r^m."""
    if m < 1:
        raise ValueError("m must be >= 1")
    if not r > 0:
        raise ValueError("r must be > 0")
    log_vol = 0.5 * m * math.log(math.pi) - gammaln(0.5 * m + 1.0) + m * math.log(r)
    return float(math.exp(log_vol))


def gauss_const(m: int, r: float) -> float:
    """Gaussian overlap constant (4 pi r^2)^(-m/2)."""
    if m < 1:
        raise ValueError("m must be >= 1")
    if not r > 0:
        raise ValueError("r must be > 0")
    return float((4.0 * math.pi * r * r) ** (-0.5 * m))


def in_feasible(region: FeasibleRegion, z) -> bool:
    """True iff z_i >= tau_i for every objective (box ceiling not applied)."""
    zv = np.asarray(z, dtype=float)
    if zv.shape != region.thresholds.shape:
        raise DimensionMismatch(
            f"outcome has shape {zv.shape}, expected {region.thresholds.shape}"
        )
    return bool(np.all(zv >= region.thresholds))


def feasible_mask(region: FeasibleRegion, z: np.ndarray) -> np.ndarray:
    """Vectorized in_feasible over rows of z."""
    arr = np.atleast_2d(np.asarray(z, dtype=float))
    if arr.shape[1] != region.dim:
        raise DimensionMismatch("outcome matrix has wrong number of columns")
    return np.all(arr >= region.thresholds, axis=1)


def _min_dist(points: np.ndarray, outcomes: np.ndarray) -> np.ndarray:
    # chunked over outcomes to bound memory; min is order-insensitive
    best = np.full(points.shape[0], np.inf)
    for start in range(0, outcomes.shape[0], _OUTCOME_CHUNK):
        d = cdist(points, outcomes[start : start + _OUTCOME_CHUNK])
        np.minimum(best, d.min(axis=1), out=best)
    return best


def covered_volume(
    region: FeasibleRegion, outcomes: OutcomeSet, r: float, n_mc: int, seed: int
) -> float:
    """MC estimate of Vol(union of open r-balls around outcomes, within the box).

    Samples n_mc points uniformly in [tau, upper_bounds]; the estimate is the
    covered fraction times the box volume. Empty outcome sets cover nothing.
    """
    if n_mc < 1:
        raise ValueError("n_mc must be >= 1")
    if outcomes.count == 0:
        return 0.0
    rng = np.random.default_rng(seed)
    width = region.upper_bounds - region.thresholds
    pts = region.thresholds + rng.random((n_mc, region.dim)) * width
    covered = _min_dist(pts, outcomes.array) < r
    return float(covered.mean()) * region.box_volume


def sample_in_ball(center: np.ndarray, r: float, n: int, rng) -> np.ndarray:
    """Uniform samples in the open ball B_r(center)."""
    c = np.asarray(center, dtype=float)
    m = c.shape[0]
    dirs = rng.standard_normal((n, m))
    norms = np.linalg.norm(dirs, axis=1)
    norms[norms == 0.0] = 1.0
    radii = r * rng.random(n) ** (1.0 / m)
    return c + dirs / norms[:, None] * radii[:, None]


def new_coverage_hard(
    region: FeasibleRegion,
    outcomes: OutcomeSet,
    center: np.ndarray,
    r: float,
    n_mc: int,
    seed: int,
) -> float:
    """MC estimate of Vol((B_r(center) intersect S) minus prior r-balls).

    Samples uniformly in B_r(center) and counts points that are feasible and
    at distance >= r from every prior outcome; returns fraction * V_m(r).
    """
    if n_mc < 1:
        raise ValueError("n_mc must be >= 1")
    c = np.asarray(center, dtype=float)
    if c.shape != region.thresholds.shape:
        raise DimensionMismatch("center has wrong dimension")
    rng = np.random.default_rng(seed)
    pts = sample_in_ball(c, r, n_mc, rng)
    keep = np.all(pts >= region.thresholds, axis=1)
    if outcomes.count > 0:
        keep &= _min_dist(pts, outcomes.array) >= r
    return float(keep.mean()) * ball_volume(region.dim, r)


def fill_distance(region: FeasibleRegion, outcomes: OutcomeSet, reference) -> float:
    """Largest distance from a reference point to its nearest outcome.

    The reference is a finite stand-in for the feasible region; every
    reference point must itself be feasible. Empty outcome sets give +inf.
    """
    ref = np.atleast_2d(np.asarray(reference, dtype=float))
    if ref.shape[0] == 0:
        raise EmptyReference("reference set is empty")
    if not np.all(feasible_mask(region, ref)):
        raise ValueError("reference contains infeasible points")
    if outcomes.count == 0:
        return math.inf
    return float(_min_dist(ref, outcomes.array).max())


def default_grid_density(m: int) -> int:
    """Per-axis lattice density keeping grid references near 4096 points."""
    if m <= 2:
        return 33
    return int(math.ceil(4096 ** (1.0 / m)))


def build_reference(
    region: FeasibleRegion,
    mode: str,
    source: np.ndarray | None = None,
    density: int = 33,
    seed: int = 0,
    max_points: int = 8192,
) -> np.ndarray:
    """Finite reference set over which the fill distance takes its max.

    grid mode lays a uniform lattice over [tau, upper_bounds] with `density`
    points per axis; pool mode keeps the feasible rows of `source`. Either
    way the result is subsampled (seeded) down to max_points if larger.
    """
    if mode == "grid":
        if density < 2:
            raise ValueError("grid density must be >= 2")
        axes = [
            np.linspace(region.thresholds[i], region.upper_bounds[i], density)
            for i in range(region.dim)
        ]
        mesh = np.meshgrid(*axes, indexing="ij")
        ref = np.column_stack([ax.ravel() for ax in mesh])
    elif mode == "pool":
        if source is None:
            raise ValueError("pool mode needs a source outcome matrix")
        src = np.atleast_2d(np.asarray(source, dtype=float))
        ref = src[feasible_mask(region, src)]
        if ref.shape[0] == 0:
            raise EmptyReference("no feasible rows in the pool source")
    else:
        raise ValueError(f"unknown reference mode {mode!r}")
    if ref.shape[0] > max_points:
        rng = np.random.default_rng(seed)
        idx = np.sort(rng.choice(ref.shape[0], size=max_points, replace=False))
        ref = ref[idx]
    return ref


class CoverageTracker:
    """Incremental covered_volume over a frozen MC sample set.

    Adding outcomes one at a time and reading `value` matches
    covered_volume(region, outcomes, r, n_mc, seed) exactly for the same
    seed, because coverage is a union (logical OR) over outcomes.
    """

    def __init__(self, region: FeasibleRegion, r: float, n_mc: int, seed: int):
        rng = np.random.default_rng(seed)
        width = region.upper_bounds - region.thresholds
        self._pts = region.thresholds + rng.random((n_mc, region.dim)) * width
        self._covered = np.zeros(n_mc, dtype=bool)
        self._box_volume = region.box_volume
        self._r = r

    def add(self, z) -> None:
        zv = np.asarray(z, dtype=float).reshape(1, -1)
        d = cdist(self._pts, zv).ravel()
        self._covered |= d < self._r

    @property
    def value(self) -> float:
        return float(self._covered.mean()) * self._box_volume


class FillTracker:
    """Incremental fill_distance: running per-reference minimum distances."""

    def __init__(self, reference: np.ndarray):
        self._ref = np.atleast_2d(np.asarray(reference, dtype=float))
        if self._ref.shape[0] == 0:
            raise EmptyReference("reference set is empty")
        self._min_d = np.full(self._ref.shape[0], np.inf)

    def add(self, z) -> None:
        zv = np.asarray(z, dtype=float).reshape(1, -1)
        d = cdist(self._ref, zv).ravel()
        np.minimum(self._min_d, d, out=self._min_d)

    @property
    def value(self) -> float:
        return float(self._min_d.max())
