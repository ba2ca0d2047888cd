"""Synthetic ground truth: smooth multi-objective test functions and pools.

Problems are built from seeded random smooth families and rescaled so that a
10^4-point probe maps each objective onto [0, 1]. Pools store noise-free
latent outcomes; observation noise is applied freshly at query time.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import DegeneratePool
from .pool import Pool

_PROBE_POINTS = 10_000
_BUMPS_PER_OBJECTIVE = 3
_QUANTILE_TOL = 1e-4


@dataclass
class SyntheticProblem:
    """Smooth map from a box in input space to [0,1]^m objectives."""

    dim_in: int
    dim_out: int
    evaluate_latent: Callable[[np.ndarray], np.ndarray]
    noise_std: float
    lower: np.ndarray
    upper: np.ndarray

    def latent(self, x: np.ndarray) -> np.ndarray:
        """Noise-free outcomes for rows of x: (n, m)."""
        return self.evaluate_latent(np.atleast_2d(np.asarray(x, dtype=float)))


class FunctionOracle:
    """Continuous-mode oracle: latent objectives plus fresh Gaussian noise."""

    def __init__(self, problem: SyntheticProblem):
        self.problem = problem

    @property
    def dim_out(self) -> int:
        return self.problem.dim_out

    def query(self, x: np.ndarray, rng) -> np.ndarray:
        y = self.problem.latent(x)[0].copy()
        if self.problem.noise_std > 0:
            y += self.problem.noise_std * rng.standard_normal(y.shape[0])
        return y


def _raw_blobs(rng, d: int, m: int):
    # mixture of positive Gaussian bumps per objective; widths track the
    # typical pairwise distance scale sqrt(d/6) so values spread over [0,1]
    # instead of collapsing near zero as d grows
    centers = rng.random((m, _BUMPS_PER_OBJECTIVE, d))
    widths = np.sqrt(d / 6.0) * (0.5 + 0.7 * rng.random((m, _BUMPS_PER_OBJECTIVE)))
    weights = 0.5 + rng.random((m, _BUMPS_PER_OBJECTIVE))

    def evaluate(x: np.ndarray) -> np.ndarray:
        out = np.empty((x.shape[0], m))
        for i in range(m):
            acc = np.zeros(x.shape[0])
            for j in range(_BUMPS_PER_OBJECTIVE):
                diff = x - centers[i, j]
                sq = np.einsum("nk,nk->n", diff, diff)
                acc += weights[i, j] * np.exp(-0.5 * sq / widths[i, j] ** 2)
            out[:, i] = acc
        return out

    return evaluate


def _raw_ridges(rng, d: int, m: int):
    # smooth sinusoidal ridges along random directions
    directions = rng.standard_normal((m, d))
    directions /= np.linalg.norm(directions, axis=1, keepdims=True)
    freqs = 2.0 + 4.0 * rng.random(m)
    phases = 2.0 * np.pi * rng.random(m)

    def evaluate(x: np.ndarray) -> np.ndarray:
        proj = x @ directions.T
        return np.sin(freqs * proj + phases)

    return evaluate


def make_smooth_problem(
    kind: str, d: int, m: int, seed: int, noise_std: float = 0.01
) -> SyntheticProblem:
    """Build a seeded smooth problem on [0,1]^d with objectives scaled to [0,1].

    kind is "blobs" (mixtures of Gaussian bumps) or "ridges" (sinusoidal
    ridges). Scaling constants come from a 10^4-point seeded probe, so probe
    outputs span exactly [0, 1] and off-probe values stay within ~1% slack.
    """
    if d < 1 or m < 1:
        raise ValueError("need d >= 1 and m >= 1")
    rng = np.random.default_rng(np.random.SeedSequence(entropy=(seed, 101)))
    if kind == "blobs":
        raw = _raw_blobs(rng, d, m)
    elif kind == "ridges":
        raw = _raw_ridges(rng, d, m)
    else:
        raise ValueError(f"unknown problem kind {kind!r}")

    probe = rng.random((_PROBE_POINTS, d))
    raw_probe = raw(probe)
    lo = raw_probe.min(axis=0)
    hi = raw_probe.max(axis=0)
    span = np.where(hi - lo > 1e-12, hi - lo, 1.0)

    def evaluate(x: np.ndarray) -> np.ndarray:
        return (raw(x) - lo) / span

    return SyntheticProblem(
        dim_in=d,
        dim_out=m,
        evaluate_latent=evaluate,
        noise_std=noise_std,
        lower=np.zeros(d),
        upper=np.ones(d),
    )


def make_pool(problem: SyntheticProblem, n: int, seed: int) -> Pool:
    """Sample n uniform inputs and store their noise-free latent outcomes."""
    if n < 1:
        raise ValueError("pool size must be >= 1")
    rng = np.random.default_rng(np.random.SeedSequence(entropy=(seed, 202)))
    width = problem.upper - problem.lower
    features = problem.lower + rng.random((n, problem.dim_in)) * width
    latent = problem.latent(features)
    return Pool(
        ids=list(range(n)),
        features=features,
        latent=latent,
        noise_std=problem.noise_std,
    )


def _feasible_fraction(latent: np.ndarray, q: float) -> tuple[float, np.ndarray]:
    tau = np.quantile(latent, q, axis=0)
    frac = float(np.all(latent >= tau, axis=1).mean())
    return frac, tau


def calibrate_thresholds(pool: Pool, target_rate: float) -> np.ndarray:
    """Find per-objective thresholds hitting ~target_rate feasible fraction.

    All objectives share one quantile level q; the feasible fraction is
    non-increasing in q, so a bisection on q converges. Returns the tau at
    the best q probed (|achieved - target| minimized).
    """
    if pool.live_oracle_mode:
        raise ValueError("threshold calibration needs latent outcomes")
    if not 0.0 < target_rate < 1.0:
        raise ValueError("target_rate must lie in (0, 1)")
    latent = pool.latent
    spans = latent.max(axis=0) - latent.min(axis=0)
    if np.any(spans < 1e-9):
        raise DegeneratePool("an objective is (near-)constant over the pool")

    lo, hi = 0.0, 1.0
    best = None
    while hi - lo > _QUANTILE_TOL:
        mid = 0.5 * (lo + hi)
        frac, tau = _feasible_fraction(latent, mid)
        gap = abs(frac - target_rate)
        if best is None or gap < best[0]:
            best = (gap, tau)
        if frac > target_rate:
            lo = mid
        else:
            hi = mid
    return best[1]
