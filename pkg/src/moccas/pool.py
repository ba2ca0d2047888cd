"""Finite candidate pools and their query oracles."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionMismatch, DuplicateId


@dataclass
class Pool:
    """Finite candidate set: features plus optional ground-truth outcomes.

    In benchmark mode `latent` holds the noise-free objective matrix, hidden
    from policies and used only by the oracle (which adds fresh noise per
    query) and by the metric reference set. A pool without `latent` is in
    live-oracle mode and cannot back a benchmark run.
    """

    ids: list
    features: np.ndarray
    latent: np.ndarray | None = None
    noise_std: float = 0.0

    def __post_init__(self):
        self.features = np.atleast_2d(np.asarray(self.features, dtype=float))
        if len(self.ids) != self.features.shape[0]:
            raise DimensionMismatch("ids and features disagree on pool size")
        if len(set(self.ids)) != len(self.ids):
            raise DuplicateId("pool ids are not unique")
        if self.latent is not None:
            self.latent = np.atleast_2d(np.asarray(self.latent, dtype=float))
            if self.latent.shape[0] != self.features.shape[0]:
                raise DimensionMismatch("latent outcomes disagree with pool size")
        if self.noise_std < 0:
            raise ValueError("noise_std must be >= 0")

    @property
    def size(self) -> int:
        return self.features.shape[0]

    @property
    def dim_in(self) -> int:
        return self.features.shape[1]

    @property
    def dim_out(self) -> int:
        if self.latent is None:
            raise ValueError("pool is in live-oracle mode (no outcome columns)")
        return self.latent.shape[1]

    @property
    def live_oracle_mode(self) -> bool:
        return self.latent is None


class PoolOracle:
    """Benchmark-mode oracle over a pool: latent outcome plus fresh noise."""

    def __init__(self, pool: Pool):
        if pool.live_oracle_mode:
            raise ValueError("pool has no ground-truth outcomes to query")
        self.pool = pool

    @property
    def dim_out(self) -> int:
        return self.pool.dim_out

    def query(self, index: int, rng) -> np.ndarray:
        y = self.pool.latent[index].copy()
        if self.pool.noise_std > 0:
            y += self.pool.noise_std * rng.standard_normal(y.shape[0])
        return y
