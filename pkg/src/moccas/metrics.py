"""Run metrics: positives curve, area under positives, time-to-X, aggregates."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

NOT_REACHED = -1


@dataclass(frozen=True)
class MetricSeries:
    """Per-iteration metric trajectories for a single run."""

    positives: np.ndarray
    fill: np.ndarray
    covered: np.ndarray

    def __post_init__(self):
        n = self.positives.shape[0]
        if self.fill.shape[0] != n or self.covered.shape[0] != n:
            raise ValueError("metric series must share one length")


def positives_series(feasible_flags) -> np.ndarray:
    """P(t): cumulative count of feasible outcomes after each query."""
    flags = np.asarray(feasible_flags, dtype=bool)
    return np.cumsum(flags.astype(np.int64))


def aup(positives: np.ndarray) -> float:
    """Area under the positives curve: sum of P(t) over the budget."""
    return float(np.asarray(positives, dtype=float).sum())


def t_at(positives: np.ndarray, x: int) -> int:
    """First 1-based t with P(t) >= x, or NOT_REACHED."""
    if x < 1:
        raise ValueError("x must be >= 1")
    pos = np.asarray(positives)
    hits = np.nonzero(pos >= x)[0]
    if hits.shape[0] == 0:
        return NOT_REACHED
    return int(hits[0]) + 1


def format_t_at(value: int, budget: int) -> str:
    """Render a time-to-X: the count itself, or ">{budget}" when unreached."""
    if value == NOT_REACHED:
        return f">{budget}"
    return str(value)


def mean_se(values) -> tuple[float, float]:
    """Mean and standard error (sample std, ddof=1) of a list of floats."""
    arr = np.asarray(values, dtype=float)
    if arr.shape[0] == 0:
        raise ValueError("need at least one value")
    mean = float(arr.mean())
    if arr.shape[0] == 1:
        return mean, 0.0
    se = float(arr.std(ddof=1) / np.sqrt(arr.shape[0]))
    return mean, se


def aggregate_trials(per_trial: dict[str, list[float]]) -> dict[str, dict[str, float]]:
    """Reduce {metric: [trial values]} to {metric: {mean, se, n}}."""
    out = {}
    for key, values in per_trial.items():
        mean, se = mean_se(values)
        out[key] = {"mean": mean, "se": se, "n": len(values)}
    return out
