"""Run metrics against brute-force recounts and a hand-computed aggregate."""

import math

import numpy as np
import pytest

from moccas.metrics import (
    NOT_REACHED,
    MetricSeries,
    aggregate_trials,
    aup,
    format_t_at,
    mean_se,
    positives_series,
    t_at,
)


def _brute_positives(flags):
    return [sum(flags[: t + 1]) for t in range(len(flags))]


def _brute_t_at(series, x):
    for t, p in enumerate(series, start=1):
        if p >= x:
            return t
    return NOT_REACHED


def test_positives_frozen():
    assert positives_series([True, False, True]).tolist() == [1, 1, 2]
    assert positives_series([False] * 4).tolist() == [0, 0, 0, 0]


def test_aup_frozen():
    assert aup(np.array([1, 2, 3, 4])) == 10.0
    assert aup(np.zeros(5, dtype=int)) == 0.0
    # earlier positives strictly increase the area
    assert aup(np.array([1, 1, 1])) > aup(np.array([0, 0, 1]))


def test_t_at_frozen():
    assert t_at(np.array([0, 1, 2, 3]), 2) == 3
    assert t_at(np.array([0, 0, 1]), 2) == NOT_REACHED
    series = np.array([0] * 6 + [1])
    assert t_at(series, 1) == 7


def test_metrics_match_brute_force_on_random_histories():
    rng = np.random.default_rng(101)
    for _ in range(1000):
        n = int(rng.integers(1, 13))
        flags = (rng.random(n) < rng.uniform(0.1, 0.9)).tolist()
        series = positives_series(flags)
        brute = _brute_positives(flags)
        assert series.tolist() == brute
        assert aup(series) == float(sum(brute))
        x = int(rng.integers(1, 6))
        assert t_at(series, x) == _brute_t_at(brute, x)


def test_fill_series_matches_brute_force_on_random_histories():
    # running fill distance: max over reference of min distance to outcomes
    rng = np.random.default_rng(102)
    from moccas.geometry import FillTracker

    for _ in range(1000):
        ref = rng.random((int(rng.integers(2, 40)), 2))
        outcomes = rng.random((int(rng.integers(1, 8)), 2))
        tracker = FillTracker(ref)
        for k, z in enumerate(outcomes):
            tracker.add(z)
            brute = max(
                min(math.dist(p, q) for q in outcomes[: k + 1]) for p in ref
            )
            assert tracker.value == pytest.approx(brute, rel=1e-12)


def test_t_at_monotone_in_x():
    rng = np.random.default_rng(103)
    for _ in range(50):
        flags = (rng.random(20) < 0.4).tolist()
        series = positives_series(flags)
        reached = [x for x in range(1, 10) if t_at(series, x) != NOT_REACHED]
        for a, b in zip(reached, reached[1:]):
            assert t_at(series, a) <= t_at(series, b)


def test_aggregate_frozen_example():
    # hand-computed: mean 75.0, std(ddof=1)=sqrt(68/3), se = sqrt(17/3)
    out = aggregate_trials({"aup": [70.0, 72.0, 78.0, 80.0]})
    assert out["aup"]["mean"] == pytest.approx(75.0, abs=1e-12)
    assert out["aup"]["se"] == pytest.approx(math.sqrt(17.0 / 3.0), abs=1e-12)
    assert out["aup"]["n"] == 4


def test_aggregate_identical_trials_zero_se():
    out = aggregate_trials({"fill": [0.2, 0.2, 0.2]})
    assert out["fill"]["mean"] == pytest.approx(0.2, abs=1e-15)
    assert out["fill"]["se"] == pytest.approx(0.0, abs=1e-15)


def test_mean_se_single_trial_degenerate():
    mean, se = mean_se([42.0])
    assert mean == 42.0
    assert se == 0.0


def test_format_t_at_sentinel():
    assert format_t_at(NOT_REACHED, 220) == ">220"
    assert format_t_at(37, 220) == "37"


def test_metric_series_length_validation():
    with pytest.raises(Exception):
        MetricSeries(
            positives=np.array([1, 2]),
            fill=np.array([0.5]),
            covered=np.array([0.1, 0.2]),
        )
