"""Search driver: streams, warm start, shortlist, ascent, full runs."""

import numpy as np
import pytest

from moccas.acquisition import SoftAcqParams
from moccas.baselines import Policy
from moccas.errors import Exhausted, PoolTooSmall
from moccas.geometry import FeasibleRegion, OutcomeSet
from moccas.gp import KernelParams, fit_gp, ucb_batch
from moccas.pool import PoolOracle
from moccas.search import (
    MocConfig,
    ShortlistConfig,
    build_shortlist,
    run,
    select_continuous,
    stream_rng,
    stream_seed,
    warm_start,
)
from moccas.synthetic import (
    FunctionOracle,
    calibrate_thresholds,
    make_pool,
    make_smooth_problem,
)


def _small_pool(seed=7, n=300, d=2, m=2, noise=0.01):
    problem = make_smooth_problem("blobs", d, m, seed=seed, noise_std=noise)
    return make_pool(problem, n, seed=seed + 1)


def _small_config(pool, budget=8, **overrides):
    tau = calibrate_thresholds(pool, 0.30)
    base = dict(
        thresholds=tau,
        r=0.05,
        budget=budget,
        n_init=6,
        per_objective_cap=8,
        random_cap=12,
        acq_mc=512,
        metric_mc=2000,
        prefit_samples=40,
        seed=0,
    )
    base.update(overrides)
    return MocConfig(**base)


# -- seeded streams ----------------------------------------------------------


def test_stream_rng_reproducible_and_separated():
    a = stream_rng(3, 1).random(4)
    b = stream_rng(3, 1).random(4)
    c = stream_rng(3, 2).random(4)
    assert np.array_equal(a, b)
    assert not np.array_equal(a, c)
    assert stream_seed(3, 1, 0) == stream_seed(3, 1, 0)
    assert stream_seed(3, 1, 0) != stream_seed(3, 1, 1)


# -- warm start ----------------------------------------------------------------


def test_warm_start_pool_no_repeats_deterministic():
    pool = _small_pool()
    region = FeasibleRegion(np.array([0.5, 0.5]))
    hist_a = warm_start(pool, 10, 4, region)
    hist_b = warm_start(pool, 10, 4, region)
    ids_a = [rec.chosen_id for rec in hist_a.iteration_logs]
    assert ids_a == [rec.chosen_id for rec in hist_b.iteration_logs]
    assert len(set(ids_a)) == 10
    assert hist_a.length == 10
    for rec in hist_a.iteration_logs:
        assert rec.acq_value is None


def test_warm_start_flags_match_region():
    pool = _small_pool()
    region = FeasibleRegion(np.array([0.4, 0.4]))
    hist = warm_start(pool, 12, 9, region)
    for rec, flag in zip(hist.iteration_logs, hist.feasible_flags):
        assert flag == bool(np.all(rec.y >= region.thresholds))


def test_warm_start_pool_too_small():
    pool = _small_pool(n=5)
    with pytest.raises(PoolTooSmall):
        warm_start(pool, 6, 0, FeasibleRegion(np.array([0.5, 0.5])))


def test_warm_start_continuous_in_box():
    problem = make_smooth_problem("blobs", 3, 2, seed=1, noise_std=0.0)
    oracle = FunctionOracle(problem)
    region = FeasibleRegion(np.array([0.5, 0.5]))
    hist = warm_start((problem.lower, problem.upper), 15, 2, region, oracle=oracle)
    xs = np.array([rec.x for rec in hist.iteration_logs])
    assert np.all(xs >= problem.lower)
    assert np.all(xs <= problem.upper)
    ys = np.array([rec.y for rec in hist.iteration_logs])
    assert np.array_equal(ys, problem.latent(xs))  # noise_std 0


# -- shortlist -----------------------------------------------------------------


def _pool_models(pool, t=12, seed=0):
    rng = np.random.default_rng(seed)
    idx = rng.choice(pool.size, size=t, replace=False)
    params = KernelParams(np.full(pool.dim_in, 0.5), 1.0, 1e-2)
    return [
        fit_gp(params, pool.features[idx], pool.latent[idx][:, i])
        for i in range(pool.dim_out)
    ]


def test_shortlist_caps_and_uniqueness():
    pool = _small_pool(n=200)
    models = _pool_models(pool)
    cfg = ShortlistConfig(per_objective_cap=5, random_cap=10, seed=stream_seed(0, 3, 1))
    picks = build_shortlist(models, pool, set(), cfg, beta=2.0)
    assert len(picks) == len(set(picks))
    assert len(picks) <= 5 * pool.dim_out + 10
    assert all(0 <= p < pool.size for p in picks)


def test_shortlist_leads_with_top_ucb_block():
    pool = _small_pool(n=150)
    models = _pool_models(pool)
    cfg = ShortlistConfig(per_objective_cap=4, random_cap=0, seed=stream_seed(0, 3, 2))
    picks = build_shortlist(models, pool, set(), cfg, beta=2.0)
    u = ucb_batch(models, pool.features, 2.0)
    top_first = set(np.argsort(-u[:, 0], kind="stable")[:4].tolist())
    assert set(picks[:4]) == top_first


def test_shortlist_excludes_visited():
    pool = _small_pool(n=60)
    models = _pool_models(pool)
    visited = set(range(30))
    cfg = ShortlistConfig(per_objective_cap=50, random_cap=100, seed=stream_seed(0, 3, 3))
    picks = build_shortlist(models, pool, visited, cfg, beta=2.0)
    assert set(picks) == set(range(30, 60))  # caps exceed pool: saturation


def test_shortlist_exhausted():
    pool = _small_pool(n=20)
    models = _pool_models(pool, t=6)
    cfg = ShortlistConfig(per_objective_cap=2, random_cap=2, seed=stream_seed(0, 3, 4))
    with pytest.raises(Exhausted):
        build_shortlist(models, pool, set(range(20)), cfg, beta=2.0)


def test_shortlist_deterministic_per_seed():
    pool = _small_pool(n=120)
    models = _pool_models(pool)
    cfg = ShortlistConfig(per_objective_cap=6, random_cap=9, seed=stream_seed(5, 3, 7))
    assert build_shortlist(models, pool, {3, 4}, cfg, beta=1.5) == build_shortlist(
        models, pool, {3, 4}, cfg, beta=1.5
    )


# -- continuous ascent ---------------------------------------------------------


def test_select_continuous_matches_grid_argmax():
    # one observation, one objective: the UCB hump is an interior maximum
    params = KernelParams(np.array([0.3]), 1.0, 1e-2)
    model = fit_gp(params, np.array([[0.45]]), np.array([1.0]))
    acq = SoftAcqParams(0.5, 0.25, np.array([1.9]))
    prior = OutcomeSet.empty(1)
    beta = 4.0
    grid = np.linspace(0.0, 1.0, 10_001)[:, None]
    from moccas.acquisition import soft_values_from_ucb

    vals = soft_values_from_ucb(ucb_batch([model], grid, beta), acq, prior)
    best = grid[int(np.argmax(vals)), 0]
    x_star = select_continuous(
        [model], beta, acq, prior, (np.zeros(1), np.ones(1)),
        n_starts=8, max_steps=60, seed=3,
    )
    assert abs(float(x_star[0]) - best) < 1e-3


def test_select_continuous_stays_in_box():
    rng = np.random.default_rng(55)
    params = KernelParams(np.full(2, 0.4), 1.0, 1e-2)
    models = [
        fit_gp(params, rng.random((5, 2)), rng.uniform(0.2, 0.9, size=5))
        for _ in range(2)
    ]
    acq = SoftAcqParams(0.1, 0.05, np.array([0.4, 0.4]))
    prior = OutcomeSet(rng.uniform(0.3, 0.8, size=(3, 2)))
    x_star = select_continuous(
        models, 2.0, acq, prior, (np.zeros(2), np.ones(2)),
        n_starts=4, max_steps=30, seed=9,
    )
    assert np.all(x_star >= 0.0)
    assert np.all(x_star <= 1.0)


# -- full runs -----------------------------------------------------------------


def _ids(result):
    return [rec.chosen_id for rec in result.history.iteration_logs]


def test_run_bit_identical_reruns():
    pool = _small_pool()
    config = _small_config(pool)
    a = run(Policy.MOC_CAS, PoolOracle(pool), config)
    b = run(Policy.MOC_CAS, PoolOracle(pool), config)
    assert _ids(a) == _ids(b)
    ya = np.array([rec.y for rec in a.history.iteration_logs])
    yb = np.array([rec.y for rec in b.history.iteration_logs])
    assert np.array_equal(ya, yb)
    assert a.summary == b.summary


def test_run_history_length_and_uniqueness():
    pool = _small_pool()
    config = _small_config(pool, budget=10)
    result = run(Policy.RANDOM, PoolOracle(pool), config)
    assert result.history.length == config.n_init + config.budget
    ids = _ids(result)
    assert len(set(ids)) == len(ids)  # pool mode never requeries


def test_run_metrics_monotone():
    pool = _small_pool()
    config = _small_config(pool, budget=10)
    for policy in (Policy.RANDOM, Policy.MOC_CAS, Policy.STRADDLE):
        result = run(policy, PoolOracle(pool), config)
        pos = result.metrics.positives
        fill = result.metrics.fill
        cov = result.metrics.covered
        assert np.all(np.diff(pos) >= 0)
        assert np.all(pos <= np.arange(1, len(pos) + 1))
        finite = np.isfinite(fill)
        assert np.all(np.diff(fill[finite]) <= 1e-12)
        assert np.all(np.diff(cov) >= -1e-12)


def test_runs_share_warm_start_across_policies():
    pool = _small_pool()
    config = _small_config(pool)
    results = {
        policy: run(policy, PoolOracle(pool), config)
        for policy in (Policy.RANDOM, Policy.ONE_STEP, Policy.MOC_CAS)
    }
    warm = {p: _ids(r)[: config.n_init] for p, r in results.items()}
    vals = list(warm.values())
    assert vals[0] == vals[1] == vals[2]
    warm_y = {
        p: np.array([rec.y for rec in r.history.iteration_logs[: config.n_init]])
        for p, r in results.items()
    }
    ys = list(warm_y.values())
    assert np.array_equal(ys[0], ys[1])
    assert np.array_equal(ys[0], ys[2])


def test_run_acq_values_logged_per_policy():
    pool = _small_pool()
    config = _small_config(pool)
    moc = run(Policy.MOC_CAS, PoolOracle(pool), config)
    rnd = run(Policy.RANDOM, PoolOracle(pool), config)
    moc_tail = moc.history.iteration_logs[config.n_init :]
    rnd_tail = rnd.history.iteration_logs[config.n_init :]
    assert all(rec.acq_value is not None for rec in moc_tail)
    assert all(rec.acq_value is None for rec in rnd_tail)


def test_run_summary_fields():
    pool = _small_pool()
    config = _small_config(pool)
    result = run(Policy.ONE_STEP, PoolOracle(pool), config)
    assert set(result.summary) >= {
        "aup",
        "final_positives",
        "final_fill",
        "final_covered",
    }
    assert result.summary["aup"] == float(np.sum(result.metrics.positives))


def test_run_rank_hard_variant():
    pool = _small_pool()
    config = _small_config(pool, budget=4, rank_hard=True)
    result = run(Policy.MOC_CAS, PoolOracle(pool), config)
    assert result.history.length == config.n_init + 4


def test_run_continuous_mode():
    problem = make_smooth_problem("blobs", 2, 2, seed=3, noise_std=0.01)
    oracle = FunctionOracle(problem)
    config = MocConfig(
        thresholds=np.array([0.55, 0.55]),
        r=0.1,
        budget=4,
        n_init=6,
        prefit_samples=30,
        acq_mc=256,
        metric_mc=2000,
        n_starts=4,
        max_steps=25,
        seed=1,
    )
    for policy in (Policy.MOC_CAS, Policy.RANDOM):
        result = run(policy, oracle, config)
        assert result.history.length == 10
        xs = np.array([rec.x for rec in result.history.iteration_logs])
        assert np.all(xs >= problem.lower)
        assert np.all(xs <= problem.upper)
    again = run(Policy.MOC_CAS, oracle, config)
    base = run(Policy.MOC_CAS, oracle, config)
    xa = np.array([r.x for r in again.history.iteration_logs])
    xb = np.array([r.x for r in base.history.iteration_logs])
    assert np.array_equal(xa, xb)
