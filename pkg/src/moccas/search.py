"""Sequential search driver: warm start, GP updates, selection, bookkeeping.

Randomness is organized as named streams derived from one experiment seed,
so that warm-start indices, shortlist draws, and observation noise are
identical across policies run with the same seed (paired trials), and a
rerun of the same configuration is bit-identical.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from . import gp
from .acquisition import (
    OptimismSchedule,
    SoftAcqParams,
    hard_acquisition,
    soft_acquisition,
    soft_values_batch,
    soft_values_from_ucb,
    tie_break,
)
from .baselines import (
    STRADDLE_KAPPA,
    ClusterConfig,
    Policy,
    one_step_from_moments,
    score_random,
    select_moo_cluster,
    straddle_objective,
)
from .errors import Exhausted, PoolTooSmall
from .geometry import (
    CoverageTracker,
    FeasibleRegion,
    FillTracker,
    OutcomeSet,
    build_reference,
    default_grid_density,
    in_feasible,
)
from .metrics import MetricSeries, aup
from .pool import Pool, PoolOracle

# named rng streams; every draw in a run is keyed by (seed, stream, step)
STREAM_PREFIT = 1
STREAM_WARM = 2
STREAM_SHORTLIST = 3
STREAM_NOISE = 4
STREAM_POLICY = 5
STREAM_CLUSTER = 6
STREAM_STARTS = 7
STREAM_METRIC = 8
STREAM_ACQ_MC = 9

_GRAD_TOL = 1e-8
_ARMIJO_C = 1e-4
_MIN_STEP = 1e-12


def stream_rng(seed: int, stream: int, step: int = 0):
    """Generator for one named stream of the experiment seed."""
    return np.random.default_rng(np.random.SeedSequence(entropy=(seed, stream, step)))


def stream_seed(seed: int, stream: int, step: int = 0) -> int:
    """Integer sub-seed for APIs that take a seed instead of a generator."""
    return int(np.random.SeedSequence(entropy=(seed, stream, step)).generate_state(1)[0])


@dataclass
class MocConfig:
    """Everything one run needs besides the oracle: region, schedule, budgets."""

    thresholds: np.ndarray
    r: float = 0.1
    lam: float | None = None
    beta0: float = 3.0
    beta_floor: float = 0.25
    budget: int = 200
    n_init: int = 20
    per_objective_cap: int = 50
    random_cap: int = 100
    acq_mc: int = 4096
    metric_mc: int = 16384
    prefit_samples: int = 200
    cluster_k: int = 5
    rank_hard: bool = False
    n_starts: int = 8
    max_steps: int = 60
    seed: int = 0
    upper_bounds: np.ndarray | None = None

    def __post_init__(self):
        self.thresholds = np.asarray(self.thresholds, dtype=float)
        if self.upper_bounds is not None:
            self.upper_bounds = np.asarray(self.upper_bounds, dtype=float)
        if self.r <= 0:
            raise ValueError("r must be positive")
        if self.budget < 1 or self.n_init < 1:
            raise ValueError("budget and n_init must be >= 1")
        if self.per_objective_cap < 1:
            raise ValueError("per_objective_cap must be >= 1")
        if self.random_cap < 0:
            raise ValueError("random_cap must be >= 0")
        if self.beta0 <= 0:
            raise ValueError("beta0 must be positive")

    def region(self) -> FeasibleRegion:
        return FeasibleRegion(self.thresholds, self.upper_bounds)

    def acq_params(self) -> SoftAcqParams:
        return SoftAcqParams(self.r, self.lam, self.thresholds)

    def schedule(self) -> OptimismSchedule:
        return OptimismSchedule(self.beta0, floor=self.beta_floor)


@dataclass
class ShortlistConfig:
    per_objective_cap: int
    random_cap: int
    seed: int

    def __post_init__(self):
        if self.per_objective_cap < 1:
            raise ValueError("per_objective_cap must be >= 1")
        if self.random_cap < 0:
            raise ValueError("random_cap must be >= 0")


@dataclass
class IterationRecord:
    """One row of the run log; metric fields are filled by the driver."""

    t: int
    chosen_id: int | None
    x: np.ndarray
    y: np.ndarray
    feasible: bool
    acq_value: float | None
    wall_ms: float
    positives: int = 0
    fill: float = float("inf")
    covered: float = 0.0


@dataclass
class History:
    """Everything observed so far, in query order."""

    queried_inputs: list = field(default_factory=list)
    observed: OutcomeSet = None
    feasible_flags: list = field(default_factory=list)
    iteration_logs: list = field(default_factory=list)
    visited: set = field(default_factory=set)

    @property
    def length(self) -> int:
        return len(self.queried_inputs)

    def append(self, record: IterationRecord, pool_index: int | None = None) -> None:
        self.queried_inputs.append(np.asarray(record.x, dtype=float))
        self.observed = self.observed.append(record.y)
        self.feasible_flags.append(record.feasible)
        self.iteration_logs.append(record)
        if pool_index is not None:
            self.visited.add(pool_index)


@dataclass
class RunResult:
    policy: str
    history: History
    metrics: MetricSeries
    summary: dict


def warm_start(pool_or_domain, n_init: int, seed: int, region: FeasibleRegion,
               oracle=None) -> History:
    """Query n_init uniform designs (pool: without replacement) into a History."""
    if n_init < 1:
        raise ValueError("n_init must be >= 1")
    rng = stream_rng(seed, STREAM_WARM)
    hist = History(observed=OutcomeSet.empty(region.dim))
    if isinstance(pool_or_domain, Pool):
        pool = pool_or_domain
        if pool.size < n_init:
            raise PoolTooSmall(f"pool has {pool.size} rows, need {n_init}")
        if oracle is None:
            oracle = PoolOracle(pool)
        picks = rng.choice(pool.size, size=n_init, replace=False)
        for q, pos in enumerate(picks):
            pos = int(pos)
            y = oracle.query(pos, stream_rng(seed, STREAM_NOISE, q))
            rec = IterationRecord(
                t=q + 1,
                chosen_id=pool.ids[pos],
                x=pool.features[pos],
                y=y,
                feasible=in_feasible(region, y),
                acq_value=None,
                wall_ms=0.0,
            )
            hist.append(rec, pool_index=pos)
    else:
        lower, upper = (np.asarray(b, dtype=float) for b in pool_or_domain)
        if oracle is None:
            raise ValueError("continuous warm start needs an oracle")
        for q in range(n_init):
            x = lower + rng.random(lower.shape[0]) * (upper - lower)
            y = oracle.query(x, stream_rng(seed, STREAM_NOISE, q))
            rec = IterationRecord(
                t=q + 1,
                chosen_id=None,
                x=x,
                y=y,
                feasible=in_feasible(region, y),
                acq_value=None,
                wall_ms=0.0,
            )
            hist.append(rec)
    return hist


def build_shortlist(models, pool: Pool, visited, config: ShortlistConfig,
                    beta: float) -> list[int]:
    """Per-objective optimistic top-k plus capped random exploration.

    Returns deduplicated positional pool indices, objective blocks first
    (in objective order) then the random block, order-stable.
    """
    unvisited = np.array(sorted(set(range(pool.size)) - set(visited)), dtype=int)
    if unvisited.shape[0] == 0:
        raise Exhausted("no unvisited pool candidates remain")
    u = gp.ucb_batch(models, pool.features[unvisited], beta)

    chosen: list[int] = []
    seen: set[int] = set()
    cap = min(config.per_objective_cap, unvisited.shape[0])
    for i in range(u.shape[1]):
        order = np.argsort(-u[:, i], kind="stable")[:cap]
        for j in order:
            idx = int(unvisited[j])
            if idx not in seen:
                seen.add(idx)
                chosen.append(idx)

    rng = np.random.default_rng(config.seed)
    n_rand = min(config.random_cap, unvisited.shape[0])
    if n_rand > 0:
        for j in rng.choice(unvisited.shape[0], size=n_rand, replace=False):
            idx = int(unvisited[int(j)])
            if idx not in seen:
                seen.add(idx)
                chosen.append(idx)
    return chosen


def select_continuous(models, schedule_beta: float, params: SoftAcqParams,
                      prior_outcomes: OutcomeSet, domain_box, n_starts: int,
                      max_steps: int, seed: int) -> np.ndarray:
    """Multi-start projected gradient ascent on the soft acquisition.

    Starts uniformly in the box; each trajectory takes Armijo backtracking
    steps (halving, c=1e-4) with projection by clamping, stopping at
    max_steps or when the gradient infinity-norm falls below 1e-8. Returns
    the best endpoint; near-ties resolve by distance of U to prior outcomes.
    """
    if n_starts < 1:
        raise ValueError("n_starts must be >= 1")
    lower, upper = (np.asarray(b, dtype=float) for b in domain_box)
    rng = np.random.default_rng(seed)
    starts = lower + rng.random((n_starts, lower.shape[0])) * (upper - lower)

    endpoints = []
    for x0 in starts:
        x = x0.copy()
        value, grad = soft_acquisition(models, x, schedule_beta, params, prior_outcomes)
        for _ in range(max_steps):
            if np.max(np.abs(grad)) < _GRAD_TOL:
                break
            step = 1.0
            accepted = False
            while step > _MIN_STEP:
                x_new = np.clip(x + step * grad, lower, upper)
                move = x_new - x
                if not np.any(move):
                    break
                v_new, g_new = soft_acquisition(
                    models, x_new, schedule_beta, params, prior_outcomes
                )
                if v_new >= value + _ARMIJO_C * float(grad @ move):
                    x, value, grad = x_new, v_new, g_new
                    accepted = True
                    break
                step *= 0.5
            if not accepted:
                break
        endpoints.append((x, value))

    u_rows = [gp.ucb(models, x, schedule_beta)[0] for x, _ in endpoints]
    cands = [(i, v, u_rows[i]) for i, (_, v) in enumerate(endpoints)]
    return endpoints[tie_break(cands, prior_outcomes)][0]


def _prefit(oracle, config: MocConfig, m: int):
    """Fit the frozen standardizer + kernel hyperparameters per objective.

    Uses a labeled subset drawn outside the search budget from its own
    stream, so the prefit never consumes warm-start or iteration draws.
    """
    rng = stream_rng(config.seed, STREAM_PREFIT)
    if hasattr(oracle, "pool"):
        pool = oracle.pool
        n_pre = min(config.prefit_samples, pool.size)
        picks = rng.choice(pool.size, size=n_pre, replace=False)
        x_pre = pool.features[picks]
        y_pre = np.stack([oracle.query(int(i), rng) for i in picks])
    else:
        problem = oracle.problem
        lower, upper = problem.lower, problem.upper
        x_pre = lower + rng.random((config.prefit_samples, lower.shape[0])) * (
            upper - lower
        )
        y_pre = np.stack([oracle.query(x, rng) for x in x_pre])

    scaler = gp.Standardizer.fit(x_pre, y_pre)
    z_in = scaler.transform_inputs(x_pre)
    grid = gp.default_hyper_grid(x_pre.shape[1])
    hypers = [
        gp.prefit_hyperparams(z_in, scaler.transform_target(y_pre[:, i], i), grid)
        for i in range(m)
    ]
    return scaler, hypers


def _score_shortlist(policy: Policy, models, feats: np.ndarray, beta: float,
                     params: SoftAcqParams, priors: OutcomeSet, region: FeasibleRegion,
                     config: MocConfig, t: int):
    """Return (local index into feats, acq value or None) under the policy."""
    if policy is Policy.RANDOM:
        rng = stream_rng(config.seed, STREAM_POLICY, t)
        return score_random(feats.shape[0], rng), None

    if policy is Policy.MOO_CLUSTER:
        cluster_cfg = ClusterConfig(
            k=config.cluster_k, seed=stream_seed(config.seed, STREAM_CLUSTER, t)
        )
        return (
            select_moo_cluster(models, feats, beta, params, priors, cluster_cfg),
            None,
        )

    if policy is Policy.ONE_STEP:
        means, stds = gp.predict_batch(models, feats)
        values = one_step_from_moments(means, stds, params.thresholds)
        u = gp.ucb_batch(models, feats, beta)
    elif policy is Policy.STRADDLE:
        means, stds = gp.predict_batch(models, feats)
        i = straddle_objective(t, len(models))
        values = STRADDLE_KAPPA * stds[:, i] - np.abs(means[:, i] - params.thresholds[i])
        u = gp.ucb_batch(models, feats, beta)
    elif policy is Policy.MOC_CAS:
        if config.rank_hard:
            u = gp.ucb_batch(models, feats, beta)
            mc_seed = stream_seed(config.seed, STREAM_ACQ_MC, t)
            values = np.array(
                [
                    hard_acquisition(
                        models, feats[j], beta, params, priors, region,
                        config.acq_mc, mc_seed,
                    )
                    for j in range(feats.shape[0])
                ]
            )
        else:
            values, u = soft_values_batch(models, feats, beta, params, priors)
    else:
        raise ValueError(f"unknown policy {policy!r}")

    cands = [(j, float(values[j]), u[j]) for j in range(feats.shape[0])]
    pick = tie_break(cands, priors)
    return pick, float(values[pick])


def run(policy, oracle, config: MocConfig) -> RunResult:
    """Algorithm driver: warm start, then budget iterations of select/query.

    Works in pool mode (oracle exposes .pool) or continuous mode (oracle
    exposes .problem with a box domain). Two calls with the same config and
    oracle produce bit-identical results.
    """
    policy = Policy(policy)
    region = config.region()
    m = region.dim
    params = config.acq_params()
    schedule = config.schedule()
    pool_mode = hasattr(oracle, "pool")
    if pool_mode:
        pool = oracle.pool
        domain = pool
    else:
        problem = oracle.problem
        domain = (problem.lower, problem.upper)

    scaler, hypers = _prefit(oracle, config, m)
    hist = warm_start(domain, config.n_init, config.seed, region, oracle=oracle)

    x0 = np.array(hist.queried_inputs)
    y0 = hist.observed.array
    models = [
        gp.StandardizedGp.fit(hypers[i], scaler, i, x0, y0[:, i]) for i in range(m)
    ]

    # fill is measured against the achievable feasible set when ground truth
    # exists (pool latent rows), else against a lattice over the region box
    if pool_mode and pool.latent is not None:
        reference = build_reference(
            region,
            mode="pool",
            source=pool.latent,
            seed=stream_seed(config.seed, STREAM_METRIC, 1),
        )
    else:
        reference = build_reference(
            region,
            mode="grid",
            density=default_grid_density(m),
            seed=stream_seed(config.seed, STREAM_METRIC, 1),
        )
    coverage = CoverageTracker(
        region, config.r, config.metric_mc, stream_seed(config.seed, STREAM_METRIC, 0)
    )
    fill = FillTracker(reference)

    positives = 0
    for rec in hist.iteration_logs:
        positives += int(rec.feasible)
        coverage.add(rec.y)
        fill.add(rec.y)
        rec.positives = positives
        rec.fill = fill.value
        rec.covered = coverage.value

    for t in range(1, config.budget + 1):
        t_start = time.perf_counter()
        beta = schedule.beta(t)
        priors = hist.observed

        if pool_mode:
            sl_cfg = ShortlistConfig(
                per_objective_cap=config.per_objective_cap,
                random_cap=config.random_cap,
                seed=stream_seed(config.seed, STREAM_SHORTLIST, t),
            )
            shortlist = build_shortlist(models, pool, hist.visited, sl_cfg, beta)
            feats = pool.features[shortlist]
            local, acq_value = _score_shortlist(
                policy, models, feats, beta, params, priors, region, config, t
            )
            pos = shortlist[local]
            x_t = pool.features[pos]
            chosen_id = pool.ids[pos]
            y_t = oracle.query(
                pos, stream_rng(config.seed, STREAM_NOISE, config.n_init + t - 1)
            )
        else:
            if policy is Policy.MOC_CAS:
                x_t = select_continuous(
                    models, beta, params, priors, domain, config.n_starts,
                    config.max_steps, stream_seed(config.seed, STREAM_STARTS, t),
                )
                acq_value = float(soft_values_from_ucb(
                    gp.ucb(models, x_t, beta)[0], params, priors
                )[0])
            else:
                # non-gradient policies score a seeded uniform candidate set
                # of the size a pool shortlist would have
                lower, upper = domain
                n_cand = config.per_objective_cap * m + config.random_cap
                cand_rng = stream_rng(config.seed, STREAM_SHORTLIST, t)
                feats = lower + cand_rng.random((n_cand, lower.shape[0])) * (
                    upper - lower
                )
                local, acq_value = _score_shortlist(
                    policy, models, feats, beta, params, priors, region, config, t
                )
                x_t = feats[local]
            pos = None
            chosen_id = None
            y_t = oracle.query(
                x_t, stream_rng(config.seed, STREAM_NOISE, config.n_init + t - 1)
            )

        feasible = in_feasible(region, y_t)
        positives += int(feasible)
        coverage.add(y_t)
        fill.add(y_t)
        models = [models[i].condition(x_t, float(y_t[i])) for i in range(m)]

        rec = IterationRecord(
            t=config.n_init + t,
            chosen_id=chosen_id,
            x=x_t,
            y=y_t,
            feasible=feasible,
            acq_value=None if acq_value is None else float(acq_value),
            wall_ms=(time.perf_counter() - t_start) * 1000.0,
            positives=positives,
            fill=fill.value,
            covered=coverage.value,
        )
        hist.append(rec, pool_index=pos)

    series = MetricSeries(
        positives=np.array([r.positives for r in hist.iteration_logs], dtype=np.int64),
        fill=np.array([r.fill for r in hist.iteration_logs]),
        covered=np.array([r.covered for r in hist.iteration_logs]),
    )
    summary = {
        "aup": aup(series.positives),
        "final_positives": int(series.positives[-1]),
        "final_fill": float(series.fill[-1]),
        "final_covered": float(series.covered[-1]),
    }
    return RunResult(policy=policy.value, history=hist, metrics=series, summary=summary)
