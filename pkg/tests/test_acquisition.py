"""Soft/hard acquisition values, gradients, and tie-breaking."""

import math

import numpy as np
import pytest
from scipy.stats import norm

from moccas.acquisition import (
    OptimismSchedule,
    SoftAcqParams,
    feasibility_gate_hard,
    hard_acquisition,
    novelty,
    novelty_batch,
    p_sat,
    p_sat_batch,
    soft_acquisition,
    soft_values_batch,
    soft_values_from_ucb,
    tie_break,
)
from moccas.geometry import FeasibleRegion, OutcomeSet, ball_volume, gauss_const
from moccas.gp import KernelParams, fit_gp, posterior, ucb


def _params(m: int, r: float = 0.1, tau: float = 0.5) -> SoftAcqParams:
    return SoftAcqParams(r, r / 2.0, np.full(m, tau))


def _fd_grad(f, x, h):
    g = np.zeros_like(x)
    for i in range(x.shape[0]):
        e = np.zeros_like(x)
        e[i] = h
        g[i] = (f(x + e) - f(x - e)) / (2 * h)
    return g


def _rel_err(got: np.ndarray, ref: np.ndarray) -> float:
    # floor guards saturated instances whose true gradient is ~1e-10: there
    # central-difference cancellation noise swamps any relative comparison
    return float(np.max(np.abs(got - ref)) / max(np.max(np.abs(ref)), 1e-8))


# -- probit gate ------------------------------------------------------------


def test_p_sat_boundary_frozen():
    # every margin zero: product of Phi(0) over three objectives
    val, _ = p_sat(np.full(3, 0.5), _params(3))
    assert val == pytest.approx(0.125, abs=1e-12)


def test_p_sat_matches_cdf_product():
    rng = np.random.default_rng(61)
    params = _params(4)
    for _ in range(20):
        u = rng.uniform(0.3, 0.8, size=4)
        val, _ = p_sat(u, params)
        ref = float(np.prod(norm.cdf((u - params.thresholds) / params.lam)))
        assert val == pytest.approx(ref, rel=1e-10)


def test_p_sat_gradient_matches_fd():
    rng = np.random.default_rng(62)
    params = _params(3)
    h = 1e-6 * params.lam
    for _ in range(50):
        u = rng.uniform(0.35, 0.75, size=3)
        _, grad = p_sat(u, params)
        fd = _fd_grad(lambda z: p_sat(z, params)[0], u, h)
        assert _rel_err(grad, fd) < 1e-5


def test_p_sat_deep_infeasible_stays_finite():
    params = _params(2)
    u = np.array([-5.0, -5.0])  # margins of -110 lambda: Phi underflows
    val, grad = p_sat(u, params)
    assert val == 0.0
    assert np.all(np.isfinite(grad))


def test_p_sat_batch_matches_pointwise():
    rng = np.random.default_rng(63)
    params = _params(3)
    us = rng.uniform(0.2, 0.9, size=(25, 3))
    batch = p_sat_batch(us, params)
    for i in range(25):
        assert batch[i] == pytest.approx(p_sat(us[i], params)[0], rel=1e-12)


# -- novelty ----------------------------------------------------------------


def test_novelty_coincident_frozen():
    # m=1, r=0.5: c_1 = (4*pi*r^2)^(-1/2) = pi^(-1/2)
    prior = OutcomeSet(np.array([[0.4]]))
    val, _ = novelty(np.array([0.4]), prior, 0.5)
    assert val == pytest.approx(1.0 - math.pi**-0.5, abs=1e-12)


def test_novelty_empty_prior_is_one():
    val, grad = novelty(np.array([0.2, 0.8]), OutcomeSet.empty(2), 0.1)
    assert val == 1.0
    assert np.array_equal(grad, np.zeros(2))


def test_novelty_matches_direct_sum():
    rng = np.random.default_rng(64)
    r = 0.1
    for _ in range(20):
        m = int(rng.integers(1, 5))
        u = rng.random(m)
        prior = OutcomeSet(rng.random((3, m)))
        val, _ = novelty(u, prior, r)
        ref = 1.0 - sum(
            gauss_const(m, r) * math.exp(-float(np.sum((u - y) ** 2)) / (4 * r**2))
            for y in prior.array
        )
        assert val == pytest.approx(ref, rel=1e-6, abs=1e-12)


def test_novelty_gradient_matches_fd():
    rng = np.random.default_rng(65)
    r = 0.1
    for _ in range(20):
        u = rng.random(3)
        prior = OutcomeSet(u + rng.uniform(-0.3, 0.3, size=(3, 3)))
        _, grad = novelty(u, prior, r)
        fd = _fd_grad(lambda z: novelty(z, prior, r)[0], u, 1e-6)
        assert _rel_err(grad, fd) < 1e-5


def test_novelty_unclamped_and_monotone_in_distance():
    r = 0.1
    prior_near = OutcomeSet(np.array([[0.5, 0.5]]))
    val_near, _ = novelty(np.array([0.5, 0.5]), prior_near, r)
    assert val_near < 0.0  # c_2(0.1) ~ 7.96 > 1: unclamped by design
    last = val_near
    for dist in (0.05, 0.1, 0.2, 0.4):
        u = np.array([0.5 + dist, 0.5])
        val, _ = novelty(u, prior_near, r)
        assert val > last
        last = val


def test_novelty_batch_matches_pointwise():
    rng = np.random.default_rng(66)
    prior = OutcomeSet(rng.random((4, 2)))
    us = rng.random((15, 2))
    batch = novelty_batch(us, prior, 0.1)
    for i in range(15):
        assert batch[i] == pytest.approx(novelty(us[i], prior, 0.1)[0], rel=1e-12)


# -- soft acquisition -------------------------------------------------------


def _toy_models(rng, m=2, d=3, t=10):
    params = KernelParams(np.full(d, 0.6), 1.0, 1e-2)
    return [
        fit_gp(params, rng.random((t, d)), rng.uniform(0.3, 0.9, size=t))
        for _ in range(m)
    ]


def test_soft_acquisition_gradient_matches_fd():
    rng = np.random.default_rng(67)
    models = _toy_models(rng)
    params = _params(2, tau=0.4)
    prior = OutcomeSet(rng.uniform(0.3, 0.9, size=(4, 2)))
    beta = 3.0
    checked = 0
    for _ in range(25):
        x = rng.uniform(0.1, 0.9, size=3)
        if min(posterior(mod, x).std for mod in models) <= 1e-6:
            continue
        _, grad = soft_acquisition(models, x, beta, params, prior)
        fd = _fd_grad(
            lambda z: soft_acquisition(models, z, beta, params, prior)[0], x, 1e-5
        )
        assert _rel_err(grad, fd) < 1e-3
        checked += 1
    assert checked >= 20


def test_soft_value_decomposes():
    rng = np.random.default_rng(68)
    models = _toy_models(rng)
    params = _params(2, tau=0.4)
    prior = OutcomeSet(rng.uniform(0.3, 0.9, size=(3, 2)))
    x = rng.uniform(0.2, 0.8, size=3)
    val, _ = soft_acquisition(models, x, 2.0, params, prior)
    u, _ = ucb(models, x, 2.0)
    expected = (
        ball_volume(2, params.r)
        * p_sat(u, params)[0]
        * novelty(u, prior, params.r)[0]
    )
    assert val == pytest.approx(expected, rel=1e-10)


def test_soft_sign_follows_novelty():
    params = _params(2, tau=0.0)  # wide margins: gate ~ 1
    u_shadowed = np.array([0.5, 0.5])
    prior = OutcomeSet(u_shadowed[None, :])
    vals = soft_values_from_ucb(u_shadowed[None, :], params, prior)
    n_val, _ = novelty(u_shadowed, prior, params.r)
    assert n_val < 0
    assert vals[0] < 0


def test_soft_permutation_invariant_in_priors():
    rng = np.random.default_rng(69)
    params = _params(3)
    pts = rng.random((5, 3))
    u = rng.random((4, 3))
    fwd = soft_values_from_ucb(u, params, OutcomeSet(pts))
    rev = soft_values_from_ucb(u, params, OutcomeSet(pts[::-1].copy()))
    assert np.allclose(fwd, rev, rtol=1e-12)


def test_soft_batch_matches_pointwise():
    rng = np.random.default_rng(70)
    models = _toy_models(rng)
    params = _params(2, tau=0.4)
    prior = OutcomeSet(rng.uniform(0.3, 0.9, size=(3, 2)))
    xs = rng.uniform(0.1, 0.9, size=(12, 3))
    vals, ucb_rows = soft_values_batch(models, xs, 2.0, params, prior)
    for i in range(12):
        v, _ = soft_acquisition(models, xs[i], 2.0, params, prior)
        assert vals[i] == pytest.approx(v, rel=1e-10, abs=1e-15)
        u, _ = ucb(models, xs[i], 2.0)
        assert np.allclose(ucb_rows[i], u, rtol=1e-12)


# -- hard acquisition -------------------------------------------------------


def test_hard_gate_frozen():
    tau = np.array([0.4, 0.4])
    assert feasibility_gate_hard(np.array([0.4, 0.4]), tau) == 1
    assert feasibility_gate_hard(np.array([0.39, 0.9]), tau) == 0


def test_hard_zero_when_gate_closed():
    rng = np.random.default_rng(71)
    models = _toy_models(rng)
    params = _params(2, tau=5.0)  # thresholds far above any UCB value
    region = FeasibleRegion(params.thresholds, params.thresholds + 1.0)
    prior = OutcomeSet.empty(2)
    x = rng.random(3)
    assert hard_acquisition(models, x, 2.0, params, prior, region, 2000, 9) == 0.0


def test_hard_deterministic_per_seed():
    rng = np.random.default_rng(72)
    models = _toy_models(rng)
    params = _params(2, tau=0.2)
    region = FeasibleRegion(params.thresholds, params.thresholds + 1.0)
    prior = OutcomeSet(rng.uniform(0.3, 0.9, size=(2, 2)))
    x = rng.random(3)
    a = hard_acquisition(models, x, 2.0, params, prior, region, 4000, 33)
    b = hard_acquisition(models, x, 2.0, params, prior, region, 4000, 33)
    assert a == b


# -- schedule and ties ------------------------------------------------------


def test_optimism_schedule_anneal_and_floor():
    sched = OptimismSchedule(beta0=3.0, floor=0.25)
    assert sched.beta(1) == 3.0
    assert sched.beta(4) == pytest.approx(1.5)
    assert sched.beta(16) == pytest.approx(0.75)  # 1/sqrt(16) hits the floor
    assert sched.beta(400) == pytest.approx(0.75)  # floored thereafter


def test_tie_break_distinct_values_argmax():
    prior = OutcomeSet.empty(2)
    cands = [
        (0, 1.0, np.array([0.5, 0.5])),
        (1, 3.0, np.array([0.6, 0.6])),
        (2, 2.0, np.array([0.7, 0.7])),
    ]
    assert tie_break(cands, prior) == 1


def test_tie_break_prefers_far_from_priors():
    prior = OutcomeSet(np.array([[0.5, 0.5]]))
    cands = [
        (0, 1.0, np.array([0.55, 0.5])),
        (1, 1.0, np.array([0.9, 0.9])),
        (2, 1.0, np.array([0.6, 0.6])),
    ]
    assert tie_break(cands, prior) == 1


def test_tie_break_empty_priors_lowest_index():
    prior = OutcomeSet.empty(2)
    u = np.array([0.4, 0.4])
    cands = [(3, 2.0, u), (1, 2.0, u), (2, 2.0, u)]
    assert tie_break(cands, prior) == 1


def test_tie_break_scale_invariant():
    rng = np.random.default_rng(73)
    prior = OutcomeSet(rng.random((3, 2)))
    cands = [(i, float(v), rng.random(2)) for i, v in enumerate(rng.random(8))]
    base = tie_break(cands, prior)
    scaled = [(i, 17.0 * v, u) for i, v, u in cands]
    assert tie_break(scaled, prior) == base
