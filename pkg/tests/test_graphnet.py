import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from oracles import central_diff, naive_sage, rel_error
from swarm_alloc.graphnet import (
    SageParams, build_observation, build_observations, neighbor_sums, obs_dim, sage_backward,
    sage_embed, sage_embed_backward, sage_forward, sage_forward_all,
)
from swarm_alloc.pathing import build_cost_matrix
from swarm_alloc.world import init_world, step

from conftest import scenario


def test_idle_agent_all_waiting():
    w = init_world(scenario(slots=3), 0)
    x = build_observation(w, 0, build_cost_matrix(w))
    assert len(x) == obs_dim(3) == 7
    assert x[0] == -1.0 and np.all(x[4:] == 1.0)
    assert np.all((-1 <= x[1:4]) & (x[1:4] <= 1))


def test_assigned_agent_status_positive():
    w = init_world(scenario(dims=(9, 9, 1), ground=1, aerial=0, slots=1, obstacle_density=0.0), 0)
    w.agents[0].position = (0, 0, 0)
    w.tasks[0].location = (8, 8, 0)
    w._fields.clear()
    step(w, [1])
    assert build_observation(w, 0, build_cost_matrix(w))[0] == 1.0


def test_agent_on_task_cost_entry():
    w = init_world(scenario(slots=2), 0)
    w.agents[1].position = w.tasks[1].location
    x = build_observation(w, 1, build_cost_matrix(w))
    assert x[1 + 1] == -1.0


def test_stacked_observations_match_single():
    w = init_world(scenario(dims=(6, 6, 2), ground=2, aerial=2, slots=3), 2)
    cm = build_cost_matrix(w)
    X = build_observations(w, cm)
    for i in range(4):
        assert np.array_equal(X[i], build_observation(w, i, cm))


def test_zero_params_zero_embedding():
    X = np.random.default_rng(0).uniform(-1, 1, (3, 5))
    z = sage_forward(X, 1, SageParams.zeros(2))
    assert np.array_equal(z, np.zeros(6))


def test_single_agent_has_no_neighbor_term(rng):
    p = SageParams.init(rng, 2)
    x = rng.uniform(-1, 1, (1, 5))
    assert np.allclose(sage_forward(x, 0, p), np.tanh(p.W @ x[0]), atol=0, rtol=0)


def test_forward_matches_double_loop_oracle(rng):
    p = SageParams(W=rng.normal(size=(6, 5)), W_prime=rng.normal(size=(6, 5)))
    X = rng.uniform(-1, 1, (3, 5))
    Z, _ = sage_forward_all(X, p)
    for i in range(3):
        ref = naive_sage(X, i, p.W, p.W_prime)
        assert np.max(np.abs(sage_forward(X, i, p) - ref)) <= 1e-12
        assert np.max(np.abs(Z[i] - ref)) <= 1e-12


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), n=st.integers(2, 6))
def test_permutation_equivariance(seed, n):
    rng = np.random.default_rng(seed)
    p = SageParams.init(rng, 3)
    X = rng.uniform(-1, 1, (n, 7))
    z0 = sage_forward(X, 0, p)
    perm = np.concatenate([[0], 1 + rng.permutation(n - 1)])
    assert np.allclose(sage_forward(X[perm], 0, p), z0, rtol=0, atol=1e-14)


@given(seed=st.integers(0, 2**32 - 1), scale=st.floats(0.1, 1e3))
def test_embedding_bounded(seed, scale):
    rng = np.random.default_rng(seed)
    p = SageParams(W=rng.normal(size=(6, 5)), W_prime=rng.normal(size=(6, 5)))
    Z, _ = sage_forward_all(rng.uniform(-1, 1, (4, 5)) * scale, p)
    assert np.all(np.abs(Z) <= 1)


def test_zero_upstream_zero_gradients(rng):
    p = SageParams.init(rng, 2)
    Z, cache = sage_forward_all(rng.uniform(-1, 1, (3, 5)), p)
    dW, dWp, dX = sage_backward(np.zeros_like(Z), cache, p)
    assert not dW.any() and not dWp.any() and not dX.any()


def _probe_check(rng, n, m):
    p = SageParams(W=rng.normal(scale=0.5, size=(6, 1 + 2 * m)),
                   W_prime=rng.normal(scale=0.5, size=(6, 1 + 2 * m)))
    X = rng.uniform(-1, 1, (n, 1 + 2 * m))
    probe = rng.normal(size=(n, 6))

    def loss():
        return float((sage_forward_all(X, p)[0] * probe).sum())

    Z, cache = sage_forward_all(X, p)
    dW, dWp, dX = sage_backward(probe, cache, p)
    return (rel_error(dW, central_diff(loss, p.W)), rel_error(dWp, central_diff(loss, p.W_prime)),
            rel_error(dX, central_diff(loss, X)))


def test_single_agent_gradient_matches_finite_differences(rng):
    errs = _probe_check(rng, 1, 2)
    assert errs[0] < 1e-4 and errs[2] < 1e-4


def test_gradients_on_50_random_instances():
    rng = np.random.default_rng(99)
    for _ in range(50):
        errs = _probe_check(rng, int(rng.integers(1, 6)), int(rng.integers(1, 5)))
        assert max(errs) < 1e-4, errs


def test_identical_neighbors_get_identical_input_gradients(rng):
    p = SageParams.init(rng, 2)
    x = rng.uniform(-1, 1, 5)
    X = np.vstack([rng.uniform(-1, 1, 5), x, x, x])
    probe = np.zeros((4, 6))
    probe[0] = rng.normal(size=6)
    _, cache = sage_forward_all(X, p)
    _, _, dX = sage_backward(probe, cache, p)
    assert np.allclose(dX[1], dX[2]) and np.allclose(dX[2], dX[3])


def test_local_only_variant_ignores_neighbors(rng):
    p = SageParams.init(rng, 2)
    xs, xn = rng.uniform(-1, 1, (4, 5)), rng.uniform(-1, 1, (4, 5))
    z, cache = sage_embed(xs, xn, p, use_neighbors=False)
    assert np.allclose(z, np.tanh(xs @ p.W.T))
    _, dWp, _, dxn = sage_embed_backward(np.ones_like(z), cache, p, use_neighbors=False)
    assert not dWp.any() and not dxn.any()


def test_neighbor_sums():
    X = np.arange(12.0).reshape(3, 4)
    S = neighbor_sums(X)
    assert np.array_equal(S[1], X[0] + X[2])
