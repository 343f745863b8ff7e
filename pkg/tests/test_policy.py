import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from oracles import central_diff, naive_mlp, naive_softmax, rel_error
from swarm_alloc.policy import (
    ActionDistribution, Mlp, MlpParams, dist_entropy, entropy_grad, log_prob_grad, log_softmax,
    mlp_backward, mlp_forward, policy_backward, policy_forward, sample_action, softmax,
    value_backward, value_forward,
)


def dist_of(probs):
    p = np.asarray(probs, dtype=float)
    with np.errstate(divide="ignore"):
        return ActionDistribution(probs=p, logits=np.log(p))


def test_zero_network_uniform_policy_and_zero_value():
    params = MlpParams.zeros(6, 4)
    z = np.random.default_rng(0).uniform(-1, 1, 6)
    d = policy_forward(z, params)
    assert np.allclose(d.probs, 0.25, rtol=0, atol=1e-15)
    assert value_forward(z, params) == 0.0


def test_value_bias_passthrough():
    params = MlpParams.zeros(6, 4)
    params.value.biases[-1][0] = 2.5
    assert value_forward(np.ones(6), params) == 2.5


def test_softmax_shift_invariance():
    logits = np.array([0.3, -1.2, 2.0, 0.0])
    assert np.allclose(softmax(logits + 17.0), softmax(logits), rtol=0, atol=1e-15)
    assert np.argmax(softmax(logits + 17.0)) == np.argmax(softmax(logits))


@given(st.lists(st.floats(-50, 50), min_size=2, max_size=12))
def test_softmax_sums_to_one(logits):
    p = softmax(np.array(logits))
    assert abs(p.sum() - 1) <= 1e-9 and np.all(p > 0)


def test_policy_and_value_match_loop_oracle(rng):
    params = MlpParams.init(rng, 6, 4, hidden=16)
    params.policy.weights[-1] *= 100     # undo the small output init so logits differ
    for b in params.policy.biases + params.value.biases:
        b[:] = rng.normal(size=b.shape)
    z = rng.uniform(-1, 1, 6)
    ref_logits = naive_mlp(z, params.policy.weights, params.policy.biases)
    d = policy_forward(z, params)
    assert np.max(np.abs(d.logits - ref_logits)) <= 1e-12
    assert np.max(np.abs(d.probs - naive_softmax(ref_logits))) <= 1e-12
    ref_v = naive_mlp(z, params.value.weights, params.value.biases)[0]
    assert abs(value_forward(z, params) - ref_v) <= 1e-12


def test_degenerate_distribution_sampling():
    d = dist_of([0.0, 0.0, 1.0, 0.0])
    rng = np.random.default_rng(0)
    for _ in range(100):
        a, lp = sample_action(d, rng)
        assert a == 2 and lp == 0.0


def test_uniform_sampling_frequencies():
    d = dist_of([0.25] * 4)
    rng = np.random.default_rng(42)
    n = 100_000
    counts = np.bincount([sample_action(d, rng)[0] for _ in range(n)], minlength=4)
    sigma = np.sqrt(n * 0.25 * 0.75)
    assert np.all(np.abs(counts - n / 4) <= 3 * sigma)


def test_sampling_deterministic_per_seed():
    d = dist_of([0.1, 0.2, 0.3, 0.4])
    a = [sample_action(d, np.random.default_rng(3))[0] for _ in range(1)]
    r1, r2 = np.random.default_rng(8), np.random.default_rng(8)
    assert [sample_action(d, r1)[0] for _ in range(50)] == [sample_action(d, r2)[0] for _ in range(50)]


@pytest.mark.parametrize("probs,expected", [
    ([0.25] * 4, np.log(4)), ([0, 1, 0, 0], 0.0), ([0.5, 0.5, 0, 0], np.log(2))])
def test_entropy_closed_forms(probs, expected):
    assert dist_entropy(dist_of(probs)) == pytest.approx(expected, abs=1e-12)


def test_log_prob_gradient_closed_form(rng):
    logits = rng.normal(size=5)
    d = ActionDistribution(probs=softmax(logits), logits=logits)
    g = log_prob_grad(d, 3)
    fd = central_diff(lambda: float(log_softmax(logits)[3]), logits)
    assert rel_error(g, fd) < 1e-6
    onehot = np.eye(5)[3]
    assert np.allclose(g, onehot - d.probs)


def test_entropy_gradient_matches_fd(rng):
    logits = rng.normal(size=6)
    fd = central_diff(lambda: float(-(softmax(logits) * log_softmax(logits)).sum()), logits)
    assert rel_error(entropy_grad(logits), fd) < 1e-6


def test_zero_upstream_zero_grads(rng):
    params = MlpParams.init(rng, 6, 4, hidden=8)
    z = rng.uniform(-1, 1, (3, 6))
    _, acts = mlp_forward(params.policy, z)
    dWs, dbs, dz = policy_backward(acts, np.zeros((3, 4)), params)
    assert all(not g.any() for g in dWs + dbs) and not dz.any()


def _fd_check_net(rng, net: Mlp, n_out):
    z = rng.uniform(-1, 1, (4, net.weights[0].shape[0]))
    probe = rng.normal(size=(4, n_out))

    def loss():
        return float((mlp_forward(net, z)[0] * probe).sum())

    _, acts = mlp_forward(net, z)
    dWs, dbs, dz = mlp_backward(net, acts, probe)
    errs = [rel_error(g, central_diff(loss, W)) for g, W in zip(dWs, net.weights)]
    errs += [rel_error(g, central_diff(loss, b)) for g, b in zip(dbs, net.biases)]
    errs.append(rel_error(dz, central_diff(loss, z)))
    return max(errs)


def test_policy_and_value_gradients_on_50_instances():
    rng = np.random.default_rng(5)
    for _ in range(50):
        m = int(rng.integers(1, 5))
        params = MlpParams.init(rng, 6, m + 1, hidden=12)
        for b in params.policy.biases + params.value.biases:
            b[:] = rng.normal(scale=0.1, size=b.shape)
        assert _fd_check_net(rng, params.policy, m + 1) < 1e-4
        assert _fd_check_net(rng, params.value, 1) < 1e-4


def test_value_backward_shapes(rng):
    params = MlpParams.init(rng, 6, 3, hidden=8)
    z = rng.uniform(-1, 1, (5, 6))
    _, acts = mlp_forward(params.value, z)
    dWs, dbs, dz = value_backward(acts, np.ones(5), params)
    assert [g.shape for g in dWs] == [W.shape for W in params.value.weights]
    assert dz.shape == z.shape


def test_initial_policy_near_uniform(rng):
    params = MlpParams.init(rng, 6, 31)
    d = policy_forward(rng.uniform(-1, 1, 6), params)
    assert np.all(np.abs(d.probs - 1 / 31) < 1e-3)
