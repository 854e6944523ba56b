import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from onebitgen import (ConfigurationError, DomainError, ReluNetwork, active_branch, branch_apply,
                       encode_group_sparse, forward, group_sparse_network, new_random_gaussian)

finite = st.floats(-10, 10, allow_nan=False, allow_infinity=False)


def test_shapes_and_depth():
    net = new_random_gaussian([3, 7, 11, 5], 0)
    assert (net.input_dim, net.output_dim, net.depth) == (3, 5, 3)
    assert [w.shape for w in net.weights] == [(7, 3), (11, 7), (5, 11)]
    assert forward(net, np.ones(3)).shape == (5,)


def test_weight_variance_follows_row_count():
    net = new_random_gaussian([4, 2000, 3000], 3)
    assert np.var(net.weights[0]) == pytest.approx(1 / 2000, rel=0.05)
    assert np.var(net.weights[1]) == pytest.approx(1 / 3000, rel=0.02)


def test_seed_reproducible_and_distinct():
    a, b, c = (new_random_gaussian([2, 5, 6], s) for s in (4, 4, 5))
    assert all(np.array_equal(x, y) for x, y in zip(a.weights, b.weights))
    assert not np.array_equal(a.weights[0], c.weights[0])


def test_weights_read_only():
    net = new_random_gaussian([2, 3], 0)
    with pytest.raises(ValueError):
        net.weights[0][0, 0] = 1.0


@pytest.mark.parametrize("dims", [[2], [2, 0], []])
def test_bad_dims(dims):
    with pytest.raises(ConfigurationError):
        new_random_gaussian(dims, 0)


def test_unknown_scale_rule():
    with pytest.raises(ConfigurationError):
        new_random_gaussian([2, 3], 0, weight_scale_rule="xavier")


def test_mismatched_weights_rejected():
    with pytest.raises(ConfigurationError):
        ReluNetwork(dims=[2, 3], weights=[np.ones((2, 3))])


def test_wrong_input_shape():
    net = new_random_gaussian([2, 3], 0)
    with pytest.raises(DomainError):
        forward(net, np.ones(3))


def test_forward_matches_handwritten():
    w1 = np.array([[1.0, -1.0], [2.0, 0.5], [-1.0, -1.0]])
    w2 = np.array([[1.0, 1.0, 1.0], [-1.0, 2.0, 0.0]])
    net = ReluNetwork(dims=[2, 3, 2], weights=[w1, w2])
    x = np.array([1.0, 2.0])
    h = np.maximum(w1 @ x, 0)        # [0, 3, 0]
    assert np.array_equal(forward(net, x), np.maximum(w2 @ h, 0))
    assert np.array_equal(forward(net, x), [3.0, 6.0])


def test_zero_input_gives_zero_and_empty_masks():
    net = new_random_gaussian([3, 8, 9], 2)
    br = active_branch(net, np.zeros(3))
    assert not any(m.any() for m in br.masks)
    assert np.array_equal(forward(net, np.zeros(3)), np.zeros(9))


def test_json_round_trip(tmp_path):
    net = new_random_gaussian([2, 4, 6], 11)
    back = ReluNetwork.from_json(net.to_json())
    assert back.dims == net.dims and back.label == net.label
    assert all(np.array_equal(a, b) for a, b in zip(back.weights, net.weights))
    path = tmp_path / "net.json"
    net.save(path)
    assert set(json.loads(path.read_text())) == {"dims", "weights", "label"}
    loaded = ReluNetwork.load(path)
    x = np.array([0.3, -1.2])
    assert np.array_equal(forward(loaded, x), forward(net, x))


@settings(max_examples=60, deadline=None)
@given(x=arrays(float, 3, elements=finite), c=st.floats(0, 50, allow_nan=False))
def test_positive_homogeneity(x, c):
    net = new_random_gaussian([3, 16, 24], 5)
    lhs = forward(net, c * x)
    rhs = c * forward(net, x)
    assert np.linalg.norm(lhs - rhs) <= 1e-12 * max(np.linalg.norm(rhs), 1e-300) + 1e-300


@settings(max_examples=60, deadline=None)
@given(x=arrays(float, 3, elements=finite))
def test_branch_is_local_linearization(x):
    net = new_random_gaussian([3, 16, 24], 6)
    br = active_branch(net, x)
    g = forward(net, x)
    # the layerwise evaluation reproduces G exactly; the collapsed matrix up to rounding
    assert np.array_equal(branch_apply(br, x), g)
    assert np.allclose(br.composite @ x, g, rtol=1e-12, atol=1e-12)
    assert all(set(np.unique(m)) <= {0.0, 1.0} for m in br.masks)


def test_branch_is_linear_in_its_argument():
    net = new_random_gaussian([3, 10, 12], 8)
    br = active_branch(net, np.array([0.5, -0.2, 1.0]))
    u, v = np.array([1.0, 2.0, -3.0]), np.array([-0.5, 0.1, 0.4])
    assert np.allclose(br.apply(2 * u - v), 2 * br.apply(u) - br.apply(v), atol=1e-12)


def test_group_sparse_dims():
    net = group_sparse_network(3, 12)
    assert list(net.dims) == [4, 3 + 8, 24, 12]
    with pytest.raises(ConfigurationError):
        group_sparse_network(3, 10)


@pytest.mark.parametrize("r", [1, 2, 3])
def test_group_sparse_triangle(r):
    k, d = 2, 6
    net = group_sparse_network(k, d)
    b = d // k
    for xi, expect in ((2 * r, 0.0), (2 * r + 0.5, 0.5), (2 * r + 1, 1.0), (2 * r + 1.5, 0.5),
                       (2 * r + 2, 0.0)):
        out = forward(net, np.array([xi, 0.0, 1.0]))
        assert out[r - 1] == pytest.approx(expect, abs=1e-12)
        others = np.delete(out[:b], r - 1)
        assert np.all(others == 0)
        assert np.all(out[b:] == 0)


def _random_group_sparse(rng, k, b, zero_block_prob=0.2):
    t = np.zeros(k * b)
    for i in range(k):
        if rng.random() < zero_block_prob:
            continue
        t[i * b + rng.integers(b)] = rng.uniform(0, 1)
    return t


def test_group_sparse_round_trip():
    rng = np.random.default_rng(0)
    k, d = 4, 20
    net = group_sparse_network(k, d)
    for _ in range(50):
        t = _random_group_sparse(rng, k, d // k)
        # adding the slot offset 2r rounds v to the spacing of floats near 2r
        assert np.max(np.abs(forward(net, encode_group_sparse(t, k)) - t)) <= 8 * np.spacing(2.0 * d)
        # values on a coarse dyadic grid survive the offset unchanged
        t_dyadic = np.round(t * 2.0 ** 30) / 2.0 ** 30
        assert np.array_equal(forward(net, encode_group_sparse(t_dyadic, k)), t_dyadic)


@pytest.mark.parametrize("target,k", [
    ([0.5, 0.5, 0, 0], 2),          # two nonzeros in one block
    ([-0.1, 0, 0, 0], 2),           # negative entry
    ([1.5, 0, 0, 0], 2),            # above one
    ([0.1, 0, 0], 2),               # not divisible
])
def test_encode_rejects(target, k):
    with pytest.raises(DomainError):
        encode_group_sparse(np.array(target, dtype=float), k)
