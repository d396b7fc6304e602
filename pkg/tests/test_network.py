import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from derhamnet.calculus import identity_net, max_net, min_net, times_step_net
from derhamnet.network import (BISU, ID, RELU, Layer, Network, NetworkError, deserialize, evaluate, metrics,
                               serialize)


def test_identity_net_depth_three():
    np.testing.assert_array_equal(evaluate(identity_net(2, 3), [1.0, -2.0]), [1.0, -2.0])


def test_max_of_two():
    assert evaluate(max_net(2), [3.0, 5.0])[0] == 5.0


def test_single_bisu_neuron_at_zero():
    net = Network(1, (Layer.from_dense([[1.0]], [0.0], BISU), Layer.from_dense([[1.0]], [0.0], ID)))
    assert evaluate(net, [0.0])[0] == 0.0
    assert evaluate(net, [1e-300])[0] == 1.0
    assert evaluate(net, [-3.0])[0] == 0.0


def test_metrics_of_gadgets():
    m = metrics(times_step_net(1, 1.0))
    assert (m.depth, m.size) == (2, 12)
    m = metrics(min_net(2))
    assert (m.depth, m.size) == (2, 7)
    for d, L in [(1, 2), (3, 4), (5, 7)]:
        assert metrics(identity_net(d, L)).size <= 2 * d * L


def test_metrics_counts_weights_and_biases():
    layer = Layer.from_dense([[1.0, 0.0], [0.0, -2.0]], [0.0, 3.0], RELU)
    out = Layer.from_dense([[1.0, 1.0]], [0.0], ID)
    m = metrics(Network(2, (layer, out)))
    assert m.per_layer == (3, 2) and m.size == 5 and m.size_in == 3 and m.size_out == 2


def test_dimension_mismatch():
    with pytest.raises(NetworkError):
        evaluate(identity_net(2, 2), [1.0, 2.0, 3.0])
    with pytest.raises(NetworkError):
        Network(3, (Layer.from_dense(np.ones((1, 2)), [0.0], ID),))


def test_last_layer_must_be_identity():
    with pytest.raises(NetworkError):
        Network(1, (Layer.from_dense([[1.0]], [0.0], RELU),))


def test_layer_rejects_bad_triplets():
    with pytest.raises(NetworkError):
        Layer(1, 2, [0, 0], [1, 0], [1.0, 1.0], [0.0], ID)  # unsorted
    with pytest.raises(NetworkError):
        Layer(1, 2, [0], [0], [0.0], [0.0], ID)  # explicit zero
    with pytest.raises(NetworkError):
        Layer(1, 2, [0], [5], [1.0], [0.0], ID)  # out of range


def test_batch_matches_pointwise():
    net = max_net(5)
    x = np.random.default_rng(1).normal(size=(30, 5))
    batch = evaluate(net, x)
    for i in range(len(x)):
        assert evaluate(net, x[i]).tobytes() == batch[i].tobytes()


def test_hand_written_affine_net():
    text = json.dumps({"input_dim": 2, "layers": [{
        "rows": 2, "cols": 2, "triplets": [[0, 0, 2.0], [0, 1, -1.0], [1, 1, 0.5]],
        "bias": [1.0, "-0x1.0p-1"], "act": ["id", "id"]}]})
    net = deserialize(text)
    A, b = np.array([[2.0, -1.0], [0.0, 0.5]]), np.array([1.0, -0.5])
    x = np.random.default_rng(2).normal(size=(20, 2))
    np.testing.assert_allclose(evaluate(net, x), x @ A.T + b, rtol=0, atol=1e-15)


@pytest.mark.parametrize("blob", [b"", b"{", b"[1, 2]", b'{"input_dim": 1}',
                                  b'{"input_dim": 1, "layers": [{"rows": 1}]}'])
def test_malformed_input(blob):
    with pytest.raises(NetworkError):
        deserialize(blob)


def test_truncated_file():
    blob = serialize(max_net(4))
    with pytest.raises(NetworkError):
        deserialize(blob[: len(blob) // 2])


def _random_net(rng, dims, density):
    layers = []
    for k in range(len(dims) - 1):
        mat = rng.normal(size=(dims[k + 1], dims[k])) * (rng.random((dims[k + 1], dims[k])) < density)
        last = k == len(dims) - 2
        acts = ID if last else rng.choice([ID.value, RELU.value, BISU.value], size=dims[k + 1])
        layers.append(Layer.from_dense(mat, rng.normal(size=dims[k + 1]), acts))
    return Network(dims[0], tuple(layers))


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32 - 1), st.lists(st.integers(1, 6), min_size=2, max_size=5), st.floats(0.1, 1.0))
def test_roundtrip_is_bitwise(seed, dims, density):
    rng = np.random.default_rng(seed)
    net = _random_net(rng, dims, density)
    blob = serialize(net)
    back = deserialize(blob)
    assert serialize(back) == blob
    x = rng.normal(size=(25, dims[0])) * 10
    assert evaluate(back, x).tobytes() == evaluate(net, x).tobytes()


@settings(max_examples=40, deadline=None)
@given(arrays(np.float64, (4, 3), elements=st.floats(-1e6, 1e6)), arrays(np.float64, 4, elements=st.floats(-1e6, 1e6)))
def test_from_dense_matches_matvec(mat, bias):
    net = Network(3, (Layer.from_dense(mat, bias, ID),))
    x = np.array([0.5, -1.5, 2.0])
    np.testing.assert_allclose(evaluate(net, x), mat @ x + bias, rtol=1e-12, atol=1e-6)


def test_chunked_evaluation_matches_single_pass(monkeypatch):
    import derhamnet.network as network

    net = _random_net(np.random.default_rng(3), [3, 40, 40, 2], 0.5)
    x = np.random.default_rng(4).normal(size=(200, 3))
    full = evaluate(net, x)
    monkeypatch.setattr(network, "_CHUNK_ENTRIES", 100)
    assert evaluate(net, x).tobytes() == full.tobytes()
