import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cfcert.models import (
    Layer,
    LogisticModel,
    ReluNetwork,
    classify_batch,
    classify_binary,
    classify_multi,
    flatten,
    forward,
    forward_batch,
    load_model,
    model_from_dict,
    model_to_dict,
    p_distance,
    save_model,
    unflatten,
)


def test_forward_logistic_example(logistic_ref):
    assert forward(logistic_ref, [0.7, 0.5])[0] == pytest.approx(-0.2)
    assert classify_binary(logistic_ref, [0.7, 0.5]) == 0


def test_forward_network_example(binary_net):
    assert forward(binary_net, [1, 2])[0] == pytest.approx(-1.0)
    assert classify_binary(binary_net, [1, 2]) == 0
    assert forward(binary_net, [2.1, 2])[0] == pytest.approx(0.1)
    assert classify_binary(binary_net, [2.1, 2]) == 1


def test_boundary_logit_is_class_one(logistic_ref):
    assert forward(logistic_ref, [0.7, 0.7])[0] == pytest.approx(0.0)
    assert classify_binary(logistic_ref, [0.7, 0.7]) == 1


def test_classify_multi_examples(multi_net):
    assert np.allclose(forward(multi_net, [2, 2]), [0.0, 1.0, 0.0])
    assert classify_multi(multi_net, [2, 2]) == 2
    assert np.allclose(forward(multi_net, [3, 1]), [2.0, 0.5, -2.0])
    assert classify_multi(multi_net, [3, 1]) == 1


def test_classify_multi_tie_breaks_low(multi_net):
    assert classify_multi(multi_net, [0, 0]) == 1  # all logits zero


def test_classify_multi_matches_argmax(multi_net):
    rng = np.random.default_rng(0)
    for _ in range(50):
        x = rng.uniform(-2, 3, 2)
        assert classify_multi(multi_net, x) == int(np.argmax(forward(multi_net, x))) + 1


def test_classify_binary_rejects_multi_output(multi_net):
    with pytest.raises(ValueError):
        classify_binary(multi_net, [0, 0])


def test_dimension_mismatch_rejected(logistic_ref):
    with pytest.raises(ValueError, match="length"):
        forward(logistic_ref, [1.0, 2.0, 3.0])


def test_non_finite_input_rejected(logistic_ref):
    with pytest.raises(ValueError):
        forward(logistic_ref, [np.nan, 0.0])


def test_p_distance_paper_example():
    assert p_distance([-1.0, 1.0], [0.8, 1.0], "inf") == 1.8


def test_p_distance_basics():
    assert p_distance([1.0, 2.0], [1.0, 2.0], 2) == 0.0
    assert p_distance([1.0, 2.0], [0.0, 4.0], 1) == 3.0
    with pytest.raises(ValueError):
        p_distance([1.0], [1.0, 2.0], 1)


@given(
    st.lists(st.floats(-5, 5), min_size=1, max_size=6),
    st.lists(st.floats(-5, 5), min_size=1, max_size=6),
    st.sampled_from([1, 2, "inf"]),
)
@settings(max_examples=60, deadline=None)
def test_p_distance_symmetry(a, b, p):
    n = min(len(a), len(b))
    a, b = a[:n], b[:n]
    assert p_distance(a, b, p) == pytest.approx(p_distance(b, a, p), abs=1e-12)


def test_p_distance_triangle_inequality():
    rng = np.random.default_rng(1)
    for p in (1, 2, "inf"):
        for _ in range(50):
            a, b, c = rng.normal(0, 2, (3, 5))
            assert p_distance(a, c, p) <= p_distance(a, b, p) + p_distance(b, c, p) + 1e-12


def test_flatten_example_network_with_zero_biases():
    # Column-wise vectorisation of each weight matrix, bias after.
    net = ReluNetwork(
        layers=(
            Layer(weights=[[1.0, 0.0], [0.0, 1.0]], bias=[0.0, 0.0]),
            Layer(weights=[[1.0, -1.0]], bias=[0.0]),
        )
    )
    assert np.array_equal(flatten(net), [1, 0, 0, 1, 0, 0, 1, -1, 0])


def test_flatten_column_major_order():
    net = ReluNetwork(layers=(Layer(weights=[[1.0, 2.0], [3.0, 4.0]]),))
    assert np.array_equal(flatten(net), [1, 3, 2, 4])


@given(st.integers(0, 2**32 - 1))
@settings(max_examples=30, deadline=None)
def test_flatten_unflatten_round_trip(seed):
    rng = np.random.default_rng(seed)
    net = ReluNetwork(
        layers=(
            Layer(weights=rng.normal(size=(3, 2)), bias=rng.normal(size=3)),
            Layer(weights=rng.normal(size=(2, 3)), bias=None),
        )
    )
    theta = flatten(net)
    again = flatten(unflatten(net, theta))
    assert np.array_equal(theta, again)


def test_unflatten_wrong_length(binary_net):
    with pytest.raises(ValueError, match="length"):
        unflatten(binary_net, np.zeros(99))


def test_unflatten_round_trip_logistic():
    m = LogisticModel(weights=[1.0, -2.0], bias=0.5)
    theta = flatten(m)
    assert theta.tolist() == [1.0, -2.0, 0.5]
    m2 = unflatten(m, theta * 2)
    assert m2.bias == 1.0 and m2.weights.tolist() == [2.0, -4.0]


def test_forward_batch_matches_pointwise(multi_net):
    rng = np.random.default_rng(2)
    X = rng.uniform(-1, 3, (20, 2))
    Z = forward_batch(multi_net, X)
    for i in range(20):
        assert np.allclose(Z[i], forward(multi_net, X[i]))
    assert np.array_equal(
        classify_batch(multi_net, X), [classify_multi(multi_net, x) for x in X]
    )


def test_layer_validation():
    with pytest.raises(ValueError):
        Layer(weights=[[1.0]], bias=[1.0, 2.0])
    with pytest.raises(ValueError):
        ReluNetwork(layers=(Layer(weights=[[1.0, 2.0]]), Layer(weights=[[1.0, 2.0]])))
    with pytest.raises(ValueError):
        LogisticModel(weights=[np.inf])


def test_model_json_round_trip(tmp_path, binary_net, logistic_ref):
    for model in (binary_net, logistic_ref, LogisticModel(weights=[0.1, 0.2], bias=-0.3)):
        path = tmp_path / "m.json"
        save_model(model, path)
        back = load_model(path)
        assert np.array_equal(flatten(model), flatten(back))
        assert type(back) is type(model)


def test_model_dict_rejects_bad_type():
    with pytest.raises(ValueError, match="model_type"):
        model_from_dict({"model_type": "tree", "layers": [{"weights": [[1]]}]})
    doc = model_to_dict(LogisticModel(weights=[1.0]))
    doc["input_dim"] = 7
    with pytest.raises(ValueError, match="input_dim"):
        model_from_dict(doc)
