import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from relaxnn.autodiff import Tape
from relaxnn.mlp import (
    MlpConfig,
    ParamSet,
    bind,
    forward,
    forward_with_input_derivatives,
    init_he_uniform,
    predict,
)


def _random(sizes, seed, scale=1.0):
    cfg = MlpConfig.from_sizes(sizes)
    rng = np.random.default_rng(seed)
    return ParamSet(cfg, scale * rng.standard_normal(cfg.n_params))


def _straight_line(params, x):
    # Independent re-evaluation: explicit loops over units.
    a = list(x)
    layers = params.layers()
    for li, (w, b) in enumerate(layers):
        nxt = []
        for j in range(w.shape[1]):
            s = b[j]
            for i in range(w.shape[0]):
                s += a[i] * w[i, j]
            nxt.append(math.tanh(s) if li < len(layers) - 1 else s)
        a = nxt
    return np.array(a)


def test_config_sizes_and_counts():
    cfg = MlpConfig.from_sizes([2, 128, 128, 128, 128, 1])
    assert cfg.depth == 4
    assert cfg.n_params == 2 * 128 + 128 + 3 * (128 * 128 + 128) + 128 + 1
    with pytest.raises(ValueError):
        MlpConfig.from_sizes([2, 0, 1])
    with pytest.raises(ValueError):
        MlpConfig.from_sizes([2])


def test_he_uniform_bound_and_zero_biases():
    p = init_he_uniform(MlpConfig.from_sizes([128, 64, 1]), seed=3)
    (w1, b1), (w2, b2) = p.layers()
    assert math.sqrt(6 / 128) == pytest.approx(0.216506, abs=1e-6)
    assert np.abs(w1).max() <= math.sqrt(6 / 128)
    assert np.abs(w2).max() <= math.sqrt(6 / 64)
    assert not b1.any() and not b2.any()


def test_he_uniform_statistics_fan_in_64():
    p = init_he_uniform(MlpConfig.from_sizes([64, 157, 1]), seed=1)
    w = p.layers()[0][0].ravel()
    assert w.size >= 10_000
    bound = math.sqrt(6 / 64)
    assert w.min() >= -0.3062 and w.max() <= 0.3062
    sigma = bound / math.sqrt(3) / math.sqrt(w.size)
    assert abs(w.mean()) < 3 * sigma


def test_he_uniform_deterministic():
    cfg = MlpConfig.from_sizes([2, 16, 16, 3])
    a = init_he_uniform(cfg, 7)
    b = init_he_uniform(cfg, 7)
    assert np.array_equal(a.flat, b.flat)
    assert not np.array_equal(a.flat, init_he_uniform(cfg, 8).flat)


def test_forward_zero_net_and_affine_identity():
    cfg = MlpConfig.from_sizes([2, 4, 2])
    zero = ParamSet(cfg, np.zeros(cfg.n_params))
    out = forward(zero, [0.3, -0.2], Tape())
    assert [float(o.value[0]) for o in out] == [0.0, 0.0]

    lin = ParamSet.from_layers(MlpConfig.from_sizes([2, 1]), [(np.array([[1.0], [0.0]]), [0.0])])
    assert float(forward(lin, [0.7, 5.0], Tape())[0].value[0]) == 0.7


def test_forward_matches_straight_line_evaluation():
    p = _random([2, 8, 1], 0)
    rng = np.random.default_rng(1)
    for _ in range(10):
        x = rng.uniform(-1, 1, 2)
        tape_val = forward(p, x, Tape())[0].value[0]
        assert tape_val == pytest.approx(_straight_line(p, x)[0], rel=1e-14, abs=1e-15)


def test_forward_dimension_mismatch():
    with pytest.raises(ValueError):
        forward(_random([2, 3, 1], 0), [1.0, 2.0, 3.0], Tape())


def test_predict_equals_forward():
    p = _random([3, 5, 5, 2], 4)
    x = np.random.default_rng(2).uniform(-1, 1, (7, 3))
    tape_out = np.stack([n.value for n in forward(p, x, Tape())], axis=1)
    np.testing.assert_array_equal(predict(p, x), tape_out)


def test_linear_net_input_derivatives():
    p = ParamSet.from_layers(MlpConfig.from_sizes([2, 1]), [(np.array([[2.0], [3.0]]), [0.5])])
    (trip,) = forward_with_input_derivatives(p, [[0.1, 0.2], [0.4, -1.0]], tape=Tape())
    np.testing.assert_array_equal(trip.d_dt.value, [2.0, 2.0])
    np.testing.assert_array_equal(trip.d_dx.value, [3.0, 3.0])


def test_constant_net_input_derivatives():
    cfg = MlpConfig.from_sizes([2, 4, 1])
    layers = [(np.zeros((2, 4)), np.zeros(4)), (np.zeros((4, 1)), [1.25])]
    (trip,) = forward_with_input_derivatives(ParamSet.from_layers(cfg, layers), [0.3, 0.1], tape=Tape())
    assert float(trip.value.value[0]) == 1.25
    assert float(trip.d_dt.value[0]) == 0.0 and float(trip.d_dx.value[0]) == 0.0


def test_requested_channels_only():
    p = _random([3, 4, 2], 0)
    trips = forward_with_input_derivatives(p, [0.1, 0.2, 0.3], wrt=(1,), tape=Tape())
    assert all(set(t.derivs) == {1} for t in trips)
    assert trips[0].d_dt is None
    with pytest.raises(ValueError):
        forward_with_input_derivatives(p, [0.1, 0.2, 0.3], wrt=(3,), tape=Tape())


def test_value_channel_bit_identical_to_forward():
    p = _random([2, 6, 6, 3], 5)
    x = np.random.default_rng(0).uniform(-1, 1, (9, 2))
    trips = forward_with_input_derivatives(p, x, tape=Tape())
    for trip, node in zip(trips, forward(p, x, Tape())):
        np.testing.assert_array_equal(trip.value.value, node.value)


def test_derivatives_match_central_differences_16x16():
    p = _random([2, 16, 16, 1], 11, scale=0.5)
    rng = np.random.default_rng(3)
    h = 1e-5
    for _ in range(10):
        x = rng.uniform(-1, 1, 2)
        (trip,) = forward_with_input_derivatives(p, x, tape=Tape())
        for k, node in ((0, trip.d_dt), (1, trip.d_dx)):
            e = np.zeros(2)
            e[k] = h
            num = (predict(p, x + e) - predict(p, x - e))[0, 0] / (2 * h)
            assert float(node.value[0]) == pytest.approx(num, rel=1e-6, abs=1e-9)


def test_parameter_gradient_of_input_derivative_matches_fd():
    p = _random([2, 5, 5, 1], 2, scale=0.7)
    x = np.array([[0.3, -0.4], [0.1, 0.9]])

    def dx_sum(flat):
        tape = Tape()
        net = bind(ParamSet(p.config, flat), tape)
        (trip,) = forward_with_input_derivatives(net, x)
        return tape, net, trip.d_dx.sum()

    tape, net, root = dx_sum(p.flat)
    g = net.flat_gradient(tape.backward(root))
    h = 1e-6
    num = np.empty_like(g)
    for i in range(g.size):
        e = np.zeros(g.size)
        e[i] = h
        num[i] = (float(dx_sum(p.flat + e)[2]) - float(dx_sum(p.flat - e)[2])) / (2 * h)
    assert np.abs(g - num).max() <= 1e-5 * np.abs(num).max()


def test_tanh_derivative_identity_at_hidden_layer():
    # One hidden layer: d(hidden)/dx = (1 - a^2) * W[1].
    p = _random([2, 4, 1], 9)
    (w1, b1), (w2, _) = p.layers()
    x = np.array([0.2, -0.3])
    a = np.tanh(x @ w1 + b1)
    expected = ((1 - a * a) * w1[1]) @ w2[:, 0]
    (trip,) = forward_with_input_derivatives(p, x, tape=Tape())
    assert float(trip.d_dx.value[0]) == pytest.approx(expected, rel=1e-14)


@settings(max_examples=40, deadline=None)
@given(
    st.lists(st.integers(1, 6), min_size=2, max_size=5),
    st.integers(0, 2**31),
)
def test_checkpoint_roundtrip(sizes, seed):
    p = _random(sizes, seed)
    q = ParamSet.from_bytes(p.to_bytes())
    assert q.config == p.config
    assert np.array_equal(q.flat, p.flat)
    assert q.to_bytes() == p.to_bytes()


def test_checkpoint_header_validation(tmp_path):
    p = _random([2, 3, 1], 0)
    blob = p.to_bytes()
    with pytest.raises(ValueError):
        ParamSet.from_bytes(b"XXXX" + blob[4:])
    bad_version = blob[:4] + (2).to_bytes(4, "little") + blob[8:]
    with pytest.raises(ValueError):
        ParamSet.from_bytes(bad_version)
    with pytest.raises(ValueError):
        ParamSet.from_bytes(blob[:-8])
    path = tmp_path / "p.bin"
    p.save(path)
    assert np.array_equal(ParamSet.load(path).flat, p.flat)
    assert path.read_bytes()[:4] == b"RXNP"


def test_param_shape_checked():
    with pytest.raises(ValueError):
        ParamSet(MlpConfig.from_sizes([2, 3, 1]), np.zeros(5))
