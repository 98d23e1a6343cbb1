# tests/test_models/test_cgru.py
import numpy as np
import pytest

from exceptions import EmptyInputError, MissingForwardStateError, ShapeError
from models import CGruState, CGruWeights, ConvGRU, FeatureMap, gates, step, zero_state
from models.cgru import KERNELS
from tests.gradient_utils import numerical_gradient, relative_error


def _sigmoid(v):
    return 1.0 / (1.0 + np.exp(-v))


def _scalar_weights():
    """D=1 with every 3x3 kernel a single centre tap of 1, biases 0."""
    w = CGruWeights.constant(1, kernel=0.0, dtype=np.float64)
    for name in KERNELS:
        getattr(w, name).value[0, 0, 1, 1] = 1.0
    return w


def _scalar(value):
    return np.full((1, 1, 1), value, dtype=np.float64)


def test_zero_weights_half_gates(rng):
    w = CGruWeights.constant(2, dtype=np.float64)
    g = gates(CGruState(rng.normal(size=(2, 3, 3))), FeatureMap(rng.normal(size=(2, 3, 3))), w)
    assert np.all(g.r == 0.5)
    assert np.all(g.z == 0.5)


def test_update_gate_saturates():
    w = CGruWeights.constant(1, b_z=20.0, dtype=np.float64)
    g = gates(CGruState(_scalar(0.3)), FeatureMap(_scalar(0.7)), w)
    assert np.all(np.abs(g.z - 1.0) < 1e-8)


def test_scalar_gates_and_step():
    w = _scalar_weights()
    h_prev, x = CGruState(_scalar(0.5)), FeatureMap(_scalar(0.25))

    g = gates(h_prev, x, w)
    expected_gate = _sigmoid(0.75)
    assert g.r[0, 0, 0] == pytest.approx(expected_gate, abs=1e-12)
    assert g.z[0, 0, 0] == pytest.approx(0.6792, abs=1e-4)

    candidate = np.tanh(expected_gate * 0.5 + 0.25)
    expected_h = (1 - expected_gate) * 0.5 + expected_gate * candidate
    h = step(h_prev, x, w)
    assert h.h[0, 0, 0] == pytest.approx(expected_h, abs=1e-12)
    assert h.h[0, 0, 0] == pytest.approx(0.5202, abs=1e-4)
    assert h.t == 1


def test_closed_update_gate_keeps_state(rng):
    w = CGruWeights.constant(2, b_z=-20.0, dtype=np.float64)
    h_prev = CGruState(rng.uniform(-0.9, 0.9, size=(2, 4, 4)))
    h = step(h_prev, FeatureMap(rng.normal(size=(2, 4, 4))), w)
    assert np.abs(h.h - h_prev.h).max() < 1e-8


def test_open_update_gate_with_closed_reset_clears_state(rng):
    w = CGruWeights.constant(2, b_z=20.0, b_r=-20.0, dtype=np.float64)
    h = step(CGruState(rng.uniform(-0.9, 0.9, size=(2, 4, 4))), FeatureMap(rng.normal(size=(2, 4, 4))), w)
    assert np.abs(h.h).max() < 1e-8


def test_shape_mismatch():
    w = CGruWeights.constant(2)
    with pytest.raises(ShapeError):
        step(CGruState(np.zeros((2, 3, 3))), FeatureMap(np.zeros((2, 4, 4))), w)


def test_unroll_matches_manual_steps(rng):
    w = CGruWeights.init(2, rng=rng, dtype=np.float64)
    features = [FeatureMap(rng.normal(size=(2, 4, 4))) for _ in range(3)]
    states = ConvGRU(w).unroll(features)
    manual = zero_state((2, 4, 4), np.float64)
    for state, x in zip(states, features):
        manual = step(manual, x, w)
        np.testing.assert_array_equal(state.h, manual.h)
    assert [s.t for s in states] == [1, 2, 3]


def test_unroll_with_closed_update_gate_keeps_h0(rng):
    w = CGruWeights.constant(2, b_z=-20.0, dtype=np.float64)
    h0 = CGruState(np.full((2, 3, 3), 0.25))
    x = FeatureMap(np.ones((2, 3, 3)))
    for state in ConvGRU(w).unroll([x] * 4, h0=h0):
        np.testing.assert_allclose(state.h, h0.h, atol=1e-8)


def test_unroll_empty():
    with pytest.raises(EmptyInputError):
        ConvGRU(CGruWeights.constant(1)).unroll([])


def test_state_stays_bounded(rng):
    w = CGruWeights.init(2, rng=rng, dtype=np.float64)
    features = [FeatureMap(rng.normal(scale=2.0, size=(2, 4, 4))) for _ in range(10)]
    for state in ConvGRU(w).unroll(features):
        assert np.abs(state.h).max() < 1
        g = gates(state, features[0], w)
        assert np.all((g.r > 0) & (g.r < 1) & (g.z > 0) & (g.z < 1))


def test_bptt_requires_training_unroll(rng):
    gru = ConvGRU(CGruWeights.constant(1))
    with pytest.raises(MissingForwardStateError):
        gru.bptt([np.zeros((1, 1, 1))])
    gru.unroll([FeatureMap(np.zeros((1, 1, 1)))])
    with pytest.raises(MissingForwardStateError):
        gru.bptt([np.zeros((1, 1, 1))])


def test_bptt_zero_upstream(rng):
    gru = ConvGRU(CGruWeights.init(2, rng=rng, dtype=np.float64))
    features = [FeatureMap(rng.normal(size=(2, 3, 3))) for _ in range(2)]
    gru.unroll(features, train=True)
    dx = gru.bptt([np.zeros((2, 3, 3))] * 2)
    assert all(not g.any() for g in dx)
    assert all(not p.grad.any() for p in gru.parameters().values())


def test_bptt_matches_finite_differences(rng, float64):
    gru = ConvGRU(CGruWeights.init(2, rng=rng, dtype=np.float64))
    xs = [rng.normal(size=(2, 4, 4)) for _ in range(3)]
    upstream = [rng.normal(size=(2, 4, 4)) for _ in range(3)]

    gru.unroll([FeatureMap(x) for x in xs], train=True)
    dx = gru.bptt(upstream)

    def objective():
        states = gru.unroll([FeatureMap(x) for x in xs])
        return sum(float((s.h * g).sum()) for s, g in zip(states, upstream))

    for t, x in enumerate(xs):
        assert relative_error(dx[t], numerical_gradient(objective, x)) <= 1e-4, f"x[{t}]"
    for name, param in gru.parameters().items():
        assert relative_error(param.grad, numerical_gradient(objective, param.value)) <= 1e-4, name


def test_bptt_scalar_chain_rule():
    """K=2 on the scalar configuration with dLoss/dh only at the last step."""
    w = _scalar_weights()
    gru = ConvGRU(w)
    xs = [0.25, -0.5]
    gru.unroll([FeatureMap(_scalar(x)) for x in xs], train=True)
    gru.bptt([_scalar(0.0), _scalar(1.0)])

    # hand chain rule for d h2 / d b (candidate bias), summed over both steps
    def forward(h, x):
        z = _sigmoid(h + x)
        r = _sigmoid(h + x)
        c = np.tanh(r * h + x)
        return (1 - z) * h + z * c, z, r, c

    h1, z1, r1, c1 = forward(0.0, xs[0])
    h2, z2, r2, c2 = forward(h1, xs[1])
    # step 2 contribution through its own candidate
    direct = z2 * (1 - c2 ** 2)
    # dh2/dh1 for the scalar cell
    dz2 = z2 * (1 - z2)
    dr2 = r2 * (1 - r2)
    dc2_dh1 = (1 - c2 ** 2) * (dr2 * h1 + r2)
    dh2_dh1 = (1 - z2) + dz2 * (c2 - h1) + z2 * dc2_dh1
    through_h1 = dh2_dh1 * z1 * (1 - c1 ** 2)
    assert w.b.grad[0] == pytest.approx(direct + through_h1, rel=1e-10)
