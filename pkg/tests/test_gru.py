import math

import numpy as np
import pytest

from surfbench.gru import NAMES, GruWeights, gru_backward, gru_cell, gru_forward, init_gru, sigmoid


def scalar_gru(w, X, reverse=False):
    """Unit-by-unit loop oracle for the documented gate equations."""
    H, p = w.w_z.shape
    seq = X[::-1] if reverse else X
    h = [0.0] * H
    sig = lambda a: 1.0 / (1.0 + math.exp(-a))
    for x in seq:
        z = [sig(sum(w.w_z[i, j] * x[j] for j in range(p))
                 + sum(w.u_z[i, j] * h[j] for j in range(H)) + w.b_z[i]) for i in range(H)]
        r = [sig(sum(w.w_r[i, j] * x[j] for j in range(p))
                 + sum(w.u_r[i, j] * h[j] for j in range(H)) + w.b_r[i]) for i in range(H)]
        n = [math.tanh(sum(w.w_h[i, j] * x[j] for j in range(p))
                       + sum(w.u_h[i, j] * r[j] * h[j] for j in range(H)) + w.b_h[i])
             for i in range(H)]
        h = [(1 - z[i]) * h[i] + z[i] * n[i] for i in range(H)]
    return np.array(h)


def test_zero_weights_stay_at_zero(rng):
    w = GruWeights.zeros(5, 3)
    h, _ = gru_forward(w, rng.normal(size=(2, 10, 3)))
    assert np.all(h == 0)


def test_single_step_with_half_gate():
    # z = 0.5 and h~ = tanh(b_h): one step from zero gives 0.5 * tanh(b_h)
    w = GruWeights.zeros(3, 2)
    w.b_h[:] = [0.3, -1.0, 2.0]
    h = gru_cell(w, np.ones(2), np.zeros(3))
    np.testing.assert_allclose(h, 0.5 * np.tanh(w.b_h), atol=1e-15)


def test_update_gate_closed_keeps_state():
    w = GruWeights.zeros(2, 1)
    w.b_z[:] = -800.0
    h = gru_cell(w, [5.0], [0.25, -0.75])
    np.testing.assert_array_equal(h, [0.25, -0.75])


def test_forward_matches_scalar_oracle(rng):
    w = init_gru(4, 3, rng)
    X = rng.normal(size=(3, 7, 3))
    for reverse in (False, True):
        h, _ = gru_forward(w, X, reverse=reverse)
        for b in range(3):
            np.testing.assert_allclose(h[b], scalar_gru(w, X[b], reverse), rtol=0, atol=1e-14)


def test_cell_and_forward_agree(rng):
    w = init_gru(4, 2, rng)
    X = rng.normal(size=(1, 5, 2))
    h = np.zeros(4)
    for x in X[0]:
        h = gru_cell(w, x, h)
    np.testing.assert_allclose(gru_forward(w, X)[0][0], h, atol=1e-15)


def test_backward_matches_central_differences(rng):
    H, p, W = 3, 2, 5
    w = init_gru(H, p, rng)
    X = rng.normal(size=(2, W, p))
    c = rng.normal(size=(2, H))
    loss = lambda weights: float(np.sum(c * gru_forward(weights, X)[0]))
    grads = gru_backward(w, gru_forward(w, X)[1], c).arrays()
    eps = 1e-6
    for name in NAMES:
        a = getattr(w, name)
        fd = np.empty_like(a)
        for idx in np.ndindex(a.shape):
            keep = a[idx]
            a[idx] = keep + eps
            up = loss(w)
            a[idx] = keep - eps
            down = loss(w)
            a[idx] = keep
            fd[idx] = (up - down) / (2 * eps)
        rel = np.linalg.norm(grads[name] - fd) / max(np.linalg.norm(fd), 1e-12)
        assert rel <= 1e-6, name


def test_sigmoid_is_stable_at_extremes():
    s = sigmoid(np.array([-1000.0, 0.0, 1000.0]))
    np.testing.assert_array_equal(s, [0.0, 0.5, 1.0])


def test_init_ranges_and_shapes(rng):
    w = init_gru(8, 3, rng)
    assert (w.hidden, w.inputs) == (8, 3)
    assert np.abs(w.w_z).max() <= math.sqrt(1 / 3)
    assert np.abs(w.u_h).max() <= math.sqrt(1 / 8)
    Ws, Us, Bs = w.stacked()
    assert Ws.shape == (3, 8, 3) and Us.shape == (3, 8, 8) and Bs.shape == (3, 8)


def test_weight_validation():
    good = GruWeights.zeros(2, 3).arrays()
    with pytest.raises(ValueError):
        GruWeights(**{**good, "u_r": np.zeros((2, 3))})
    with pytest.raises(ValueError):
        GruWeights(**{**good, "b_h": np.array([0.0, np.inf])})
