"""Tests for the 2-layer LSTM forecaster: forward oracles and exact BPTT."""

import numpy as np
import pytest

from gripforecast import model as m
from gripforecast.dataset import NormStats
from gripforecast.errors import ContractViolation
from gripforecast.numerics import Rng, derive_seed


def small_params(seed=0, hidden=5):
    return m.init_params(seed, hidden=hidden)


def random_case(seed, T=9, hidden=5, scale=0.5):
    params = small_params(seed, hidden)
    rng = Rng(derive_seed(seed, 7))
    x = rng.normals(T * 6, 0.0, scale).reshape(T, 6)
    y = rng.normals(70, 0.0, scale)
    return params, x, y


# ---------------------------------------------------------------------------
# initialization


def test_init_shapes_paper_architecture():
    p = m.init_params(0)  # hidden 40
    assert p.layer1.w_ih.shape == (160, 6)
    assert p.layer1.w_hh.shape == (160, 40)
    assert p.layer1.b.shape == (160,)
    assert p.layer2.w_ih.shape == (160, 40)
    assert p.head_w.shape == (70, 40)
    assert p.head_b.shape == (70,)
    assert p.horizon == 70 and p.hidden == 40


def test_init_weight_range_and_biases():
    p = m.init_params(3, hidden=40)
    bound = 1.0 / np.sqrt(40)
    for name, arr in m.named_arrays(p):
        if name.endswith(".b"):
            h = arr.size // 4
            assert np.all(arr[h : 2 * h] == 1.0)  # forget gate bias +1
            assert np.all(arr[:h] == 0.0) and np.all(arr[2 * h :] == 0.0)
        elif name == "head_b":
            assert np.all(arr == 0.0)
        else:
            assert np.max(np.abs(arr)) <= bound
            assert np.std(arr) > 0.3 * bound  # actually randomized


def test_init_deterministic_and_seed_sensitive():
    a = m.init_params(11, hidden=8)
    b = m.init_params(11, hidden=8)
    c = m.init_params(12, hidden=8)
    for (_, arr_a), (_, arr_b), (_, arr_c) in zip(
        m.named_arrays(a), m.named_arrays(b), m.named_arrays(c)
    ):
        assert np.array_equal(arr_a, arr_b)
    assert not np.array_equal(a.layer1.w_ih, c.layer1.w_ih)


# ---------------------------------------------------------------------------
# cell-level closed forms


def test_cell_zero_everything_closed_form():
    # Zero weights and inputs: i = f = o = sigma(0) = 0.5, g = tanh(0) = 0,
    # so c = 0 and h = 0.
    h = 4
    p = m.LstmLayerParams(w_ih=np.zeros((4 * h, 6)), w_hh=np.zeros((4 * h, h)), b=np.zeros(4 * h))
    h_t, c_t, _ = m.cell_forward(np.zeros(6), np.zeros(h), np.zeros(h), p)
    assert np.allclose(c_t, 0.0) and np.allclose(h_t, 0.0)


def test_cell_unit_cell_state_closed_form():
    # Zero weights, c_prev = 1: c = f*c_prev = 0.5, h = o*tanh(c) = 0.5*tanh(0.5).
    h = 3
    p = m.LstmLayerParams(w_ih=np.zeros((4 * h, 6)), w_hh=np.zeros((4 * h, h)), b=np.zeros(4 * h))
    h_t, c_t, _ = m.cell_forward(np.zeros(6), np.zeros(h), np.ones(h), p)
    assert np.allclose(c_t, 0.5)
    assert np.allclose(h_t, 0.5 * np.tanh(0.5))


def test_sigmoid_matches_reference():
    z = np.linspace(-10, 10, 41)
    assert np.allclose(m.sigmoid(z), 1.0 / (1.0 + np.exp(-z)), atol=1e-15)


# ---------------------------------------------------------------------------
# forward oracles


def scalar_loop_forward(x, p):
    """Reference implementation: per-step cell_forward loop, no batching."""
    T = len(x)
    H = p.hidden
    h1 = np.zeros(H)
    c1 = np.zeros(H)
    h2 = np.zeros(H)
    c2 = np.zeros(H)
    for t in range(T):
        h1, c1, _ = m.cell_forward(x[t], h1, c1, p.layer1)
        h2, c2, _ = m.cell_forward(h1, h2, c2, p.layer2)
    return p.head_w @ h2 + p.head_b


def test_forward_matches_scalar_loop_oracle():
    for seed in range(5):
        params, x, _ = random_case(seed, T=11)
        got, _ = m.forward(x, params)
        want = scalar_loop_forward(x, params)
        assert np.max(np.abs(got - want)) < 1e-12


def test_forward_batch_matches_per_sample_forward():
    params, _, _ = random_case(0, T=7)
    rng = Rng(99)
    xs = rng.normals(7 * 4 * 6, 0.0, 0.5).reshape(7, 4, 6)
    y_batch, _ = m.forward_batch(xs, params)
    for b in range(4):
        y_one, _ = m.forward(xs[:, b, :], params)
        assert np.max(np.abs(y_batch[b] - y_one)) < 1e-12


def test_head_bias_linearity():
    # Shifting head_b shifts the output by exactly that amount.
    params, x, _ = random_case(2, T=6)
    y0, _ = m.forward(x, params)
    shifted = m.copy_params(params)
    shifted.head_b += 1.25
    y1, _ = m.forward(x, shifted)
    assert np.allclose(y1 - y0, 1.25, atol=1e-12)


def test_forward_rejects_bad_input():
    params = small_params()
    with pytest.raises(ContractViolation):
        m.forward(np.zeros((0, 6)), params)
    with pytest.raises(ContractViolation):
        m.forward(np.zeros((5, 4)), params)


# ---------------------------------------------------------------------------
# backward: exactness


def fd_gradient(params, x, y, name, index, eps=1e-6):
    arrays = dict(m.named_arrays(params))
    flat = arrays[name].reshape(-1)
    orig = flat[index]
    flat[index] = orig + eps
    yp, _ = m.forward(x, params)
    lp = float(np.mean((yp - y) ** 2))
    flat[index] = orig - eps
    ym, _ = m.forward(x, params)
    lm = float(np.mean((ym - y) ** 2))
    flat[index] = orig
    return (lp - lm) / (2 * eps)


def test_backward_loss_value():
    params, x, y = random_case(1)
    loss, _ = m.backward(x, y, params)
    y_hat, _ = m.forward(x, params)
    assert loss == pytest.approx(float(np.mean((y_hat - y) ** 2)), abs=1e-15)


def test_backward_spot_fd_check():
    # Small spot check on a handful of coordinates from every array; the
    # exhaustive 20-draw sweep lives in the acceptance suite.
    params, x, y = random_case(4, T=8)
    _, grads = m.backward(x, y, params)
    garrs = dict(m.named_arrays(grads))
    rng = Rng(123)
    for name, arr in m.named_arrays(params):
        gflat = garrs[name].reshape(-1)
        for _ in range(6):
            idx = int(rng.uniform() * arr.size)
            fd = fd_gradient(params, x, y, name, idx)
            rel = abs(fd - gflat[idx]) / max(abs(fd), abs(gflat[idx]), 1e-8)
            assert rel < 1e-4, f"{name}[{idx}]: analytic {gflat[idx]}, fd {fd}"


def test_backward_batch_is_mean_of_sample_gradients():
    params, _, _ = random_case(0, T=6)
    rng = Rng(55)
    B = 3
    xs = rng.normals(6 * B * 6, 0.0, 0.5).reshape(6, B, 6)
    ys = rng.normals(B * 70, 0.0, 0.5).reshape(B, 70)
    loss_b, grads_b = m.backward_batch(xs, ys, params)

    per = [m.backward(xs[:, b, :], ys[b], params) for b in range(B)]
    assert loss_b == pytest.approx(np.mean([p[0] for p in per]), abs=1e-14)
    for name, _ in m.named_arrays(params):
        mean_grad = np.mean(
            [dict(m.named_arrays(p[1]))[name] for p in per], axis=0
        )
        got = dict(m.named_arrays(grads_b))[name]
        assert np.max(np.abs(got - mean_grad)) < 1e-12


def test_loss_invariant_under_batch_permutation():
    params, _, _ = random_case(0, T=6)
    rng = Rng(56)
    xs = rng.normals(6 * 4 * 6, 0.0, 0.5).reshape(6, 4, 6)
    ys = rng.normals(4 * 70, 0.0, 0.5).reshape(4, 70)
    loss_a, grads_a = m.backward_batch(xs, ys, params)
    perm = [2, 0, 3, 1]
    loss_b, grads_b = m.backward_batch(xs[:, perm, :], ys[perm], params)
    assert loss_a == pytest.approx(loss_b, abs=1e-14)
    for (_, ga), (_, gb) in zip(m.named_arrays(grads_a), m.named_arrays(grads_b)):
        assert np.max(np.abs(ga - gb)) < 1e-13


def test_gradients_zero_where_output_cannot_depend():
    # With targets equal to predictions, residual is 0 -> all gradients 0.
    params, x, _ = random_case(3)
    y_hat, _ = m.forward(x, params)
    loss, grads = m.backward(x, y_hat, params)
    assert loss == 0.0
    for _, g in m.named_arrays(grads):
        assert np.all(g == 0.0)


# ---------------------------------------------------------------------------
# prediction with normalization


def make_norm():
    return NormStats(
        wrench_mean=np.arange(6, dtype=float),
        wrench_std=np.linspace(1.0, 2.0, 6),
        grip_mean=7.0,
        grip_std=3.0,
    )


def test_predict_grip_round_trips_normalization():
    params = m.with_norm(small_params(), make_norm())
    rng = Rng(77)
    x_raw = rng.normals(32 * 6, 0.0, 1.0).reshape(32, 6) + np.arange(6)
    got = m.predict_grip(x_raw, params)
    x_norm = (x_raw - params.norm.wrench_mean) / params.norm.wrench_std
    y_norm, _ = m.forward(x_norm, params)
    want = y_norm * 3.0 + 7.0
    assert np.max(np.abs(got - want)) < 1e-9


def test_predict_grip_requires_norm():
    params = small_params()
    with pytest.raises(ContractViolation, match="norm"):
        m.predict_grip(np.zeros((32, 6)), params)


def test_predict_grip_rejects_non_finite():
    params = m.with_norm(small_params(), make_norm())
    x = np.zeros((32, 6))
    x[3, 2] = np.nan
    with pytest.raises(ContractViolation):
        m.predict_grip(x, params)


def test_copy_params_is_deep():
    p = small_params()
    q = m.copy_params(p)
    q.layer1.w_ih[0, 0] += 1.0
    assert p.layer1.w_ih[0, 0] != q.layer1.w_ih[0, 0]
