"""Two-layer LSTM encoder with a direct 70-step grip-force head.

The network reads a (time, 6) interaction-wrench window, runs two stacked
LSTM layers (gate order i, f, g, o; single bias vector per layer), and maps
the final hidden state of the top layer through one affine head to the full
70-step grip horizon. backward() returns exact analytic gradients via
backpropagation through time; there is no autograd underneath.

Internally everything is batched over (T, B, D) arrays; the single-sample
forward/backward are the B=1 case. Samples batched together must share T.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .dataset import HORIZON, NormStats, denormalize_grip, normalize_wrench
from .errors import ContractViolation
from .numerics import Rng

GATE_ORDER = "ifgo"
INPUT_DIM = 6


def sigmoid(z: np.ndarray) -> np.ndarray:
    # tanh form avoids exp overflow for large negative inputs.
    return 0.5 * (1.0 + np.tanh(0.5 * z))


@dataclass
class LstmLayerParams:
    """One layer's weights; rows of w_ih/w_hh are the stacked i,f,g,o gates."""

    w_ih: np.ndarray  # (4H, D_in)
    w_hh: np.ndarray  # (4H, H)
    b: np.ndarray  # (4H,)

    @property
    def hidden(self) -> int:
        return self.w_hh.shape[1]

    @property
    def input_dim(self) -> int:
        return self.w_ih.shape[1]


@dataclass
class ModelParams:
    layer1: LstmLayerParams  # D_in = 6
    layer2: LstmLayerParams  # D_in = hidden
    head_w: np.ndarray  # (70, H)
    head_b: np.ndarray  # (70,)
    norm: NormStats | None = None
    horizon: int = HORIZON

    @property
    def hidden(self) -> int:
        return self.layer1.hidden


@dataclass
class Gradients:
    """Loss derivatives, shape-congruent with ModelParams' weight fields."""

    layer1: LstmLayerParams
    layer2: LstmLayerParams
    head_w: np.ndarray
    head_b: np.ndarray


def named_arrays(obj: ModelParams | Gradients) -> list[tuple[str, np.ndarray]]:
    """Fixed-order (name, array) view used by the optimizer and checkpoints."""
    return [
        ("layer1.w_ih", obj.layer1.w_ih),
        ("layer1.w_hh", obj.layer1.w_hh),
        ("layer1.b", obj.layer1.b),
        ("layer2.w_ih", obj.layer2.w_ih),
        ("layer2.w_hh", obj.layer2.w_hh),
        ("layer2.b", obj.layer2.b),
        ("head_w", obj.head_w),
        ("head_b", obj.head_b),
    ]


def init_params(
    seed: int,
    hidden: int = 40,
    input_dim: int = INPUT_DIM,
    horizon: int = HORIZON,
) -> ModelParams:
    """Seeded initialization: weights ~ U(-1/sqrt(H), 1/sqrt(H)).

    Biases start at zero except the forget gate slice, which starts at +1 so
    early training does not erase cell state. Draw order is fixed
    (layer1.w_ih, layer1.w_hh, layer2.w_ih, layer2.w_hh, head_w), so one seed
    always yields byte-identical parameters.
    """
    if hidden < 1:
        raise ContractViolation(f"hidden must be >= 1, got {hidden}")
    rng = Rng(seed)
    bound = 1.0 / np.sqrt(hidden)

    def layer(d_in: int) -> LstmLayerParams:
        w_ih = rng.uniform_matrix(4 * hidden, d_in, -bound, bound)
        w_hh = rng.uniform_matrix(4 * hidden, hidden, -bound, bound)
        b = np.zeros(4 * hidden)
        b[hidden : 2 * hidden] = 1.0
        return LstmLayerParams(w_ih=w_ih, w_hh=w_hh, b=b)

    l1 = layer(input_dim)
    l2 = layer(hidden)
    head_w = rng.uniform_matrix(horizon, hidden, -bound, bound)
    head_b = np.zeros(horizon)
    return ModelParams(layer1=l1, layer2=l2, head_w=head_w, head_b=head_b,
                       horizon=horizon)


def zero_gradients(p: ModelParams) -> Gradients:
    return Gradients(
        layer1=LstmLayerParams(
            w_ih=np.zeros_like(p.layer1.w_ih),
            w_hh=np.zeros_like(p.layer1.w_hh),
            b=np.zeros_like(p.layer1.b),
        ),
        layer2=LstmLayerParams(
            w_ih=np.zeros_like(p.layer2.w_ih),
            w_hh=np.zeros_like(p.layer2.w_hh),
            b=np.zeros_like(p.layer2.b),
        ),
        head_w=np.zeros_like(p.head_w),
        head_b=np.zeros_like(p.head_b),
    )


def cell_forward(
    x_t: np.ndarray,
    h_prev: np.ndarray,
    c_prev: np.ndarray,
    p: LstmLayerParams,
) -> tuple[np.ndarray, np.ndarray, tuple]:
    """One LSTM step on vectors; cache feeds the matching backward step."""
    h = p.hidden
    z = p.w_ih @ x_t + p.w_hh @ h_prev + p.b
    i = sigmoid(z[:h])
    f = sigmoid(z[h : 2 * h])
    g = np.tanh(z[2 * h : 3 * h])
    o = sigmoid(z[3 * h :])
    c_t = f * c_prev + i * g
    h_t = o * np.tanh(c_t)
    cache = (x_t, h_prev, c_prev, i, f, g, o, c_t)
    return h_t, c_t, cache


class _LayerCache:
    """Per-layer forward activations retained for BPTT."""

    __slots__ = ("xs", "gates", "cs", "hs")

    def __init__(self, xs: np.ndarray, gates: np.ndarray, cs: np.ndarray,
                 hs: np.ndarray):
        self.xs = xs  # (T, B, D)
        self.gates = gates  # (T, B, 4H) post-activation, i|f|g|o blocks
        self.cs = cs  # (T, B, H)
        self.hs = hs  # (T, B, H)


def _layer_forward(xs: np.ndarray, p: LstmLayerParams) -> tuple[np.ndarray, _LayerCache]:
    t_steps, batch, _ = xs.shape
    h = p.hidden
    gates = np.empty((t_steps, batch, 4 * h))
    cs = np.empty((t_steps, batch, h))
    hs = np.empty((t_steps, batch, h))
    h_t = np.zeros((batch, h))
    c_t = np.zeros((batch, h))
    for t in range(t_steps):
        z = xs[t] @ p.w_ih.T + h_t @ p.w_hh.T + p.b
        i = sigmoid(z[:, :h])
        f = sigmoid(z[:, h : 2 * h])
        g = np.tanh(z[:, 2 * h : 3 * h])
        o = sigmoid(z[:, 3 * h :])
        c_t = f * c_t + i * g
        h_t = o * np.tanh(c_t)
        gates[t, :, :h] = i
        gates[t, :, h : 2 * h] = f
        gates[t, :, 2 * h : 3 * h] = g
        gates[t, :, 3 * h :] = o
        cs[t] = c_t
        hs[t] = h_t
    return hs, _LayerCache(xs, gates, cs, hs)


def _layer_backward(
    dhs: np.ndarray, cache: _LayerCache, p: LstmLayerParams
) -> tuple[np.ndarray, LstmLayerParams]:
    """BPTT through one layer given per-step dL/dh; returns dL/dx per step."""
    t_steps, batch, h = dhs.shape
    dxs = np.empty_like(cache.xs)
    dw_ih = np.zeros_like(p.w_ih)
    dw_hh = np.zeros_like(p.w_hh)
    db = np.zeros_like(p.b)
    dh_rec = np.zeros((batch, h))
    dc_rec = np.zeros((batch, h))
    dz = np.empty((batch, 4 * h))
    for t in range(t_steps - 1, -1, -1):
        i = cache.gates[t, :, :h]
        f = cache.gates[t, :, h : 2 * h]
        g = cache.gates[t, :, 2 * h : 3 * h]
        o = cache.gates[t, :, 3 * h :]
        c_prev = cache.cs[t - 1] if t > 0 else np.zeros((batch, h))
        h_prev = cache.hs[t - 1] if t > 0 else np.zeros((batch, h))
        tanh_c = np.tanh(cache.cs[t])

        dh = dhs[t] + dh_rec
        do = dh * tanh_c
        dc = dc_rec + dh * o * (1.0 - tanh_c * tanh_c)
        di = dc * g
        df = dc * c_prev
        dg = dc * i
        dc_rec = dc * f

        dz[:, :h] = di * i * (1.0 - i)
        dz[:, h : 2 * h] = df * f * (1.0 - f)
        dz[:, 2 * h : 3 * h] = dg * (1.0 - g * g)
        dz[:, 3 * h :] = do * o * (1.0 - o)

        dw_ih += dz.T @ cache.xs[t]
        dw_hh += dz.T @ h_prev
        db += dz.sum(axis=0)
        dxs[t] = dz @ p.w_ih
        dh_rec = dz @ p.w_hh
    return dxs, LstmLayerParams(w_ih=dw_ih, w_hh=dw_hh, b=db)


def forward_batch(
    xs: np.ndarray, p: ModelParams
) -> tuple[np.ndarray, tuple[_LayerCache, _LayerCache]]:
    """Run the stacked encoder + head over a (T, B, 6) batch; y is (B, 70)."""
    xs = np.asarray(xs, dtype=np.float64)
    if xs.ndim != 3 or xs.shape[0] < 1 or xs.shape[2] != p.layer1.input_dim:
        raise ContractViolation(
            f"forward_batch expects a non-empty (T, B, {p.layer1.input_dim}) "
            f"input, got shape {xs.shape}"
        )
    hs1, cache1 = _layer_forward(xs, p.layer1)
    hs2, cache2 = _layer_forward(hs1, p.layer2)
    y = hs2[-1] @ p.head_w.T + p.head_b
    return y, (cache1, cache2)


def backward_batch(
    xs: np.ndarray, y_true: np.ndarray, p: ModelParams
) -> tuple[float, Gradients]:
    """Mean-over-batch MSE loss and its exact gradients.

    The loss averages over horizon steps and batch members, so the returned
    gradients equal the mean of the per-sample gradients.
    """
    y_true = np.asarray(y_true, dtype=np.float64)
    y_hat, (cache1, cache2) = forward_batch(xs, p)
    if y_true.shape != y_hat.shape:
        raise ContractViolation(
            f"target shape {y_true.shape} does not match prediction "
            f"shape {y_hat.shape}"
        )
    batch = y_hat.shape[0]
    residual = y_hat - y_true
    loss = float(np.mean(residual * residual))

    dy = (2.0 / (p.horizon * batch)) * residual  # (B, 70)
    head_w_grad = dy.T @ cache2.hs[-1]
    head_b_grad = dy.sum(axis=0)
    dh_last = dy @ p.head_w

    dhs2 = np.zeros_like(cache2.hs)
    dhs2[-1] = dh_last
    dxs2, l2_grads = _layer_backward(dhs2, cache2, p.layer2)
    _, l1_grads = _layer_backward(dxs2, cache1, p.layer1)
    grads = Gradients(layer1=l1_grads, layer2=l2_grads,
                      head_w=head_w_grad, head_b=head_b_grad)
    return loss, grads


def forward(x: np.ndarray, p: ModelParams) -> tuple[np.ndarray, tuple]:
    """Single-sample forward: x is (T, 6) normalized wrench, y_hat is (70,)."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 2 or x.shape[0] < 1:
        raise ContractViolation(
            f"forward expects a non-empty (T, {p.layer1.input_dim}) window, "
            f"got shape {x.shape}"
        )
    y, caches = forward_batch(x[:, None, :], p)
    return y[0], caches


def backward(
    x: np.ndarray, y_true: np.ndarray, p: ModelParams
) -> tuple[float, Gradients]:
    """Single-sample loss (1/70) * sum(residual^2) and exact BPTT gradients."""
    y_true = np.asarray(y_true, dtype=np.float64)
    if y_true.shape != (p.horizon,):
        raise ContractViolation(
            f"y_true must have shape ({p.horizon},), got {y_true.shape}"
        )
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 2 or x.shape[0] < 1:
        raise ContractViolation(
            f"backward expects a non-empty (T, {p.layer1.input_dim}) window, "
            f"got shape {x.shape}"
        )
    return backward_batch(x[:, None, :], y_true[None, :], p)


def predict_grip(x_raw: np.ndarray, p: ModelParams) -> np.ndarray:
    """Forecast 70 giver grip forces in newtons from a raw wrench window.

    x_raw is (T, 6) in N / N*m. Normalizes with the embedded stats, runs the
    encoder, and de-normalizes the grip channel. This is the call a robotic
    giver makes on its wrist-sensor window.
    """
    if p.norm is None:
        raise ContractViolation("model has no normalization stats attached")
    x_raw = np.asarray(x_raw, dtype=np.float64)
    if x_raw.ndim != 2 or x_raw.shape[0] < 1:
        raise ContractViolation(
            f"predict_grip expects a non-empty (T, 6) window, got shape {x_raw.shape}"
        )
    if not np.all(np.isfinite(x_raw)):
        raise ContractViolation("predict_grip input contains non-finite values")
    y_norm, _ = forward(normalize_wrench(x_raw, p.norm), p)
    return denormalize_grip(y_norm, p.norm)


def copy_params(p: ModelParams) -> ModelParams:
    """Deep copy of the weight arrays (norm stats are shared, never mutated)."""
    return ModelParams(
        layer1=LstmLayerParams(
            w_ih=p.layer1.w_ih.copy(),
            w_hh=p.layer1.w_hh.copy(),
            b=p.layer1.b.copy(),
        ),
        layer2=LstmLayerParams(
            w_ih=p.layer2.w_ih.copy(),
            w_hh=p.layer2.w_hh.copy(),
            b=p.layer2.b.copy(),
        ),
        head_w=p.head_w.copy(),
        head_b=p.head_b.copy(),
        norm=p.norm,
        horizon=p.horizon,
    )


def with_norm(p: ModelParams, norm: NormStats) -> ModelParams:
    return replace(p, norm=norm)
