"""Adam optimizer, mini-batch training loop, and evaluation metrics.

Defaults follow the tuned hyperparameters the forecasting task ships with:
learning rate 5e-4, batch size 30, 100 epochs, 2x40 LSTM, MSE loss. Batches
are drawn within exact-sequence-length buckets so variable-length windows
never need padding and batch gradients stay exact sample means.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import model as m
from .dataset import NormStats, TrainingSample, denormalize_grip, normalize_grip, normalize_wrench
from .errors import ContractViolation
from .numerics import derive_seed, Rng

_EPOCH_STREAM = 0x5E9


@dataclass
class TrainConfig:
    learning_rate: float = 5e-4
    batch_size: int = 30
    epochs: int = 100
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_eps: float = 1e-8
    seed: int = 0
    hidden: int = 40
    clip_threshold: float | None = None

    def validate(self) -> None:
        if self.learning_rate <= 0:
            raise ContractViolation(f"learning_rate must be > 0, got {self.learning_rate}")
        if self.batch_size < 1:
            raise ContractViolation(f"batch_size must be >= 1, got {self.batch_size}")
        if self.epochs < 1:
            raise ContractViolation(f"epochs must be >= 1, got {self.epochs}")
        for name, beta in (("adam_beta1", self.adam_beta1), ("adam_beta2", self.adam_beta2)):
            if not (0.0 <= beta < 1.0):
                raise ContractViolation(f"{name} must be in [0, 1), got {beta}")
        if self.adam_eps <= 0:
            raise ContractViolation(f"adam_eps must be > 0, got {self.adam_eps}")
        if self.hidden < 1:
            raise ContractViolation(f"hidden must be >= 1, got {self.hidden}")
        if self.clip_threshold is not None and self.clip_threshold <= 0:
            raise ContractViolation("clip_threshold must be > 0 when set")


@dataclass
class AdamState:
    """First/second moment accumulators keyed by parameter name, plus step t."""

    m: dict[str, np.ndarray]
    v: dict[str, np.ndarray]
    t: int = 0

    @classmethod
    def init_like(cls, params: m.ModelParams) -> "AdamState":
        names = m.named_arrays(params)
        return cls(
            m={name: np.zeros_like(arr) for name, arr in names},
            v={name: np.zeros_like(arr) for name, arr in names},
            t=0,
        )


@dataclass
class LossHistory:
    """Per-epoch mean MSE on the training and test splits (normalized units)."""

    train: list[float] = field(default_factory=list)
    test: list[float] = field(default_factory=list)


def adam_step(
    params: m.ModelParams,
    grads: m.Gradients,
    state: AdamState,
    cfg: TrainConfig,
) -> tuple[m.ModelParams, AdamState]:
    """One bias-corrected Adam update. Pure: inputs are left untouched.

    t is incremented first; then m <- b1*m + (1-b1)*g, v <- b2*v + (1-b2)*g^2,
    and theta <- theta - lr * m_hat / (sqrt(v_hat) + eps).
    """
    param_arrays = dict(m.named_arrays(params))
    grad_arrays = dict(m.named_arrays(grads))
    for name, g in grad_arrays.items():
        if g.shape != param_arrays[name].shape:
            raise ContractViolation(
                f"gradient {name} shape {g.shape} does not match parameter "
                f"shape {param_arrays[name].shape}"
            )

    new_params = m.copy_params(params)
    new_arrays = dict(m.named_arrays(new_params))
    t = state.t + 1
    new_m: dict[str, np.ndarray] = {}
    new_v: dict[str, np.ndarray] = {}
    bc1 = 1.0 - cfg.adam_beta1**t
    bc2 = 1.0 - cfg.adam_beta2**t
    for name, _ in m.named_arrays(params):
        g = grad_arrays[name]
        mom = cfg.adam_beta1 * state.m[name] + (1.0 - cfg.adam_beta1) * g
        vel = cfg.adam_beta2 * state.v[name] + (1.0 - cfg.adam_beta2) * (g * g)
        new_m[name] = mom
        new_v[name] = vel
        m_hat = mom / bc1
        v_hat = vel / bc2
        new_arrays[name] -= cfg.learning_rate * m_hat / (np.sqrt(v_hat) + cfg.adam_eps)
    return new_params, AdamState(m=new_m, v=new_v, t=t)


def clip_gradients(grads: m.Gradients, threshold: float) -> m.Gradients:
    """Global-norm clipping: scales all arrays by threshold/norm if needed."""
    total = 0.0
    for _, g in m.named_arrays(grads):
        total += float(np.sum(g * g))
    norm = np.sqrt(total)
    if norm <= threshold:
        return grads
    scale = threshold / norm
    return m.Gradients(
        layer1=m.LstmLayerParams(
            w_ih=grads.layer1.w_ih * scale,
            w_hh=grads.layer1.w_hh * scale,
            b=grads.layer1.b * scale,
        ),
        layer2=m.LstmLayerParams(
            w_ih=grads.layer2.w_ih * scale,
            w_hh=grads.layer2.w_hh * scale,
            b=grads.layer2.b * scale,
        ),
        head_w=grads.head_w * scale,
        head_b=grads.head_b * scale,
    )


def batch_indices(
    lengths: list[int], batch_size: int, rng: Rng
) -> list[list[int]]:
    """Deterministic epoch batching: shuffle within exact-length buckets.

    Buckets are visited in ascending length order, each bucket's sample
    indices are permuted with the provided generator, chunked into batches
    (a final short batch is allowed), and the resulting batch list is then
    permuted as a whole so no length systematically trains first.
    """
    buckets: dict[int, list[int]] = {}
    for idx, n in enumerate(lengths):
        buckets.setdefault(n, []).append(idx)
    batches: list[list[int]] = []
    for n in sorted(buckets):
        members = buckets[n]
        order = rng.permutation(len(members))
        shuffled = [members[i] for i in order]
        for start in range(0, len(shuffled), batch_size):
            batches.append(shuffled[start : start + batch_size])
    batch_order = rng.permutation(len(batches))
    return [batches[i] for i in batch_order]


def _stack_batch(samples: list[TrainingSample], idxs: list[int]) -> tuple[np.ndarray, np.ndarray]:
    xs = np.stack([samples[i].x for i in idxs], axis=1)  # (T, B, 6)
    ys = np.stack([samples[i].y for i in idxs], axis=0)  # (B, 70)
    return xs, ys


def _mean_loss(params: m.ModelParams, samples: list[TrainingSample]) -> float:
    """Mean per-sample MSE over a normalized sample list (forward only)."""
    if not samples:
        return float("nan")
    buckets: dict[int, list[int]] = {}
    for idx, s in enumerate(samples):
        buckets.setdefault(len(s.x), []).append(idx)
    total = 0.0
    for n in sorted(buckets):
        idxs = buckets[n]
        xs, ys = _stack_batch(samples, idxs)
        y_hat, _ = m.forward_batch(xs, params)
        r = y_hat - ys
        total += float(np.sum(np.mean(r * r, axis=1)))
    return total / len(samples)


def train(
    train_samples: list[TrainingSample],
    test_samples: list[TrainingSample],
    cfg: TrainConfig,
    norm: NormStats,
) -> tuple[m.ModelParams, LossHistory]:
    """Mini-batch Adam training over pre-normalized samples.

    Both sample lists must already be z-scored with the train-fit stats;
    `norm` is embedded into the returned parameters so prediction can map
    back to newtons. Each epoch reshuffles with a generator derived only
    from (cfg.seed, epoch index), so identical inputs give byte-identical
    results. The recorded train loss is the mean over that epoch's batch
    losses as trained; test loss is a forward pass after the epoch.
    """
    cfg.validate()
    if not train_samples:
        raise ContractViolation("training set is empty")

    params = m.with_norm(m.init_params(cfg.seed, hidden=cfg.hidden), norm)
    state = AdamState.init_like(params)
    history = LossHistory()
    lengths = [len(s.x) for s in train_samples]

    for epoch in range(cfg.epochs):
        rng = Rng(derive_seed(cfg.seed, _EPOCH_STREAM, epoch))
        epoch_loss = 0.0
        for idxs in batch_indices(lengths, cfg.batch_size, rng):
            xs, ys = _stack_batch(train_samples, idxs)
            loss, grads = m.backward_batch(xs, ys, params)
            if cfg.clip_threshold is not None:
                grads = clip_gradients(grads, cfg.clip_threshold)
            params, state = adam_step(params, grads, state, cfg)
            epoch_loss += loss * len(idxs)
        history.train.append(epoch_loss / len(train_samples))
        history.test.append(_mean_loss(params, test_samples))
    return params, history


@dataclass
class SampleResult:
    """One evaluated sample's de-normalized prediction next to the truth."""

    sample: TrainingSample
    predicted_N: np.ndarray  # (70,)
    actual_N: np.ndarray  # (70,)


@dataclass
class EvalMetrics:
    mse_norm: float
    mse_N2: float
    final_step_mae_N: float
    n_samples: int
    results: list[SampleResult]


def evaluate(params: m.ModelParams, samples: list[TrainingSample]) -> EvalMetrics:
    """Metrics over raw (newton-scale) samples using the model's own stats.

    Reports the mean MSE in normalized units, the mean MSE in N^2, and the
    mean absolute error of the final horizon step in newtons (how well the
    forecast lands at zero grip). Per-sample trajectories are returned for
    export.
    """
    if not samples:
        raise ContractViolation("evaluate needs a non-empty sample list")
    if params.norm is None:
        raise ContractViolation("model has no normalization stats attached")
    stats = params.norm

    mse_norm_total = 0.0
    mse_n2_total = 0.0
    final_mae_total = 0.0
    slots: list[SampleResult | None] = [None] * len(samples)

    buckets: dict[int, list[int]] = {}
    for idx, s in enumerate(samples):
        buckets.setdefault(len(s.x), []).append(idx)
    for n in sorted(buckets):
        idxs = buckets[n]
        xs = np.stack([normalize_wrench(samples[i].x, stats) for i in idxs], axis=1)
        y_hat_norm, _ = m.forward_batch(xs, params)
        for row, i in enumerate(idxs):
            s = samples[i]
            y_norm = normalize_grip(s.y, stats)
            r_norm = y_hat_norm[row] - y_norm
            mse_norm_total += float(np.mean(r_norm * r_norm))
            pred_n = denormalize_grip(y_hat_norm[row], stats)
            r_n = pred_n - s.y
            mse_n2_total += float(np.mean(r_n * r_n))
            final_mae_total += abs(float(pred_n[-1] - s.y[-1]))
            slots[i] = SampleResult(sample=s, predicted_N=pred_n, actual_N=s.y.copy())

    results = [r for r in slots if r is not None]
    count = len(samples)
    return EvalMetrics(
        mse_norm=mse_norm_total / count,
        mse_N2=mse_n2_total / count,
        final_step_mae_N=final_mae_total / count,
        n_samples=count,
        results=results,
    )
