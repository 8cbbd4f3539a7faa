"""Command-line surface: synth, train, eval, predict, stream.

Owns every on-disk format (dataset CSV via the dataset module, checkpoint
JSON, loss-history CSV, metrics JSON, comparison CSV, forecast CSV) and the
line-delimited streaming protocol. Exit codes: 0 success, 1 usage error,
2 data error, 3 internal invariant failure.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import math
import sys
from collections import deque
from pathlib import Path

import numpy as np

from . import model as m
from .dataset import (
    HORIZON,
    HandoverRecord,
    NormStats,
    PERIOD_MS,
    SamplingPolicy,
    TrainingSample,
    align_handover,
    apply_norm,
    extract_samples,
    fit_norm_stats,
    load_recordings,
    ms_to_steps,
    save_recordings,
    split_by_pair,
)
from .errors import ContractViolation, DataError
from .optim import TrainConfig, evaluate, train
from .synthgen import generate_dataset

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_INTERNAL = 3

CHECKPOINT_VERSION = 1

WRENCH_CSV_HEADER = ["t_ms", "fx_N", "fy_N", "fz_N", "tx_Nm", "ty_Nm", "tz_Nm"]

STREAM_WINDOW_MS_MIN = 10.0
STREAM_WINDOW_MS_MAX = 1250.0


class _Parser(argparse.ArgumentParser):
    """argparse exits 2 on usage errors by default; this CLI reserves 2 for
    data errors, so usage problems are remapped to exit code 1."""

    def error(self, message: str) -> None:  # type: ignore[override]
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _positive_int(text: str) -> int:
    try:
        value = int(text)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected an integer, got {text!r}") from exc
    if value < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {value}")
    return value


def _any_int(text: str) -> int:
    try:
        return int(text)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected an integer, got {text!r}") from exc


def _window_ms(text: str) -> float:
    try:
        value = float(text)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected a number, got {text!r}") from exc
    if not (STREAM_WINDOW_MS_MIN <= value <= STREAM_WINDOW_MS_MAX):
        raise argparse.ArgumentTypeError(
            f"--window-ms must lie in [{STREAM_WINDOW_MS_MIN:g}, "
            f"{STREAM_WINDOW_MS_MAX:g}] ms, got {value:g}"
        )
    return value


def _fmt(value: float) -> str:
    return repr(float(value))


# ---------------------------------------------------------------------------
# Checkpoint (de)serialization


def save_checkpoint(path: str | Path, params: m.ModelParams, cfg: TrainConfig) -> None:
    """Self-describing JSON: version, shapes, gate order, norm stats, config
    echo. Weight arrays are flat row-major lists next to their shapes."""
    if params.norm is None:
        raise ContractViolation("checkpoint requires normalization stats on the model")
    weights = {}
    for name, arr in m.named_arrays(params):
        weights[name] = {
            "shape": list(arr.shape),
            "data": [float(v) for v in arr.reshape(-1)],
        }
    doc = {
        "format_version": CHECKPOINT_VERSION,
        "gate_order": m.GATE_ORDER,
        "hidden": params.layer1.hidden,
        "input_dim": params.layer1.input_dim,
        "horizon": params.horizon,
        "weights": weights,
        "norm": {
            "wrench_mean": [float(v) for v in params.norm.wrench_mean],
            "wrench_std": [float(v) for v in params.norm.wrench_std],
            "grip_mean": float(params.norm.grip_mean),
            "grip_std": float(params.norm.grip_std),
        },
        "train_config": dataclasses.asdict(cfg),
    }
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(doc, fh, indent=2)
        fh.write("\n")


def load_checkpoint(path: str | Path) -> tuple[m.ModelParams, dict]:
    """Validated load; returns the parameters and the raw document."""
    try:
        with open(path, encoding="utf-8") as fh:
            doc = json.load(fh)
    except json.JSONDecodeError as exc:
        raise DataError(f"checkpoint {path} is not valid JSON: {exc}") from exc

    version = doc.get("format_version")
    if version != CHECKPOINT_VERSION:
        raise DataError(
            f"checkpoint {path} has format_version {version!r}; "
            f"this build reads version {CHECKPOINT_VERSION}"
        )
    if doc.get("gate_order") != m.GATE_ORDER:
        raise DataError(
            f"checkpoint {path} declares gate_order {doc.get('gate_order')!r}, "
            f"expected {m.GATE_ORDER!r}"
        )
    if doc.get("horizon") != HORIZON:
        raise DataError(
            f"checkpoint {path} declares horizon {doc.get('horizon')!r}, "
            f"expected {HORIZON}"
        )

    hidden = int(doc["hidden"])
    input_dim = int(doc["input_dim"])
    template = m.init_params(0, hidden=hidden, input_dim=input_dim)
    arrays = {}
    for name, ref in m.named_arrays(template):
        try:
            entry = doc["weights"][name]
        except KeyError as exc:
            raise DataError(f"checkpoint {path} is missing weight {name!r}") from exc
        shape = tuple(entry["shape"])
        data = np.asarray(entry["data"], dtype=float)
        if shape != ref.shape:
            raise DataError(
                f"checkpoint {path}: weight {name!r} declares shape {list(shape)}, "
                f"expected {list(ref.shape)}"
            )
        if data.size != math.prod(shape):
            raise DataError(
                f"checkpoint {path}: weight {name!r} has {data.size} values "
                f"for declared shape {list(shape)}"
            )
        if not np.all(np.isfinite(data)):
            raise DataError(f"checkpoint {path}: weight {name!r} contains non-finite values")
        arrays[name] = data.reshape(shape)

    norm_doc = doc.get("norm")
    if norm_doc is None:
        raise DataError(f"checkpoint {path} has no normalization stats")
    norm = NormStats(
        wrench_mean=np.asarray(norm_doc["wrench_mean"], dtype=float),
        wrench_std=np.asarray(norm_doc["wrench_std"], dtype=float),
        grip_mean=float(norm_doc["grip_mean"]),
        grip_std=float(norm_doc["grip_std"]),
    )

    params = m.ModelParams(
        layer1=m.LstmLayerParams(
            w_ih=arrays["layer1.w_ih"], w_hh=arrays["layer1.w_hh"], b=arrays["layer1.b"]
        ),
        layer2=m.LstmLayerParams(
            w_ih=arrays["layer2.w_ih"], w_hh=arrays["layer2.w_hh"], b=arrays["layer2.b"]
        ),
        head_w=arrays["head_w"],
        head_b=arrays["head_b"],
        norm=norm,
    )
    return params, doc


# ---------------------------------------------------------------------------
# Shared data plumbing


def _parse_test_pairs(text: str) -> set[str]:
    pairs = {part.strip() for part in text.split(",") if part.strip()}
    if not pairs:
        raise DataError("--test-pairs must name at least one pair id")
    return pairs


def _load_aligned(path: str | Path) -> list[HandoverRecord]:
    return [align_handover(rec) for rec in load_recordings(path)]


def _split_and_extract(
    records: list[HandoverRecord], test_pairs: set[str], policy: SamplingPolicy
) -> tuple[list[TrainingSample], list[TrainingSample]]:
    present = {rec.pair_id for rec in records}
    unknown = sorted(test_pairs - present)
    if unknown:
        raise DataError(
            f"test pair ids {unknown} do not appear in the data "
            f"(present: {sorted(present)})"
        )
    train_recs, test_recs = split_by_pair(records, test_pairs)
    if not train_recs:
        raise DataError("no pairs left for training after removing test pairs")
    train_samples = [s for rec in train_recs for s in extract_samples(rec, policy)]
    test_samples = [s for rec in test_recs for s in extract_samples(rec, policy)]
    return train_samples, test_samples


def _sample_id(sample: TrainingSample) -> str:
    return (
        f"{sample.pair_id}/{sample.handover_id}"
        f"/te{sample.t_e_ms:g}/to{sample.t_o_ms:g}"
    )


def _read_wrench_csv(path: str | Path) -> tuple[np.ndarray, np.ndarray]:
    """Reads a t_ms + 6-channel wrench CSV; validates shape and monotone time."""
    with open(path, encoding="utf-8", newline="") as fh:
        lines = [line.strip() for line in fh if line.strip()]
    if not lines:
        raise DataError(f"{path} is empty")
    header = [cell.strip() for cell in lines[0].split(",")]
    if header != WRENCH_CSV_HEADER:
        raise DataError(
            f"{path} must start with header {','.join(WRENCH_CSV_HEADER)!r}, "
            f"got {lines[0]!r}"
        )
    if len(lines) == 1:
        raise DataError(f"{path} has a header but no data rows")
    times: list[float] = []
    rows: list[list[float]] = []
    for lineno, line in enumerate(lines[1:], start=2):
        cells = line.split(",")
        if len(cells) != 7:
            raise DataError(f"{path} line {lineno}: expected 7 fields, got {len(cells)}")
        try:
            values = [float(c) for c in cells]
        except ValueError as exc:
            raise DataError(f"{path} line {lineno}: non-numeric field ({exc})") from exc
        if not all(math.isfinite(v) for v in values):
            raise DataError(f"{path} line {lineno}: non-finite value")
        times.append(values[0])
        rows.append(values[1:])
    t = np.asarray(times)
    if np.any(np.diff(t) <= 0):
        raise DataError(f"{path}: t_ms must be strictly increasing")
    return t, np.asarray(rows)


# ---------------------------------------------------------------------------
# Subcommands


def cmd_synth(args: argparse.Namespace) -> int:
    records = generate_dataset(args.pairs, args.per_pair, args.seed)
    save_recordings(records, args.out)
    print(f"wrote {len(records)} handovers ({args.pairs} pairs) to {args.out}")
    return EXIT_OK


def _load_train_config(path: str | None) -> TrainConfig:
    cfg = TrainConfig()
    if path is None:
        return cfg
    try:
        with open(path, encoding="utf-8") as fh:
            doc = json.load(fh)
    except json.JSONDecodeError as exc:
        raise DataError(f"config {path} is not valid JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise DataError(f"config {path} must be a JSON object")
    known = {f.name for f in dataclasses.fields(TrainConfig)}
    unknown = sorted(set(doc) - known)
    if unknown:
        raise DataError(
            f"config {path} has unknown keys {unknown}; known keys: {sorted(known)}"
        )
    cfg = dataclasses.replace(cfg, **doc)
    try:
        cfg.validate()
    except ContractViolation as exc:
        raise DataError(f"config {path}: {exc}") from exc
    return cfg


def cmd_train(args: argparse.Namespace) -> int:
    cfg = _load_train_config(args.config)
    test_pairs = _parse_test_pairs(args.test_pairs)
    records = _load_aligned(args.data)
    policy = SamplingPolicy()
    train_raw, test_raw = _split_and_extract(records, test_pairs, policy)
    norm = fit_norm_stats(train_raw)
    train_samples = [apply_norm(s, norm) for s in train_raw]
    test_samples = [apply_norm(s, norm) for s in test_raw]

    params, history = train(train_samples, test_samples, cfg, norm)

    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    save_checkpoint(out_dir / "checkpoint.json", params, cfg)
    with open(out_dir / "loss_history.csv", "w", encoding="utf-8", newline="\n") as fh:
        fh.write("epoch,train_mse,test_mse\n")
        for epoch, (tr, te) in enumerate(zip(history.train, history.test), start=1):
            fh.write(f"{epoch},{_fmt(tr)},{_fmt(te)}\n")
    print(
        f"trained {cfg.epochs} epochs on {len(train_samples)} samples "
        f"({len(test_samples)} test); final train mse {history.train[-1]:.6f}, "
        f"test mse {history.test[-1]:.6f}; wrote {out_dir / 'checkpoint.json'}"
    )
    return EXIT_OK


def cmd_eval(args: argparse.Namespace) -> int:
    params, _ = load_checkpoint(args.model)
    test_pairs = _parse_test_pairs(args.test_pairs)
    records = _load_aligned(args.data)
    policy = SamplingPolicy()
    _, test_raw = _split_and_extract(records, test_pairs, policy)
    if not test_raw:
        raise DataError("test pairs produced no samples")
    metrics = evaluate(params, test_raw)

    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    with open(out_dir / "metrics.json", "w", encoding="utf-8", newline="\n") as fh:
        json.dump(
            {
                "mse_norm": metrics.mse_norm,
                "mse_N2": metrics.mse_N2,
                "final_step_mae_N": metrics.final_step_mae_N,
                "n_samples": metrics.n_samples,
            },
            fh,
            indent=2,
        )
        fh.write("\n")
    with open(out_dir / "comparison.csv", "w", encoding="utf-8", newline="\n") as fh:
        fh.write("sample_id,step,t_ms,predicted_N,actual_N\n")
        for result in metrics.results:
            s = result.sample
            base = ms_to_steps(s.t_e_ms)
            sid = _sample_id(s)
            for step in range(HORIZON):
                t_ms = (base + 1 + step) * PERIOD_MS
                fh.write(
                    f"{sid},{step},{_fmt(t_ms)},"
                    f"{_fmt(result.predicted_N[step])},{_fmt(result.actual_N[step])}\n"
                )
    print(
        f"evaluated {metrics.n_samples} samples: mse_norm {metrics.mse_norm:.6f}, "
        f"mse {metrics.mse_N2:.6f} N^2, final-step MAE {metrics.final_step_mae_N:.4f} N; "
        f"wrote {out_dir / 'metrics.json'}"
    )
    return EXIT_OK


def cmd_predict(args: argparse.Namespace) -> int:
    params, _ = load_checkpoint(args.model)
    t, x = _read_wrench_csv(args.input)
    forecast = m.predict_grip(x, params)
    out_lines = ["t_ms,grip_N"]
    for step, value in enumerate(forecast, start=1):
        out_lines.append(f"{_fmt(t[-1] + step * PERIOD_MS)},{_fmt(value)}")
    text = "\n".join(out_lines) + "\n"
    if args.out is None:
        sys.stdout.write(text)
    else:
        with open(args.out, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
    return EXIT_OK


def _parse_tick(line: str) -> tuple[float, list[float]] | None:
    cells = line.split(",")
    if len(cells) != 7:
        return None
    try:
        values = [float(c) for c in cells]
    except ValueError:
        return None
    if not all(math.isfinite(v) for v in values):
        return None
    return values[0], values[1:]


def cmd_stream(args: argparse.Namespace) -> int:
    """Sliding-window forecasting over line-delimited ticks on stdin.

    The window holds the last `round_half_up(window_ms * 0.12) + 1` ticks
    (260 ms -> 32). Once it fills, every subsequent tick (and the filling
    one) emits `t_ms,<70 grip values>` on stdout. Malformed lines are
    reported on stderr and skipped; a non-increasing timestamp is fatal.
    """
    params, _ = load_checkpoint(args.model)
    n_window = ms_to_steps(args.window_ms) + 1
    window: deque[list[float]] = deque(maxlen=n_window)
    last_t: float | None = None
    stdin = args.stdin if args.stdin is not None else sys.stdin
    stdout = args.stdout if args.stdout is not None else sys.stdout

    for lineno, raw in enumerate(stdin, start=1):
        line = raw.strip()
        if not line:
            continue
        if lineno == 1 and line.replace(" ", "") == ",".join(WRENCH_CSV_HEADER):
            continue
        tick = _parse_tick(line)
        if tick is None:
            print(f"stream: line {lineno}: malformed tick, skipped: {line!r}",
                  file=sys.stderr)
            continue
        t_ms, wrench = tick
        if last_t is not None and t_ms <= last_t:
            raise DataError(
                f"stream: line {lineno}: timestamp {t_ms:g} does not increase "
                f"past {last_t:g}"
            )
        last_t = t_ms
        window.append(wrench)
        if len(window) < n_window:
            continue
        x = np.asarray(window)
        forecast = m.predict_grip(x, params)
        stdout.write(_fmt(t_ms) + "," + ",".join(_fmt(v) for v in forecast) + "\n")
        stdout.flush()
    return EXIT_OK


# ---------------------------------------------------------------------------
# Parser assembly


def build_parser() -> _Parser:
    parser = _Parser(
        prog="gripforecast",
        description=(
            "Grip-force forecasting for human-robot handovers: synthesize "
            "recordings, train the 2-layer LSTM forecaster, evaluate, and "
            "serve forecasts from recorded or streaming wrench input."
        ),
    )
    sub = parser.add_subparsers(dest="command", required=True, metavar="command")

    p = sub.add_parser("synth", help="generate a synthetic handover dataset CSV")
    p.add_argument("--pairs", type=_positive_int, required=True)
    p.add_argument("--per-pair", type=_positive_int, required=True)
    p.add_argument("--seed", type=_any_int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("train", help="train the forecaster on a recordings CSV")
    p.add_argument("--data", required=True)
    p.add_argument("--test-pairs", required=True,
                   help="comma-separated pair ids held out of training")
    p.add_argument("--config", default=None,
                   help="JSON file overriding training-config defaults")
    p.add_argument("--out", required=True,
                   help="output directory (checkpoint.json, loss_history.csv)")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="evaluate a checkpoint on held-out pairs")
    p.add_argument("--model", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--test-pairs", required=True)
    p.add_argument("--out", required=True,
                   help="output directory (metrics.json, comparison.csv)")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("predict", help="forecast 70 steps from one wrench window CSV")
    p.add_argument("--model", required=True)
    p.add_argument("--input", required=True,
                   help="CSV with columns " + ",".join(WRENCH_CSV_HEADER))
    p.add_argument("--out", default=None, help="output CSV (default: stdout)")
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("stream", help="stream forecasts from wrench ticks on stdin")
    p.add_argument("--model", required=True)
    p.add_argument("--window-ms", type=_window_ms, default=260.0)
    p.set_defaults(func=cmd_stream, stdin=None, stdout=None)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else EXIT_USAGE
    try:
        return args.func(args)
    except DataError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except ContractViolation as exc:
        print(f"internal error: {exc}", file=sys.stderr)
        return EXIT_INTERNAL
    except BrokenPipeError:
        return EXIT_OK
