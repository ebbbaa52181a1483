"""Mini-batched training loop for all risk objectives, with early stopping.

Each iteration: forward the source network on a batch; for bound-based
objectives, forward the frozen target network on the same batch; reduce to
per-element risks; turn the objective's derivative w.r.t. each risk entry
into a +-1 sign mask; push mask * 2*(pred - future)/(N*M*K) through manual
backprop; take one Adam step; then fold the new source parameters into the
exponential-moving-average target.  The optimizer step always precedes the
EMA update.

A single gradient path serves every objective (they differ only in the
mask), so trajectories that are mathematically equal (e.g. flood level 0 vs
the plain objective) are bit-identical under the same seed.
"""

from __future__ import annotations

import concurrent.futures
import dataclasses
import json
import time
from dataclasses import dataclass, field

import numpy as np

from .adam import adam_init, adam_step
from .data import WindowPair, batch_indices, stack_windows
from .ema import EmaMirror, ema_init, ema_update
from .errors import ConfigError, NumericError
from .evaluation import evaluate
from .nn import ModelParams, mlp_backward_batch, mlp_forward_batch, new_forecaster
from .objectives import ObjectiveKind, RiskMatrix, objective_mask, objective_value, per_element_risk
from .rng import Rng

LEARNING_RATE_GRID = (1e-5, 3e-5, 1e-4, 3e-4, 1e-3)
FLOOD_LEVEL_GRID = tuple(round(0.02 * i, 2) for i in range(21))  # 0.00 .. 0.40
EPSILON_GRID = (0.01, 0.001)

EVAL_NETWORKS = ("source", "target")


@dataclass
class TrainConfig:
    input_len: int
    output_len: int
    objective: ObjectiveKind
    batch_size: int = 32
    learning_rate: float = 1e-4
    ema_decay: float = 0.99
    max_epochs: int = 30
    patience: int = 3
    seed: int = 0
    hidden_dim: int = 64
    eval_network: str = "target"
    # Diagnostic: replace the target network's risk with this constant, so
    # bound objectives can be driven with a frozen bound.
    frozen_target_risk: float | None = None

    def __post_init__(self):
        if self.input_len < 1 or self.output_len < 1:
            raise ConfigError("window lengths must be >= 1")
        if self.batch_size < 1:
            raise ConfigError("batch_size must be >= 1")
        if self.learning_rate < 0:
            raise ConfigError("learning_rate must be >= 0")
        if self.max_epochs < 1:
            raise ConfigError("max_epochs must be >= 1")
        if self.patience < 1:
            raise ConfigError("patience must be >= 1")
        if self.hidden_dim < 1:
            raise ConfigError("hidden_dim must be >= 1")
        if self.eval_network not in EVAL_NETWORKS:
            raise ConfigError(f"eval_network must be one of {EVAL_NETWORKS}")
        if not isinstance(self.objective, ObjectiveKind):
            raise ConfigError("objective must be an ObjectiveKind")


@dataclass
class EpochRecord:
    epoch: int
    train_objective: float
    train_mse: float
    val_mse: float
    test_mse: float
    per_step_test_mse: np.ndarray
    seconds: float


@dataclass
class TrainLog:
    """Per-epoch training history.

    Wall-clock seconds are kept in memory but excluded from file exports by
    default so identical runs write identical bytes.
    """

    records: list[EpochRecord] = field(default_factory=list)
    eval_network: str = "target"

    def to_csv(self, path, include_timing: bool = False) -> None:
        if not self.records:
            raise ConfigError("empty training log")
        n_steps = len(self.records[0].per_step_test_mse)
        cols = ["epoch", "train_objective", "train_mse", "val_mse", "test_mse"]
        cols += [f"test_mse_step_{j}" for j in range(n_steps)]
        if include_timing:
            cols.append("seconds")
        lines = [",".join(cols)]
        for r in self.records:
            row = [str(r.epoch)] + [
                repr(v) for v in (r.train_objective, r.train_mse, r.val_mse, r.test_mse)
            ]
            row += [repr(float(v)) for v in r.per_step_test_mse]
            if include_timing:
                row.append(repr(r.seconds))
            lines.append(",".join(row))
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write("\n".join(lines) + "\n")

    def to_jsonl(self, path, include_timing: bool = False) -> None:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            for r in self.records:
                rec = {
                    "epoch": r.epoch,
                    "train_objective": r.train_objective,
                    "train_mse": r.train_mse,
                    "val_mse": r.val_mse,
                    "test_mse": r.test_mse,
                    "per_step_test_mse": [float(v) for v in r.per_step_test_mse],
                }
                if include_timing:
                    rec["seconds"] = r.seconds
                fh.write(json.dumps(rec, sort_keys=True) + "\n")


@dataclass
class TrainResult:
    params: ModelParams  # evaluated network at the best-validation epoch
    mirror: EmaMirror  # mirror snapshot at that same epoch
    log: TrainLog
    best_epoch: int
    final_source: ModelParams
    final_mirror: EmaMirror


def _as_arrays(window_set) -> tuple[np.ndarray, np.ndarray]:
    if isinstance(window_set, tuple):
        past, future = window_set
        return np.asarray(past, dtype=np.float64), np.asarray(future, dtype=np.float64)
    if isinstance(window_set, list) and (not window_set or isinstance(window_set[0], WindowPair)):
        return stack_windows(window_set)
    raise ConfigError("window set must be a (past, future) tuple or a list of WindowPair")


def _check_set(name: str, past: np.ndarray, future: np.ndarray, config: TrainConfig) -> None:
    if past.shape[0] < 1:
        raise ConfigError(f"{name} set is empty")
    if past.ndim != 3 or future.ndim != 3 or past.shape[0] != future.shape[0]:
        raise ConfigError(f"{name} set shapes {past.shape}/{future.shape} are not (n, steps, K)")
    if past.shape[1] != config.input_len or future.shape[1] != config.output_len:
        raise ConfigError(
            f"{name} set window lengths {past.shape[1]}/{future.shape[1]} do not match "
            f"config {config.input_len}/{config.output_len}"
        )


def train(config: TrainConfig, train_set, val_set, test_set, init_params: ModelParams | None = None) -> TrainResult:
    """Run the loop; return best-validation parameters, mirror, and log."""
    train_past, train_future = _as_arrays(train_set)
    val_past, val_future = _as_arrays(val_set)
    test_past, test_future = _as_arrays(test_set)
    for name, past, future in (
        ("train", train_past, train_future),
        ("validation", val_past, val_future),
        ("test", test_past, test_future),
    ):
        _check_set(name, past, future, config)
    n_features = train_past.shape[2]

    rng = Rng(config.seed)
    if init_params is None:
        params = new_forecaster(
            config.input_len, config.output_len, n_features, config.hidden_dim, rng.split("init")
        )
    else:
        if init_params.input_shape != (config.input_len, n_features):
            raise ConfigError(
                f"init params expect input {init_params.input_shape}, "
                f"data is {(config.input_len, n_features)}"
            )
        params = init_params.copy()
    mirror = ema_init(params, config.ema_decay)
    adam_state = adam_init(params)
    log = TrainLog(eval_network=config.eval_network)

    best_val = np.inf
    best_params = params.copy()
    best_mirror = mirror
    best_epoch = 0
    epochs_since_best = 0
    iteration = 0

    for epoch in range(config.max_epochs):
        started = time.perf_counter()
        order = batch_indices(
            train_past.shape[0], config.batch_size, rng.split("shuffle", epoch), shuffle=True
        )
        objective_sum = 0.0
        sample_sum = 0
        for idx in order:
            x = train_past[idx]
            y = train_future[idx]
            pred = mlp_forward_batch(params, x)
            risk = per_element_risk(pred, y)
            target_risk = None
            if config.objective.needs_target:
                if config.frozen_target_risk is not None:
                    target_risk = RiskMatrix.constant(
                        config.frozen_target_risk, risk.values.shape, risk.batch_count
                    )
                else:
                    target_pred = mlp_forward_batch(mirror.target, x)
                    target_risk = per_element_risk(target_pred, y)
            value = objective_value(config.objective, risk, target_risk)
            if not np.isfinite(value):
                raise NumericError(f"non-finite objective {value!r} at iteration {iteration}")
            mask = objective_mask(config.objective, risk, target_risk)
            n = pred.shape[0]
            upstream = mask[None, :, :] * (
                2.0 * (pred - y) / (n * config.output_len * n_features)
            )
            grads = mlp_backward_batch(params, x, upstream)
            try:
                params, adam_state = adam_step(params, grads, adam_state, config.learning_rate)
            except NumericError as exc:
                raise NumericError(f"{exc} (iteration {iteration})") from None
            mirror = ema_update(mirror, params)
            objective_sum += value * n
            sample_sum += n
            iteration += 1

        eval_params = params if config.eval_network == "source" else mirror.target
        train_metrics = evaluate(eval_params, train_past, train_future)
        val_metrics = evaluate(eval_params, val_past, val_future)
        test_metrics = evaluate(eval_params, test_past, test_future)
        log.records.append(
            EpochRecord(
                epoch=epoch,
                train_objective=objective_sum / sample_sum,
                train_mse=train_metrics.mse,
                val_mse=val_metrics.mse,
                test_mse=test_metrics.mse,
                per_step_test_mse=test_metrics.per_step_mse,
                seconds=time.perf_counter() - started,
            )
        )
        if val_metrics.mse < best_val:
            best_val = val_metrics.mse
            best_params = eval_params.copy()
            best_mirror = EmaMirror(target=mirror.target.copy(), decay=mirror.decay)
            best_epoch = epoch
            epochs_since_best = 0
        else:
            epochs_since_best += 1
            if epochs_since_best >= config.patience:
                break

    return TrainResult(
        params=best_params,
        mirror=best_mirror,
        log=log,
        best_epoch=best_epoch,
        final_source=params,
        final_mirror=mirror,
    )


SWEEP_PARAMS = ("b", "epsilon", "learning_rate")


@dataclass
class SweepRow:
    param: str
    value: float
    val_mse: float
    test_mse: float
    train_mse: float
    best_epoch: int
    result: TrainResult


def _config_with(config: TrainConfig, param: str, value: float) -> TrainConfig:
    if param == "learning_rate":
        return dataclasses.replace(config, learning_rate=value)
    if param == "b":
        if config.objective.kind not in ("flooding", "constant_flooding"):
            raise ConfigError("sweeping b requires a flooding objective")
        return dataclasses.replace(
            config, objective=ObjectiveKind(config.objective.kind, b=value)
        )
    if param == "epsilon":
        if not config.objective.needs_target:
            raise ConfigError("sweeping epsilon requires a wave objective")
        return dataclasses.replace(
            config, objective=ObjectiveKind(config.objective.kind, epsilon=value)
        )
    raise ConfigError(f"unknown sweep parameter {param!r}; choose from {SWEEP_PARAMS}")


def _sweep_point(args) -> TrainResult:
    config, train_set, val_set, test_set = args
    return train(config, train_set, val_set, test_set)


def sweep(
    config: TrainConfig,
    param: str,
    values,
    train_set,
    val_set,
    test_set,
    workers: int = 1,
) -> list[SweepRow]:
    """One full train per grid value, same seed; rows ranked by val MSE."""
    values = list(values)
    if not values:
        raise ConfigError("sweep grid must be non-empty")
    if workers < 1:
        raise ConfigError("workers must be >= 1")
    configs = [_config_with(config, param, v) for v in values]
    jobs = [(c, train_set, val_set, test_set) for c in configs]
    if workers == 1:
        results = [_sweep_point(j) for j in jobs]
    else:
        with concurrent.futures.ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_sweep_point, jobs))
    rows = []
    for value, result in zip(values, results):
        last = result.log.records[result.best_epoch]
        rows.append(
            SweepRow(
                param=param,
                value=float(value),
                val_mse=last.val_mse,
                test_mse=last.test_mse,
                train_mse=last.train_mse,
                best_epoch=result.best_epoch,
                result=result,
            )
        )
    rows.sort(key=lambda r: r.val_mse)
    return rows
