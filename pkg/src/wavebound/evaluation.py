"""Forecast metrics and 1-D loss-landscape slices.

Everything here is read-only over immutable params and window tensors.
Squared-error metrics decompose per (horizon step, feature); the grand mean
of the per-element matrix is the reported MSE, and the per-step curve is its
mean over features.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, DataError
from .nn import ModelParams, mlp_forward_batch
from .rng import Rng


@dataclass
class MetricRecord:
    mse: float
    mae: float
    per_step_mse: np.ndarray  # (M,)
    per_element_mse: np.ndarray  # (M, K)
    sample_count: int


def evaluate(params: ModelParams, past: np.ndarray, future: np.ndarray) -> MetricRecord:
    """Average squared and absolute error of params over a window set."""
    past = np.asarray(past, dtype=np.float64)
    future = np.asarray(future, dtype=np.float64)
    if past.ndim != 3 or future.ndim != 3 or past.shape[0] != future.shape[0]:
        raise ConfigError(
            f"expected (n, L, K) past and (n, M, K) future, got {past.shape} and {future.shape}"
        )
    if past.shape[0] < 1:
        raise DataError("empty window set")
    pred = mlp_forward_batch(params, past)
    err = pred - future
    per_element = (err * err).mean(axis=0)
    return MetricRecord(
        mse=float(per_element.mean()),
        mae=float(np.abs(err).mean()),
        per_step_mse=per_element.mean(axis=1),
        per_element_mse=per_element,
        sample_count=past.shape[0],
    )


def per_step_error(params: ModelParams, past: np.ndarray, future: np.ndarray) -> np.ndarray:
    """MSE at each forecast horizon step; its mean equals the overall MSE."""
    return evaluate(params, past, future).per_step_mse


def generalization_gap(log) -> np.ndarray:
    """Per-epoch (test MSE - train MSE) series from a training log."""
    records = log.records
    if not records:
        raise ConfigError("empty training log")
    return np.array([r.test_mse - r.train_mse for r in records])


def _slice_direction(params: ModelParams, rng: Rng) -> list[np.ndarray]:
    """Random direction, rescaled rowwise to the model's own row norms.

    For a weight matrix, each output row of the direction is scaled to the
    norm of the matching weight row; bias entries are scaled to their own
    magnitudes.  Rows (or entries) of norm zero get a zero direction, so the
    perturbation never leaves the model's own scale.
    """
    direction = []
    for tensor in params.tensors():
        d = rng.normal(size=tensor.shape)
        if tensor.ndim == 2:
            d_norm = np.linalg.norm(d, axis=1, keepdims=True)
            t_norm = np.linalg.norm(tensor, axis=1, keepdims=True)
        else:
            d_norm = np.abs(d)
            t_norm = np.abs(tensor)
        safe = np.where(d_norm > 0, d_norm, 1.0)
        direction.append(d * np.where(d_norm > 0, t_norm / safe, 0.0))
    return direction


def loss_slice(
    params: ModelParams,
    direction_seed: int,
    radius: float,
    steps: int,
    past: np.ndarray,
    future: np.ndarray,
) -> list[tuple[float, float]]:
    """MSE along theta + t*d for t in [-radius, radius], t=0 sampled exactly.

    steps must be odd and >= 3 so the center point is on the grid; the
    center loss equals evaluate(params).mse exactly because the unperturbed
    parameters are reused there.
    """
    if steps < 3 or steps % 2 == 0:
        raise ConfigError("steps must be an odd integer >= 3")
    if radius <= 0:
        raise ConfigError("radius must be > 0")
    direction = _slice_direction(params, Rng(direction_seed, ("slice-direction",)))
    half = steps // 2
    offsets = np.arange(1, half + 1) * (radius / half)
    ts = np.concatenate([-offsets[::-1], [0.0], offsets])
    out = []
    for t in ts:
        if t == 0.0:
            probe = params
        else:
            probe = params.with_tensors(
                [p + t * d for p, d in zip(params.tensors(), direction)]
            )
        out.append((float(t), evaluate(probe, past, future).mse))
    return out
