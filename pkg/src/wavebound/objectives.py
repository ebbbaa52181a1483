"""Per-output empirical risk and the training objectives built on it.

For a batch of N prediction/target pairs of shape (M, K), the per-element
risk matrix holds the batch mean of squared errors at each prediction step j
and feature k; its grand mean is the ordinary MSE.

Objectives, as functions of the per-element risks r_jk (source) and, for the
wavebound variants, the target network's risks r*_jk:

  plain               mean_jk r_jk
  flooding(b)         |mean_jk r_jk - b| + b
  constant_flooding(b) mean_jk (|r_jk - b| + b)
  wave_avg(eps)       |mean r - mean r* + eps| + (mean r* - eps)
  wave_indiv(eps)     mean_jk (|r_jk - (r*_jk - eps)| + (r*_jk - eps))

The additive constant outside each absolute value does not change gradients;
it is kept so the reported value equals the raw risk whenever the risk sits
above its bound.  All |r - b| + b terms are evaluated piecewise (r when
r >= b, else 2b - r), which makes the above-bound branch bit-exact and keeps
an infinite-epsilon sentinel (bound = -inf) from producing NaN.  Target
risks are constants under differentiation: no gradient flows into the
network that produced them.  Effective bounds may be negative; nothing is
clamped.

Gradient handling reduces to a sign mask: the derivative of each objective
w.r.t. r_jk is +1 when the risk sits at or above its bound (descent) and -1
below it (ascent).  Exact ties resolve to +1.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError

OBJECTIVE_KINDS = ("plain", "flooding", "constant_flooding", "wave_avg", "wave_indiv")


@dataclass(frozen=True)
class ObjectiveKind:
    """Training objective selector with its constant (b or epsilon)."""

    kind: str
    b: float = 0.0
    epsilon: float = 0.0

    def __post_init__(self):
        if self.kind not in OBJECTIVE_KINDS:
            raise ConfigError(f"unknown objective {self.kind!r}")
        if self.b < 0.0:
            raise ConfigError("flood level b must be >= 0")
        if self.epsilon < 0.0:
            raise ConfigError("epsilon must be >= 0")

    @classmethod
    def plain(cls) -> "ObjectiveKind":
        return cls("plain")

    @classmethod
    def flooding(cls, b: float) -> "ObjectiveKind":
        return cls("flooding", b=b)

    @classmethod
    def constant_flooding(cls, b: float) -> "ObjectiveKind":
        return cls("constant_flooding", b=b)

    @classmethod
    def wave_avg(cls, epsilon: float) -> "ObjectiveKind":
        return cls("wave_avg", epsilon=epsilon)

    @classmethod
    def wave_indiv(cls, epsilon: float) -> "ObjectiveKind":
        return cls("wave_indiv", epsilon=epsilon)

    @property
    def needs_target(self) -> bool:
        return self.kind in ("wave_avg", "wave_indiv")

    def describe(self) -> str:
        if self.kind == "plain":
            return "plain"
        if self.kind in ("flooding", "constant_flooding"):
            return f"{self.kind}(b={self.b})"
        return f"{self.kind}(epsilon={self.epsilon})"


@dataclass
class RiskMatrix:
    """Batch-averaged squared error per (prediction step, feature)."""

    values: np.ndarray  # (M, K), entries >= 0
    batch_count: int

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.values.ndim != 2:
            raise ConfigError(f"risk matrix must be 2-D, got shape {self.values.shape}")
        if self.batch_count < 1:
            raise ConfigError("batch_count must be >= 1")

    @property
    def mean(self) -> float:
        return float(self.values.mean())

    @classmethod
    def constant(cls, value: float, shape: tuple[int, int], batch_count: int = 1) -> "RiskMatrix":
        return cls(np.full(shape, float(value)), batch_count)


def per_element_risk(pred: np.ndarray, target: np.ndarray) -> RiskMatrix:
    """(N, M, K) pred/target -> RiskMatrix of batch-mean squared errors."""
    pred = np.asarray(pred, dtype=np.float64)
    target = np.asarray(target, dtype=np.float64)
    if pred.shape != target.shape:
        raise ConfigError(f"pred shape {pred.shape} != target shape {target.shape}")
    if pred.ndim != 3 or pred.shape[0] < 1:
        raise ConfigError(f"expected (N, M, K) with N >= 1, got {pred.shape}")
    err = pred - target
    return RiskMatrix((err * err).mean(axis=0), batch_count=pred.shape[0])


def flood_elementwise(values: np.ndarray, bound) -> np.ndarray:
    """|v - bound| + bound, piecewise: v at or above the bound, 2*bound - v below."""
    values = np.asarray(values, dtype=np.float64)
    return np.where(values >= bound, values, 2.0 * np.asarray(bound) - values)


def flooding_objective(risk_mean: float, b: float) -> float:
    """|R - b| + b: the risk itself above the flood level, reflected below."""
    return risk_mean if risk_mean >= b else 2.0 * b - risk_mean


def constant_flooding_objective(risk: RiskMatrix, b: float) -> float:
    """Element-wise flooding at a shared level b, then the grand mean."""
    return float(flood_elementwise(risk.values, b).mean())


def wave_elementwise(source_values: np.ndarray, target_values: np.ndarray, epsilon: float) -> np.ndarray:
    """Element-wise risk flooded at the dynamic bound target - epsilon."""
    source_values = np.asarray(source_values, dtype=np.float64)
    target_values = np.asarray(target_values, dtype=np.float64)
    if source_values.shape != target_values.shape:
        raise ConfigError(
            f"source risk shape {source_values.shape} != target {target_values.shape}"
        )
    return flood_elementwise(source_values, target_values - epsilon)


def wave_objective_indiv(source: RiskMatrix, target: RiskMatrix, epsilon: float) -> float:
    """Element-wise dynamic bound r*_jk - eps from the target network.

    Target risks are constants here; the caller must not route gradients
    through them.
    """
    return float(wave_elementwise(source.values, target.values, epsilon).mean())


def wave_objective_avg(source_mean: float, target_mean: float, epsilon: float) -> float:
    """Scalar variant: one dynamic bound on the batch-mean risk."""
    bound = target_mean - epsilon
    return source_mean if source_mean >= bound else 2.0 * bound - source_mean


def gradient_sign_mask(source: RiskMatrix, target: RiskMatrix, epsilon: float) -> np.ndarray:
    """+1 where r_jk >= r*_jk - eps (descent), -1 below (ascent).

    Ties at the bound resolve to +1.  The trainer multiplies the per-element
    MSE upstream gradients by this mask scaled by 1/(M*K).
    """
    if source.values.shape != target.values.shape:
        raise ConfigError(
            f"source risk shape {source.values.shape} != target {target.values.shape}"
        )
    return np.where(source.values >= target.values - epsilon, 1.0, -1.0)


def _sign_at_or_above(x: float, bound: float) -> float:
    return 1.0 if x >= bound else -1.0


def objective_value(
    kind: ObjectiveKind, source: RiskMatrix, target: RiskMatrix | None = None
) -> float:
    """Scalar training objective for one batch."""
    if kind.needs_target and target is None:
        raise ConfigError(f"{kind.kind} needs a target risk matrix")
    if kind.kind == "plain":
        return source.mean
    if kind.kind == "flooding":
        return flooding_objective(source.mean, kind.b)
    if kind.kind == "constant_flooding":
        return constant_flooding_objective(source, kind.b)
    if kind.kind == "wave_avg":
        return wave_objective_avg(source.mean, target.mean, kind.epsilon)
    return wave_objective_indiv(source, target, kind.epsilon)


def objective_mask(
    kind: ObjectiveKind, source: RiskMatrix, target: RiskMatrix | None = None
) -> np.ndarray:
    """(M, K) matrix of +-1: the objective's derivative w.r.t. each r_jk."""
    if kind.needs_target and target is None:
        raise ConfigError(f"{kind.kind} needs a target risk matrix")
    shape = source.values.shape
    if kind.kind == "plain":
        return np.ones(shape)
    if kind.kind == "flooding":
        return np.full(shape, _sign_at_or_above(source.mean, kind.b))
    if kind.kind == "constant_flooding":
        return np.where(source.values >= kind.b, 1.0, -1.0)
    if kind.kind == "wave_avg":
        return np.full(shape, _sign_at_or_above(source.mean, target.mean - kind.epsilon))
    return gradient_sign_mask(source, target, kind.epsilon)
