"""Classification losses for one-to-one matched detectors.

Two losses live here: the default focal loss, whose positive examples
are pushed toward a hard target of 1, and the position-supervised
variant, whose positive targets are a function f1 of a positional
metric (IoU) optionally rescaled so the peak target matches either the
example's best IoU or 1.0. Analytic derivatives with respect to the
predicted probability are provided for the training harness; the
positional metric is always treated as a constant, so no gradient
reaches box parameters through these losses.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from typing import Sequence

import numpy as np

from . import _kernels as K
from ._kernels import PROB_EPS


class F1Variant(Enum):
    """Positive-target functions f1(s, p) for the position-supervised loss."""

    S_HALF = "s_half"
    S = "s"
    S_SQ = "s_sq"
    S_CUBE = "s_cube"
    S_P_QUARTER = "s_p_quarter"
    S_P = "s_p"
    S2_P = "s2_p"
    EXP_NORM = "exp_norm"
    SIN_HALF_PI = "sin_half_pi"
    CONST_ONE = "const_one"


class F2Variant(Enum):
    """Modulating functions f2(s') for the position-modulated cost."""

    CONST_ONE = "const_one"
    S_QUARTER = "s_quarter"
    S_HALF = "s_half"
    S = "s"
    S_SQ = "s_sq"


class RescaleStrategy(Enum):
    """How the raw f1 targets of one example's positives are rescaled."""

    MAX_IOU = "max_iou"
    TO_ONE = "to_one"
    NONE = "none"


@dataclass(frozen=True)
class LossConfig:
    """Knobs shared by the losses and the matching costs.

    cls_loss_weight scales the classification loss inside the training
    objective; cost_weight is the classification-cost weight used when
    building cost matrices. Neither is baked into the raw loss values.
    """

    gamma: float = 2.0
    f1_variant: F1Variant = F1Variant.S_SQ
    rescale_strategy: RescaleStrategy = RescaleStrategy.MAX_IOU
    cls_loss_weight: float = 6.0
    cost_weight: float = 2.0
    f2_variant: F2Variant = F2Variant.S_HALF

    def __post_init__(self) -> None:
        if self.gamma < 0.0:
            raise ValueError(f"gamma must be >= 0, got {self.gamma}")
        if self.cls_loss_weight <= 0.0 or self.cost_weight <= 0.0:
            raise ValueError("loss and cost weights must be positive")


@dataclass(frozen=True)
class PositiveExample:
    """A matched prediction: its probability and its IoU with its ground truth."""

    probability: float
    positional_metric: float

    def __post_init__(self) -> None:
        if not 0.0 <= self.probability <= 1.0:
            raise ValueError(f"probability out of [0, 1]: {self.probability}")
        if not 0.0 <= self.positional_metric <= 1.0:
            raise ValueError(f"positional metric out of [0, 1]: {self.positional_metric}")


def clamp_probability(p: float) -> float:
    return min(max(p, PROB_EPS), 1.0 - PROB_EPS)


def bce(p: float, target: float) -> float:
    """Binary cross-entropy with a soft target; p is clamped before the logs."""
    pc = clamp_probability(p)
    return -(target * math.log(pc) + (1.0 - target) * math.log(1.0 - pc))


def f1_eval(variant: F1Variant, s, p):
    """Evaluate a positive-target function on (s, p); accepts scalars or arrays."""
    if variant is F1Variant.S_HALF:
        return s**0.5
    if variant is F1Variant.S:
        return s * 1.0
    if variant is F1Variant.S_SQ:
        return s**2
    if variant is F1Variant.S_CUBE:
        return s**3
    if variant is F1Variant.S_P_QUARTER:
        return s * p**0.25
    if variant is F1Variant.S_P:
        return s * p
    if variant is F1Variant.S2_P:
        return s**2 * p
    if variant is F1Variant.EXP_NORM:
        return (np.exp(s) - 1.0) / (math.e - 1.0)
    if variant is F1Variant.SIN_HALF_PI:
        return np.sin(s * (math.pi / 2.0))
    if variant is F1Variant.CONST_ONE:
        return np.ones_like(s) * 1.0 if isinstance(s, np.ndarray) else 1.0
    raise ValueError(f"unknown f1 variant: {variant!r}")


def f2_eval(variant: F2Variant, s):
    """Evaluate a cost-modulating function on s'; accepts scalars or arrays."""
    if variant is F2Variant.CONST_ONE:
        return np.ones_like(s) * 1.0 if isinstance(s, np.ndarray) else 1.0
    if variant is F2Variant.S_QUARTER:
        return s**0.25
    if variant is F2Variant.S_HALF:
        return s**0.5
    if variant is F2Variant.S:
        return s * 1.0
    if variant is F2Variant.S_SQ:
        return s**2
    raise ValueError(f"unknown f2 variant: {variant!r}")


def rescale_positives(
    raw_targets: Sequence[float] | np.ndarray,
    max_iou: float,
    strategy: RescaleStrategy,
) -> np.ndarray:
    """Rescale one example's raw positive targets so their peak hits the goal.

    MAX_IOU scales the peak to max_iou (the best IoU over all
    prediction/ground-truth pairs of the example), TO_ONE scales it to
    1.0, NONE returns the targets unchanged. An all-zero input is
    returned unchanged (the scale factor is defined as 1).
    """
    raw = np.asarray(raw_targets, dtype=np.float64)
    if raw.size == 0 or strategy is RescaleStrategy.NONE:
        return raw.copy()
    peak = float(np.max(raw))
    if peak <= 0.0:
        return raw.copy()
    goal = max_iou if strategy is RescaleStrategy.MAX_IOU else 1.0
    return raw * (goal / peak)


def focal_loss(
    positives: Sequence[float] | np.ndarray,
    negatives: Sequence[float] | np.ndarray,
    gamma: float,
) -> float:
    """Focal classification loss; positives target 1, negatives target 0."""
    pos = _prob_array(positives)
    neg = _prob_array(negatives)
    total = 0.0
    if pos.size:
        total += float(np.sum(K.positive_terms(pos, np.ones_like(pos), gamma)))
    if neg.size:
        total += float(np.sum(K.negative_terms(neg, gamma)))
    return total


def position_supervised_targets(
    positives: Sequence[PositiveExample],
    config: LossConfig,
    max_pair_iou: float | None = None,
) -> np.ndarray:
    """Rescaled f1 targets for one example's positives."""
    if not positives:
        return np.zeros(0)
    s = np.array([ex.positional_metric for ex in positives], dtype=np.float64)
    p = np.array([ex.probability for ex in positives], dtype=np.float64)
    raw = np.asarray(f1_eval(config.f1_variant, s, p), dtype=np.float64)
    if config.rescale_strategy is RescaleStrategy.MAX_IOU:
        if max_pair_iou is None:
            raise ValueError("MAX_IOU rescaling needs the example's max pairwise IoU")
        return rescale_positives(raw, max_pair_iou, config.rescale_strategy)
    return rescale_positives(raw, 0.0, config.rescale_strategy)


def position_supervised_loss(
    positives: Sequence[PositiveExample],
    negatives: Sequence[float] | np.ndarray,
    config: LossConfig,
    max_pair_iou: float | None = None,
) -> float:
    """Classification loss whose positive targets are f1 of the positional metric.

    With f1 = CONST_ONE and NONE rescaling this reduces bit-for-bit to
    focal_loss on the same inputs.
    """
    neg = _prob_array(negatives)
    total = 0.0
    if positives:
        p = np.array([ex.probability for ex in positives], dtype=np.float64)
        t = position_supervised_targets(positives, config, max_pair_iou)
        total += float(np.sum(K.positive_terms(p, t, config.gamma)))
    if neg.size:
        total += float(np.sum(K.negative_terms(neg, config.gamma)))
    return total


def _prob_array(values: Sequence[float] | np.ndarray) -> np.ndarray:
    arr = np.asarray(values, dtype=np.float64).reshape(-1)
    if arr.size and (np.min(arr) < 0.0 or np.max(arr) > 1.0):
        raise ValueError("probabilities must lie in [0, 1]")
    return arr


# ---------------------------------------------------------------------------
# Analytic derivatives with respect to the predicted probability
# ---------------------------------------------------------------------------

def grad_position_positive_wrt_p(p: float, target: float, gamma: float) -> float:
    """d/dp of |t - p|^gamma * BCE(p, t) with the target held constant.

    Differentiates the loss exactly as implemented: the modulator sees
    the raw probability while the logs see the clamped one, so on the
    clamp plateaus only the modulator contributes. At t == p the cusp
    derivative is taken as 0.
    """
    diff = target - p
    if diff == 0.0:
        return 0.0
    mod = abs(diff) ** gamma
    dmod = gamma * abs(diff) ** (gamma - 1.0) * math.copysign(1.0, -diff)
    grad = dmod * bce(p, target)
    if PROB_EPS < p < 1.0 - PROB_EPS:
        grad += mod * (-target / p + (1.0 - target) / (1.0 - p))
    return grad


def grad_focal_positive_wrt_p(p: float, gamma: float) -> float:
    """d/dp of the focal positive term |1 - p|^gamma * BCE(p, 1)."""
    return grad_position_positive_wrt_p(p, 1.0, gamma)


def grad_negative_wrt_p(p: float, gamma: float) -> float:
    """d/dp of the negative term p^gamma * BCE(p, 0)."""
    nll = -math.log(1.0 - clamp_probability(p))
    grad = gamma * p ** (gamma - 1.0) * nll if gamma > 0.0 and p > 0.0 else 0.0
    if PROB_EPS < p < 1.0 - PROB_EPS:
        grad += p**gamma / (1.0 - p)
    return grad
