"""Cost matrices and optimal one-to-one assignment.

The classification cost comes in two flavors: the default focal-style
cost, which depends only on the predicted probability, and the
position-modulated cost, where the probability is first multiplied by
f2 of the rescaled pairwise GIoU so that predictions with inaccurate
boxes are down-weighted. Assignments minimize the summed cost over all
injections of ground truths into predictions; among cost ties the
lexicographically smallest pair list wins, which makes every solver in
this module deterministic. ``brute_force_assign`` is the enumeration
oracle for ``hungarian``.
"""

from __future__ import annotations

import csv
import itertools
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import _kernels as K
from .geometry import Box, boxes_to_array
from .losses import LossConfig, clamp_probability, f2_eval

BRUTE_FORCE_MAX_GT = 8


@dataclass(frozen=True)
class Prediction:
    box: Box
    probability: float

    def __post_init__(self) -> None:
        if not 0.0 <= self.probability <= 1.0:
            raise ValueError(f"probability out of [0, 1]: {self.probability}")


@dataclass(frozen=True)
class GroundTruth:
    box: Box
    class_id: int = 0


@dataclass(frozen=True)
class CostWeights:
    """Weights of the three cost terms; the GIoU term enters negated."""

    w_cls: float = 2.0
    w_bbox: float = 5.0
    w_giou: float = 2.0

    def __post_init__(self) -> None:
        if self.w_cls <= 0.0 or self.w_bbox <= 0.0 or self.w_giou <= 0.0:
            raise ValueError("cost weights must be positive")


@dataclass(frozen=True)
class Assignment:
    """One-to-one map from ground truths to predictions.

    pairs holds (prediction_index, gt_index) tuples sorted by gt index;
    prediction indices absent from pairs are implicitly negatives.
    """

    pairs: tuple[tuple[int, int], ...]

    def __post_init__(self) -> None:
        gts = [j for _, j in self.pairs]
        preds = [i for i, _ in self.pairs]
        if gts != sorted(set(gts)):
            raise ValueError("pairs must be sorted by gt index, one pair per gt")
        if len(set(preds)) != len(preds):
            raise ValueError("a prediction may be matched to at most one gt")

    @classmethod
    def from_pred_for_gt(cls, pred_for_gt: Sequence[int]) -> "Assignment":
        return cls(tuple((int(p), j) for j, p in enumerate(pred_for_gt)))

    @property
    def n_gt(self) -> int:
        return len(self.pairs)

    def pred_for_gt(self) -> np.ndarray:
        return np.array([i for i, _ in self.pairs], dtype=np.int64)

    def gt_indices(self) -> tuple[int, ...]:
        return tuple(j for _, j in self.pairs)

    def matched_predictions(self) -> frozenset[int]:
        return frozenset(i for i, _ in self.pairs)


def cls_cost(p: float, gamma: float) -> float:
    """Focal-style classification matching cost.

    The positive-style term pushes matched probabilities toward 1; the
    subtracted penalty term keeps them away from 0.
    """
    pc = clamp_probability(p)
    return abs(1.0 - p) ** gamma * (-math.log(pc)) - p**gamma * (-math.log(1.0 - pc))


def position_modulated_cls_cost(p: float, s_prime: float, config: LossConfig) -> float:
    """Classification cost of the probability modulated by f2(s')."""
    if not 0.0 <= s_prime <= 1.0:
        raise ValueError(f"s' out of [0, 1]: {s_prime}")
    return cls_cost(p * f2_eval(config.f2_variant, s_prime), config.gamma)


def cost_matrix_arrays(
    pred_boxes: np.ndarray,
    pred_probs: np.ndarray,
    gt_boxes: np.ndarray,
    weights: CostWeights,
    config: LossConfig,
    modulated: bool = False,
) -> np.ndarray:
    """Dense (n_pred, n_gt) cost matrix from corner arrays and probabilities."""
    pred_boxes = np.ascontiguousarray(pred_boxes, dtype=np.float64)
    gt_boxes = np.ascontiguousarray(gt_boxes, dtype=np.float64)
    probs = np.asarray(pred_probs, dtype=np.float64)
    n_pred, n_gt = pred_boxes.shape[0], gt_boxes.shape[0]
    if n_gt < 1:
        raise ValueError("at least one ground truth is required")
    if n_pred < n_gt:
        raise ValueError(f"need n_pred >= n_gt, got {n_pred} < {n_gt}")
    l1 = K.pairwise_l1(pred_boxes, gt_boxes)
    g = K.pairwise_giou(pred_boxes, gt_boxes)
    if modulated:
        s_prime = np.clip((g + 1.0) * 0.5, 0.0, 1.0)
        q = probs[:, None] * np.asarray(f2_eval(config.f2_variant, s_prime))
        cls_vals = K.cls_cost_values(np.ascontiguousarray(q), config.gamma)
    else:
        cls_vals = K.cls_cost_values(
            np.ascontiguousarray(probs.reshape(-1, 1)), config.gamma
        )
        cls_vals = np.broadcast_to(cls_vals, (n_pred, n_gt))
    return weights.w_cls * cls_vals + weights.w_bbox * l1 + weights.w_giou * (-g)


def build_cost_matrix(
    predictions: Sequence[Prediction],
    ground_truths: Sequence[GroundTruth],
    weights: CostWeights,
    config: LossConfig,
    modulated: bool = False,
) -> np.ndarray:
    """Cost matrix between typed predictions and ground truths."""
    pred_boxes = boxes_to_array(p.box for p in predictions)
    probs = np.array([p.probability for p in predictions], dtype=np.float64)
    gt_boxes = boxes_to_array(g.box for g in ground_truths)
    return cost_matrix_arrays(pred_boxes, probs, gt_boxes, weights, config, modulated)


def assignment_total(cost: np.ndarray, pred_for_gt: Sequence[int]) -> float:
    """Summed cost of an assignment, accumulated in gt order.

    Shared by every solver so that equal pair lists always produce
    bitwise-equal totals.
    """
    total = 0.0
    for j, i in enumerate(pred_for_gt):
        total += float(cost[int(i), j])
    return total


def _validated_cost(cost: np.ndarray) -> np.ndarray:
    c = np.asarray(cost, dtype=np.float64)
    if c.ndim != 2:
        raise ValueError(f"cost matrix must be 2-D, got shape {c.shape}")
    n_pred, n_gt = c.shape
    if n_gt < 1:
        raise ValueError("cost matrix needs at least one ground-truth column")
    if n_pred < n_gt:
        raise ValueError(f"need n_pred >= n_gt, got {n_pred} < {n_gt}")
    if not np.all(np.isfinite(c)):
        raise ValueError("cost matrix entries must all be finite")
    return c


def hungarian(cost: np.ndarray) -> Assignment:
    """Minimum-total-cost assignment with lexicographic tie-breaking.

    Solves the rectangular assignment problem with a shortest
    augmenting path kernel, then fixes ground truths in index order to
    the smallest prediction index that still completes to an optimal
    total, yielding the lexicographically smallest optimal pair list.
    """
    c = _validated_cost(cost)
    n_pred, n_gt = c.shape
    pred_for_gt = np.asarray(
        K.lap_min_cols(np.ascontiguousarray(c.T)), dtype=np.int64
    ).copy()
    best_total = assignment_total(c, pred_for_gt)
    used = np.zeros(n_pred, dtype=bool)
    for j in range(n_gt):
        slack = 1e-12 * (1.0 + abs(best_total))
        for i in range(int(pred_for_gt[j])):
            if used[i]:
                continue
            cand = _complete_with(c, pred_for_gt, used, j, i, best_total, slack)
            if cand is None:
                continue
            cand_vec, cand_total = cand
            if cand_total <= best_total:
                pred_for_gt = cand_vec
                best_total = cand_total
                break
        used[int(pred_for_gt[j])] = True
    return Assignment.from_pred_for_gt(pred_for_gt)


def _complete_with(c, pred_for_gt, used, j, i, best_total, slack):
    """Best assignment that keeps gts < j as fixed, maps gt j to row i.

    Returns (pred_for_gt, total) or None when a cheap lower bound already
    rules the candidate out.
    """
    n_pred, n_gt = c.shape
    avail = ~used
    avail[i] = False  # ~used returns a fresh array; safe to edit
    rest = np.arange(j + 1, n_gt)
    bound = float(np.sum(c[pred_for_gt[:j], np.arange(j)])) + float(c[i, j])
    if rest.size:
        bound += float(np.sum(np.min(c[np.ix_(avail, rest)], axis=0)))
    if bound > best_total + slack:
        return None
    cand = pred_for_gt.copy()
    cand[j] = i
    if rest.size:
        avail_rows = np.flatnonzero(avail)
        sub = np.ascontiguousarray(c[np.ix_(avail_rows, rest)].T)
        completion = np.asarray(K.lap_min_cols(sub), dtype=np.int64)
        cand[j + 1 :] = avail_rows[completion]
    return cand, assignment_total(c, cand)


def brute_force_assign(cost: np.ndarray) -> Assignment:
    """Exhaustive minimum over all injections of gts into predictions.

    The oracle for ``hungarian``: same tie-breaking rule, factorial
    enumeration, so the ground-truth count is capped at
    ``BRUTE_FORCE_MAX_GT``.
    """
    c = _validated_cost(cost)
    n_pred, n_gt = c.shape
    if n_gt > BRUTE_FORCE_MAX_GT:
        raise ValueError(
            f"brute force is limited to {BRUTE_FORCE_MAX_GT} ground truths, got {n_gt}"
        )
    best_total = math.inf
    best: tuple[int, ...] | None = None
    for perm in itertools.permutations(range(n_pred), n_gt):
        total = assignment_total(c, perm)
        if total < best_total:  # strict: first (lexicographically smallest) wins ties
            best_total = total
            best = perm
    assert best is not None
    return Assignment.from_pred_for_gt(best)


def write_cost_matrix_csv(path, cost: np.ndarray) -> None:
    """Dump a cost matrix as CSV with a header row of gt indices."""
    c = np.asarray(cost, dtype=np.float64)
    with open(path, "w", newline="\n") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["pred_index"] + [f"gt_{j}" for j in range(c.shape[1])])
        for i in range(c.shape[0]):
            writer.writerow([i] + [repr(float(v)) for v in c[i]])
