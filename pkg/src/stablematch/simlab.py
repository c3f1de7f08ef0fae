"""Desk-scale training experiments on directly parameterized predictions.

Each prediction is five unconstrained reals: box center, raw width and
height (mapped through softplus so decoded boxes stay valid), and one
classification logit. A training step perturbs the logits with seeded
noise (the stand-in for training randomness), matches predictions to
ground truths on the mode's cost matrix, and applies one gradient
descent update of the detached objective

    cls_loss_weight * classification + 5 * L1 + 2 * (1 - GIoU)

over matched pairs, negatives contributing only the classification
negative term. Classification targets are constants of the step: no
gradient flows from the classification loss into box parameters.

The two-prediction scenario pits a high-IoU / low-probability
prediction A against a low-IoU / high-probability prediction B for one
ground truth, the minimal setting where the default loss admits two
competing optimization paths.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from . import _kernels as K
from . import stability
from .losses import (
    LossConfig,
    f1_eval,
    grad_negative_wrt_p,
    grad_position_positive_wrt_p,
    rescale_positives,
)
from .matching import Assignment, CostWeights, cost_matrix_arrays, hungarian

# Localization loss weights mirror the matching-cost convention.
W_BBOX_LOSS = 5.0
W_GIOU_LOSS = 2.0

DEFAULT_BURN_IN = 50


class Mode(Enum):
    """DEFAULT pairs the focal loss with the plain classification cost;
    STABLE pairs the position-supervised loss with the modulated cost."""

    DEFAULT = "default"
    STABLE = "stable"


# ---------------------------------------------------------------------------
# Numerics helpers
# ---------------------------------------------------------------------------

def sigmoid(x):
    x = np.asarray(x, dtype=np.float64)
    e = np.exp(-np.abs(x))
    out = np.where(x >= 0.0, 1.0 / (1.0 + e), e / (1.0 + e))
    return out if out.ndim else float(out)


def softplus(x):
    x = np.asarray(x, dtype=np.float64)
    out = np.maximum(x, 0.0) + np.log1p(np.exp(-np.abs(x)))
    return out if out.ndim else float(out)


def inv_softplus(y):
    """Inverse of softplus for y > 0."""
    y = np.asarray(y, dtype=np.float64)
    if np.any(y <= 0.0):
        raise ValueError("inv_softplus needs positive inputs")
    out = y + np.log(-np.expm1(-y))
    return out if out.ndim else float(out)


def logit(p, eps: float = 1e-7):
    p = np.clip(np.asarray(p, dtype=np.float64), eps, 1.0 - eps)
    out = np.log(p / (1.0 - p))
    return out if out.ndim else float(out)


def decode_boxes(params: np.ndarray) -> np.ndarray:
    """Corner boxes from (cx, cy, w_raw, h_raw, logit) parameter rows."""
    cx, cy = params[:, 0], params[:, 1]
    w = softplus(params[:, 2])
    h = softplus(params[:, 3])
    return np.stack([cx - w / 2.0, cy - h / 2.0, cx + w / 2.0, cy + h / 2.0], axis=1)


# ---------------------------------------------------------------------------
# Domain types
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Scene:
    """Ground truths plus directly parameterized predictions."""

    gt_boxes: np.ndarray  # (n_gt, 4) corners
    gt_classes: np.ndarray  # (n_gt,)
    params: np.ndarray  # (n_pred, 5): cx, cy, w_raw, h_raw, logit

    def __post_init__(self) -> None:
        gt = np.array(self.gt_boxes, dtype=np.float64).reshape(-1, 4)
        classes = np.array(self.gt_classes, dtype=np.int64).reshape(-1)
        params = np.array(self.params, dtype=np.float64).reshape(-1, 5)
        if gt.shape[0] < 1:
            raise ValueError("a scene needs at least one ground truth")
        if classes.shape[0] != gt.shape[0]:
            raise ValueError("gt_classes must match gt_boxes")
        if params.shape[0] < gt.shape[0]:
            raise ValueError(
                f"need n_pred >= n_gt, got {params.shape[0]} < {gt.shape[0]}"
            )
        if not (np.all(np.isfinite(gt)) and np.all(np.isfinite(params))):
            raise ValueError("scene values must be finite")
        if np.any(gt[:, 2] < gt[:, 0]) or np.any(gt[:, 3] < gt[:, 1]):
            raise ValueError("ground-truth boxes must have non-negative extent")
        for arr in (gt, classes, params):
            arr.flags.writeable = False
        object.__setattr__(self, "gt_boxes", gt)
        object.__setattr__(self, "gt_classes", classes)
        object.__setattr__(self, "params", params)

    @property
    def n_gt(self) -> int:
        return self.gt_boxes.shape[0]

    @property
    def n_pred(self) -> int:
        return self.params.shape[0]

    def pred_boxes(self) -> np.ndarray:
        return decode_boxes(self.params)

    def probabilities(self) -> np.ndarray:
        return sigmoid(self.params[:, 4])


@dataclass(frozen=True)
class ExperimentConfig:
    loss_config: LossConfig = LossConfig()
    cost_weights: CostWeights | None = None  # defaults from loss_config.cost_weight
    mode: Mode = Mode.STABLE
    steps: int = 500
    learning_rate: float = 1e-3
    seed: int = 0
    noise_std: float = 0.1
    burn_in: int = DEFAULT_BURN_IN

    def __post_init__(self) -> None:
        if self.cost_weights is None:
            object.__setattr__(
                self, "cost_weights", CostWeights(w_cls=self.loss_config.cost_weight)
            )
        if self.steps < 1:
            raise ValueError("steps must be >= 1")
        if self.learning_rate <= 0.0:
            raise ValueError("learning_rate must be positive")
        if self.noise_std < 0.0:
            raise ValueError("noise_std must be non-negative")
        if self.burn_in < 0:
            raise ValueError("burn_in must be non-negative")


@dataclass
class StepDiagnostics:
    assignment: Assignment
    matched: np.ndarray  # prediction index per gt
    loss_total: float
    loss_cls: float
    loss_l1: float
    loss_giou: float
    pair_iou: np.ndarray  # IoU of each matched pair
    pair_p: np.ndarray  # probability of each matched prediction (at eval point)
    probabilities: np.ndarray  # all predictions, at the noise-perturbed logits
    iou_matrix: np.ndarray  # (n_pred, n_gt)
    grad_norm: float


@dataclass
class RunReport:
    """Trajectory of one seeded run of the two-prediction experiment."""

    seed: int
    mode: Mode
    matched: np.ndarray  # (steps, n_gt)
    unstable: np.ndarray  # (steps,); element 0 is 0 by convention
    flips_post_burnin: int
    winner: int  # prediction holding the first gt's match at the final step
    final_pair_iou: np.ndarray
    final_pair_p: np.ndarray
    loss_trajectory: np.ndarray  # (steps,)
    prob_trajectory: np.ndarray  # (steps, n_pred)
    iou_trajectory: np.ndarray  # (steps, n_pred), IoU against the first gt


@dataclass
class AggregateReport:
    mode: Mode
    burn_in: int
    steps: int
    runs: list[RunReport] = field(default_factory=list)

    @property
    def winner_counts(self) -> dict[int, int]:
        return dict(sorted(Counter(r.winner for r in self.runs).items()))

    @property
    def flip_counts(self) -> dict[int, int]:
        return {r.seed: r.flips_post_burnin for r in self.runs}

    @property
    def mean_unstable_post_burnin(self) -> float:
        per_run = [
            float(np.mean(r.unstable[self.burn_in + 1 :]))
            if r.unstable.size > self.burn_in + 1
            else 0.0
            for r in self.runs
        ]
        return float(np.mean(per_run)) if per_run else 0.0

    def summary_dict(self) -> dict:
        return {
            "mode": self.mode.value,
            "n_seeds": len(self.runs),
            "steps": self.steps,
            "burn_in": self.burn_in,
            "winner_counts": {str(k): v for k, v in self.winner_counts.items()},
            "flips_post_burnin": {str(k): v for k, v in sorted(self.flip_counts.items())},
            "mean_unstable_post_burnin": self.mean_unstable_post_burnin,
        }


# ---------------------------------------------------------------------------
# Scene generators
# ---------------------------------------------------------------------------

_AB_GT = (0.30, 0.30, 0.70, 0.70)
_AB_SIZE_A = 0.478  # slightly oversized box around the gt: IoU(A, gt) ~ 0.70
_AB_W_B = 0.70  # B is a wide flat slab through the gt: IoU(B, gt) ~ 0.20
_AB_H_B = 0.094
_AB_LOGIT_A = -1.386294  # p_A ~ 0.20
_AB_LOGIT_B = 1.25  # p_B ~ 0.78
_AB_GEOM_JITTER = 0.006
_AB_LOGIT_JITTER_A = 0.10
_AB_LOGIT_JITTER_B = 0.06


def make_ab_scenario(seed: int) -> Scene:
    """One ground truth, prediction A (higher IoU, lower probability) and
    prediction B (lower IoU, higher probability), with seeded jitter.

    A is a slightly oversized box around the ground truth (IoU ~ 0.7);
    B is a wide flat slab cutting through it (IoU ~ 0.2, negative GIoU).
    The two default-mode cost totals nearly tie, and both boxes have
    near-symmetric corner errors that gradient descent sheds slowly, so
    which prediction the default matching settles on is decided by the
    training noise over tens to hundreds of steps. The position-
    modulated cost down-weights B's sloppy box enough that it always
    clearly prefers A. The jitter ranges are small enough that the
    ordering constraints IoU(A) > IoU(B) and p_A < p_B always hold.
    """
    rng = np.random.default_rng([int(seed), 0xAB])
    size_a = _AB_SIZE_A + rng.uniform(-_AB_GEOM_JITTER, _AB_GEOM_JITTER)
    w_b = _AB_W_B + rng.uniform(-_AB_GEOM_JITTER, _AB_GEOM_JITTER)
    h_b = _AB_H_B + rng.uniform(-_AB_GEOM_JITTER, _AB_GEOM_JITTER) / 2.0
    off_a = rng.uniform(-_AB_GEOM_JITTER, _AB_GEOM_JITTER)
    off_b = rng.uniform(-_AB_GEOM_JITTER, _AB_GEOM_JITTER)
    logit_a = _AB_LOGIT_A + rng.uniform(-_AB_LOGIT_JITTER_A, _AB_LOGIT_JITTER_A)
    logit_b = _AB_LOGIT_B + rng.uniform(-_AB_LOGIT_JITTER_B, _AB_LOGIT_JITTER_B)
    x0, y0, x1, y1 = _AB_GT
    cx, cy = (x0 + x1) / 2.0, (y0 + y1) / 2.0
    scene = Scene(
        gt_boxes=[[x0, y0, x1, y1]],
        gt_classes=[0],
        params=[
            [cx + off_a, cy, inv_softplus(size_a), inv_softplus(size_a), logit_a],
            [cx + off_b, cy, inv_softplus(w_b), inv_softplus(h_b), logit_b],
        ],
    )
    iou_mat = K.pairwise_iou(scene.pred_boxes(), scene.gt_boxes)
    assert iou_mat[0, 0] > iou_mat[1, 0] and logit_a < logit_b
    return scene


def gen_scene(seed: int, n_gt: int, n_pred: int) -> Scene:
    """Seeded random scene: ground truths in the unit square, predictions
    initialized as perturbed copies plus low-confidence distractors."""
    if n_gt < 1 or n_pred < n_gt:
        raise ValueError(f"need n_pred >= n_gt >= 1, got n_gt={n_gt}, n_pred={n_pred}")
    rng = np.random.default_rng([int(seed), 0x5EED])
    cx = rng.uniform(0.25, 0.75, n_gt)
    cy = rng.uniform(0.25, 0.75, n_gt)
    w = rng.uniform(0.12, 0.35, n_gt)
    h = rng.uniform(0.12, 0.35, n_gt)
    gt_boxes = np.stack([cx - w / 2, cy - h / 2, cx + w / 2, cy + h / 2], axis=1)

    pcx = cx + rng.uniform(-0.06, 0.06, n_gt)
    pcy = cy + rng.uniform(-0.06, 0.06, n_gt)
    pw = w * rng.uniform(0.8, 1.25, n_gt)
    ph = h * rng.uniform(0.8, 1.25, n_gt)
    logits = rng.normal(-1.0, 0.7, n_gt)
    rows = [
        [pcx[i], pcy[i], inv_softplus(pw[i]), inv_softplus(ph[i]), logits[i]]
        for i in range(n_gt)
    ]
    n_extra = n_pred - n_gt
    dcx = rng.uniform(0.1, 0.9, n_extra)
    dcy = rng.uniform(0.1, 0.9, n_extra)
    dw = rng.uniform(0.05, 0.3, n_extra)
    dh = rng.uniform(0.05, 0.3, n_extra)
    dlogits = rng.normal(-2.0, 0.7, n_extra)
    rows += [
        [dcx[i], dcy[i], inv_softplus(dw[i]), inv_softplus(dh[i]), dlogits[i]]
        for i in range(n_extra)
    ]
    return Scene(gt_boxes=gt_boxes, gt_classes=np.zeros(n_gt, dtype=np.int64), params=rows)


# ---------------------------------------------------------------------------
# Objective, gradient, and the training step
# ---------------------------------------------------------------------------

def _giou_corner_grad(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """d GIoU(a, b) / d a; one-sided smaller-magnitude derivative at ties."""
    ax0, ay0, ax1, ay1 = a
    bx0, by0, bx1, by1 = b
    iw = min(ax1, bx1) - max(ax0, bx0)
    ih = min(ay1, by1) - max(ay0, by0)
    inter = iw * ih if (iw > 0.0 and ih > 0.0) else 0.0
    area_a = (ax1 - ax0) * (ay1 - ay0)
    union = area_a + (bx1 - bx0) * (by1 - by0) - inter
    ew = max(ax1, bx1) - min(ax0, bx0)
    eh = max(ay1, by1) - min(ay0, by0)
    enclose = ew * eh
    if union <= 0.0 or enclose <= 0.0:
        return np.zeros(4)
    d_inter = np.zeros(4)
    if inter > 0.0:
        if ax0 > bx0:
            d_inter[0] = -ih
        if ay0 > by0:
            d_inter[1] = -iw
        if ax1 < bx1:
            d_inter[2] = ih
        if ay1 < by1:
            d_inter[3] = iw
    d_area = np.array([-(ay1 - ay0), -(ax1 - ax0), ay1 - ay0, ax1 - ax0])
    d_union = d_area - d_inter
    d_enclose = np.zeros(4)
    if ax0 < bx0:
        d_enclose[0] = -eh
    if ay0 < by0:
        d_enclose[1] = -ew
    if ax1 > bx1:
        d_enclose[2] = eh
    if ay1 > by1:
        d_enclose[3] = ew
    # giou = inter/union - 1 + union/enclose
    return (d_inter * union - inter * d_union) / union**2 + (
        d_union * enclose - union * d_enclose
    ) / enclose**2


def positive_targets(
    probs: np.ndarray,
    iou_matrix: np.ndarray,
    assignment: Assignment,
    config: ExperimentConfig,
) -> np.ndarray:
    """Classification targets of the matched predictions, one per gt.

    DEFAULT mode targets 1; STABLE mode evaluates f1 on each pair's IoU
    and rescales over the scene's positives, with the rescale goal taken
    from the maximum IoU over all prediction/gt pairs.
    """
    n_gt = iou_matrix.shape[1]
    if config.mode is Mode.DEFAULT:
        return np.ones(n_gt)
    matched = assignment.pred_for_gt()
    pair_iou = iou_matrix[matched, np.arange(n_gt)]
    raw = np.asarray(
        f1_eval(config.loss_config.f1_variant, pair_iou, probs[matched]),
        dtype=np.float64,
    )
    return rescale_positives(
        raw, float(np.max(iou_matrix)), config.loss_config.rescale_strategy
    )


def _objective_parts(params, gt_boxes, assignment, cls_targets, config):
    pred_boxes = decode_boxes(params)
    probs = sigmoid(params[:, 4])
    n_gt = gt_boxes.shape[0]
    matched = assignment.pred_for_gt()
    gamma = config.loss_config.gamma

    pos_terms = K.positive_terms(
        np.ascontiguousarray(probs[matched]), np.ascontiguousarray(cls_targets), gamma
    )
    neg_mask = np.ones(params.shape[0], dtype=bool)
    neg_mask[matched] = False
    neg_p = np.ascontiguousarray(probs[neg_mask])
    neg_terms = K.negative_terms(neg_p, gamma) if neg_p.size else np.zeros(0)
    loss_cls = float(np.sum(pos_terms) + np.sum(neg_terms))

    matched_boxes = np.ascontiguousarray(pred_boxes[matched])
    l1_pairs = np.sum(np.abs(matched_boxes - gt_boxes), axis=1)
    giou_pairs = np.diagonal(K.pairwise_giou(matched_boxes, np.ascontiguousarray(gt_boxes)))
    loss_l1 = float(np.sum(l1_pairs))
    loss_giou = float(np.sum(1.0 - giou_pairs))

    total = (
        config.loss_config.cls_loss_weight * loss_cls
        + W_BBOX_LOSS * loss_l1
        + W_GIOU_LOSS * loss_giou
    )
    pair_iou = np.diagonal(
        K.pairwise_iou(matched_boxes, np.ascontiguousarray(gt_boxes))
    ).copy()
    return total, loss_cls, loss_l1, loss_giou, pair_iou, probs[matched].copy()


def scene_objective(params, gt_boxes, assignment, cls_targets, config) -> float:
    """Total step loss for fixed assignment and fixed classification targets."""
    return _objective_parts(params, gt_boxes, assignment, cls_targets, config)[0]


def scene_gradient(params, gt_boxes, assignment, cls_targets, config) -> np.ndarray:
    """Analytic gradient of scene_objective with respect to every parameter."""
    n_pred = params.shape[0]
    grad = np.zeros((n_pred, 5))
    pred_boxes = decode_boxes(params)
    probs = sigmoid(params[:, 4])
    dsig = probs * (1.0 - probs)
    dw = sigmoid(params[:, 2])  # d softplus / d raw
    dh = sigmoid(params[:, 3])
    gamma = config.loss_config.gamma
    cls_w = config.loss_config.cls_loss_weight
    matched = assignment.pred_for_gt()
    is_positive = np.zeros(n_pred, dtype=bool)
    is_positive[matched] = True

    for j, i in enumerate(matched):
        a, b = pred_boxes[i], gt_boxes[j]
        corner = W_BBOX_LOSS * np.sign(a - b) - W_GIOU_LOSS * _giou_corner_grad(a, b)
        grad[i, 0] += corner[0] + corner[2]
        grad[i, 1] += corner[1] + corner[3]
        grad[i, 2] += 0.5 * (corner[2] - corner[0]) * dw[i]
        grad[i, 3] += 0.5 * (corner[3] - corner[1]) * dh[i]
        dldp = grad_position_positive_wrt_p(float(probs[i]), float(cls_targets[j]), gamma)
        grad[i, 4] += cls_w * dldp * dsig[i]
    for i in range(n_pred):
        if not is_positive[i]:
            dldp = grad_negative_wrt_p(float(probs[i]), gamma)
            grad[i, 4] += cls_w * dldp * dsig[i]
    return grad


def match_scene(params, gt_boxes, config) -> tuple[Assignment, np.ndarray, np.ndarray]:
    """Match predictions to ground truths; returns (assignment, iou matrix, probs)."""
    pred_boxes = decode_boxes(params)
    probs = sigmoid(params[:, 4])
    iou_mat = K.pairwise_iou(pred_boxes, np.ascontiguousarray(gt_boxes))
    cost = cost_matrix_arrays(
        pred_boxes,
        probs,
        gt_boxes,
        config.cost_weights,
        config.loss_config,
        modulated=config.mode is Mode.STABLE,
    )
    return hungarian(cost), iou_mat, probs


def train_step(
    scene: Scene, config: ExperimentConfig, rng: np.random.Generator | None = None
) -> tuple[Scene, StepDiagnostics]:
    """One noisy matching + gradient-descent update.

    The seeded noise perturbs a copy of the logits for this step's
    matching and gradient evaluation only; the descent update is applied
    to the unperturbed parameters.
    """
    if rng is None:
        rng = np.random.default_rng(config.seed)
    eval_params = scene.params.copy()
    eval_params[:, 4] += rng.normal(0.0, 1.0, scene.n_pred) * config.noise_std
    assignment, iou_mat, probs = match_scene(eval_params, scene.gt_boxes, config)
    targets = positive_targets(probs, iou_mat, assignment, config)
    total, loss_cls, loss_l1, loss_giou, pair_iou, pair_p = _objective_parts(
        eval_params, scene.gt_boxes, assignment, targets, config
    )
    grad = scene_gradient(eval_params, scene.gt_boxes, assignment, targets, config)
    new_scene = Scene(
        gt_boxes=scene.gt_boxes,
        gt_classes=scene.gt_classes,
        params=scene.params - config.learning_rate * grad,
    )
    diag = StepDiagnostics(
        assignment=assignment,
        matched=assignment.pred_for_gt(),
        loss_total=total,
        loss_cls=loss_cls,
        loss_l1=loss_l1,
        loss_giou=loss_giou,
        pair_iou=pair_iou,
        pair_p=pair_p,
        probabilities=probs,
        iou_matrix=iou_mat,
        grad_norm=float(np.linalg.norm(grad)),
    )
    return new_scene, diag


# ---------------------------------------------------------------------------
# Seeded experiment runs
# ---------------------------------------------------------------------------

def run_single(config: ExperimentConfig, seed: int) -> RunReport:
    """Run the two-prediction experiment once with the given seed."""
    scene = make_ab_scenario(seed)
    rng = np.random.default_rng([int(seed), 1])
    steps, n_gt, n_pred = config.steps, scene.n_gt, scene.n_pred
    matched = np.empty((steps, n_gt), dtype=np.int64)
    losses = np.empty(steps)
    prob_traj = np.empty((steps, n_pred))
    iou_traj = np.empty((steps, n_pred))
    assignments: list[Assignment] = []
    diag = None
    for step in range(steps):
        scene, diag = train_step(scene, config, rng)
        matched[step] = diag.matched
        losses[step] = diag.loss_total
        prob_traj[step] = diag.probabilities
        iou_traj[step] = diag.iou_matrix[:, 0]
        assignments.append(diag.assignment)
    unstable = np.zeros(steps)
    for k in range(1, steps):
        unstable[k] = stability.unstable_score(assignments[k - 1], assignments[k], n_gt)
    flips = int(np.sum(unstable[config.burn_in + 1 :] > 0.0))
    return RunReport(
        seed=seed,
        mode=config.mode,
        matched=matched,
        unstable=unstable,
        flips_post_burnin=flips,
        winner=int(matched[-1, 0]),
        final_pair_iou=diag.pair_iou,
        final_pair_p=diag.pair_p,
        loss_trajectory=losses,
        prob_trajectory=prob_traj,
        iou_trajectory=iou_traj,
    )


def run_experiment(config: ExperimentConfig, n_seeds: int) -> AggregateReport:
    """Run the two-prediction experiment over consecutive seeds."""
    if n_seeds < 1:
        raise ValueError("n_seeds must be >= 1")
    report = AggregateReport(mode=config.mode, burn_in=config.burn_in, steps=config.steps)
    for k in range(n_seeds):
        report.runs.append(run_single(config, config.seed + k))
    return report
