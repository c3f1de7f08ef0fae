"""Axis-aligned box arithmetic: IoU, GIoU, L1 distance and greedy NMS.

Boxes are kept in corner (x0, y0, x1, y1) form; center-size helpers
exist for the I/O boundary. Every operation is a pure, total function
on valid boxes: degenerate (zero-area) boxes are accepted, and overlap
ratios fall back to 0 where the denominator vanishes.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from . import _kernels as K

DEFAULT_NMS_THRESHOLD = 0.8


@dataclass(frozen=True)
class Box:
    """Axis-aligned rectangle in corner form, x0 <= x1 and y0 <= y1."""

    x0: float
    y0: float
    x1: float
    y1: float

    def __post_init__(self) -> None:
        vals = (self.x0, self.y0, self.x1, self.y1)
        if not all(np.isfinite(v) for v in vals):
            raise ValueError(f"box coordinates must be finite, got {vals}")
        if self.x1 < self.x0 or self.y1 < self.y0:
            raise ValueError(f"box has negative extent: {vals}")

    @property
    def width(self) -> float:
        return self.x1 - self.x0

    @property
    def height(self) -> float:
        return self.y1 - self.y0

    @property
    def area(self) -> float:
        return self.width * self.height

    def as_array(self) -> np.ndarray:
        return np.array([self.x0, self.y0, self.x1, self.y1], dtype=np.float64)

    def to_cxcywh(self) -> tuple[float, float, float, float]:
        return (
            (self.x0 + self.x1) / 2.0,
            (self.y0 + self.y1) / 2.0,
            self.width,
            self.height,
        )

    @classmethod
    def from_cxcywh(cls, cx: float, cy: float, w: float, h: float) -> "Box":
        return cls(cx - w / 2.0, cy - h / 2.0, cx + w / 2.0, cy + h / 2.0)


def boxes_to_array(boxes: Iterable[Box]) -> np.ndarray:
    """Stack boxes into an (n, 4) float64 corner array."""
    arr = np.array([[b.x0, b.y0, b.x1, b.y1] for b in boxes], dtype=np.float64)
    return arr.reshape(-1, 4)


def iou(a: Box, b: Box) -> float:
    """Intersection over union in [0, 1]; 0 when the union has no area."""
    iw = min(a.x1, b.x1) - max(a.x0, b.x0)
    ih = min(a.y1, b.y1) - max(a.y0, b.y0)
    inter = iw * ih if (iw > 0.0 and ih > 0.0) else 0.0
    union = a.area + b.area - inter
    if union <= 0.0:
        return 0.0
    return min(max(inter / union, 0.0), 1.0)


def giou(a: Box, b: Box) -> float:
    """Generalized IoU in [-1, 1]; 0 when the enclosing box has no area."""
    iw = min(a.x1, b.x1) - max(a.x0, b.x0)
    ih = min(a.y1, b.y1) - max(a.y0, b.y0)
    inter = iw * ih if (iw > 0.0 and ih > 0.0) else 0.0
    union = a.area + b.area - inter
    enclose = (max(a.x1, b.x1) - min(a.x0, b.x0)) * (max(a.y1, b.y1) - min(a.y0, b.y0))
    if enclose <= 0.0:
        return 0.0
    iou_val = min(max(inter / union, 0.0), 1.0) if union > 0.0 else 0.0
    # rounding can push union an ulp past enclose; the penalty is >= 0
    penalty = max((enclose - union) / enclose, 0.0)
    return min(max(iou_val - penalty, -1.0), 1.0)


def rescale_giou(g: float) -> float:
    """Map a GIoU value from [-1, 1] onto [0, 1] by shift and rescale."""
    if not -1.0 <= g <= 1.0:
        raise ValueError(f"GIoU value out of range [-1, 1]: {g}")
    return (g + 1.0) / 2.0


def box_l1(a: Box, b: Box) -> float:
    """Sum of absolute differences over the four corner coordinates."""
    return abs(a.x0 - b.x0) + abs(a.y0 - b.y0) + abs(a.x1 - b.x1) + abs(a.y1 - b.y1)


def pairwise_iou(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """IoU for every (row of a) x (row of b) pair of corner boxes."""
    return K.pairwise_iou(_corner_array(a), _corner_array(b))


def pairwise_giou(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return K.pairwise_giou(_corner_array(a), _corner_array(b))


def pairwise_l1(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return K.pairwise_l1(_corner_array(a), _corner_array(b))


def _corner_array(a: np.ndarray) -> np.ndarray:
    arr = np.ascontiguousarray(a, dtype=np.float64)
    if arr.ndim != 2 or arr.shape[1] != 4:
        raise ValueError(f"expected an (n, 4) corner array, got shape {arr.shape}")
    return arr


def nms(
    predictions: Sequence[tuple[Box, float]],
    iou_threshold: float = DEFAULT_NMS_THRESHOLD,
) -> list[int]:
    """Greedy non-maximum suppression.

    Boxes are visited by descending probability (probability ties broken
    by lower index); a box is kept iff its IoU with every already-kept
    box is <= iou_threshold. Returns kept indices in visit order.
    """
    if not 0.0 <= iou_threshold <= 1.0:
        raise ValueError(f"iou_threshold must lie in [0, 1], got {iou_threshold}")
    if not predictions:
        return []
    probs = np.array([p for _, p in predictions], dtype=np.float64)
    if np.any((probs < 0.0) | (probs > 1.0)):
        raise ValueError("probabilities must lie in [0, 1]")
    boxes = boxes_to_array(b for b, _ in predictions)
    order = np.argsort(-probs, kind="stable").astype(np.int64)
    keep = K.nms_suppress(boxes, order, float(iou_threshold))
    return [int(i) for i in keep]
