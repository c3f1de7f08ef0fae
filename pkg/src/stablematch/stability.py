"""Matching-consistency metrics across decoder layers or training steps.

The unstable score between two matchings is the percentage of ground
truths whose matched prediction index changed. Layerwise scores compare
each layer against its predecessor, with index 0 conventionally holding
the initial (encoder-side) matching.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from typing import Iterable, Sequence

from .matching import Assignment


@dataclass(frozen=True)
class LayerAssignments:
    """Ordered matchings, index 0 = initial proposals, 1..L = decoder layers."""

    per_layer: tuple[Assignment, ...]
    n_gt: int

    def __post_init__(self) -> None:
        for layer, assignment in enumerate(self.per_layer):
            if assignment.n_gt != self.n_gt or assignment.gt_indices() != tuple(
                range(self.n_gt)
            ):
                raise ValueError(
                    f"layer {layer} does not cover the {self.n_gt} ground truths"
                )


def unstable_score(prev: Assignment, curr: Assignment, n_gt: int) -> float:
    """Percentage of ground truths whose matched prediction changed."""
    if prev.gt_indices() != curr.gt_indices() or prev.n_gt != n_gt:
        raise ValueError("assignments must cover the same ground-truth set")
    changed = sum(
        1 for a, b in zip(prev.pred_for_gt(), curr.pred_for_gt()) if a != b
    )
    return 100.0 * changed / n_gt


def layerwise_unstable(layers: LayerAssignments) -> list[float]:
    """Unstable score of each layer against the layer before it."""
    if len(layers.per_layer) < 2:
        raise ValueError("need at least two layers to compare")
    return [
        unstable_score(layers.per_layer[i - 1], layers.per_layer[i], layers.n_gt)
        for i in range(1, len(layers.per_layer))
    ]


def write_unstable_csv(path, rows: Iterable[Sequence]) -> None:
    """Write (scene_id, layer_or_step, unstable_score) rows as CSV."""
    with open(path, "w", newline="\n") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["scene_id", "layer_or_step", "unstable_score"])
        for scene_id, layer_or_step, score in rows:
            writer.writerow([scene_id, layer_or_step, repr(float(score))])
