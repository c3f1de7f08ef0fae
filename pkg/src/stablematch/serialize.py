"""JSON formats for scene files and experiment configs.

Scene files carry corner boxes and probabilities (version tag "1");
internally predictions live as unconstrained parameters, so loading
inverts the sigmoid/softplus maps. Configs mirror ExperimentConfig
field names with enum values spelled lowercase.
"""

from __future__ import annotations

import json
from typing import Any

from .losses import F1Variant, F2Variant, LossConfig, RescaleStrategy
from .matching import CostWeights
from .simlab import ExperimentConfig, Mode, Scene, inv_softplus, logit

SCENE_VERSION = "1"

# Decoded prediction boxes must have positive extent for the logit/softplus
# inversions to exist; widths below this floor are lifted onto it.
_MIN_BOX_EXTENT = 1e-6


class FormatError(ValueError):
    """A scene or config document that does not match its schema."""


def _require(doc: dict, field: str, kind, where: str):
    if field not in doc:
        raise FormatError(f"{where}: missing field '{field}'")
    value = doc[field]
    if kind is float and isinstance(value, (int, float)) and not isinstance(value, bool):
        return float(value)
    if not isinstance(value, kind):
        raise FormatError(f"{where}: field '{field}' has wrong type {type(value).__name__}")
    return value


def _box4(value, where: str) -> list[float]:
    if (
        not isinstance(value, list)
        or len(value) != 4
        or not all(isinstance(v, (int, float)) and not isinstance(v, bool) for v in value)
    ):
        raise FormatError(f"{where}: field 'box' must be [x0, y0, x1, y1]")
    x0, y0, x1, y1 = (float(v) for v in value)
    if x1 < x0 or y1 < y0:
        raise FormatError(f"{where}: field 'box' has negative extent")
    return [x0, y0, x1, y1]


def scene_to_dict(scene: Scene) -> dict:
    boxes = scene.pred_boxes()
    probs = scene.probabilities()
    return {
        "version": SCENE_VERSION,
        "ground_truths": [
            {"box": [float(v) for v in scene.gt_boxes[j]], "class_id": int(scene.gt_classes[j])}
            for j in range(scene.n_gt)
        ],
        "predictions": [
            {"box": [float(v) for v in boxes[i]], "probability": float(probs[i])}
            for i in range(scene.n_pred)
        ],
    }


def scene_from_dict(doc: Any) -> Scene:
    if not isinstance(doc, dict):
        raise FormatError("scene: top level must be an object")
    version = _require(doc, "version", str, "scene")
    if version != SCENE_VERSION:
        raise FormatError(f"scene: field 'version' must be '{SCENE_VERSION}', got '{version}'")
    gts = _require(doc, "ground_truths", list, "scene")
    preds = _require(doc, "predictions", list, "scene")
    if not gts:
        raise FormatError("scene: field 'ground_truths' must be non-empty")
    gt_boxes, gt_classes = [], []
    for n, item in enumerate(gts):
        where = f"ground_truths[{n}]"
        if not isinstance(item, dict):
            raise FormatError(f"{where}: must be an object")
        gt_boxes.append(_box4(_require(item, "box", list, where), where))
        gt_classes.append(_require(item, "class_id", int, where))
    rows = []
    for n, item in enumerate(preds):
        where = f"predictions[{n}]"
        if not isinstance(item, dict):
            raise FormatError(f"{where}: must be an object")
        x0, y0, x1, y1 = _box4(_require(item, "box", list, where), where)
        prob = _require(item, "probability", float, where)
        if not 0.0 <= prob <= 1.0:
            raise FormatError(f"{where}: field 'probability' out of [0, 1]")
        w = max(x1 - x0, _MIN_BOX_EXTENT)
        h = max(y1 - y0, _MIN_BOX_EXTENT)
        rows.append(
            [(x0 + x1) / 2.0, (y0 + y1) / 2.0, inv_softplus(w), inv_softplus(h), logit(prob)]
        )
    if len(rows) < len(gt_boxes):
        raise FormatError(
            f"scene: needs at least as many predictions as ground truths, "
            f"got {len(rows)} < {len(gt_boxes)}"
        )
    return Scene(gt_boxes=gt_boxes, gt_classes=gt_classes, params=rows)


def load_scene(path) -> Scene:
    with open(path) as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise FormatError(f"scene: invalid JSON ({exc})") from exc
    return scene_from_dict(doc)


def save_scene(path, scene: Scene) -> None:
    with open(path, "w", newline="\n") as fh:
        json.dump(scene_to_dict(scene), fh, indent=2, sort_keys=True)
        fh.write("\n")


def loss_config_to_dict(config: LossConfig) -> dict:
    return {
        "gamma": config.gamma,
        "f1_variant": config.f1_variant.value,
        "rescale_strategy": config.rescale_strategy.value,
        "cls_loss_weight": config.cls_loss_weight,
        "cost_weight": config.cost_weight,
        "f2_variant": config.f2_variant.value,
    }


def _enum_by_value(enum_cls, value, field: str):
    try:
        return enum_cls(value)
    except ValueError:
        valid = ", ".join(e.value for e in enum_cls)
        raise FormatError(f"config: field '{field}' must be one of {valid}, got {value!r}")


def loss_config_from_dict(doc: dict) -> LossConfig:
    defaults = LossConfig()
    return LossConfig(
        gamma=float(doc.get("gamma", defaults.gamma)),
        f1_variant=_enum_by_value(
            F1Variant, doc.get("f1_variant", defaults.f1_variant.value), "f1_variant"
        ),
        rescale_strategy=_enum_by_value(
            RescaleStrategy,
            doc.get("rescale_strategy", defaults.rescale_strategy.value),
            "rescale_strategy",
        ),
        cls_loss_weight=float(doc.get("cls_loss_weight", defaults.cls_loss_weight)),
        cost_weight=float(doc.get("cost_weight", defaults.cost_weight)),
        f2_variant=_enum_by_value(
            F2Variant, doc.get("f2_variant", defaults.f2_variant.value), "f2_variant"
        ),
    )


def experiment_config_to_dict(config: ExperimentConfig) -> dict:
    return {
        "loss_config": loss_config_to_dict(config.loss_config),
        "cost_weights": {
            "w_cls": config.cost_weights.w_cls,
            "w_bbox": config.cost_weights.w_bbox,
            "w_giou": config.cost_weights.w_giou,
        },
        "mode": config.mode.value,
        "steps": config.steps,
        "learning_rate": config.learning_rate,
        "seed": config.seed,
        "noise_std": config.noise_std,
        "burn_in": config.burn_in,
    }


def experiment_config_from_dict(doc: Any) -> ExperimentConfig:
    if not isinstance(doc, dict):
        raise FormatError("config: top level must be an object")
    defaults = ExperimentConfig()
    loss_config = loss_config_from_dict(doc.get("loss_config", {}))
    if "cost_weights" in doc:
        cw = doc["cost_weights"]
        if not isinstance(cw, dict):
            raise FormatError("config: field 'cost_weights' must be an object")
        cost_weights = CostWeights(
            w_cls=float(cw.get("w_cls", loss_config.cost_weight)),
            w_bbox=float(cw.get("w_bbox", 5.0)),
            w_giou=float(cw.get("w_giou", 2.0)),
        )
    else:
        cost_weights = CostWeights(w_cls=loss_config.cost_weight)
    try:
        return ExperimentConfig(
            loss_config=loss_config,
            cost_weights=cost_weights,
            mode=_enum_by_value(Mode, doc.get("mode", defaults.mode.value), "mode"),
            steps=int(doc.get("steps", defaults.steps)),
            learning_rate=float(doc.get("learning_rate", defaults.learning_rate)),
            seed=int(doc.get("seed", defaults.seed)),
            noise_std=float(doc.get("noise_std", defaults.noise_std)),
            burn_in=int(doc.get("burn_in", defaults.burn_in)),
        )
    except (TypeError, ValueError) as exc:
        raise FormatError(f"config: {exc}") from exc


def load_config(path) -> ExperimentConfig:
    with open(path) as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise FormatError(f"config: invalid JSON ({exc})") from exc
    return experiment_config_from_dict(doc)
