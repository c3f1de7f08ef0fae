"""Stable one-to-one matching machinery for set-prediction detectors.

Box geometry, focal and position-supervised classification losses, the
default and position-modulated matching costs with a deterministic
Hungarian solver, matching-stability metrics, memory-fusion topologies,
and a desk-scale gradient-descent harness for the two-prediction
multi-optimization-path experiment.
"""

from ._kernels import NUMBA_ENABLED
from .geometry import (
    Box,
    box_l1,
    boxes_to_array,
    giou,
    iou,
    nms,
    pairwise_giou,
    pairwise_iou,
    pairwise_l1,
    rescale_giou,
)
from .losses import (
    F1Variant,
    F2Variant,
    LossConfig,
    PositiveExample,
    RescaleStrategy,
    bce,
    f1_eval,
    f2_eval,
    focal_loss,
    grad_focal_positive_wrt_p,
    grad_negative_wrt_p,
    grad_position_positive_wrt_p,
    position_supervised_loss,
    rescale_positives,
)
from .matching import (
    Assignment,
    CostWeights,
    GroundTruth,
    Prediction,
    assignment_total,
    brute_force_assign,
    build_cost_matrix,
    cls_cost,
    cost_matrix_arrays,
    hungarian,
    position_modulated_cls_cost,
)
from .stability import LayerAssignments, layerwise_unstable, unstable_score
from .fusion import (
    FeatureMap,
    FusionKind,
    FusionParams,
    fuse,
    fusion_param_count,
    init_fusion_params,
)
from .simlab import (
    ExperimentConfig,
    Mode,
    RunReport,
    Scene,
    StepDiagnostics,
    gen_scene,
    make_ab_scenario,
    run_experiment,
    train_step,
)

__version__ = "0.1.0"

__all__ = [
    "NUMBA_ENABLED",
    "Box",
    "box_l1",
    "boxes_to_array",
    "giou",
    "iou",
    "nms",
    "pairwise_giou",
    "pairwise_iou",
    "pairwise_l1",
    "rescale_giou",
    "F1Variant",
    "F2Variant",
    "LossConfig",
    "PositiveExample",
    "RescaleStrategy",
    "bce",
    "f1_eval",
    "f2_eval",
    "focal_loss",
    "grad_focal_positive_wrt_p",
    "grad_negative_wrt_p",
    "grad_position_positive_wrt_p",
    "position_supervised_loss",
    "rescale_positives",
    "Assignment",
    "CostWeights",
    "GroundTruth",
    "Prediction",
    "assignment_total",
    "brute_force_assign",
    "build_cost_matrix",
    "cls_cost",
    "cost_matrix_arrays",
    "hungarian",
    "position_modulated_cls_cost",
    "LayerAssignments",
    "layerwise_unstable",
    "unstable_score",
    "FeatureMap",
    "FusionKind",
    "FusionParams",
    "fuse",
    "fusion_param_count",
    "init_fusion_params",
    "ExperimentConfig",
    "Mode",
    "RunReport",
    "Scene",
    "StepDiagnostics",
    "gen_scene",
    "make_ab_scenario",
    "run_experiment",
    "train_step",
    "__version__",
]
