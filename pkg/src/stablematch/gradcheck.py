"""Finite-difference verification of the analytic gradients.

Central differences with step h; errors are reported as
|analytic - numeric| / max(1, |analytic|). The loss-level checks cover
the three per-example derivative kinds; the scene-level check perturbs
every parameter of random scenes while holding the assignment and the
classification targets fixed, which is exactly the objective the
trainer descends.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .losses import (
    bce,
    grad_negative_wrt_p,
    grad_position_positive_wrt_p,
)
from .simlab import (
    ExperimentConfig,
    Mode,
    gen_scene,
    match_scene,
    positive_targets,
    scene_gradient,
    scene_objective,
)

DEFAULT_STEP = 1e-5
DEFAULT_TOLERANCE = 1e-4


def central_difference(fn, x: float, h: float = DEFAULT_STEP) -> float:
    return (fn(x + h) - fn(x - h)) / (2.0 * h)


def relative_error(analytic: float, numeric: float) -> float:
    return abs(analytic - numeric) / max(1.0, abs(analytic))


@dataclass
class GradCheckResult:
    name: str
    max_rel_error: float
    samples: int

    def passed(self, tolerance: float = DEFAULT_TOLERANCE) -> bool:
        return self.max_rel_error < tolerance


def check_loss_gradients(
    n_samples: int = 1000,
    seed: int = 0,
    h: float = DEFAULT_STEP,
    corrupt: bool = False,
) -> list[GradCheckResult]:
    """Verify the per-example loss derivatives on random (p, s, gamma) draws.

    corrupt=True injects a deliberate offset into the reported analytic
    values; it exists as a negative control for the checker itself.
    """
    rng = np.random.default_rng(seed)
    gammas = np.array([1.0, 2.0, 4.0])
    bump = 1e-2 if corrupt else 0.0
    worst_pos = worst_foc = worst_neg = 0.0
    for _ in range(n_samples):
        p = float(rng.uniform(0.02, 0.98))
        t = float(rng.uniform(0.0, 1.0))
        gamma = float(rng.choice(gammas))

        analytic = grad_position_positive_wrt_p(p, t, gamma) + bump
        numeric = central_difference(
            lambda x: abs(t - x) ** gamma * bce(x, t), p, h
        )
        worst_pos = max(worst_pos, relative_error(analytic, numeric))

        analytic = grad_position_positive_wrt_p(p, 1.0, gamma) + bump
        numeric = central_difference(
            lambda x: abs(1.0 - x) ** gamma * bce(x, 1.0), p, h
        )
        worst_foc = max(worst_foc, relative_error(analytic, numeric))

        analytic = grad_negative_wrt_p(p, gamma) + bump
        numeric = central_difference(lambda x: x**gamma * bce(x, 0.0), p, h)
        worst_neg = max(worst_neg, relative_error(analytic, numeric))
    return [
        GradCheckResult("position_positive", worst_pos, n_samples),
        GradCheckResult("focal_positive", worst_foc, n_samples),
        GradCheckResult("negative", worst_neg, n_samples),
    ]


def check_scene_gradients(
    n_scenes: int = 100,
    seed: int = 0,
    mode: Mode = Mode.STABLE,
    h: float = DEFAULT_STEP,
    corrupt: bool = False,
) -> GradCheckResult:
    """Verify the end-to-end step objective gradient on random scenes.

    The assignment and classification targets are computed once per
    scene and held fixed across the finite-difference perturbations.
    """
    rng = np.random.default_rng(seed)
    config = ExperimentConfig(mode=mode, noise_std=0.0)
    worst = 0.0
    for k in range(n_scenes):
        n_gt = int(rng.integers(1, 4))
        n_pred = n_gt + int(rng.integers(1, 4))
        scene = gen_scene(seed * 1000 + k, n_gt, n_pred)
        params = scene.params.copy()
        assignment, iou_mat, probs = match_scene(params, scene.gt_boxes, config)
        targets = positive_targets(probs, iou_mat, assignment, config)

        grad = scene_gradient(params, scene.gt_boxes, assignment, targets, config)
        if corrupt:
            grad = grad + 1e-2
        flat = params.reshape(-1)
        for idx in range(flat.size):
            def at(value: float) -> float:
                perturbed = params.copy().reshape(-1)
                perturbed[idx] = value
                return scene_objective(
                    perturbed.reshape(params.shape),
                    scene.gt_boxes,
                    assignment,
                    targets,
                    config,
                )

            x = float(flat[idx])
            f0, fp, fm = at(x), at(x + h), at(x - h)
            # L1/GIoU are piecewise; skip samples whose difference interval
            # straddles a kink (the analytic side takes the one-sided
            # derivative of smaller magnitude there).
            if abs((fp - f0) - (f0 - fm)) / h > 1e-2:
                continue
            numeric = (fp - fm) / (2.0 * h)
            worst = max(worst, relative_error(float(grad.reshape(-1)[idx]), numeric))
    return GradCheckResult(f"scene_objective[{mode.value}]", worst, n_scenes)
