"""Acceptance suite.

One test per acceptance criterion, each printing a pass/fail line; the
stated tolerances and runtime budgets are asserted directly. Run with
``pytest tests/test_acceptance.py -v -s`` to see the per-criterion
lines.
"""

import math
import time

import numpy as np

from stablematch.fusion import FusionKind, fusion_param_count, init_fusion_params
from stablematch.losses import (
    F1Variant,
    F2Variant,
    LossConfig,
    PositiveExample,
    RescaleStrategy,
    focal_loss,
    position_supervised_loss,
    rescale_positives,
)
from stablematch.matching import (
    assignment_total,
    brute_force_assign,
    cls_cost,
    hungarian,
    position_modulated_cls_cost,
)
from stablematch.simlab import ExperimentConfig, Mode, run_experiment
from stablematch.stability import unstable_score
from stablematch.matching import Assignment


def _report(criterion: str, ok: bool, detail: str = "") -> None:
    status = "PASS" if ok else "FAIL"
    print(f"[acceptance] {criterion}: {status}" + (f" ({detail})" if detail else ""))
    assert ok, f"{criterion}: {detail}"


def _bce_oracle(p, t, eps=1e-8):
    pc = min(max(p, eps), 1 - eps)
    return -(t * math.log(pc) + (1 - t) * math.log(1 - pc))


def test_criterion_1_formula_fidelity():
    """Eq. 1-4 against independent scalar oracles, 1e-12 relative error."""
    rng = np.random.default_rng(1001)
    t0 = time.perf_counter()
    worst = 0.0

    def rel(a, b):
        return abs(a - b) / max(1.0, abs(b))

    for _ in range(1000):
        gamma = float(rng.choice([0.0, 1.0, 2.0, 4.0]))
        # focal loss (Eq. 1)
        pos = rng.uniform(0, 1, rng.integers(1, 6))
        neg = rng.uniform(0, 1, rng.integers(1, 8))
        oracle = sum(abs(1 - p) ** gamma * _bce_oracle(p, 1.0) for p in pos)
        oracle += sum(p**gamma * _bce_oracle(p, 0.0) for p in neg)
        worst = max(worst, rel(focal_loss(pos, neg, gamma), oracle))

        # classification cost (Eq. 2)
        p = float(rng.uniform(0, 1))
        oracle = abs(1 - p) ** gamma * _bce_oracle(p, 1.0) - p**gamma * _bce_oracle(
            1 - p, 1.0
        )
        worst = max(worst, rel(cls_cost(p, gamma), oracle))

        # position-supervised loss (Eq. 3), rescale disabled so the scalar
        # oracle is direct
        s = float(rng.uniform(0, 1))
        config = LossConfig(
            gamma=gamma, f1_variant=F1Variant.S_SQ, rescale_strategy=RescaleStrategy.NONE
        )
        got = position_supervised_loss(
            [PositiveExample(probability=p, positional_metric=s)], neg, config
        )
        t = s**2
        oracle = abs(t - p) ** gamma * _bce_oracle(p, t)
        oracle += sum(q**gamma * _bce_oracle(q, 0.0) for q in neg)
        worst = max(worst, rel(got, oracle))

        # position-modulated cost (Eq. 4)
        s_prime = float(rng.uniform(0, 1))
        config = LossConfig(gamma=gamma, f2_variant=F2Variant.S_HALF)
        q = p * s_prime**0.5
        oracle = abs(1 - q) ** gamma * _bce_oracle(q, 1.0) - q**gamma * _bce_oracle(
            1 - q, 1.0
        )
        worst = max(worst, rel(position_modulated_cls_cost(p, s_prime, config), oracle))

    elapsed = time.perf_counter() - t0
    _report(
        "criterion 01 formula-fidelity",
        worst < 1e-12 and elapsed < 1.0,
        f"max rel err {worst:.2e}, {elapsed:.2f}s",
    )


def test_criterion_2_reduction_identities():
    """Eq. 3 -> Eq. 1 under f1 = 1 and Eq. 4 -> Eq. 2 under f2 = 1 or s' = 1."""
    rng = np.random.default_rng(1002)
    config_f1 = LossConfig(
        f1_variant=F1Variant.CONST_ONE, rescale_strategy=RescaleStrategy.NONE
    )
    config_f2 = LossConfig(f2_variant=F2Variant.CONST_ONE)
    config_default = LossConfig()
    ok = True
    for _ in range(1000):
        pos_p = rng.uniform(0, 1, rng.integers(0, 5))
        neg_p = rng.uniform(0, 1, rng.integers(0, 6))
        positives = [
            PositiveExample(probability=float(p), positional_metric=float(rng.uniform()))
            for p in pos_p
        ]
        ok &= position_supervised_loss(positives, neg_p, config_f1) == focal_loss(
            pos_p, neg_p, config_f1.gamma
        )
        p = float(rng.uniform(0, 1))
        s_prime = float(rng.uniform(0, 1))
        ok &= position_modulated_cls_cost(p, s_prime, config_f2) == cls_cost(p, 2.0)
        ok &= position_modulated_cls_cost(p, 1.0, config_default) == cls_cost(p, 2.0)
    _report("criterion 02 reduction-identities", bool(ok), "bitwise on 1000 draws")


def test_criterion_3_assignment_correctness():
    """Hungarian equals brute force on 1000 random matrices up to 7x7."""
    rng = np.random.default_rng(1003)
    t0 = time.perf_counter()
    ok = True
    for trial in range(1000):
        n_gt = int(rng.integers(1, 8))
        n_pred = int(rng.integers(n_gt, 8))
        if trial % 3 == 0:  # exercise cost ties too
            c = rng.integers(0, 5, size=(n_pred, n_gt)).astype(float)
        else:
            c = rng.uniform(-10, 10, size=(n_pred, n_gt))
        h, b = hungarian(c), brute_force_assign(c)
        ok &= h.pairs == b.pairs
        ok &= assignment_total(c, h.pred_for_gt()) == assignment_total(c, b.pred_for_gt())
    elapsed = time.perf_counter() - t0
    _report(
        "criterion 03 assignment-correctness",
        bool(ok) and elapsed < 10.0,
        f"1000 matrices, {elapsed:.2f}s",
    )


def test_criterion_4_gradient_suite():
    """Analytic gradients vs central differences, 1e-4 relative, 100 scenes/mode."""
    from stablematch.gradcheck import check_loss_gradients, check_scene_gradients

    t0 = time.perf_counter()
    results = check_loss_gradients(1000, seed=1004)
    for mode in (Mode.DEFAULT, Mode.STABLE):
        results.append(check_scene_gradients(100, seed=1004, mode=mode))
    worst = max(r.max_rel_error for r in results)
    elapsed = time.perf_counter() - t0
    _report(
        "criterion 04 gradient-suite",
        worst < 1e-4 and elapsed < 30.0,
        f"max rel err {worst:.2e}, {elapsed:.1f}s",
    )


def test_criterion_5_unstable_score_worked_example():
    """10 ground truths with one changed match give exactly 10.00%."""
    prev = Assignment.from_pred_for_gt(list(range(10)))
    curr = Assignment.from_pred_for_gt([0, 1, 2, 3, 4, 5, 6, 7, 8, 42])
    score = unstable_score(prev, curr, 10)
    _report("criterion 05 unstable-score-example", score == 10.0, f"score {score}")


def test_criterion_6_rescale_postconditions():
    """Peak target equals max IoU (MAX_IOU) or 1.0 (TO_ONE), to 1e-12."""
    rng = np.random.default_rng(1006)
    worst = 0.0
    for _ in range(1000):
        raw = rng.uniform(0.001, 1.0, rng.integers(1, 15))
        max_iou = float(rng.uniform(0.01, 1.0))
        got = rescale_positives(raw, max_iou, RescaleStrategy.MAX_IOU)
        worst = max(worst, abs(float(np.max(got)) - max_iou))
        got = rescale_positives(raw, max_iou, RescaleStrategy.TO_ONE)
        worst = max(worst, abs(float(np.max(got)) - 1.0))
    _report("criterion 06 rescale-postconditions", worst < 1e-12, f"max err {worst:.2e}")


def test_criterion_7_ab_dynamics():
    """Stable matching keeps the high-IoU prediction and never flips after
    burn-in; default matching stays measurably less stable."""
    t0 = time.perf_counter()
    stable = run_experiment(ExperimentConfig(mode=Mode.STABLE), 100)
    default = run_experiment(ExperimentConfig(mode=Mode.DEFAULT), 100)
    elapsed = time.perf_counter() - t0

    stable_wins = stable.winner_counts.get(0, 0)
    stable_flips = [r.flips_post_burnin for r in stable.runs]
    ok = (
        stable_wins >= 95
        and all(f == 0 for f in stable_flips)
        and default.mean_unstable_post_burnin > stable.mean_unstable_post_burnin
        and elapsed < 120.0
    )
    _report(
        "criterion 07 ab-dynamics",
        ok,
        f"stable wins {stable_wins}/100, stable flips {sum(stable_flips)}, "
        f"unstable default {default.mean_unstable_post_burnin:.4f} vs "
        f"stable {stable.mean_unstable_post_burnin:.4f}, {elapsed:.0f}s",
    )


def test_criterion_8_monotonicity():
    """cls cost decreasing in p; modulated cost decreasing in s' at fixed p."""
    grid = np.linspace(1e-6, 1.0 - 1e-6, 10_000)
    cls_vals = np.array([cls_cost(float(p), 2.0) for p in grid])
    ok = bool(np.all(np.diff(cls_vals) < 0))
    config = LossConfig()
    for p in (0.1, 0.5, 0.9):
        vals = np.array(
            [position_modulated_cls_cost(p, float(s), config) for s in grid]
        )
        ok &= bool(np.all(np.diff(vals) < 0))
    _report("criterion 08 monotonicity", ok, "10000-point grids")


def test_criterion_9_fusion_contracts():
    """Shapes preserved; dense widths (l+1)*dim; closed-form parameter counts."""
    from stablematch.fusion import FeatureMap, fuse, site_widths

    rng = np.random.default_rng(1009)
    ok = True
    for kind in FusionKind:
        backbone = FeatureMap(rng.normal(size=(7, 8)))
        layers = [FeatureMap(rng.normal(size=(7, 8))) for _ in range(4)]
        outputs = fuse(kind, backbone, layers, init_fusion_params(kind, 4, 8, seed=0))
        ok &= all((fm.tokens, fm.dim) == (7, 8) for fm in outputs)
    ok &= site_widths(FusionKind.DENSE, 6, 8) == [(l + 1) * 8 for l in range(1, 7)]
    for n_layers in range(1, 7):
        for dim in (4, 8, 256):
            simple = 2 * dim * dim + 2 * dim
            ok &= fusion_param_count(FusionKind.SIMPLE, n_layers, dim) == simple
            ok &= fusion_param_count(FusionKind.U_LIKE, n_layers, dim) == n_layers * simple
            dense = sum((l + 1) * dim * dim + 2 * dim for l in range(1, n_layers + 1))
            ok &= fusion_param_count(FusionKind.DENSE, n_layers, dim) == dense
            params = init_fusion_params(FusionKind.DENSE, n_layers, dim, seed=1)
            ok &= sum(p.n_params for p in params) == dense
    _report("criterion 09 fusion-contracts", bool(ok), "L in 1..6, dim in {4, 8, 256}")


def test_criterion_10_cli_determinism(tmp_path, capsys):
    """Repeated ab-demo runs with identical config are byte-identical."""
    from stablematch.cli import main

    args = ["ab-demo", "--seeds", "3", "--steps", "60", "--mode", "default"]
    dir1, dir2 = tmp_path / "a", tmp_path / "b"
    code1 = main(args + ["--out-dir", str(dir1)])
    code2 = main(args + ["--out-dir", str(dir2)])
    capsys.readouterr()
    ok = code1 == 0 and code2 == 0
    names = sorted(p.name for p in dir1.iterdir())
    ok &= names == sorted(p.name for p in dir2.iterdir())
    for name in names:
        ok &= (dir1 / name).read_bytes() == (dir2 / name).read_bytes()
    _report("criterion 10 cli-determinism", bool(ok), f"{len(names)} files compared")
