"""Command-line entry point.

Subcommands: match, ab-demo, stability, grad-check, fuse-check. Every
command is deterministic given its inputs and seed, and repeated runs
write byte-identical output files. The environment variable
STABLE_MATCH_SEED overrides the config seed everywhere.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import fusion, matching, simlab, stability
from .gradcheck import DEFAULT_TOLERANCE, check_loss_gradients, check_scene_gradients
from .serialize import FormatError, load_config, load_scene
from .simlab import ExperimentConfig, Mode


def _resolved_config(args) -> ExperimentConfig:
    config = load_config(args.config) if args.config else ExperimentConfig()
    overrides = {}
    if getattr(args, "mode", None):
        overrides["mode"] = Mode(args.mode)
    env_seed = os.environ.get("STABLE_MATCH_SEED")
    if env_seed is not None:
        overrides["seed"] = int(env_seed)
    if getattr(args, "seed", None) is not None:
        overrides["seed"] = args.seed
    if getattr(args, "steps", None) is not None:
        overrides["steps"] = args.steps
    return dataclasses.replace(config, **overrides) if overrides else config


def _print_json(doc) -> None:
    print(json.dumps(doc, indent=2, sort_keys=True))


def cmd_match(args) -> int:
    config = _resolved_config(args)
    scene = load_scene(args.scene)
    cost = matching.cost_matrix_arrays(
        scene.pred_boxes(),
        scene.probabilities(),
        scene.gt_boxes,
        config.cost_weights,
        config.loss_config,
        modulated=args.modulated,
    )
    assignment = matching.hungarian(cost)
    csv_path = None
    if args.out_dir:
        out_dir = Path(args.out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        csv_path = out_dir / "cost_matrix.csv"
        matching.write_cost_matrix_csv(csv_path, cost)
    _print_json(
        {
            "pairs": [[i, j] for i, j in assignment.pairs],
            "total_cost": matching.assignment_total(cost, assignment.pred_for_gt()),
            "modulated": bool(args.modulated),
            "cost_matrix_csv": str(csv_path) if csv_path else None,
        }
    )
    return 0


def _write_trajectory_csv(path, run: simlab.RunReport) -> None:
    with open(path, "w", newline="\n") as fh:
        fh.write("step,matched_index,p_A,p_B,iou_A,iou_B,loss\n")
        for k in range(run.matched.shape[0]):
            fh.write(
                f"{k},{int(run.matched[k, 0])},"
                f"{float(run.prob_trajectory[k, 0])!r},{float(run.prob_trajectory[k, 1])!r},"
                f"{float(run.iou_trajectory[k, 0])!r},{float(run.iou_trajectory[k, 1])!r},"
                f"{float(run.loss_trajectory[k])!r}\n"
            )


def cmd_ab_demo(args) -> int:
    config = _resolved_config(args)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    report = simlab.run_experiment(config, args.seeds)
    for run in report.runs:
        _write_trajectory_csv(out_dir / f"trajectory_seed_{run.seed}.csv", run)
    summary = report.summary_dict()
    summary["learning_rate"] = config.learning_rate
    summary["noise_std"] = config.noise_std
    with open(out_dir / "summary.json", "w", newline="\n") as fh:
        json.dump(summary, fh, indent=2, sort_keys=True)
        fh.write("\n")
    _print_json(summary)
    return 0


def cmd_stability(args) -> int:
    config = _resolved_config(args)
    report = simlab.run_experiment(config, args.seeds)
    rows = []
    for run in report.runs:
        for step in range(1, run.unstable.size):
            rows.append((run.seed, step, run.unstable[step]))
    if args.out_dir:
        out_dir = Path(args.out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        path = out_dir / "unstable_scores.csv"
        stability.write_unstable_csv(path, rows)
        _print_json(
            {
                "csv": str(path),
                "mean_unstable_post_burnin": report.mean_unstable_post_burnin,
                "mode": config.mode.value,
            }
        )
    else:
        print("scene_id,layer_or_step,unstable_score")
        for scene_id, step, score in rows:
            print(f"{scene_id},{step},{float(score)!r}")
    return 0


def cmd_grad_check(args) -> int:
    results = check_loss_gradients(args.samples, args.seed, corrupt=args.corrupt)
    for mode in (Mode.DEFAULT, Mode.STABLE):
        results.append(
            check_scene_gradients(
                args.scenes, args.seed, mode=mode, corrupt=args.corrupt
            )
        )
    ok = True
    for res in results:
        passed = res.passed(DEFAULT_TOLERANCE)
        ok = ok and passed
        print(
            f"{'PASS' if passed else 'FAIL'} {res.name}: "
            f"max_rel_error={res.max_rel_error:.3e} over {res.samples} samples "
            f"(tolerance {DEFAULT_TOLERANCE:g})"
        )
    return 0 if ok else 1


def cmd_fuse_check(args) -> int:
    kind = fusion.FusionKind(args.kind)
    rng = np.random.default_rng(args.seed)
    backbone = fusion.FeatureMap(rng.normal(size=(args.tokens, args.dim)))
    layers = [
        fusion.FeatureMap(rng.normal(size=(args.tokens, args.dim)))
        for _ in range(args.layers)
    ]
    params = fusion.init_fusion_params(kind, args.layers, args.dim, seed=args.seed)
    outputs = fusion.fuse(kind, backbone, layers, params)
    measured = sum(p.n_params for p in params)
    formula = fusion.fusion_param_count(kind, args.layers, args.dim)
    _print_json(
        {
            "kind": kind.value,
            "layers": args.layers,
            "tokens": args.tokens,
            "dim": args.dim,
            "site_concat_widths": fusion.site_widths(kind, args.layers, args.dim),
            "output_shapes": [[fm.tokens, fm.dim] for fm in outputs],
            "param_count": measured,
            "param_count_formula": formula,
            "param_count_matches": measured == formula,
        }
    )
    return 0 if measured == formula else 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="stablematch",
        description="Stable one-to-one matching experiments and one-shot computations.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("match", help="match a scene file and print the assignment")
    p.add_argument("--scene", required=True, help="scene JSON file")
    p.add_argument("--config", help="experiment config JSON file")
    p.add_argument("--modulated", action="store_true", help="use the position-modulated cost")
    p.add_argument("--mode", choices=[m.value for m in Mode])
    p.add_argument("--out-dir", help="also dump the cost matrix as CSV here")
    p.set_defaults(fn=cmd_match)

    p = sub.add_parser("ab-demo", help="run the two-prediction A/B experiment")
    p.add_argument("--config", help="experiment config JSON file")
    p.add_argument("--seeds", type=int, default=100, help="number of seeded runs")
    p.add_argument("--mode", choices=[m.value for m in Mode])
    p.add_argument("--seed", type=int, help="base seed override")
    p.add_argument("--steps", type=int, help="step-count override")
    p.add_argument("--out-dir", required=True)
    p.set_defaults(fn=cmd_ab_demo)

    p = sub.add_parser("stability", help="per-step unstable scores of seeded runs")
    p.add_argument("--config", help="experiment config JSON file")
    p.add_argument("--seeds", type=int, default=10)
    p.add_argument("--mode", choices=[m.value for m in Mode])
    p.add_argument("--seed", type=int, help="base seed override")
    p.add_argument("--steps", type=int, help="step-count override")
    p.add_argument("--out-dir", help="write CSV here instead of stdout")
    p.set_defaults(fn=cmd_stability)

    p = sub.add_parser("grad-check", help="finite-difference gradient verification")
    p.add_argument("--samples", type=int, default=1000, help="loss-level sample count")
    p.add_argument("--scenes", type=int, default=25, help="scene-level sample count")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument(
        "--corrupt",
        action="store_true",
        help="negative control: corrupt the analytic gradients and expect failure",
    )
    p.set_defaults(fn=cmd_grad_check)

    p = sub.add_parser("fuse-check", help="shape and parameter report of a fusion topology")
    p.add_argument("--kind", required=True, choices=[k.value for k in fusion.FusionKind])
    p.add_argument("--layers", type=int, default=6)
    p.add_argument("--dim", type=int, default=8)
    p.add_argument("--tokens", type=int, default=16)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(fn=cmd_fuse_check)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except (FormatError, FileNotFoundError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
