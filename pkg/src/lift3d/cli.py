"""Command-line entry point.

Subcommands compose the full pipeline; `run` executes everything in one
shot. Exit codes: 0 ok, 2 validation error, 3 missing input.
"""
from __future__ import annotations

import argparse
import sys
from pathlib import Path

from . import pipeline
from .config import PipelineConfig
from .matrixio import MatrixError
from .scene import LoadError, SceneValidationError, load_scene_bundle

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_MISSING_INPUT = 3

CONFIG_KEYS = (
    "tau_iou", "tau_sim", "tau_depth", "tau_dup", "top_views", "min_points",
    "score_min", "frame_subsample", "merge_order", "knn_k", "fz_k",
    "sp_min_size", "workers",
)


def _add_config_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", type=Path, default=None,
                   help="flat key = value config file")
    p.add_argument("--tau-iou", type=float, dest="tau_iou")
    p.add_argument("--tau-sim", type=float, dest="tau_sim")
    p.add_argument("--tau-depth", type=float, dest="tau_depth")
    p.add_argument("--tau-dup", type=float, dest="tau_dup")
    p.add_argument("--top-views", type=int, dest="top_views")
    p.add_argument("--min-points", type=int, dest="min_points")
    p.add_argument("--score-min", type=float, dest="score_min")
    p.add_argument("--frame-subsample", type=int, dest="frame_subsample")
    p.add_argument("--order", choices=["hierarchical", "sequential"],
                   dest="merge_order")
    p.add_argument("--k", type=int, dest="knn_k")
    p.add_argument("--fz-k", type=float, dest="fz_k")
    p.add_argument("--min-size", type=int, dest="sp_min_size")
    p.add_argument("--workers", type=int, dest="workers")


def _config_from(args) -> PipelineConfig:
    overrides = {key: getattr(args, key, None) for key in CONFIG_KEYS}
    return PipelineConfig.load(getattr(args, "config", None), overrides)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="lift3d",
        description="Lift 2D instance masks to 3D instance proposals and "
                    "score text queries against them.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a synthetic scene bundle")
    p.add_argument("--seed", type=int, default=7)
    p.add_argument("--objects", type=int, default=10)
    p.add_argument("--frames", type=int, default=16)
    p.add_argument("--points-per-object", type=int, default=2000)
    p.add_argument("--spec", type=Path, default=None,
                   help="JSON scene spec (overrides the other knobs)")
    p.add_argument("--out", type=Path, required=True)

    p = sub.add_parser("superpoints", help="segment the cloud into superpoints")
    p.add_argument("--scene", type=Path, required=True)
    p.add_argument("--out", type=Path, default=None)
    _add_config_flags(p)

    p = sub.add_parser("project", help="per-frame visibility maps")
    p.add_argument("--scene", type=Path, required=True)
    p.add_argument("--out", type=Path, default=None)
    _add_config_flags(p)

    p = sub.add_parser("propose2d", help="grow and merge 2D-guided 3D proposals")
    p.add_argument("--scene", type=Path, required=True)
    p.add_argument("--out", type=Path, default=None)
    _add_config_flags(p)

    p = sub.add_parser("combine", help="fuse 2D-guided and external proposals")
    p.add_argument("--scene", type=Path, required=True)
    p.add_argument("--only-2d", action="store_true")
    p.add_argument("--only-3d", action="store_true")
    p.add_argument("--out", type=Path, default=None)
    _add_config_flags(p)

    p = sub.add_parser("features", help="accumulate pointwise view features")
    p.add_argument("--scene", type=Path, required=True)
    p.add_argument("--out", type=Path, default=None)
    _add_config_flags(p)

    p = sub.add_parser("query", help="score text queries against proposals")
    p.add_argument("--scene", type=Path, required=True)
    p.add_argument("--topk", type=int, default=10)
    p.add_argument("--out", type=Path, default=None)
    _add_config_flags(p)

    p = sub.add_parser("evaluate", help="instance segmentation metrics")
    p.add_argument("--pred", type=Path, required=True)
    p.add_argument("--labels", type=Path, default=None)
    p.add_argument("--gt", type=Path, required=True)
    p.add_argument("--groups", type=Path, default=None)
    p.add_argument("--report", type=Path, required=True)

    p = sub.add_parser("export-ply", help="instance-colored point cloud")
    p.add_argument("--scene", type=Path, required=True)
    p.add_argument("--proposals", type=Path, default=None)
    p.add_argument("--out", type=Path, required=True)

    p = sub.add_parser("run", help="full pipeline")
    p.add_argument("--scene", type=Path, required=True)
    p.add_argument("--only-2d", action="store_true")
    p.add_argument("--only-3d", action="store_true")
    _add_config_flags(p)

    return parser


def _dispatch(args) -> int:
    cmd = args.command
    if cmd == "synth":
        from .synth import SceneSpec, generate_scene

        if args.spec is not None:
            spec = SceneSpec.from_json(args.spec)
        else:
            spec = SceneSpec.grid(args.seed, args.objects, args.frames,
                                  args.points_per_object)
        generate_scene(spec, args.out)
        print(f"wrote synthetic bundle to {args.out}")
        return EXIT_OK

    if cmd == "evaluate":
        report = pipeline.evaluate_files(args.pred, args.labels, args.gt,
                                         args.groups, args.report)
        print(f"AP {report['ap']:.4f}  AP50 {report['ap50']:.4f}  "
              f"AP25 {report['ap25']:.4f}  recall50 {report['recall50']:.4f}")
        return EXIT_OK

    if cmd == "export-ply":
        proposals = args.proposals or (args.scene / "proposals_final.json")
        pipeline.export_instance_ply(args.scene, proposals, args.out)
        print(f"wrote {args.out}")
        return EXIT_OK

    cfg = _config_from(args)
    if cmd == "run":
        result = pipeline.run_pipeline(args.scene, cfg,
                                       only_2d=args.only_2d, only_3d=args.only_3d)
        print(f"pipeline done: {result['n_proposals']} proposals")
        if result["report"] is not None:
            print(f"recall50 {result['report']['recall50']:.4f}")
        return EXIT_OK

    scene = load_scene_bundle(args.scene)
    if cmd == "superpoints":
        partition = pipeline.stage_superpoints(scene, cfg, args.out)
        print(f"{partition.n_superpoints} superpoints over {scene.n_points} points")
    elif cmd == "project":
        vis = pipeline.stage_project(scene, cfg, args.out)
        print(f"visibility written for {len(vis)} frames")
    elif cmd == "propose2d":
        partition = pipeline.load_superpoints(scene)
        proposals = pipeline.stage_propose2d(scene, cfg, partition, args.out)
        print(f"{len(proposals)} 2D-guided proposals")
    elif cmd == "combine":
        partition = pipeline.load_superpoints(scene)
        fused = pipeline.stage_combine(scene, cfg, partition,
                                       only_2d=args.only_2d,
                                       only_3d=args.only_3d, out_path=args.out)
        print(f"{len(fused)} fused proposals")
    elif cmd == "features":
        from .scene import load_proposals

        fused = load_proposals(scene.root / "proposals_final.json", scene.n_points)
        vis = pipeline.load_visibilities(scene)
        pipeline.maybe_synthesize_view_features(scene, fused, vis)
        pipeline.stage_features(scene, cfg, fused, vis, args.out)
        print("pointwise features written")
    elif cmd == "query":
        from .matrixio import load_matrix
        from .scene import load_proposals

        fused = load_proposals(scene.root / "proposals_final.json", scene.n_points)
        pw_path = scene.root / "features" / "pointwise_clip.o3df"
        if not pw_path.is_file():
            raise pipeline.MissingInputError(
                f"{pw_path} not found; run 'features' first")
        pointwise = load_matrix(pw_path).astype(float)
        records = pipeline.stage_query(scene, fused, pointwise, args.topk, args.out)
        for rec in records:
            print(f"proposal {rec['proposal']}: {rec['label']} "
                  f"(score {rec['query_score']:.4f})")
    else:  # pragma: no cover
        raise AssertionError(cmd)
    return EXIT_OK


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return _dispatch(args)
    except pipeline.MissingInputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_MISSING_INPUT
    except LoadError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_MISSING_INPUT
    except (SceneValidationError, MatrixError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION


if __name__ == "__main__":
    sys.exit(main())
