"""Stage implementations behind the CLI: each stage reads its inputs
from the scene bundle, writes its artifact back into the bundle
directory, and is independently runnable. ``run`` composes them."""
from __future__ import annotations

import json
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import matrixio
from .config import PipelineConfig
from .evaluation import GroundTruthInstance, ScoredPrediction, benchmark_suite
from .features import QueryEmbedding, accumulate_pointwise, classify
from .fusion import combine_nms, filter_external
from .projection import project_points, superpoint_mask_overlap, visibility
from .regions import hierarchical_traverse, per_frame_regions, regions_to_proposals
from .rle import decode_rle, encode_rle
from .scene import (
    LoadError,
    ProposalSet,
    Scene,
    dump_json,
    load_external_proposals,
    load_proposals,
    load_scene_bundle,
    save_proposals,
    write_ply,
    PointCloud,
)
from .superpoints import (
    SuperpointPartition,
    build_knn_graph,
    felzenszwalb_segment,
    mean_superpoint_features,
    superpoint_adjacency,
)


class MissingInputError(RuntimeError):
    """A required stage input is absent; message names the producing command."""


def subsampled_frames(scene: Scene, step: int):
    return scene.frames[::step]


# ---------------------------------------------------------------------------
# superpoints


def labels_to_runs(labels: np.ndarray) -> list[list[int]]:
    runs = []
    start = 0
    for i in range(1, len(labels) + 1):
        if i == len(labels) or labels[i] != labels[start]:
            runs.append([int(labels[start]), i - start])
            start = i
    return runs


def runs_to_labels(runs: list[list[int]], n: int) -> np.ndarray:
    labels = np.empty(n, dtype=np.int32)
    pos = 0
    for value, count in runs:
        labels[pos:pos + count] = value
        pos += count
    if pos != n:
        raise ValueError(f"label runs cover {pos} points, expected {n}")
    return labels


def stage_superpoints(scene: Scene, cfg: PipelineConfig, out_path=None) -> SuperpointPartition:
    graph = build_knn_graph(scene.cloud, cfg.knn_k)
    partition = felzenszwalb_segment(graph, cfg.fz_k, cfg.sp_min_size)
    path = Path(out_path) if out_path else scene.root / "superpoints.json"
    dump_json(path, {
        "n_points": int(partition.labels.shape[0]),
        "n_superpoints": partition.n_superpoints,
        "runs": labels_to_runs(partition.labels),
    })
    return partition


def load_superpoints(scene: Scene, path=None) -> SuperpointPartition:
    p = Path(path) if path else scene.root / "superpoints.json"
    if not p.is_file():
        raise MissingInputError(f"{p} not found; run the 'superpoints' command first")
    rec = json.loads(p.read_text())
    labels = runs_to_labels(rec["runs"], int(rec["n_points"]))
    counts = np.bincount(labels, minlength=int(rec["n_superpoints"])).astype(np.int64)
    return SuperpointPartition(labels=labels, counts=counts)


# ---------------------------------------------------------------------------
# projection / visibility


def compute_visibilities(scene: Scene, cfg: PipelineConfig) -> dict[int, np.ndarray]:
    frames = subsampled_frames(scene, cfg.frame_subsample)

    def one(frame):
        proj = project_points(scene.cloud, frame)
        return frame.frame_id, proj, visibility(proj, frame, cfg.tau_depth)

    workers = cfg.workers if cfg.workers > 0 else None
    with ThreadPoolExecutor(max_workers=workers) as pool:
        results = list(pool.map(one, frames))
    return {fid: vis for fid, _, vis in results}


def stage_project(scene: Scene, cfg: PipelineConfig, out_dir=None) -> dict[int, np.ndarray]:
    vis = compute_visibilities(scene, cfg)
    out = Path(out_dir) if out_dir else scene.root / "vis"
    out.mkdir(parents=True, exist_ok=True)
    for fid in sorted(vis):
        dump_json(out / f"visibility_{fid:06d}.json", {
            "frame_id": fid,
            "n_points": scene.n_points,
            "rle": encode_rle(vis[fid]),
        })
    return vis


def load_visibilities(scene: Scene, vis_dir=None) -> dict[int, np.ndarray]:
    out = Path(vis_dir) if vis_dir else scene.root / "vis"
    files = sorted(out.glob("visibility_*.json"))
    if not files:
        raise MissingInputError(f"no visibility files under {out}; run 'project' first")
    vis = {}
    for f in files:
        rec = json.loads(f.read_text())
        vis[int(rec["frame_id"])] = decode_rle(rec["rle"], int(rec["n_points"]))
    return vis


# ---------------------------------------------------------------------------
# 2D-guided proposals


def _normals_from_pca(cloud: PointCloud, k: int = 16) -> np.ndarray:
    from scipy.spatial import cKDTree

    tree = cKDTree(cloud.positions)
    _, idx = tree.query(cloud.positions, k=min(k + 1, cloud.count))
    idx = np.atleast_2d(idx)
    normals = np.zeros((cloud.count, 3))
    for i in range(cloud.count):
        nbrs = cloud.positions[idx[i]]
        centered = nbrs - nbrs.mean(axis=0)
        _, _, vt = np.linalg.svd(centered, full_matrices=False)
        n = vt[-1]
        # deterministic sign: first nonzero component positive
        for comp in n:
            if abs(comp) > 1e-12:
                if comp < 0:
                    n = -n
                break
        normals[i] = n
    return normals


def point_features(scene: Scene) -> np.ndarray:
    """External point features when present, else color + unit normal."""
    path = scene.root / "features" / "point_features.o3df"
    if path.is_file():
        feats = matrixio.load_matrix(path).astype(np.float64)
        if feats.shape[0] != scene.n_points:
            raise LoadError(f"{path}: {feats.shape[0]} rows for {scene.n_points} points")
        return feats
    return np.hstack([scene.cloud.colors, _normals_from_pca(scene.cloud)])


def stage_propose2d(
    scene: Scene,
    cfg: PipelineConfig,
    partition: SuperpointPartition,
    out_path=None,
) -> ProposalSet:
    graph = build_knn_graph(scene.cloud, cfg.knn_k)
    adjacency = superpoint_adjacency(partition, graph)
    sp_features = mean_superpoint_features(partition, point_features(scene))
    sp_sizes = partition.counts

    frames = subsampled_frames(scene, cfg.frame_subsample)

    def one(frame):
        masks = scene.masks.get(frame.frame_id, [])
        if not masks:
            return []
        proj = project_points(scene.cloud, frame)
        vis = visibility(proj, frame, cfg.tau_depth)
        overlaps = [
            superpoint_mask_overlap(partition, proj, vis, m) for m in masks
        ]
        return per_frame_regions(masks, overlaps, adjacency, sp_features,
                                 sp_sizes, cfg.tau_iou, cfg.tau_sim)

    workers = cfg.workers if cfg.workers > 0 else None
    with ThreadPoolExecutor(max_workers=workers) as pool:
        per_frame = list(pool.map(one, frames))

    merged = hierarchical_traverse(per_frame, sp_sizes, sp_features,
                                   cfg.tau_iou, cfg.tau_sim, order=cfg.merge_order)
    proposals = regions_to_proposals(merged, partition, cfg.min_points)
    save_proposals(Path(out_path) if out_path else scene.root / "proposals_2d.json",
                   proposals)
    return proposals


# ---------------------------------------------------------------------------
# fusion


def stage_combine(
    scene: Scene,
    cfg: PipelineConfig,
    partition: SuperpointPartition,
    only_2d: bool = False,
    only_3d: bool = False,
    out_path=None,
) -> ProposalSet:
    n = scene.n_points
    if only_3d:
        m1 = ProposalSet.empty(n)
    else:
        p2d = scene.root / "proposals_2d.json"
        if not p2d.is_file():
            raise MissingInputError(f"{p2d} not found; run 'propose2d' first")
        m1 = load_proposals(p2d, n)

    p3d = scene.root / "proposals_3d.json"
    if only_2d or not p3d.is_file():
        if only_3d and not p3d.is_file():
            raise MissingInputError(f"{p3d} not found but --only-3d was requested")
        m2 = ProposalSet.empty(n)
    else:
        raw_masks, raw_scores = load_external_proposals(p3d, n)
        m2 = filter_external(raw_masks, raw_scores, partition,
                             cfg.score_min, cfg.min_points)

    fused = combine_nms(m1, m2, cfg.tau_dup)
    save_proposals(Path(out_path) if out_path else scene.root / "proposals_final.json",
                   fused)
    return fused


# ---------------------------------------------------------------------------
# features / query


def load_view_features(scene: Scene) -> dict[tuple[int, int], np.ndarray]:
    index_path = scene.root / "clip" / "view_index.json"
    feats_path = scene.root / "clip" / "view_features.o3df"
    if not index_path.is_file() or not feats_path.is_file():
        raise MissingInputError(
            f"{index_path} / {feats_path} not found; export view features first"
        )
    matrix = matrixio.load_matrix(feats_path).astype(np.float64)
    index = json.loads(index_path.read_text())["entries"]
    return {(int(e["proposal"]), int(e["frame"])): matrix[int(e["row"])]
            for e in index}


def stage_features(
    scene: Scene,
    cfg: PipelineConfig,
    proposals: ProposalSet,
    visibilities: dict[int, np.ndarray],
    out_path=None,
) -> np.ndarray:
    view_feats = load_view_features(scene)
    if view_feats:
        dim = next(iter(view_feats.values())).shape[0]
    else:
        dim = 1
    pointwise = accumulate_pointwise(proposals, view_feats, visibilities,
                                     dim, cfg.top_views)
    out = Path(out_path) if out_path else scene.root / "features" / "pointwise_clip.o3df"
    out.parent.mkdir(exist_ok=True)
    matrixio.save_matrix(out, pointwise)
    return pointwise


def load_queries(scene: Scene) -> tuple[list[QueryEmbedding], list[int]]:
    prompts_path = scene.root / "queries" / "prompts.json"
    emb_path = scene.root / "queries" / "text_embeddings.o3df"
    if not prompts_path.is_file() or not emb_path.is_file():
        raise MissingInputError(
            f"{prompts_path} / {emb_path} not found; export text embeddings first"
        )
    rec = json.loads(prompts_path.read_text())
    prompts = rec["prompts"]
    class_ids = [int(c) for c in rec.get("class_ids", range(len(prompts)))]
    emb = matrixio.load_matrix(emb_path).astype(np.float64)
    if emb.shape[0] != len(prompts):
        raise LoadError(f"{emb_path}: {emb.shape[0]} rows for {len(prompts)} prompts")
    queries = [QueryEmbedding(p, emb[i]) for i, p in enumerate(prompts)]
    return queries, class_ids


def stage_query(
    scene: Scene,
    proposals: ProposalSet,
    pointwise: np.ndarray,
    top_k: int = 10,
    out_path=None,
) -> list[dict]:
    queries, class_ids = load_queries(scene)
    by_prompt = {q.prompt: cid for q, cid in zip(queries, class_ids)}
    instances = classify(proposals, pointwise, queries)
    records = [
        {
            "proposal": inst.proposal_index,
            "label": inst.label,
            "class_id": by_prompt.get(inst.label, -1),
            "query_score": inst.query_score,
            "confidence": inst.confidence,
        }
        for inst in instances
    ]
    top = sorted(
        (r for r in records if r["label"] != "unscored"),
        key=lambda r: (-r["query_score"], r["proposal"]),
    )[:top_k]
    dump_json(Path(out_path) if out_path else scene.root / "results.json",
              {"instances": records, "top": top})
    return records


def maybe_synthesize_view_features(
    scene: Scene, proposals: ProposalSet, visibilities: dict[int, np.ndarray]
) -> bool:
    """When no exported view features exist but synthetic ground truth
    does, derive per-(proposal, view) features from the GT class
    embeddings so the feature path still runs."""
    clip_index = scene.root / "clip" / "view_index.json"
    gt_path = scene.root / "gt_instances.json"
    if clip_index.is_file() or not gt_path.is_file():
        return False
    from .synth import load_gt_instances, synthesize_view_features

    gt_masks, gt_classes = load_gt_instances(gt_path, scene.n_points)
    queries, class_ids = load_queries(scene)
    emb = np.stack([q.embedding for q in queries])
    synthesize_view_features(proposals, gt_masks, gt_classes, emb, class_ids,
                             visibilities, scene.root)
    return True


# ---------------------------------------------------------------------------
# evaluation


def evaluate_files(pred_path, labels_path, gt_path, groups_path, report_path) -> dict:
    pred_path = Path(pred_path)
    gt_path = Path(gt_path)
    if not pred_path.is_file():
        raise MissingInputError(f"{pred_path} not found; run 'combine' first")
    if not gt_path.is_file():
        raise MissingInputError(f"{gt_path} not found")
    gt_rec = json.loads(gt_path.read_text())
    n = int(gt_rec["n_points"])
    gts = [
        GroundTruthInstance(decode_rle(inst["rle"], n), int(inst["class_id"]))
        for inst in gt_rec["instances"]
    ]
    proposals = load_proposals(pred_path, n)

    class_by_proposal: dict[int, int] = {}
    if labels_path is not None and Path(labels_path).is_file():
        for rec in json.loads(Path(labels_path).read_text())["instances"]:
            class_by_proposal[int(rec["proposal"])] = int(rec["class_id"])
    preds = [
        ScoredPrediction(
            proposals.masks[i],
            float(proposals.scores[i]),
            class_by_proposal.get(i, 0),
        )
        for i in range(len(proposals))
        if class_by_proposal.get(i, 0) >= 0
    ]
    groups = None
    if groups_path is not None and Path(groups_path).is_file():
        groups = {k: [int(c) for c in v]
                  for k, v in json.loads(Path(groups_path).read_text()).items()}
    report = benchmark_suite(preds, gts, groups)
    out = report.to_json()
    dump_json(report_path, out)
    return out


# ---------------------------------------------------------------------------
# full pipeline


def run_pipeline(
    scene_dir,
    cfg: PipelineConfig,
    only_2d: bool = False,
    only_3d: bool = False,
) -> dict:
    scene = load_scene_bundle(scene_dir)
    partition = stage_superpoints(scene, cfg)
    vis = stage_project(scene, cfg)
    if not only_3d:
        stage_propose2d(scene, cfg, partition)
    fused = stage_combine(scene, cfg, partition, only_2d=only_2d, only_3d=only_3d)
    maybe_synthesize_view_features(scene, fused, vis)
    pointwise = stage_features(scene, cfg, fused, vis)
    stage_query(scene, fused, pointwise)

    report = None
    gt_path = scene.root / "gt_instances.json"
    if gt_path.is_file():
        report = evaluate_files(
            scene.root / "proposals_final.json",
            scene.root / "results.json",
            gt_path,
            None,
            scene.root / "report.json",
        )
    return {"n_proposals": len(fused), "report": report}


def export_instance_ply(scene_dir, proposals_path, out_path) -> None:
    import colorsys

    scene = load_scene_bundle(scene_dir)
    proposals = load_proposals(proposals_path, scene.n_points)
    colors = np.full((scene.n_points, 3), 0.5)
    k = max(len(proposals), 1)
    for i in range(len(proposals)):
        colors[proposals.masks[i]] = colorsys.hsv_to_rgb(i / k, 0.9, 0.95)
    write_ply(out_path, PointCloud(scene.cloud.positions, colors))
