"""2D-guided 3D region growing and cross-frame merging.

Per frame, each 2D mask seeds a region from the best-overlapping
superpoint, which then absorbs every candidate superpoint that is
adjacent to the region and feature-similar to some member (fixed-point
closure, order independent). Regions from different frames are merged
agglomeratively, gated by point-weighted overlap (> tau_iou) AND cosine
feature similarity (> tau_sim), either up a binary tree over the frame
sequence or by a sequential left fold.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .scene import SOURCE_GUIDED_2D, Mask2D, ProposalSet
from .superpoints import SuperpointPartition

DEFAULT_TAU_IOU = 0.9
DEFAULT_TAU_SIM = 0.9
DEFAULT_MIN_POINTS = 50


@dataclass(frozen=True)
class Region3D:
    superpoint_ids: frozenset[int]
    point_count: int
    feature: np.ndarray
    source_frames: frozenset[int]


def make_region(
    sp_ids, sp_sizes: np.ndarray, sp_features: np.ndarray, frames
) -> Region3D:
    """Build a region with its feature as the point-count-weighted mean of
    member superpoint features."""
    ids = sorted(int(u) for u in sp_ids)
    sizes = sp_sizes[ids].astype(np.float64)
    total = sizes.sum()
    feature = (sp_features[ids] * sizes[:, None]).sum(axis=0) / total
    return Region3D(
        superpoint_ids=frozenset(ids),
        point_count=int(total),
        feature=feature,
        source_frames=frozenset(int(f) for f in frames),
    )


def _cosine(a: np.ndarray, b: np.ndarray) -> float:
    na = np.linalg.norm(a)
    nb = np.linalg.norm(b)
    if na == 0.0 or nb == 0.0:
        return 0.0
    return float(np.dot(a, b) / (na * nb))


def grow_region(
    mask: Mask2D,
    overlaps: np.ndarray,
    adjacency: list[set[int]],
    sp_features: np.ndarray,
    sp_sizes: np.ndarray,
    tau_iou: float = DEFAULT_TAU_IOU,
    tau_sim: float = DEFAULT_TAU_SIM,
) -> Region3D | None:
    candidates = set(np.flatnonzero(overlaps > tau_iou).tolist())
    if not candidates:
        return None
    seed = min(candidates, key=lambda u: (-overlaps[u], u))
    members = {seed}
    remaining = candidates - members
    while True:
        added = set()
        for u in remaining:
            if not (adjacency[u] & members):
                continue
            best = max(_cosine(sp_features[m], sp_features[u]) for m in members)
            if best > tau_sim:
                added.add(u)
        if not added:
            break
        members |= added
        remaining -= added
    return make_region(members, sp_sizes, sp_features, [mask.frame_id])


def per_frame_regions(
    masks: list[Mask2D],
    overlaps_per_mask: list[np.ndarray],
    adjacency: list[set[int]],
    sp_features: np.ndarray,
    sp_sizes: np.ndarray,
    tau_iou: float = DEFAULT_TAU_IOU,
    tau_sim: float = DEFAULT_TAU_SIM,
) -> list[Region3D]:
    regions = []
    for mask, overlaps in zip(masks, overlaps_per_mask):
        r = grow_region(mask, overlaps, adjacency, sp_features, sp_sizes,
                        tau_iou, tau_sim)
        if r is not None:
            regions.append(r)
    return regions


def region_overlap(a: Region3D, b: Region3D, sp_sizes: np.ndarray) -> float:
    inter = a.superpoint_ids & b.superpoint_ids
    union = a.superpoint_ids | b.superpoint_ids
    if not union:
        return 0.0
    ids_union = np.fromiter(union, dtype=np.int64)
    denom = float(sp_sizes[ids_union].sum())
    if not inter:
        return 0.0
    ids_inter = np.fromiter(inter, dtype=np.int64)
    return float(sp_sizes[ids_inter].sum()) / denom


def region_similarity(a: Region3D, b: Region3D) -> float:
    return _cosine(a.feature, b.feature)


def compatibility_matrix(
    regions: list[Region3D],
    sp_sizes: np.ndarray,
    tau_iou: float = DEFAULT_TAU_IOU,
    tau_sim: float = DEFAULT_TAU_SIM,
) -> np.ndarray:
    k = len(regions)
    c = np.zeros((k, k), dtype=bool)
    for i in range(k):
        for j in range(i + 1, k):
            ok = (
                region_overlap(regions[i], regions[j], sp_sizes) > tau_iou
                and region_similarity(regions[i], regions[j]) > tau_sim
            )
            c[i, j] = c[j, i] = ok
    return c


def agglomerative_merge(
    regions: list[Region3D],
    sp_sizes: np.ndarray,
    sp_features: np.ndarray,
    tau_iou: float = DEFAULT_TAU_IOU,
    tau_sim: float = DEFAULT_TAU_SIM,
) -> list[Region3D]:
    """Repeatedly merge the compatible pair with the highest similarity
    (ties: higher overlap, then lowest index pair) until no pair is
    compatible. The merged region replaces the lower index."""
    active = list(regions)
    if len(active) < 2:
        return active

    k = len(active)
    ov = np.zeros((k, k))
    sim = np.zeros((k, k))
    for i in range(k):
        for j in range(i + 1, k):
            ov[i, j] = ov[j, i] = region_overlap(active[i], active[j], sp_sizes)
            sim[i, j] = sim[j, i] = region_similarity(active[i], active[j])

    while True:
        best = None
        for i in range(len(active)):
            for j in range(i + 1, len(active)):
                if ov[i, j] > tau_iou and sim[i, j] > tau_sim:
                    key = (sim[i, j], ov[i, j], -i, -j)
                    if best is None or key > best[0]:
                        best = (key, i, j)
        if best is None:
            return active
        _, i, j = best
        merged = make_region(
            active[i].superpoint_ids | active[j].superpoint_ids,
            sp_sizes,
            sp_features,
            active[i].source_frames | active[j].source_frames,
        )
        active[i] = merged
        del active[j]
        ov = np.delete(np.delete(ov, j, 0), j, 1)
        sim = np.delete(np.delete(sim, j, 0), j, 1)
        for t in range(len(active)):
            if t == i:
                continue
            ov[i, t] = ov[t, i] = region_overlap(merged, active[t], sp_sizes)
            sim[i, t] = sim[t, i] = region_similarity(merged, active[t])


def hierarchical_traverse(
    per_frame_sets: list[list[Region3D]],
    sp_sizes: np.ndarray,
    sp_features: np.ndarray,
    tau_iou: float = DEFAULT_TAU_IOU,
    tau_sim: float = DEFAULT_TAU_SIM,
    order: str = "hierarchical",
    trace: list | None = None,
) -> list[Region3D]:
    """Merge per-frame region sets into one set.

    ``hierarchical`` splits the frame range at the midpoint and merges the
    two recursive results (binary tree); ``sequential`` folds left over the
    frames. ``trace`` (if given) records one ``((s_l, e_l), (s_r, e_r))``
    tuple per merge call, 1-indexed frame ranges.
    """
    t = len(per_frame_sets)
    if t == 0:
        return []

    def merge(rs, left_range, right_range):
        if trace is not None:
            trace.append((left_range, right_range))
        return agglomerative_merge(rs, sp_sizes, sp_features, tau_iou, tau_sim)

    if order == "sequential":
        acc = list(per_frame_sets[0])
        for i in range(1, t):
            acc = merge(acc + list(per_frame_sets[i]), (1, i), (i + 1, i + 1))
        return acc
    if order != "hierarchical":
        raise ValueError(f"unknown merge order: {order}")

    def recurse(s: int, e: int) -> list[Region3D]:
        if s == e:
            return list(per_frame_sets[s - 1])
        m = (s + e) // 2
        left = recurse(s, m)
        right = recurse(m + 1, e)
        return merge(left + right, (s, m), (m + 1, e))

    return recurse(1, t)


def regions_to_proposals(
    regions: list[Region3D],
    partition: SuperpointPartition,
    min_points: int = DEFAULT_MIN_POINTS,
) -> ProposalSet:
    n = partition.labels.shape[0]
    masks = []
    for r in regions:
        if r.point_count < min_points:
            continue
        masks.append(np.isin(partition.labels, np.fromiter(r.superpoint_ids, dtype=np.int64)))
    if not masks:
        return ProposalSet.empty(n)
    masks = np.stack(masks)
    return ProposalSet(masks, np.ones(masks.shape[0]),
                       [SOURCE_GUIDED_2D] * masks.shape[0])
