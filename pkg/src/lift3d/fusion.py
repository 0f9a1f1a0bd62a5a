"""External 3D proposal ingestion (snapping, quality filters) and fusion
of the 2D-guided and external sets via greedy NMS."""
from __future__ import annotations

import numpy as np

from .scene import SOURCE_EXTERNAL_3D, ProposalSet
from .superpoints import SuperpointPartition

DEFAULT_SNAP_FRACTION = 0.5
DEFAULT_SCORE_MIN = 0.2
DEFAULT_MIN_POINTS = 50
DEFAULT_TAU_DUP = 0.5


def snap_to_superpoints(
    mask: np.ndarray,
    partition: SuperpointPartition,
    fraction: float = DEFAULT_SNAP_FRACTION,
) -> np.ndarray:
    """Replace a point mask by the union of superpoints covered at >= fraction."""
    if not 0.0 < fraction <= 1.0:
        raise ValueError("fraction must lie in (0, 1]")
    mask = np.asarray(mask).astype(bool)
    u = partition.n_superpoints
    inside = np.bincount(partition.labels[mask], minlength=u)
    keep = inside / partition.counts >= fraction
    return keep[partition.labels]


def filter_external(
    masks: np.ndarray,
    scores: np.ndarray,
    partition: SuperpointPartition,
    score_min: float = DEFAULT_SCORE_MIN,
    min_points: int = DEFAULT_MIN_POINTS,
    snap_fraction: float = DEFAULT_SNAP_FRACTION,
) -> ProposalSet:
    """Snap each external mask to superpoints, then drop low-score or
    too-small results."""
    kept = []
    kept_scores = []
    for mask, score in zip(masks, scores):
        if score < score_min:
            continue
        snapped = snap_to_superpoints(mask, partition, snap_fraction)
        if snapped.sum() < min_points:
            continue
        kept.append(snapped)
        kept_scores.append(float(score))
    n = partition.labels.shape[0]
    if not kept:
        return ProposalSet.empty(n)
    return ProposalSet(np.stack(kept), np.array(kept_scores),
                       [SOURCE_EXTERNAL_3D] * len(kept))


def mask_pair_iou(a: np.ndarray, b: np.ndarray) -> float:
    inter = np.count_nonzero(a & b)
    union = np.count_nonzero(a | b)
    if union == 0:
        raise ValueError("IoU of two empty masks is undefined")
    return inter / union


def combine_nms(
    m1: ProposalSet, m2: ProposalSet, tau_dup: float = DEFAULT_TAU_DUP
) -> ProposalSet:
    """Append m2 to m1 and greedily keep proposals in priority order
    (score desc, size desc, m1 before m2, index), suppressing any
    candidate whose IoU with a kept mask exceeds tau_dup."""
    if m1.masks.shape[1] != m2.masks.shape[1]:
        raise ValueError(
            f"point counts differ: {m1.masks.shape[1]} vs {m2.masks.shape[1]}"
        )
    candidates = []
    for src_rank, ps in enumerate((m1, m2)):
        sizes = ps.masks.sum(axis=1)
        for i in range(len(ps)):
            candidates.append((
                (-ps.scores[i], -int(sizes[i]), src_rank, i),
                ps.masks[i], float(ps.scores[i]), ps.source_tags[i],
            ))
    candidates.sort(key=lambda item: item[0])

    kept_masks: list[np.ndarray] = []
    kept_scores: list[float] = []
    kept_tags: list[str] = []
    for _, mask, score, tag in candidates:
        if any(mask_pair_iou(mask, km) > tau_dup for km in kept_masks):
            continue
        kept_masks.append(mask)
        kept_scores.append(score)
        kept_tags.append(tag)
    n = m1.masks.shape[1]
    if not kept_masks:
        return ProposalSet.empty(n)
    return ProposalSet(np.stack(kept_masks), np.array(kept_scores), kept_tags)
