"""Instance-segmentation metrics: AP at fixed IoU thresholds, mAP over
50:95:5, recall, class-agnostic AP/AR, head/common/tail group breakdown.

Matching is greedy by descending prediction score; the precision/recall
curve is integrated with all-point interpolation (area under the
monotone envelope).
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

MAP_THRESHOLDS = [round(0.5 + 0.05 * i, 2) for i in range(10)]


@dataclass(frozen=True)
class GroundTruthInstance:
    mask: np.ndarray
    class_id: int

    def __post_init__(self):
        mask = np.asarray(self.mask).astype(bool)
        if not mask.any():
            raise ValueError("empty ground-truth mask")
        if self.class_id < 0:
            raise ValueError("class_id must be >= 0")
        object.__setattr__(self, "mask", mask)


@dataclass(frozen=True)
class ScoredPrediction:
    mask: np.ndarray
    score: float
    class_id: int = 0

    def __post_init__(self):
        object.__setattr__(self, "mask", np.asarray(self.mask).astype(bool))


@dataclass
class MetricsReport:
    ap: float
    ap50: float
    ap25: float
    map_50_95: float
    per_class_ap: dict[int, float]
    group_ap: dict[str, float]
    group_recall: dict[str, float]
    recall50: float
    class_agnostic_ap: float
    class_agnostic_ar: float

    def to_json(self) -> dict:
        return {
            "ap": self.ap,
            "ap50": self.ap50,
            "ap25": self.ap25,
            "map_50_95": self.map_50_95,
            "per_class_ap": {str(k): v for k, v in sorted(self.per_class_ap.items())},
            "group_ap": dict(sorted(self.group_ap.items())),
            "group_recall": dict(sorted(self.group_recall.items())),
            "recall50": self.recall50,
            "class_agnostic_ap": self.class_agnostic_ap,
            "class_agnostic_ar": self.class_agnostic_ar,
        }


def mask_iou(a: np.ndarray, b: np.ndarray) -> float:
    a = np.asarray(a).astype(bool)
    b = np.asarray(b).astype(bool)
    union = np.count_nonzero(a | b)
    if union == 0:
        raise ValueError("IoU of two empty masks is undefined")
    return np.count_nonzero(a & b) / union


def _sorted_preds(preds: list[ScoredPrediction]) -> list[ScoredPrediction]:
    sizes = [int(np.count_nonzero(p.mask)) for p in preds]
    order = sorted(range(len(preds)), key=lambda i: (-preds[i].score, -sizes[i], i))
    return [preds[i] for i in order]


def _match(preds, gts, iou_threshold):
    """Greedy matching; returns per-prediction TP flags and matched-GT count."""
    matched = [False] * len(gts)
    tp = []
    for p in preds:
        best_iou = 0.0
        best_g = -1
        for g, gt in enumerate(gts):
            if matched[g] or gt.class_id != p.class_id:
                continue
            iou = mask_iou(p.mask, gt.mask)
            if iou >= iou_threshold and iou > best_iou:
                best_iou = iou
                best_g = g
        if best_g >= 0:
            matched[best_g] = True
            tp.append(True)
        else:
            tp.append(False)
    return tp, sum(matched)


def _ap_from_tp(tp: list[bool], n_gt: int) -> float:
    if n_gt == 0:
        return 0.0
    if not tp:
        return 0.0
    tp_cum = np.cumsum(tp)
    fp_cum = np.cumsum([not t for t in tp])
    recall = tp_cum / n_gt
    precision = tp_cum / (tp_cum + fp_cum)
    # monotone envelope, then sum precision over recall increments
    env = np.maximum.accumulate(precision[::-1])[::-1]
    prev_r = 0.0
    area = 0.0
    for r, p in zip(recall, env):
        if r > prev_r:
            area += (r - prev_r) * p
            prev_r = r
    return float(area)


def average_precision(
    preds: list[ScoredPrediction],
    gts: list[GroundTruthInstance],
    iou_threshold: float,
) -> float:
    tp, _ = _match(_sorted_preds(preds), gts, iou_threshold)
    return _ap_from_tp(tp, len(gts))


def recall_at(
    preds: list[ScoredPrediction],
    gts: list[GroundTruthInstance],
    iou_threshold: float,
) -> float:
    if not gts:
        return 0.0
    _, n_matched = _match(_sorted_preds(preds), gts, iou_threshold)
    return n_matched / len(gts)


def benchmark_suite(
    preds: list[ScoredPrediction],
    gts: list[GroundTruthInstance],
    class_groups: dict[str, list[int]] | None = None,
) -> MetricsReport:
    classes = sorted({gt.class_id for gt in gts})
    if class_groups is None:
        class_groups = {}
    grouped = [c for members in class_groups.values() for c in members]
    if len(grouped) != len(set(grouped)) or (class_groups and set(grouped) != set(classes)):
        raise ValueError("class_groups must partition the ground-truth class ids")

    def class_ap(cls: int, thr: float) -> float:
        p = [x for x in preds if x.class_id == cls]
        g = [x for x in gts if x.class_id == cls]
        return average_precision(p, g, thr)

    per_class_map: dict[int, float] = {}
    per_class_50: dict[int, float] = {}
    for cls in classes:
        per_class_map[cls] = float(np.mean([class_ap(cls, t) for t in MAP_THRESHOLDS]))
        per_class_50[cls] = class_ap(cls, 0.5)
    ap25 = float(np.mean([class_ap(cls, 0.25) for cls in classes])) if classes else 0.0
    ap50 = float(np.mean(list(per_class_50.values()))) if classes else 0.0
    ap = float(np.mean(list(per_class_map.values()))) if classes else 0.0

    group_ap = {}
    group_recall = {}
    for name, members in class_groups.items():
        group_ap[name] = float(np.mean([per_class_map[c] for c in members]))
        g_gts = [x for x in gts if x.class_id in members]
        g_preds = [x for x in preds if x.class_id in members]
        group_recall[name] = recall_at(g_preds, g_gts, 0.5)

    ca_preds = [ScoredPrediction(p.mask, p.score, 0) for p in preds]
    ca_gts = [GroundTruthInstance(g.mask, 0) for g in gts]
    ca_ap = float(np.mean([average_precision(ca_preds, ca_gts, t) for t in MAP_THRESHOLDS]))
    ca_ar = float(np.mean([recall_at(ca_preds, ca_gts, t) for t in MAP_THRESHOLDS]))

    return MetricsReport(
        ap=ap,
        ap50=ap50,
        ap25=ap25,
        map_50_95=ap,
        per_class_ap=per_class_map,
        group_ap=group_ap,
        group_recall=group_recall,
        recall50=recall_at(preds, gts, 0.5),
        class_agnostic_ap=ca_ap,
        class_agnostic_ar=ca_ar,
    )
