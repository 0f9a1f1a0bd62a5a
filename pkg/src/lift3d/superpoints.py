"""Superpoint extraction: kNN graph construction plus graph-based
segmentation into geometrically homogeneous point groups.

The greedy union pass follows Felzenszwalb-Huttenlocher: edges ascending
by weight, two components merge when the crossing weight is at most
min(internal_i + scale/|C_i|, internal_j + scale/|C_j|); components
smaller than ``min_size`` are then merged into the neighbor reached by
their minimum-weight crossing edge.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.spatial import cKDTree

from ._native import segment_sorted_edges
from .scene import PointCloud


@dataclass(frozen=True)
class NeighborGraph:
    n: int
    edges_a: np.ndarray   # E int32, always < edges_b
    edges_b: np.ndarray   # E int32
    weights: np.ndarray   # E float64, >= 0

    def neighbor_lists(self) -> list[list[int]]:
        out: list[list[int]] = [[] for _ in range(self.n)]
        for a, b in zip(self.edges_a.tolist(), self.edges_b.tolist()):
            out[a].append(b)
            out[b].append(a)
        return out


@dataclass(frozen=True)
class SuperpointPartition:
    labels: np.ndarray  # N int32 in [0, U)
    counts: np.ndarray  # U int64, per-superpoint point count

    @property
    def n_superpoints(self) -> int:
        return int(self.counts.shape[0])


def build_knn_graph(
    cloud: PointCloud,
    k: int,
    w_color: float = 1.0,
    w_pos: float = 0.0,
    r_norm: float = 1.0,
) -> NeighborGraph:
    n = cloud.count
    if not 1 <= k < n:
        raise ValueError(f"k must satisfy 1 <= k < N (k={k}, N={n})")
    tree = cKDTree(cloud.positions)
    _, idx = tree.query(cloud.positions, k=k + 1)
    idx = np.atleast_2d(idx)

    src = np.repeat(np.arange(n), idx.shape[1])
    dst = idx.ravel()
    keep = src != dst
    src, dst = src[keep], dst[keep]
    # symmetrize to undirected edges with a < b, dropping duplicates
    a = np.minimum(src, dst)
    b = np.maximum(src, dst)
    pairs = np.unique(np.stack([a, b], axis=1), axis=0)
    a, b = pairs[:, 0], pairs[:, 1]

    w = np.zeros(len(a))
    if w_color != 0.0:
        w += w_color * np.linalg.norm(cloud.colors[a] - cloud.colors[b], axis=1)
    if w_pos != 0.0:
        w += w_pos * np.linalg.norm(cloud.positions[a] - cloud.positions[b], axis=1) / r_norm
    return NeighborGraph(n=n, edges_a=a.astype(np.int32), edges_b=b.astype(np.int32),
                         weights=w)


def _canonical_labels(roots: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Relabel roots to [0, U) in order of first appearance by point index."""
    _, first = np.unique(roots, return_index=True)
    order = np.sort(first)
    mapping = {int(roots[i]): new for new, i in enumerate(order)}
    labels = np.array([mapping[int(r)] for r in roots], dtype=np.int32)
    counts = np.bincount(labels).astype(np.int64)
    return labels, counts


def felzenszwalb_segment(
    graph: NeighborGraph, fz_k: float, min_size: int
) -> SuperpointPartition:
    if fz_k <= 0:
        raise ValueError("fz_k must be positive")
    if min_size < 1:
        raise ValueError("min_size must be >= 1")
    order = np.lexsort((graph.edges_b, graph.edges_a, graph.weights))
    roots = segment_sorted_edges(
        graph.n,
        np.ascontiguousarray(graph.edges_a[order]),
        np.ascontiguousarray(graph.edges_b[order]),
        np.ascontiguousarray(graph.weights[order]),
        float(fz_k),
        int(min_size),
    )
    labels, counts = _canonical_labels(np.asarray(roots))
    return SuperpointPartition(labels=labels, counts=counts)


def superpoint_adjacency(
    partition: SuperpointPartition, graph: NeighborGraph
) -> list[set[int]]:
    la = partition.labels[graph.edges_a]
    lb = partition.labels[graph.edges_b]
    cross = la != lb
    adj: list[set[int]] = [set() for _ in range(partition.n_superpoints)]
    for u, v in zip(la[cross].tolist(), lb[cross].tolist()):
        adj[u].add(v)
        adj[v].add(u)
    return adj


def mean_superpoint_features(
    partition: SuperpointPartition, features: np.ndarray
) -> np.ndarray:
    features = np.asarray(features, dtype=np.float64)
    if features.shape[0] != partition.labels.shape[0]:
        raise ValueError(
            f"feature rows {features.shape[0]} != point count {partition.labels.shape[0]}"
        )
    u = partition.n_superpoints
    sums = np.zeros((u, features.shape[1]))
    np.add.at(sums, partition.labels, features)
    return sums / partition.counts[:, None]
