"""Pure-Python twin of the compiled segmentation kernel.

Must stay behaviourally identical to ``_fhcore.segment_sorted_edges``;
the test suite runs both against the same oracle when the extension is
available.
"""
from __future__ import annotations

import numpy as np


def segment_sorted_edges(n, ea, eb, weights, scale, min_size):
    parent = list(range(n))
    size = [1] * n
    thr = [scale] * n

    def find(x):
        root = x
        while parent[root] != root:
            root = parent[root]
        while parent[x] != root:
            parent[x], x = root, parent[x]
        return root

    for a, b, w in zip(ea.tolist(), eb.tolist(), weights.tolist()):
        ra, rb = find(a), find(b)
        if ra == rb:
            continue
        if w <= thr[ra] and w <= thr[rb]:
            keep, drop = (ra, rb) if ra < rb else (rb, ra)
            parent[drop] = keep
            size[keep] += size[drop]
            thr[keep] = w + scale / size[keep]

    if min_size > 1:
        for a, b in zip(ea.tolist(), eb.tolist()):
            ra, rb = find(a), find(b)
            if ra == rb:
                continue
            if size[ra] < min_size or size[rb] < min_size:
                keep, drop = (ra, rb) if ra < rb else (rb, ra)
                parent[drop] = keep
                size[keep] += size[drop]

    return np.array([find(i) for i in range(n)], dtype=np.int32)
