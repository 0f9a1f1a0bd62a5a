import numpy as np
import pytest

from lift3d.regions import (
    Region3D,
    agglomerative_merge,
    compatibility_matrix,
    grow_region,
    hierarchical_traverse,
    make_region,
    per_frame_regions,
    region_overlap,
    region_similarity,
    regions_to_proposals,
)
from lift3d.scene import Mask2D
from lift3d.superpoints import SuperpointPartition


def mask2d(frame_id=0):
    bits = np.zeros((4, 4), dtype=bool)
    bits[0, 0] = True
    return Mask2D(mask_id=0, frame_id=frame_id, bits=bits)


def region(ids, sizes, feats, frames=(0,)):
    return make_region(ids, sizes, feats, frames)


# ---------------------------------------------------------------------------
# growth


def test_grow_single_superpoint():
    sizes = np.array([10])
    feats = np.array([[1.0, 0.0]])
    r = grow_region(mask2d(), np.array([1.0]), [set()], feats, sizes, 0.9, 0.9)
    assert r.superpoint_ids == {0}
    assert r.point_count == 10


def test_grow_no_candidates():
    assert grow_region(mask2d(), np.array([0.1, 0.2]), [set(), set()],
                       np.eye(2), np.array([5, 5]), 0.9, 0.9) is None


def test_grow_identical_features_merge():
    sizes = np.array([10, 20])
    feats = np.array([[1.0, 0.0], [1.0, 0.0]])
    adj = [{1}, {0}]
    r = grow_region(mask2d(), np.array([1.0, 0.95]), adj, feats, sizes, 0.9, 0.9)
    assert r.superpoint_ids == {0, 1}
    assert r.point_count == 30


def test_grow_dissimilar_not_merged():
    sizes = np.array([10, 20])
    feats = np.array([[1.0, 0.0], [0.0, 1.0]])
    adj = [{1}, {0}]
    r = grow_region(mask2d(), np.array([1.0, 0.95]), adj, feats, sizes, 0.9, 0.9)
    assert r.superpoint_ids == {0}


def grow_naive(overlaps, adjacency, feats, sizes, tau_iou, tau_sim):
    """Reference closure: re-scan every candidate each iteration, adding
    one qualifying superpoint at a time (smallest id first)."""
    cand = {u for u in range(len(overlaps)) if overlaps[u] > tau_iou}
    if not cand:
        return None

    def cos(a, b):
        na, nb = np.linalg.norm(a), np.linalg.norm(b)
        return 0.0 if na == 0 or nb == 0 else float(a @ b / (na * nb))

    seed = min(cand, key=lambda u: (-overlaps[u], u))
    members = {seed}
    changed = True
    while changed:
        changed = False
        for u in sorted(cand - members):
            if not (adjacency[u] & members):
                continue
            if max(cos(feats[m], feats[u]) for m in members) > tau_sim:
                members.add(u)
                changed = True
    return members


def test_grow_matches_naive_closure():
    rng = np.random.default_rng(30)
    for _ in range(50):
        n = 20
        sizes = rng.integers(1, 50, size=n)
        feats = rng.normal(size=(n, 4))
        overlaps = rng.random(n)
        adjacency = [set() for _ in range(n)]
        for _ in range(40):
            a, b = rng.integers(0, n, size=2)
            if a != b:
                adjacency[a].add(int(b))
                adjacency[b].add(int(a))
        tau_iou, tau_sim = 0.5, float(rng.random() * 0.6)
        got = grow_region(mask2d(), overlaps, adjacency, feats, sizes,
                          tau_iou, tau_sim)
        want = grow_naive(overlaps, adjacency, feats, sizes, tau_iou, tau_sim)
        if want is None:
            assert got is None
        else:
            assert got.superpoint_ids == want


def test_grow_output_closed():
    rng = np.random.default_rng(31)
    n = 15
    sizes = rng.integers(1, 20, size=n)
    feats = rng.normal(size=(n, 3))
    overlaps = rng.random(n)
    adjacency = [set() for _ in range(n)]
    for _ in range(30):
        a, b = rng.integers(0, n, size=2)
        if a != b:
            adjacency[a].add(int(b))
            adjacency[b].add(int(a))
    r = grow_region(mask2d(), overlaps, adjacency, feats, sizes, 0.4, 0.3)
    if r is None:
        return
    members = set(r.superpoint_ids)
    for u in range(n):
        if u in members or overlaps[u] <= 0.4:
            continue
        if adjacency[u] & members:
            best = max(
                float(feats[m] @ feats[u]
                      / (np.linalg.norm(feats[m]) * np.linalg.norm(feats[u])))
                for m in members)
            assert best <= 0.3


def test_per_frame_empty():
    assert per_frame_regions([], [], [], np.zeros((0, 2)), np.zeros(0, dtype=int)) == []


def test_per_frame_disjoint_masks():
    sizes = np.array([10, 10])
    feats = np.eye(2)
    adj = [set(), set()]
    masks = [mask2d(), mask2d()]
    overlaps = [np.array([1.0, 0.0]), np.array([0.0, 1.0])]
    regions = per_frame_regions(masks, overlaps, adj, feats, sizes, 0.9, 0.9)
    assert len(regions) == 2
    assert regions[0].superpoint_ids == {0}
    assert regions[1].superpoint_ids == {1}


# ---------------------------------------------------------------------------
# pair scores


def test_region_overlap_cases():
    sizes = np.array([10, 30, 10])
    feats = np.ones((3, 2))
    a = region({0, 1}, sizes, feats)
    b = region({1, 2}, sizes, feats)
    assert region_overlap(a, a, sizes) == 1.0
    assert region_overlap(region({0}, sizes, feats), region({2}, sizes, feats), sizes) == 0.0
    assert np.isclose(region_overlap(a, b, sizes), 0.6)


def test_region_similarity_cases():
    sizes = np.array([1, 1, 1])
    feats = np.array([[1.0, 0.0], [0.0, 1.0], [1.0, 1.0]])
    r0 = region({0}, sizes, feats)
    r1 = region({1}, sizes, feats)
    r2 = region({2}, sizes, feats)
    assert region_similarity(r0, r0) == 1.0
    assert np.isclose(region_similarity(r0, r1), 0.0)
    assert np.isclose(region_similarity(r0, r2), np.sqrt(2) / 2)


def test_zero_feature_similarity_zero():
    sizes = np.array([1, 1])
    feats = np.array([[0.0, 0.0], [1.0, 0.0]])
    assert region_similarity(region({0}, sizes, feats),
                             region({1}, sizes, feats)) == 0.0


def test_compatibility_matrix():
    sizes = np.array([10, 10])
    feats = np.array([[1.0, 0.0], [1.0, 0.05]])
    a = region({0, 1}, sizes, feats)
    b = region({0, 1}, sizes, feats)
    c = compatibility_matrix([a, b], sizes, 0.9, 0.9)
    assert c[0, 1] and c[1, 0]
    assert not c[0, 0] and not c[1, 1]


def test_compatibility_single_region():
    sizes = np.array([5])
    feats = np.ones((1, 2))
    c = compatibility_matrix([region({0}, sizes, feats)], sizes)
    assert c.shape == (1, 1) and not c.any()


# ---------------------------------------------------------------------------
# agglomerative merging


def naive_agglomerative(regions, sizes, feats, tau_iou, tau_sim):
    """Full-rebuild reference: recompute the entire score matrices from
    scratch every iteration."""
    active = list(regions)
    while True:
        best = None
        for i in range(len(active)):
            for j in range(i + 1, len(active)):
                o = region_overlap(active[i], active[j], sizes)
                s = region_similarity(active[i], active[j])
                if o > tau_iou and s > tau_sim:
                    key = (s, o, -i, -j)
                    if best is None or key > best[0]:
                        best = (key, i, j)
        if best is None:
            return active
        _, i, j = best
        merged = make_region(
            active[i].superpoint_ids | active[j].superpoint_ids,
            sizes, feats,
            active[i].source_frames | active[j].source_frames)
        active[i] = merged
        del active[j]


def random_regions(rng, n_sp, n_regions, sizes, feats):
    out = []
    for i in range(n_regions):
        k = rng.integers(1, max(2, n_sp // 2))
        ids = set(rng.choice(n_sp, size=k, replace=False).tolist())
        out.append(make_region(ids, sizes, feats, [int(rng.integers(0, 4))]))
    return out


def regions_equal(a, b):
    return (len(a) == len(b) and all(
        x.superpoint_ids == y.superpoint_ids
        and x.point_count == y.point_count
        and np.allclose(x.feature, y.feature)
        for x, y in zip(a, b)))


def test_merge_compatible_clique():
    sizes = np.array([10, 10, 10])
    feats = np.ones((3, 2))
    rs = [region({0, 1, 2}, sizes, feats, [i]) for i in range(3)]
    out = agglomerative_merge(rs, sizes, feats, 0.9, 0.9)
    assert len(out) == 1
    assert out[0].superpoint_ids == {0, 1, 2}
    assert out[0].source_frames == {0, 1, 2}


def test_merge_nothing_compatible():
    sizes = np.array([10, 10])
    feats = np.eye(2)
    rs = [region({0}, sizes, feats), region({1}, sizes, feats)]
    out = agglomerative_merge(rs, sizes, feats, 0.9, 0.9)
    assert regions_equal(out, rs)


def test_merge_matches_full_rebuild_oracle():
    rng = np.random.default_rng(32)
    for _ in range(50):
        n_sp = 12
        sizes = rng.integers(1, 40, size=n_sp)
        feats = rng.normal(size=(n_sp, 3))
        rs = random_regions(rng, n_sp, 6, sizes, feats)
        tau_iou = float(rng.random() * 0.5)
        tau_sim = float(rng.random() * 0.8)
        got = agglomerative_merge(list(rs), sizes, feats, tau_iou, tau_sim)
        want = naive_agglomerative(list(rs), sizes, feats, tau_iou, tau_sim)
        assert regions_equal(got, want)


def test_merge_conserves_point_union():
    rng = np.random.default_rng(33)
    sizes = rng.integers(1, 20, size=10)
    feats = rng.normal(size=(10, 3))
    rs = random_regions(rng, 10, 5, sizes, feats)
    before = set().union(*(r.superpoint_ids for r in rs))
    out = agglomerative_merge(rs, sizes, feats, 0.1, -0.5)
    after = set().union(*(r.superpoint_ids for r in out))
    assert before == after


def test_merged_feature_is_weighted_mean():
    rng = np.random.default_rng(34)
    sizes = rng.integers(1, 20, size=8)
    feats = rng.normal(size=(8, 3))
    rs = random_regions(rng, 8, 4, sizes, feats)
    out = agglomerative_merge(rs, sizes, feats, 0.05, -0.9)
    for r in out:
        ids = sorted(r.superpoint_ids)
        w = sizes[ids].astype(float)
        expect = (feats[ids] * w[:, None]).sum(axis=0) / w.sum()
        assert np.abs(r.feature - expect).max() <= 1e-5


# ---------------------------------------------------------------------------
# merging order


def test_traverse_single_frame_unchanged():
    sizes = np.array([5])
    feats = np.ones((1, 2))
    rs = [region({0}, sizes, feats)]
    out = hierarchical_traverse([rs], sizes, feats)
    assert regions_equal(out, rs)


def test_traverse_t4_merge_order():
    sizes = np.array([5, 5, 5, 5])
    feats = np.eye(4)
    per_frame = [[region({i}, sizes, feats, [i])] for i in range(4)]
    trace = []
    hierarchical_traverse(per_frame, sizes, feats, trace=trace)
    assert trace == [((1, 1), (2, 2)), ((3, 3), (4, 4)), ((1, 2), (3, 4))]


def test_traverse_incompatible_concatenates_both_orders():
    sizes = np.array([5, 5, 5])
    feats = np.eye(3)
    per_frame = [[region({i}, sizes, feats, [i])] for i in range(3)]
    for order in ("hierarchical", "sequential"):
        out = hierarchical_traverse(per_frame, sizes, feats, 0.9, 0.9, order=order)
        assert len(out) == 3
        assert {frozenset(r.superpoint_ids) for r in out} == \
            {frozenset({0}), frozenset({1}), frozenset({2})}


def test_traverse_all_compatible_orders_agree():
    sizes = np.array([5, 6, 7])
    feats = np.ones((3, 2))
    per_frame = [[region({0, 1, 2}, sizes, feats, [i])] for i in range(4)]
    a = hierarchical_traverse(per_frame, sizes, feats, order="hierarchical")
    b = hierarchical_traverse(per_frame, sizes, feats, order="sequential")
    assert len(a) == len(b) == 1
    assert regions_equal(a, b)


def test_feature_mean_associative_over_merge_orders():
    rng = np.random.default_rng(35)
    sizes = rng.integers(1, 30, size=6)
    feats = rng.normal(size=(6, 3))
    ids = [{0, 1}, {2, 3}, {4, 5}]
    union = set().union(*ids)
    # merge in two different orders; feature must match direct recompute
    r01 = make_region(ids[0] | ids[1], sizes, feats, [0])
    left = make_region(r01.superpoint_ids | ids[2], sizes, feats, [0])
    r12 = make_region(ids[1] | ids[2], sizes, feats, [0])
    right = make_region(ids[0] | r12.superpoint_ids, sizes, feats, [0])
    direct = make_region(union, sizes, feats, [0])
    assert np.abs(left.feature - direct.feature).max() <= 1e-5
    assert np.abs(right.feature - direct.feature).max() <= 1e-5


# ---------------------------------------------------------------------------
# proposals


def test_regions_to_proposals():
    labels = np.array([0] * 60 + [1] * 40, dtype=np.int32)
    part = SuperpointPartition(labels, np.array([60, 40], dtype=np.int64))
    feats = np.ones((2, 2))
    sizes = part.counts
    big = make_region({0}, sizes, feats, [0])
    small = make_region({1}, sizes, feats, [0])
    ps = regions_to_proposals([big, small], part, min_points=50)
    assert len(ps) == 1
    assert ps.masks[0].sum() == 60
    assert ps.scores[0] == 1.0
    assert ps.source_tags == ["guided2d"]


def test_proposal_masks_are_whole_superpoints():
    rng = np.random.default_rng(36)
    labels = rng.integers(0, 6, size=200).astype(np.int32)
    labels[:6] = np.arange(6)
    part = SuperpointPartition(labels, np.bincount(labels, minlength=6).astype(np.int64))
    feats = rng.normal(size=(6, 3))
    rs = random_regions(rng, 6, 3, part.counts, feats)
    ps = regions_to_proposals(rs, part, min_points=1)
    for i in range(len(ps)):
        covered = set(labels[ps.masks[i]].tolist())
        for u in covered:
            assert ps.masks[i][labels == u].all()
