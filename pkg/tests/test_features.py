import numpy as np
import pytest

from lift3d.features import (
    QueryEmbedding,
    accumulate_pointwise,
    classify,
    query_score,
    ranked,
    top_views,
)
from lift3d.scene import ProposalSet


def ps(masks):
    masks = np.asarray(masks, dtype=bool)
    return ProposalSet(masks, np.ones(masks.shape[0]), ["guided2d"] * masks.shape[0])


def unit(v):
    v = np.asarray(v, dtype=float)
    return v / np.linalg.norm(v)


# ---------------------------------------------------------------------------
# top views


def test_top_views_fewer_than_requested():
    mask = np.ones(10, dtype=bool)
    vis = {0: np.ones(10, dtype=bool), 1: np.ones(10, dtype=bool),
           2: np.ones(10, dtype=bool), 3: np.zeros(10, dtype=bool)}
    assert top_views(mask, vis, 5) == [0, 1, 2]


def test_top_views_tie_rule():
    mask = np.ones(10, dtype=bool)
    def vis_with(count):
        v = np.zeros(10, dtype=bool)
        v[:count] = True
        return v
    vis = {3: vis_with(10), 7: vis_with(7), 2: vis_with(7), 9: vis_with(1)}
    assert top_views(mask, vis, 2) == [3, 2]


def test_top_views_matches_naive():
    rng = np.random.default_rng(50)
    mask = rng.random(100) < 0.5
    vis = {f: rng.random(100) < 0.5 for f in range(8)}
    got = top_views(mask, vis, 4)
    counts = [(-int((mask & vis[f]).sum()), f) for f in range(8)
              if (mask & vis[f]).sum() > 0]
    counts.sort()
    assert got == [f for _, f in counts[:4]]


# ---------------------------------------------------------------------------
# accumulation (pointwise pooling)


def e(i, d=4):
    v = np.zeros(d)
    v[i] = 1.0
    return v


def test_accumulate_single_view():
    mask = np.zeros(5, dtype=bool)
    mask[:2] = True
    proposals = ps([mask])
    vis = {0: np.ones(5, dtype=bool)}
    out = accumulate_pointwise(proposals, {(0, 0): e(1)}, vis, 4)
    assert np.allclose(out[0], e(1))
    assert np.allclose(out[1], e(1))
    assert (out[2:] == 0).all()


def test_accumulate_two_views_symmetric():
    mask = np.ones(1, dtype=bool)
    proposals = ps([mask])
    vis = {0: np.ones(1, dtype=bool), 1: np.ones(1, dtype=bool)}
    out = accumulate_pointwise(proposals, {(0, 0): e(0), (0, 1): e(1)}, vis, 4)
    assert np.allclose(out[0], [np.sqrt(2) / 2, np.sqrt(2) / 2, 0, 0])


def test_accumulate_one_visible_view():
    mask = np.ones(1, dtype=bool)
    proposals = ps([mask])
    vis = {0: np.ones(1, dtype=bool), 1: np.zeros(1, dtype=bool)}
    out = accumulate_pointwise(proposals, {(0, 0): e(0), (0, 1): e(1)}, vis, 4)
    assert np.allclose(out[0], e(0))


def test_accumulate_missing_entry_warns():
    mask = np.ones(1, dtype=bool)
    proposals = ps([mask])
    vis = {0: np.ones(1, dtype=bool)}
    with pytest.warns(UserWarning):
        out = accumulate_pointwise(proposals, {}, vis, 4)
    assert (out == 0).all()


def test_accumulate_rows_unit_norm():
    rng = np.random.default_rng(51)
    n, d = 100, 6
    masks = rng.random((4, n)) < 0.5
    masks[:, 0] = True
    proposals = ps(masks)
    vis = {f: rng.random(n) < 0.7 for f in range(6)}
    feats = {(k, f): rng.normal(size=d) for k in range(4) for f in range(6)}
    out = accumulate_pointwise(proposals, feats, vis, d)
    norms = np.linalg.norm(out, axis=1)
    nz = norms > 0
    assert np.abs(norms[nz] - 1.0).max() <= 1e-5


def naive_pool_and_score(masks, feats, vis, d, top_k, query, score_mask):
    """Literal per-point double loop over proposals and their top views."""
    n = masks.shape[1]
    acc = np.zeros((n, d))
    for k in range(masks.shape[0]):
        counts = []
        for f in sorted(vis):
            c = sum(1 for p in range(n) if masks[k, p] and vis[f][p])
            if c > 0:
                counts.append((-c, f))
        counts.sort()
        views = [f for _, f in counts[:top_k]]
        for f in views:
            for p in range(n):
                if masks[k, p] and vis[f][p]:
                    acc[p] += feats[(k, f)]
    for p in range(n):
        nrm = np.linalg.norm(acc[p])
        if nrm > 0:
            acc[p] /= nrm
    total = 0.0
    cnt = 0
    for p in range(n):
        if not score_mask[p]:
            continue
        cnt += 1
        nrm = np.linalg.norm(acc[p])
        if nrm > 0:
            total += acc[p] @ query / nrm
    return acc, total / cnt


def test_pipeline_matches_naive_double_loop():
    rng = np.random.default_rng(52)
    for _ in range(10):
        n, d, kk = 40, 5, 3
        masks = rng.random((kk, n)) < 0.5
        masks[:, 0] = True
        proposals = ps(masks)
        vis = {f: rng.random(n) < 0.6 for f in range(5)}
        feats = {(k, f): rng.normal(size=d) for k in range(kk) for f in range(5)}
        q = QueryEmbedding("q", unit(rng.normal(size=d)))
        out = accumulate_pointwise(proposals, feats, vis, d, top_k=3)
        want_acc, want_score = naive_pool_and_score(masks, feats, vis, d, 3, q.embedding,
                                          masks[0])
        assert np.abs(out - want_acc).max() <= 1e-6
        assert abs(query_score(out, masks[0], q) - want_score) <= 1e-6


# ---------------------------------------------------------------------------
# query scoring


def test_query_score_perfect():
    q = QueryEmbedding("x", e(0))
    f = np.tile(e(0), (5, 1))
    assert np.isclose(query_score(f, np.ones(5, dtype=bool), q), 1.0)


def test_query_score_orthogonal():
    q = QueryEmbedding("x", e(0))
    f = np.tile(e(1), (5, 1))
    assert np.isclose(query_score(f, np.ones(5, dtype=bool), q), 0.0)


def test_query_score_half_zero():
    q = QueryEmbedding("x", e(0))
    f = np.vstack([np.tile(e(0), (2, 1)), np.zeros((2, 4))])
    assert np.isclose(query_score(f, np.ones(4, dtype=bool), q), 0.5)


def test_query_score_empty_mask_rejected():
    q = QueryEmbedding("x", e(0))
    with pytest.raises(ValueError):
        query_score(np.zeros((3, 4)), np.zeros(3, dtype=bool), q)


def test_query_score_mean_stable_under_equal_extension():
    q = QueryEmbedding("x", e(0))
    f = np.tile(unit([1.0, 1.0, 0.0, 0.0]), (6, 1))
    small = np.array([True, True, False, False, False, False])
    big = np.ones(6, dtype=bool)
    assert np.isclose(query_score(f, small, q), query_score(f, big, q))


# ---------------------------------------------------------------------------
# classification


def test_classify_argmax():
    qs = [QueryEmbedding("a", e(0)), QueryEmbedding("b", e(1))]
    f = np.tile(e(1), (3, 1))
    out = classify(ps([np.ones(3, dtype=bool)]), f, qs)
    assert out[0].label == "b"
    assert out[0].confidence == 1.0


def test_classify_single_prompt():
    qs = [QueryEmbedding("only", e(0))]
    f = np.tile(e(0), (3, 1))
    out = classify(ps([np.ones(3, dtype=bool)]), f, qs)
    assert out[0].label == "only"


def test_classify_unscored_excluded_from_ranking():
    qs = [QueryEmbedding("a", e(0))]
    f = np.zeros((3, 4))
    out = classify(ps([np.ones(3, dtype=bool)]), f, qs)
    assert out[0].label == "unscored"
    assert ranked(out) == []


def test_classify_scale_invariance_nonoverlapping():
    rng = np.random.default_rng(53)
    n, d = 60, 4
    masks = np.zeros((2, n), dtype=bool)
    masks[0, :30] = True
    masks[1, 30:] = True
    proposals = ps(masks)
    vis = {f: rng.random(n) < 0.8 for f in range(4)}
    feats = {(k, f): rng.normal(size=d) for k in range(2) for f in range(4)}
    qs = [QueryEmbedding("a", e(0)), QueryEmbedding("b", e(1))]
    out1 = classify(proposals, accumulate_pointwise(proposals, feats, vis, d), qs)
    scaled = {key: 7.3 * v for key, v in feats.items()}
    out2 = classify(proposals, accumulate_pointwise(proposals, scaled, vis, d), qs)
    assert [x.label for x in out1] == [x.label for x in out2]


def test_classify_synthetic_orthogonal_classes():
    # two objects with orthogonal synthetic embeddings classify perfectly
    n = 40
    masks = np.zeros((2, n), dtype=bool)
    masks[0, :20] = True
    masks[1, 20:] = True
    proposals = ps(masks)
    vis = {0: np.ones(n, dtype=bool)}
    feats = {(0, 0): e(0), (1, 0): e(1)}
    qs = [QueryEmbedding("class_a", e(0)), QueryEmbedding("class_b", e(1))]
    out = classify(proposals, accumulate_pointwise(proposals, feats, vis, 4), qs)
    assert [x.label for x in out] == ["class_a", "class_b"]
