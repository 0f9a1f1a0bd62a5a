"""Pointwise open-vocabulary feature pooling and text-query scoring.

Per proposal, the per-view feature vector is splatted onto every mask
point visible in that view, summed over the proposal's top views and
over all proposals, then each point row is L2-normalized. A query scores
a proposal as the mean cosine between its points' rows and the prompt
embedding.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .scene import ProposalSet

DEFAULT_TOP_VIEWS = 5
UNSCORED_LABEL = "unscored"


@dataclass(frozen=True)
class QueryEmbedding:
    prompt: str
    embedding: np.ndarray

    def __post_init__(self):
        e = np.asarray(self.embedding, dtype=np.float64)
        if abs(np.linalg.norm(e) - 1.0) > 1e-5:
            raise ValueError(f"prompt {self.prompt!r}: embedding is not unit-norm")
        object.__setattr__(self, "embedding", e)


def top_views(
    mask: np.ndarray,
    visibilities: dict[int, np.ndarray],
    top_k: int = DEFAULT_TOP_VIEWS,
) -> list[int]:
    """Frame ids ranked by how many mask points they see (desc), ties by
    ascending frame id; zero-visibility frames excluded."""
    if top_k < 1:
        raise ValueError("top_k must be >= 1")
    counts = []
    for fid in sorted(visibilities):
        c = int(np.count_nonzero(mask & visibilities[fid]))
        if c > 0:
            counts.append((-c, fid))
    counts.sort()
    return [fid for _, fid in counts[:top_k]]


def accumulate_pointwise(
    proposals: ProposalSet,
    view_features: dict[tuple[int, int], np.ndarray],
    visibilities: dict[int, np.ndarray],
    dim: int,
    top_k: int = DEFAULT_TOP_VIEWS,
) -> np.ndarray:
    """N x dim pointwise feature matrix; nonzero rows are unit-norm."""
    n = proposals.masks.shape[1]
    acc = np.zeros((n, dim))
    for k in range(len(proposals)):
        mask = proposals.masks[k]
        for fid in top_views(mask, visibilities, top_k):
            f = view_features.get((k, fid))
            if f is None:
                warnings.warn(
                    f"no view feature for proposal {k}, frame {fid}; contributing zero"
                )
                continue
            f = np.asarray(f, dtype=np.float64)
            if f.shape != (dim,):
                raise ValueError(
                    f"view feature dim {f.shape} != ({dim},) for proposal {k}, frame {fid}"
                )
            acc[mask & visibilities[fid]] += f
    norms = np.linalg.norm(acc, axis=1)
    nonzero = norms > 0
    acc[nonzero] /= norms[nonzero, None]
    return acc


def query_score(
    pointwise: np.ndarray, mask: np.ndarray, query: QueryEmbedding
) -> float:
    """Mean cosine between masked rows and the prompt; zero rows count 0."""
    mask = np.asarray(mask).astype(bool)
    if not mask.any():
        raise ValueError("cannot score an empty mask")
    rows = pointwise[mask]
    norms = np.linalg.norm(rows, axis=1)
    cos = np.zeros(rows.shape[0])
    nz = norms > 0
    cos[nz] = (rows[nz] @ query.embedding) / norms[nz]
    return float(cos.mean())


@dataclass(frozen=True)
class LabeledInstance:
    proposal_index: int
    label: str
    query_score: float
    confidence: float  # reported confidence, fixed at 1.0


def classify(
    proposals: ProposalSet,
    pointwise: np.ndarray,
    queries: list[QueryEmbedding],
) -> list[LabeledInstance]:
    """Argmax-prompt label per proposal. Proposals whose masked rows are
    all zero get the 'unscored' label and are excluded from ranked output."""
    if not queries:
        raise ValueError("need at least one query")
    out = []
    for k in range(len(proposals)):
        mask = proposals.masks[k]
        if not np.linalg.norm(pointwise[mask], axis=1).any():
            out.append(LabeledInstance(k, UNSCORED_LABEL, 0.0, 1.0))
            continue
        scores = [query_score(pointwise, mask, q) for q in queries]
        best = int(np.argmax(scores))
        out.append(LabeledInstance(k, queries[best].prompt, float(scores[best]), 1.0))
    return out


def ranked(instances: list[LabeledInstance]) -> list[LabeledInstance]:
    scored = [it for it in instances if it.label != UNSCORED_LABEL]
    return sorted(scored, key=lambda it: (-it.query_score, it.proposal_index))
