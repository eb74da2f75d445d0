"""Exact brute-force L2 retrieval and Recall@K evaluation.

Search is a full stable sort over exact distances, so results are
deterministic on every platform and ties resolve by insertion order.
At the database sizes this package targets there is nothing to gain
from approximate indexes.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import ConfigError, DimensionError, FormatError
from .tensor_io import UNIT_NORM_TOL, DescriptorRecord, GroundTruth


@dataclass(frozen=True)
class DescriptorIndex:
    """Immutable stack of unit-norm descriptors in insertion order."""

    ids: tuple[str, ...]
    matrix: np.ndarray

    @property
    def count(self) -> int:
        return len(self.ids)

    @property
    def dim(self) -> int:
        return int(self.matrix.shape[1]) if self.matrix.size else int(self.matrix.shape[1])


def build_index(records: Sequence[DescriptorRecord]) -> DescriptorIndex:
    """Stack records into a searchable matrix, validating ids and norms."""
    if not records:
        return DescriptorIndex(ids=(), matrix=np.empty((0, 0), dtype=np.float32))
    dim = records[0].descriptor.shape[0]
    seen: set[str] = set()
    rows = []
    for rec in records:
        if rec.descriptor.shape != (dim,):
            raise DimensionError(f"descriptor {rec.id!r} has dim "
                                 f"{rec.descriptor.shape[0]}, expected {dim}")
        if rec.id in seen:
            raise FormatError(f"duplicate descriptor id {rec.id!r}")
        seen.add(rec.id)
        norm = float(np.linalg.norm(rec.descriptor.astype(np.float64)))
        if abs(norm - 1.0) > UNIT_NORM_TOL:
            raise FormatError(f"descriptor {rec.id!r} is not unit-norm (|v| = {norm:.6g})")
        rows.append(rec.descriptor)
    return DescriptorIndex(ids=tuple(r.id for r in records),
                           matrix=np.stack(rows).astype(np.float32))


def search(index: DescriptorIndex, query: np.ndarray, k: int) -> list[tuple[str, float]]:
    """Exact k nearest ids by L2 distance, ascending, ties by insertion order."""
    if k < 1:
        raise ConfigError(f"k must be >= 1, got {k}")
    if index.count == 0:
        return []
    q = np.asarray(query, dtype=np.float64).reshape(-1)
    if q.shape[0] != index.dim:
        raise DimensionError(f"query dim {q.shape[0]} does not match index dim "
                             f"{index.dim}")
    diffs = index.matrix.astype(np.float64) - q
    sq = np.einsum("ij,ij->i", diffs, diffs)
    order = np.argsort(sq, kind="stable")[:k]
    return [(index.ids[i], float(np.sqrt(sq[i]))) for i in order]


@dataclass(frozen=True)
class RecallReport:
    """Recall fractions per cutoff plus the rank of each query's first positive."""

    ks: tuple[int, ...]
    recalls: dict[int, float]
    per_query: dict[str, int | None]

    def to_json_dict(self) -> dict:
        return {
            "recalls": {str(k): self.recalls[k] for k in self.ks},
            "per_query": dict(self.per_query),
        }


def recall_at_k(index: DescriptorIndex, queries: Sequence[tuple[str, np.ndarray]],
                gt: GroundTruth, ks: Sequence[int]) -> RecallReport:
    """Score 1 per query at cutoff k when any top-k id is a known positive.

    Queries whose positives never appear in the database simply contribute
    zero at every cutoff.
    """
    ks = tuple(ks)
    if not ks or any(k < 1 for k in ks) or list(ks) != sorted(ks):
        raise ConfigError(f"cutoffs must be sorted positive integers, got {ks}")
    if not queries:
        raise ConfigError("query list must be nonempty")
    missing = [qid for qid, _ in queries if qid not in gt.positives]
    if missing:
        raise ConfigError(f"queries missing from ground truth: {missing[:5]}")

    per_query: dict[str, int | None] = {}
    for qid, vec in queries:
        ranked = search(index, vec, index.count) if index.count else []
        positives = set(gt.positives[qid])
        rank: int | None = None
        for pos, (rid, _) in enumerate(ranked, start=1):
            if rid in positives:
                rank = pos
                break
        per_query[qid] = rank

    recalls = {}
    for k in ks:
        hits = sum(1 for rank in per_query.values() if rank is not None and rank <= k)
        recalls[k] = hits / len(queries)
    return RecallReport(ks=ks, recalls=recalls, per_query=per_query)
