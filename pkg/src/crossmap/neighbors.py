"""Exact K-nearest-neighbor lists and the mean nearest neighbor overlap.

``mean_nn_overlap(V, Z, K)`` is the average fraction of the ``K`` nearest
neighbors that paired items ``v_i`` and ``z_i`` have in common, each
computed within its own space.  It is 1 when the two sets have identical
neighborhood structure and near 0 when the structures are unrelated.

Conventions: an item is never its own neighbor; ties in similarity are
broken by ascending item index; rows hold ``min(K, N - 1)`` entries and the
normalizer uses that same effective ``K``.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.spatial.distance import cdist

from .data import VectorSet, check_measure
from .errors import ParseError, ValidationError

# rows of the similarity matrix materialized at once
_CHUNK = 1024


@dataclass(frozen=True)
class NeighborIndex:
    """Per-item neighbor lists, best first.

    ``neighbors`` is an ``N x min(k, N-1)`` integer matrix of item indices.
    """

    neighbors: np.ndarray
    k: int
    measure: str

    def __len__(self) -> int:
        return self.neighbors.shape[0]

    @property
    def effective_k(self) -> int:
        return self.neighbors.shape[1]

    def row(self, i: int) -> list[int]:
        return self.neighbors[i].tolist()

    def to_tsv(self, path) -> None:
        with Path(path).open("w", encoding="utf-8", newline="\n") as fh:
            fh.write(f"# k={self.k} measure={self.measure}\n")
            for i, row in enumerate(self.neighbors):
                fh.write(f"{i}\t{','.join(str(int(j)) for j in row)}\n")

    @classmethod
    def from_tsv(cls, path) -> NeighborIndex:
        path = Path(path)
        lines = path.read_text(encoding="utf-8").splitlines()
        if not lines or not lines[0].startswith("# "):
            raise ParseError("missing header line", path, 1)
        meta = dict(tok.split("=", 1) for tok in lines[0][2:].split())
        rows = []
        for lineno, line in enumerate(lines[1:], start=2):
            item, _, nbrs = line.partition("\t")
            if int(item) != len(rows):
                raise ParseError(f"expected item {len(rows)}, got {item}", path, lineno)
            rows.append([int(t) for t in nbrs.split(",")] if nbrs else [])
        width = len(rows[0]) if rows else 0
        return cls(np.array(rows, dtype=np.intp).reshape(len(rows), width), int(meta["k"]), meta["measure"])


def _matrix(v) -> tuple[np.ndarray, tuple[str, ...] | None]:
    if isinstance(v, VectorSet):
        return v.values, v.keys
    arr = np.asarray(v, dtype=np.float64)
    if arr.ndim != 2:
        raise ValidationError(f"expected an N x d matrix, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValidationError("vectors contain non-finite values")
    return arr, None


def top_k_neighbors(v, k: int, measure: str = "cosine") -> NeighborIndex:
    """Brute-force ``k`` nearest neighbors of every row of ``v`` within ``v``."""
    check_measure(measure)
    values, keys = _matrix(v)
    n = values.shape[0]
    if n < 2:
        raise ValidationError(f"need at least 2 items to find neighbors, got {n}")
    if k < 1:
        raise ValidationError(f"k must be >= 1, got {k}")
    kk = min(k, n - 1)
    if measure == "cosine":
        zero = np.flatnonzero(~np.any(values, axis=1))
        if zero.size:
            name = keys[zero[0]] if keys is not None else str(zero[0])
            raise ValidationError(f"cosine similarity is undefined for zero vector {name!r}")
    out = np.empty((n, kk), dtype=np.intp)
    for start in range(0, n, _CHUNK):
        stop = min(start + _CHUNK, n)
        # smaller is closer; cdist evaluates every pair independently, so
        # duplicate rows get bit-identical scores and ties stay exact
        metric = "cosine" if measure == "cosine" else "sqeuclidean"
        score = cdist(values[start:stop], values, metric)
        score[np.arange(stop - start), np.arange(start, stop)] = np.inf
        out[start:stop] = _smallest_k(score, kk)
    return NeighborIndex(out, k, measure)


def _smallest_k(score: np.ndarray, kk: int) -> np.ndarray:
    """Column indices of the ``kk`` smallest entries per row, ascending by
    score with ties broken by ascending column index."""
    rows = np.arange(score.shape[0])[:, None]
    part = np.argpartition(score, kk - 1, axis=1)[:, :kk]
    vals = score[rows, part]
    # argpartition picks arbitrarily among entries tied at the cutoff; such
    # rows are redone with a full stable sort
    crowded = np.flatnonzero(np.count_nonzero(score <= vals.max(axis=1)[:, None], axis=1) > kk)
    for r in crowded:
        part[r] = np.argsort(score[r], kind="stable")[:kk]
        vals[r] = score[r, part[r]]
    order = np.lexsort((part, vals), axis=1)
    return part[rows, order]


def nn_overlap(nn_v, nn_z) -> int:
    """Number of indices two neighbor lists share."""
    return len(set(int(i) for i in nn_v) & set(int(i) for i in nn_z))


def overlap_counts(index_v: NeighborIndex, index_z: NeighborIndex) -> np.ndarray:
    """Per-item overlap between two neighbor indices over the same items."""
    a, b = index_v.neighbors, index_z.neighbors
    if a.shape != b.shape:
        raise ValidationError(f"neighbor indices have different shapes {a.shape} and {b.shape}")
    # each row holds distinct indices, so repeats in the concatenation are shared neighbors
    both = np.sort(np.concatenate([a, b], axis=1), axis=1)
    return np.count_nonzero(both[:, 1:] == both[:, :-1], axis=1)


def mean_nn_overlap(v, z, k: int = 10, measure: str = "cosine", rows=None) -> float:
    """Mean nearest neighbor overlap between paired sets ``v`` and ``z``.

    ``v`` and ``z`` may have different dimensions but must have the same
    number of rows (and the same keys, when both are VectorSets).  Neighbors
    are searched among all rows; ``rows`` optionally restricts which items
    are averaged over (e.g. test items of a pooled train+test set).
    """
    if isinstance(v, VectorSet) and isinstance(z, VectorSet) and v.keys != z.keys:
        if len(v) != len(z):
            raise ValidationError(f"paired sets differ in size: {len(v)} vs {len(z)}")
        raise ValidationError("paired sets have different key order")
    nv = len(v) if isinstance(v, VectorSet) else np.shape(v)[0]
    nz = len(z) if isinstance(z, VectorSet) else np.shape(z)[0]
    if nv != nz:
        raise ValidationError(f"paired sets differ in size: {nv} vs {nz}")
    iv = top_k_neighbors(v, k, measure)
    iz = top_k_neighbors(z, k, measure)
    counts = overlap_counts(iv, iz)
    if rows is not None:
        counts = counts[np.asarray(rows, dtype=np.intp)]
        if counts.size == 0:
            raise ValidationError("no rows selected")
    return int(counts.sum()) / (iv.effective_k * counts.size)
