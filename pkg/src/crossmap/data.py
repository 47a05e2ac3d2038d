"""Vector storage, file ingestion, pairing and fold splitting.

A :class:`VectorSet` is one modality (word embeddings, image centroids,
mapped vectors ...).  A :class:`PairedDataset` holds two key-aligned sets,
the ``(X, Y)`` of a mapping problem, plus optional class labels.
"""

from __future__ import annotations

import math
from collections.abc import Iterable, Mapping, Sequence
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ParseError, ValidationError

MEASURES = ("cosine", "euclidean")


def check_measure(measure: str) -> str:
    if measure not in MEASURES:
        raise ValidationError(f"unknown similarity measure {measure!r}; expected one of {MEASURES}")
    return measure


def _default_keys(n: int) -> tuple[str, ...]:
    width = len(str(max(n - 1, 0)))
    return tuple(f"{i:0{width}d}" for i in range(n))


@dataclass(frozen=True)
class VectorSet:
    """Ordered, uniquely keyed collection of ``N`` vectors of dimension ``d``.

    ``values`` is stored as a read-only float64 array.
    """

    keys: tuple[str, ...]
    values: np.ndarray

    def __post_init__(self):
        keys = tuple(str(k) for k in self.keys)
        values = np.array(self.values, dtype=np.float64, copy=True)
        if values.ndim != 2:
            raise ValidationError(f"values must be a 2-D matrix, got shape {values.shape}")
        if values.shape[1] < 1:
            raise ValidationError("vector dimension must be positive")
        if len(keys) != values.shape[0]:
            raise ValidationError(f"{len(keys)} keys for {values.shape[0]} rows")
        if len(set(keys)) != len(keys):
            seen = set()
            for k in keys:
                if k in seen:
                    raise ValidationError(f"duplicate key {k!r}")
                seen.add(k)
        if not np.all(np.isfinite(values)):
            bad = int(np.argwhere(~np.isfinite(values))[0, 0])
            raise ValidationError(f"non-finite value in row {keys[bad]!r}")
        values.flags.writeable = False
        object.__setattr__(self, "keys", keys)
        object.__setattr__(self, "values", values)

    @classmethod
    def from_array(cls, values, keys: Sequence[str] | None = None) -> VectorSet:
        values = np.asarray(values, dtype=np.float64)
        if keys is None:
            keys = _default_keys(values.shape[0] if values.ndim else 0)
        return cls(tuple(keys), values)

    @property
    def dim(self) -> int:
        return self.values.shape[1]

    def __len__(self) -> int:
        return len(self.keys)

    def index(self, key: str) -> int:
        return self._positions()[key]

    def _positions(self) -> dict[str, int]:
        pos = self.__dict__.get("_pos")
        if pos is None:
            pos = {k: i for i, k in enumerate(self.keys)}
            object.__setattr__(self, "_pos", pos)
        return pos

    def __contains__(self, key) -> bool:
        return key in self._positions()

    def vector(self, key: str) -> np.ndarray:
        return self.values[self.index(key)]

    def take(self, indices) -> VectorSet:
        indices = np.asarray(indices, dtype=np.intp)
        return VectorSet(tuple(self.keys[i] for i in indices), self.values[indices])

    def with_values(self, values) -> VectorSet:
        """Same keys, new matrix (row count must match)."""
        return VectorSet(self.keys, values)

    def __eq__(self, other):
        if not isinstance(other, VectorSet):
            return NotImplemented
        return self.keys == other.keys and np.array_equal(self.values, other.values)

    __hash__ = None


@dataclass(frozen=True)
class PairedDataset:
    """Two key-aligned vector sets: row ``i`` of ``x`` is paired with row ``i`` of ``y``."""

    x: VectorSet
    y: VectorSet
    labels: tuple | None = None

    def __post_init__(self):
        if self.x.keys != self.y.keys:
            raise ValidationError("x and y keys are not aligned element-wise")
        if self.labels is not None:
            labels = tuple(self.labels)
            if len(labels) != len(self.x):
                raise ValidationError(f"{len(labels)} labels for {len(self.x)} items")
            object.__setattr__(self, "labels", labels)

    @property
    def keys(self) -> tuple[str, ...]:
        return self.x.keys

    def __len__(self) -> int:
        return len(self.x)

    def take(self, indices) -> PairedDataset:
        indices = np.asarray(indices, dtype=np.intp)
        labels = None if self.labels is None else tuple(self.labels[i] for i in indices)
        return PairedDataset(self.x.take(indices), self.y.take(indices), labels)

    def swapped(self) -> PairedDataset:
        """The reverse mapping problem (``y`` becomes the input)."""
        return PairedDataset(self.y, self.x, self.labels)

    def label_array(self) -> np.ndarray:
        if self.labels is None:
            raise ValidationError("dataset has no class labels")
        # map arbitrary hashable labels to dense ints, preserving first-seen order
        codes: dict = {}
        return np.array([codes.setdefault(lab, len(codes)) for lab in self.labels], dtype=np.intp)


# --------------------------------------------------------------------------
# ingestion


def _parse_floats(tokens, path, lineno):
    try:
        return [float(t) for t in tokens]
    except ValueError:
        bad = next(t for t in tokens if not _is_float(t))
        raise ParseError(f"non-numeric token {bad!r}", path, lineno) from None


def _is_float(token) -> bool:
    try:
        float(token)
    except ValueError:
        return False
    return True


def _finish(keys, rows, path) -> VectorSet:
    if not rows:
        raise ParseError("no vectors found", path)
    seen: dict[str, int] = {}
    for k, lineno in keys:
        if k in seen:
            raise ParseError(f"duplicate key {k!r} (first seen on line {seen[k]})", path, lineno)
        seen[k] = lineno
    values = np.array(rows, dtype=np.float64)
    if not np.all(np.isfinite(values)):
        row = int(np.argwhere(~np.isfinite(values))[0, 0])
        raise ParseError(f"non-finite value for key {keys[row][0]!r}", path, keys[row][1])
    return VectorSet(tuple(k for k, _ in keys), values)


def _existing(path) -> Path:
    path = Path(path)
    if not path.is_file():
        raise ValidationError(f"file not found: {path}")
    return path


def load_vector_set(path, format: str = "glove_text") -> VectorSet:
    """Read a vector file.

    ``glove_text``: ``key v1 v2 ... vd`` separated by whitespace.
    ``tsv``: ``key<TAB>v1,v2,...,vd``.

    The dimension is taken from the first record; blank lines are skipped.
    """
    path = _existing(path)
    if format not in ("glove_text", "tsv"):
        raise ValidationError(f"unknown vector format {format!r}")
    keys: list[tuple[str, int]] = []
    rows: list[list[float]] = []
    dim = None
    with path.open(encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\r\n")
            if not line.strip():
                continue
            if format == "glove_text":
                parts = line.split()
                key, tokens = parts[0], parts[1:]
            else:
                parts = line.split("\t")
                if len(parts) != 2:
                    raise ParseError(f"expected 2 tab-separated fields, got {len(parts)}", path, lineno)
                key, tokens = parts[0], parts[1].split(",")
            if not tokens:
                raise ParseError(f"key {key!r} has no values", path, lineno)
            vec = _parse_floats(tokens, path, lineno)
            if dim is None:
                dim = len(vec)
            elif len(vec) != dim:
                raise ParseError(f"dimension {len(vec)} does not match {dim} from the first row", path, lineno)
            keys.append((key, lineno))
            rows.append(vec)
    return _finish(keys, rows, path)


def save_vector_set(vs: VectorSet, path, format: str = "glove_text") -> None:
    with Path(path).open("w", encoding="utf-8", newline="\n") as fh:
        for key, row in zip(vs.keys, vs.values):
            if format == "glove_text":
                fh.write(key + " " + " ".join(repr(float(v)) for v in row) + "\n")
            elif format == "tsv":
                fh.write(key + "\t" + ",".join(repr(float(v)) for v in row) + "\n")
            else:
                raise ValidationError(f"unknown vector format {format!r}")


def load_paired_tsv(path) -> PairedDataset:
    """Read ``key<TAB>label<TAB>x1,...,xd<TAB>y1,...,yd`` records.

    The label column may be empty on every line (no labels) or filled on
    every line; a mix is rejected.  Labels are kept as strings.
    """
    path = _existing(path)
    keys: list[tuple[str, int]] = []
    labels: list[str] = []
    xs: list[list[float]] = []
    ys: list[list[float]] = []
    dims = None
    with path.open(encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\r\n")
            if not line.strip():
                continue
            parts = line.split("\t")
            if len(parts) != 4:
                raise ParseError(f"expected 4 tab-separated fields, got {len(parts)}", path, lineno)
            key, label, xs_raw, ys_raw = parts
            xv = _parse_floats(xs_raw.split(","), path, lineno)
            yv = _parse_floats(ys_raw.split(","), path, lineno)
            if dims is None:
                dims = (len(xv), len(yv))
            elif (len(xv), len(yv)) != dims:
                raise ParseError(
                    f"dimensions ({len(xv)}, {len(yv)}) do not match {dims} from the first row", path, lineno
                )
            keys.append((key, lineno))
            labels.append(label)
            xs.append(xv)
            ys.append(yv)
    x = _finish(keys, xs, path)
    y = _finish(keys, ys, path)
    has = [lab != "" for lab in labels]
    if any(has) and not all(has):
        raise ParseError("label column is filled on some lines but not others", path)
    return PairedDataset(x, y, tuple(labels) if all(has) else None)


def save_paired_tsv(ds: PairedDataset, path) -> None:
    with Path(path).open("w", encoding="utf-8", newline="\n") as fh:
        for i, key in enumerate(ds.keys):
            label = "" if ds.labels is None else str(ds.labels[i])
            xs = ",".join(repr(float(v)) for v in ds.x.values[i])
            ys = ",".join(repr(float(v)) for v in ds.y.values[i])
            fh.write(f"{key}\t{label}\t{xs}\t{ys}\n")


def aggregate_centroids(groups: Mapping[str, Iterable]) -> VectorSet:
    """One row per key: the arithmetic mean of that key's vectors (e.g. all images of a word)."""
    keys = []
    rows = []
    dim = None
    for key, vectors in groups.items():
        mat = np.asarray(list(vectors), dtype=np.float64)
        if mat.size == 0:
            raise ValidationError(f"group {key!r} is empty")
        if mat.ndim != 2:
            raise ValidationError(f"group {key!r} does not hold vectors of one dimension")
        if dim is None:
            dim = mat.shape[1]
        elif mat.shape[1] != dim:
            raise ValidationError(f"group {key!r} has dimension {mat.shape[1]}, expected {dim}")
        keys.append(key)
        rows.append(mat.mean(axis=0))
    if not keys:
        raise ValidationError("no groups given")
    return VectorSet(tuple(keys), np.vstack(rows))


@dataclass(frozen=True)
class PairingDiagnostics:
    n_x: int
    n_y: int
    n_paired: int
    dropped_x: tuple[str, ...] = field(default=())
    dropped_y: tuple[str, ...] = field(default=())

    def report(self) -> str:
        lines = [
            f"x items: {self.n_x}",
            f"y items: {self.n_y}",
            f"paired: {self.n_paired}",
            f"dropped from x (no y partner): {len(self.dropped_x)}",
            f"dropped from y (no x partner): {len(self.dropped_y)}",
        ]
        for name, dropped in (("x", self.dropped_x), ("y", self.dropped_y)):
            for k in dropped:
                lines.append(f"  dropped {name}: {k}")
        return "\n".join(lines) + "\n"


def pair_by_keys(x: VectorSet, y: VectorSet, labels: Mapping | None = None):
    """Restrict both sets to their common keys, in lexicographic key order.

    Returns ``(dataset, diagnostics)``.  ``labels`` optionally maps key to
    class label; keys missing from it are an error.
    """
    common = sorted(set(x.keys) & set(y.keys))
    if not common:
        raise ValidationError("x and y share no keys")
    xi = [x.index(k) for k in common]
    yi = [y.index(k) for k in common]
    lab = None
    if labels is not None:
        missing = [k for k in common if k not in labels]
        if missing:
            raise ValidationError(f"no label for key {missing[0]!r}")
        lab = tuple(labels[k] for k in common)
    ds = PairedDataset(x.take(xi), y.take(yi), lab)
    common_set = set(common)
    diag = PairingDiagnostics(
        n_x=len(x),
        n_y=len(y),
        n_paired=len(common),
        dropped_x=tuple(k for k in x.keys if k not in common_set),
        dropped_y=tuple(k for k in y.keys if k not in common_set),
    )
    return ds, diag


def k_fold_split(dataset: PairedDataset, k: int, seed: int) -> list[tuple[PairedDataset, PairedDataset]]:
    """Shuffled ``k``-fold partition; returns ``[(train, test), ...]``."""
    return [(dataset.take(tr), dataset.take(te)) for tr, te in k_fold_indices(len(dataset), k, seed)]


def k_fold_indices(n: int, k: int, seed: int) -> list[tuple[np.ndarray, np.ndarray]]:
    if not 2 <= k <= n:
        raise ValidationError(f"need 2 <= k <= N for k-fold CV, got k={k}, N={n}")
    perm = np.random.default_rng(seed).permutation(n)
    folds = np.array_split(perm, k)
    out = []
    for i, test in enumerate(folds):
        train = np.concatenate([f for j, f in enumerate(folds) if j != i])
        out.append((np.sort(train), np.sort(test)))
    return out


# --------------------------------------------------------------------------
# similarity


def similarity(a, b, measure: str) -> float:
    """Cosine similarity or the Euclidean similarity ``1 / (1 + ||a - b||)``."""
    check_measure(measure)
    a = np.asarray(a, dtype=np.float64).ravel()
    b = np.asarray(b, dtype=np.float64).ravel()
    if a.shape != b.shape:
        raise ValidationError(f"dimension mismatch: {a.shape[0]} vs {b.shape[0]}")
    if measure == "euclidean":
        return 1.0 / (1.0 + math.sqrt(float(np.sum((a - b) ** 2))))
    if not a.any() or not b.any():
        raise ValidationError("cosine similarity is undefined for a zero vector")
    # cosine is scale-free; rescaling first keeps tiny or huge norms representable
    a = a / np.max(np.abs(a))
    b = b / np.max(np.abs(b))
    na = float(np.linalg.norm(a))
    nb = float(np.linalg.norm(b))
    return float(np.clip(np.dot(a, b) / (na * nb), -1.0, 1.0))


def unit_rows(values: np.ndarray, keys: Sequence[str] | None = None) -> np.ndarray:
    """Rows scaled to unit norm; zero rows are an error naming the key."""
    norms = np.linalg.norm(values, axis=1)
    zero = np.flatnonzero(norms == 0.0)
    if zero.size:
        name = keys[zero[0]] if keys is not None else str(zero[0])
        raise ValidationError(f"cosine similarity is undefined for zero vector {name!r}")
    return values / norms[:, None]


def pairwise_similarity(a, b=None, measure: str = "cosine") -> np.ndarray:
    """Similarity matrix between rows of ``a`` and rows of ``b`` (default ``a``)."""
    from scipy.spatial.distance import cdist

    check_measure(measure)
    a = np.atleast_2d(np.asarray(a, dtype=np.float64))
    b = a if b is None else np.atleast_2d(np.asarray(b, dtype=np.float64))
    if measure == "euclidean":
        return 1.0 / (1.0 + cdist(a, b, "euclidean"))
    return np.clip(unit_rows(a) @ unit_rows(b).T, -1.0, 1.0)
