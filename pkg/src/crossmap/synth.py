"""Synthetic paired data with controllable cross-space predictability.

Items come in classes.  Each class has a center ``c_k`` in the input space;
an item's input vector is ``x = c_k + noise_x * e_x`` and its output vector
is ``y = T(c_k) + noise_y * e_y`` for a fixed random map ``T``.  Because
``e_x`` and ``e_y`` are independent, only the class-level structure is
shared between the spaces; ``noise_y`` controls how much of ``Y`` cannot be
predicted from ``X``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .data import PairedDataset, VectorSet
from .errors import ValidationError
from .evaluation import BenchmarkPairs


@dataclass(frozen=True)
class SynthSpec:
    n_classes: int = 20
    items_per_class: int = 25
    d_x: int = 32
    d_y: int = 32
    cross_map: str = "linear"
    noise_x: float = 0.1
    noise_y: float = 0.5
    center_scale: float = 1.0
    seed: int = 0

    def __post_init__(self):
        for name in ("n_classes", "items_per_class", "d_x", "d_y"):
            if getattr(self, name) < 1:
                raise ValidationError(f"{name} must be positive")
        if self.cross_map not in ("linear", "tanh_mlp"):
            raise ValidationError(f"unknown cross_map {self.cross_map!r}; expected 'linear' or 'tanh_mlp'")
        if self.noise_x < 0 or self.noise_y < 0:
            raise ValidationError("noise levels must be non-negative")
        if self.center_scale <= 0:
            raise ValidationError("center_scale must be positive")

    @property
    def n_items(self) -> int:
        return self.n_classes * self.items_per_class


def generate_synthetic_paired(spec: SynthSpec) -> PairedDataset:
    """Labelled paired dataset drawn according to ``spec``.

    Centers, the map ``T`` and the two noise matrices come from independent
    child streams of ``spec.seed``, so changing a noise level rescales the
    same draws instead of producing new ones.
    """
    centers_rng, map_rng, ex_rng, ey_rng = (np.random.default_rng(s) for s in np.random.SeedSequence(spec.seed).spawn(4))
    centers = spec.center_scale * centers_rng.standard_normal((spec.n_classes, spec.d_x))
    if spec.cross_map == "linear":
        a = map_rng.uniform(-1.0, 1.0, (spec.d_y, spec.d_x))
        mapped = centers @ a.T
    else:
        h = max(spec.d_x, spec.d_y)
        w0 = map_rng.uniform(-1.0, 1.0, (h, spec.d_x))
        w1 = map_rng.uniform(-1.0, 1.0, (spec.d_y, h))
        mapped = np.tanh(centers @ w0.T) @ w1.T
    cls = np.repeat(np.arange(spec.n_classes), spec.items_per_class)
    x = centers[cls] + spec.noise_x * ex_rng.standard_normal((spec.n_items, spec.d_x))
    y = mapped[cls] + spec.noise_y * ey_rng.standard_normal((spec.n_items, spec.d_y))
    width = len(str(spec.n_items - 1))
    keys = tuple(f"item{i:0{width}d}" for i in range(spec.n_items))
    labels = tuple(f"class{k}" for k in cls)
    return PairedDataset(VectorSet(keys, x), VectorSet(keys, y), labels)


def generate_planted_benchmark(
    n_items: int = 200,
    dim: int = 64,
    n_pairs: int = 500,
    n_clusters: int = 10,
    noise: float = 0.5,
    seed: int = 0,
    name: str = "planted",
):
    """Embeddings plus a word-similarity benchmark whose gold ratings come
    from a hidden geometry.

    Latent points are clustered Gaussians; the embeddings are the latent
    points plus isotropic noise, and the rating of a pair is the cosine of
    its latent points.  Returns ``(embeddings, benchmark)``.
    """
    if n_items < 2 or n_pairs < 1:
        raise ValidationError("need at least 2 items and 1 pair")
    rng = np.random.default_rng(seed)
    centers = rng.standard_normal((n_clusters, dim))
    member = rng.integers(0, n_clusters, n_items)
    latent = centers[member] + 0.7 * rng.standard_normal((n_items, dim))
    emb = latent + noise * rng.standard_normal((n_items, dim))
    width = len(str(n_items - 1))
    words = [f"w{i:0{width}d}" for i in range(n_items)]
    unit = latent / np.linalg.norm(latent, axis=1, keepdims=True)
    seen = set()
    pairs = []
    while len(pairs) < n_pairs:
        i, j = (int(v) for v in rng.integers(0, n_items, 2))
        if i == j or (min(i, j), max(i, j)) in seen:
            continue
        seen.add((min(i, j), max(i, j)))
        pairs.append((words[i], words[j], float(unit[i] @ unit[j])))
        if len(seen) == n_items * (n_items - 1) // 2:
            break
    return VectorSet(tuple(words), emb), BenchmarkPairs(name, tuple(pairs))


def generate_linear_task(n: int = 500, d_x: int = 16, d_y: int = 16, noise: float = 0.0, seed: int = 0,
                         scale: float = 0.25) -> PairedDataset:
    """Unlabelled regression data ``y = A x + noise * e`` with ``x ~ N(0, I)``
    and ``A`` drawn ``N(0, scale^2)`` entrywise; exactly learnable by ``lin``
    when ``noise == 0``."""
    if n < 2 or d_x < 1 or d_y < 1:
        raise ValidationError("need n >= 2 and positive dimensions")
    if noise < 0:
        raise ValidationError("noise must be non-negative")
    x_rng, a_rng, e_rng = (np.random.default_rng(s) for s in np.random.SeedSequence(seed).spawn(3))
    x = x_rng.standard_normal((n, d_x))
    a = scale * a_rng.standard_normal((d_y, d_x))
    y = x @ a.T + noise * e_rng.standard_normal((n, d_y))
    keys = tuple(f"item{i:0{len(str(n - 1))}d}" for i in range(n))
    return PairedDataset(VectorSet(keys, x), VectorSet(keys, y))
