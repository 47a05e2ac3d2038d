"""Word-similarity scoring, rank statistics and the untrained-network probe."""

from __future__ import annotations

import math
from collections.abc import Sequence
from dataclasses import dataclass
from functools import lru_cache
from pathlib import Path

import numpy as np
from scipy.stats import norm

from .data import VectorSet, check_measure, similarity
from .errors import ParseError, ValidationError
from .models import InitScheme, forward, init_model
from .report import ExperimentReport

EXACT_MAX_N = 12


@dataclass(frozen=True)
class BenchmarkPairs:
    """Word pairs with human similarity ratings."""

    name: str
    pairs: tuple

    def __post_init__(self):
        pairs = tuple((str(a), str(b), float(r)) for a, b, r in self.pairs)
        if not pairs:
            raise ValidationError(f"benchmark {self.name!r} has no pairs")
        if not all(math.isfinite(r) for _, _, r in pairs):
            raise ValidationError(f"benchmark {self.name!r} has a non-finite rating")
        object.__setattr__(self, "pairs", pairs)

    def __len__(self) -> int:
        return len(self.pairs)


def load_benchmark(path, name: str | None = None) -> BenchmarkPairs:
    """Read ``word1<TAB>word2<TAB>rating`` lines."""
    path = Path(path)
    if not path.exists():
        raise ValidationError(f"benchmark file not found: {path}")
    pairs = []
    for lineno, line in enumerate(path.read_text(encoding="utf-8").splitlines(), start=1):
        if not line.strip():
            continue
        parts = line.split("\t")
        if len(parts) != 3:
            raise ParseError(f"expected 3 tab-separated fields, got {len(parts)}", path, lineno)
        try:
            rating = float(parts[2])
        except ValueError:
            raise ParseError(f"non-numeric rating {parts[2]!r}", path, lineno) from None
        pairs.append((parts[0], parts[1], rating))
    return BenchmarkPairs(name or path.stem, tuple(pairs))


def save_benchmark(bench: BenchmarkPairs, path) -> None:
    with Path(path).open("w", encoding="utf-8", newline="\n") as fh:
        for a, b, r in bench.pairs:
            fh.write(f"{a}\t{b}\t{r!r}\n")


def score_word_pairs(embeddings: VectorSet, pairs: BenchmarkPairs, measure: str = "cosine"):
    """Predicted similarity for every pair whose words both have a vector.

    Returns ``(scores, ratings, coverage)``; ``scores`` and ``ratings`` are
    aligned over the covered pairs only.
    """
    check_measure(measure)
    scores, ratings = [], []
    for a, b, r in pairs.pairs:
        if a in embeddings and b in embeddings:
            scores.append(similarity(embeddings.vector(a), embeddings.vector(b), measure))
            ratings.append(r)
    if not scores:
        raise ValidationError(f"no pair of benchmark {pairs.name!r} is covered by the embeddings")
    return np.array(scores), np.array(ratings), len(scores) / len(pairs)


# --------------------------------------------------------------------------
# rank statistics


def average_ranks(values) -> np.ndarray:
    """1-based ranks; tied values share the mean of the ranks they span."""
    a = np.asarray(values, dtype=np.float64)
    order = np.argsort(a, kind="stable")
    sorted_a = a[order]
    # boundaries of runs of equal values
    starts = np.flatnonzero(np.r_[True, sorted_a[1:] != sorted_a[:-1]])
    ends = np.r_[starts[1:], a.size]
    ranks = np.empty(a.size, dtype=np.float64)
    for s, e in zip(starts, ends):
        ranks[order[s:e]] = (s + 1 + e) / 2.0
    return ranks


def spearman_rho(a, b) -> float:
    """Spearman correlation: Pearson correlation of the average ranks."""
    a = np.asarray(a, dtype=np.float64).ravel()
    b = np.asarray(b, dtype=np.float64).ravel()
    if a.size != b.size:
        raise ValidationError(f"length mismatch: {a.size} vs {b.size}")
    if a.size < 2:
        raise ValidationError("need at least 2 observations")
    if np.all(a == a[0]) or np.all(b == b[0]):
        raise ValidationError("rank correlation is undefined for a constant input")
    ra = average_ranks(a) - (a.size + 1) / 2.0
    rb = average_ranks(b) - (b.size + 1) / 2.0
    rho = float(np.dot(ra, rb) / math.sqrt(float(np.dot(ra, ra)) * float(np.dot(rb, rb))))
    return max(-1.0, min(1.0, rho))


@lru_cache(maxsize=None)
def _rank_sum_counts(n_total: int, n_a: int) -> tuple[int, ...]:
    """``counts[s]`` = number of size-``n_a`` subsets of ``{1..n_total}`` summing to ``s``."""
    max_sum = sum(range(n_total - n_a + 1, n_total + 1))
    # table[j][s]: subsets of size j seen so far with sum s
    table = [[0] * (max_sum + 1) for _ in range(n_a + 1)]
    table[0][0] = 1
    for r in range(1, n_total + 1):
        for j in range(min(r, n_a), 0, -1):
            row, prev = table[j], table[j - 1]
            for s in range(max_sum, r - 1, -1):
                if prev[s - r]:
                    row[s] += prev[s - r]
    return tuple(table[n_a])


def _exact_p(w: int, n_a: int, n_total: int) -> float:
    counts = _rank_sum_counts(n_total, n_a)
    centre2 = n_a * (n_total + 1)  # twice the null mean, kept integral
    dev = abs(2 * w - centre2)
    extreme = sum(c for s, c in enumerate(counts) if abs(2 * s - centre2) >= dev)
    return extreme / math.comb(n_total, n_a)


def _normal_p(ranks_a_sum: float, n_a: int, n_b: int, pooled) -> float:
    n = n_a + n_b
    _, tie_counts = np.unique(pooled, return_counts=True)
    tie_term = float(np.sum(tie_counts**3 - tie_counts)) / (n * (n - 1)) if n > 1 else 0.0
    var = n_a * n_b / 12.0 * ((n + 1) - tie_term)
    if var <= 0:
        return 1.0
    dev = abs(ranks_a_sum - n_a * (n + 1) / 2.0) - 0.5  # continuity correction
    if dev <= 0:
        return 1.0
    return float(min(1.0, 2.0 * norm.sf(dev / math.sqrt(var))))


def wilcoxon_rank_sum_p(a, b, method: str = "auto") -> float:
    """Two-sided Wilcoxon rank-sum (Mann-Whitney) p-value.

    ``auto`` uses the exact permutation distribution when the pooled sample
    has at most 12 values and no ties, otherwise the normal approximation
    with tie and continuity corrections.  The result lies in ``(0, 1]``.
    """
    a = np.asarray(a, dtype=np.float64).ravel()
    b = np.asarray(b, dtype=np.float64).ravel()
    if a.size == 0 or b.size == 0:
        raise ValidationError("both samples must be non-empty")
    if not (np.all(np.isfinite(a)) and np.all(np.isfinite(b))):
        raise ValidationError("samples must be finite")
    pooled = np.concatenate([a, b])
    ties = np.unique(pooled).size != pooled.size
    if method == "auto":
        method = "exact" if pooled.size <= EXACT_MAX_N and not ties else "normal"
    ranks = average_ranks(pooled)
    if method == "exact":
        if ties:
            raise ValidationError("the exact method needs untied samples")
        p = _exact_p(int(round(ranks[: a.size].sum())), a.size, pooled.size)
    elif method == "normal":
        p = _normal_p(float(ranks[: a.size].sum()), a.size, b.size, pooled)
    else:
        raise ValidationError(f"unknown method {method!r}")
    return max(p, np.finfo(float).tiny)


def bonferroni_adjust(p_values: Sequence[float], m: int | None = None) -> list[float]:
    """``min(1, p * m)`` for each p, with ``m`` defaulting to the number of p-values."""
    ps = [float(p) for p in p_values]
    for p in ps:
        if not 0.0 < p <= 1.0:
            raise ValidationError(f"p-value {p!r} is outside (0, 1]")
    m = len(ps) if m is None else int(m)
    if m < 1:
        raise ValidationError("m must be >= 1")
    return [min(1.0, p * m) for p in ps]


# --------------------------------------------------------------------------
# untrained-network probe


def random_maps(d_x: int, d_y: int, hidden_units: int, activation: str, seed: int, scheme: InitScheme | None = None):
    """The ``lin`` and ``nn`` maps of one probe run, with independent seeded draws."""
    scheme = scheme or InitScheme.uniform(-1.0, 1.0)
    seeds = np.random.SeedSequence(seed).generate_state(2)
    return {
        "lin": init_model(d_x, d_y, [], activation, scheme, int(seeds[0])),
        "nn": init_model(d_x, d_y, [hidden_units], activation, scheme, int(seeds[1])),
    }


def run_untrained_probe(
    embeddings: VectorSet,
    benchmarks: Sequence[BenchmarkPairs],
    runs: int = 10,
    d_y: int = 2048,
    activation: str = "tanh",
    seed: int = 0,
    hidden_units: int | None = None,
    measures: Sequence[str] = ("cosine", "euclidean"),
    maps: Sequence[str] = ("nn", "lin"),
    scheme: InitScheme | None = None,
    alpha: float = 0.05,
    name: str = "embeddings",
) -> ExperimentReport:
    """Spearman correlation of raw vs randomly mapped embeddings.

    Each run draws fresh ``lin`` (``d_x -> d_y``) and ``nn``
    (``d_x -> hidden_units -> d_y``) maps.  Mapped rows report the mean over
    runs and a rank-sum p-value of the per-run correlations against the raw
    correlation (repeated ``runs`` times), Bonferroni-adjusted over all
    mapped cells.
    """
    if runs < 1:
        raise ValidationError("runs must be >= 1")
    for m in maps:
        if m not in ("nn", "lin"):
            raise ValidationError(f"unknown map {m!r}")
    for m in measures:
        check_measure(m)
    hidden_units = d_y if hidden_units is None else hidden_units
    per_run = {(m, b.name, meas): [] for m in maps for b in benchmarks for meas in measures}
    for r in range(runs):
        run_seed = int(np.random.SeedSequence([seed, r]).generate_state(1)[0])
        models = random_maps(embeddings.dim, d_y, hidden_units, activation, run_seed, scheme)
        for m in maps:
            mapped = forward(models[m], embeddings)
            for bench in benchmarks:
                for meas in measures:
                    s, g, _ = score_word_pairs(mapped, bench, meas)
                    per_run[(m, bench.name, meas)].append(spearman_rho(s, g))

    rows = []
    for bench in benchmarks:
        for meas in measures:
            s, g, coverage = score_word_pairs(embeddings, bench, meas)
            raw = spearman_rho(s, g)
            for m in maps:
                vals = np.array(per_run[(m, bench.name, meas)])
                rows.append(
                    dict(embedding=name, benchmark=bench.name, measure=meas, variant=m,
                         spearman=float(vals.mean()), spearman_std=float(vals.std()), coverage=coverage,
                         runs=runs, p_value=wilcoxon_rank_sum_p(vals, np.full(runs, raw)))
                )
            rows.append(
                dict(embedding=name, benchmark=bench.name, measure=meas, variant="raw",
                     spearman=raw, spearman_std=0.0, coverage=coverage, runs=1)
            )
    mapped_rows = [r for r in rows if r["variant"] != "raw"]
    adjusted = bonferroni_adjust([r["p_value"] for r in mapped_rows]) if mapped_rows else []
    for r, p in zip(mapped_rows, adjusted):
        r["p_adjusted"] = p
        r["significant"] = p < alpha
    for r in rows:
        r.setdefault("significant", False)
    return ExperimentReport("exp2", rows)
