"""Acceptance criteria, one test each.

Every test records a ``PASS``/``FAIL`` line with the measured numbers; the
lines are echoed in the pytest terminal summary, and running this file as a
script prints them directly.
"""

import time

import numpy as np
from scipy.stats import ortho_group

import oracles
from conftest import ACCEPTANCE_LINES
from crossmap.data import k_fold_indices
from crossmap.evaluation import bonferroni_adjust, run_untrained_probe, spearman_rho, wilcoxon_rank_sum_p
from crossmap.harness import run_experiment1, run_experiment2
from crossmap.models import init_model
from crossmap.neighbors import mean_nn_overlap
from crossmap.synth import generate_linear_task, generate_planted_benchmark
from crossmap.training import TrainConfig, train
from test_models import _check


def record(number, title, ok, detail):
    line = f"[{'PASS' if ok else 'FAIL'}] {number}. {title}: {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)
    assert ok, line


def test_1_mnno_oracle_equivalence():
    from test_neighbors import random_case

    start = time.perf_counter()
    rng = np.random.default_rng(2024)
    mismatches = 0
    for _ in range(200):
        v, z, k, m = random_case(rng)
        if mean_nn_overlap(v, z, k, m) != oracles.mnno(v.tolist(), z.tolist(), k, m):
            mismatches += 1
    elapsed = time.perf_counter() - start
    record(1, "mNNO equals brute-force oracle", mismatches == 0 and elapsed < 10,
           f"{mismatches}/200 mismatches, {elapsed:.1f}s (limit 10s)")


def test_2_mnno_analytic_cases():
    rng = np.random.default_rng(5)
    failures = []
    for trial in range(50):
        n = int(rng.integers(3, 40))
        d = int(rng.integers(2, 7))
        k = int(rng.integers(1, 12))
        v, z = rng.standard_normal((n, d)), rng.standard_normal((n, int(rng.integers(2, 7))))
        q = ortho_group.rvs(d, random_state=rng)
        perm = rng.permutation(n)
        for m in ("cosine", "euclidean"):
            base = mean_nn_overlap(v, z, k, m)
            checks = {
                "self": mean_nn_overlap(v, v, k, m) == 1.0,
                "k=n-1": mean_nn_overlap(v, z, n - 1, m) == 1.0,
                "permutation": mean_nn_overlap(v[perm], z[perm], k, m) == base,
                "orthogonal": mean_nn_overlap(v @ q.T, z, k, m) == base,
            }
            if m == "euclidean":
                checks["rigid"] = mean_nn_overlap(v @ q.T + rng.standard_normal(d) * 3, z, k, m) == base
            failures += [f"{name}/{m}/trial{trial}" for name, ok in checks.items() if not ok]
    record(2, "mNNO analytic cases exact", not failures,
           f"{len(failures)} failures over 50 random sets x 2 measures" + (f" ({failures[:3]})" if failures else ""))


def test_3_gradient_check():
    start = time.perf_counter()
    worst = (0.0, None)
    for depth in (0, 1, 3, 5):
        for act in ("relu", "tanh", "sigmoid"):
            for kind in ("mse", "cosine", "max_margin"):
                err = _check(depth, act, kind, seed=depth * 100 + len(act) * 10 + len(kind))
                worst = max(worst, (err, f"depth={depth} {act} {kind}"), key=lambda t: t[0])
    elapsed = time.perf_counter() - start
    record(3, "gradients match central differences", worst[0] < 1e-5 and elapsed < 60,
           f"worst relative error {worst[0]:.2e} ({worst[1]}) over 36 configs, limit 1e-5; {elapsed:.1f}s (limit 60s)")


_LINEAR_RUN = {}


def linear_run():
    """Criterion 4's training run (shared with criterion 6)."""
    if not _LINEAR_RUN:
        ds = generate_linear_task(500, 16, 16, noise=0.0, seed=0)
        tr, te = k_fold_indices(len(ds), 5, 0)[0]
        cfg = TrainConfig(loss="mse", learning_rate=7e-5, batch_size=2, epochs=200, seed=0, neighbor_k=10)
        start = time.perf_counter()
        model, hist = train(init_model(16, 16, [], seed=0), ds.take(tr), ds.take(te), cfg)
        _LINEAR_RUN.update(model=model, hist=hist, test=ds.take(te), elapsed=time.perf_counter() - start)
    return _LINEAR_RUN


def test_4_convergence():
    run = linear_run()
    test = run["test"]
    resid = run["model"].predict(test.x.values) - test.y.values
    mse = float(np.mean(resid**2))
    mnno = mean_nn_overlap(test.y.values, run["model"].predict(test.x.values), 10, "cosine")
    ok = mse < 1e-3 and mnno > 0.9 and run["elapsed"] < 30
    record(4, "noiseless linear task converges", ok,
           f"test MSE {mse:.2e} (< 1e-3), test mNNO(Y,f(X)) {mnno:.4f} (> 0.9) after 200 epochs, "
           f"{run['elapsed']:.1f}s (limit 30s)")


def test_5_core_phenomenon():
    start = time.perf_counter()
    xs, ys = [], []
    for seed in range(10):
        cfg = {
            "experiment": {"name": "synthetic", "seed": seed, "k": 10, "measure": "cosine", "folds": 5,
                           "models": ["nn-1"], "losses": ["mse"], "activation": "relu"},
            "data": {"synthetic": {"n_classes": 20, "items_per_class": 25, "d_x": 32, "d_y": 32,
                                   "noise_x": 1.0, "noise_y": 5.0}},
            "training": {"epochs": 50, "batch_size": 64},
            "grid": {"learning_rate": [0.001], "hidden_units": [128]},
        }
        (row,) = run_experiment1(cfg).rows
        xs.append(row["mnno_x_fx"])
        ys.append(row["mnno_y_fx"])
    elapsed = time.perf_counter() - start
    wins = sum(x > y for x, y in zip(xs, ys))
    (p,) = bonferroni_adjust([wilcoxon_rank_sum_p(xs, ys)])
    ok = wins >= 9 and p < 0.05 and elapsed < 300
    record(5, "f(X) keeps X's structure more than Y's", ok,
           f"X wins {wins}/10 seeds (mean {np.mean(xs):.3f} vs {np.mean(ys):.3f}), "
           f"rank-sum p (Bonferroni) {p:.2e} (< 0.05), {elapsed:.0f}s (limit 300s)")


def test_6_low_mse_implies_high_overlap():
    hist = linear_run()["hist"]
    loss = hist.column("train_loss")
    overlap = hist.column("mnno_y_train")
    qualifying = loss < 1e-6
    n = int(qualifying.sum())
    worst = float(overlap[qualifying].min()) if n else float("nan")
    # with no qualifying epoch the claim would hold vacuously; that is reported as a failure
    record(6, "train MSE < 1e-6 implies train mNNO(f(X),Y) > 0.95", n > 0 and worst > 0.95,
           f"{n} of {len(hist)} epochs below 1e-6, lowest mNNO among them {worst:.4f}")


def test_7_untrained_probe():
    emb, bench = generate_planted_benchmark(n_items=200, dim=64, n_pairs=500, seed=0)
    start = time.perf_counter()
    rep = run_untrained_probe(emb, [bench], runs=10, d_y=2048, activation="tanh", seed=0, measures=("cosine",))
    elapsed = time.perf_counter() - start
    rho = {r["variant"]: r["spearman"] for r in rep.rows}
    gap = abs(rho["nn"] - rho["raw"])
    record(7, "untrained nn keeps benchmark correlation", gap < 0.05 and elapsed < 60,
           f"cosine Spearman raw {rho['raw']:.4f}, nn {rho['nn']:.4f} (10 runs), |gap| {gap:.4f} (< 0.05), "
           f"{elapsed:.1f}s (limit 60s)")


def test_8_statistics():
    rng = np.random.default_rng(8)
    layouts = mismatches = 0
    for n in range(1, 10):
        for m in range(1, 11 - n):
            for _ in range(3):
                pooled = rng.permutation(n + m) + rng.random()
                a, b = pooled[:n].tolist(), pooled[n:].tolist()
                layouts += 1
                mismatches += wilcoxon_rank_sum_p(a, b, "exact") != oracles.rank_sum_p_enumerated(a, b)
    separation = wilcoxon_rank_sum_p([1, 2, 3], [10, 11, 12])
    worst = 0.0
    for _ in range(100):
        size = int(rng.integers(4, 40))
        a = rng.integers(0, 6, size).astype(float)
        b = rng.integers(0, 6, size).astype(float)
        if np.all(a == a[0]) or np.all(b == b[0]):
            b[0], b[1] = 0.0, 5.0
            a[0], a[1] = 0.0, 5.0
        expected = oracles.pearson(oracles.average_ranks(a.tolist()), oracles.average_ranks(b.tolist()))
        worst = max(worst, abs(spearman_rho(a, b) - expected))
    ok = mismatches == 0 and abs(separation - 0.1) < 1e-15 and worst <= 1e-12
    record(8, "rank statistics match enumeration oracles", ok,
           f"Wilcoxon exact {mismatches}/{layouts} mismatches (n+m <= 10), separation case p={separation!r}; "
           f"Spearman max deviation {worst:.1e} on 100 tied inputs (limit 1e-12)")


def test_9_determinism(tmp_path):
    exp1 = {
        "experiment": {"seed": 3, "k": 5, "folds": 3, "directions": ["x_to_y", "y_to_x"], "models": ["lin", "nn-1"],
                       "losses": ["mse", "max_margin"]},
        "data": {"synthetic": {"n_classes": 6, "items_per_class": 10, "d_x": 6, "d_y": 5}},
        "training": {"epochs": 6, "batch_size": 16},
        "grid": {"learning_rate": [0.01, 0.001], "hidden_units": [8], "margin": [1.0], "dropout": [0.0, 0.2]},
    }
    exp2 = {
        "experiment": {"seed": 3, "runs": 3, "d_y": 64},
        "embeddings": [{"name": "p", "synthetic": {"n_items": 60, "dim": 8, "n_pairs": 80, "seed": 1}}],
    }
    differing = []
    for name, fn, cfg in (("exp1", run_experiment1, exp1), ("exp2", run_experiment2, exp2)):
        for run in ("a", "b"):
            fn(cfg, tmp_path / name / run, fmt="markdown")
        root = tmp_path / name / "a"
        for f in sorted(p for p in root.rglob("*") if p.is_file()):
            twin = tmp_path / name / "b" / f.relative_to(root)
            if f.read_bytes() != twin.read_bytes():
                differing.append(str(f.relative_to(tmp_path)))
    count = sum(1 for p in tmp_path.rglob("*") if p.is_file())
    record(9, "reports are byte-identical across reruns", not differing,
           f"{count} files compared, {len(differing)} differ" + (f": {differing}" if differing else ""))


if __name__ == "__main__":
    import sys

    import pytest

    sys.exit(pytest.main([__file__, "-q"]))
