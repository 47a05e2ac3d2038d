"""
Random networks preserve semantic structure
===========================================

Push word embeddings through networks with random uniform[-1, 1] weights
and no training at all, then score a word-similarity benchmark with the
mapped vectors.  Under cosine similarity the rank correlation with the
gold ratings barely moves.
"""

from crossmap.evaluation import run_untrained_probe
from crossmap.report import to_markdown
from crossmap.synth import generate_planted_benchmark

# embeddings whose gold similarities come from a hidden geometry
embeddings, benchmark = generate_planted_benchmark(n_items=200, dim=64, n_pairs=500, seed=0)

report = run_untrained_probe(embeddings, [benchmark], runs=10, d_y=2048, activation="tanh", seed=0,
                             name="planted")
print(to_markdown(report))

raw = {r["measure"]: r["spearman"] for r in report.rows if r["variant"] == "raw"}
for r in report.rows:
    if r["variant"] != "raw":
        print(f"{r['measure']:9s} {r['variant']:3s}  change vs raw {r['spearman'] - raw[r['measure']]:+.3f}")
