import json

import pytest

from crossmap.data import VectorSet, save_paired_tsv, save_vector_set
from crossmap.errors import ConfigError
from crossmap.evaluation import save_benchmark
from crossmap.harness import load_config, run_experiment1, run_experiment2
from crossmap.report import read_report
from crossmap.synth import SynthSpec, generate_planted_benchmark, generate_synthetic_paired

EXP1 = """
[experiment]
name = "toy"
seed = {seed}
k = {k}
folds = 3
directions = {directions}
models = {models}
losses = {losses}

[data.synthetic]
n_classes = 8
items_per_class = 15
d_x = 8
d_y = 8
noise_x = 1.0
noise_y = 5.0

[training]
epochs = {epochs}
batch_size = 32

[grid]
learning_rate = {lrs}
hidden_units = [16]
margin = [1.0, 5.0]
"""


def exp1_config(tmp_path, name="exp1.toml", seed=0, k=5, directions='["x_to_y"]', models='["lin", "nn-1"]',
                losses='["mse"]', epochs=8, lrs="[0.01]", extra=""):
    p = tmp_path / name
    p.write_text(EXP1.format(seed=seed, k=k, directions=directions, models=models, losses=losses, epochs=epochs,
                             lrs=lrs) + extra, encoding="utf-8")
    return p


def test_exp1_outputs_and_determinism(tmp_path):
    cfg = exp1_config(tmp_path, directions='["x_to_y", "y_to_x"]', losses='["mse", "max_margin"]')
    a = run_experiment1(cfg, tmp_path / "a", fmt="markdown")
    run_experiment1(cfg, tmp_path / "b", fmt="markdown")
    files = sorted(p.relative_to(tmp_path / "a") for p in (tmp_path / "a").rglob("*") if p.is_file())
    assert len(files) == 3 + 8 * 3
    for f in files:
        assert (tmp_path / "a" / f).read_bytes() == (tmp_path / "b" / f).read_bytes()
    assert read_report(tmp_path / "a" / "report.csv") == a
    assert len(a) == 8 and all(r["status"] == "ok" for r in a.rows)
    mm = [r for r in a.rows if r["loss"] == "max_margin"]
    assert all(r["margin"] in (1.0, 5.0) for r in mm)
    prov = json.loads((tmp_path / "a" / "provenance.json").read_text())
    assert sorted(k for fold in prov["folds"] for k in fold) == sorted(
        generate_synthetic_paired(SynthSpec(8, 15, 8, 8, noise_x=1.0, noise_y=5.0)).keys)
    assert prov["rows"][0]["chosen"]["learning_rate"] == 0.01
    assert len(prov["rows"][0]["model_seeds"]) == 3


def test_exp1_other_seed_differs(tmp_path):
    a = run_experiment1(exp1_config(tmp_path), seed=1)
    b = run_experiment1(exp1_config(tmp_path), seed=2)
    assert a != b


def test_exp1_high_output_noise_favours_input_structure(tmp_path):
    rep = run_experiment1(exp1_config(tmp_path, models='["nn-1"]', epochs=15))
    (row,) = rep.rows
    assert row["mnno_x_fx"] > row["mnno_y_fx"]


def test_exp1_k_sweep_keeps_ordering(tmp_path):
    orders = set()
    for k in (5, 10, 30):
        for row in run_experiment1(exp1_config(tmp_path, models='["lin"]'), k=k).rows:
            orders.add(row["mnno_x_fx"] > row["mnno_y_fx"])
    assert orders == {True}


def test_exp1_failed_cells_reported(tmp_path):
    rep = run_experiment1(exp1_config(tmp_path, models='["nn-1"]', lrs="[1e8]", epochs=20))
    (row,) = rep.rows
    assert row["status"] == "FAILED" and row["mnno_x_fx"] is None


def test_exp1_partial_failure_keeps_good_cell(tmp_path):
    rep = run_experiment1(exp1_config(tmp_path, models='["nn-1"]', lrs="[1e8, 0.01]"), tmp_path / "o")
    assert rep.rows[0]["status"] == "ok" and rep.rows[0]["learning_rate"] == 0.01
    prov = json.loads((tmp_path / "o" / "provenance.json").read_text())
    assert [c["status"] for c in prov["rows"][0]["cv"]] == ["failed", "ok"]


@pytest.mark.parametrize("override, match", [
    ({"models": "[]"}, "empty"),
    ({"models": '["svm"]'}, "svm"),
    ({"losses": '["hinge"]'}, "hinge"),
    ({"directions": '["sideways"]'}, "sideways"),
])
def test_exp1_validation(tmp_path, override, match):
    with pytest.raises(ConfigError, match=match):
        run_experiment1(exp1_config(tmp_path, **override), tmp_path / "o")
    assert not (tmp_path / "o").exists()


def test_exp1_max_margin_needs_labels(tmp_path):
    ds = generate_synthetic_paired(SynthSpec(4, 5, 3, 3))
    ds = type(ds)(ds.x, ds.y, None)
    save_paired_tsv(ds, tmp_path / "p.tsv")
    (tmp_path / "c.toml").write_text('[experiment]\nlosses = ["max_margin"]\n[data]\npaired = "p.tsv"\n')
    with pytest.raises(ConfigError, match="labels"):
        run_experiment1(tmp_path / "c.toml")


def test_exp1_missing_data_file(tmp_path):
    (tmp_path / "c.toml").write_text('[data]\nx = "nope_x.txt"\ny = "nope_y.txt"\n')
    with pytest.raises(ConfigError, match="nope_x.txt"):
        run_experiment1(tmp_path / "c.toml")


def test_exp1_from_separate_files(tmp_path):
    ds = generate_synthetic_paired(SynthSpec(4, 6, 3, 3, seed=2))
    save_vector_set(ds.x, tmp_path / "x.txt")
    save_vector_set(VectorSet(ds.keys[2:], ds.y.values[2:]), tmp_path / "y.txt")
    (tmp_path / "c.toml").write_text(
        '[experiment]\nk = 3\nfolds = 2\nmodels = ["lin"]\n[data]\nx = "x.txt"\ny = "y.txt"\n'
        '[training]\nepochs = 2\n[grid]\nlearning_rate = [0.01]\n')
    rep = run_experiment1(tmp_path / "c.toml", tmp_path / "o")
    assert rep.rows[0]["status"] == "ok"
    assert "dropped from x (no y partner): 2" in (tmp_path / "o" / "pairing.txt").read_text()


def test_bad_toml(tmp_path):
    (tmp_path / "c.toml").write_text("[experiment\n")
    with pytest.raises(ConfigError):
        load_config(tmp_path / "c.toml")


EXP2_FILES = """
[experiment]
seed = 4
runs = 3
d_y = 40

[[embeddings]]
name = "emb"
path = "emb.txt"

[[benchmarks]]
name = "bench"
path = "bench.txt"
"""


def test_exp2_from_files_and_determinism(tmp_path):
    emb, bench = generate_planted_benchmark(50, 6, 60, seed=1)
    save_vector_set(emb, tmp_path / "emb.txt")
    save_benchmark(bench, tmp_path / "bench.txt")
    (tmp_path / "c.toml").write_text(EXP2_FILES)
    rep = run_experiment2(tmp_path / "c.toml", tmp_path / "a")
    run_experiment2(tmp_path / "c.toml", tmp_path / "b")
    for f in ("report.csv", "provenance.json"):
        assert (tmp_path / "a" / f).read_bytes() == (tmp_path / "b" / f).read_bytes()
    assert [(r["measure"], r["variant"]) for r in rep.rows] == [
        ("cosine", "nn"), ("cosine", "lin"), ("cosine", "raw"),
        ("euclidean", "nn"), ("euclidean", "lin"), ("euclidean", "raw")]


def test_exp2_identity_smoke(tmp_path):
    (tmp_path / "c.toml").write_text(
        '[experiment]\nruns = 2\ninit = "identity"\nmaps = ["lin"]\n'
        '[[embeddings]]\nname = "p"\nsynthetic = { n_items = 40, dim = 6, n_pairs = 50, seed = 0 }\n')
    rep = run_experiment2(tmp_path / "c.toml")
    raw = {r["measure"]: r["spearman"] for r in rep.rows if r["variant"] == "raw"}
    for r in rep.rows:
        assert r["spearman"] == raw[r["measure"]]


def test_exp2_missing_files_named(tmp_path):
    (tmp_path / "c.toml").write_text(EXP2_FILES)
    with pytest.raises(ConfigError, match="bench.txt"):
        run_experiment2(tmp_path / "c.toml")
    (tmp_path / "bench.txt").write_text("a\tb\t1\n")
    with pytest.raises(ConfigError, match="emb.txt"):
        run_experiment2(tmp_path / "c.toml")


def test_data_seed_resolution():
    from crossmap.harness import _data_seed
    own = {"data": {"synthetic": {"seed": 7}}}
    bare = {"data": {"synthetic": {}}}
    assert _data_seed(own, None, 0) is None   # table seed kept
    assert _data_seed(own, 3, 0) == 3          # explicit override wins
    assert _data_seed(bare, None, 5) == 5      # falls back to the experiment seed
