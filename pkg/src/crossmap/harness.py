"""Experiment orchestration driven by TOML configs.

One config describes one experiment and writes one output directory:

* ``report.csv`` / ``report.md``: the result table
* ``provenance.json``: resolved config, seeds, fold assignments and the
  hyperparameters chosen for every row
* ``histories/``: per-fold, per-epoch training traces (Experiment 1)

Nothing written depends on wall-clock time, so a config and seed always
reproduce the same bytes.
"""

from __future__ import annotations

import json
import logging
import math
import sys
from dataclasses import asdict, fields
from pathlib import Path

import numpy as np

from .data import MEASURES, PairedDataset, k_fold_indices, load_paired_tsv, load_vector_set, pair_by_keys
from .errors import ConfigError, CrossmapRuntimeError
from .evaluation import bonferroni_adjust, load_benchmark, run_untrained_probe, wilcoxon_rank_sum_p
from .models import InitScheme, init_model, save_model
from .report import ExperimentReport, render_report
from .synth import SynthSpec, generate_planted_benchmark, generate_synthetic_paired
from .training import (
    LOSSES,
    TrainConfig,
    derive_seed,
    grid_search_cv,
    heldout_overlaps,
    hidden_dims_for,
    train,
)

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

log = logging.getLogger(__name__)

MODEL_DEPTHS = {"lin": 0, "nn": 1, "nn-1": 1, "nn-3": 3, "nn-5": 5}
DIRECTIONS = ("x_to_y", "y_to_x")
DEFAULT_GRID = {
    "learning_rate": [0.01, 0.001, 0.0001],
    "hidden_units": [64, 128, 256, 512, 1024],
    "margin": [1.0, 2.5, 5.0, 7.5, 10.0],
    "dropout": [0.0],
}
_TRAINING_KEYS = {"epochs", "batch_size", "rmsprop_rho", "rmsprop_eps", "learning_rate", "dropout", "margin", "loss"}


def load_config(path) -> dict:
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file not found: {path}")
    try:
        with path.open("rb") as fh:
            cfg = tomllib.load(fh)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from None
    cfg.setdefault("_base_dir", str(path.parent.resolve()))
    return cfg


def _resolve(cfg: dict, p) -> Path:
    p = Path(p)
    return p if p.is_absolute() else Path(cfg.get("_base_dir", ".")) / p


def _require_file(cfg, p) -> Path:
    path = _resolve(cfg, p)
    if not path.exists():
        raise ConfigError(f"file not found: {path}")
    return path


def _section(cfg: dict, name: str) -> dict:
    sec = cfg.get(name, {})
    if not isinstance(sec, dict):
        raise ConfigError(f"[{name}] must be a table")
    return sec


def synth_spec(table: dict, seed: int | None = None) -> SynthSpec:
    allowed = {f.name for f in fields(SynthSpec)}
    unknown = set(table) - allowed
    if unknown:
        raise ConfigError(f"unknown synthetic keys {sorted(unknown)}")
    kw = dict(table)
    if seed is not None:
        kw["seed"] = seed
    return SynthSpec(**kw)


def load_dataset(cfg: dict, seed: int | None = None) -> tuple[PairedDataset, str]:
    """Dataset from the ``[data]`` table; returns ``(dataset, pairing_report)``."""
    data = _section(cfg, "data")
    if "synthetic" in data:
        return generate_synthetic_paired(synth_spec(data["synthetic"], seed)), ""
    if "paired" in data:
        return load_paired_tsv(_require_file(cfg, data["paired"])), ""
    if "x" in data and "y" in data:
        fmt = data.get("format", "glove_text")
        x = load_vector_set(_require_file(cfg, data["x"]), fmt)
        y = load_vector_set(_require_file(cfg, data["y"]), fmt)
        labels = None
        if "labels" in data:
            labels = {}
            for line in _require_file(cfg, data["labels"]).read_text(encoding="utf-8").splitlines():
                if line.strip():
                    key, _, lab = line.partition("\t")
                    labels[key] = lab
        ds, diag = pair_by_keys(x, y, labels)
        return ds, diag.report()
    raise ConfigError("[data] needs 'synthetic', 'paired', or both 'x' and 'y'")


def _data_seed(cfg: dict, override: int | None, default: int) -> int | None:
    """Seed for a synthetic source: CLI override, else the table's own, else ``default``."""
    table = _section(cfg, "data").get("synthetic")
    if override is not None or not isinstance(table, dict) or "seed" not in table:
        return default if override is None else override
    return None


def _write_json(path: Path, doc) -> None:
    path.write_bytes((json.dumps(doc, indent=1, sort_keys=True) + "\n").encode("utf-8"))


def _clean(obj):
    """JSON-safe copy (drops private keys, turns non-finite floats into None)."""
    if isinstance(obj, dict):
        return {k: _clean(v) for k, v in obj.items() if not str(k).startswith("_")}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, float) and not math.isfinite(obj):
        return None
    if isinstance(obj, np.generic):
        return _clean(obj.item())
    return obj


# --------------------------------------------------------------------------
# Experiment 1


def _exp1_settings(cfg: dict, seed=None, k=None, measure=None) -> dict:
    exp = _section(cfg, "experiment")
    s = {
        "name": str(exp.get("name", "dataset")),
        "seed": int(exp.get("seed", 0) if seed is None else seed),
        "k": int(exp.get("k", 10) if k is None else k),
        "measure": exp.get("measure", "cosine") if measure is None else measure,
        "folds": int(exp.get("folds", 5)),
        "directions": list(exp.get("directions", ["x_to_y"])),
        "models": list(exp.get("models", ["lin", "nn-1"])),
        "losses": list(exp.get("losses", ["mse"])),
        "alpha": float(exp.get("alpha", 0.05)),
        "pool_neighbors": bool(exp.get("pool_neighbors", False)),
        "activation": exp.get("activation", "relu"),
        "track_mnno": bool(exp.get("track_mnno", True)),
    }
    if not s["models"]:
        raise ConfigError("experiment.models is empty")
    if not s["directions"] or not s["losses"]:
        raise ConfigError("experiment.directions and experiment.losses must be non-empty")
    for m in s["models"]:
        if m not in MODEL_DEPTHS:
            raise ConfigError(f"unknown model {m!r}; expected one of {sorted(MODEL_DEPTHS)}")
    for d in s["directions"]:
        if d not in DIRECTIONS:
            raise ConfigError(f"unknown direction {d!r}")
    for lo in s["losses"]:
        if lo not in LOSSES:
            raise ConfigError(f"unknown loss {lo!r}")
    if s["measure"] not in MEASURES:
        raise ConfigError(f"unknown measure {s['measure']!r}")
    if s["k"] < 1 or s["folds"] < 2:
        raise ConfigError("k must be >= 1 and folds >= 2")
    if s["activation"] not in ("relu", "tanh", "sigmoid"):
        raise ConfigError(f"unknown activation {s['activation']!r}")

    training = _section(cfg, "training")
    unknown = set(training) - _TRAINING_KEYS
    if unknown:
        raise ConfigError(f"unknown [training] keys {sorted(unknown)}")
    s["training"] = dict(training)
    grid = {**DEFAULT_GRID, **_section(cfg, "grid")}
    unknown = set(grid) - set(DEFAULT_GRID)
    if unknown:
        raise ConfigError(f"unknown [grid] keys {sorted(unknown)}")
    for name, values in grid.items():
        if not isinstance(values, list) or not values:
            raise ConfigError(f"grid.{name} must be a non-empty list")
    s["grid"] = grid
    return s


def _base_config(s: dict, loss: str) -> TrainConfig:
    t = {key: v for key, v in s["training"].items() if key != "loss"}
    try:
        return TrainConfig(
            loss=loss,
            seed=s["seed"],
            neighbor_k=s["k"],
            neighbor_measure=s["measure"],
            pool_neighbors=s["pool_neighbors"],
            track_mnno=s["track_mnno"],
            **t,
        )
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"invalid training settings: {exc}") from None


def run_experiment1(cfg: dict | str | Path, out_dir=None, seed=None, k=None, measure=None, fmt="csv") -> ExperimentReport:
    """Learned-mapping experiment: per-fold test mNNO(X, f(X)) vs mNNO(Y, f(X)).

    For each direction x model x loss, hyperparameters (including the epoch
    count) are chosen by k-fold CV on the test loss; each fold is then
    retrained with the chosen settings and scored on its held-out items.
    The two overlap columns are compared with a rank-sum test over folds,
    Bonferroni-adjusted across rows.
    """
    if not isinstance(cfg, dict):
        cfg = load_config(cfg)
    s = _exp1_settings(cfg, seed, k, measure)
    for loss in s["losses"]:
        _base_config(s, loss)
    ds, pairing = load_dataset(cfg, _data_seed(cfg, seed, s["seed"]))
    if "max_margin" in s["losses"] and ds.labels is None:
        raise ConfigError("max_margin needs class labels; the dataset has none")
    if s["folds"] > len(ds):
        raise ConfigError(f"{s['folds']} folds for {len(ds)} items")

    splits = k_fold_indices(len(ds), s["folds"], s["seed"])
    out = Path(out_dir) if out_dir is not None else None
    if out is not None:
        (out / "histories").mkdir(parents=True, exist_ok=True)

    rows, prov_rows = [], []
    for direction in s["directions"]:
        dds = ds if direction == "x_to_y" else ds.swapped()
        for model_name in s["models"]:
            depth = MODEL_DEPTHS[model_name]
            for loss in s["losses"]:
                base = _base_config(s, loss)
                row = dict(dataset=s["name"], direction=direction, model=model_name, loss=loss,
                           measure=s["measure"], k=s["k"], n_folds=s["folds"], comparison="per-fold")
                prov = {"direction": direction, "model": model_name, "loss": loss}
                try:
                    search = grid_search_cv(dds, depth, s["grid"], base, s["folds"], s["seed"], s["activation"])
                except CrossmapRuntimeError as exc:
                    log.warning("row %s/%s/%s failed: %s", direction, model_name, loss, exc)
                    rows.append({**row, "status": "FAILED"})
                    prov["error"] = str(exc)
                    prov_rows.append(prov)
                    continue
                chosen = search.config_for(base)
                per_fold = []
                for fold, (tr, te) in enumerate(splits):
                    model = init_model(dds.x.dim, dds.y.dim, hidden_dims_for(depth, search.best.params["hidden_units"]),
                                       s["activation"], None, seed=derive_seed(s["seed"], fold, 0))
                    fcfg = TrainConfig(**{**asdict(chosen), "seed": derive_seed(s["seed"], fold, 1)})
                    trained, hist = train(model, dds.take(tr), dds.take(te), fcfg)
                    scores = heldout_overlaps(trained, dds.take(tr), dds.take(te), s["k"], s["measure"],
                                              s["pool_neighbors"])
                    per_fold.append(scores)
                    if out is not None:
                        hist.to_csv(out / "histories" / f"{direction}_{model_name}_{loss}_fold{fold}.csv")
                xs = [f["mnno_x_test"] for f in per_fold]
                ys = [f["mnno_y_test"] for f in per_fold]
                row.update(
                    mnno_x_fx=float(np.mean(xs)),
                    mnno_y_fx=float(np.mean(ys)),
                    mnno_x_y=float(np.mean([f["mnno_xy_test"] for f in per_fold])),
                    p_value=wilcoxon_rank_sum_p(xs, ys),
                    learning_rate=chosen.learning_rate,
                    hidden_units=search.best.params["hidden_units"],
                    margin=chosen.margin if loss == "max_margin" else None,
                    dropout=chosen.dropout,
                    epochs=chosen.epochs,
                    status="ok",
                )
                rows.append(row)
                prov.update(
                    chosen=search.best.params,
                    epochs=chosen.epochs,
                    cv=[{"params": c.params, "best_epoch": c.best_epoch, "best_loss": c.best_loss,
                         "status": c.status, "error": c.error} for c in search.cells],
                    per_fold=per_fold,
                    model_seeds=[derive_seed(s["seed"], f, 0) for f in range(s["folds"])],
                    train_seeds=[derive_seed(s["seed"], f, 1) for f in range(s["folds"])],
                )
                prov_rows.append(prov)

    ok = [r for r in rows if r["status"] == "ok"]
    for r, p in zip(ok, bonferroni_adjust([r["p_value"] for r in ok]) if ok else []):
        r["p_adjusted"] = p
        r["significant"] = p < s["alpha"]
    for r in rows:
        r.setdefault("significant", False)
    report = ExperimentReport("exp1", rows)

    if out is not None:
        out.mkdir(parents=True, exist_ok=True)
        _emit(report, out, fmt)
        _write_json(out / "provenance.json", _clean({
            "experiment": "exp1",
            "settings": s,
            "data": cfg.get("data", {}),
            "folds": [[ds.keys[i] for i in te] for _, te in splits],
            "rows": prov_rows,
        }))
        if pairing:
            (out / "pairing.txt").write_bytes(pairing.encode("utf-8"))
    return report


def _emit(report: ExperimentReport, out: Path, fmt: str) -> None:
    render_report(report, out / "report.csv", "csv")
    if fmt == "markdown":
        render_report(report, out / "report.md", "markdown")


# --------------------------------------------------------------------------
# Experiment 2


def run_experiment2(cfg: dict | str | Path, out_dir=None, seed=None, fmt="csv") -> ExperimentReport:
    """Untrained-network probe over every configured embedding and benchmark."""
    if not isinstance(cfg, dict):
        cfg = load_config(cfg)
    exp = _section(cfg, "experiment")
    seed = int(exp.get("seed", 0) if seed is None else seed)
    runs = int(exp.get("runs", 10))
    activation = exp.get("activation", "tanh")
    measures = list(exp.get("measures", ["cosine", "euclidean"]))
    maps = list(exp.get("maps", ["nn", "lin"]))
    init = exp.get("init", "uniform")
    alpha = float(exp.get("alpha", 0.05))
    if init not in ("uniform", "identity"):
        raise ConfigError(f"unknown init {init!r}; expected 'uniform' or 'identity'")
    scheme = InitScheme.uniform(-1.0, 1.0) if init == "uniform" else InitScheme.identity()
    embeddings = cfg.get("embeddings")
    if not embeddings:
        raise ConfigError("no [[embeddings]] configured")

    benches = []
    for b in cfg.get("benchmarks", []):
        benches.append(load_benchmark(_require_file(cfg, b["path"]), b.get("name")))

    loaded = []
    for i, e in enumerate(embeddings):
        name = e.get("name", f"embeddings{i}")
        own = []
        if "synthetic" in e:
            vs, bench = generate_planted_benchmark(**{"name": name, **e["synthetic"]})
            own = [bench]
        elif "path" in e:
            vs = load_vector_set(_require_file(cfg, e["path"]), e.get("format", "glove_text"))
        else:
            raise ConfigError(f"embeddings {name!r} needs 'path' or 'synthetic'")
        if not benches and not own:
            raise ConfigError(f"no benchmarks for embeddings {name!r}")
        loaded.append((name, vs, own))

    rows = []
    prov = []
    for i, (name, vs, own) in enumerate(loaded):
        d_y = int(exp.get("d_y", 2048 if init == "uniform" else vs.dim))
        hidden = int(exp.get("hidden_units", d_y))
        emb_seed = derive_seed(seed, i)
        try:
            rep = run_untrained_probe(vs, [*benches, *own], runs, d_y, activation, emb_seed, hidden, measures,
                                      maps, scheme, alpha, name)
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
        rows.extend(rep.rows)
        prov.append({"embedding": name, "seed": emb_seed, "d_y": d_y, "hidden_units": hidden,
                     "n_vectors": len(vs), "dim": vs.dim})

    # adjust across the whole table, not per embedding
    mapped = [r for r in rows if r["variant"] != "raw"]
    for r, p in zip(mapped, bonferroni_adjust([r["p_value"] for r in mapped]) if mapped else []):
        r["p_adjusted"] = p
        r["significant"] = p < alpha
    report = ExperimentReport("exp2", rows)
    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        _emit(report, out, fmt)
        _write_json(out / "provenance.json", _clean({
            "experiment": "exp2",
            "seed": seed, "runs": runs, "activation": activation, "measures": measures, "maps": maps,
            "init": init, "alpha": alpha, "embeddings": prov,
            "benchmarks": [b.name for b in benches],
        }))
    return report


# --------------------------------------------------------------------------
# single training run and data synthesis


def run_train(cfg: dict | str | Path, out_dir, seed=None, k=None, measure=None):
    """Train one model on one train/test split; writes ``model.json`` and ``history.csv``."""
    if not isinstance(cfg, dict):
        cfg = load_config(cfg)
    exp = _section(cfg, "experiment")
    model_cfg = _section(cfg, "model")
    cli_seed = seed
    seed = int(exp.get("seed", 0) if seed is None else seed)
    training = dict(_section(cfg, "training"))
    unknown = set(training) - _TRAINING_KEYS
    if unknown:
        raise ConfigError(f"unknown [training] keys {sorted(unknown)}")
    try:
        config = TrainConfig(
            seed=derive_seed(seed, 1),
            neighbor_k=int(exp.get("k", 10) if k is None else k),
            neighbor_measure=exp.get("measure", "cosine") if measure is None else measure,
            pool_neighbors=bool(exp.get("pool_neighbors", False)),
            **training,
        )
        scheme = InitScheme(model_cfg.get("init", "fanin_scaled"))
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"invalid training settings: {exc}") from None
    ds, pairing = load_dataset(cfg, _data_seed(cfg, cli_seed, seed))
    if exp.get("direction", "x_to_y") == "y_to_x":
        ds = ds.swapped()
    folds = int(exp.get("folds", 5))
    test_fold = int(exp.get("test_fold", 0))
    tr, te = k_fold_indices(len(ds), folds, seed)[test_fold]
    model = init_model(ds.x.dim, ds.y.dim, list(model_cfg.get("hidden_dims", [])),
                       model_cfg.get("activation", "relu"), scheme, derive_seed(seed, 0))
    trained, hist = train(model, ds.take(tr), ds.take(te), config)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    save_model(trained, out / "model.json")
    hist.to_csv(out / "history.csv")
    _write_json(out / "provenance.json", _clean({
        "experiment": "train", "seed": seed, "config": asdict(config),
        "test_keys": [ds.keys[i] for i in te], "data": cfg.get("data", {}),
    }))
    if pairing:
        (out / "pairing.txt").write_bytes(pairing.encode("utf-8"))
    return trained, hist


def run_synth(cfg: dict | str | Path, out_dir, seed=None) -> Path:
    """Write the ``[synthetic]`` dataset as paired TSV (``synthetic.tsv``)."""
    from .data import save_paired_tsv

    if not isinstance(cfg, dict):
        cfg = load_config(cfg)
    table = cfg.get("synthetic", _section(cfg, "data").get("synthetic"))
    if table is None:
        raise ConfigError("config has no [synthetic] table")
    try:
        spec = synth_spec(table, seed)
    except TypeError as exc:
        raise ConfigError(str(exc)) from None
    ds = generate_synthetic_paired(spec)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    path = out / "synthetic.tsv"
    save_paired_tsv(ds, path)
    return path
