"""Losses, RMSprop and the mini-batch training loop.

Per-item losses, with ``p = f(x)`` and target ``y``:

* ``mse``         ``0.5 * ||p - y||^2``
* ``cosine``      ``1 - cos(p, y)``
* ``max_margin``  ``max(0, margin + ||p - y|| - ||f(x_neg) - y||)`` where
  ``x_neg`` is the first item of a different class (scanning in dataset
  order) that violates the margin.

Batch losses are means over items; gradients are the gradients of that mean.
"""

from __future__ import annotations

import csv
import itertools
import logging
import math
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import NamedTuple

import numpy as np
from scipy.spatial.distance import cdist

from .data import MEASURES, PairedDataset, k_fold_indices
from .errors import CrossmapRuntimeError, TrainingDiverged, ValidationError
from .models import InitScheme, MappingModel, _trace, gradients, init_model
from .neighbors import mean_nn_overlap

log = logging.getLogger(__name__)

LOSSES = ("mse", "cosine", "max_margin")
DIVERGENCE_THRESHOLD = 1e12


def derive_seed(*parts: int) -> int:
    """Deterministic child seed from integer parts."""
    return int(np.random.SeedSequence([int(p) for p in parts]).generate_state(1)[0])


# --------------------------------------------------------------------------
# losses


class LossEval(NamedTuple):
    value: float
    grad: np.ndarray
    grad_negative: np.ndarray | None = None


def batch_losses(kind, preds, targets, neg_preds=None, has_neg=None, margin=None):
    """Per-row loss values and gradients.

    For ``max_margin``, ``neg_preds[i]`` is ``f(x_neg)`` for row ``i`` and
    ``has_neg[i]`` says whether row ``i`` has a negative at all.  Returns
    ``(values, grad_preds, grad_neg_preds)``; the last is ``None`` except
    for ``max_margin``.
    """
    p = np.atleast_2d(np.asarray(preds, dtype=np.float64))
    y = np.atleast_2d(np.asarray(targets, dtype=np.float64))
    if p.shape != y.shape:
        raise ValidationError(f"prediction shape {p.shape} does not match target shape {y.shape}")
    if kind == "mse":
        r = p - y
        return 0.5 * np.sum(r * r, axis=1), r, None
    if kind == "cosine":
        pn = np.linalg.norm(p, axis=1)
        yn = np.linalg.norm(y, axis=1)
        if np.any(pn == 0.0) or np.any(yn == 0.0):
            raise ValidationError("cosine loss is undefined for a zero vector")
        dot = np.sum(p * y, axis=1)
        cos = dot / (pn * yn)
        grad = -(y / (pn * yn)[:, None] - (dot / (pn**3 * yn))[:, None] * p)
        return 1.0 - cos, grad, None
    if kind == "max_margin":
        if margin is None or neg_preds is None:
            raise ValidationError("max_margin loss needs a negative example and a margin")
        q = np.atleast_2d(np.asarray(neg_preds, dtype=np.float64))
        if q.shape != p.shape:
            raise ValidationError(f"negative prediction shape {q.shape} does not match {p.shape}")
        has = np.ones(p.shape[0], dtype=bool) if has_neg is None else np.asarray(has_neg, dtype=bool)
        rp, rq = p - y, q - y
        dp, dq = np.linalg.norm(rp, axis=1), np.linalg.norm(rq, axis=1)
        hinge = margin + dp - dq
        active = has & (hinge > 0.0)
        values = np.where(active, hinge, 0.0)
        # d||r||/dr = r/||r||, taken as 0 at r = 0
        up = np.divide(rp, dp[:, None], out=np.zeros_like(rp), where=dp[:, None] > 0)
        uq = np.divide(rq, dq[:, None], out=np.zeros_like(rq), where=dq[:, None] > 0)
        return values, up * active[:, None], -uq * active[:, None]
    raise ValidationError(f"unknown loss {kind!r}; expected one of {LOSSES}")


def evaluate_loss(kind, pred, target, negative=None, margin=None) -> LossEval:
    """Loss of one prediction and its gradient with respect to ``pred``.

    ``negative`` is ``f(x_neg)`` (max_margin only); the returned
    ``grad_negative`` is the gradient with respect to it.
    """
    if kind == "max_margin" and negative is None:
        raise ValidationError("max_margin loss needs a negative example")
    if kind == "max_margin" and margin is None:
        raise ValidationError("max_margin loss needs a margin")
    neg = None if negative is None else np.asarray(negative, dtype=np.float64)[None, :]
    values, grad, grad_neg = batch_losses(
        kind, np.asarray(pred, dtype=np.float64)[None, :], np.asarray(target, dtype=np.float64)[None, :], neg, None, margin
    )
    return LossEval(float(values[0]), grad[0], None if grad_neg is None else grad_neg[0])


def first_violators(preds, targets, labels, margin) -> np.ndarray:
    """For every row ``i`` the first ``j`` with a different label and
    ``margin + ||p_i - y_i|| - ||p_j - y_i|| > 0``; ``-1`` when there is none."""
    p = np.asarray(preds, dtype=np.float64)
    y = np.asarray(targets, dtype=np.float64)
    labels = np.asarray(labels)
    pos = np.linalg.norm(p - y, axis=1)
    dist = cdist(y, p)  # dist[i, j] = ||p_j - y_i||
    viol = (labels[None, :] != labels[:, None]) & (margin + pos[:, None] - dist > 0.0)
    first = np.argmax(viol, axis=1)
    return np.where(viol.any(axis=1), first, -1)


def select_negative(batch: PairedDataset, i: int, model: MappingModel, margin: float, preds=None):
    """Index of the first differently labelled item in ``batch`` violating the margin for item ``i``, or None."""
    if batch.labels is None:
        raise ValidationError("max_margin needs class labels; use the mse or cosine loss for unlabelled data")
    if preds is None:
        preds = model.predict(batch.x.values)
    labels = batch.label_array()
    pi = np.linalg.norm(preds[i] - batch.y.values[i])
    for j in range(len(batch)):
        if labels[j] != labels[i] and margin + pi - np.linalg.norm(preds[j] - batch.y.values[i]) > 0.0:
            return j
    return None


def loss_terms(kind, preds, targets, labels=None, margin=None):
    """Per-row values and gradients on a set of predictions, choosing
    max-margin negatives among those same rows.

    Returns ``(values, upstream)`` where ``upstream`` already routes the
    negative-example gradients onto the negatives' own rows.
    """
    if kind != "max_margin":
        values, grad, _ = batch_losses(kind, preds, targets)
        return values, grad
    if labels is None:
        raise ValidationError("max_margin needs class labels; use the mse or cosine loss for unlabelled data")
    neg = first_violators(preds, targets, labels, margin)
    has = neg >= 0
    values, gp, gq = batch_losses(kind, preds, targets, preds[np.where(has, neg, 0)], has, margin)
    upstream = gp.copy()
    np.add.at(upstream, neg[has], gq[has])
    return values, upstream


# --------------------------------------------------------------------------
# optimizer


@dataclass
class RmspropState:
    """Running mean of squared gradients, one accumulator per parameter array."""

    accumulators: list

    @classmethod
    def zeros_like(cls, params) -> RmspropState:
        return cls([np.zeros_like(p, dtype=np.float64) for p in params])


def rmsprop_update(params, grads, state: RmspropState, lr: float, rho: float = 0.9, eps: float = 1e-8):
    """One RMSprop step, in place.

    ``acc <- rho * acc + (1 - rho) * g^2``; ``param <- param - lr * g / (sqrt(acc) + eps)``.
    """
    if len(params) != len(grads) or len(params) != len(state.accumulators):
        raise ValidationError("params, grads and optimizer state differ in length")
    for p, g, acc in zip(params, grads, state.accumulators):
        if p.shape != g.shape or p.shape != acc.shape:
            raise ValidationError(f"shape mismatch: param {p.shape}, grad {g.shape}, state {acc.shape}")
        acc *= rho
        acc += (1.0 - rho) * g * g
        p -= lr * g / (np.sqrt(acc) + eps)
    return params, state


# --------------------------------------------------------------------------
# training loop


@dataclass(frozen=True)
class TrainConfig:
    loss: str = "mse"
    margin: float = 1.0
    learning_rate: float = 0.001
    batch_size: int = 64
    epochs: int = 100
    dropout: float = 0.0
    rmsprop_rho: float = 0.9
    rmsprop_eps: float = 1e-8
    seed: int = 0
    neighbor_k: int = 10
    neighbor_measure: str = "cosine"
    track_mnno: bool = True
    pool_neighbors: bool = False

    def __post_init__(self):
        if self.loss not in LOSSES:
            raise ValidationError(f"unknown loss {self.loss!r}; expected one of {LOSSES}")
        if not self.learning_rate > 0:
            raise ValidationError("learning_rate must be > 0")
        if self.batch_size < 1:
            raise ValidationError("batch_size must be >= 1")
        if self.epochs < 0:
            raise ValidationError("epochs must be >= 0")
        if not 0.0 <= self.dropout < 1.0:
            raise ValidationError("dropout must be in [0, 1)")
        if self.margin < 0:
            raise ValidationError("margin must be >= 0")
        if not 0.0 <= self.rmsprop_rho < 1.0 or self.rmsprop_eps < 0:
            raise ValidationError("invalid RMSprop constants")
        if self.neighbor_k < 1:
            raise ValidationError("neighbor_k must be >= 1")
        if self.neighbor_measure not in MEASURES:
            raise ValidationError(f"unknown neighbor measure {self.neighbor_measure!r}")


HISTORY_COLUMNS = ("epoch", "train_loss", "test_loss", "mnno_x_train", "mnno_x_test", "mnno_y_train", "mnno_y_test")


@dataclass(frozen=True)
class EpochRecord:
    """Metrics after one epoch.  ``mnno_x_*`` is mNNO(X, f(X)); ``mnno_y_*`` is mNNO(Y, f(X))."""

    epoch: int
    train_loss: float
    test_loss: float
    mnno_x_train: float = math.nan
    mnno_x_test: float = math.nan
    mnno_y_train: float = math.nan
    mnno_y_test: float = math.nan


@dataclass
class TrainHistory:
    records: list = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.records)

    def column(self, name: str) -> np.ndarray:
        return np.array([getattr(r, name) for r in self.records], dtype=np.float64)

    def to_csv(self, path) -> None:
        with Path(path).open("w", encoding="utf-8", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(HISTORY_COLUMNS)
            for r in self.records:
                w.writerow([r.epoch] + [repr(float(getattr(r, c))) for c in HISTORY_COLUMNS[1:]])

    @classmethod
    def from_csv(cls, path) -> TrainHistory:
        with Path(path).open(encoding="utf-8", newline="") as fh:
            rows = list(csv.DictReader(fh))
        return cls([EpochRecord(int(r["epoch"]), *(float(r[c]) for c in HISTORY_COLUMNS[1:])) for r in rows])


def dataset_loss(model: MappingModel, dataset: PairedDataset, config: TrainConfig) -> float:
    """Mean loss over ``dataset`` in evaluation mode (no dropout)."""
    preds = model.predict(dataset.x.values)
    labels = dataset.label_array() if config.loss == "max_margin" else None
    values, _ = loss_terms(config.loss, preds, dataset.y.values, labels, config.margin)
    return float(values.mean())


def _check_dims(model: MappingModel, ds: PairedDataset, name: str):
    if ds.x.dim != model.d_in or ds.y.dim != model.d_out:
        raise ValidationError(
            f"{name} set is {ds.x.dim} -> {ds.y.dim} but the model maps {model.d_in} -> {model.d_out}"
        )


def _overlaps(model, train_set, test_set, config):
    k, m = config.neighbor_k, config.neighbor_measure
    fx_train = model.predict(train_set.x.values)
    out = {
        "mnno_x_train": mean_nn_overlap(train_set.x.values, fx_train, k, m),
        "mnno_y_train": mean_nn_overlap(train_set.y.values, fx_train, k, m),
    }
    if test_set is not None:
        out.update(heldout_overlaps(model, train_set, test_set, k, m, config.pool_neighbors))
    return out


def heldout_overlaps(model, train_set, test_set, k=10, measure="cosine", pooled=False) -> dict:
    """Test mNNO(X, f(X)), mNNO(Y, f(X)) and mNNO(X, Y).

    Neighborhoods are searched within the test set, or within train + test
    when ``pooled`` (scores are still averaged over test items only).
    """
    if pooled:
        x = np.vstack([train_set.x.values, test_set.x.values])
        y = np.vstack([train_set.y.values, test_set.y.values])
        rows = np.arange(len(train_set), len(train_set) + len(test_set))
    else:
        x, y, rows = test_set.x.values, test_set.y.values, None
    fx = model.predict(x)
    return {
        "mnno_x_test": mean_nn_overlap(x, fx, k, measure, rows),
        "mnno_y_test": mean_nn_overlap(y, fx, k, measure, rows),
        "mnno_xy_test": mean_nn_overlap(x, y, k, measure, rows),
    }


def train(model: MappingModel, train_set: PairedDataset, test_set: PairedDataset | None, config: TrainConfig):
    """Train a copy of ``model`` with RMSprop; returns ``(trained_model, history)``.

    Training order is reshuffled every epoch and dropout masks are drawn
    from the same seeded generator, so identical inputs give identical
    results.  Raises :class:`TrainingDiverged` if the training loss becomes
    non-finite or exceeds ``DIVERGENCE_THRESHOLD``.
    """
    _check_dims(model, train_set, "training")
    if test_set is not None:
        _check_dims(model, test_set, "test")
    if config.loss == "max_margin":
        labels = train_set.label_array()
    else:
        labels = None
    model = model.copy()
    history = TrainHistory()
    if config.epochs == 0:
        return model, history

    rng = np.random.default_rng(config.seed)
    params = model.parameters()
    state = RmspropState.zeros_like(params)
    X, Y = train_set.x.values, train_set.y.values
    n = len(train_set)
    keep = 1.0 - config.dropout

    for epoch in range(1, config.epochs + 1):
        order = rng.permutation(n)
        with np.errstate(over="ignore", invalid="ignore"):
            for start in range(0, n, config.batch_size):
                # scan order inside a batch follows dataset order
                idx = np.sort(order[start : start + config.batch_size])
                xb, yb = X[idx], Y[idx]
                masks = None
                if config.dropout > 0 and model.n_hidden:
                    masks = [
                        (rng.random((len(idx), d)) < keep) / keep for d in model.hidden_dims
                    ]
                preds = _trace(model, xb, masks)[-1][1]
                if not np.all(np.isfinite(preds)):
                    raise TrainingDiverged(epoch, math.nan)
                try:
                    _, upstream = loss_terms(
                        config.loss, preds, yb, None if labels is None else labels[idx], config.margin
                    )
                except ValidationError as exc:
                    # e.g. dropout zeroed a whole hidden layer under the cosine loss
                    raise CrossmapRuntimeError(f"epoch {epoch}: {exc}") from None
                grads = [g for layer in gradients(model, xb, upstream, masks) for g in layer]
                rmsprop_update(params, grads, state, config.learning_rate, config.rmsprop_rho, config.rmsprop_eps)

            train_loss = dataset_loss(model, train_set, config)
        if not math.isfinite(train_loss) or train_loss > DIVERGENCE_THRESHOLD:
            raise TrainingDiverged(epoch, train_loss)
        test_loss = dataset_loss(model, test_set, config) if test_set is not None else math.nan
        extra = _overlaps(model, train_set, test_set, config) if config.track_mnno else {}
        extra.pop("mnno_xy_test", None)
        history.records.append(EpochRecord(epoch, train_loss, test_loss, **extra))
    return model, history


# --------------------------------------------------------------------------
# hyperparameter search


GRID_KEYS = ("learning_rate", "hidden_units", "margin", "dropout")


@dataclass
class CVCell:
    """One grid point evaluated by k-fold CV."""

    params: dict
    mean_curve: list = field(default_factory=list)
    best_epoch: int = 0
    best_loss: float = math.inf
    status: str = "ok"
    error: str = ""

    @property
    def ok(self) -> bool:
        return self.status == "ok"


@dataclass
class GridSearchResult:
    best: CVCell
    cells: list

    def config_for(self, base: TrainConfig) -> TrainConfig:
        """``base`` with the winning learning rate, margin, dropout and epoch count."""
        p = self.best.params
        return replace(
            base,
            learning_rate=p["learning_rate"],
            margin=p["margin"],
            dropout=p["dropout"],
            epochs=self.best.best_epoch,
        )


def hidden_dims_for(n_hidden_layers: int, hidden_units) -> list[int]:
    return [] if n_hidden_layers == 0 else [int(hidden_units)] * n_hidden_layers


def expand_grid(grid: dict, base: TrainConfig, n_hidden_layers: int) -> list[dict]:
    """Cartesian product of the grid, collapsing axes that cannot matter.

    Linear models ignore ``hidden_units`` and ``dropout``; losses other than
    max_margin ignore ``margin``.
    """
    unknown = set(grid) - set(GRID_KEYS)
    if unknown:
        raise ValidationError(f"unknown grid keys {sorted(unknown)}")
    axes = {
        "learning_rate": list(grid.get("learning_rate", [base.learning_rate])),
        "hidden_units": list(grid.get("hidden_units", [128])),
        "margin": list(grid.get("margin", [base.margin])),
        "dropout": list(grid.get("dropout", [base.dropout])),
    }
    for name, values in axes.items():
        if not values:
            raise ValidationError(f"grid axis {name!r} is empty")
    if n_hidden_layers == 0:
        axes["hidden_units"] = [None]
        axes["dropout"] = [0.0]
    if base.loss != "max_margin":
        axes["margin"] = [base.margin]
    cells = []
    for combo in itertools.product(*(axes[k] for k in GRID_KEYS)):
        params = dict(zip(GRID_KEYS, combo))
        if params not in cells:
            cells.append(params)
    return cells


def cross_validate(
    dataset: PairedDataset,
    n_hidden_layers: int,
    params: dict,
    base: TrainConfig,
    k_folds: int = 5,
    seed: int = 0,
    activation: str = "relu",
    scheme: InitScheme | None = None,
) -> CVCell:
    """Mean per-epoch test loss of one grid point over ``k_folds`` folds."""
    cell = CVCell(dict(params))
    config = replace(
        base,
        learning_rate=params["learning_rate"],
        margin=params["margin"],
        dropout=params["dropout"],
        track_mnno=False,
    )
    curves = []
    try:
        for fold, (tr, te) in enumerate(k_fold_indices(len(dataset), k_folds, seed)):
            model = init_model(
                dataset.x.dim,
                dataset.y.dim,
                hidden_dims_for(n_hidden_layers, params["hidden_units"]),
                activation,
                scheme,
                seed=derive_seed(seed, fold, 0),
            )
            fold_cfg = replace(config, seed=derive_seed(seed, fold, 1))
            _, hist = train(model, dataset.take(tr), dataset.take(te), fold_cfg)
            curves.append(hist.column("test_loss"))
    except CrossmapRuntimeError as exc:
        log.warning("grid cell %s failed: %s", params, exc)
        cell.status, cell.error = "failed", str(exc)
        return cell
    mean = np.mean(curves, axis=0)
    if mean.size == 0:
        cell.status, cell.error = "failed", "no epochs"
        return cell
    cell.mean_curve = [float(v) for v in mean]
    cell.best_epoch = int(np.argmin(mean)) + 1
    cell.best_loss = float(mean[cell.best_epoch - 1])
    return cell


def grid_search_cv(
    dataset: PairedDataset,
    n_hidden_layers: int,
    grid: dict,
    base: TrainConfig,
    k_folds: int = 5,
    seed: int = 0,
    activation: str = "relu",
    scheme: InitScheme | None = None,
) -> GridSearchResult:
    """Exhaustive k-fold CV over ``grid``; the epoch count is chosen per cell.

    The winner has the lowest mean CV test loss; ties go to fewer hidden
    units, then to the smaller learning rate.  Diverging cells are kept in
    ``cells`` marked ``failed`` and never win.
    """
    cells = [
        cross_validate(dataset, n_hidden_layers, params, base, k_folds, seed, activation, scheme)
        for params in expand_grid(grid, base, n_hidden_layers)
    ]
    ok = [c for c in cells if c.ok]
    if not ok:
        raise CrossmapRuntimeError("every grid cell failed")

    def rank(c):
        return (c.best_loss, c.params["hidden_units"] or 0, c.params["learning_rate"])

    return GridSearchResult(min(ok, key=rank), cells)


def config_dict(config: TrainConfig) -> dict:
    return asdict(config)
