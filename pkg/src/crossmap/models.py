"""Linear and feed-forward mapping models with hand-written backprop.

A model is a stack of affine layers ``(W, b)``; every layer except the last
is followed by the hidden activation.  One layer is the linear map
``f(x) = W0 x + b0``; two layers give ``f(x) = W1 act(W0 x + b0) + b1``;
``L + 1`` layers give ``L`` hidden layers.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np
from scipy.special import expit

from .data import VectorSet
from .errors import ParseError, ValidationError

CHECKPOINT_FORMAT = "crossmap-model/1"


def _relu(z):
    return np.maximum(z, 0.0)


def _relu_grad(z, a):
    # subgradient at 0 is taken as 0
    return (z > 0.0).astype(np.float64)


def _tanh_grad(z, a):
    return 1.0 - a * a


def _sigmoid_grad(z, a):
    return a * (1.0 - a)


ACTIVATIONS = {
    "relu": (_relu, _relu_grad),
    "tanh": (np.tanh, _tanh_grad),
    "sigmoid": (expit, _sigmoid_grad),
}


@dataclass
class MappingModel:
    """Parameter stack. ``layers[l] = (W_l, b_l)`` with ``W_l`` of shape ``d_out x d_in``."""

    layers: list
    activation: str = "relu"

    def __post_init__(self):
        if self.activation not in ACTIVATIONS:
            raise ValidationError(f"unknown activation {self.activation!r}; expected one of {sorted(ACTIVATIONS)}")
        if not self.layers:
            raise ValidationError("a model needs at least one layer")
        layers = []
        prev = None
        for i, (w, b) in enumerate(self.layers):
            w = np.array(w, dtype=np.float64)
            b = np.array(b, dtype=np.float64).reshape(-1)
            if w.ndim != 2 or b.shape[0] != w.shape[0]:
                raise ValidationError(f"layer {i}: weight {w.shape} and bias {b.shape} do not fit")
            if prev is not None and w.shape[1] != prev:
                raise ValidationError(f"layer {i} expects input dim {w.shape[1]} but previous layer outputs {prev}")
            if not (np.all(np.isfinite(w)) and np.all(np.isfinite(b))):
                raise ValidationError(f"layer {i} has non-finite parameters")
            prev = w.shape[0]
            layers.append((w, b))
        self.layers = layers

    @property
    def d_in(self) -> int:
        return self.layers[0][0].shape[1]

    @property
    def d_out(self) -> int:
        return self.layers[-1][0].shape[0]

    @property
    def hidden_dims(self) -> list[int]:
        return [w.shape[0] for w, _ in self.layers[:-1]]

    @property
    def n_hidden(self) -> int:
        return len(self.layers) - 1

    def parameters(self) -> list[np.ndarray]:
        """Flat list ``[W0, b0, W1, b1, ...]`` of the live arrays."""
        return [p for layer in self.layers for p in layer]

    def copy(self) -> MappingModel:
        return MappingModel([(w.copy(), b.copy()) for w, b in self.layers], self.activation)

    def predict(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        single = x.ndim == 1
        out = _trace(self, np.atleast_2d(x))[-1][1]
        return out[0] if single else out

    def __eq__(self, other):
        if not isinstance(other, MappingModel):
            return NotImplemented
        return (
            self.activation == other.activation
            and len(self.layers) == len(other.layers)
            and all(
                np.array_equal(w1, w2) and np.array_equal(b1, b2)
                for (w1, b1), (w2, b2) in zip(self.layers, other.layers)
            )
        )

    __hash__ = None


@dataclass(frozen=True)
class InitScheme:
    """Weight initialization.

    ``uniform`` draws weights from ``U(lo, hi)``; ``fanin_scaled`` draws from
    ``U(-s, s)`` with ``s = sqrt(6 / (d_in + d_out))``; ``identity`` sets
    every weight matrix to the (rectangular) identity.  Biases are always zero.
    """

    kind: str = "fanin_scaled"
    lo: float = -1.0
    hi: float = 1.0

    def __post_init__(self):
        if self.kind not in ("uniform", "fanin_scaled", "identity"):
            raise ValidationError(f"unknown init scheme {self.kind!r}")
        if self.kind == "uniform" and not self.lo < self.hi:
            raise ValidationError(f"uniform init needs lo < hi, got [{self.lo}, {self.hi}]")

    @classmethod
    def uniform(cls, lo: float = -1.0, hi: float = 1.0) -> InitScheme:
        return cls("uniform", lo, hi)

    @classmethod
    def fanin_scaled(cls) -> InitScheme:
        return cls("fanin_scaled")

    @classmethod
    def identity(cls) -> InitScheme:
        return cls("identity")


def init_model(
    d_x: int,
    d_y: int,
    hidden_dims: Sequence[int] = (),
    activation: str = "relu",
    scheme: InitScheme | str | None = None,
    seed: int = 0,
) -> MappingModel:
    """Fresh model mapping ``d_x`` to ``d_y``; ``hidden_dims=[]`` gives the linear map."""
    if scheme is None:
        scheme = InitScheme.fanin_scaled()
    elif isinstance(scheme, str):
        scheme = InitScheme(scheme)
    dims = [d_x, *hidden_dims, d_y]
    if any(int(d) != d or d <= 0 for d in dims):
        raise ValidationError(f"all dimensions must be positive integers, got {dims}")
    rng = np.random.default_rng(seed)
    layers = []
    for d_in, d_out in zip(dims[:-1], dims[1:]):
        if scheme.kind == "uniform":
            w = rng.uniform(scheme.lo, scheme.hi, size=(d_out, d_in))
        elif scheme.kind == "fanin_scaled":
            s = np.sqrt(6.0 / (d_in + d_out))
            w = rng.uniform(-s, s, size=(d_out, d_in))
        else:
            w = np.eye(d_out, d_in)
        layers.append((w, np.zeros(d_out)))
    return MappingModel(layers, activation)


def _trace(model: MappingModel, x: np.ndarray, masks=None):
    """Forward pass keeping ``(pre_activation, output)`` for every layer.

    ``masks[l]`` multiplies the activated output of hidden layer ``l``
    (inverted dropout: entries are 0 or ``1 / keep``).
    """
    act = ACTIVATIONS[model.activation][0]
    cache = []
    a = x
    last = len(model.layers) - 1
    for l, (w, b) in enumerate(model.layers):
        z = a @ w.T + b
        if l < last:
            a = act(z)
            if masks is not None:
                a = a * masks[l]
        else:
            a = z
        cache.append((z, a))
    return cache


def forward(model: MappingModel, x):
    """Map every vector of ``x``.  A VectorSet in gives a VectorSet out with the same keys."""
    values = x.values if isinstance(x, VectorSet) else np.atleast_2d(np.asarray(x, dtype=np.float64))
    if values.shape[1] != model.d_in:
        raise ValidationError(f"input dimension {values.shape[1]} does not match model input {model.d_in}")
    out = _trace(model, values)[-1][1]
    if isinstance(x, VectorSet):
        return VectorSet(x.keys, out)
    return out


def gradients(model: MappingModel, x_batch, upstream, masks=None, normalizer: float | None = None):
    """Backpropagate ``upstream = dloss/df(x)`` (one row per item).

    Returns ``[(dW0, db0), (dW1, db1), ...]`` divided by ``normalizer``
    (default: the batch size), i.e. the gradient of the batch-mean loss.
    """
    x = np.atleast_2d(np.asarray(x_batch, dtype=np.float64))
    g = np.atleast_2d(np.asarray(upstream, dtype=np.float64))
    if x.shape[1] != model.d_in:
        raise ValidationError(f"input dimension {x.shape[1]} does not match model input {model.d_in}")
    if g.shape != (x.shape[0], model.d_out):
        raise ValidationError(f"upstream shape {g.shape} does not match ({x.shape[0]}, {model.d_out})")
    n = float(x.shape[0] if normalizer is None else normalizer)
    dact = ACTIVATIONS[model.activation][1]
    cache = _trace(model, x, masks)
    grads = [None] * len(model.layers)
    delta = g
    for l in range(len(model.layers) - 1, -1, -1):
        w, _ = model.layers[l]
        a_in = x if l == 0 else cache[l - 1][1]
        grads[l] = (delta.T @ a_in / n, delta.sum(axis=0) / n)
        if l > 0:
            z_prev, a_prev = cache[l - 1]
            back = delta @ w
            if masks is not None:
                # a_prev already carries the mask; recover the raw activation for the derivative
                mask = masks[l - 1]
                raw = ACTIVATIONS[model.activation][0](z_prev)
                delta = back * mask * dact(z_prev, raw)
            else:
                delta = back * dact(z_prev, a_prev)
    return grads


def save_model(model: MappingModel, path) -> None:
    """JSON checkpoint: dims, activation and row-major parameter arrays."""
    doc = {
        "format": CHECKPOINT_FORMAT,
        "activation": model.activation,
        "dims": [model.d_in, *model.hidden_dims, model.d_out],
        "layers": [
            {
                "d_in": w.shape[1],
                "d_out": w.shape[0],
                "weight": [float(v) for v in w.ravel(order="C")],
                "bias": [float(v) for v in b],
            }
            for w, b in model.layers
        ],
    }
    Path(path).write_text(json.dumps(doc, indent=1) + "\n", encoding="utf-8")


def load_model(path) -> MappingModel:
    path = Path(path)
    try:
        doc = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ParseError(f"invalid JSON: {exc}", path) from None
    if doc.get("format") != CHECKPOINT_FORMAT:
        raise ParseError(f"unsupported checkpoint format {doc.get('format')!r}", path)
    layers = []
    for entry in doc["layers"]:
        w = np.array(entry["weight"], dtype=np.float64).reshape(entry["d_out"], entry["d_in"])
        layers.append((w, np.array(entry["bias"], dtype=np.float64)))
    return MappingModel(layers, doc["activation"])
