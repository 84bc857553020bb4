"""Small feedforward embedding network with hand-derived gradients.

The network realizes the signal-to-manifold mapping f: R^d -> R^p as a stack
of dense, PReLU, and dropout layers over one flat parameter vector.  No
autodiff framework: backward() applies the chain rule explicitly, and
gradient_check() verifies it against central finite differences.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

__all__ = [
    "LayerSpec",
    "dense",
    "prelu",
    "dropout",
    "EmbeddingNetwork",
    "ForwardTrace",
    "GradientCheckReport",
    "validate_layers",
    "param_count",
    "init_network",
    "default_layers",
    "forward",
    "backward",
    "gradient_check",
]


@dataclass(frozen=True)
class LayerSpec:
    """One layer: kind "dense" (in_width, out_width), "prelu" (channels),
    or "dropout" (rate in [0, 1))."""

    kind: str
    in_width: int = 0
    out_width: int = 0
    channels: int = 0
    rate: float = 0.0


def dense(in_width, out_width):
    if in_width < 1 or out_width < 1:
        raise ValueError(f"dense widths must be positive, got {in_width}->{out_width}")
    return LayerSpec("dense", in_width=in_width, out_width=out_width)


def prelu(channels):
    if channels < 1:
        raise ValueError(f"prelu channel count must be positive, got {channels}")
    return LayerSpec("prelu", channels=channels)


def dropout(rate):
    if not 0.0 <= rate < 1.0:
        raise ValueError(f"dropout rate must be in [0, 1), got {rate}")
    return LayerSpec("dropout", rate=rate)


def validate_layers(layers):
    """Check the layer chain and return (input_dim, output_dim).

    Dense widths must chain; prelu channel counts must match the width at
    their position; there must be at least one dense layer.
    """
    layers = tuple(layers)
    width = None
    input_dim = None
    for i, spec in enumerate(layers):
        if spec.kind == "dense":
            if width is not None and spec.in_width != width:
                raise ValueError(
                    f"layer {i}: dense in_width {spec.in_width} does not chain "
                    f"with previous width {width}"
                )
            if input_dim is None:
                input_dim = spec.in_width
            width = spec.out_width
        elif spec.kind == "prelu":
            if width is None or spec.channels != width:
                raise ValueError(
                    f"layer {i}: prelu channels {spec.channels} must equal the "
                    f"current width {width}"
                )
        elif spec.kind == "dropout":
            if not 0.0 <= spec.rate < 1.0:
                raise ValueError(f"layer {i}: dropout rate must be in [0, 1)")
        else:
            raise ValueError(f"layer {i}: unknown kind {spec.kind!r}")
    if input_dim is None:
        raise ValueError("network needs at least one dense layer")
    return input_dim, width


def _layer_param_count(spec):
    if spec.kind == "dense":
        return spec.in_width * spec.out_width + spec.out_width
    if spec.kind == "prelu":
        return spec.channels
    return 0


def param_count(layers):
    """Total flat parameter count: dense in*out + out, plus prelu channels."""
    return sum(_layer_param_count(spec) for spec in layers)


@dataclass
class EmbeddingNetwork:
    """Layer stack plus one flat float64 parameter vector.

    Flat order is layer-major: for each dense layer the weight matrix
    (in_width x out_width, row-major) then the bias, and for each prelu
    layer its slopes.  rng_seed feeds the dropout mask stream together with
    the per-step seed passed to forward().
    """

    layers: tuple[LayerSpec, ...]
    params: np.ndarray
    rng_seed: int

    def __post_init__(self):
        self.layers = tuple(self.layers)
        expected = param_count(self.layers)
        p = np.asarray(self.params, dtype=float)
        if p.ndim != 1 or p.shape[0] != expected:
            raise ValueError(
                f"params must be a flat vector of length {expected}, got shape {p.shape}"
            )
        if not np.all(np.isfinite(p)):
            raise ValueError("network parameters must be finite")
        p = p.copy()
        p.setflags(write=False)
        self.params = p

    @property
    def input_dim(self):
        return validate_layers(self.layers)[0]

    @property
    def output_dim(self):
        return validate_layers(self.layers)[1]

    def with_params(self, params):
        return EmbeddingNetwork(self.layers, params, self.rng_seed)

    def to_dict(self):
        docs = []
        for spec in self.layers:
            if spec.kind == "dense":
                docs.append({"kind": "dense", "in_width": spec.in_width,
                             "out_width": spec.out_width})
            elif spec.kind == "prelu":
                docs.append({"kind": "prelu", "channels": spec.channels})
            else:
                docs.append({"kind": "dropout", "rate": spec.rate})
        return {"layers": docs, "seed": self.rng_seed, "params": self.params.tolist()}

    @classmethod
    def from_dict(cls, doc):
        layers = []
        for d in doc["layers"]:
            kind = d["kind"]
            if kind == "dense":
                layers.append(dense(d["in_width"], d["out_width"]))
            elif kind == "prelu":
                layers.append(prelu(d["channels"]))
            elif kind == "dropout":
                layers.append(dropout(d["rate"]))
            else:
                raise ValueError(f"unknown layer kind {kind!r}")
        return cls(tuple(layers), np.asarray(doc["params"], dtype=float), doc["seed"])

    def save(self, path):
        with open(path, "w") as f:
            json.dump(self.to_dict(), f, indent=2)
            f.write("\n")

    @classmethod
    def load(cls, path):
        with open(path) as f:
            return cls.from_dict(json.load(f))


def _param_views(layers, flat):
    """Yield (layer_index, spec, views) where views are slices of `flat`."""
    offset = 0
    for i, spec in enumerate(layers):
        if spec.kind == "dense":
            nw = spec.in_width * spec.out_width
            w = flat[offset:offset + nw].reshape(spec.in_width, spec.out_width)
            b = flat[offset + nw:offset + nw + spec.out_width]
            yield i, spec, (w, b)
            offset += nw + spec.out_width
        elif spec.kind == "prelu":
            yield i, spec, (flat[offset:offset + spec.channels],)
            offset += spec.channels
        else:
            yield i, spec, ()


def init_network(layers, seed):
    """He-style initialization: dense weights ~ N(0, sqrt(2/in_width)),
    biases zero, PReLU slopes 0.25.  Deterministic given the seed."""
    layers = tuple(layers)
    validate_layers(layers)
    rng = np.random.default_rng(seed)
    chunks = []
    for spec in layers:
        if spec.kind == "dense":
            std = np.sqrt(2.0 / spec.in_width)
            chunks.append(rng.normal(0.0, std, spec.in_width * spec.out_width))
            chunks.append(np.zeros(spec.out_width))
        elif spec.kind == "prelu":
            chunks.append(np.full(spec.channels, 0.25))
    flat = np.concatenate(chunks) if chunks else np.zeros(0)
    return EmbeddingNetwork(layers, flat, seed)


def default_layers(input_dim, embedding_dim, hidden=(256, 128, 64), dropout_rate=0.1):
    """Default dense/PReLU/dropout stack from input_dim down to embedding_dim."""
    layers = []
    width = input_dim
    for i, h in enumerate(hidden):
        layers.append(dense(width, h))
        layers.append(prelu(h))
        if i == 0 and dropout_rate > 0.0:
            layers.append(dropout(dropout_rate))
        width = h
    layers.append(dense(width, embedding_dim))
    return tuple(layers)


@dataclass
class ForwardTrace:
    """Backpropagation workspace: per-layer inputs and dropout multipliers."""

    layers: tuple[LayerSpec, ...]
    mode: str
    inputs: list
    outputs: list
    dropout_scales: dict


def forward(net, batch, mode="eval", step_seed=0):
    """Map a batch of signals (n, d) to embeddings (n, p).

    In train mode dropout masks are drawn from (net.rng_seed, step_seed)
    with inverted scaling 1/(1-rate); in eval mode dropout is the identity,
    making eval a pure function of (params, batch).
    """
    if mode not in ("train", "eval"):
        raise ValueError(f"mode must be 'train' or 'eval', got {mode!r}")
    x = np.asarray(batch, dtype=float)
    if x.ndim != 2:
        raise ValueError(f"batch must be 2-D (n, d), got shape {x.shape}")
    d, _ = validate_layers(net.layers)
    if x.shape[1] != d:
        raise ValueError(f"batch width {x.shape[1]} != network input width {d}")
    if not np.all(np.isfinite(x)):
        raise ValueError("batch contains non-finite values")

    rng = np.random.default_rng((net.rng_seed, step_seed)) if mode == "train" else None
    inputs, outputs = [], []
    scales = {}
    for i, spec, views in _param_views(net.layers, net.params):
        inputs.append(x)
        if spec.kind == "dense":
            w, b = views
            x = x @ w + b
        elif spec.kind == "prelu":
            (a,) = views
            x = np.where(x > 0.0, x, x * a)
        else:  # dropout
            if mode == "train" and spec.rate > 0.0:
                keep = rng.random(x.shape) >= spec.rate
                scale = keep / (1.0 - spec.rate)
                scales[i] = scale
                x = x * scale
        outputs.append(x)
    trace = ForwardTrace(net.layers, mode, inputs, outputs, scales)
    return x, trace


def backward(net, trace, output_gradient):
    """Flat parameter gradient given d(loss)/d(embeddings) of shape (n, p).

    The trace must come from a forward() call on the same network; PReLU
    slope gradients are included.
    """
    if trace.layers != net.layers:
        raise ValueError("trace does not match this network's layer stack")
    if len(trace.inputs) != len(net.layers):
        raise ValueError("trace layer count does not match the network")
    g = np.asarray(output_gradient, dtype=float)
    _, p = validate_layers(net.layers)
    n = trace.inputs[0].shape[0] if trace.inputs else 0
    if g.shape != (n, p):
        raise ValueError(f"output gradient must have shape {(n, p)}, got {g.shape}")

    grad = np.zeros_like(net.params)
    offsets = []
    offset = 0
    for spec in net.layers:
        offsets.append(offset)
        offset += _layer_param_count(spec)

    for i in range(len(net.layers) - 1, -1, -1):
        spec = net.layers[i]
        x = trace.inputs[i]
        o = offsets[i]
        if spec.kind == "dense":
            nw = spec.in_width * spec.out_width
            w = net.params[o:o + nw].reshape(spec.in_width, spec.out_width)
            grad[o:o + nw] = (x.T @ g).ravel()
            grad[o + nw:o + nw + spec.out_width] = g.sum(axis=0)
            g = g @ w.T
        elif spec.kind == "prelu":
            a = net.params[o:o + spec.channels]
            grad[o:o + spec.channels] = np.where(x > 0.0, 0.0, x * g).sum(axis=0)
            g = g * np.where(x > 0.0, 1.0, a)
        else:  # dropout
            if i in trace.dropout_scales:
                g = g * trace.dropout_scales[i]
    return grad


@dataclass
class GradientCheckReport:
    max_rel_error: float
    analytic: np.ndarray
    numeric: np.ndarray


def gradient_check(net, batch, loss_closure, step=1e-5, floor=1e-3):
    """Compare the analytic parameter gradient against central differences.

    loss_closure(embeddings) must return (loss, d loss / d embeddings).  The
    check runs in eval mode, so dropout is off (stochastic layers break
    finite differences).  Relative error per parameter is
    |analytic - numeric| / max(|analytic|, |numeric|, floor); the floor
    keeps finite-difference roundoff on near-zero gradients from dominating.
    """
    emb, trace = forward(net, batch, mode="eval")
    _, emb_grad = loss_closure(emb)
    analytic = backward(net, trace, emb_grad)

    numeric = np.zeros_like(analytic)
    base = net.params
    for i in range(base.shape[0]):
        bumped = base.copy()
        bumped[i] = base[i] + step
        up, _ = forward(net.with_params(bumped), batch, mode="eval")
        bumped[i] = base[i] - step
        down, _ = forward(net.with_params(bumped), batch, mode="eval")
        numeric[i] = (loss_closure(up)[0] - loss_closure(down)[0]) / (2.0 * step)

    denom = np.maximum(np.maximum(np.abs(analytic), np.abs(numeric)), floor)
    rel = np.abs(analytic - numeric) / denom
    return GradientCheckReport(float(rel.max()) if rel.size else 0.0, analytic, numeric)
