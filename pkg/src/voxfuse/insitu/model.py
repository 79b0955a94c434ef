"""Dynamic-graph CNN classifier: EdgeConv layers with analytic gradients.

Edges are recomputed per layer as kNN in the current feature space; the edge
MLP is a single linear + ReLU, node updates take the max over incoming edges,
and a global max pool feeds a small two-layer head. Everything runs in float64
so gradients can be checked against central finite differences. Neighbor
selection is treated as constant under differentiation.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field

import numpy as np

from ..errors import FormatError
from .graphs import DEFAULT_GRAPH_SIZE, ObjectGraph, knn_edges

NULL_CLASS = 0
_CHECKPOINT_MAGIC = b"ISM1"


@dataclass
class InSituModel:
    """EdgeConv classifier parameters plus the label registry (index 0 = null)."""

    feature_dim: int
    k: int
    hidden: tuple[int, ...]
    head_hidden: int
    registry: list[str]  # registry[0] == "null"
    params: list[np.ndarray]
    rng_seed: int
    graph_size: int = DEFAULT_GRAPH_SIZE
    trained: bool = False
    param_names: list[str] = field(default_factory=list)

    def __post_init__(self):
        if not self.registry or self.registry[0] != "null":
            raise ValueError("registry index 0 is reserved for the null class")
        if len(set(self.registry)) != len(self.registry):
            raise ValueError("registry labels must be unique")
        for p in self.params:
            if not np.all(np.isfinite(p)):
                raise ValueError("model parameters must be finite")

    @property
    def num_classes(self) -> int:
        return len(self.registry)

    def label_index(self, label: str) -> int:
        return self.registry.index(label)


def _glorot(rng: np.random.Generator, fan_in: int, fan_out: int) -> np.ndarray:
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=(fan_in, fan_out))


def init_insitu_model(
    feature_dim: int,
    labels: list[str],
    k: int = 5,
    hidden: tuple[int, ...] = (64, 64),
    head_hidden: int = 32,
    seed: int = 0,
    graph_size: int = DEFAULT_GRAPH_SIZE,
) -> InSituModel:
    """Fresh model for the given positive labels; weights are seed-deterministic."""
    if "null" in labels:
        raise ValueError("'null' is implicit; pass only positive labels")
    rng = np.random.default_rng(seed)
    params: list[np.ndarray] = []
    names: list[str] = []
    in_dim = feature_dim
    for li, out_dim in enumerate(hidden):
        params.append(_glorot(rng, 2 * in_dim, out_dim))
        names.append(f"edgeconv{li}.W")
        params.append(np.zeros(out_dim))
        names.append(f"edgeconv{li}.b")
        in_dim = out_dim
    num_classes = len(labels) + 1
    params.append(_glorot(rng, in_dim, head_hidden))
    names.append("head0.W")
    params.append(np.zeros(head_hidden))
    names.append("head0.b")
    params.append(_glorot(rng, head_hidden, num_classes))
    names.append("head1.W")
    params.append(np.zeros(num_classes))
    names.append("head1.b")
    return InSituModel(
        feature_dim=feature_dim,
        k=k,
        hidden=tuple(hidden),
        head_hidden=head_hidden,
        registry=["null"] + list(labels),
        params=params,
        rng_seed=seed,
        graph_size=graph_size,
        param_names=names,
    )


def _forward_cached(model: InSituModel, nodes: np.ndarray):
    """Forward pass keeping every intermediate needed for backprop."""
    x = np.asarray(nodes, dtype=np.float64)
    if x.shape[1] != model.feature_dim:
        raise ValueError(
            f"graph nodes are {x.shape[1]}-d, model expects {model.feature_dim}"
        )
    cache = {"layers": []}
    n_layers = len(model.hidden)
    for li in range(n_layers):
        w, b = model.params[2 * li], model.params[2 * li + 1]
        idx = knn_edges(x, model.k)
        center = np.repeat(x[:, None, :], model.k, axis=1)
        e = np.concatenate([center, x[idx] - center], axis=2)  # (N, k, 2F)
        z = e @ w + b
        a = np.maximum(z, 0.0)
        x_out = a.max(axis=1)
        cache["layers"].append({"x_in": x, "idx": idx, "e": e, "z": z, "a": a})
        x = x_out
    g = x.max(axis=0)
    cache["pool_in"] = x
    cache["pool_arg"] = x.argmax(axis=0)
    w1, b1 = model.params[2 * n_layers], model.params[2 * n_layers + 1]
    w2, b2 = model.params[2 * n_layers + 2], model.params[2 * n_layers + 3]
    h_pre = g @ w1 + b1
    h = np.maximum(h_pre, 0.0)
    logits = h @ w2 + b2
    cache.update({"g": g, "h_pre": h_pre, "h": h})
    return logits, cache


def forward(model: InSituModel, graph: ObjectGraph | np.ndarray) -> np.ndarray:
    """Logits over (K+1) classes for one graph."""
    nodes = graph.nodes if isinstance(graph, ObjectGraph) else graph
    logits, _ = _forward_cached(model, nodes)
    return logits


def softmax(logits: np.ndarray) -> np.ndarray:
    z = logits - logits.max()
    e = np.exp(z)
    return e / e.sum()


def _backward(model: InSituModel, cache: dict, dlogits: np.ndarray, grads: list[np.ndarray]):
    n_layers = len(model.hidden)
    w1 = model.params[2 * n_layers]
    w2 = model.params[2 * n_layers + 2]
    g, h_pre, h = cache["g"], cache["h_pre"], cache["h"]

    grads[2 * n_layers + 2] += np.outer(h, dlogits)
    grads[2 * n_layers + 3] += dlogits
    dh = w2 @ dlogits
    dh_pre = dh * (h_pre > 0)
    grads[2 * n_layers] += np.outer(g, dh_pre)
    grads[2 * n_layers + 1] += dh_pre
    dg = w1 @ dh_pre

    pool_in = cache["pool_in"]
    dx = np.zeros_like(pool_in)
    dx[cache["pool_arg"], np.arange(pool_in.shape[1])] = dg

    for li in range(n_layers - 1, -1, -1):
        layer = cache["layers"][li]
        w = model.params[2 * li]
        a, z, e, idx = layer["a"], layer["z"], layer["e"], layer["idx"]
        n, k, f_out = a.shape
        winners = a.argmax(axis=1)  # (N, F')
        da = np.zeros_like(a)
        np.put_along_axis(da, winners[:, None, :], dx[:, None, :], axis=1)
        dz = da * (z > 0)
        grads[2 * li] += e.reshape(-1, e.shape[2]).T @ dz.reshape(-1, f_out)
        grads[2 * li + 1] += dz.sum(axis=(0, 1))
        de = dz @ w.T  # (N, k, 2F)
        f_in = e.shape[2] // 2
        d_center = de[:, :, :f_in]
        d_diff = de[:, :, f_in:]
        dx_in = (d_center - d_diff).sum(axis=1)
        np.add.at(dx_in, idx.reshape(-1), d_diff.reshape(-1, f_in))
        dx = dx_in


def grad(model: InSituModel, batch: list, labels: list[int]):
    """Mean cross-entropy over the batch; returns (grads, loss, logits list)."""
    if not batch:
        raise ValueError("empty batch")
    for lab in labels:
        if not 0 <= lab < model.num_classes:
            raise ValueError(f"label {lab} outside registry of {model.num_classes} classes")
    grads = [np.zeros_like(p) for p in model.params]
    total = 0.0
    all_logits = []
    inv_b = 1.0 / len(batch)
    for graph, lab in zip(batch, labels):
        nodes = graph.nodes if isinstance(graph, ObjectGraph) else graph
        logits, cache = _forward_cached(model, nodes)
        p = softmax(logits)
        total += -np.log(max(p[lab], 1e-300))
        dlogits = p.copy()
        dlogits[lab] -= 1.0
        _backward(model, cache, dlogits * inv_b, grads)
        all_logits.append(logits)
    return grads, total * inv_b, all_logits


@dataclass
class AdamState:
    m: list[np.ndarray]
    v: list[np.ndarray]
    t: int = 0

    @classmethod
    def for_model(cls, model: InSituModel) -> "AdamState":
        return cls(
            m=[np.zeros_like(p) for p in model.params],
            v=[np.zeros_like(p) for p in model.params],
        )


def adam_step(
    model: InSituModel,
    grads: list[np.ndarray],
    state: AdamState,
    lr: float = 1e-3,
    beta1: float = 0.9,
    beta2: float = 0.999,
    eps: float = 1e-8,
) -> None:
    state.t += 1
    b1t = 1.0 - beta1**state.t
    b2t = 1.0 - beta2**state.t
    for p, g, m, v in zip(model.params, grads, state.m, state.v):
        m *= beta1
        m += (1 - beta1) * g
        v *= beta2
        v += (1 - beta2) * g * g
        p -= lr * (m / b1t) / (np.sqrt(v / b2t) + eps)


def save_checkpoint(model: InSituModel, path) -> None:
    """JSON header + little-endian f32 parameter blob; loadable cross-platform."""
    header = json.dumps(
        {
            "schema": 1,
            "feature_dim": model.feature_dim,
            "k": model.k,
            "hidden": list(model.hidden),
            "head_hidden": model.head_hidden,
            "registry": model.registry,
            "rng_seed": model.rng_seed,
            "graph_size": model.graph_size,
            "trained": model.trained,
            "shapes": [list(p.shape) for p in model.params],
            "names": model.param_names,
        },
        sort_keys=True,
    ).encode("utf-8")
    with open(path, "wb") as f:
        f.write(_CHECKPOINT_MAGIC)
        f.write(struct.pack("<I", len(header)))
        f.write(header)
        for p in model.params:
            f.write(np.ascontiguousarray(p, dtype="<f4").tobytes())


def load_checkpoint(path) -> InSituModel:
    with open(path, "rb") as f:
        if f.read(4) != _CHECKPOINT_MAGIC:
            raise FormatError(f"{path}: not an in-situ checkpoint")
        (hlen,) = struct.unpack("<I", f.read(4))
        meta = json.loads(f.read(hlen).decode("utf-8"))
        params = []
        for shape in meta["shapes"]:
            n = int(np.prod(shape))
            raw = f.read(4 * n)
            if len(raw) != 4 * n:
                raise FormatError(f"{path}: truncated parameter blob")
            params.append(np.frombuffer(raw, dtype="<f4").astype(np.float64).reshape(shape))
    return InSituModel(
        feature_dim=meta["feature_dim"],
        k=meta["k"],
        hidden=tuple(meta["hidden"]),
        head_hidden=meta["head_hidden"],
        registry=meta["registry"],
        params=params,
        rng_seed=meta["rng_seed"],
        graph_size=meta["graph_size"],
        trained=meta["trained"],
        param_names=meta["names"],
    )
