"""Social-event classifier over importance-weighted meta-path features.

Encoders: one ``Linear -> PReLU`` per terminal node type, shared by every
path ending at that type.  Fusion: softmax(mu)-weighted sum of the active
paths' encodings.  Decoder::

    z -> Linear -> BatchNorm -> PReLU -> Dropout -> (+ z) -> Linear -> logits

Gradients are derived by hand; ``loss_and_grads`` is the single backward
pass and is what the finite-difference tests check.
"""
from __future__ import annotations

import json
import struct
from dataclasses import asdict, dataclass, fields
from pathlib import Path
from typing import Sequence

import numpy as np

from lts.hin import NodeType

CHECKPOINT_MAGIC = b"LTSMODEL"
CHECKPOINT_VERSION = 1


class NonFiniteLoss(FloatingPointError):
    pass


@dataclass(frozen=True)
class ModelConfig:
    hidden: int = 512
    encoder_layers: int = 1
    decoder_layers: int = 2
    dropout: float = 0.5
    bn_momentum: float = 0.9
    bn_eps: float = 1e-5
    prelu_init: float = 0.25
    residual: bool = True
    learning_rate: float = 1e-3
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_eps: float = 1e-8
    batch_size: int = 10000
    epochs: int = 300
    seed: int = 666

    def __post_init__(self):
        if self.encoder_layers != 1 or self.decoder_layers != 2:
            raise ValueError("only 1 encoder layer and 2 decoder layers are supported")
        if not 0.0 <= self.dropout < 1.0:
            raise ValueError("dropout must lie in [0, 1)")


_TYPE_ORDER = (NodeType.Text, NodeType.User, NodeType.Entity)


def parameter_order(input_dims) -> list[str]:
    """Fixed tensor order used for checkpoints and optimizer state."""
    names = []
    for nt in _TYPE_ORDER:
        if nt in input_dims:
            names += [f"enc.{nt.value}.W", f"enc.{nt.value}.b", f"enc.{nt.value}.a"]
    names += ["dec1.W", "dec1.b", "bn.gamma", "bn.beta", "dec1.a", "out.W", "out.b"]
    return names


BUFFER_ORDER = ("bn.running_mean", "bn.running_var")


class BackboneModel:
    def __init__(self, config: ModelConfig, input_dims, num_classes: int, seed: int | None = None,
                 n_entities: int | None = None):
        self.config = config
        self.input_dims = {NodeType(k): int(v) for k, v in dict(input_dims).items()}
        self.num_classes = int(num_classes)
        self.n_entities = int(n_entities if n_entities is not None
                              else self.input_dims.get(NodeType.Entity, 0))
        self.training = True
        H, C = config.hidden, self.num_classes
        rng = np.random.default_rng(config.seed if seed is None else seed)

        def linear(fan_in, fan_out):
            bound = 1.0 / np.sqrt(fan_in)
            return (rng.uniform(-bound, bound, size=(fan_in, fan_out)),
                    rng.uniform(-bound, bound, size=fan_out))

        p: dict[str, np.ndarray] = {}
        for nt in _TYPE_ORDER:
            if nt in self.input_dims:
                W, b = linear(self.input_dims[nt], H)
                p[f"enc.{nt.value}.W"], p[f"enc.{nt.value}.b"] = W, b
                p[f"enc.{nt.value}.a"] = np.array([config.prelu_init])
        p["dec1.W"], p["dec1.b"] = linear(H, H)
        p["bn.gamma"], p["bn.beta"] = np.ones(H), np.zeros(H)
        p["dec1.a"] = np.array([config.prelu_init])
        p["out.W"], p["out.b"] = linear(H, C)
        self.params = {k: p[k] for k in parameter_order(self.input_dims)}
        self.buffers = {"bn.running_mean": np.zeros(H), "bn.running_var": np.ones(H)}
        self.adam_m = {k: np.zeros_like(v) for k, v in self.params.items()}
        self.adam_v = {k: np.zeros_like(v) for k, v in self.params.items()}
        self.adam_steps = {k: 0 for k in self.params}

    def train(self) -> "BackboneModel":
        self.training = True
        return self

    def eval(self) -> "BackboneModel":
        self.training = False
        return self

    def num_parameters(self) -> int:
        return int(sum(v.size for v in self.params.values()))

    def encoder_for(self, nt: NodeType) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        key = f"enc.{NodeType(nt).value}"
        if f"{key}.W" not in self.params:
            raise KeyError(f"no encoder for terminal type {NodeType(nt).name}")
        return self.params[f"{key}.W"], self.params[f"{key}.b"], self.params[f"{key}.a"]

    def to_bytes(self) -> bytes:
        return checkpoint_bytes(self)


# --------------------------------------------------------------------------
# forward pieces
# --------------------------------------------------------------------------

def _prelu(x, a):
    return np.where(x > 0, x, a[0] * x)


def softmax_weights(mu) -> np.ndarray:
    mu = np.asarray(getattr(mu, "mu", mu), dtype=float)
    e = np.exp(mu - mu.max())
    return e / e.sum()


def _rows(features, rows):
    return np.arange(features.num_texts) if rows is None else np.asarray(rows, dtype=np.int64)


def encode(model: BackboneModel, features, mask: Sequence[int], rows=None) -> dict[int, np.ndarray]:
    """Hidden encoding of each active path (``rows`` x hidden)."""
    rows = _rows(features, rows)
    terminals = features.terminal_types
    out = {}
    for m in sorted(set(int(i) for i in mask)):
        W, b, a = model.encoder_for(terminals[m])
        out[m] = _prelu(features[m][rows] @ W + b, a)
    return out


def fuse(encoded: dict[int, np.ndarray], mu, mask: Sequence[int], hidden: int | None = None,
         n_rows: int | None = None) -> np.ndarray:
    """Sum of active encodings, each scaled by softmax(mu) taken over all paths."""
    w = softmax_weights(mu)
    active = sorted(set(int(i) for i in mask))
    if not active:
        if hidden is None or n_rows is None:
            raise ValueError("empty mask needs hidden and n_rows")
        return np.zeros((n_rows, hidden))
    z = None
    for m in active:
        term = w[m] * encoded[m]
        z = term if z is None else z + term
    return z


def forward(model: BackboneModel, fused: np.ndarray, rng: np.random.Generator | None = None,
            _cache: dict | None = None) -> np.ndarray:
    """Decoder logits.  Train mode uses batch statistics and dropout from ``rng``."""
    p, cfg = model.params, model.config
    a1 = fused @ p["dec1.W"] + p["dec1.b"]
    if model.training:
        mean = a1.mean(axis=0)
        var = a1.var(axis=0)
    else:
        mean = model.buffers["bn.running_mean"]
        var = model.buffers["bn.running_var"]
    invstd = 1.0 / np.sqrt(var + cfg.bn_eps)
    xhat = (a1 - mean) * invstd
    bn = p["bn.gamma"] * xhat + p["bn.beta"]
    act = _prelu(bn, p["dec1.a"])
    if model.training and cfg.dropout > 0:
        if rng is None:
            raise ValueError("train-mode forward needs a dropout generator")
        keep = (rng.random(act.shape) >= cfg.dropout) / (1.0 - cfg.dropout)
    else:
        keep = None
    d = act * keep if keep is not None else act
    r = fused + d if cfg.residual else d
    logits = r @ p["out.W"] + p["out.b"]
    if _cache is not None:
        _cache.update(z=fused, a1=a1, mean=mean, var=var, invstd=invstd, xhat=xhat, bn=bn,
                      keep=keep, r=r)
    return logits


def log_softmax(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max(axis=1, keepdims=True)
    return shifted - np.log(np.exp(shifted).sum(axis=1, keepdims=True))


def loss(logits: np.ndarray, labels) -> float:
    """Mean cross-entropy."""
    labels = np.asarray(labels, dtype=np.int64)
    return float(-log_softmax(logits)[np.arange(len(labels)), labels].mean())


def predict(model: BackboneModel, features, mu, mask: Sequence[int], rows=None) -> np.ndarray:
    """Argmax class per text in eval mode (first maximum wins ties)."""
    was_training = model.training
    model.eval()
    try:
        rows = _rows(features, rows)
        enc = encode(model, features, mask, rows)
        z = fuse(enc, mu, mask, model.config.hidden, len(rows))
        logits = forward(model, z)
    finally:
        model.training = was_training
    return np.argmax(logits, axis=1)


# --------------------------------------------------------------------------
# backward
# --------------------------------------------------------------------------

def loss_and_grads(model: BackboneModel, features, rows, labels, mu, mask: Sequence[int],
                   rng: np.random.Generator | None = None):
    """Loss and gradients of every parameter touched by this batch.

    ``mu`` only scales the fused encodings and gets no gradient.  Encoders of
    terminal types absent from ``mask`` are omitted from the returned dict.
    Also returns the batch statistics of the normalization layer.
    """
    p = model.params
    rows = np.asarray(rows, dtype=np.int64)
    labels = np.asarray(labels, dtype=np.int64)
    B = len(rows)
    w = softmax_weights(mu)
    active = sorted(set(int(i) for i in mask))
    terminals = features.terminal_types

    enc_cache = []
    z = np.zeros((B, model.config.hidden))
    for m in active:
        nt = terminals[m]
        W, b, a = model.encoder_for(nt)
        x = features[m][rows]
        pre = x @ W
        pre += b
        slope = np.where(pre > 0, 1.0, a[0])
        h = pre * slope
        h *= w[m]
        z += h
        enc_cache.append((m, nt, x, pre, slope))

    cache: dict = {}
    logits = forward(model, z, rng, _cache=cache)
    logp = log_softmax(logits)
    value = float(-logp[np.arange(B), labels].mean())

    g = np.exp(logp)
    g[np.arange(B), labels] -= 1.0
    g /= B
    grads: dict[str, np.ndarray] = {}
    grads["out.W"] = cache["r"].T @ g
    grads["out.b"] = g.sum(axis=0)
    gr = g @ p["out.W"].T
    gz = gr.copy() if model.config.residual else np.zeros_like(gr)
    gact = gr * cache["keep"] if cache["keep"] is not None else gr
    bn = cache["bn"]
    a_d = p["dec1.a"][0]
    gbn = np.where(bn > 0, gact, a_d * gact)
    grads["dec1.a"] = np.array([np.sum(gact * np.where(bn > 0, 0.0, bn))])
    xhat = cache["xhat"]
    grads["bn.gamma"] = (gbn * xhat).sum(axis=0)
    grads["bn.beta"] = gbn.sum(axis=0)
    gxhat = gbn * p["bn.gamma"]
    if model.training:
        ga1 = cache["invstd"] / B * (B * gxhat - gxhat.sum(axis=0) - xhat * (gxhat * xhat).sum(axis=0))
    else:
        ga1 = gxhat * cache["invstd"]
    grads["dec1.W"] = cache["z"].T @ ga1
    grads["dec1.b"] = ga1.sum(axis=0)
    gz += ga1 @ p["dec1.W"].T

    for m, nt, x, pre, slope in enc_cache:
        key = f"enc.{nt.value}"
        slope *= w[m]
        gpre = gz * slope
        np.minimum(pre, 0.0, out=pre)
        ga = np.array([w[m] * np.vdot(gz, pre)])
        gW = x.T @ gpre
        gb = gpre.sum(axis=0)
        if f"{key}.W" in grads:
            grads[f"{key}.W"] += gW
            grads[f"{key}.b"] += gb
            grads[f"{key}.a"] += ga
        else:
            grads[f"{key}.W"], grads[f"{key}.b"], grads[f"{key}.a"] = gW, gb, ga

    stats = {"mean": cache["a1"].mean(axis=0), "var": cache["a1"].var(axis=0)}
    ordered = {k: grads[k] for k in p if k in grads}
    return value, ordered, stats


def adam_update(model: BackboneModel, grads: dict[str, np.ndarray], lr: float | None = None) -> None:
    cfg = model.config
    lr = cfg.learning_rate if lr is None else lr
    b1, b2 = cfg.adam_beta1, cfg.adam_beta2
    for k, g in grads.items():
        model.adam_steps[k] += 1
        t = model.adam_steps[k]
        m = model.adam_m[k]
        v = model.adam_v[k]
        m *= b1
        m += (1 - b1) * g
        v *= b2
        v += (1 - b2) * g * g
        mhat = m / (1 - b1 ** t)
        vhat = v / (1 - b2 ** t)
        model.params[k] -= lr * mhat / (np.sqrt(vhat) + cfg.adam_eps)


def train_step(model: BackboneModel, features, batch, mu, mask: Sequence[int],
               rng: np.random.Generator, lr: float | None = None) -> float:
    """One Adam step on ``batch = (rows, labels)``; returns the pre-update loss."""
    rows, labels = batch
    model.train()
    value, grads, stats = loss_and_grads(model, features, rows, labels, mu, mask, rng)
    if not np.isfinite(value):
        raise NonFiniteLoss(f"non-finite training loss {value}")
    mom = model.config.bn_momentum
    n = len(rows)
    unbiased = stats["var"] * n / (n - 1) if n > 1 else stats["var"]
    model.buffers["bn.running_mean"] = mom * model.buffers["bn.running_mean"] + (1 - mom) * stats["mean"]
    model.buffers["bn.running_var"] = mom * model.buffers["bn.running_var"] + (1 - mom) * unbiased
    adam_update(model, grads, lr)
    return value


# --------------------------------------------------------------------------
# checkpoints
# --------------------------------------------------------------------------
#
# Layout (all integers little-endian):
#   8 bytes   magic "LTSMODEL"
#   uint32    format version
#   uint32    header length L
#   L bytes   UTF-8 JSON header: config, input_dims, num_classes, n_entities,
#             adam_steps and the tensor table [[name, shape], ...]
#   tensors   float64 little-endian, C order, in tensor-table order:
#             parameters (parameter_order), buffers (BUFFER_ORDER), then the
#             Adam first and second moments ("adam_m.<name>", "adam_v.<name>")

def _tensor_table(model: BackboneModel) -> list[tuple[str, np.ndarray]]:
    table = [(k, model.params[k]) for k in parameter_order(model.input_dims)]
    table += [(k, model.buffers[k]) for k in BUFFER_ORDER]
    table += [(f"adam_m.{k}", model.adam_m[k]) for k in parameter_order(model.input_dims)]
    table += [(f"adam_v.{k}", model.adam_v[k]) for k in parameter_order(model.input_dims)]
    return table


def checkpoint_bytes(model: BackboneModel) -> bytes:
    table = _tensor_table(model)
    header = {
        "config": asdict(model.config),
        "input_dims": {nt.value: d for nt, d in model.input_dims.items()},
        "num_classes": model.num_classes,
        "n_entities": model.n_entities,
        "adam_steps": model.adam_steps,
        "tensors": [[k, list(v.shape)] for k, v in table],
    }
    hb = json.dumps(header, sort_keys=True).encode("utf-8")
    parts = [CHECKPOINT_MAGIC, struct.pack("<II", CHECKPOINT_VERSION, len(hb)), hb]
    parts += [np.ascontiguousarray(v, dtype="<f8").tobytes() for _, v in table]
    return b"".join(parts)


def save_checkpoint(model: BackboneModel, path: str | Path) -> None:
    Path(path).write_bytes(checkpoint_bytes(model))


def load_checkpoint(path: str | Path) -> BackboneModel:
    data = Path(path).read_bytes()
    if data[:8] != CHECKPOINT_MAGIC:
        raise ValueError(f"{path}: not a model checkpoint")
    version, hlen = struct.unpack_from("<II", data, 8)
    if version != CHECKPOINT_VERSION:
        raise ValueError(f"{path}: unsupported checkpoint version {version}")
    header = json.loads(data[16:16 + hlen].decode("utf-8"))
    known = {f.name for f in fields(ModelConfig)}
    config = ModelConfig(**{k: v for k, v in header["config"].items() if k in known})
    dims = {NodeType(k): v for k, v in header["input_dims"].items()}
    model = BackboneModel(config, dims, header["num_classes"], n_entities=header["n_entities"])
    off = 16 + hlen
    for name, shape in header["tensors"]:
        n = int(np.prod(shape)) if shape else 1
        arr = np.frombuffer(data, dtype="<f8", count=n, offset=off).astype(float).reshape(shape)
        off += 8 * n
        if name.startswith("adam_m."):
            model.adam_m[name[7:]] = arr
        elif name.startswith("adam_v."):
            model.adam_v[name[7:]] = arr
        elif name in model.buffers:
            model.buffers[name] = arr
        else:
            model.params[name] = arr
    if off != len(data):
        raise ValueError(f"{path}: {len(data) - off} trailing bytes")
    model.adam_steps = {k: int(v) for k, v in header["adam_steps"].items()}
    return model
