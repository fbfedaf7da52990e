"""Minimal dense networks with manual backprop and Adam, numpy only.

Networks are a list of affine layers with rectifier hidden activations.
The output head is either the raw final affine output (value heads) or
its log-softmax (action-distribution heads).  backward() expects the
loss gradient with respect to the final *affine* output, so for
log-softmax heads pair it with nll_loss, which differentiates through
the softmax analytically.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .container import read_container, write_container
from .errors import ConfigError, DataFormatError


@dataclass
class DenseNet:
    weights: list  # [(d_in, d_out) float64]
    biases: list  # [(d_out,) float64]
    log_softmax_head: bool = False

    @property
    def layer_dims(self):
        dims = [w.shape[0] for w in self.weights]
        dims.append(self.weights[-1].shape[1])
        return tuple(dims)

    @property
    def num_layers(self) -> int:
        return len(self.weights)

    def copy(self) -> "DenseNet":
        return DenseNet(
            weights=[w.copy() for w in self.weights],
            biases=[b.copy() for b in self.biases],
            log_softmax_head=self.log_softmax_head,
        )


def init_dense(layer_dims, seed: int, log_softmax_head: bool = False) -> DenseNet:
    """Uniform Glorot weights in +/- sqrt(6 / (fan_in + fan_out)), zero biases."""
    dims = list(layer_dims)
    if len(dims) < 2 or any(d < 1 for d in dims):
        raise ConfigError(f"layer_dims must list at least two positive sizes, got {layer_dims}")
    rng = np.random.default_rng(seed)
    weights, biases = [], []
    for d_in, d_out in zip(dims[:-1], dims[1:]):
        limit = np.sqrt(6.0 / (d_in + d_out))
        weights.append(rng.uniform(-limit, limit, size=(d_in, d_out)))
        biases.append(np.zeros(d_out))
    return DenseNet(weights=weights, biases=biases, log_softmax_head=log_softmax_head)


def forward(net: DenseNet, x: np.ndarray):
    """Batch forward pass; returns (output, cache) with cache for backward.

    x has shape (batch, d_in).  For log-softmax heads the output rows are
    log-probabilities; the cache always stores the raw affine head.
    """
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 2 or x.shape[1] != net.weights[0].shape[0]:
        raise ConfigError(f"input shape {x.shape} does not match first layer {net.weights[0].shape}")
    activations = [x]
    preacts = []
    h = x
    last = net.num_layers - 1
    for i, (w, b) in enumerate(zip(net.weights, net.biases)):
        z = h @ w + b
        preacts.append(z)
        if i < last:
            h = np.maximum(z, 0.0)
            activations.append(h)
    logits = preacts[-1]
    if net.log_softmax_head:
        shifted = logits - logits.max(axis=1, keepdims=True)
        out = shifted - np.log(np.exp(shifted).sum(axis=1, keepdims=True))
    else:
        out = logits
    cache = {"activations": activations, "preacts": preacts}
    return out, cache


def forward_one(net: DenseNet, v: np.ndarray) -> np.ndarray:
    """Single-vector convenience wrapper around forward()."""
    out, _ = forward(net, np.asarray(v, dtype=np.float64)[None, :])
    return out[0]


def backward(net: DenseNet, cache: dict, out_grad: np.ndarray):
    """Backprop from d(loss)/d(final affine output) to per-layer grads.

    Returns [(dW, db)] in layer order.  The rectifier subgradient at
    exactly zero is taken as zero.
    """
    grads = [None] * net.num_layers
    g = np.asarray(out_grad, dtype=np.float64)
    for i in range(net.num_layers - 1, -1, -1):
        a_in = cache["activations"][i]
        grads[i] = (a_in.T @ g, g.sum(axis=0))
        if i > 0:
            g = (g @ net.weights[i].T) * (cache["preacts"][i - 1] > 0.0)
    return grads


def mse_loss(pred: np.ndarray, target: np.ndarray):
    """Mean squared error and its gradient w.r.t. pred."""
    pred = np.asarray(pred, dtype=np.float64)
    target = np.asarray(target, dtype=np.float64)
    diff = pred - target
    loss = float(np.mean(diff ** 2))
    grad = 2.0 * diff / diff.size
    return loss, grad


def nll_loss(log_probs: np.ndarray, actions: np.ndarray):
    """Mean negative log-likelihood and its gradient w.r.t. the logits.

    log_probs must come from a log-softmax head; the analytic gradient of
    the batch-mean loss is (softmax - one_hot) / batch.
    """
    log_probs = np.asarray(log_probs, dtype=np.float64)
    actions = np.asarray(actions, dtype=np.int64)
    n = log_probs.shape[0]
    picked = log_probs[np.arange(n), actions]
    loss = float(-np.mean(picked))
    grad = np.exp(log_probs)
    grad[np.arange(n), actions] -= 1.0
    grad /= n
    return loss, grad


@dataclass
class AdamState:
    """First/second moment accumulators plus the shared step counter."""

    lr: float
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step_count: int = 0
    m: list = field(default_factory=list)  # [(mW, mb)]
    v: list = field(default_factory=list)  # [(vW, vb)]


def init_adam(net: DenseNet, lr: float) -> AdamState:
    if lr <= 0:
        raise ConfigError("learning rate must be positive")
    state = AdamState(lr=lr)
    for w, b in zip(net.weights, net.biases):
        state.m.append((np.zeros_like(w), np.zeros_like(b)))
        state.v.append((np.zeros_like(w), np.zeros_like(b)))
    return state


def adam_step(net: DenseNet, grads, state: AdamState) -> DenseNet:
    """One bias-corrected Adam update, in place; returns the net."""
    state.step_count += 1
    t = state.step_count
    b1, b2 = state.beta1, state.beta2
    bc1 = 1.0 - b1 ** t
    bc2 = 1.0 - b2 ** t
    for i, (dw, db) in enumerate(grads):
        mw, mb = state.m[i]
        vw, vb = state.v[i]
        mw *= b1
        mw += (1.0 - b1) * dw
        mb *= b1
        mb += (1.0 - b1) * db
        vw *= b2
        vw += (1.0 - b2) * dw ** 2
        vb *= b2
        vb += (1.0 - b2) * db ** 2
        net.weights[i] -= state.lr * (mw / bc1) / (np.sqrt(vw / bc2) + state.eps)
        net.biases[i] -= state.lr * (mb / bc1) / (np.sqrt(vb / bc2) + state.eps)
    return net


def soft_update(target: DenseNet, online: DenseNet, tau: float) -> None:
    """Polyak blend target <- target * tau + online * (1 - tau), in place.

    tau = 1 leaves the target untouched, tau = 0 copies the online net.
    """
    if not 0.0 <= tau <= 1.0:
        raise ConfigError("tau must lie in [0, 1]")
    for tw, ow in zip(target.weights, online.weights):
        tw *= tau
        tw += (1.0 - tau) * ow
    for tb, ob in zip(target.biases, online.biases):
        tb *= tau
        tb += (1.0 - tau) * ob


CHECKPOINT_KIND = "dense-net-checkpoint"


def save_checkpoint(path, nets: dict, meta: dict | None = None) -> None:
    """Store named networks (full float64 precision) in one container."""
    arrays = {}
    net_specs = {}
    for name, net in nets.items():
        for i, (w, b) in enumerate(zip(net.weights, net.biases)):
            arrays[f"{name}/w{i}"] = w
            arrays[f"{name}/b{i}"] = b
        net_specs[name] = {
            "layer_dims": list(net.layer_dims),
            "log_softmax_head": net.log_softmax_head,
        }
    full_meta = {"kind": CHECKPOINT_KIND, "nets": net_specs}
    full_meta.update(meta or {})
    write_container(path, arrays, meta=full_meta)


def load_checkpoint(path):
    """Read back (nets, meta); malformed checkpoints raise format errors."""
    arrays, meta = read_container(path)
    if meta.get("kind") != CHECKPOINT_KIND:
        raise DataFormatError(f"{path}: not a checkpoint (kind={meta.get('kind')!r})")
    nets = {}
    for name, spec in meta.get("nets", {}).items():
        dims = spec.get("layer_dims", [])
        if len(dims) < 2:
            raise DataFormatError(f"{path}: bad layer_dims for net '{name}'")
        weights, biases = [], []
        for i, (d_in, d_out) in enumerate(zip(dims[:-1], dims[1:])):
            try:
                w = arrays[f"{name}/w{i}"]
                b = arrays[f"{name}/b{i}"]
            except KeyError as exc:
                raise DataFormatError(f"{path}: missing parameter block for net '{name}'") from exc
            if w.shape != (d_in, d_out) or b.shape != (d_out,):
                raise DataFormatError(
                    f"{path}: net '{name}' layer {i} has shape {w.shape}/{b.shape}, "
                    f"header says ({d_in}, {d_out})"
                )
            weights.append(w.astype(np.float64))
            biases.append(b.astype(np.float64))
        nets[name] = DenseNet(
            weights=weights,
            biases=biases,
            log_softmax_head=bool(spec.get("log_softmax_head", False)),
        )
    return nets, meta
