"""ReLU multilayer perceptrons with flat parameter storage.

Networks map R^d -> R.  Every affine layer uses the convention
z = W x - b, so a first-layer unit's breaking hyperplane is the set
{x : w.x - b = 0}.  Parameters live in one flat float64 buffer, layer by
layer, weights (row-major) before biases; this is also the checkpoint
serialization order.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

__all__ = [
    "Architecture",
    "NetworkParams",
    "ForwardTrace",
    "param_count",
    "init_params",
    "forward",
    "forward_batch",
    "grad_params",
    "split_params",
]


@dataclass(frozen=True)
class Architecture:
    """Layer widths (d, n_1, ..., n_{L-1}, 1) of a ReLU MLP."""

    dims: tuple

    def __post_init__(self):
        dims = tuple(int(n) for n in self.dims)
        if len(dims) < 3:
            raise ValueError(f"need at least one hidden layer, got dims={dims}")
        if any(n < 1 for n in dims):
            raise ValueError(f"all layer widths must be >= 1, got dims={dims}")
        if dims[-1] != 1:
            raise ValueError(f"output dimension must be 1, got dims={dims}")
        object.__setattr__(self, "dims", dims)

    @property
    def input_dim(self) -> int:
        return self.dims[0]

    @property
    def depth(self) -> int:
        return len(self.dims) - 1

    @property
    def n_hidden_layers(self) -> int:
        return len(self.dims) - 2

    @classmethod
    def parse(cls, text: str) -> "Architecture":
        """Parse a hyphen-joined width string like '2-20-20-1'."""
        return cls(tuple(int(t) for t in text.split("-")))

    def __str__(self) -> str:
        return "-".join(str(n) for n in self.dims)


def param_count(arch: Architecture) -> int:
    """Total number of weights and biases."""
    dims = arch.dims
    return sum(dims[l - 1] * dims[l] + dims[l] for l in range(1, len(dims)))


@dataclass(frozen=True)
class NetworkParams:
    """An architecture plus its flat float64 parameter vector."""

    arch: Architecture
    params: np.ndarray

    def __post_init__(self):
        p = np.asarray(self.params, dtype=np.float64)
        if p.shape != (param_count(self.arch),):
            raise ValueError(
                f"expected {param_count(self.arch)} parameters for {self.arch}, "
                f"got shape {p.shape}"
            )
        if not np.all(np.isfinite(p)):
            raise ValueError("parameters must be finite")
        object.__setattr__(self, "params", p)


@dataclass
class ForwardTrace:
    """Per-layer pre/post activations recorded during one evaluation."""

    pre: list  # z^(l) per hidden layer
    post: list  # sigma(z^(l)) per hidden layer
    output: float


def split_params(arch: Architecture, params: np.ndarray):
    """View the flat buffer as a list of (W, b) pairs, no copies."""
    dims = arch.dims
    out = []
    off = 0
    for l in range(1, len(dims)):
        n_in, n_out = dims[l - 1], dims[l]
        w = params[off : off + n_in * n_out].reshape(n_out, n_in)
        off += n_in * n_out
        b = params[off : off + n_out]
        off += n_out
        out.append((w, b))
    return out


def init_params(arch: Architecture, seed: int) -> NetworkParams:
    """Deterministic uniform init: weights +-sqrt(6/(fan_in+fan_out)), biases in [-1,1].

    Biases in [-1, 1] put the first-layer breaking hyperplanes inside (or
    near) the unit domain at the start of training.
    """
    rng = np.random.default_rng(seed)
    buf = np.empty(param_count(arch), dtype=np.float64)
    dims = arch.dims
    off = 0
    for l in range(1, len(dims)):
        n_in, n_out = dims[l - 1], dims[l]
        bound = np.sqrt(6.0 / (n_in + n_out))
        nw = n_in * n_out
        buf[off : off + nw] = rng.uniform(-bound, bound, size=nw)
        off += nw
        buf[off : off + n_out] = rng.uniform(-1.0, 1.0, size=n_out)
        off += n_out
    return NetworkParams(arch, buf)


def forward_batch(arch: Architecture, params: np.ndarray, x: np.ndarray):
    """Evaluate the network at a batch of points x with shape (N, d).

    Returns (values, pres) where values has shape (N,) and pres is the list
    of hidden pre-activation matrices, needed for the backward pass.
    """
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 2 or x.shape[1] != arch.input_dim:
        raise ValueError(f"expected points of shape (N, {arch.input_dim}), got {x.shape}")
    layers = split_params(arch, params)
    pres = []
    a = x
    for w, b in layers[:-1]:
        z = a @ w.T - b
        pres.append(z)
        a = np.maximum(z, 0.0)
    w, b = layers[-1]
    out = a @ w.T - b
    return out[:, 0], pres


def forward(net: NetworkParams, x: Sequence[float]):
    """Evaluate at a single point; returns (value, ForwardTrace)."""
    xa = np.asarray(x, dtype=np.float64).reshape(1, -1)
    value, pres = forward_batch(net.arch, net.params, xa)
    trace = ForwardTrace(
        pre=[z[0].copy() for z in pres],
        post=[np.maximum(z[0], 0.0) for z in pres],
        output=float(value[0]),
    )
    return float(value[0]), trace


def grad_params(net: NetworkParams, points: np.ndarray, cotangents: np.ndarray) -> np.ndarray:
    """Sum_k cot_k * d forward(net, x_k) / d params, by reverse accumulation.

    Uses the subgradient convention sigma'(0) = 0 (strict z > 0 mask).
    """
    x = np.asarray(points, dtype=np.float64)
    if x.ndim == 1:
        x = x.reshape(1, -1)
    cot = np.asarray(cotangents, dtype=np.float64).reshape(-1)
    if len(cot) != x.shape[0]:
        raise ValueError(f"{x.shape[0]} points but {len(cot)} cotangents")
    _, pres = forward_batch(net.arch, net.params, x)
    return _vjp(net.arch, net.params, x, pres, cot)


def _vjp(arch: Architecture, params: np.ndarray, x: np.ndarray, pres: list, cot: np.ndarray) -> np.ndarray:
    """Backward pass given cached pre-activations; returns flat gradient."""
    layers = split_params(arch, params)
    posts = [x] + [np.maximum(z, 0.0) for z in pres]
    grad = np.zeros_like(params)
    gl = split_params(arch, grad)

    # output layer: out = a @ w.T - b, cotangent cot on out
    delta = cot[:, None]  # (N, 1)
    for l in range(len(layers) - 1, -1, -1):
        w, _ = layers[l]
        gw, gb = gl[l]
        gw += delta.T @ posts[l]
        gb -= delta.sum(axis=0)
        if l > 0:
            delta = (delta @ w) * (pres[l - 1] > 0.0)
    return grad
