"""Dense feed-forward networks with hand-written backprop and Adam."""

from __future__ import annotations

import os
import tempfile
from dataclasses import dataclass

import numpy as np

ACTIVATIONS = ("relu", "tanh", "linear")


class StaleCacheError(RuntimeError):
    """Backward was called with a cache from another network or older parameters."""


@dataclass
class Cache:
    owner: int
    version: int
    inputs: list          # input to each layer
    outputs: list         # post-activation output of each layer


def _activate(name: str, z: np.ndarray) -> np.ndarray:
    if name == "relu":
        return np.maximum(z, 0.0)
    if name == "tanh":
        return np.tanh(z)
    return z


class Mlp:
    """Stack of affine layers, each followed by its own activation.

    ``sizes`` lists every width including input and output, so a network
    with ``len(sizes) - 1`` layers needs that many activation names.
    """

    def __init__(self, sizes, activations, rng: np.random.Generator | None = None) -> None:
        sizes = [int(s) for s in sizes]
        activations = [str(a).lower() for a in activations]
        if len(sizes) < 2 or any(s < 1 for s in sizes):
            raise ValueError(f"invalid layer sizes {sizes}")
        if len(activations) != len(sizes) - 1:
            raise ValueError("need one activation per layer")
        for a in activations:
            if a not in ACTIVATIONS:
                raise ValueError(f"unknown activation {a!r}")
        self.sizes = sizes
        self.activations = activations
        rng = np.random.default_rng() if rng is None else rng
        self.weights = []
        self.biases = []
        for fan_in, fan_out, act in zip(sizes[:-1], sizes[1:], activations):
            if act == "relu":
                limit = np.sqrt(6.0 / fan_in)
            else:
                limit = np.sqrt(6.0 / (fan_in + fan_out))
            self.weights.append(rng.uniform(-limit, limit, size=(fan_in, fan_out)))
            self.biases.append(np.zeros(fan_out))
        self._m = [np.zeros_like(p) for p in self.params()]
        self._v = [np.zeros_like(p) for p in self.params()]
        self.t = 0
        self._version = 0

    @property
    def in_dim(self) -> int:
        return self.sizes[0]

    @property
    def out_dim(self) -> int:
        return self.sizes[-1]

    def params(self) -> list[np.ndarray]:
        """Parameters in the order W1, b1, W2, b2, ..."""
        out = []
        for w, b in zip(self.weights, self.biases):
            out.extend((w, b))
        return out

    def same_architecture(self, other: "Mlp") -> bool:
        return self.sizes == other.sizes and self.activations == other.activations

    def touch(self) -> None:
        """Mark parameters as changed so outstanding caches become stale."""
        self._version += 1

    def __call__(self, x) -> np.ndarray:
        out = np.asarray(x, dtype=np.float64)
        for w, b, act in zip(self.weights, self.biases, self.activations):
            out = _activate(act, out @ w + b)
        return out

    def forward(self, x):
        x = np.asarray(x, dtype=np.float64)
        if x.ndim != 2 or x.shape[1] != self.in_dim:
            raise ValueError(f"expected input of shape (m, {self.in_dim}), got {x.shape}")
        if not np.all(np.isfinite(x)):
            raise ValueError("input contains non-finite values")
        inputs, outputs = [], []
        out = x
        for w, b, act in zip(self.weights, self.biases, self.activations):
            inputs.append(out)
            out = _activate(act, out @ w + b)
            outputs.append(out)
        return out, Cache(id(self), self._version, inputs, outputs)

    def backward(self, cache: Cache, output_grads):
        """Gradients of ``sum_i <output_grads_i, output_i>``.

        Returns ``(grads, input_grad)`` with ``grads`` aligned to :meth:`params`.
        """
        if cache.owner != id(self) or cache.version != self._version:
            raise StaleCacheError("cache does not match this network's current parameters")
        g = np.asarray(output_grads, dtype=np.float64)
        if g.shape != cache.outputs[-1].shape:
            raise ValueError(f"output_grads shape {g.shape} != output shape {cache.outputs[-1].shape}")
        grads = [None] * (2 * len(self.weights))
        for k in range(len(self.weights) - 1, -1, -1):
            act = self.activations[k]
            y = cache.outputs[k]
            if act == "relu":
                g = g * (y > 0.0)
            elif act == "tanh":
                g = g * (1.0 - y * y)
            grads[2 * k] = cache.inputs[k].T @ g
            grads[2 * k + 1] = g.sum(axis=0)
            g = g @ self.weights[k].T
        return grads, g

    def adam_step(self, grads, lr: float, b1: float = 0.9, b2: float = 0.999,
                  eps: float = 1e-8) -> None:
        params = self.params()
        if len(grads) != len(params):
            raise ValueError("gradient list does not match parameters")
        for g, p in zip(grads, params):
            if g.shape != p.shape:
                raise ValueError(f"gradient shape {g.shape} != parameter shape {p.shape}")
            if not np.all(np.isfinite(g)):
                raise ValueError("non-finite gradient")
        self.t += 1
        c1 = 1.0 - b1 ** self.t
        c2 = 1.0 - b2 ** self.t
        for g, p, m, v in zip(grads, params, self._m, self._v):
            m *= b1
            m += (1.0 - b1) * g
            v *= b2
            v += (1.0 - b2) * g * g
            p -= lr * (m / c1) / (np.sqrt(v / c2) + eps)
        self.touch()

    def copy(self) -> "Mlp":
        net = Mlp.__new__(Mlp)
        net.sizes = list(self.sizes)
        net.activations = list(self.activations)
        net.weights = [w.copy() for w in self.weights]
        net.biases = [b.copy() for b in self.biases]
        net._m = [np.zeros_like(p) for p in net.params()]
        net._v = [np.zeros_like(p) for p in net.params()]
        net.t = 0
        net._version = 0
        return net

    def save(self, path) -> None:
        save_params(self, path)


def copy_target(online: Mlp, target: Mlp, tau: float = 1.0) -> None:
    """Move target parameters toward online: ``target <- tau*online + (1-tau)*target``."""
    if not online.same_architecture(target):
        raise ValueError("online and target architectures differ")
    if not 0.0 < tau <= 1.0:
        raise ValueError(f"tau must be in (0, 1], got {tau}")
    for src, dst in zip(online.params(), target.params()):
        if tau == 1.0:
            dst[...] = src
        else:
            dst *= 1.0 - tau
            dst += tau * src
    target.touch()


# Parameter file: one ASCII header line
#   "MLP <sizes comma-separated> <activations comma-separated>\n"
# followed by W1, b1, W2, b2, ... as little-endian float64, row-major.

def save_params(net: Mlp, path) -> None:
    path = os.fspath(path)
    header = f"MLP {','.join(map(str, net.sizes))} {','.join(net.activations)}\n"
    fd, tmp = tempfile.mkstemp(dir=os.path.dirname(os.path.abspath(path)), suffix=".tmp")
    with os.fdopen(fd, "wb") as fh:
        fh.write(header.encode("ascii"))
        for p in net.params():
            fh.write(np.ascontiguousarray(p, dtype="<f8").tobytes())
    os.replace(tmp, path)


def load_params(path) -> Mlp:
    with open(path, "rb") as fh:
        header = fh.readline().decode("ascii").split()
        if len(header) != 3 or header[0] != "MLP":
            raise ValueError(f"{path}: not an MLP parameter file")
        sizes = [int(s) for s in header[1].split(",")]
        activations = header[2].split(",")
        net = Mlp(sizes, activations, np.random.default_rng(0))
        for p in net.params():
            raw = fh.read(p.size * 8)
            if len(raw) != p.size * 8:
                raise ValueError(f"{path}: truncated parameter block")
            p[...] = np.frombuffer(raw, dtype="<f8").reshape(p.shape)
        if fh.read(1):
            raise ValueError(f"{path}: trailing bytes after parameters")
    return net
