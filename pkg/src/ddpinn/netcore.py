"""
Small tanh MLPs with an exact input-derivative channel, reverse-mode gradients
and Adam.

The network has a scalar input. Alongside each activation the forward pass
carries its derivative with respect to that input (a forward-mode tangent), so
one pass yields both ``y(z)`` and ``dy/dz``. :func:`backprop` then runs a single
reverse sweep over both channels. This gives exact gradients of any loss that
depends on outputs *and* their time derivatives, including the second-order
mixed terms that appear through ``tanh'``.

Flattening order (used by :class:`ParamVector` and checkpoints): for each
network in order, for each layer in order, the weight matrix of shape
``(n_in, n_out)`` in C order followed by the bias vector ``(n_out,)``. The
inverse ODE parameters come after all network weights.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

CHECKPOINT_FORMAT = "ddpinn-paramvector/1"


class NonFiniteError(ArithmeticError):
    """A loss or gradient stopped being finite; ``index`` locates the first bad component."""

    def __init__(self, message: str, index: int | None = None):
        super().__init__(message)
        self.index = index


@dataclass
class Mlp:
    layer_sizes: tuple[int, ...]
    weights: list[np.ndarray]
    biases: list[np.ndarray]

    @property
    def n_params(self) -> int:
        return n_mlp_params(self.layer_sizes)

    def flatten(self) -> np.ndarray:
        return np.concatenate([a.ravel() for W, b in zip(self.weights, self.biases) for a in (W, b)])

    @classmethod
    def from_flat(cls, layer_sizes, flat: np.ndarray) -> "Mlp":
        """Build a network whose weights are *views* into ``flat``."""
        sizes = tuple(int(s) for s in layer_sizes)
        weights, biases, k = [], [], 0
        for n_in, n_out in zip(sizes[:-1], sizes[1:]):
            weights.append(flat[k:k + n_in * n_out].reshape(n_in, n_out))
            k += n_in * n_out
            biases.append(flat[k:k + n_out])
            k += n_out
        if k != flat.shape[0]:
            raise ValueError(f"flat vector has {flat.shape[0]} entries, layout needs {k}")
        return cls(sizes, weights, biases)


def n_mlp_params(layer_sizes) -> int:
    return sum(a * b + b for a, b in zip(layer_sizes[:-1], layer_sizes[1:]))


def init_mlp(layer_sizes, seed=0) -> Mlp:
    """Glorot-uniform weights, zero biases."""
    sizes = tuple(int(s) for s in layer_sizes)
    if len(sizes) < 2 or min(sizes) < 1:
        raise ValueError(f"invalid layer sizes {sizes}")
    rng = np.random.default_rng(seed)
    flat = np.zeros(n_mlp_params(sizes))
    net = Mlp.from_flat(sizes, flat)
    for W in net.weights:
        limit = np.sqrt(6.0 / (W.shape[0] + W.shape[1]))
        W[...] = rng.uniform(-limit, limit, size=W.shape)
    return net


def _column(t) -> np.ndarray:
    z = np.asarray(t, dtype=float)
    if z.ndim == 0:
        z = z.reshape(1, 1)
    elif z.ndim == 1:
        z = z[:, None]
    if not np.all(np.isfinite(z)):
        raise ValueError("network input contains non-finite values")
    return z


def forward(net: Mlp, t) -> np.ndarray:
    h = _column(t)
    last = len(net.weights) - 1
    for i, (W, b) in enumerate(zip(net.weights, net.biases)):
        h = h @ W + b
        if i < last:
            h = np.tanh(h)
    return h


def tape(net: Mlp, z: np.ndarray, dz) -> tuple[np.ndarray, np.ndarray, list]:
    """Forward pass on inputs ``z`` (n, 1) with input tangent ``dz``.

    Returns ``(y, dy, cache)``; ``dy`` is ``dy/dz * dz``. The cache feeds :func:`backprop`.
    """
    h = z
    d = np.broadcast_to(np.asarray(dz, dtype=float), z.shape)
    cache = []
    last = len(net.weights) - 1
    for i, (W, b) in enumerate(zip(net.weights, net.biases)):
        a = h @ W + b
        da = d @ W
        if i == last:
            cache.append((h, d))
            return a, da, cache
        hn = np.tanh(a)
        s = 1.0 - hn * hn
        cache.append((h, d, hn, s, da))
        h, d = hn, s * da
    raise ValueError("network has no layers")


def backprop(net: Mlp, cache: list, gy: np.ndarray, gdy: np.ndarray, out: Mlp) -> Mlp:
    """Accumulate ``dL/dweights`` into ``out`` given ``dL/dy`` and ``dL/d(dy)``."""
    h, d = cache[-1]
    L = len(net.weights) - 1
    out.weights[L][...] = h.T @ gy + d.T @ gdy
    out.biases[L][...] = gy.sum(axis=0)
    gh = gy @ net.weights[L].T
    gd = gdy @ net.weights[L].T
    for i in range(L - 1, -1, -1):
        h_prev, d_prev, hn, s, da = cache[i]
        gda = gd * s
        ga = (gh - 2.0 * hn * (gd * da)) * s
        out.weights[i][...] = h_prev.T @ ga + d_prev.T @ gda
        out.biases[i][...] = ga.sum(axis=0)
        if i:
            gh = ga @ net.weights[i].T
            gd = gda @ net.weights[i].T
    return out


def forward_with_time_derivative(net: Mlp, t) -> tuple[np.ndarray, np.ndarray]:
    z = _column(t)
    y, dy, _ = tape(net, z, 1.0)
    return y, dy


@dataclass
class ParamVector:
    """All trainables of one run: network weights followed by inverse ODE parameters."""

    values: np.ndarray
    net_sizes: tuple[tuple[int, ...], ...]
    param_names: tuple[str, ...] = ()
    bounds: np.ndarray = field(default_factory=lambda: np.zeros((0, 2)))

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        self.net_sizes = tuple(tuple(int(s) for s in sizes) for sizes in self.net_sizes)
        self.param_names = tuple(self.param_names)
        self.bounds = np.asarray(self.bounds, dtype=float).reshape(len(self.param_names), 2)
        self._net_counts = [n_mlp_params(s) for s in self.net_sizes]
        if self.values.shape != (self.n_theta + len(self.param_names),):
            raise ValueError(f"values has shape {self.values.shape}, layout expects "
                             f"{self.n_theta + len(self.param_names)} entries")
        if np.any(self.bounds[:, 0] > self.bounds[:, 1]):
            raise ValueError("parameter bounds must satisfy lo <= hi")

    @classmethod
    def from_nets(cls, nets, param_values=(), param_names=(), bounds=None) -> "ParamVector":
        param_values = np.asarray(param_values, dtype=float).reshape(-1)
        if bounds is None:
            bounds = np.tile([-np.inf, np.inf], (len(param_names), 1))
        values = np.concatenate([n.flatten() for n in nets] + [param_values])
        return cls(values, tuple(n.layer_sizes for n in nets), param_names, bounds)

    @property
    def n_theta(self) -> int:
        return sum(self._net_counts)

    @property
    def theta(self) -> np.ndarray:
        return self.values[:self.n_theta]

    @property
    def inverse(self) -> np.ndarray:
        return self.values[self.n_theta:]

    def nets(self, values: np.ndarray | None = None) -> list[Mlp]:
        """Networks viewing into ``values`` (default: this vector's own storage)."""
        values = self.values if values is None else values
        out, k = [], 0
        for sizes, n in zip(self.net_sizes, self._net_counts):
            out.append(Mlp.from_flat(sizes, values[k:k + n]))
            k += n
        return out

    def layer_slices(self) -> list[slice]:
        """One slice of ``values`` per dense layer (weights and bias together)."""
        out, k = [], 0
        for sizes in self.net_sizes:
            for a, b in zip(sizes[:-1], sizes[1:]):
                out.append(slice(k, k + a * b + b))
                k += a * b + b
        return out

    def with_values(self, values) -> "ParamVector":
        return replace(self, values=np.array(values, dtype=float))

    def copy(self) -> "ParamVector":
        return self.with_values(self.values)

    def learned(self) -> dict[str, float]:
        return {n: float(v) for n, v in zip(self.param_names, self.inverse)}

    def to_json(self) -> dict:
        return {
            "format": CHECKPOINT_FORMAT,
            "nets": [list(s) for s in self.net_sizes],
            "params": [{"name": n, "lo": float(lo), "hi": float(hi)}
                       for n, (lo, hi) in zip(self.param_names, self.bounds)],
            "n_theta": self.n_theta,
            "values": [float(x) for x in self.values],
        }

    @classmethod
    def from_json(cls, doc: dict) -> "ParamVector":
        if doc.get("format") != CHECKPOINT_FORMAT:
            raise ValueError(f"unsupported checkpoint format {doc.get('format')!r}")
        params = doc["params"]
        return cls(np.array(doc["values"], dtype=float), tuple(tuple(s) for s in doc["nets"]),
                   tuple(p["name"] for p in params), [[p["lo"], p["hi"]] for p in params])

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_json()) + "\n")

    @classmethod
    def load(cls, path) -> "ParamVector":
        return cls.from_json(json.loads(Path(path).read_text()))


def loss_gradient(loss, at: ParamVector) -> np.ndarray:
    """Gradient of ``loss`` at ``at``.

    ``loss`` must provide ``value_and_grad(ParamVector) -> (float, ndarray)``.
    """
    value, grad = loss.value_and_grad(at)
    if not np.isfinite(value):
        raise NonFiniteError(f"loss is not finite ({value})")
    bad = np.flatnonzero(~np.isfinite(grad))
    if bad.size:
        raise NonFiniteError(f"gradient component {bad[0]} is not finite", int(bad[0]))
    return grad


@dataclass
class AdamState:
    m: np.ndarray
    v: np.ndarray
    step: int = 0
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8


def adam_init(params: ParamVector, lr=1e-3, beta1=0.9, beta2=0.999, eps=1e-8) -> AdamState:
    n = params.values.shape[0]
    return AdamState(np.zeros(n), np.zeros(n), 0, lr, beta1, beta2, eps)


def adam_step(state: AdamState, params: ParamVector, grad: np.ndarray):
    """One bias-corrected Adam update; returns fresh ``(state, params)``."""
    if grad.shape != params.values.shape or state.m.shape != grad.shape:
        raise ValueError("gradient, moments and parameters must share a shape")
    step = state.step + 1
    m = state.beta1 * state.m + (1.0 - state.beta1) * grad
    v = state.beta2 * state.v + (1.0 - state.beta2) * (grad * grad)
    m_hat = m / (1.0 - state.beta1**step)
    v_hat = v / (1.0 - state.beta2**step)
    values = params.values - state.lr * m_hat / (np.sqrt(v_hat) + state.eps)
    return replace(state, m=m, v=v, step=step), params.with_values(values)
