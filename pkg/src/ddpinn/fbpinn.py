"""
Finite-basis PINN over an overlapping decomposition of the time domain.

The domain is split into nominal intervals at interior data-window boundaries
(or bisected when there are none). Each interval is widened across every
interior interface by ``(factor - 1) * nominal half-width``, where ``factor`` is
``wo`` when the widening reaches into a data-carrying interval and ``wi``
otherwise. Outer edges are widened past the domain by ``wo`` so every window is
strictly positive on the closed domain; the stored support is clamped back
onto the domain, while centre and half-width keep the unclamped extent.

Each subdomain gets its own small network on a [-1, 1] local input. The
composite

    N(t) = sum_j w_j(t) * scale * net_j(norm_j(t))

uses cosine-squared windows normalised to sum to one, and then passes through
the same hard initial-condition constraint as the vanilla PINN. ``scale`` is the
largest observed departure of the data from the initial state.
"""
from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .netcore import Mlp, backprop, init_mlp, tape
from .pinn import LossWeights, TrainingConfig, fit, ramp


class CoverageError(ValueError):
    """No window is active at some point of the domain."""


@dataclass(frozen=True)
class Subdomain:
    index: int
    lo: float      # support (clamped to the domain)
    hi: float
    mu: float      # centre of the unclamped extended interval
    sigma: float   # half-width of the unclamped extended interval
    nominal: tuple[float, float] = (0.0, 0.0)

    def __post_init__(self):
        if not self.lo < self.hi:
            raise ValueError(f"empty subdomain [{self.lo}, {self.hi}]")
        if not self.sigma > 0:
            raise ValueError("sigma must be positive")


@dataclass
class Decomposition:
    domain: tuple[float, float]
    window: tuple[float, float]
    wo: float
    wi: float
    subdomains: list[Subdomain]
    unnorm_scale: np.ndarray
    unnorm_shift: np.ndarray

    @property
    def nsub(self) -> int:
        return len(self.subdomains)

    def to_json(self) -> dict:
        return dict(
            domain=list(self.domain), window=list(self.window), nsub=self.nsub, wo=self.wo,
            wi=self.wi, unnorm_scale=self.unnorm_scale.tolist(),
            unnorm_shift=self.unnorm_shift.tolist(),
            subdomains=[dict(index=s.index, lo=s.lo, hi=s.hi, mu=s.mu, sigma=s.sigma,
                             nominal=list(s.nominal)) for s in self.subdomains],
        )

    @classmethod
    def from_json(cls, doc: dict) -> "Decomposition":
        subs = [Subdomain(s["index"], s["lo"], s["hi"], s["mu"], s["sigma"], tuple(s["nominal"]))
                for s in doc["subdomains"]]
        return cls(tuple(doc["domain"]), tuple(doc["window"]), doc["wo"], doc["wi"], subs,
                   np.asarray(doc["unnorm_scale"], float), np.asarray(doc["unnorm_shift"], float))

    def with_unnorm(self, scale, shift=None) -> "Decomposition":
        scale = np.asarray(scale, dtype=float).reshape(-1)
        shift = np.zeros_like(scale) if shift is None else np.asarray(shift, float).reshape(-1)
        return replace(self, unnorm_scale=scale, unnorm_shift=shift)


def _nominal_edges(domain, window, nsub):
    t0, t1 = domain
    cuts = [c for c in window if t0 < c < t1][:nsub - 1]
    edges = sorted({t0, t1, *cuts})
    while len(edges) - 1 < nsub:
        widths = np.diff(edges)
        k = int(np.argmax(widths))
        edges.insert(k + 1, 0.5 * (edges[k] + edges[k + 1]))
    return edges


def _inside(interval, window) -> bool:
    mid = 0.5 * (interval[0] + interval[1])
    return window[0] <= mid <= window[1]


def build_decomposition(domain, data_window, nsub: int = 2, wo: float = 1.9,
                        wi: float = 1.0005, n_species: int = 1) -> Decomposition:
    t0, t1 = float(domain[0]), float(domain[1])
    lo, hi = float(data_window[0]), float(data_window[1])
    if nsub < 2:
        raise ValueError(f"nsub must be >= 2, got {nsub}")
    if not (wo > 1 and wi > 1):
        raise ValueError(f"overlap factors must exceed 1, got wo={wo}, wi={wi}")
    if not (t0 <= lo <= hi <= t1):
        raise ValueError(f"data window [{lo}, {hi}] not inside domain [{t0}, {t1}]")
    edges = _nominal_edges((t0, t1), (lo, hi), nsub)
    nominal = list(zip(edges[:-1], edges[1:]))
    for a, b in nominal:
        if not b - a > 0:
            raise ValueError(f"degenerate nominal interval [{a}, {b}]")
    subs = []
    for j, (a, b) in enumerate(nominal):
        half = 0.5 * (b - a)
        if j > 0:
            f = wo if _inside(nominal[j - 1], (lo, hi)) else wi
            left = a - (f - 1.0) * half
        else:
            left = a - (wo - 1.0) * half
        if j < len(nominal) - 1:
            f = wo if _inside(nominal[j + 1], (lo, hi)) else wi
            right = b + (f - 1.0) * half
        else:
            right = b + (wo - 1.0) * half
        subs.append(Subdomain(j, max(left, t0), min(right, t1), 0.5 * (left + right),
                              0.5 * (right - left), (a, b)))
    return Decomposition((t0, t1), (lo, hi), float(wo), float(wi), subs,
                         np.ones(n_species), np.zeros(n_species))


def single_subdomain(domain, n_species: int = 1) -> Decomposition:
    """One subdomain spanning the domain; its normalised window is identically one."""
    t0, t1 = float(domain[0]), float(domain[1])
    width = t1 - t0
    sub = Subdomain(0, t0, t1, 0.5 * (t0 + t1), width, (t0, t1))
    return Decomposition((t0, t1), (t0, t1), 1.0, 1.0, [sub], np.ones(n_species), np.zeros(n_species))


def window(sub: Subdomain, x):
    """Raw cosine-squared window, zero outside ``[lo, hi]``."""
    return window_with_derivative(sub, x)[0]


def window_with_derivative(sub: Subdomain, x):
    x = np.asarray(x, dtype=float)
    inside = (x >= sub.lo) & (x <= sub.hi)
    arg = np.pi * (x - sub.mu) / sub.sigma
    c = 1.0 + np.cos(arg)
    w = np.where(inside, 0.25 * c * c, 0.0)
    dw = np.where(inside, -0.5 * c * np.sin(arg) * np.pi / sub.sigma, 0.0)
    return w, dw


def normalized_windows(dec: Decomposition, x, derivative: bool = False):
    """Windows divided by their sum, shape ``(len(x), nsub)``; optionally with d/dx."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    raw = [window_with_derivative(s, x) for s in dec.subdomains]
    W = np.stack([r[0] for r in raw], axis=1)
    dW = np.stack([r[1] for r in raw], axis=1)
    S = W.sum(axis=1, keepdims=True)
    if np.any(S <= 0):
        bad = x[np.flatnonzero(S[:, 0] <= 0)[0]]
        raise CoverageError(f"no subdomain window is active at x={bad}")
    w = W / S
    if not derivative:
        return w
    dS = dW.sum(axis=1, keepdims=True)
    return w, (dW - w * dS) / S


class FbpinnAnsatz:
    method = "fbpinn"

    def __init__(self, dec: Decomposition, x0):
        self.dec = dec
        self.x0 = np.asarray(x0, dtype=float).reshape(-1)
        if dec.unnorm_scale.shape != self.x0.shape:
            raise ValueError("unnormalisation scale must have one entry per species")
        self.domain = dec.domain

    @property
    def n_out(self) -> int:
        return self.x0.shape[0]

    def init_nets(self, hidden, seed) -> list[Mlp]:
        return [init_mlp((1, *hidden, self.n_out), seed=[seed, j]) for j in range(self.dec.nsub)]

    def prepare(self, t) -> dict:
        t = np.asarray(t, dtype=float).reshape(-1)
        w, dw = normalized_windows(self.dec, t, derivative=True)
        parts = []
        for j, s in enumerate(self.dec.subdomains):
            idx = np.flatnonzero((t >= s.lo) & (t <= s.hi))
            parts.append(dict(
                idx=idx,
                z=(2.0 * (t[idx] - s.lo) / (s.hi - s.lo) - 1.0)[:, None],
                dz=2.0 / (s.hi - s.lo),
                w=w[idx, j:j + 1],
                dw=dw[idx, j:j + 1],
            ))
        rho, drho = ramp(t, self.domain[0])
        return dict(t=t, parts=parts, rho=rho[:, None], drho=drho[:, None])

    def evaluate(self, nets, batch):
        n = batch["t"].shape[0]
        N = np.zeros((n, self.n_out))
        dN = np.zeros((n, self.n_out))
        scale, shift = self.dec.unnorm_scale, self.dec.unnorm_shift
        caches = []
        for net, p in zip(nets, batch["parts"]):
            y, dy, cache = tape(net, p["z"], p["dz"])
            out = scale * y + shift
            N[p["idx"]] += p["w"] * out
            dN[p["idx"]] += p["dw"] * out + p["w"] * (scale * dy)
            caches.append(cache)
        u = self.x0 + batch["rho"] * N
        du = batch["drho"] * N + batch["rho"] * dN
        return u, du, caches

    def backward(self, nets, caches, batch, gu, gdu, grads) -> None:
        gN = batch["rho"] * gu + batch["drho"] * gdu
        gdN = batch["rho"] * gdu
        scale = self.dec.unnorm_scale
        for net, cache, p, g in zip(nets, caches, batch["parts"], grads):
            gNj, gdNj = gN[p["idx"]], gdN[p["idx"]]
            backprop(net, cache, scale * (p["w"] * gNj + p["dw"] * gdNj),
                     scale * (p["w"] * gdNj), g)

    def solution(self, pv):
        nets = pv.nets()

        def f(t):
            u, du, _ = self.evaluate(nets, self.prepare(t))
            return u, du
        return f

    def geometry(self) -> dict:
        return dict(method=self.method, domain=list(self.domain), x0=self.x0.tolist(),
                    decomposition=self.dec.to_json())


def data_scale(dataset, x0) -> np.ndarray:
    """Per-species max |data - x0|, falling back to 1 with no data or no departure.

    The networks sit inside the hard constraint, so what they represent is the
    departure from the initial state, not the state itself.
    """
    x0 = np.asarray(x0, dtype=float).reshape(-1)
    if dataset is None or len(dataset) == 0:
        return np.ones_like(x0)
    m = np.max(np.abs(dataset.values - x0), axis=0)
    return np.where(m > 0, m, 1.0)


def train_fbpinn(config: TrainingConfig, dataset, model, callback=None, decomposition=None):
    if decomposition is None:
        decomposition = build_decomposition(config.domain, dataset.window, config.nsub,
                                            config.wo, config.wi, model.n_species)
        decomposition = decomposition.with_unnorm(data_scale(dataset, model.x0))
    weights = replace(config.weights, lambda_param=config.fbpinn_lambda_param)
    return fit(FbpinnAnsatz(decomposition, model.x0), config, dataset, model, weights, callback)


def ansatz_from_geometry(geometry: dict):
    """Rebuild the ansatz recorded in a :class:`TrainReport`."""
    from .pinn import PinnAnsatz
    if geometry["method"] == "pinn":
        return PinnAnsatz(geometry["domain"], geometry["x0"], geometry.get("output_scale"))
    return FbpinnAnsatz(Decomposition.from_json(geometry["decomposition"]), geometry["x0"])


__all__ = ["Subdomain", "Decomposition", "CoverageError", "build_decomposition", "single_subdomain",
           "window", "window_with_derivative", "normalized_windows", "FbpinnAnsatz",
           "train_fbpinn", "data_scale", "ansatz_from_geometry", "LossWeights"]
