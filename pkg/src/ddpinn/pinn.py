"""
Vanilla PINN for ODE inverse problems.

The network output is wrapped in a hard initial-condition constraint

    u(t) = x0 + (1 - exp(-(t - t0))) * scale * net(z(t))

with ``z`` the affine map of the time domain onto [-1, 1]. Training minimises

    L = lambda_phy * sum_k mean_i (du_k/dt - f_k(u; P))^2      (collocation points)
      + lambda_data * sum_k mean_i (u_k - data_k)^2            (data points)
      + lambda_param * sum_p max(0, lo_p - P_p, P_p - hi_p)^2

jointly over network weights and the ODE parameters ``P`` with full-batch Adam.
:class:`InverseLoss` and :func:`train` are shared with the FBPINN trainer; the
two methods differ only in the *ansatz* object that maps weights to ``u`` and
``du/dt``.
"""
from __future__ import annotations

import logging
import time
from dataclasses import asdict, dataclass, field

import numpy as np

from .netcore import (Mlp, NonFiniteError, ParamVector, adam_init, adam_step, backprop,
                      init_mlp, tape)

log = logging.getLogger(__name__)


class TrainingDiverged(NonFiniteError):
    def __init__(self, message: str, epoch: int, checkpoint: ParamVector):
        super().__init__(message)
        self.epoch = epoch
        self.checkpoint = checkpoint


@dataclass(frozen=True)
class LossWeights:
    lambda_phy: float = 1.0
    lambda_data: float = 1.0
    lambda_param: float = 0.0

    def __post_init__(self):
        for k, v in asdict(self).items():
            if not v >= 0:
                raise ValueError(f"{k} must be >= 0, got {v}")


@dataclass
class TrainingConfig:
    domain: tuple[float, float] = (0.0, 24.0)
    n_col: int = 200
    epochs: int = 50000
    lr: float = 1e-3
    hidden: tuple[int, ...] = (5, 5, 5)
    seed: int = 0
    weights: LossWeights = field(default_factory=LossWeights)
    param_init: float = 0.5
    bounds: tuple[float, float] = (0.0, 10.0)
    # vanilla PINN only: output scale applied to the raw network
    output_scale: tuple[float, ...] | None = None
    # FBPINN only
    nsub: int = 2
    wo: float = 1.9
    wi: float = 1.0005
    fbpinn_lambda_param: float = 1e6

    def __post_init__(self):
        self.domain = (float(self.domain[0]), float(self.domain[1]))
        self.hidden = tuple(int(h) for h in self.hidden)
        if self.n_col < 1 or self.epochs < 1:
            raise ValueError("n_col and epochs must be >= 1")
        if not self.domain[1] > self.domain[0]:
            raise ValueError(f"empty domain {self.domain}")
        if self.bounds[0] > self.bounds[1]:
            raise ValueError(f"invalid bounds {self.bounds}")

    def collocation_points(self) -> np.ndarray:
        return np.linspace(self.domain[0], self.domain[1], self.n_col)


def ramp(t, t0: float = 0.0):
    """``rho(t) = 1 - exp(-(t - t0))`` and its derivative."""
    e = np.exp(-(np.asarray(t, dtype=float) - t0))
    return 1.0 - e, e


def apply_hard_constraint(raw, t, x0, raw_dt=None, t0: float = 0.0):
    """Constrained output ``x0 + rho(t) * raw``; with ``raw_dt`` also returns its time derivative."""
    t = np.asarray(t, dtype=float)
    rho, drho = ramp(t, t0)
    raw = np.asarray(raw, dtype=float)
    if raw.ndim == 2:
        rho, drho = rho.reshape(-1, 1), drho.reshape(-1, 1)
    u = x0 + rho * raw
    if raw_dt is None:
        return u
    return u, drho * raw + rho * np.asarray(raw_dt, dtype=float)


def _sq_mean_sum(res: np.ndarray) -> float:
    # sum over species of the per-species mean square
    return float(np.sum(res * res)) / res.shape[0]


def pde_loss(solution, t_col, model, params, lambda_phy: float = 1.0) -> float:
    """Weighted ODE residual of ``solution`` (callable ``t -> (u, du/dt)``) at collocation points."""
    if lambda_phy == 0:
        return 0.0
    u, du = solution(np.asarray(t_col, dtype=float))
    return lambda_phy * _sq_mean_sum(du - model.rhs(u, np.asarray(params, dtype=float)))


def data_loss(solution, dataset, lambda_data: float = 1.0) -> float:
    if len(dataset) == 0:
        raise ValueError("data loss needs a non-empty dataset")
    u = solution(dataset.t)
    if isinstance(u, tuple):
        u = u[0]
    return lambda_data * _sq_mean_sum(np.asarray(u).reshape(dataset.values.shape) - dataset.values)


def _hinge(params, bounds):
    params = np.asarray(params, dtype=float)
    bounds = np.asarray(bounds, dtype=float).reshape(-1, 2)
    below = bounds[:, 0] - params
    above = params - bounds[:, 1]
    return np.maximum(0.0, np.maximum(below, above)), below > above


def param_loss(params, bounds, lambda_param: float) -> float:
    h, _ = _hinge(params, bounds)
    return lambda_param * float(np.sum(h * h))


class PinnAnsatz:
    """Single network over the whole time domain, with hard initial condition."""

    method = "pinn"

    def __init__(self, domain, x0, output_scale=None):
        self.domain = (float(domain[0]), float(domain[1]))
        self.x0 = np.asarray(x0, dtype=float).reshape(-1)
        k = self.x0.shape[0]
        self.scale = np.ones(k) if output_scale is None else np.asarray(output_scale, float).reshape(k)

    @property
    def n_out(self) -> int:
        return self.x0.shape[0]

    def init_nets(self, hidden, seed) -> list[Mlp]:
        return [init_mlp((1, *hidden, self.n_out), seed=[seed, 0])]

    def prepare(self, t) -> dict:
        t = np.asarray(t, dtype=float).reshape(-1)
        lo, hi = self.domain
        rho, drho = ramp(t, lo)
        return dict(t=t, z=(2.0 * (t - lo) / (hi - lo) - 1.0)[:, None], dz=2.0 / (hi - lo),
                    rho=rho[:, None], drho=drho[:, None])

    def evaluate(self, nets, batch):
        y, dy, cache = tape(nets[0], batch["z"], batch["dz"])
        N, dN = self.scale * y, self.scale * dy
        u = self.x0 + batch["rho"] * N
        du = batch["drho"] * N + batch["rho"] * dN
        return u, du, (cache, N)

    def backward(self, nets, state, batch, gu, gdu, grads) -> None:
        cache, N = state
        gN = batch["rho"] * gu + batch["drho"] * gdu
        gdN = batch["rho"] * gdu
        backprop(nets[0], cache, self.scale * gN, self.scale * gdN, grads[0])

    def solution(self, pv: ParamVector):
        """Callable ``t -> (u, du/dt)`` for a fixed parameter vector."""
        nets = pv.nets()

        def f(t):
            u, du, _ = self.evaluate(nets, self.prepare(t))
            return u, du
        return f

    def geometry(self) -> dict:
        return dict(method=self.method, domain=list(self.domain), x0=self.x0.tolist(),
                    output_scale=self.scale.tolist())


class InverseLoss:
    """Total inverse-problem loss with exact gradient over a fixed training batch."""

    def __init__(self, ansatz, model, t_col, dataset, weights: LossWeights, bounds):
        self.ansatz = ansatz
        self.model = model
        self.weights = weights
        self.bounds = np.asarray(bounds, dtype=float).reshape(-1, 2)
        self.n_col = len(t_col)
        self.data = None if dataset is None else np.asarray(dataset.values, dtype=float)
        if self.data is not None and self.data.shape[1] != model.n_species:
            raise ValueError(f"dataset has {self.data.shape[1]} species, model {model.name} "
                             f"has {model.n_species}")
        t_data = np.zeros(0) if dataset is None else dataset.t
        self.batch = ansatz.prepare(np.concatenate([np.asarray(t_col, float), t_data]))

    def _forward(self, pv: ParamVector):
        nets = pv.nets()
        u, du, state = self.ansatz.evaluate(nets, self.batch)
        P = pv.inverse
        nc = self.n_col
        res = du[:nc] - self.model.rhs(u[:nc], P)
        mis = u[nc:] - self.data if self.data is not None else None
        w = self.weights
        terms = dict(
            pde=w.lambda_phy * _sq_mean_sum(res) if w.lambda_phy else 0.0,
            data=w.lambda_data * _sq_mean_sum(mis) if (mis is not None and w.lambda_data) else 0.0,
            param=param_loss(P, self.bounds, w.lambda_param) if w.lambda_param else 0.0,
        )
        terms["total"] = terms["pde"] + terms["data"] + terms["param"]
        return terms, (nets, u, state, res, mis)

    def terms(self, pv: ParamVector) -> dict:
        return self._forward(pv)[0]

    def __call__(self, pv: ParamVector) -> float:
        return self._forward(pv)[0]["total"]

    def value_and_grad(self, pv: ParamVector):
        terms, grad = self.terms_and_grad(pv)
        return terms["total"], grad

    def terms_and_grad(self, pv: ParamVector):
        terms, (nets, u, state, res, mis) = self._forward(pv)
        w, nc, P = self.weights, self.n_col, pv.inverse
        grad = np.zeros_like(pv.values)
        gu = np.zeros_like(u)
        gdu = np.zeros_like(u)
        gP = np.zeros_like(P)
        if w.lambda_phy:
            gr = (2.0 * w.lambda_phy / nc) * res
            gdu[:nc] = gr
            gu[:nc] = -np.einsum("ia,iab->ib", gr, self.model.jac_state(u[:nc], P))
            gP -= np.einsum("ia,iap->p", gr, self.model.jac_params(u[:nc], P))
        if mis is not None and w.lambda_data:
            gu[nc:] = (2.0 * w.lambda_data / mis.shape[0]) * mis
        if w.lambda_param:
            h, low = _hinge(P, self.bounds)
            gP += 2.0 * w.lambda_param * h * np.where(low, -1.0, 1.0)
        self.ansatz.backward(nets, state, self.batch, gu, gdu, pv.nets(grad))
        grad[pv.n_theta:] = gP
        return terms, grad


@dataclass
class TrainReport:
    method: str
    model: str
    setting: str | None
    window: tuple[float, float]
    noise_level: float
    seed: int
    learned: dict
    truth: dict
    history: dict  # total/pde/data/param -> per-epoch arrays
    final_loss: float
    checkpoint: ParamVector
    geometry: dict
    wall_clock: float = 0.0
    config: dict = field(default_factory=dict)

    @property
    def abs_errors(self) -> dict:
        return {k: abs(self.learned[k] - self.truth[k]) for k in self.learned}

    def to_json(self) -> dict:
        return dict(
            method=self.method, model=self.model, setting=self.setting,
            window=list(self.window), noise_level=self.noise_level, seed=self.seed,
            learned=self.learned, truth=self.truth, final_loss=self.final_loss,
            history={k: [float(x) for x in v] for k, v in self.history.items()},
            geometry=self.geometry, wall_clock=self.wall_clock, config=self.config,
        )

    @classmethod
    def from_json(cls, doc: dict, checkpoint: ParamVector) -> "TrainReport":
        return cls(doc["method"], doc["model"], doc.get("setting"), tuple(doc["window"]),
                   doc["noise_level"], doc["seed"], doc["learned"], doc["truth"],
                   {k: np.asarray(v) for k, v in doc["history"].items()}, doc["final_loss"],
                   checkpoint, doc["geometry"], doc.get("wall_clock", 0.0), doc.get("config", {}))


def train(loss: InverseLoss, pv: ParamVector, epochs: int, lr: float = 1e-3, callback=None):
    """Full-batch Adam on ``loss``; returns ``(final ParamVector, history dict)``.

    The history row for epoch ``e`` is the loss *before* the ``e``-th update.
    """
    hist = {k: np.empty(epochs) for k in ("total", "pde", "data", "param")}
    state = adam_init(pv, lr=lr)
    for epoch in range(epochs):
        terms, grad = loss.terms_and_grad(pv)
        if not (np.isfinite(terms["total"]) and np.all(np.isfinite(grad))):
            raise TrainingDiverged(f"non-finite loss or gradient at epoch {epoch}", epoch, pv)
        for k in hist:
            hist[k][epoch] = terms[k]
        if callback is not None:
            callback(epoch, pv)
        state, pv = adam_step(state, pv, grad)
        if epoch % 10000 == 0:
            log.debug("epoch %d loss %.3e", epoch, terms["total"])
    return pv, hist


def initial_params(ansatz, model, config: TrainingConfig) -> ParamVector:
    nets = ansatz.init_nets(config.hidden, config.seed)
    n = len(model.param_names)
    return ParamVector.from_nets(nets, np.full(n, config.param_init), model.param_names,
                                 np.tile(config.bounds, (n, 1)))


def fit(ansatz, config: TrainingConfig, dataset, model, weights: LossWeights, callback=None) -> TrainReport:
    """Train ``ansatz`` on ``dataset`` and package the result."""
    loss = InverseLoss(ansatz, model, config.collocation_points(), dataset, weights,
                       np.tile(config.bounds, (len(model.param_names), 1)))
    pv = initial_params(ansatz, model, config)
    start = time.perf_counter()
    pv, hist = train(loss, pv, config.epochs, config.lr, callback)
    wall = time.perf_counter() - start
    final = loss(pv)
    if not np.isfinite(final):
        raise TrainingDiverged("non-finite loss after the last update", config.epochs, pv)
    return TrainReport(
        method=ansatz.method, model=model.name, setting=model.setting, window=dataset.window,
        noise_level=dataset.noise_level, seed=config.seed, learned=pv.learned(),
        truth={n: float(v) for n, v in zip(model.param_names, model.true_params)},
        history=hist, final_loss=final, checkpoint=pv, geometry=ansatz.geometry(),
        wall_clock=wall,
    )


def train_pinn(config: TrainingConfig, dataset, model, callback=None) -> TrainReport:
    """Vanilla PINN: no parameter-bound penalty unless ``config.weights`` sets one."""
    ansatz = PinnAnsatz(config.domain, model.x0, config.output_scale)
    return fit(ansatz, config, dataset, model, config.weights, callback)
