"""
Test ODE systems: saturated growth and two-species Lotka-Volterra competition.

Each system is exposed twice: as plain scalar functions (``saturated_growth_rhs``,
``competition_rhs``) and wrapped in an :class:`OdeModel`, the batched form the
trainers consume. ``OdeModel`` also carries the state and parameter Jacobians
needed to backpropagate an ODE residual into the network and into the unknown
parameters.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

SETTINGS = ("coexistence", "survival")

# r, a1, a2, b1, b2 for the two competition regimes
COMPETITION_TABLE = {
    "coexistence": dict(r=0.5, a1=0.7, a2=0.3, b1=0.3, b2=0.6),
    "survival": dict(r=0.5, a1=0.3, a2=0.6, b1=0.7, b2=0.3),
}
COMPETITION_PARAM_NAMES = ("r", "a1", "a2", "b1", "b2")


class DegenerateSystemWarning(UserWarning):
    """The nullcline system is singular, so no coexistence state is reported."""


@dataclass(frozen=True)
class SaturatedGrowthParams:
    C: float = 1.0
    u0: float = 0.01

    def __post_init__(self):
        if not self.C > 0 or not self.u0 > 0:
            raise ValueError(f"C and u0 must be positive, got C={self.C}, u0={self.u0}")


@dataclass(frozen=True)
class CompetitionParams:
    r: float
    a1: float
    a2: float
    b1: float
    b2: float
    u0: float = 2.0
    v0: float = 1.0

    def __post_init__(self):
        for name in ("r", "a1", "a2", "b1", "b2", "u0", "v0"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive, got {getattr(self, name)}")

    @classmethod
    def from_setting(cls, setting: str, u0: float = 2.0, v0: float = 1.0) -> "CompetitionParams":
        if setting not in COMPETITION_TABLE:
            raise ValueError(f"unknown setting {setting!r}, expected one of {SETTINGS}")
        return cls(**COMPETITION_TABLE[setting], u0=u0, v0=v0)

    def rates(self) -> np.ndarray:
        return np.array([self.r, self.a1, self.a2, self.b1, self.b2])


@dataclass(frozen=True)
class Equilibrium:
    kind: str  # coexistence | single-survival-u | single-survival-v | trivial
    state: tuple[float, ...]


def saturated_growth_rhs(u, p: SaturatedGrowthParams):
    return u * (p.C - u)


def competition_rhs(state, p: CompetitionParams):
    u, v = state
    return (u * (1.0 - p.a1 * u - p.a2 * v), p.r * v * (1.0 - p.b1 * u - p.b2 * v))


def stationary_states(p: CompetitionParams) -> list[Equilibrium]:
    """Trivial, both single-survival states and, when it is positive, coexistence.

    The coexistence state solves ``a1 u + a2 v = 1, b1 u + b2 v = 1``.
    """
    states = [
        Equilibrium("trivial", (0.0, 0.0)),
        Equilibrium("single-survival-u", (1.0 / p.a1, 0.0)),
        Equilibrium("single-survival-v", (0.0, 1.0 / p.b2)),
    ]
    det = p.a1 * p.b2 - p.a2 * p.b1
    if abs(det) <= 1e-14 * max(abs(p.a1 * p.b2), abs(p.a2 * p.b1)):
        warnings.warn(f"singular nullcline system (det={det:g}); coexistence omitted",
                      DegenerateSystemWarning, stacklevel=2)
        return states
    u = (p.b2 - p.a2) / det
    v = (p.a1 - p.b1) / det
    if u > 0 and v > 0:
        states.append(Equilibrium("coexistence", (u, v)))
    return states


def lyapunov(u, v, p: CompetitionParams):
    a1, a2, b1, b2, r = p.a1, p.a2, p.b1, p.b2, p.r
    return (-a1 * b2 * r * (b1 * u + a2 * v)
            + a1 * a2 * b1 * b2 * r * u * v
            + 0.5 * r * a1 * b2 * (a1 * b1 * u**2 + a2 * b2 * v**2))


def lyapunov_gradient(u, v, p: CompetitionParams):
    a1, a2, b1, b2, r = p.a1, p.a2, p.b1, p.b2, p.r
    return (a1 * b1 * b2 * r * (a1 * u + a2 * v - 1.0),
            a1 * a2 * b2 * r * (b1 * u + b2 * v - 1.0))


@dataclass
class OdeModel:
    """Batched autonomous ODE system with unknown parameters.

    ``rhs(x, P)`` maps states of shape ``(n, k)`` to derivatives ``(n, k)``;
    ``jac_state`` returns ``(n, k, k)`` with entry ``[i, a, b] = d f_a / d x_b``
    and ``jac_params`` returns ``(n, k, n_params)``.
    """

    name: str
    species: tuple[str, ...]
    param_names: tuple[str, ...]
    true_params: np.ndarray
    x0: np.ndarray
    rhs: Callable[[np.ndarray, np.ndarray], np.ndarray]
    jac_state: Callable[[np.ndarray, np.ndarray], np.ndarray]
    jac_params: Callable[[np.ndarray, np.ndarray], np.ndarray]
    setting: str | None = None
    equilibria: list[Equilibrium] = field(default_factory=list)

    @property
    def n_species(self) -> int:
        return len(self.species)

    def time_rhs(self, params=None):
        """Adapter for integrators: ``f(t, y)`` on a single state vector."""
        P = self.true_params if params is None else np.asarray(params, dtype=float)
        return lambda t, y: self.rhs(y[None, :], P)[0]


def _sg_rhs(x, P):
    return x * (P[0] - x)


def _sg_jac_state(x, P):
    return (P[0] - 2.0 * x)[:, :, None]


def _sg_jac_params(x, P):
    return x[:, :, None]


def _lv_rhs(x, P):
    r, a1, a2, b1, b2 = P
    u, v = x[:, 0], x[:, 1]
    return np.stack([u * (1.0 - a1 * u - a2 * v), r * v * (1.0 - b1 * u - b2 * v)], axis=1)


def _lv_jac_state(x, P):
    r, a1, a2, b1, b2 = P
    u, v = x[:, 0], x[:, 1]
    J = np.empty((x.shape[0], 2, 2))
    J[:, 0, 0] = 1.0 - 2.0 * a1 * u - a2 * v
    J[:, 0, 1] = -a2 * u
    J[:, 1, 0] = -r * b1 * v
    J[:, 1, 1] = r * (1.0 - b1 * u - 2.0 * b2 * v)
    return J


def _lv_jac_params(x, P):
    r, a1, a2, b1, b2 = P
    u, v = x[:, 0], x[:, 1]
    J = np.zeros((x.shape[0], 2, 5))
    J[:, 0, 1] = -u * u
    J[:, 0, 2] = -u * v
    J[:, 1, 0] = v * (1.0 - b1 * u - b2 * v)
    J[:, 1, 3] = -r * u * v
    J[:, 1, 4] = -r * v * v
    return J


def saturated_growth_model(p: SaturatedGrowthParams | None = None) -> OdeModel:
    p = p or SaturatedGrowthParams()
    return OdeModel(
        name="saturated_growth",
        species=("u",),
        param_names=("C",),
        true_params=np.array([p.C]),
        x0=np.array([p.u0]),
        rhs=_sg_rhs,
        jac_state=_sg_jac_state,
        jac_params=_sg_jac_params,
        equilibria=[Equilibrium("trivial", (0.0,)), Equilibrium("carrying-capacity", (p.C,))],
    )


def competition_model(p: CompetitionParams | str = "coexistence") -> OdeModel:
    setting = None
    if isinstance(p, str):
        setting = p
        p = CompetitionParams.from_setting(p)
    return OdeModel(
        name="competition",
        species=("u", "v"),
        param_names=COMPETITION_PARAM_NAMES,
        true_params=p.rates(),
        x0=np.array([p.u0, p.v0]),
        rhs=_lv_rhs,
        jac_state=_lv_jac_state,
        jac_params=_lv_jac_params,
        setting=setting,
        equilibria=stationary_states(p),
    )


def make_model(name: str, setting: str | None = None, x0=None) -> OdeModel:
    """Build a model from its config identity (``name``, ``setting``, optional initial state)."""
    if name == "saturated_growth":
        p = SaturatedGrowthParams() if x0 is None else SaturatedGrowthParams(u0=float(x0[0]))
        return saturated_growth_model(p)
    if name == "competition":
        setting = setting or "coexistence"
        kw = {} if x0 is None else dict(u0=float(x0[0]), v0=float(x0[1]))
        model = competition_model(CompetitionParams.from_setting(setting, **kw))
        model.setting = setting
        return model
    raise ValueError(f"unknown model {name!r}")


def competition_params_from_vector(P, template: CompetitionParams | None = None) -> CompetitionParams:
    """Rebuild ``CompetitionParams`` from an ``(r, a1, a2, b1, b2)`` vector.

    Learned rates can leave the positive orthant; they are clipped to a tiny
    positive value so the dataclass invariants hold for plotting.
    """
    r, a1, a2, b1, b2 = (max(float(x), 1e-12) for x in P)
    t = template or CompetitionParams.from_setting("coexistence")
    return CompetitionParams(r=r, a1=a1, a2=a2, b1=b1, b2=b2, u0=t.u0, v0=t.v0)
