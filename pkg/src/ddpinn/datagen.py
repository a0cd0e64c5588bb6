"""
Ground-truth trajectories and noisy training datasets.

Trajectories come from a fixed-step classical RK4 integrator. Datasets are
equispaced samples inside a time window, linearly interpolated from the dense
trajectory, with additive Gaussian noise whose per-species std is
``noise_level * std(clean signal in the window)``.

On disk a dataset is a CSV (``t,u`` or ``t,u,v``) plus a sidecar JSON with the
window, noise level and seed.
"""
from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np


class IntegrationError(ArithmeticError):
    pass


class DatasetFormatError(ValueError):
    pass


@dataclass
class Trajectory:
    times: np.ndarray
    states: np.ndarray  # (len(times), n_species)

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        self.states = np.asarray(self.states, dtype=float)
        if self.states.ndim == 1:
            self.states = self.states[:, None]
        if self.states.shape[0] != self.times.shape[0]:
            raise ValueError("states row count must match times length")
        if np.any(np.diff(self.times) <= 0):
            raise ValueError("times must be strictly increasing")

    @property
    def span(self) -> tuple[float, float]:
        return float(self.times[0]), float(self.times[-1])

    def at(self, t) -> np.ndarray:
        """Linear interpolation of every species at times ``t``; returns ``(len(t), k)``."""
        t = np.atleast_1d(np.asarray(t, dtype=float))
        lo, hi = self.span
        if t.size and (t.min() < lo or t.max() > hi):
            raise ValueError(f"times outside trajectory span [{lo}, {hi}]")
        return np.stack([np.interp(t, self.times, self.states[:, k])
                         for k in range(self.states.shape[1])], axis=1)


@dataclass
class Dataset:
    t: np.ndarray
    values: np.ndarray  # (nD, n_species)
    window: tuple[float, float]
    noise_level: float = 0.0
    seed: int = 0
    species: tuple[str, ...] = ("u",)

    def __post_init__(self):
        self.t = np.asarray(self.t, dtype=float)
        self.values = np.asarray(self.values, dtype=float)
        if self.values.ndim == 1:
            self.values = self.values[:, None]
        self.window = (float(self.window[0]), float(self.window[1]))
        self.species = tuple(self.species)
        if len(self.species) != self.values.shape[1]:
            raise ValueError("species names do not match value columns")

    def __len__(self):
        return self.t.shape[0]

    def __eq__(self, other):
        if not isinstance(other, Dataset):
            return NotImplemented
        return (np.array_equal(self.t, other.t) and np.array_equal(self.values, other.values)
                and self.window == other.window and self.noise_level == other.noise_level
                and self.seed == other.seed and self.species == other.species)


def time_grid(t0: float, t1: float, h: float) -> np.ndarray:
    """Uniform grid ``t0, t0+h, ...`` ending exactly at ``t1`` (last step may be shorter)."""
    if not h > 0:
        raise ValueError(f"step size must be positive, got {h}")
    if not t1 > t0:
        raise ValueError(f"empty span [{t0}, {t1}]")
    n = int(np.ceil((t1 - t0) / h - 1e-9))
    times = t0 + h * np.arange(n + 1)
    times[-1] = t1
    return times


def integrate_rk4(rhs, y0, t_span, h: float = 0.01) -> Trajectory:
    """Classical fourth-order Runge-Kutta for ``dy/dt = rhs(t, y)``."""
    times = time_grid(float(t_span[0]), float(t_span[1]), h)
    y = np.array(y0, dtype=float).reshape(-1)
    states = np.empty((times.size, y.size))
    states[0] = y
    for i in range(times.size - 1):
        t, dt = times[i], times[i + 1] - times[i]
        k1 = np.asarray(rhs(t, y))
        k2 = np.asarray(rhs(t + 0.5 * dt, y + 0.5 * dt * k1))
        k3 = np.asarray(rhs(t + 0.5 * dt, y + 0.5 * dt * k2))
        k4 = np.asarray(rhs(t + dt, y + dt * k3))
        y = y + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        if not np.all(np.isfinite(y)):
            raise IntegrationError(f"non-finite state at step {i + 1} (t={times[i + 1]:g}): {y}")
        states[i + 1] = y
    return Trajectory(times, states)


def simulate(model, t_span=(0.0, 24.0), h: float = 0.01, params=None) -> Trajectory:
    return integrate_rk4(model.time_rhs(params), model.x0, t_span, h)


def sample_dataset(traj: Trajectory, window, n_data: int, noise_level: float = 0.0,
                   seed: int = 0, species=None) -> Dataset:
    lo, hi = float(window[0]), float(window[1])
    t0, t1 = traj.span
    if lo < t0 or hi > t1 or lo > hi:
        raise ValueError(f"window [{lo}, {hi}] not inside trajectory span [{t0}, {t1}]")
    if n_data < 1:
        raise ValueError(f"n_data must be >= 1, got {n_data}")
    if noise_level < 0:
        raise ValueError(f"noise_level must be >= 0, got {noise_level}")
    t = np.linspace(lo, hi, n_data)
    clean = traj.at(t)
    values = clean
    if noise_level > 0:
        rng = np.random.default_rng(seed)
        sigma = noise_level * clean.std(axis=0)
        values = clean + rng.standard_normal(clean.shape) * sigma
    if species is None:
        species = ("u", "v", "w")[:clean.shape[1]] if clean.shape[1] <= 3 else \
            tuple(f"x{k}" for k in range(clean.shape[1]))
    return Dataset(t, values, (lo, hi), float(noise_level), int(seed), tuple(species))


def _sidecar(path: Path) -> Path:
    return path.with_suffix(".json")


def write_dataset(ds: Dataset, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(("t",) + ds.species)
        for t, row in zip(ds.t, ds.values):
            w.writerow([repr(float(t))] + [repr(float(x)) for x in row])
    meta = dict(window=list(ds.window), noise_level=ds.noise_level, seed=ds.seed,
                species=list(ds.species), n_points=len(ds))
    _sidecar(path).write_text(json.dumps(meta, indent=2) + "\n")
    return path


def read_dataset(path) -> Dataset:
    path = Path(path)
    rows = []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DatasetFormatError(f"{path}: line 1: empty file") from None
        if len(header) < 2 or header[0] != "t":
            raise DatasetFormatError(f"{path}: line 1: header must be 't,<species>...', got {header}")
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(header):
                raise DatasetFormatError(
                    f"{path}: line {lineno}: expected {len(header)} fields, got {len(row)}")
            try:
                rows.append([float(x) for x in row])
            except ValueError as exc:
                raise DatasetFormatError(f"{path}: line {lineno}: {exc}") from None
    if not rows:
        raise DatasetFormatError(f"{path}: no data rows")
    arr = np.array(rows)
    meta_path = _sidecar(path)
    meta = json.loads(meta_path.read_text()) if meta_path.exists() else {}
    window = meta.get("window", (float(arr[:, 0].min()), float(arr[:, 0].max())))
    return Dataset(arr[:, 0], arr[:, 1:], tuple(window), float(meta.get("noise_level", 0.0)),
                   int(meta.get("seed", 0)), tuple(header[1:]))
