"""
Post-training evaluation: solution error, learned-parameter tables, Lyapunov
energy fields, 2-D loss landscapes and noise sweeps.
"""
from __future__ import annotations

import csv
import logging
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from . import datagen, models
from .fbpinn import train_fbpinn
from .pinn import TrainingConfig, TrainingDiverged, train_pinn

log = logging.getLogger(__name__)

TRAINERS = {"pinn": train_pinn, "fbpinn": train_fbpinn}


@dataclass
class MseReport:
    method: str
    model: str
    setting: str | None
    window: tuple[float, float]
    noise_level: float
    seed: int
    mse: tuple[float, ...]
    total: float
    status: str = "ok"

    def row(self, species=("u", "v")) -> dict:
        out = dict(method=self.method, model=self.model, setting=self.setting or "",
                   window=f"[{self.window[0]:g},{self.window[1]:g}]",
                   noise_level=self.noise_level, seed=self.seed)
        for name, m in zip(species, self.mse):
            out[f"mse_{name}"] = m
        out["mse_total"] = self.total
        out["status"] = self.status
        return out


def evaluation_grid(domain=(0.0, 24.0), n: int = 500) -> np.ndarray:
    return np.linspace(domain[0], domain[1], n)


def solution_mse(predict, reference: datagen.Trajectory, eval_t=None, *, method="", model="",
                 setting=None, window=(0.0, 0.0), noise_level=0.0, seed=0) -> MseReport:
    """Mean squared error of ``predict(t) -> (n, k)`` against the reference trajectory."""
    t = evaluation_grid(reference.span) if eval_t is None else np.asarray(eval_t, dtype=float)
    pred = predict(t)
    if isinstance(pred, tuple):
        pred = pred[0]
    err = np.asarray(pred, dtype=float).reshape(t.shape[0], -1) - reference.at(t)
    mse = tuple(float(x) for x in np.mean(err * err, axis=0))
    return MseReport(method, model, setting, tuple(window), float(noise_level), int(seed),
                     mse, float(sum(mse)))


def report_mse(report, reference: datagen.Trajectory, n_eval: int = 500) -> MseReport:
    from .fbpinn import ansatz_from_geometry
    ansatz = ansatz_from_geometry(report.geometry)
    sol = ansatz.solution(report.checkpoint)
    return solution_mse(sol, reference, evaluation_grid(ansatz.domain, n_eval),
                        method=report.method, model=report.model, setting=report.setting,
                        window=report.window, noise_level=report.noise_level, seed=report.seed)


def energy_field(p: models.CompetitionParams, u_grid, v_grid) -> np.ndarray:
    """Lyapunov energy on the tensor grid; entry ``[i, j]`` is at ``(u_grid[i], v_grid[j])``."""
    u_grid, v_grid = np.asarray(u_grid, float), np.asarray(v_grid, float)
    if u_grid.size == 0 or v_grid.size == 0:
        raise ValueError("energy grids must be non-empty")
    U, V = np.meshgrid(u_grid, v_grid, indexing="ij")
    return models.lyapunov(U, V, p)


@dataclass
class LandscapeGrid:
    alphas: np.ndarray
    betas: np.ndarray
    losses: np.ndarray  # [i, j] at (alphas[i], betas[j])
    seed: int
    center_loss: float

    @property
    def finite(self) -> np.ndarray:
        return np.isfinite(self.losses)

    def rows(self) -> list[dict]:
        return [dict(alpha=float(a), beta=float(b), loss=float(self.losses[i, j]),
                     finite=int(np.isfinite(self.losses[i, j])))
                for i, a in enumerate(self.alphas) for j, b in enumerate(self.betas)]


def normalized_direction(checkpoint, rng: np.random.Generator) -> np.ndarray:
    """Gaussian direction over network weights, rescaled layer by layer to the layer's norm.

    Inverse ODE parameters get a zero component.
    """
    d = np.zeros_like(checkpoint.values)
    for sl in checkpoint.layer_slices():
        g = rng.standard_normal(sl.stop - sl.start)
        d[sl] = g * (np.linalg.norm(checkpoint.values[sl]) / np.linalg.norm(g))
    return d


def loss_landscape(checkpoint, loss_fn, resolution: int = 41, span: float = 1.0,
                   seed: int = 0) -> LandscapeGrid:
    rng = np.random.default_rng(seed)
    delta = normalized_direction(checkpoint, rng)
    eta = normalized_direction(checkpoint, rng)
    alphas = np.linspace(-span, span, resolution)
    if resolution % 2:
        alphas[resolution // 2] = 0.0
    betas = alphas.copy()
    losses = np.empty((resolution, resolution))
    base = checkpoint.values
    for i, a in enumerate(alphas):
        for j, b in enumerate(betas):
            try:
                with np.errstate(all="ignore"):
                    val = loss_fn(checkpoint.with_values(base + a * delta + b * eta))
            except (FloatingPointError, ValueError, OverflowError):
                val = np.nan
            losses[i, j] = val if np.isfinite(val) else np.nan
    n_bad = int(np.sum(~np.isfinite(losses)))
    if n_bad:
        log.warning("%d landscape cells are not finite", n_bad)
    return LandscapeGrid(alphas, betas, losses, seed, float(loss_fn(checkpoint)))


def noise_sweep(model: models.OdeModel, config: TrainingConfig, window, levels, seeds,
                n_data: int = 100, h: float = 0.01, methods=("pinn", "fbpinn"),
                n_eval: int = 500, on_result=None) -> list[MseReport]:
    """Retrain every method for each (noise level, seed) and record solution MSE.

    Diverged runs are kept as rows with ``status='diverged'`` and NaN errors.
    """
    if len(levels) < 1:
        raise ValueError("noise sweep needs at least one level")
    traj = datagen.simulate(model, config.domain, h)
    out = []
    for level in levels:
        for seed in seeds:
            ds = datagen.sample_dataset(traj, window, n_data, level, seed, model.species)
            cfg = replace(config, seed=int(seed))
            for method in methods:
                try:
                    rep = TRAINERS[method](cfg, ds, model)
                    mse = report_mse(rep, traj, n_eval)
                except TrainingDiverged as exc:
                    log.warning("%s diverged at level %g seed %d: %s", method, level, seed, exc)
                    mse = MseReport(method, model.name, model.setting, tuple(window), float(level),
                                    int(seed), (np.nan,) * model.n_species, np.nan, "diverged")
                    rep = None
                out.append(mse)
                if on_result is not None:
                    on_result(mse, rep)
    return out


def median_by_level(results: list[MseReport]) -> dict[tuple[str, float], float]:
    groups: dict[tuple[str, float], list[float]] = {}
    for r in results:
        groups.setdefault((r.method, r.noise_level), []).append(r.total)
    return {k: float(np.nanmedian(v)) for k, v in groups.items()}


def parameter_table(reports) -> list[dict]:
    if not reports:
        raise ValueError("parameter table needs at least one report")
    rows = []
    for rep in reports:
        row = dict(model=rep.model, setting=rep.setting or "", method=rep.method,
                   window=f"[{rep.window[0]:g},{rep.window[1]:g}]", noise_level=rep.noise_level,
                   seed=rep.seed)
        for name, value in rep.learned.items():
            row[name] = value
            row[f"{name}_true"] = rep.truth[name]
            row[f"{name}_abs_err"] = abs(value - rep.truth[name])
        rows.append(row)
    return rows


def saturated_growth_table(reports) -> dict[str, dict[str, float]]:
    """Learned ``C`` pivoted method x window, mirroring the two-by-three summary layout."""
    table: dict[str, dict[str, float]] = {}
    for rep in reports:
        if rep.model != "saturated_growth":
            continue
        table.setdefault(rep.method, {})[f"[{rep.window[0]:g},{rep.window[1]:g}]"] = rep.learned["C"]
    return table


def write_csv(path, rows: list[dict]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fields: list[str] = []
    for r in rows:
        fields.extend(k for k in r if k not in fields)
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=fields, lineterminator="\n")
        w.writeheader()
        for r in rows:
            w.writerow({k: (repr(v) if isinstance(v, float) else v) for k, v in r.items()})
    return path


def mse_rows(results: list[MseReport], species=("u", "v")) -> list[dict]:
    return [r.row(species) for r in results]


__all__ = ["MseReport", "LandscapeGrid", "solution_mse", "report_mse", "energy_field",
           "normalized_direction", "loss_landscape", "noise_sweep", "median_by_level",
           "parameter_table", "saturated_growth_table", "write_csv", "mse_rows"]
