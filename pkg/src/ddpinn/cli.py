"""
Command-line entry point.

    ddpinn run CONFIG              generate data, train, analyse, landscape
    ddpinn generate-data CONFIG
    ddpinn train CONFIG [--method pinn|fbpinn]
    ddpinn landscape CONFIG
    ddpinn sweep-noise CONFIG
    ddpinn report DIR

CONFIG is a JSON file or the name of a bundled config (``ddpinn configs`` lists
them). Exit status: 0 success, 2 configuration or missing-artifact error,
3 numerical failure.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from importlib import resources
from pathlib import Path

import numpy as np

from . import analysis, config, datagen, models, svg
from .datagen import IntegrationError
from .fbpinn import FbpinnAnsatz, ansatz_from_geometry, normalized_windows, train_fbpinn
from .netcore import NonFiniteError, ParamVector
from .pinn import InverseLoss, TrainReport, train_pinn

log = logging.getLogger("ddpinn")

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC = 0, 2, 3


class MissingArtifact(RuntimeError):
    pass


def bundled_configs() -> list[str]:
    return sorted(p.name for p in resources.files("ddpinn.configs").iterdir() if p.name.endswith(".json"))


def find_config(name) -> Path:
    path = Path(name)
    if path.exists():
        return path
    candidate = resources.files("ddpinn.configs") / (path.name if path.suffix else f"{path.name}.json")
    if candidate.is_file():
        return Path(str(candidate))
    raise config.ConfigError(f"{name}: no such config file or bundled config")


def load_config(name, seed=None) -> dict:
    cfg = config.load(find_config(name))
    if seed is not None:
        cfg["seed"] = int(seed)
    return cfg


def _model(cfg) -> models.OdeModel:
    return models.make_model(cfg["model"], cfg["setting"], cfg["initial_condition"])


def _json_dump(path: Path, doc) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(doc, indent=1) + "\n")


def _window_label(w) -> str:
    return f"[{w[0]:g},{w[1]:g}]"


# ---------------------------------------------------------------- stages

def generate_data(cfg: dict, root: Path) -> datagen.Dataset:
    lay = config.Layout(root)
    model = _model(cfg)
    traj = datagen.simulate(model, cfg["domain"], cfg["rk4_step"])
    ds = datagen.sample_dataset(traj, cfg["window"], cfg["nD"], cfg["noise_level"], cfg["seed"],
                                model.species)
    _json_dump(lay.config, cfg)
    datagen.write_dataset(ds, lay.dataset)
    meta = json.loads(lay.dataset.with_suffix(".json").read_text())
    meta["config"] = cfg
    _json_dump(lay.dataset.with_suffix(".json"), meta)
    return ds


def _read_dataset(lay: config.Layout) -> datagen.Dataset:
    if not lay.dataset.exists():
        raise MissingArtifact(f"{lay.dataset} not found: run stage generate-data first")
    return datagen.read_dataset(lay.dataset)


def train(cfg: dict, root: Path, methods=None, dataset=None) -> list[TrainReport]:
    lay = config.Layout(root)
    ds = dataset if dataset is not None else _read_dataset(lay)
    model = _model(cfg)
    reports = []
    for method in methods or config.methods(cfg):
        tcfg = config.training_config(cfg, method)
        trainer = train_pinn if method == "pinn" else train_fbpinn
        log.info("training %s on %s (%d epochs)", method, cfg["name"], tcfg.epochs)
        rep = trainer(tcfg, ds, model)
        rep.config = cfg
        save_report(rep, lay)
        log.info("%s learned %s in %.1fs", method, rep.learned, rep.wall_clock)
        reports.append(rep)
    _json_dump(lay.config, cfg)
    return reports


def save_report(rep: TrainReport, lay: config.Layout) -> None:
    _json_dump(lay.report(rep.method), rep.to_json())
    rep.checkpoint.save(lay.checkpoint(rep.method))
    rows = [dict(epoch=e, total=rep.history["total"][e], pde=rep.history["pde"][e],
                 data=rep.history["data"][e], param=rep.history["param"][e])
            for e in range(len(rep.history["total"]))]
    analysis.write_csv(lay.loss_history(rep.method), rows)


def load_report(path: Path) -> TrainReport:
    doc = json.loads(path.read_text())
    ckpt = path.parent / "checkpoint.json"
    if not ckpt.exists():
        raise MissingArtifact(f"{ckpt} not found: run stage train first")
    return TrainReport.from_json(doc, ParamVector.load(ckpt))


def _load_reports(cfg: dict, lay: config.Layout) -> list[TrainReport]:
    out = []
    for method in config.methods(cfg):
        path = lay.report(method)
        if not path.exists():
            raise MissingArtifact(f"{path} not found: run stage train first")
        out.append(load_report(path))
    return out


def analyse(cfg: dict, root: Path, reports: list[TrainReport]) -> None:
    lay = config.Layout(root)
    model = _model(cfg)
    traj = datagen.simulate(model, cfg["domain"], cfg["rk4_step"])
    mses = [analysis.report_mse(r, traj, cfg["mse_points"]) for r in reports]
    analysis.write_csv(root / "mse.csv", analysis.mse_rows(mses, model.species))
    analysis.write_csv(root / "parameters.csv", analysis.parameter_table(reports))
    _plot_solutions(root / "solutions.svg", cfg, model, traj, reports)
    _plot_parameters(root / "parameters.svg", cfg, model, reports)
    series = []
    for r in reports:
        every = max(1, len(r.history["total"]) // 500)
        e = np.arange(0, len(r.history["total"]), every)
        series.append((r.method, e, r.history["total"][e]))
    svg.line_plot(root / "loss_history.svg", series, f"{cfg['name']}: training loss", "epoch",
                  "total loss", logy=True)
    for r in reports:
        if r.method == "fbpinn":
            _plot_windows(root / "windows.svg", ansatz_from_geometry(r.geometry))
    if cfg["model"] == "competition":
        _plot_energy(root, cfg, model, reports)


def _plot_solutions(path, cfg, model, traj, reports):
    t = analysis.evaluation_grid(cfg["domain"], cfg["mse_points"])
    ref = traj.at(t)
    series = [(f"{s} truth", t, ref[:, k]) for k, s in enumerate(model.species)]
    for r in reports:
        u = ansatz_from_geometry(r.geometry).solution(r.checkpoint)(t)[0]
        series += [(f"{s} {r.method}", t, u[:, k], True) for k, s in enumerate(model.species)]
    svg.line_plot(path, series, f"{cfg['name']}: solutions", "t", "population",
                  bands=[tuple(cfg["window"])])


def _plot_parameters(path, cfg, model, reports):
    groups = {"truth": list(model.true_params)}
    for r in reports:
        groups[r.method] = [r.learned[n] for n in model.param_names]
    svg.bar_chart(path, model.param_names, groups, f"{cfg['name']}: learned parameters", "value")


def _plot_windows(path, ansatz: FbpinnAnsatz):
    dec = ansatz.dec
    x = np.linspace(dec.domain[0], dec.domain[1], 481)
    w = normalized_windows(dec, x)
    svg.line_plot(path, [(f"subdomain {j + 1}", x, w[:, j]) for j in range(dec.nsub)],
                  "normalised window functions", "t", "weight", bands=[dec.window])


def _energy_grid(model):
    top = max([max(e.state) for e in model.equilibria] + list(model.x0)) * 1.3
    g = np.linspace(0.0, top, 61)
    return g, g


def _plot_energy(root: Path, cfg, model, reports):
    ug, vg = _energy_grid(model)
    template = models.CompetitionParams.from_setting(cfg["setting"])
    sets = [("truth", template)] + [(r.method, models.competition_params_from_vector(
        [r.learned[n] for n in model.param_names], template)) for r in reports]
    rows = []
    for label, p in sets:
        phi = analysis.energy_field(p, ug, vg)
        marks = [(e.kind, *e.state) for e in models.stationary_states(p) if e.kind == "coexistence"]
        svg.heatmap(root / f"energy_{label}.svg", ug, vg, phi, f"energy, {label} parameters",
                    "u", "v", n_levels=14, markers=marks)
        rows += [dict(parameters=label, u=float(u), v=float(v), phi=float(phi[i, j]))
                 for i, u in enumerate(ug) for j, v in enumerate(vg)]
    analysis.write_csv(root / "energy.csv", rows)


def landscape(cfg: dict, root: Path, reports=None) -> dict:
    lay = config.Layout(root)
    ds = _read_dataset(lay)
    reports = reports or _load_reports(cfg, lay)
    model = _model(cfg)
    grid_cfg = cfg["landscape"]
    grids = {}
    for r in reports:
        tcfg = config.training_config(cfg, r.method)
        loss = InverseLoss(ansatz_from_geometry(r.geometry), model, tcfg.collocation_points(), ds,
                           tcfg.weights, np.tile(tcfg.bounds, (len(model.param_names), 1)))
        grid = analysis.loss_landscape(r.checkpoint, loss, grid_cfg["resolution"], grid_cfg["span"], grid_cfg["seed"])
        grids[r.method] = grid
        analysis.write_csv(lay.landscape(r.method), grid.rows())
        svg.heatmap(root / f"landscape_{r.method}.svg", grid.alphas, grid.betas, grid.losses,
                    f"{cfg['name']} {r.method}: log10 loss", "alpha", "beta", log=True,
                    markers=[("trained", 0.0, 0.0)])
    return grids


def run(cfg: dict, root: Path) -> list[TrainReport]:
    ds = generate_data(cfg, root)
    reports = train(cfg, root, dataset=ds)
    analyse(cfg, root, reports)
    if cfg["landscape"]["enabled"]:
        landscape(cfg, root, reports)
    return reports


def sweep_noise(cfg: dict, root: Path) -> list[analysis.MseReport]:
    model = _model(cfg)
    levels, seeds = cfg["sweep"]["noise_levels"], cfg["sweep"]["seeds"]
    methods = config.methods(cfg)

    def tcfg_for(method):
        return config.training_config(cfg, method)

    results = []
    for method in methods:
        results += analysis.noise_sweep(model, tcfg_for(method), cfg["window"], levels, seeds,
                                        cfg["nD"], cfg["rk4_step"], (method,), cfg["mse_points"])
    order = {m: k for k, m in enumerate(methods)}
    results.sort(key=lambda r: (r.noise_level, r.seed, order[r.method]))
    _json_dump(root / "config.json", cfg)
    analysis.write_csv(root / "noise_sweep.csv", analysis.mse_rows(results, model.species))
    med = analysis.median_by_level(results)
    analysis.write_csv(root / "noise_sweep_median.csv",
                       [dict(method=m, noise_level=lvl, median_mse_total=v) for (m, lvl), v in sorted(med.items())])
    svg.bar_chart(root / "noise_sweep.svg", [f"{lvl:g}" for lvl in levels],
                  {m: [med[(m, float(lvl))] for lvl in levels] for m in methods},
                  f"{cfg['name']}: median solution MSE vs noise", "MSE", logy=True)
    return results


def report(directory: Path, out: Path | None = None) -> list[dict]:
    directory = Path(directory)
    out = out or directory
    paths = sorted(directory.rglob("report.json"))
    if not paths:
        raise MissingArtifact(f"no report.json under {directory}: run stage train first")
    reports = [load_report(p) for p in paths]
    rows = analysis.parameter_table(reports)
    analysis.write_csv(out / "parameter_table.csv", rows)
    sg = analysis.saturated_growth_table(reports)
    if sg:
        windows = sorted({w for row in sg.values() for w in row}, key=lambda s: (len(s), s))
        analysis.write_csv(out / "table_saturated_growth.csv",
                           [dict(method=m, **{w: sg[m].get(w, float("nan")) for w in windows})
                            for m in ("pinn", "fbpinn") if m in sg])
    mse_rows = []
    cache = {}
    for rep in reports:
        cfg = rep.config
        key = (rep.model, rep.setting, tuple(cfg.get("initial_condition") or ()))
        if key not in cache:
            m = models.make_model(rep.model, rep.setting, cfg.get("initial_condition"))
            cache[key] = (m, datagen.simulate(m, cfg.get("domain", (0, 24)), cfg.get("rk4_step", 0.01)))
        m, traj = cache[key]
        mse_rows.append(analysis.report_mse(rep, traj, cfg.get("mse_points", 500)).row(m.species))
    analysis.write_csv(out / "mse_table.csv", mse_rows)
    groups: dict[str, dict[str, float]] = {}
    for row in mse_rows:
        cat = f"{row['model'][:4]}{('-' + row['setting'][:4]) if row['setting'] else ''} {row['window']}"
        groups.setdefault(row["method"], {})[cat] = row["mse_total"]
    cats = sorted({c for g in groups.values() for c in g})
    svg.bar_chart(out / "mse_table.svg", cats, {m: [g.get(c, np.nan) for c in cats] for m, g in groups.items()},
                  "solution MSE", "MSE", logy=True)
    comp = [r for r in reports if r.model == "competition"]
    if comp:
        cats = [f"{r.setting[:4]} {_window_label(r.window)} {r.method}" for r in comp]
        names = models.COMPETITION_PARAM_NAMES
        svg.bar_chart(out / "competition_parameters.svg", cats,
                      {n: [r.learned[n] for r in comp] for n in names},
                      "learned competition parameters", "value")
    return rows


# ---------------------------------------------------------------- argparse

def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="ddpinn", description=__doc__.split("\n\n")[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)
    for name in ("run", "generate-data", "train", "landscape", "sweep-noise"):
        s = sub.add_parser(name)
        s.add_argument("config")
        s.add_argument("--seed", type=int, default=None, help="override the config seed")
        s.add_argument("--out", type=Path, default=None, help="override the output directory")
        if name == "train":
            s.add_argument("--method", choices=("pinn", "fbpinn"), default=None)
    s = sub.add_parser("report")
    s.add_argument("directory", type=Path)
    s.add_argument("--out", type=Path, default=None)
    sub.add_parser("configs", help="list bundled configs")
    return p


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "configs":
            print("\n".join(bundled_configs()))
            return EXIT_OK
        if args.command == "report":
            rows = report(args.directory, args.out)
            print(f"aggregated {len(rows)} reports")
            return EXIT_OK
        cfg = load_config(args.config, args.seed)
        root = args.out if args.out is not None else config.output_dir(cfg)
        root.mkdir(parents=True, exist_ok=True)
        if args.command == "run":
            for r in run(cfg, root):
                print(f"{cfg['name']} {r.method}: " + ", ".join(f"{k}={v:.4f}" for k, v in r.learned.items()))
        elif args.command == "generate-data":
            ds = generate_data(cfg, root)
            print(f"wrote {len(ds)} points to {config.Layout(root).dataset}")
        elif args.command == "train":
            methods = (args.method,) if args.method else None
            reports = train(cfg, root, methods)
            analyse(cfg, root, _load_reports(cfg, config.Layout(root)) if methods is None else reports)
        elif args.command == "landscape":
            landscape(cfg, root)
        elif args.command == "sweep-noise":
            res = sweep_noise(cfg, root)
            print(f"wrote {len(res)} rows to {root / 'noise_sweep.csv'}")
    except (config.ConfigError, MissingArtifact, datagen.DatasetFormatError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (NonFiniteError, IntegrationError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
