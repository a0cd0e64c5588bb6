import csv
import json

import numpy as np
import pytest

from ddpinn import cli, config


def write_cfg(path, **kw):
    base = dict(name="t", model="competition", setting="coexistence", epochs=60, nC=40, nD=30,
                landscape={"resolution": 5})
    base.update(kw)
    path.write_text(json.dumps(base))
    return str(path)


def read_rows(path):
    with open(path) as fh:
        return list(csv.DictReader(fh))


def test_lists_bundled_configs(capsys):
    assert cli.main(["configs"]) == 0
    names = capsys.readouterr().out.split()
    for n in ("sg_full.json", "sg_dyn.json", "sg_qs.json", "coex_full.json", "surv_qs.json",
              "coex_noise_sweep.json"):
        assert n in names


@pytest.mark.parametrize("name", cli.bundled_configs())
def test_bundled_configs_validate(name):
    cfg = cli.load_config(name)
    assert cfg["epochs"] == 50000 and cfg["layers"] == [5, 5, 5] and cfg["lr"] == 0.001


@pytest.mark.parametrize("override, fragment", [
    (dict(nD=0), "$.nD"),
    (dict(bogus=1), "bogus"),
    (dict(setting=None), "$.setting"),
    (dict(window=[5, 30]), "$.window"),
    (dict(layers=[5, 0]), "$.layers[1]"),
    (dict(sweep={"seeds": []}), "$.sweep.seeds"),
])
def test_invalid_config_rejected_before_work(tmp_path, capsys, override, fragment):
    out = tmp_path / "out"
    code = cli.main(["run", write_cfg(tmp_path / "c.json", **override), "--out", str(out)])
    assert code == 2
    assert fragment in capsys.readouterr().err
    assert not out.exists()


def test_missing_config(capsys):
    assert cli.main(["run", "no_such_config"]) == 2
    assert "no such config" in capsys.readouterr().err


def test_missing_upstream_artifacts(tmp_path, capsys):
    cfg = write_cfg(tmp_path / "c.json")
    assert cli.main(["train", cfg, "--out", str(tmp_path / "a")]) == 2
    assert "run stage generate-data first" in capsys.readouterr().err
    assert cli.main(["generate-data", cfg, "--out", str(tmp_path / "a")]) == 0
    assert cli.main(["landscape", cfg, "--out", str(tmp_path / "a")]) == 2
    assert "run stage train first" in capsys.readouterr().err
    assert cli.main(["report", str(tmp_path / "empty")]) == 2


@pytest.mark.filterwarnings("ignore::RuntimeWarning")
def test_numerical_failure_exit_code(tmp_path, capsys):
    cfg = write_cfg(tmp_path / "c.json", initial_condition=[1e200, 1e200])
    assert cli.main(["generate-data", cfg, "--out", str(tmp_path / "a")]) == 3
    assert "numerical failure" in capsys.readouterr().err


@pytest.fixture(scope="module")
def single_shot(tmp_path_factory):
    d = tmp_path_factory.mktemp("single")
    cfg = write_cfg(d / "c.json")
    assert cli.main(["run", cfg, "--out", str(d / "out")]) == 0
    return cfg, d / "out"


def test_run_artifacts(single_shot):
    _, out = single_shot
    for f in ("config.json", "dataset.csv", "dataset.json", "mse.csv", "parameters.csv",
              "solutions.svg", "parameters.svg", "loss_history.svg", "windows.svg",
              "energy_truth.svg", "energy_pinn.svg", "energy_fbpinn.svg", "energy.csv",
              "landscape_pinn.svg", "landscape_fbpinn.svg"):
        assert (out / f).exists(), f
    for m in ("pinn", "fbpinn"):
        for f in ("report.json", "checkpoint.json", "loss_history.csv", "landscape.csv"):
            assert (out / m / f).exists()
        assert len(read_rows(out / m / "loss_history.csv")) == 60
        assert len(read_rows(out / m / "landscape.csv")) == 25
    echoed = json.loads((out / "config.json").read_text())
    assert echoed == config.resolve(json.loads(open(single_shot[0]).read()))
    assert echoed["lambda_param_fbpinn"] == 1e6
    assert json.loads((out / "pinn" / "report.json").read_text())["config"] == echoed
    assert json.loads((out / "dataset.json").read_text())["config"] == echoed
    assert {r["method"] for r in read_rows(out / "mse.csv")} == {"pinn", "fbpinn"}


def test_staged_run_matches_single_shot(tmp_path, single_shot):
    cfg, ref = single_shot
    out = tmp_path / "staged"
    assert cli.main(["generate-data", cfg, "--out", str(out)]) == 0
    assert cli.main(["train", cfg, "--out", str(out), "--method", "pinn"]) == 0
    assert cli.main(["train", cfg, "--out", str(out), "--method", "fbpinn"]) == 0
    assert cli.main(["train", cfg, "--out", str(out)]) == 0
    assert cli.main(["landscape", cfg, "--out", str(out)]) == 0
    for f in ("dataset.csv", "mse.csv", "parameters.csv", "pinn/loss_history.csv",
              "fbpinn/checkpoint.json", "fbpinn/landscape.csv", "energy.csv"):
        assert (out / f).read_bytes() == (ref / f).read_bytes(), f


def test_rerun_is_byte_identical(tmp_path, single_shot):
    cfg, ref = single_shot
    out = tmp_path / "again"
    assert cli.main(["run", cfg, "--out", str(out)]) == 0
    for f in sorted(ref.rglob("*.csv")):
        assert (out / f.relative_to(ref)).read_bytes() == f.read_bytes(), f


def test_seed_override_and_output_root(tmp_path, monkeypatch):
    cfg = write_cfg(tmp_path / "c.json", method="pinn", landscape={"enabled": False})
    monkeypatch.setenv(config.OUTPUT_ROOT_ENV, str(tmp_path / "root"))
    assert cli.main(["generate-data", cfg, "--seed", "7"]) == 0
    echoed = json.loads((tmp_path / "root" / "t" / "config.json").read_text())
    assert echoed["seed"] == 7


def test_report_mirrors_saturated_growth_layout(tmp_path, capsys):
    runs = tmp_path / "runs"
    for name in ("sg_full", "sg_dyn", "sg_qs"):
        raw = json.loads(cli.find_config(name).read_text())
        raw.update(epochs=40, nC=30, landscape={"enabled": False})
        path = tmp_path / f"{name}.json"
        path.write_text(json.dumps(raw))
        assert cli.main(["run", str(path), "--out", str(runs / name)]) == 0
    assert cli.main(["report", str(runs)]) == 0
    table = read_rows(runs / "table_saturated_growth.csv")
    assert [r["method"] for r in table] == ["pinn", "fbpinn"]
    assert list(table[0])[1:] == ["[0,10]", "[0,24]", "[10,24]"]
    assert all(np.isfinite(float(v)) for r in table for k, v in r.items() if k != "method")
    assert len(read_rows(runs / "parameter_table.csv")) == 6
    assert len(read_rows(runs / "mse_table.csv")) == 6
    assert (runs / "mse_table.svg").exists()


def test_sweep_row_count(tmp_path):
    cfg = write_cfg(tmp_path / "c.json", epochs=5, nC=20, nD=10)
    out = tmp_path / "sweep"
    assert cli.main(["sweep-noise", cfg, "--out", str(out)]) == 0
    rows = read_rows(out / "noise_sweep.csv")
    assert len(rows) == 5 * 3 * 2
    assert {float(r["noise_level"]) for r in rows} == {0.0, 0.01, 0.02, 0.05, 0.1}
    assert len(read_rows(out / "noise_sweep_median.csv")) == 10
    assert (out / "noise_sweep.svg").exists()
