import numpy as np
import pytest

from ddpinn import datagen, models


def logistic(t, C=1.0, u0=0.01):
    return C * u0 / (u0 + (C - u0) * np.exp(-C * t))


def sg_rhs(t, y):
    return y * (1.0 - y)


def test_zero_rhs_is_constant():
    traj = datagen.integrate_rk4(lambda t, y: np.zeros_like(y), [1.0, 2.0], (0.0, 5.0), 0.3)
    assert np.all(traj.states == [1.0, 2.0])
    assert traj.times[-1] == 5.0
    assert np.all(np.diff(traj.times) > 0)


def test_single_step_against_closed_form():
    traj = datagen.integrate_rk4(sg_rhs, [0.5], (0.0, 0.1), 0.1)
    assert traj.states.shape == (2, 1)
    assert abs(traj.states[-1, 0] - 1.0 / (1.0 + np.exp(-0.1))) <= 1e-7


def test_last_step_is_shortened():
    traj = datagen.integrate_rk4(sg_rhs, [0.5], (0.0, 1.0), 0.3)
    np.testing.assert_allclose(traj.times, [0.0, 0.3, 0.6, 0.9, 1.0])


def test_logistic_accuracy_h001():
    traj = datagen.integrate_rk4(sg_rhs, [0.01], (0.0, 24.0), 0.01)
    assert traj.times.size == 2401
    assert np.max(np.abs(traj.states[:, 0] - logistic(traj.times))) <= 1e-8


def test_errors_match_independent_integrator():
    # frozen from a separate scalar RK4 loop
    for h, ref in [(0.1, 4.977917836823664e-07), (0.05, 3.222998057328397e-08),
                   (0.01, 5.302569494602949e-11)]:
        traj = datagen.integrate_rk4(sg_rhs, [0.01], (0.0, 24.0), h)
        err = np.max(np.abs(traj.states[:, 0] - logistic(traj.times)))
        assert err == pytest.approx(ref, rel=1e-3)


def test_fourth_order_convergence():
    errs = []
    for h in (0.2, 0.1):
        traj = datagen.integrate_rk4(sg_rhs, [0.01], (0.0, 24.0), h)
        errs.append(np.max(np.abs(traj.states[:, 0] - logistic(traj.times))))
    assert 12.0 <= errs[0] / errs[1] <= 20.0


def test_coexistence_equilibrium_is_invariant():
    p = models.CompetitionParams.from_setting("coexistence", u0=10 / 11, v0=40 / 33)
    m = models.competition_model(p)
    traj = datagen.simulate(m, (0.0, 24.0), 0.01)
    assert np.max(np.abs(traj.states - [10 / 11, 40 / 33])) <= 1e-10


@pytest.mark.filterwarnings("ignore::RuntimeWarning")
def test_nonfinite_state_aborts_with_step():
    with pytest.raises(datagen.IntegrationError, match="step"):
        datagen.integrate_rk4(lambda t, y: y * y, [10.0], (0.0, 5.0), 0.1)


def test_bad_step_or_span():
    with pytest.raises(ValueError):
        datagen.integrate_rk4(sg_rhs, [0.5], (0.0, 1.0), 0.0)
    with pytest.raises(ValueError):
        datagen.integrate_rk4(sg_rhs, [0.5], (1.0, 1.0), 0.1)


@pytest.fixture(scope="module")
def coex_traj():
    return datagen.simulate(models.make_model("competition", "coexistence"))


def test_noise_free_samples_lie_on_trajectory(coex_traj):
    ds = datagen.sample_dataset(coex_traj, (0.0, 24.0), 100, 0.0, seed=1)
    np.testing.assert_array_equal(ds.values, coex_traj.at(ds.t))
    assert ds.species == ("u", "v")


def test_sample_times_are_equispaced(coex_traj):
    ds = datagen.sample_dataset(coex_traj, (10.0, 24.0), 100)
    assert ds.t[0] == 10.0 and ds.t[-1] == 24.0
    np.testing.assert_allclose(np.diff(ds.t), 14.0 / 99, rtol=1e-12)
    assert len(ds) == 100


def test_sampling_is_deterministic(coex_traj):
    a = datagen.sample_dataset(coex_traj, (0.0, 10.0), 50, 0.05, seed=7)
    b = datagen.sample_dataset(coex_traj, (0.0, 10.0), 50, 0.05, seed=7)
    c = datagen.sample_dataset(coex_traj, (0.0, 10.0), 50, 0.05, seed=8)
    assert a == b
    assert a != c


def test_window_outside_span_rejected(coex_traj):
    with pytest.raises(ValueError):
        datagen.sample_dataset(coex_traj, (10.0, 30.0), 10)
    with pytest.raises(ValueError):
        datagen.sample_dataset(coex_traj, (0.0, 10.0), 0)


def test_noise_statistics(coex_traj):
    s = 0.05
    ds = datagen.sample_dataset(coex_traj, (0.0, 24.0), 100_000, s, seed=3)
    clean = coex_traj.at(ds.t)
    resid_std = (ds.values - clean).std(axis=0)
    target = s * clean.std(axis=0)
    np.testing.assert_allclose(resid_std, target, rtol=0.05)


def test_csv_round_trip(tmp_path, coex_traj):
    ds = datagen.sample_dataset(coex_traj, (0.0, 24.0), 100, 0.02, seed=4)
    path = datagen.write_dataset(ds, tmp_path / "ds.csv")
    assert path.read_text().splitlines()[0] == "t,u,v"
    assert (tmp_path / "ds.json").exists()
    assert datagen.read_dataset(path) == ds


def test_single_species_header(tmp_path):
    traj = datagen.simulate(models.make_model("saturated_growth"))
    ds = datagen.sample_dataset(traj, (0.0, 10.0), 5, species=("u",))
    path = datagen.write_dataset(ds, tmp_path / "sg.csv")
    assert path.read_text().splitlines()[0] == "t,u"
    assert datagen.read_dataset(path) == ds


def test_non_monotone_times_accepted(tmp_path):
    p = tmp_path / "x.csv"
    p.write_text("t,u\n2.0,0.5\n1.0,0.4\n3.0,0.7\n")
    ds = datagen.read_dataset(p)
    np.testing.assert_array_equal(ds.t, [2.0, 1.0, 3.0])
    assert ds.window == (1.0, 3.0)


@pytest.mark.parametrize("body, line", [("t,u\n1.0,0.5\n2.0,abc\n", 3),
                                        ("t,u\n1.0,0.5,0.7\n", 2),
                                        ("x,u\n1.0,2.0\n", 1)])
def test_malformed_file_reports_line(tmp_path, body, line):
    p = tmp_path / "bad.csv"
    p.write_text(body)
    with pytest.raises(datagen.DatasetFormatError, match=f"line {line}"):
        datagen.read_dataset(p)
