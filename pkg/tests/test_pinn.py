import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from ddpinn import datagen, models, pinn
from ddpinn.pinn import LossWeights, TrainingConfig


def logistic(t, C=1.0, u0=0.01):
    e = np.exp(-C * t)
    u = C * u0 / (u0 + (C - u0) * e)
    return u, u * (C - u)


@given(st.floats(-5, 5), st.floats(-5, 5))
def test_hard_constraint_at_origin(raw, u0):
    assert pinn.apply_hard_constraint(raw, 0.0, u0) == u0


def test_hard_constraint_hand_value():
    assert pinn.apply_hard_constraint(1.0, math.log(2.0), 0.5) == pytest.approx(1.0, abs=1e-15)


def test_hard_constraint_derivative():
    raw = lambda t: np.sin(t) + 0.3 * t
    draw = lambda t: np.cos(t) + 0.3
    h = 1e-5
    for t in np.linspace(0.1, 5.0, 9):
        _, du = pinn.apply_hard_constraint(raw(t), t, 0.2, draw(t))
        fd = (pinn.apply_hard_constraint(raw(t + h), t + h, 0.2)
              - pinn.apply_hard_constraint(raw(t - h), t - h, 0.2)) / (2 * h)
        assert du == pytest.approx(fd, rel=1e-6)
        assert du == pytest.approx(np.exp(-t) * raw(t) + (1 - np.exp(-t)) * draw(t), rel=1e-14)


def test_pde_loss_vanishes_on_analytic_solution():
    m = models.make_model("saturated_growth")
    t = np.linspace(0.0, 24.0, 200)
    sol = lambda t: tuple(x[:, None] for x in logistic(t))
    assert pinn.pde_loss(sol, t, m, m.true_params) <= 1e-10


def test_pde_loss_arithmetic():
    m = models.make_model("saturated_growth")
    t = np.linspace(0.0, 24.0, 50)
    # u = 0 makes the model rhs zero, so the residual is du/dt = 0.1
    sol = lambda t: (np.zeros((t.size, 1)), np.full((t.size, 1), 0.1))
    assert pinn.pde_loss(sol, t, m, m.true_params, 1.0) == pytest.approx(0.01, rel=1e-14)
    assert pinn.pde_loss(sol, t, m, m.true_params, 0.0) == 0.0


def test_pde_loss_sums_species_means():
    m = models.make_model("competition", "coexistence")
    t = np.linspace(0.0, 24.0, 10)
    sol = lambda t: (np.zeros((t.size, 2)), np.tile([0.1, 0.2], (t.size, 1)))
    assert pinn.pde_loss(sol, t, m, m.true_params) == pytest.approx(0.01 + 0.04, rel=1e-14)


def test_data_loss_arithmetic():
    ds = datagen.Dataset(np.array([1.0]), np.array([[1.0]]), (0, 2), 0.0, 0, ("u",))
    sol = lambda t: np.full((np.size(t), 1), 1.5)
    assert pinn.data_loss(sol, ds) == 0.25
    assert pinn.data_loss(sol, ds, 2.0) == 0.5
    assert pinn.data_loss(lambda t: np.ones((1, 1)), ds) == 0.0
    empty = datagen.Dataset(np.zeros(0), np.zeros((0, 1)), (0, 2), 0.0, 0, ("u",))
    with pytest.raises(ValueError):
        pinn.data_loss(sol, empty)


def test_param_loss_examples():
    b = [[0.0, 10.0]]
    assert pinn.param_loss([5.0], b, 1e6) == 0.0
    assert pinn.param_loss([-0.1], b, 1e6) == pytest.approx(1e4, rel=1e-12)
    assert pinn.param_loss([10.5], b, 1e6) == pytest.approx(2.5e5, rel=1e-12)
    assert pinn.param_loss([-1.0, 12.0], b * 2, 1.0) == 5.0


@given(st.lists(st.floats(0, 10), min_size=1, max_size=5))
def test_param_loss_zero_inside(ps):
    assert pinn.param_loss(ps, [[0.0, 10.0]] * len(ps), 1e6) == 0.0


def short_config(**kw):
    base = dict(epochs=200, hidden=(5, 5, 5), seed=0)
    base.update(kw)
    return TrainingConfig(**base)


@pytest.fixture(scope="module")
def coex_data():
    m = models.make_model("competition", "coexistence")
    ds = datagen.sample_dataset(datagen.simulate(m), (0.0, 24.0), 100, 0.02, seed=0)
    return m, ds


def test_total_equals_sum_of_terms(coex_data):
    m, ds = coex_data
    cfg = short_config(weights=LossWeights(1.3, 0.7, 5.0))
    ansatz = pinn.PinnAnsatz(cfg.domain, m.x0)
    pv = pinn.initial_params(ansatz, m, cfg)
    pv = pv.with_values(np.concatenate([pv.theta, [-0.2, 0.5, 11.0, 0.3, 0.3]]))
    loss = pinn.InverseLoss(ansatz, m, cfg.collocation_points(), ds, cfg.weights, pv.bounds)
    terms = loss.terms(pv)
    sol = ansatz.solution(pv)
    pde = pinn.pde_loss(sol, cfg.collocation_points(), m, pv.inverse, 1.3)
    data = pinn.data_loss(sol, ds, 0.7)
    par = pinn.param_loss(pv.inverse, pv.bounds, 5.0)
    assert terms["pde"] == pytest.approx(pde, rel=1e-13)
    assert terms["data"] == pytest.approx(data, rel=1e-13)
    assert terms["param"] == pytest.approx(par, rel=1e-13)
    assert terms["total"] == terms["pde"] + terms["data"] + terms["param"]
    assert par == pytest.approx(5.0 * (0.04 + 1.0), rel=1e-13)


def test_training_is_deterministic_and_keeps_initial_condition(coex_data):
    m, ds = coex_data
    cfg = short_config()
    seen = []

    def check(epoch, pv):
        u0 = pinn.PinnAnsatz(cfg.domain, m.x0).solution(pv)(np.array([0.0]))[0][0]
        seen.append(np.max(np.abs(u0 - m.x0)))

    a = pinn.train_pinn(cfg, ds, m, callback=check)
    b = pinn.train_pinn(cfg, ds, m)
    assert len(seen) == cfg.epochs and max(seen) <= 1e-12
    for k in a.history:
        np.testing.assert_array_equal(a.history[k], b.history[k])
    np.testing.assert_array_equal(a.checkpoint.values, b.checkpoint.values)
    assert a.history["total"].shape == (200,)
    assert np.all(a.history["param"] == 0.0)
    c = pinn.train_pinn(short_config(seed=1), ds, m)
    assert not np.array_equal(a.history["total"], c.history["total"])


def test_report_round_trip(coex_data):
    m, ds = coex_data
    r = pinn.train_pinn(short_config(epochs=20), ds, m)
    back = pinn.TrainReport.from_json(r.to_json(), r.checkpoint)
    assert back.learned == r.learned and back.truth == r.truth
    np.testing.assert_array_equal(back.history["total"], r.history["total"])
    assert r.abs_errors["r"] == abs(r.learned["r"] - 0.5)
    assert set(r.learned) == set(models.COMPETITION_PARAM_NAMES)


def test_divergence_aborts_with_epoch(coex_data):
    m, ds = coex_data
    cfg = short_config(epochs=50)
    ansatz = pinn.PinnAnsatz(cfg.domain, m.x0)
    loss = pinn.InverseLoss(ansatz, m, cfg.collocation_points(), ds, cfg.weights,
                            np.tile(cfg.bounds, (5, 1)))
    calls = []

    class PoisonAfter:
        def terms_and_grad(self, pv):
            terms, grad = loss.terms_and_grad(pv)
            calls.append(pv)
            if len(calls) == 31:
                terms = {**terms, "total": float("nan")}
            return terms, grad

    with pytest.raises(pinn.TrainingDiverged) as exc:
        pinn.train(PoisonAfter(), pinn.initial_params(ansatz, m, cfg), cfg.epochs)
    assert exc.value.epoch == 30
    np.testing.assert_array_equal(exc.value.checkpoint.values, calls[-1].values)
    assert np.all(np.isfinite(exc.value.checkpoint.values))


def test_species_mismatch_rejected():
    m = models.make_model("saturated_growth")
    ds = datagen.Dataset(np.array([1.0]), np.array([[1.0, 2.0]]), (0, 2), 0.0, 0, ("u", "v"))
    with pytest.raises(ValueError):
        pinn.train_pinn(short_config(epochs=1), ds, m)


def test_config_validation():
    with pytest.raises(ValueError):
        TrainingConfig(epochs=0)
    with pytest.raises(ValueError):
        TrainingConfig(domain=(1.0, 1.0))


CASES = [("saturated_growth", None), ("competition", "coexistence"), ("competition", "survival")]


@pytest.mark.parametrize("name, setting", CASES)
@pytest.mark.parametrize("win", [(0.0, 24.0), (0.0, 10.0), (10.0, 24.0)])
def test_loss_decreases_in_1000_epochs(name, setting, win):
    m = models.make_model(name, setting)
    ds = datagen.sample_dataset(datagen.simulate(m), win, 100)
    r = pinn.train_pinn(short_config(epochs=1000), ds, m)
    assert r.final_loss < r.history["total"][0]


def test_constant_solution_forces_carrying_capacity():
    m = models.saturated_growth_model(models.SaturatedGrowthParams(C=1.0, u0=1.0))
    ds = datagen.sample_dataset(datagen.simulate(m), (0.0, 24.0), 100)
    assert np.all(ds.values == 1.0)
    r = pinn.train_pinn(short_config(epochs=20000), ds, m)
    assert abs(r.learned["C"] - 1.0) <= 0.02
