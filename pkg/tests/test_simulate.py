import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate, stats

from murphytest import errors
from murphytest.losses import FunctionalLevel, LossSpec, consistent_loss
from murphytest.simulate import (
    DESIGNS,
    ScenarioSpec,
    analytic_loss_diff,
    generate_scenario,
    normal_expectile,
    normal_expectile_scale,
    normal_quantile_scale,
    run_rejection_study,
    size_power_curve,
)


# ---------------------------------------------------------------- normal helpers


def test_normal_expectile_symmetry():
    assert normal_expectile(0.5) == pytest.approx(0.0, abs=1e-12)
    for a in (0.01, 0.2, 0.37):
        assert normal_expectile(a) == pytest.approx(-normal_expectile(1 - a), abs=1e-10)


@pytest.mark.parametrize("alpha", [0.05, 0.25, 0.9])
def test_normal_expectile_balance_by_quadrature(alpha):
    t = normal_expectile(alpha)
    up = integrate.quad(lambda z: (z - t) * stats.norm.pdf(z), t, np.inf)[0]
    down = integrate.quad(lambda z: (t - z) * stats.norm.pdf(z), -np.inf, t)[0]
    assert alpha * up == pytest.approx((1 - alpha) * down, abs=1e-10)


def test_quantile_scale():
    assert normal_quantile_scale(0.5) == pytest.approx(0.5 * math.sqrt(2 * math.pi))
    a = 0.05
    assert normal_quantile_scale(a) == pytest.approx(math.sqrt(a * (1 - a)) / stats.norm.pdf(stats.norm.ppf(a)))


def test_expectile_scale_matches_monte_carlo():
    # asymptotic sd of the sample expectile, checked by simulation
    rng = np.random.default_rng(0)
    from murphytest.risk import sample_expectile
    a, n = 0.1, 400
    est = [sample_expectile(rng.standard_normal(n), a) for _ in range(600)]
    assert normal_expectile_scale(0.5) == pytest.approx(1.0, rel=1e-8)
    assert np.std(est) * math.sqrt(n) == pytest.approx(normal_expectile_scale(a), rel=0.1)


# ---------------------------------------------------------------- generators


ALL_SETTINGS = [(d, s) for d, (_, ss) in DESIGNS.items() for s in ss]


@pytest.mark.parametrize("design,setting", ALL_SETTINGS)
def test_generators_reproducible(design, setting):
    spec = ScenarioSpec(design, setting, 40, alpha=0.1, seed=3)
    a, b = generate_scenario(spec), generate_scenario(spec)
    assert len(a) == 40 and a.names == ["x1", "x2"]
    np.testing.assert_array_equal(a.forecasts, b.forecasts)
    np.testing.assert_array_equal(a.realized, b.realized)
    c = generate_scenario(ScenarioSpec(design, setting, 40, alpha=0.1, seed=4))
    assert not np.array_equal(a.realized, c.realized)


def test_invalid_settings():
    with pytest.raises(errors.InvalidArgumentError):
        ScenarioSpec("e1", "bogus", 10)
    with pytest.raises(errors.InvalidArgumentError):
        ScenarioSpec("nope", "lfc", 10)
    assert ScenarioSpec("e2", 1, 10).setting == "lfc"


def test_mse_scenario_one_equal_mse():
    p = generate_scenario(ScenarioSpec("mse", "1", 100_000, seed=1))
    d = np.mean((p.column("x1") - p.realized) ** 2) - np.mean((p.column("x2") - p.realized) ** 2)
    assert abs(d) < 0.1


def test_e1_lfc_columns_exchangeable():
    p = generate_scenario(ScenarioSpec("e1", "lfc", 3000, seed=2))
    level = FunctionalLevel("expectile", 0.5)
    l1 = consistent_loss(LossSpec.squared_error(), level, p.column("x1"), p.realized)
    l2 = consistent_loss(LossSpec.squared_error(), level, p.column("x2"), p.realized)
    assert stats.ks_2samp(l1, l2).pvalue > 0.01


def test_e1_true_forecast_hits_expectile():
    a = 0.2
    p = generate_scenario(ScenarioSpec("e1", "true", 20_000, alpha=a, seed=3))
    u = p.realized - p.column("x2")
    t = a * np.mean(np.maximum(u, 0)) - (1 - a) * np.mean(np.maximum(-u, 0))
    assert abs(t) < 0.01


def test_q2_realized_variance():
    p = generate_scenario(ScenarioSpec("q2", "lfc", 20_000, alpha=0.5, seed=4))
    assert p.realized.var() == pytest.approx(4.69, rel=0.05)


def test_q1_true_quantile_coverage():
    a = 0.05
    p = generate_scenario(ScenarioSpec("q1", "true", 20_000, alpha=a, seed=5))
    assert np.mean(p.realized <= p.column("x2")) == pytest.approx(a, abs=0.01)


# ---------------------------------------------------------------- analytic oracle


def test_analytic_examples():
    assert analytic_loss_diff(1, LossSpec.squared_error()) == 0.0
    assert analytic_loss_diff(1, LossSpec.exponential_bregman(1.0)) > 0
    assert analytic_loss_diff(1, LossSpec.exponential_bregman(-1.0)) < 0
    for sc in (1, 2, 3):
        for th in (-20.0, 20.0):
            assert abs(analytic_loss_diff(sc, LossSpec.extremal_expectile(th))) < 1e-8
    with pytest.raises(errors.InvalidArgumentError):
        analytic_loss_diff(1, LossSpec.qlike())
    with pytest.raises(errors.InvalidArgumentError):
        analytic_loss_diff(4, LossSpec.squared_error())


@pytest.mark.parametrize("scenario", ["1", "2", "3"])
def test_analytic_extremal_integrates_to_squared(scenario):
    # squared error (weight 1/2) mixes extremal scores with dH = 2 dtheta
    val = integrate.quad(lambda t: 2 * analytic_loss_diff(scenario, LossSpec.extremal_expectile(t)), -30, 30,
                         limit=200)[0]
    assert val == pytest.approx(analytic_loss_diff(scenario, LossSpec.squared_error()), abs=1e-7)


@pytest.mark.parametrize("a", [-1.0, 0.3, 1.0])
def test_analytic_extremal_integrates_to_exp_bregman(a):
    val = integrate.quad(lambda t: math.exp(a * t) * analytic_loss_diff("2", LossSpec.extremal_expectile(t)),
                         -30, 30, limit=200)[0]
    assert val == pytest.approx(analytic_loss_diff("2", LossSpec.exponential_bregman(a)), abs=1e-7)


# ---------------------------------------------------------------- studies


def test_study_deterministic_and_threads():
    a = run_rejection_study("e1", "lfc", 100, replications=6, M=40, seed=1, with_dm="squared")
    b = run_rejection_study("e1", "lfc", 100, replications=6, M=40, seed=1, with_dm="squared", threads=3)
    assert a.to_csv() == b.to_csv()
    assert a.p_values_csv() == b.p_values_csv()
    assert set(a.rejections) == {"proposed", "dm"}
    assert a.to_csv().splitlines()[0].startswith("design,setting,reversed")


def test_study_reverse_flag():
    res = run_rejection_study("mse", "3", 300, replications=4, M=50, seed=2, reverse=True)
    assert res.reversed and res.frequency("proposed", 0.05) == 1.0


def test_study_needs_replications():
    with pytest.raises(errors.InvalidArgumentError):
        run_rejection_study("e1", "lfc", 100, replications=0)


# ---------------------------------------------------------------- size-power


def test_size_power_self_is_diagonal():
    p = np.random.default_rng(0).uniform(size=200)
    g = np.arange(1, 201) / 200
    curve = size_power_curve(p, p, g)
    np.testing.assert_allclose(curve.power, g)


def test_size_power_zero_alternative():
    curve = size_power_curve(np.linspace(0.01, 1, 50), np.zeros(30))
    assert np.all(curve.power == 1.0)


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2**31), st.floats(0.0, 0.5))
def test_size_power_larger_pvalues_below_diagonal(seed, shift):
    rng = np.random.default_rng(seed)
    p0 = rng.uniform(size=100)
    p1 = np.minimum(p0 + shift, 1.0)
    g = np.arange(1, 101) / 100
    curve = size_power_curve(p0, p1, g)
    assert np.all(curve.power <= g + 1e-12)
    assert np.all(np.diff(curve.power) >= 0)


def test_size_power_errors():
    with pytest.raises(errors.EmptyInputError):
        size_power_curve([], [0.1])
    with pytest.raises(errors.InvalidArgumentError):
        size_power_curve([0.1, 1.2], [0.1])
