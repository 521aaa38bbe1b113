import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from murphytest import errors
from murphytest.losses import (
    FunctionalLevel,
    LossSpec,
    MixtureSpec,
    consistent_loss,
    extremal_expectile_loss,
    extremal_quantile_loss,
    homogeneous_bregman_origin_atom,
    interval_sums,
    boxes_for,
    mixture_loss,
    murphy_curve,
)
from murphytest.risk import sample_expectile, sample_quantile

finite = st.floats(-50, 50, allow_nan=False)
levels = st.floats(0.01, 0.99)


def ee_literal(theta, x, y, a):
    # straight transcription, scalar only
    w = abs((1.0 if y < x else 0.0) - a)
    return w * (max(y - theta, 0.0) - max(x - theta, 0.0) - (1.0 if theta < x else 0.0) * (y - x))


def eq_literal(theta, x, y, a):
    return ((1.0 if y < x else 0.0) - a) * ((1.0 if theta < x else 0.0) - (1.0 if theta < y else 0.0))


@pytest.mark.parametrize("theta,alpha,x,y,want", [
    (0, 0.5, 1, -1, 0.5),
    (3, 0.25, 1, 1, 0.0),
    (0, 0.25, -1, 1, 0.25),
])
def test_extremal_expectile_examples(theta, alpha, x, y, want):
    assert extremal_expectile_loss(theta, x, y, alpha) == pytest.approx(want)


@pytest.mark.parametrize("theta,alpha,x,y,want", [
    (0.5, 0.05, 1, 0, 0.95),
    (0.5, 0.05, 0, 1, 0.05),
    (2, 0.3, 1, 0, 0.0),
])
def test_extremal_quantile_examples(theta, alpha, x, y, want):
    assert extremal_quantile_loss(theta, x, y, alpha) == pytest.approx(want)


@pytest.mark.parametrize("fn", [extremal_expectile_loss, extremal_quantile_loss])
@pytest.mark.parametrize("bad", [math.nan, math.inf, -math.inf])
def test_extremal_rejects_nonfinite(fn, bad):
    with pytest.raises(errors.InvalidArgumentError):
        fn(0.0, bad, 1.0, 0.5)


@settings(max_examples=300, deadline=None)
@given(finite, finite, finite, levels)
def test_extremal_matches_literal_formula(theta, x, y, a):
    assert extremal_expectile_loss(theta, x, y, a) == pytest.approx(ee_literal(theta, x, y, a), abs=1e-9)
    assert extremal_quantile_loss(theta, x, y, a) == pytest.approx(eq_literal(theta, x, y, a), abs=1e-12)


@settings(max_examples=300, deadline=None)
@given(finite, finite, finite, levels)
def test_extremal_bounds(theta, x, y, a):
    ee = extremal_expectile_loss(theta, x, y, a)
    eq = extremal_quantile_loss(theta, x, y, a)
    top = max(a, 1 - a)
    assert 0.0 <= ee <= top * abs(y - x) + 1e-12
    assert 0.0 <= eq <= top + 1e-15


def test_extremal_vectorised():
    rng = np.random.default_rng(3)
    th, x, y = rng.normal(size=(3, 200))
    got = extremal_expectile_loss(th, x, y, 0.3)
    want = [ee_literal(*v, 0.3) for v in zip(th, x, y)]
    np.testing.assert_allclose(got, want, atol=1e-12)


@pytest.mark.parametrize("spec,kind,alpha,x,y,want", [
    (LossSpec.squared_error(), "expectile", 0.5, 2, 0, 2.0),
    (LossSpec.qlike(), "expectile", 0.5, 1, 2, 0.5 * (2 - math.log(2) - 1)),
    (LossSpec.linlin(), "quantile", 0.05, 1, 0, 0.95),
    (LossSpec.scaled_linlin(), "quantile", 0.05, 1, 0, 0.95 / 0.05),
    (LossSpec.exponential_bregman(1.0), "expectile", 0.5, 1, 0, 0.5),
])
def test_consistent_loss_examples(spec, kind, alpha, x, y, want):
    assert consistent_loss(spec, FunctionalLevel(kind, alpha), x, y) == pytest.approx(want, rel=1e-12)


EXPECTILE_SPECS = [
    LossSpec.squared_error(),
    LossSpec.exponential_bregman(-1.0),
    LossSpec.exponential_bregman(0.3),
    LossSpec.homogeneous_bregman(1.5),
    LossSpec.homogeneous_bregman(3.0),
    LossSpec.qlike(),
    LossSpec.homogeneous_patton(-1.0),
    LossSpec.homogeneous_patton(3.0),
]
QUANTILE_SPECS = [
    LossSpec.linlin(),
    LossSpec.scaled_linlin(),
    LossSpec.homogeneous_power(2.0),
    LossSpec.homogeneous_power(-0.5),
    LossSpec.log_power(),
]
POSITIVE = {"qlike", "homogeneous_patton", "homogeneous_power", "log_power"}


def _draw(spec, rng, n):
    if spec.family in POSITIVE:
        return rng.uniform(0.05, 5.0, size=(2, n))
    return rng.normal(scale=2.0, size=(2, n))


@pytest.mark.parametrize("spec", EXPECTILE_SPECS + QUANTILE_SPECS, ids=lambda s: s.name)
def test_nonnegative_and_zero_on_diagonal(spec):
    rng = np.random.default_rng(11)
    x, y = _draw(spec, rng, 500)
    level = FunctionalLevel(spec.kind, 0.2)
    assert np.all(consistent_loss(spec, level, x, y) >= 0)
    assert np.all(consistent_loss(spec, level, x, x) == 0)


@pytest.mark.parametrize("spec,x,y", [
    (LossSpec.qlike(), -1.0, 1.0),
    (LossSpec.log_power(), 1.0, 0.0),
    (LossSpec.homogeneous_patton(2.0), 0.0, 1.0),
])
def test_domain_errors_name_family(spec, x, y):
    with pytest.raises(errors.DomainError, match=spec.family.split("_")[0]):
        consistent_loss(spec, FunctionalLevel(spec.kind, 0.5), x, y)


def test_family_kind_mismatch_rejected():
    with pytest.raises(errors.InvalidArgumentError):
        consistent_loss(LossSpec.linlin(), FunctionalLevel("expectile", 0.5), 1.0, 0.0)


@pytest.mark.parametrize("family,param", [
    ("exponential_bregman", 0.0), ("homogeneous_bregman", 1.0),
    ("homogeneous_patton", 1.0), ("homogeneous_power", 0.0),
])
def test_invalid_parameters(family, param):
    with pytest.raises(errors.InvalidArgumentError):
        LossSpec(family, param)


def test_logistic_proportional_to_log_likelihood():
    level = FunctionalLevel("expectile", 0.5)
    xs = np.linspace(0.005, 0.995, 100)
    spec = LossSpec.logistic_bregman()
    np.testing.assert_allclose(consistent_loss(spec, level, xs, np.ones_like(xs)), -0.5 * np.log(xs), rtol=1e-12)
    np.testing.assert_allclose(consistent_loss(spec, level, xs, np.zeros_like(xs)), -0.5 * np.log1p(-xs), rtol=1e-12)


def _discrete_expectile(atoms, probs, a):
    lo, hi = atoms.min(), atoms.max()
    for _ in range(200):
        t = 0.5 * (lo + hi)
        g = a * np.sum(probs * np.maximum(atoms - t, 0)) - (1 - a) * np.sum(probs * np.maximum(t - atoms, 0))
        lo, hi = (t, hi) if g > 0 else (lo, t)
    return 0.5 * (lo + hi)


def _discrete_quantile(atoms, probs, a):
    o = np.argsort(atoms)
    cdf = np.cumsum(probs[o])
    return atoms[o][np.searchsorted(cdf, a - 1e-12)]


@pytest.mark.parametrize("spec", EXPECTILE_SPECS, ids=lambda s: s.name)
def test_elicits_expectile(spec):
    rng = np.random.default_rng(5)
    for _ in range(10):
        n = rng.integers(1, 9)
        atoms = _draw(spec, rng, n)[0]
        probs = rng.dirichlet(np.ones(n))
        a = rng.uniform(0.05, 0.95)
        level = FunctionalLevel("expectile", a)
        grid = np.linspace(atoms.min(), atoms.max(), 2001)
        risk = [np.sum(probs * consistent_loss(spec, level, g, atoms)) for g in grid]
        step = grid[1] - grid[0] if n > 1 else 0.0
        assert abs(grid[int(np.argmin(risk))] - _discrete_expectile(atoms, probs, a)) <= step + 1e-9


@pytest.mark.parametrize("spec", QUANTILE_SPECS, ids=lambda s: s.name)
def test_elicits_quantile(spec):
    rng = np.random.default_rng(6)
    for _ in range(10):
        n = rng.integers(1, 9)
        atoms = _draw(spec, rng, n)[0]
        probs = rng.dirichlet(np.ones(n))
        a = rng.uniform(0.05, 0.95)
        level = FunctionalLevel("quantile", a)
        q = _discrete_quantile(atoms, probs, a)
        r_true = np.sum(probs * consistent_loss(spec, level, q, atoms))
        grid = np.linspace(atoms.min(), atoms.max(), 501)
        risk = np.array([np.sum(probs * consistent_loss(spec, level, g, atoms)) for g in grid])
        assert r_true <= risk.min() + 1e-12


@pytest.mark.parametrize("n,alpha", [(200, 0.05), (400, 0.025), (100, 0.1)])
def test_expected_shortfall_identity(n, alpha):
    rng = np.random.default_rng(n)
    ys = rng.standard_t(5, size=n)
    level = FunctionalLevel("quantile", alpha)
    spec = LossSpec.scaled_linlin()
    # the piecewise linear average loss attains its minimum at a data point
    avg = np.array([consistent_loss(spec, level, x, ys).mean() for x in ys])
    q = sample_quantile(ys, alpha)
    es = np.sum(ys[ys <= q]) / (n * alpha)
    assert ys.mean() - avg.min() == pytest.approx(es, rel=1e-10)


def test_sample_functionals_helpers():
    assert sample_quantile([1, 2, 3, 4], 0.5) == 2
    xs = np.random.default_rng(0).normal(size=50)
    assert sample_expectile(xs, 0.5) == pytest.approx(xs.mean(), abs=1e-10)


# ---------------------------------------------------------------- mixtures


def test_mixture_exp_bregman_example():
    mix = MixtureSpec(LossSpec.exponential_bregman(1.0), lo=-5, hi=5, node_count=2001)
    assert mixture_loss(mix, FunctionalLevel("expectile", 0.5), 1.0, 0.0) == pytest.approx(0.5, abs=1e-4)


@settings(max_examples=100, deadline=None)
@given(finite, finite, levels)
def test_mixture_linlin_exact(x, y, a):
    mix = MixtureSpec(LossSpec.linlin())
    level = FunctionalLevel("quantile", a)
    assert mixture_loss(mix, level, x, y) == pytest.approx(consistent_loss(LossSpec.linlin(), level, x, y), abs=1e-9)


@pytest.mark.parametrize("spec", [LossSpec.squared_error(), LossSpec.linlin(), LossSpec.qlike()], ids=lambda s: s.name)
def test_mixture_zero_on_diagonal(spec):
    assert mixture_loss(MixtureSpec(spec), FunctionalLevel(spec.kind, 0.4), 1.5, 1.5) == 0.0


def test_mixture_range_and_spec_errors():
    level = FunctionalLevel("expectile", 0.5)
    with pytest.raises(errors.RangeError):
        mixture_loss(MixtureSpec(LossSpec.squared_error(), lo=0, hi=1), level, 2.0, 0.5)
    with pytest.raises(errors.SpecError):
        MixtureSpec(LossSpec.squared_error(), node_count=2)
    with pytest.raises(errors.SpecError):
        MixtureSpec(LossSpec.logistic_bregman())
    with pytest.raises(errors.SpecError):
        mixture_loss(MixtureSpec(LossSpec.qlike(), lo=-1, hi=3), level, 1.0, 2.0)


def test_origin_atom_adds_point_mass():
    b = 2.0
    level = FunctionalLevel("expectile", 0.5)
    spec = LossSpec.homogeneous_bregman(b)
    plain = mixture_loss(MixtureSpec(spec), level, 1.0, -1.0)
    with_atom = mixture_loss(MixtureSpec(spec, point_masses=(homogeneous_bregman_origin_atom(b),)), level, 1.0, -1.0)
    assert plain == pytest.approx(consistent_loss(spec, level, 1.0, -1.0), rel=1e-8)
    assert with_atom - plain == pytest.approx(b * extremal_expectile_loss(0.0, 1.0, -1.0, 0.5))


# ---------------------------------------------------------------- kernels and murphy curves


@pytest.mark.parametrize("kind", ["expectile", "quantile"])
def test_interval_sums_matches_direct_evaluation(kind):
    rng = np.random.default_rng(2)
    x, y = rng.normal(size=(2, 60))
    grid = np.sort(np.concatenate([x, y, rng.normal(size=40)]))
    lo, hi, c0, c1 = boxes_for(kind, x, y, 0.3)
    got = interval_sums(grid, lo, hi, c0, c1)
    fn = extremal_expectile_loss if kind == "expectile" else extremal_quantile_loss
    want = np.array([fn(t, x, y, 0.3).sum() for t in grid])
    np.testing.assert_allclose(got, want, atol=1e-10)


def test_interval_sums_weight_matrix():
    rng = np.random.default_rng(4)
    x, y = rng.normal(size=(2, 30))
    grid = np.sort(rng.normal(size=50))
    W = rng.integers(0, 3, size=(5, 30)).astype(float)
    lo, hi, c0, c1 = boxes_for("expectile", x, y, 0.7)
    got = interval_sums(grid, lo, hi, c0, c1, weights=W)
    for r in range(5):
        want = [np.sum(W[r] * extremal_expectile_loss(t, x, y, 0.7)) for t in grid]
        np.testing.assert_allclose(got[r], want, atol=1e-10)


def test_murphy_curve_examples():
    y = np.array([1.0, -1.0])
    F = np.column_stack([[0.0, 0.0], [2.0, -2.0], y])
    curve = murphy_curve(FunctionalLevel("expectile", 0.5), F, y, np.array([-1.0, 0.0, 0.5]), names=["a", "b", "c"])
    assert curve.losses.shape == (3, 3)
    assert curve.column("a")[1] - curve.column("b")[1] == pytest.approx(0.25)
    assert np.all(curve.column("c") == 0)


def test_murphy_curve_single_row_and_errors():
    theta = np.linspace(-2, 2, 9)
    curve = murphy_curve(FunctionalLevel("quantile", 0.1), np.array([[0.7]]), np.array([-0.3]), theta)
    np.testing.assert_allclose(curve.losses[:, 0], extremal_quantile_loss(theta, 0.7, -0.3, 0.1))
    with pytest.raises(errors.EmptyInputError):
        murphy_curve(FunctionalLevel("quantile", 0.1), np.empty((0, 1)), np.empty(0), theta)
    with pytest.raises(errors.InvalidArgumentError):
        murphy_curve(FunctionalLevel("quantile", 0.1), np.array([[np.nan]]), np.array([0.0]), theta)
