import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hlpush.particle_system import Configuration
from hlpush.she_weak_scaling import (
    GOLDEN,
    WeakScaling,
    convolve_fields,
    gartner_transform,
    heat_kernel_estimate_check,
    heat_kernel_generator_residual,
    heat_kernel_p,
    moment_bound_check,
    normalization_constants,
    scaled_field,
    she_mean_residual,
)


def test_golden_ratio_and_lambda():
    assert GOLDEN == pytest.approx(0.6180339887, abs=1e-10)
    assert abs(WeakScaling(1e-2).golden_residual) < 1e-15
    assert WeakScaling(1e-2).lam == pytest.approx(2.058171, abs=1e-6)


def test_scaling_validation():
    for eps in (0.0, 1.0, -0.1):
        with pytest.raises(ValueError):
            WeakScaling(eps)
    with pytest.raises(ValueError):
        WeakScaling(0.1, nu=1.0)


def test_step_data_transform():
    sc = WeakScaling(1e-2)
    g = gartner_transform(Configuration(np.arange(600)), sc)
    for x in (0, 3, 17):
        assert g.at(x) == pytest.approx(sc.b ** (1 + sc.nu * x), rel=1e-13)
    # geometric sum of b^{1 + nu x} (1 - b^nu) over x >= 0
    assert g.values.sum() * (1 - sc.q) == pytest.approx(sc.b, abs=1e-12)


def test_heat_kernel_zero_time_is_delta():
    p = heat_kernel_p(WeakScaling(1e-2), 0.0)
    assert p.values.tolist() == [1.0] and p.offset == 0.0
    with pytest.raises(ValueError):
        heat_kernel_p(WeakScaling(1e-2), -1.0)


@settings(max_examples=20, deadline=None)
@given(st.sampled_from([1e-2, 3e-3]), st.floats(0.1, 40.0))
def test_heat_kernel_mass_and_mean(eps, dt):
    sc = WeakScaling(eps)
    p = heat_kernel_p(sc, dt)
    assert abs(p.values.sum() - 1.0) < 1e-12
    assert abs(np.sum(p.points * p.values)) < 1e-9 * max(1.0, sc.kernel_mean(dt))


def test_literal_centring_leaves_a_drift():
    sc = WeakScaling(1e-2)
    p = heat_kernel_p(sc, 5.0, centering="literal")
    assert np.sum(p.points * p.values) == pytest.approx(-sc.rate * 5.0, rel=1e-12)
    with pytest.raises(ValueError):
        heat_kernel_p(sc, 1.0, centering="other")


def test_semigroup():
    sc = WeakScaling(1e-2)
    ab = convolve_fields(heat_kernel_p(sc, 2.0), heat_kernel_p(sc, 3.0))
    c = heat_kernel_p(sc, 5.0)
    n = min(ab.values.size, c.values.size)
    assert np.max(np.abs(ab.values[:n] - c.values[:n])) < 1e-13
    assert ab.offset == pytest.approx(c.offset, abs=1e-12)


def test_generator_residual():
    assert heat_kernel_generator_residual(WeakScaling(1e-2), 3.0) < 1e-8


def test_mean_identity_at_time_zero():
    r = she_mean_residual(WeakScaling(1e-2), 0.0, 10, np.random.default_rng(0))
    assert r["passed"] and r["max_abs_z"] == 0.0
    with pytest.raises(ValueError):
        she_mean_residual(WeakScaling(1e-2), 1.0, 1, np.random.default_rng(0))


def test_mean_identity_monte_carlo():
    # the exact centring matches; the literal reading drifts and its z grows with the sample
    sc = WeakScaling(1e-2)
    small = she_mean_residual(sc, 5.0, 400, np.random.default_rng(3))
    big = she_mean_residual(sc, 5.0, 1600, np.random.default_rng(4))
    assert small["max_abs_z"] <= 4 and big["max_abs_z"] <= 4
    assert small["literal_max_abs_z"] > 20
    assert big["literal_max_abs_z"] > 1.5 * small["literal_max_abs_z"]


def test_heat_kernel_estimates():
    rep = heat_kernel_estimate_check()
    est = rep["estimates"]
    assert est["i"]["stable"] and est["ii"]["stable"]
    # (iii) and (iv) stay finite but their constants grow as eps shrinks
    assert est["iii"]["finite"] and est["iv"]["finite"]
    assert not est["iii"]["stable"] and not est["iv"]["stable"]
    assert not rep["passed"]


def test_normalization_constants():
    c = normalization_constants(WeakScaling(1e-2))
    assert c["sqrt"] == pytest.approx(11.944418677494728, rel=1e-12)
    assert c["literal"] == pytest.approx(71.97349873016046, rel=1e-12)
    # eps * sum Z~(0) stays bounded only for the square-root reading
    literal = []
    for eps in (1e-2, 1e-3, 1e-4):
        sc = WeakScaling(eps)
        c = normalization_constants(sc)
        assert eps * c["sqrt"] * sc.b / (1 - sc.q) == pytest.approx(sc.b, rel=1e-10)
        literal.append(eps * c["literal"] * sc.b / (1 - sc.q))
    # the other reading grows like eps^-1/2
    for a, c in zip(literal, literal[1:]):
        assert c / a > 3


def test_scaled_field_interpolation():
    sc = WeakScaling(1e-2)
    g = gartner_transform(Configuration(np.arange(600)), sc)
    f = scaled_field(g, sc)
    assert f.constant == pytest.approx(normalization_constants(sc)["sqrt"])
    assert f(0.0) == pytest.approx(f.constant * sc.b, rel=1e-12)
    assert f(0.005) == pytest.approx(0.5 * (f.values[0] + f.values[1]), rel=1e-12)
    assert f(-1.0) == 0.0
    assert scaled_field(g, sc, normalize=False).constant == 1.0


def test_moment_bound():
    r = moment_bound_check(WeakScaling(0.05), 0.5, 50, np.random.default_rng(2))
    assert r["finite"] and r["stable"]
    assert r["C_fine"] < 10
    assert math.isfinite(r["C_coarse"])
