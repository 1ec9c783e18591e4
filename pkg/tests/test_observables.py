import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.special import ndtr

from hlpush.observables import (
    Regime,
    classify_regime,
    critical_density,
    empirical_cdf,
    kpz_quantities,
    ks_distance,
    limit_shape,
    rescale_fluctuations,
)
from hlpush.particle_system import Configuration, StepBernoulli, height, replica_generators, simulate_heights


def test_gue_constants():
    c = classify_regime(4.0, 0.5, 1.0)
    assert c.regime is Regime.GUE
    assert c.m_nu == pytest.approx(0.343146, abs=1e-6)
    oracle = 0.5 ** (1 / 3) * (2**0.5 - 1) ** (2 / 3) / (0.5**0.5 * 4 ** (1 / 6))
    assert c.sigma_nu == pytest.approx(oracle, rel=1e-14)
    assert c.sigma_nu == pytest.approx(0.4950448465434, abs=1e-12)
    assert c.varrho == pytest.approx(0.207107, abs=1e-6)
    assert c.m_tilde is None and c.sigma_tilde is None


def test_critical_equality():
    rho = 1 - 2**-0.5
    assert critical_density(4.0, 0.5) == pytest.approx(0.292893, abs=1e-6)
    assert classify_regime(4.0, 0.5, rho).regime is Regime.GOE2
    assert classify_regime(4.0, 0.5, 0.3, critical=True).regime is Regime.GOE2


def test_gaussian_constants():
    c = classify_regime(4.0, 0.5, 0.2)
    assert c.regime is Regime.GAUSSIAN
    assert c.alpha == pytest.approx(4.0)
    assert c.m_tilde == pytest.approx(0.3, abs=1e-12)
    assert c.sigma_tilde == pytest.approx(0.187083, abs=1e-6)
    assert c.sigma_nu is None


def test_subcritical_fan():
    c = classify_regime(1.5, 0.5, 1.0)
    assert c.regime is Regime.SUBCRITICAL_FAN and c.m_nu == 0.0


def test_classify_validation():
    for args in ((4.0, 0.0, 1.0), (4.0, 1.0, 1.0), (4.0, 0.5, 0.0), (0.0, 0.5, 1.0)):
        with pytest.raises(ValueError):
            classify_regime(*args)


def test_limit_shape_examples():
    assert limit_shape(2.0, 0.5) == 0.0
    assert limit_shape(4.0, 0.5) == pytest.approx(0.343146, abs=1e-6)
    assert limit_shape(1e8, 0.5) / 1e8 == pytest.approx(1.0, abs=1e-3)
    with pytest.raises(ValueError):
        limit_shape(-1.0, 0.5)


def test_kpz_examples():
    k = kpz_quantities(1 - 2**-0.5, 0.5)
    assert k.y == pytest.approx(4.0, rel=1e-12)
    assert k.j_rho == pytest.approx(0.828427, abs=1e-6)
    assert kpz_quantities(0.5, 0.3).A_rho == 0.25
    assert k.sigma_check == pytest.approx(classify_regime(4.0, 0.5, 1.0).sigma_nu, abs=1e-12)
    with pytest.raises(ValueError):
        kpz_quantities(1.0, 0.5)


def test_sigma_consistency_grid():
    for b in np.linspace(0.05, 0.95, 20):
        nu0 = 1.0 / (1.0 - b)
        for nu in nu0 * np.linspace(1.05, 8.0, 20):
            c = classify_regime(nu, b, 1.0)
            y_rho = 1.0 - (nu * (1.0 - b)) ** -0.5
            assert abs(c.sigma_nu - kpz_quantities(y_rho, b).sigma_check) <= 1e-12


@settings(max_examples=200, deadline=None)
@given(st.floats(0.05, 0.95), st.floats(1.05, 20.0))
def test_continuity_at_critical_line(b, f):
    nu = f / (1.0 - b)
    rc = critical_density(nu, b)
    alpha = (1 - rc) / rc
    m_tilde = nu / (1 + alpha) - 1 / (alpha * (1 - b))
    assert abs(m_tilde - limit_shape(nu, b)) <= 1e-10
    # just below the line the Gaussian centring approaches the same value
    c = classify_regime(nu, b, rc * (1 - 1e-9))
    assert c.regime is Regime.GAUSSIAN
    assert abs(c.m_tilde - limit_shape(nu, b)) <= 1e-6 * max(1.0, nu)


@settings(max_examples=200, deadline=None)
@given(st.floats(0.05, 0.95), st.floats(1.05, 20.0), st.floats(1e-3, 1.0))
def test_regime_partition(b, f, rho):
    nu = f / (1.0 - b)
    c = classify_regime(nu, b, rho)
    rc = critical_density(nu, b)
    expected = Regime.GOE2 if abs(rho - rc) <= 1e-12 else (Regime.GUE if rho > rc else Regime.GAUSSIAN)
    assert c.regime is expected
    values = [v for v in (c.m_nu, c.sigma_nu, c.varrho, c.m_tilde, c.sigma_tilde) if v is not None]
    assert all(math.isfinite(v) for v in values)
    assert c.m_nu >= 0 and (c.sigma_nu is None or c.sigma_nu > 0)
    assert c.alpha == pytest.approx((1 - rho) / rho)


def test_rescale_examples():
    c = classify_regime(4.0, 0.5, 1.0)
    t = 1000.0
    assert rescale_fluctuations([(t, c.m_nu * t)], c)[0] == pytest.approx(0.0, abs=1e-12)
    n = 300.0
    a = rescale_fluctuations([(t, n)], c)[0]
    b = rescale_fluctuations([(t, n + c.sigma_nu * t ** (1 / 3))], c)[0]
    assert b == pytest.approx(a - 1.0, abs=1e-12)
    g = classify_regime(4.0, 0.5, 0.2)
    assert rescale_fluctuations([(t, g.m_tilde * t)], g)[0] == pytest.approx(0.0, abs=1e-12)


def test_rescale_errors():
    c = classify_regime(4.0, 0.5, 1.0)
    with pytest.raises(ValueError):
        rescale_fluctuations([(0.0, 1.0)], c)
    with pytest.raises(ValueError):
        rescale_fluctuations([(1.0, 1.0)], classify_regime(1.5, 0.5, 1.0))


def test_ks_examples():
    rng = np.random.default_rng(0)
    n = 10_000
    assert ks_distance(rng.standard_normal(n), ndtr) <= 1.63 / math.sqrt(n)
    assert ks_distance([0.0], ndtr) == pytest.approx(0.5)
    base = rng.standard_normal(2000)
    ds = [ks_distance(base + s, ndtr) for s in (0.0, 0.2, 0.5, 1.0, 2.0)]
    assert all(b > a for a, b in zip(ds[1:], ds[2:]))
    with pytest.raises(ValueError):
        ks_distance([], ndtr)


def test_empirical_cdf():
    x, f = empirical_cdf([3.0, 1.0, 2.0])
    assert x.tolist() == [1.0, 2.0, 3.0] and f.tolist() == pytest.approx([1 / 3, 2 / 3, 1.0])


def test_height_particle_duality_on_simulated_configurations():
    # {N_y >= m} and {x_m <= y} are the same event
    for g in replica_generators(3, 20):
        _, c = simulate_heights(0.5, StepBernoulli(0.5, 40), [3.0], [40], g)
        pos = c.positions
        for y in range(-1, 45):
            for m in range(1, pos.size + 1):
                assert (height(c, y) >= m) == (pos[m - 1] <= y)


def test_to_dict():
    d = classify_regime(4.0, 0.5, 0.2).to_dict()
    assert d["regime"] == "Gaussian" and d["sigma_nu"] is None
