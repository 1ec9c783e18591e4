import math

import numpy as np
import pytest
from scipy.special import ndtr
from scipy.stats import binom

from hlpush.fredholm import (
    Contour,
    FredholmConvergenceError,
    HadamardViolation,
    KernelSpec,
    distribution_mean,
    distribution_median,
    distribution_table,
    f_goe_real_line,
    f_goe_sq,
    f_gue,
    f_gue_real_line,
    fredholm_det,
    gaussian_via_fredholm,
    hadamard_ratio,
    moment_qL,
    q_binomial,
    q_laplace_closed_form_t0,
    q_laplace_finite_t,
    q_pochhammer,
    tabulate,
)
from hlpush.particle_system import sample_heights_batch


# -- q-special functions --------------------------------------------------------------

def test_q_pochhammer_values():
    assert q_pochhammer(0.5, 0.5).real == pytest.approx(0.2887880951, abs=1e-10)
    assert q_pochhammer(0.3, 0.5, 0) == 1.0
    assert q_pochhammer(0.3, 0.5, 2) == pytest.approx((1 - 0.3) * (1 - 0.15), rel=1e-15)
    with pytest.raises(ValueError):
        q_pochhammer(0.3, 1.0)


def test_q_binomial_values():
    assert q_binomial(4, 2, 0.5) == pytest.approx(2.1875, rel=1e-15)
    assert q_binomial(5, 0, 0.3) == 1.0 and q_binomial(5, 5, 0.3) == 1.0
    assert q_binomial(3, 4, 0.3) == 0.0
    # q -> 1 recovers the ordinary binomial
    assert q_binomial(6, 3, 1 - 1e-9) == pytest.approx(20.0, rel=1e-6)


# -- determinant machinery ----------------------------------------------------------------

def _constant_kernel(value):
    return KernelSpec("const", lambda w, wp, lvl: np.full((w.size, wp.size), value, dtype=np.complex128))


def test_zero_kernel_gives_one():
    r = fredholm_det(_constant_kernel(0.0), Contour.circle(0, 1.0, 16))
    assert r.value == 1.0 and r.converged


def test_rank_one_kernel():
    # K(w, w') = f(w) g(w') gives 1 + (1/2 pi i) oint f g dw
    def ev(w, wp, lvl):
        return np.outer(1.0 / w, np.ones_like(wp))

    r = fredholm_det(KernelSpec("rank1", ev), Contour.circle(0, 1.0, 32))
    assert abs(r.value - 2.0) < 1e-12


def test_non_convergence_is_reported():
    # a kernel that changes with refinement never settles
    def ev(w, wp, lvl):
        return np.outer(1.0 / w, np.ones_like(wp)) * (1 + lvl)

    with pytest.raises(FredholmConvergenceError) as exc:
        fredholm_det(KernelSpec("drift", ev), Contour.circle(0, 1.0, 16), max_doublings=2)
    assert exc.value.last != exc.value.previous


def test_hadamard_ratio_bounds():
    rng = np.random.default_rng(0)
    for _ in range(20):
        a = rng.standard_normal((6, 6)) + 1j * rng.standard_normal((6, 6))
        assert hadamard_ratio(a, np.linalg.det(a)) <= 1 + 1e-12
    assert hadamard_ratio(np.eye(3), 5.0) > 1
    assert issubclass(HadamardViolation, AssertionError)


# -- limiting distributions ---------------------------------------------------------------

@pytest.mark.parametrize("s", [-2.0, 0.0, 0.5, 2.0])
def test_gaussian_determinant(s):
    assert gaussian_via_fredholm(s) == pytest.approx(float(ndtr(s)), abs=1e-9)


def test_gaussian_examples():
    assert gaussian_via_fredholm(0.0) == pytest.approx(0.5, abs=1e-12)
    assert gaussian_via_fredholm(2.0) == pytest.approx(0.977250, abs=1e-6)


@pytest.mark.parametrize("s", [-3.0, -1.0, 0.5, 2.0])
def test_gue_matches_real_line(s):
    assert f_gue(s) == pytest.approx(f_gue_real_line(s), abs=1e-9)


def test_gue_anchor_independence_and_tails():
    assert abs(f_gue(-1.0) - f_gue(-1.0, anchor=-1.5)) < 1e-8
    assert f_gue(-7.0) < 1e-10
    assert f_gue(4.0) > 1 - 1e-6


@pytest.mark.parametrize("s", [-3.0, -1.0, 0.5, 2.0])
def test_goe_sq_matches_real_line(s):
    assert f_goe_sq(s) == pytest.approx(f_goe_real_line(s) ** 2, abs=1e-9)


def test_goe_sq_delta_independence_and_tails():
    assert abs(f_goe_sq(-1.0, 0.3) - f_goe_sq(-1.0, 0.6)) < 1e-8
    assert f_goe_sq(-7.0) < 1e-10
    assert f_goe_sq(4.0) > 1 - 1e-3
    with pytest.raises(ValueError):
        f_goe_sq(0.0, delta=0.0)


def test_tables_monotone_and_certified():
    for name in ("gue", "goe2"):
        tab = tabulate(name, np.arange(-5.0, 3.01, 0.5))
        assert tab.certified.all() and tab.monotone
    with pytest.raises(ValueError):
        tabulate("nope", [0.0])
    with pytest.raises(ValueError):
        tabulate("gue", [1.0, 0.0])


def test_gue_median_and_mean():
    tab = distribution_table("gue")
    med = distribution_median(tab.cdf)
    assert med == pytest.approx(-1.80491, abs=1e-4)
    assert f_gue_real_line(med) == pytest.approx(0.5, abs=1e-6)
    assert distribution_mean(tab.cdf) == pytest.approx(-1.7711, abs=1e-3)


# -- finite-time formulas ---------------------------------------------------------------

@pytest.mark.parametrize("rho,zeta", [(1.0, -0.7), (0.6, -0.7), (0.6, -5.0)])
def test_q_laplace_at_time_zero(rho, zeta):
    got = q_laplace_finite_t(3, 0.0, 0.5, rho, zeta)
    assert abs(got - q_laplace_closed_form_t0(3, 0.5, rho, zeta)) < 1e-8


def test_q_laplace_small_zeta():
    assert abs(q_laplace_finite_t(3, 1.0, 0.5, 1.0, -1e-9) - 1.0) < 1e-8
    assert q_laplace_finite_t(3, 1.0, 0.5, 1.0, 0) == 1.0
    with pytest.raises(ValueError):
        q_laplace_finite_t(3, 1.0, 0.5, 1.0, 0.5)


def test_moments_at_time_zero():
    assert moment_qL(3, 0.0, 0.5, 1.0, 1) == pytest.approx(0.5**4, abs=1e-12)
    k = np.arange(5)
    exact = float(np.sum(binom.pmf(k, 4, 0.6) * 0.25**k))
    assert moment_qL(3, 0.0, 0.5, 0.6, 2) == pytest.approx(exact, abs=1e-10)
    with pytest.raises(ValueError):
        moment_qL(3, 0.0, 0.5, 1.0, 4)


def test_q_laplace_and_moment_against_simulation():
    b, rho, x, t, reps = 0.5, 1.0, 3, 1.0, 200_000
    n = sample_heights_batch(b, rho, x, t, reps, np.random.default_rng(31)).astype(float)
    zeta = -0.7
    f = 1.0 / np.array([q_pochhammer(zeta * b**k, b).real for k in range(int(n.max()) + 1)])
    vals = f[n.astype(int)]
    pred = q_laplace_finite_t(x, t, b, rho, zeta)
    assert abs(pred.imag) < 1e-8
    assert abs(vals.mean() - pred.real) <= 4 * vals.std(ddof=1) / math.sqrt(reps)
    m = b**n
    assert abs(m.mean() - moment_qL(x, t, b, rho, 1)) <= 4 * m.std(ddof=1) / math.sqrt(reps)
