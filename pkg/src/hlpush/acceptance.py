"""The acceptance suite: eleven numbered gates, each returning a ``CriterionResult``.

Every gate runs at its pre-registered tolerance. Seeds are fixed so reruns are
bit-identical. Monte Carlo gates take tens of minutes each; the CLI exposes a
``scale`` factor for smoke runs, which shrinks replica counts and marks the
result as not authoritative.
"""
from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.special import ndtr

from . import exact_formulas as ef
from . import observables as obs
from . import particle_system as ps
from . import she_weak_scaling as she
from .fredholm import distributions as dist
from .fredholm import finite_time as ft
from .fredholm.qspecial import q_pochhammer

__all__ = ["CriterionResult", "CRITERIA", "run_criterion", "run_all", "format_line"]

SEED = 20261016


@dataclass
class CriterionResult:
    number: int
    title: str
    passed: bool
    summary: str
    metrics: dict = field(default_factory=dict)
    seconds: float = 0.0
    scale: float = 1.0

    def to_dict(self) -> dict:
        return {"number": self.number, "title": self.title, "passed": self.passed,
                "summary": self.summary, "metrics": self.metrics, "seconds": self.seconds,
                "scale": self.scale}


def format_line(r: CriterionResult) -> str:
    tag = "PASS" if r.passed else "FAIL"
    note = "" if r.scale == 1.0 else f" [scale {r.scale:g}, not authoritative]"
    return f"{tag} C{r.number} {r.title}: {r.summary}{note}"


def _reps(n: int, scale: float) -> int:
    return max(2, int(round(n * scale)))


def _master(init, t, b, bound=40):
    while True:
        try:
            return ef.master_equation_pmf(init, t, bound, b)
        except ef.LeakError as e:
            bound = e.suggested_bound


# -- 1 ------------------------------------------------------------------------

def criterion_1(scale: float = 1.0) -> CriterionResult:
    worst = {"single_vs_master": 0.0, "single_vs_contour": 0.0, "master_vs_contour": 0.0}
    ks = np.arange(31)
    for b in (0.2, 0.5, 0.8):
        for t in (0.25, 1.0, 4.0):
            sp = ef.single_particle_pmf(t, ks, b)
            me = _master([0], t, b)
            mv = np.array([me[(int(k),)] for k in ks])
            cv = np.array([ef.transition_pmf_contour((0,), (int(k),), t, b) for k in ks])
            worst["single_vs_master"] = max(worst["single_vs_master"], float(np.max(np.abs(sp - mv))))
            worst["single_vs_contour"] = max(worst["single_vs_contour"], float(np.max(np.abs(sp - cv))))
            worst["master_vs_contour"] = max(worst["master_vs_contour"], float(np.max(np.abs(mv - cv))))
    multi = 0.0
    cases = [((0, 1), 0.5, 0.5, [(0, 1), (0, 2), (1, 2), (1, 3), (2, 4), (0, 5), (3, 4)]),
             ((0, 2), 1.0, 0.3, [(0, 2), (1, 3), (2, 3), (4, 7)]),
             ((0, 1, 3), 0.3, 0.5, [(0, 1, 3), (0, 2, 3), (1, 2, 4), (0, 1, 5), (2, 3, 6)])]
    for init, t, b, finals in cases:
        me = _master(init, t, b)
        for y in finals:
            multi = max(multi, abs(me[y] - ef.transition_pmf_contour(init, y, t, b)))
    worst["multi_particle"] = float(multi)
    ok1 = max(worst[k] for k in ("single_vs_master", "single_vs_contour", "master_vs_contour")) <= 1e-8
    ok = bool(ok1 and multi <= 1e-6)
    summ = (f"N=1 max pairwise gap {max(v for k, v in worst.items() if k != 'multi_particle'):.2e} (gate 1e-8); "
            f"N=2,3 contour vs master {multi:.2e} (gate 1e-6)")
    return CriterionResult(1, "oracle triangle", ok, summ, worst)


# -- 2 ------------------------------------------------------------------------

def criterion_2(scale: float = 1.0) -> CriterionResult:
    rng = np.random.default_rng(SEED + 2)
    b = 0.5
    worst, worst_bound, n = 0.0, 0.0, 0
    while n < 20:
        rad = 0.6 * np.sqrt(rng.random(2))
        z = rad * np.exp(2j * np.pi * rng.random(2))
        try:
            bv = ef.BetheVector(z, b)
        except ValueError:
            continue
        x0 = int(rng.integers(0, 4))
        x = (x0, x0 + 1 + int(rng.integers(0, 4)))
        res, bound = ef.eigenfunction_residual(bv, x, b)
        worst, worst_bound = max(worst, res), max(worst_bound, bound)
        n += 1
    ok = worst <= 1e-8
    return CriterionResult(2, "Bethe eigenfunction residual", ok,
                           f"max residual {worst:.2e} over 20 vectors (gate 1e-8); tail bound {worst_bound:.1e}",
                           {"max_residual": worst, "max_tail_bound": worst_bound})


# -- 3 ------------------------------------------------------------------------

GUE_MEDIAN_TARGET = -1.2719
GUE_MEAN_TARGET = -1.7711


def criterion_3(scale: float = 1.0) -> CriterionResult:
    pts = (-3.0, -1.0, 0.0, 1.0, 3.0)
    gerr = max(abs(dist.gaussian_via_fredholm(s) - float(ndtr(s))) for s in pts)
    gaps = []
    for s in pts:
        gaps.append(dist.gaussian_via_fredholm_result(s).gap)
    for s in (-4.0, -2.0, -1.0, 0.0, 2.0):
        gaps.append(dist.f_gue_result(s).gap)
    for s in (-2.0, 0.0, 2.0):
        gaps.append(dist.f_goe_sq_result(s).gap)
    max_gap = float(max(gaps))
    median = dist.distribution_median(dist.f_gue)
    mean = dist.distribution_mean(dist.f_gue)
    mean_dense = dist.distribution_mean(dist.f_gue, n=192)
    median_ref = dist.distribution_median(lambda s: dist.f_gue_real_line(s, n=120))
    ok_gauss = gerr <= 1e-6
    ok_median = abs(median - GUE_MEDIAN_TARGET) <= 1e-3
    ok_mean = abs(mean - GUE_MEAN_TARGET) <= 1e-3 and abs(mean - mean_dense) <= 1e-3
    ok_gap = max_gap < 1e-9
    ok = bool(ok_gauss and ok_median and ok_mean and ok_gap)
    summ = (f"Gaussian vs Phi {gerr:.1e}; GUE median {median:.5f} (target {GUE_MEDIAN_TARGET}, "
            f"real-line reference {median_ref:.5f}) {'ok' if ok_median else 'MISS'}; "
            f"mean {mean:.5f} (dense {mean_dense:.5f}) {'ok' if ok_mean else 'MISS'}; max gap {max_gap:.1e}")
    return CriterionResult(3, "Fredholm sanity", ok, summ,
                           {"gaussian_max_error": gerr, "gue_median": median, "gue_median_reference": median_ref,
                            "gue_mean": mean, "gue_mean_dense": mean_dense, "max_doubling_gap": max_gap,
                            "ok": {"gaussian": ok_gauss, "median": ok_median, "mean": ok_mean, "gap": ok_gap}})


# -- 4 ------------------------------------------------------------------------

QLAPLACE_ZETAS = (-8.0, -0.7)


def criterion_4(scale: float = 1.0) -> CriterionResult:
    x, t, b = 5, 1.0, 0.5
    reps = _reps(1_000_000, scale)
    rows, worst_z = [], 0.0
    for rho in (0.5, 1.0):
        h = ps.sample_heights_batch(b, rho, x, t, reps, np.random.default_rng(SEED + int(rho * 10)))
        bn = b ** h.astype(float)
        for L in (1, 2, 3):
            obsv = bn**L
            exact = ft.moment_qL(x, t, b, rho, L)
            se = obsv.std(ddof=1) / math.sqrt(reps)
            z = (obsv.mean() - exact) / se
            rows.append({"kind": f"moment L={L}", "rho": rho, "exact": exact, "mc": float(obsv.mean()), "z": float(z)})
            worst_z = max(worst_z, abs(z))
        for zeta in QLAPLACE_ZETAS:
            obsv = 1.0 / q_pochhammer(zeta * bn, b).real
            exact = ft.q_laplace_finite_t(x, t, b, rho, zeta).real
            se = obsv.std(ddof=1) / math.sqrt(reps)
            z = (obsv.mean() - exact) / se
            rows.append({"kind": f"qlaplace zeta={zeta}", "rho": rho, "exact": exact, "mc": float(obsv.mean()), "z": float(z)})
            worst_z = max(worst_z, abs(z))
    t0_err = 0.0
    for rho in (0.5, 1.0):
        for zeta in QLAPLACE_ZETAS:
            t0_err = max(t0_err, abs(ft.q_laplace_finite_t(x, 0.0, b, rho, zeta)
                                     - ft.q_laplace_closed_form_t0(x, b, rho, zeta)))
        for L in (1, 2, 3):
            t0_err = max(t0_err, abs(ft.moment_qL(x, 0.0, b, rho, L) - (1.0 - rho + rho * b**L) ** (x + 1)))
    ok = bool(worst_z <= 3.0 and t0_err <= 1e-6)
    summ = f"max |z| {worst_z:.2f} over {len(rows)} MC comparisons at {reps} replicas (gate 3); t=0 error {t0_err:.1e} (gate 1e-6)"
    return CriterionResult(4, "finite-time exact vs Monte Carlo", ok, summ,
                           {"rows": rows, "max_abs_z": worst_z, "t0_error": t0_err, "replicas": reps})


# -- 5 ------------------------------------------------------------------------

def criterion_5(scale: float = 1.0) -> CriterionResult:
    b, t = 0.5, 1000.0
    reps = _reps(100, scale)
    hi = ps.sample_heights_batch(b, 1.0, int(4.0 * t), t, reps, np.random.default_rng(SEED + 5)) / t
    lo = ps.sample_heights_batch(b, 1.0, int(1.5 * t), t, reps, np.random.default_rng(SEED + 6)) / t
    target = obs.limit_shape(4.0, b)
    err = abs(hi.mean() - 0.343146)
    ok = bool(err <= 0.02 and lo.max() <= 0.01)
    summ = f"nu=4 mean {hi.mean():.5f} vs 0.343146 (|diff| {err:.4f}, gate 0.02); nu=1.5 max {lo.max():.4f} (gate 0.01)"
    return CriterionResult(5, "law of large numbers", ok, summ,
                           {"mean_nu4": float(hi.mean()), "limit_shape": target, "max_nu1_5": float(lo.max()),
                            "replicas": reps})


# -- 6-8 ------------------------------------------------------------------------

def _fluct_samples(b, nu, rho, t, reps, seed):
    x = int(nu * t)
    return ps.sample_heights_batch(b, rho, x, t, reps, np.random.default_rng(seed)).astype(float)


def criterion_6(scale: float = 1.0) -> CriterionResult:
    b, nu, t = 0.5, 4.0, 2000.0
    reps = _reps(2000, scale)
    n = _fluct_samples(b, nu, 1.0, t, reps, SEED + 60)
    c = obs.classify_regime(nu, b, 1.0)
    r = obs.rescale_fluctuations(np.column_stack((np.full(reps, t), n)), c)
    table = dist.distribution_table("gue")
    ks = obs.ks_distance(r, table.cdf)
    # diagnostic: the same samples with the scale factor b^(1/3) removed
    alt = r * b ** (1 / 3)
    ks_alt = obs.ks_distance(alt, table.cdf)
    ok = bool(ks <= 0.05 and -2.05 <= r.mean() <= -1.50)
    summ = (f"KS {ks:.4f} (gate 0.05), mean {r.mean():.4f} (gate [-2.05,-1.50]), var {r.var():.3f}; "
            f"without b^(1/3): KS {ks_alt:.4f}, mean {alt.mean():.4f}, var {alt.var():.3f}")
    return CriterionResult(6, "GUE regime", ok, summ,
                           {"ks": ks, "mean": float(r.mean()), "var": float(r.var()), "sigma_nu": c.sigma_nu,
                            "ks_without_b_third": ks_alt, "mean_without_b_third": float(alt.mean()),
                            "var_without_b_third": float(alt.var()), "replicas": reps})


def criterion_7(scale: float = 1.0) -> CriterionResult:
    b, nu, rho, t = 0.5, 4.0, 0.2, 2000.0
    reps = _reps(2000, scale)
    n = _fluct_samples(b, nu, rho, t, reps, SEED + 70)
    c = obs.classify_regime(nu, b, rho)
    r = obs.rescale_fluctuations(np.column_stack((np.full(reps, t), n)), c)
    ks = obs.ks_distance(r, ndtr)
    # diagnostic: variance with alpha in place of alpha^2
    alt = r / math.sqrt(c.alpha)
    ks_alt = obs.ks_distance(alt, ndtr)
    ok = bool(ks <= 0.05)
    summ = (f"KS {ks:.4f} (gate 0.05), mean {r.mean():.4f}, var {r.var():.3f}; "
            f"with alpha for alpha^2: KS {ks_alt:.4f}, var {alt.var():.3f}")
    return CriterionResult(7, "Gaussian regime", ok, summ,
                           {"ks": ks, "mean": float(r.mean()), "var": float(r.var()), "sigma_tilde": c.sigma_tilde,
                            "ks_alpha": ks_alt, "var_alpha": float(alt.var()), "replicas": reps})


def criterion_8(scale: float = 1.0) -> CriterionResult:
    b, nu, t = 0.5, 4.0, 2000.0
    rho = obs.critical_density(nu, b)
    reps = _reps(2000, scale)
    n = _fluct_samples(b, nu, rho, t, reps, SEED + 80)
    c = obs.classify_regime(nu, b, rho, critical=True)
    r = obs.rescale_fluctuations(np.column_stack((np.full(reps, t), n)), c)
    table = dist.distribution_table("goe2")
    ks = obs.ks_distance(r, table.cdf)
    alt = r * b ** (1 / 3)
    ks_alt = obs.ks_distance(alt, table.cdf)
    ok = bool(ks <= 0.07)
    summ = (f"KS {ks:.4f} (gate 0.07), mean {r.mean():.4f}, var {r.var():.3f}; "
            f"without b^(1/3): KS {ks_alt:.4f}, mean {alt.mean():.4f}")
    return CriterionResult(8, "critical regime", ok, summ,
                           {"rho": rho, "ks": ks, "mean": float(r.mean()), "var": float(r.var()),
                            "ks_without_b_third": ks_alt, "replicas": reps})


# -- 9 ------------------------------------------------------------------------

def criterion_9(scale: float = 1.0) -> CriterionResult:
    b, rho, t, window = 0.5, 0.4, 200.0, 200
    reps = _reps(10_000, scale)
    half = window // 2
    occ = np.zeros(half, dtype=np.int64)
    pair = np.zeros(half - 1, dtype=np.int64)
    params = ps.ModelParams(b)
    for g in ps.replica_generators(SEED + 9, reps):
        cfg = ps.run_with_influx(params, rho, t, window, g)
        eta = np.zeros(window + 1, dtype=np.int64)
        eta[cfg.positions] = 1
        occ += eta[:half]
        pair += eta[:half - 1] * eta[1:half]
    p1, p2 = occ / reps, pair / reps
    z1 = (p1 - rho) / math.sqrt(rho * (1 - rho) / reps)
    q = rho * rho
    z2 = (p2 - q) / math.sqrt(q * (1 - q) / reps)
    ok = bool(np.max(np.abs(z1)) <= 3.0 and np.max(np.abs(z2)) <= 3.0)
    summ = (f"max |z| occupation {np.max(np.abs(z1)):.2f} over {half} sites, pairs {np.max(np.abs(z2)):.2f} "
            f"over {half - 1} bonds (gate 3), tau {ps.influx_rate(rho, b):.6f}")
    return CriterionResult(9, "stationarity under influx", ok, summ,
                           {"max_z_occupation": float(np.max(np.abs(z1))), "max_z_pair": float(np.max(np.abs(z2))),
                            "mean_occupation": float(p1.mean()), "mean_pair": float(p2.mean()), "replicas": reps})


# -- 10 ------------------------------------------------------------------------

def semigroup_error(scaling: she.WeakScaling, s: float, t: float) -> float:
    a = she.convolve_fields(she.heat_kernel_p(scaling, s), she.heat_kernel_p(scaling, t))
    c = she.heat_kernel_p(scaling, s + t)
    n = max(a.values.size, c.values.size)
    av = np.pad(a.values, (0, n - a.values.size))
    cv = np.pad(c.values, (0, n - c.values.size))
    return float(max(np.max(np.abs(av - cv)), abs(a.offset - c.offset)))


def criterion_10(scale: float = 1.0) -> CriterionResult:
    sc = she.WeakScaling(1e-2)
    reps = _reps(10_000, scale)
    mean = she.she_mean_residual(sc, 50.0, reps, np.random.default_rng(SEED + 10))
    semi = max(semigroup_error(sc, s, t) for s, t in ((1.0, 2.0), (5.0, 20.0), (30.0, 70.0)))
    est = she.heat_kernel_estimate_check()
    golden = abs(she.WeakScaling(1e-2).golden_residual)
    parts = {"mean": mean["passed"], "semigroup": semi <= 1e-10, "estimates": est["passed"], "golden": golden <= 1e-14}
    ok = bool(all(parts.values()))
    ratios = {k: round(v["max_level_ratio"], 3) for k, v in est["estimates"].items()}
    summ = (f"mean identity max |z| {mean['max_abs_z']:.2f} (gate 4); semigroup {semi:.1e}; "
            f"estimate level ratios {ratios} (gate <2); golden {golden:.1e}")
    return CriterionResult(10, "discrete SHE structure", ok, summ,
                           {"mean_max_abs_z": mean["max_abs_z"], "literal_max_abs_z": mean["literal_max_abs_z"],
                            "semigroup_error": semi, "estimates": est["estimates"], "golden_residual": golden,
                            "parts": parts, "replicas": reps})


# -- 11 ------------------------------------------------------------------------

def criterion_11(scale: float = 1.0) -> CriterionResult:
    eps, b, t = 1e-2, 0.5, 1.0
    reps = _reps(100_000, scale)
    sv = ps.SixVertexParams(1.0 - eps, b, int(round(t / eps)))
    x = ps.sample_six_vertex_batch([0], sv, reps, np.random.default_rng(SEED + 11))[:, 0]
    kmax = int(x.max()) + 1
    emp = np.bincount(x, minlength=kmax) / reps
    oracle = ef.single_particle_pmf(t, np.arange(kmax), b)
    tv = 0.5 * (float(np.sum(np.abs(emp - oracle))) + max(0.0, 1.0 - float(oracle.sum())))
    ok = tv <= 0.05
    return CriterionResult(11, "six-vertex bridge", ok, f"total variation {tv:.4f} at {reps} replicas (gate 0.05)",
                           {"tv": tv, "replicas": reps, "steps": sv.steps})


CRITERIA: dict[int, Callable[[float], CriterionResult]] = {
    1: criterion_1, 2: criterion_2, 3: criterion_3, 4: criterion_4, 5: criterion_5, 6: criterion_6,
    7: criterion_7, 8: criterion_8, 9: criterion_9, 10: criterion_10, 11: criterion_11,
}


def run_criterion(number: int, scale: float = 1.0) -> CriterionResult:
    t0 = time.perf_counter()
    res = CRITERIA[number](scale)
    res.seconds = time.perf_counter() - t0
    res.scale = scale
    return res


def run_all(numbers=None, scale: float = 1.0, callback=None) -> list[CriterionResult]:
    out = []
    for k in numbers or sorted(CRITERIA):
        r = run_criterion(k, scale)
        if callback is not None:
            callback(r)
        out.append(r)
    return out
