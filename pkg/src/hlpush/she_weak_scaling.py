"""Exponential (Gärtner) transform of the height function under weak noise scaling.

With ``q = b**nu`` and ``c = (1/b - 1) / (1 - q)``, the lab-frame field
``W(t, y) = b**(N_y(t) - (1 - nu) y)`` (with ``N_y = 0`` for ``y < 0``) has mean

    d/dt E W(t, y) = c (K W - W)(y) + (c q - 1) E W(t, y),
    K W(y) = sum_{m >= 0} (1 - q) q**m W(y - m),

so ``E W(t) = exp((c q - 1) t) P_t * W(0)`` where ``P_t`` is the law of a rate-``c``
compound Poisson sum of Geometric(1 - q) variables on ``{0, 1, ...}``. The
moving-frame field ``Z(t, x) = W(t, x + floor(t / (1 - q))) exp(-mu t)`` is what
:func:`gartner_transform` returns; :func:`she_mean_residual` checks the mean
identity above against simulation.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import IO, Sequence

import numpy as np
from scipy.special import gammaln
from scipy.stats import poisson

from . import _kernels as K
from .particle_system import Configuration

__all__ = [
    "GOLDEN",
    "WeakScaling",
    "LatticeField",
    "ScaledField",
    "gartner_transform",
    "heat_kernel_p",
    "convolve_fields",
    "heat_kernel_generator_residual",
    "she_mean_residual",
    "heat_kernel_estimate_check",
    "normalization_constants",
    "scaled_field",
    "moment_bound_check",
    "write_field_csv",
]

GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0


@dataclass(frozen=True)
class WeakScaling:
    """Parameters tied to ``eps``: ``b = exp(-lambda sqrt(eps))`` with ``lambda = nu**-1.5``."""

    eps: float
    nu: float = GOLDEN

    def __post_init__(self):
        if not 0.0 < self.eps < 1.0:
            raise ValueError("eps must lie in (0, 1)")
        if not 0.0 < self.nu < 1.0:
            raise ValueError("nu must lie in (0, 1)")

    @property
    def lam(self) -> float:
        return self.nu ** -1.5

    @property
    def b(self) -> float:
        return math.exp(-self.lam * math.sqrt(self.eps))

    @property
    def q(self) -> float:
        return self.b**self.nu

    @property
    def rate(self) -> float:
        """Event rate ``c`` of the compound Poisson heat kernel."""
        return (1.0 / self.b - 1.0) / (1.0 - self.q)

    @property
    def mu(self) -> float:
        b, nu = self.b, self.nu
        return (1.0 / b - 1.0) / (b**-nu - 1.0) + (1.0 - nu) * math.log(b) / (1.0 - b**nu)

    @property
    def gamma(self) -> float:
        """Exponential growth rate of ``E W`` in the lab frame."""
        return self.rate * self.q - 1.0

    @property
    def golden_residual(self) -> float:
        return 1.0 - self.nu - self.nu**2

    def shift(self, t: float) -> int:
        """Integer frame shift ``floor(t / (1 - q))``."""
        return int(math.floor(t / (1.0 - self.q)))

    def kernel_mean(self, dt: float) -> float:
        return self.rate * dt * self.q / (1.0 - self.q)

    def kernel_variance(self, dt: float) -> float:
        q = self.q
        return self.rate * dt * q * (1.0 + q) / (1.0 - q) ** 2

    def literal_offset(self, dt: float) -> float:
        return (1.0 / self.b - 1.0) * dt / (1.0 - self.q) ** 2

    def to_dict(self) -> dict:
        return {"eps": self.eps, "nu": self.nu, "lambda": self.lam, "b": self.b, "q": self.q,
                "rate": self.rate, "mu": self.mu, "gamma": self.gamma}


@dataclass
class LatticeField:
    """Values on the points ``xi0 + k - offset`` for ``k = 0 .. len(values) - 1``."""

    xi0: int
    values: np.ndarray
    offset: float = 0.0
    time: float = 0.0
    meta: dict = field(default_factory=dict)

    @property
    def points(self) -> np.ndarray:
        return self.xi0 + np.arange(self.values.shape[0]) - self.offset

    @property
    def support(self) -> tuple[float, float]:
        nz = np.flatnonzero(self.values)
        if nz.size == 0:
            return (math.nan, math.nan)
        p = self.points
        return float(p[nz[0]]), float(p[nz[-1]])

    def at(self, xi: int) -> float:
        k = int(xi) - self.xi0
        return float(self.values[k]) if 0 <= k < self.values.shape[0] else 0.0


def write_field_csv(fh: IO[str], fld: LatticeField, eps: float) -> None:
    fh.write(f"# eps={eps!r} t={fld.time!r} offset={fld.offset!r}\n")
    fh.write("xi,value\n")
    for x, v in zip(fld.points, fld.values):
        fh.write(f"{x!r},{float(v)!r}\n")


# -- Gärtner transform --------------------------------------------------------

def _log_w(heights: np.ndarray, ys: np.ndarray, sc: WeakScaling) -> np.ndarray:
    return (heights - (1.0 - sc.nu) * ys) * math.log(sc.b)


def gartner_transform(config: Configuration, scaling: WeakScaling, y_max: int | None = None) -> LatticeField:
    """``Z(t, x)`` for ``x + floor(t / (1 - q))`` in ``[0, y_max]``.

    ``y_max`` defaults to the rightmost occupied site.
    """
    if not math.isfinite(config.time):
        raise ValueError("configuration time must be finite")
    pos = np.sort(np.asarray(config.positions, dtype=np.int64))
    if y_max is None:
        y_max = int(pos[-1]) if pos.size else 0
    ys = np.arange(y_max + 1)
    heights = np.searchsorted(pos, ys, side="right")
    logz = _log_w(heights, ys, scaling) - scaling.mu * config.time
    s = scaling.shift(config.time)
    return LatticeField(-s, np.exp(logz), 0.0, float(config.time), {"frame_shift": s})


# -- heat kernel --------------------------------------------------------------

def _compound_pmf(sc: WeakScaling, dt: float, tail: float = 1e-15) -> np.ndarray:
    """Law of the uncentred sum on ``{0, 1, ...}``, truncated past mass ``1e-16``."""
    lam = sc.rate * dt
    q = sc.q
    if lam == 0.0:
        return np.array([1.0])
    n_lo = int(poisson.ppf(tail, lam))
    n_hi = int(poisson.isf(tail, lam)) + 1
    ns = np.arange(max(n_lo, 0), n_hi + 1)
    pn = poisson.logpmf(ns, lam)
    mean, var = sc.kernel_mean(dt), sc.kernel_variance(dt)
    m_hi = int(math.ceil(mean + 12.0 * math.sqrt(var) + 40.0 / (1.0 - q)))
    ms = np.arange(m_hi + 1)
    out = np.zeros(m_hi + 1)
    if ns[0] == 0:
        out[0] += math.exp(pn[0])
        ns, pn = ns[1:], pn[1:]
    if ns.size:
        n = ns[:, None].astype(float)
        m = ms[None, :].astype(float)
        # negative binomial: C(m + n - 1, m) (1 - q)^n q^m
        lnb = gammaln(m + n) - gammaln(m + 1) - gammaln(n) + n * math.log1p(-q) + m * math.log(q)
        out += np.exp(pn[:, None] + lnb).sum(axis=0)
    return out


def heat_kernel_p(scaling: WeakScaling, dt: float, xi_range: tuple[float, float] | None = None,
                  centering: str = "exact") -> LatticeField:
    """Discrete heat kernel over a time step ``dt``.

    ``centering="exact"`` recentres by the true mean ``c q dt / (1 - q)`` so the
    kernel has mean zero; ``"literal"`` uses ``c dt / (1 - q)``, which leaves a
    mean of ``-c dt``. ``xi_range`` clips the returned points.
    """
    if dt < 0:
        raise ValueError("dt must be non-negative")
    vals = _compound_pmf(scaling, dt)
    if centering == "exact":
        off = scaling.kernel_mean(dt)
    elif centering == "literal":
        off = scaling.literal_offset(dt)
    else:
        raise ValueError("centering must be 'exact' or 'literal'")
    fld = LatticeField(0, vals, off, float(dt), {"centering": centering})
    if xi_range is not None:
        pts = fld.points
        keep = (pts >= xi_range[0]) & (pts <= xi_range[1])
        idx = np.flatnonzero(keep)
        if idx.size == 0:
            return LatticeField(0, np.zeros(0), off, float(dt), fld.meta)
        fld = LatticeField(int(idx[0]), vals[idx[0]:idx[-1] + 1], off, float(dt), fld.meta)
    return fld


def convolve_fields(a: LatticeField, c: LatticeField) -> LatticeField:
    """Convolution; offsets and starting indices add."""
    return LatticeField(a.xi0 + c.xi0, np.convolve(a.values, c.values), a.offset + c.offset,
                        a.time + c.time)


def heat_kernel_generator_residual(scaling: WeakScaling, t: float, h: float = 1e-4) -> float:
    """Sup distance between a centred difference ``dp/dt`` and ``c (K p - p)`` on the raw lattice."""
    pm = _compound_pmf(scaling, t - h)
    pp = _compound_pmf(scaling, t + h)
    p0 = _compound_pmf(scaling, t)
    n = max(pm.size, pp.size, p0.size)
    pm, pp, p0 = (np.pad(v, (0, n - v.size)) for v in (pm, pp, p0))
    q = scaling.q
    kern = (1.0 - q) * q ** np.arange(n)
    kp = np.convolve(p0, kern)[:n]
    return float(np.max(np.abs((pp - pm) / (2.0 * h) - scaling.rate * (kp - p0))))


# -- mean identity -----------------------------------------------------------

def _log_w0_step(y: np.ndarray, sc: WeakScaling) -> np.ndarray:
    # step data on Z>=0: N_y(0) = y + 1 for y >= 0 and 0 to the left
    h = np.where(y >= 0, y + 1, 0)
    return _log_w(h, y, sc)


def _predicted_log_mean(sc: WeakScaling, t: float, ys: np.ndarray) -> np.ndarray:
    """``log E W(t, y)`` from the exact mean equation, for step data."""
    if t == 0:
        return _log_w0_step(ys, sc)
    pm = _compound_pmf(sc, t)
    m = np.arange(pm.size)
    out = np.empty(ys.shape)
    for k, y in enumerate(ys):
        lw = _log_w0_step(y - m, sc) + np.log(np.where(pm > 0, pm, 1e-300))
        top = lw.max()
        out[k] = top + math.log(np.exp(lw - top).sum())
    return out + sc.gamma * t


def _literal_log_mean(sc: WeakScaling, t: float, xs: np.ndarray) -> np.ndarray:
    """``log [p(0, t) * Z(0)](x)`` with the literal offset and no growth factor."""
    if t == 0:
        return _log_w0_step(xs, sc)
    pm = _compound_pmf(sc, t)
    m = np.arange(pm.size)
    phi = sc.literal_offset(t)
    out = np.empty(xs.shape)
    for k, x in enumerate(xs):
        # p(xi) lives on Z - phi; Z(0) on Z, so evaluate at the nearest admissible lattice point
        y = np.round(x + phi) - m
        lw = _log_w0_step(y, sc) + np.log(np.where(pm > 0, pm, 1e-300))
        top = lw.max()
        out[k] = top + math.log(np.exp(lw - top).sum())
    return out


def she_mean_residual(scaling: WeakScaling, t: float, replicas: int, rng: np.random.Generator,
                      window: int = 50) -> dict:
    """Compare the Monte Carlo mean of ``Z(t, .)`` with the heat-kernel prediction.

    The window holds ``window`` consecutive sites centred on the peak of the
    predicted mean. Simulating ``[0, y_max]`` alone is exact for every
    ``y <= y_max`` because cascades only move right. Deviations are reported
    in standard errors.
    """
    if replicas < 2:
        raise ValueError("need at least two replicas")
    sc = scaling
    s = sc.shift(t)
    centre = int(round(sc.kernel_mean(t)))
    ys = np.arange(max(0, centre - window // 2), max(0, centre - window // 2) + window)
    xs = ys - s
    y_max = int(ys[-1])
    log_pred = _predicted_log_mean(sc, t, ys) - sc.mu * t
    log_lit = _literal_log_mean(sc, t, xs.astype(float))
    ref = log_pred.max()
    if t == 0:
        z = np.zeros(window)
        return {"t": t, "x": xs.tolist(), "max_abs_z": 0.0, "z": z.tolist(), "replicas": replicas,
                "growth_rate": sc.gamma - sc.mu, "literal_max_abs_z": 0.0, "passed": True,
                "stationary": True}
    init = np.arange(y_max + 1, dtype=np.int64)
    samples = np.empty((replicas, window))
    stats = np.zeros(K.N_STATS, dtype=np.int64)
    for r in range(replicas):
        pos = np.empty(y_max + 2, dtype=np.int64)
        pos[:y_max + 1] = init
        out, _, _ = K.run_heights(pos, 0, y_max + 1, sc.b, 0.0, y_max, np.array([float(t)]), ys, rng, stats)
        samples[r] = np.exp(_log_w(out[0], ys, sc) - sc.mu * t - ref)
    mean = samples.mean(axis=0)
    se = samples.std(axis=0, ddof=1) / math.sqrt(replicas)
    pred = np.exp(log_pred - ref)
    lit = np.exp(log_lit - ref)
    with np.errstate(divide="ignore", invalid="ignore"):
        z = np.where(se > 0, (mean - pred) / se, 0.0)
        zl = np.where(se > 0, (mean - lit) / se, 0.0)
    growth = sc.gamma - sc.mu
    return {
        "t": t,
        "x": xs.tolist(),
        "mc_mean_scaled": mean.tolist(),
        "predicted_scaled": pred.tolist(),
        "stderr_scaled": se.tolist(),
        "log_scale": float(ref),
        "z": z.tolist(),
        "max_abs_z": float(np.max(np.abs(z))),
        "literal_max_abs_z": float(np.max(np.abs(zl))),
        "replicas": replicas,
        "growth_rate": growth,
        "stationary": abs(growth) * t < 1e-6,
        "passed": bool(np.max(np.abs(z)) <= 4.0),
    }


# -- heat kernel estimates ------------------------------------------------------

def _estimate_ratios(sc: WeakScaling, dt: float, u: float, v: float) -> dict:
    p = heat_kernel_p(sc, dt)
    xi, w = p.points, p.values
    eps = sc.eps
    damp = np.exp(u * eps * np.abs(xi))
    lhs1 = float(np.sum(w * damp))
    lhs2 = float(np.sum(w * np.abs(xi) ** v * damp))
    lhs3 = float(np.max(w))
    # Hölder quotient: adjacent differences dominate for unimodal kernels, but scan all lags up to 64
    lhs4 = 0.0
    for lag in range(1, min(64, w.size)):
        lhs4 = max(lhs4, float(np.max(np.abs(w[lag:] - w[:-lag]))) / lag**v)
    sh2 = eps ** (-v / 2.0) * dt ** (v / 2.0)
    sh3 = math.sqrt(eps) * min(1.0, dt ** -0.5)
    sh4 = eps ** ((1.0 + v) / 2.0) * min(1.0, dt ** (-(1.0 + v) / 2.0))
    return {"i": lhs1, "ii": lhs2 / sh2, "iii": lhs3 / sh3, "iv": lhs4 / sh4}


def heat_kernel_estimate_check(eps_levels: Sequence[float] = (1e-2, 1e-3),
                               dts: Sequence[float] = (1.0, 10.0, 100.0), T: float = 1.0,
                               u: float = 1.0, v: float = 0.5,
                               macro: Sequence[float] = (0.01, 0.1, 1.0)) -> dict:
    """Empirical constants of the four heat-kernel bounds.

    For each ``eps`` the time steps are ``dts`` together with ``f T / eps`` for
    ``f`` in ``macro``, all capped at ``T / eps``. The constant of an estimate
    is the largest ratio of its left side to its right-hand shape. An estimate
    is called stable when successive ``eps`` levels give constants within a
    factor 2 of each other.
    """
    per_level = {}
    for eps in eps_levels:
        sc = WeakScaling(eps)
        grid = sorted({float(d) for d in dts if d <= T / eps} | {f * T / eps for f in macro})
        rows = {dt: _estimate_ratios(sc, dt, u, v) for dt in grid}
        per_level[eps] = {"ratios": rows,
                          "C": {k: max(r[k] for r in rows.values()) for k in ("i", "ii", "iii", "iv")}}
    report = {"u": u, "v": v, "T": T, "levels": per_level, "estimates": {}}
    for k in ("i", "ii", "iii", "iv"):
        cs = [per_level[e]["C"][k] for e in eps_levels]
        growth = max(max(a, c) / min(a, c) for a, c in zip(cs, cs[1:])) if len(cs) > 1 else 1.0
        finite = all(math.isfinite(c) for c in cs)
        report["estimates"][k] = {"C": cs, "max_level_ratio": growth, "finite": finite,
                                  "stable": bool(finite and growth < 2.0)}
    report["passed"] = all(e["stable"] for e in report["estimates"].values())
    return report


# -- continuum scaling -----------------------------------------------------------

def normalization_constants(scaling: WeakScaling) -> dict:
    """Both readings of the step-data prefactor.

    ``"sqrt"`` puts ``sqrt(eps)`` in the exponent, ``"literal"`` does not.
    Only the first keeps ``eps * sum Z~(0)`` bounded as ``eps -> 0``.
    """
    e, lam, nu = scaling.eps, scaling.lam, scaling.nu
    return {"sqrt": (1.0 - math.exp(-lam * nu * math.sqrt(e))) / e,
            "literal": (1.0 - math.exp(-lam * nu)) / e}


@dataclass
class ScaledField:
    x: np.ndarray
    values: np.ndarray
    t: float
    constant: float

    def __call__(self, x):
        return np.interp(x, self.x, self.values, left=0.0, right=0.0)


def scaled_field(fld: LatticeField, scaling: WeakScaling, normalize: bool = True,
                 reading: str = "sqrt") -> ScaledField:
    """``Z_eps(t, x) = Z(t / eps, x / eps)``, linearly interpolated in ``x``."""
    const = normalization_constants(scaling)[reading] if normalize else 1.0
    return ScaledField(scaling.eps * fld.points, const * fld.values, scaling.eps * fld.time, const)


def moment_bound_check(scaling: WeakScaling, T: float, replicas: int, rng: np.random.Generator,
                       points: int = 8, reading: str = "sqrt") -> dict:
    """Monte Carlo ``sup_zeta ||Z~(t, zeta)||_2`` against ``min(eps^-1/2, (eps t)^-1/2)``.

    The time grid has ``points`` equally spaced values in ``(0, T / eps]``;
    the refined grid interleaves their midpoints. Stability compares the
    empirical constants of the two grids.
    """
    sc = scaling
    const = normalization_constants(sc)[reading]
    tmax = T / sc.eps
    coarse = tmax * np.arange(1, points + 1) / points
    fine = tmax * (np.arange(1, 2 * points + 1) - 0.5) / (2 * points)
    times = np.unique(np.concatenate(([0.0], coarse, fine)))
    spread = math.sqrt(sc.kernel_variance(tmax))
    y_max = int(sc.kernel_mean(tmax) + 8.0 * spread + 50)
    ys = np.arange(y_max + 1)
    ref = 0.0
    acc = np.zeros((times.size, ys.size))
    stats = np.zeros(K.N_STATS, dtype=np.int64)
    for _ in range(replicas):
        pos = np.arange(y_max + 1, dtype=np.int64)
        out, _, _ = K.run_heights(pos, 0, y_max + 1, sc.b, 0.0, y_max, times, ys, rng, stats)
        lz = _log_w(out, ys[None, :], sc) - sc.mu * times[:, None]
        acc += np.exp(2.0 * (lz - ref))
    norms = const * np.sqrt(acc.max(axis=1) / replicas)
    shape = np.array([min(sc.eps**-0.5, (sc.eps * t) ** -0.5) if t > 0 else sc.eps**-0.5 for t in times])
    ratio = norms / shape
    c_coarse = float(max(ratio[np.isin(times, coarse)].max(), ratio[0]))
    c_fine = float(ratio.max())
    return {"times": times.tolist(), "norms": norms.tolist(), "ratios": ratio.tolist(),
            "C_coarse": c_coarse, "C_fine": c_fine,
            "stable": bool(c_fine / c_coarse < 2.0), "finite": bool(np.isfinite(c_fine)),
            "reading": reading}

