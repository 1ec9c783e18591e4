"""Limiting distribution functions as contour Fredholm determinants.

All three kernels share the form

    K(w, w') = (1/2 pi i) int_V  F(w) / F(v) * 1/((v - w)(v - w')) * h(v, w) dv

with ``w`` on a wedge opening to the right and ``v`` on a wedge (or line)
to its left. The inner ``v`` contour is traversed from the upper ray down to
the lower ray; with that orientation ``det(I + K)`` is a distribution
function (checked against the Airy-kernel determinants on the real line
below, and against the normal CDF for the Gaussian kernel).

The inner integral factorises, so the kernel matrix on ``n`` outer nodes and
``m`` inner nodes costs one ``n x m`` by ``m x n`` product.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from functools import lru_cache
from typing import IO, Callable, Sequence

import numpy as np
from scipy.interpolate import PchipInterpolator
from scipy.optimize import brentq
from scipy.special import airy

from .contour import Contour, ray_length
from .det import FredholmResult, KernelSpec, fredholm_det

__all__ = [
    "airy_kernel",
    "goe2_kernel",
    "gaussian_kernel",
    "gue_contour",
    "goe2_contour",
    "gaussian_contour",
    "f_gue",
    "f_gue_result",
    "f_goe_sq",
    "f_goe_sq_result",
    "gaussian_via_fredholm",
    "gaussian_via_fredholm_result",
    "f_gue_real_line",
    "f_goe_real_line",
    "DistributionTable",
    "tabulate",
    "distribution_table",
    "distribution_mean",
    "distribution_median",
    "write_table_csv",
]

BASE_ORDER = 64
_E_UP = np.exp(1j * np.pi / 3)
_E_UP2 = np.exp(2j * np.pi / 3)
_E_UP6 = np.exp(1j * np.pi / 6)


def _wedge(apex: complex, direction: complex, length: float, downward: bool = False):
    """Two segments: lower ray into the apex, then apex out along the upper ray."""
    lo = apex + length * direction.conjugate()
    hi = apex + length * direction
    if downward:
        return [(hi, apex), (apex, lo)]
    return [(lo, apex), (apex, hi)]


def _ray_len(apex: complex, direction: complex, phase: Callable[[np.ndarray], np.ndarray]) -> float:
    def log_abs(r):
        return float(np.real(phase(apex + r * direction)))
    return max(ray_length(log_abs, start=1.0), 4.0)


def _cubic_lengths(s: float, w_apex: complex, v_apex: complex) -> tuple[float, float]:
    lw = _ray_len(w_apex, _E_UP, lambda w: w**3 / 3 - s * w)
    lv = _ray_len(v_apex, _E_UP2, lambda v: -(v**3) / 3 + s * v)
    return lw, lv


def _factorised_kernel(name, fw, fv, v_contour: Contour, params):
    """Build the kernel ``fw(w) * sum_k c_k fv(v_k) / ((v_k - w)(v_k - w'))``."""

    def evaluate(w, wp, level):
        vc = v_contour.refined(2**level) if level else v_contour
        v, c = vc.nodes, vc.weights
        a = 1.0 / (v[None, :] - w[:, None])
        bm = (c * fv(v))[:, None] / (v[:, None] - wp[None, :])
        return fw(w)[:, None] * (a @ bm) / (2j * np.pi)

    return KernelSpec(name, evaluate, params)


def airy_kernel(s: float, anchor: float = -1.0, order: int = BASE_ORDER) -> KernelSpec:
    _, lv = _cubic_lengths(s, 0j, complex(anchor))
    vc = Contour.from_segments(_wedge(complex(anchor), _E_UP2, lv, downward=True), order)
    return _factorised_kernel(
        "airy",
        lambda w: np.exp(w**3 / 3 - s * w),
        lambda v: np.exp(-(v**3) / 3 + s * v),
        vc,
        {"s": s, "anchor": anchor},
    )


def gue_contour(s: float, order: int = BASE_ORDER) -> Contour:
    lw, _ = _cubic_lengths(s, 0j, -1 + 0j)
    return Contour.from_segments(_wedge(0j, _E_UP, lw), order)


def goe2_kernel(s: float, delta: float, order: int = BASE_ORDER) -> KernelSpec:
    _, lv = _cubic_lengths(s, complex(-delta), complex(-2 * delta))
    vc = Contour.from_segments(_wedge(complex(-2 * delta), _E_UP2, lv, downward=True), order)
    return _factorised_kernel(
        "goe2",
        lambda w: np.exp(w**3 / 3 - s * w) / w,
        lambda v: np.exp(-(v**3) / 3 + s * v) * v,
        vc,
        {"s": s, "delta": delta},
    )


def goe2_contour(s: float, delta: float, order: int = BASE_ORDER) -> Contour:
    lw, _ = _cubic_lengths(s, complex(-delta), complex(-2 * delta))
    return Contour.from_segments(_wedge(complex(-delta), _E_UP, lw), order)


def _gauss_lengths(s: float, delta: float) -> tuple[float, float]:
    lw = _ray_len(complex(-delta), _E_UP6, lambda w: -(w**2) / 2 - s * w)
    lv = _ray_len(complex(-2 * delta), 1j, lambda v: v**2 / 2 + s * v)
    return lw, lv


def gaussian_kernel(s: float, delta: float, order: int = BASE_ORDER) -> KernelSpec:
    _, lv = _gauss_lengths(s, delta)
    apex = complex(-2 * delta)
    vc = Contour.from_segments([(apex + 1j * lv, apex), (apex, apex - 1j * lv)], order)
    return _factorised_kernel(
        "gaussian",
        lambda w: np.exp(-(w**2) / 2 - s * w) / w,
        lambda v: np.exp(v**2 / 2 + s * v) * v,
        vc,
        {"s": s, "delta": delta},
    )


def gaussian_contour(s: float, delta: float, order: int = BASE_ORDER) -> Contour:
    lw, _ = _gauss_lengths(s, delta)
    return Contour.from_segments(_wedge(complex(-delta), _E_UP6, lw), order)


def _real(res: FredholmResult, imag_tol: float = 1e-8) -> float:
    if abs(res.value.imag) > imag_tol:
        raise ArithmeticError(f"determinant has imaginary part {res.value.imag:.3e}")
    return float(res.value.real)


def f_gue_result(s: float, anchor: float = -1.0, tol: float = 1e-10) -> FredholmResult:
    return fredholm_det(airy_kernel(s, anchor), gue_contour(s), tol=tol)


def f_gue(s: float, anchor: float = -1.0, tol: float = 1e-10) -> float:
    """GUE Tracy-Widom distribution function."""
    return _real(f_gue_result(s, anchor, tol))


def f_goe_sq_result(s: float, delta: float = 0.4, tol: float = 1e-10) -> FredholmResult:
    if delta <= 0:
        raise ValueError("delta must be positive")
    if delta < 0.05:
        import warnings

        warnings.warn("small delta puts the outer contour close to the pole of 1/w", RuntimeWarning)
    return fredholm_det(goe2_kernel(s, delta), goe2_contour(s, delta), tol=tol)


def f_goe_sq(s: float, delta: float = 0.4, tol: float = 1e-10) -> float:
    """Square of the GOE Tracy-Widom distribution function."""
    return _real(f_goe_sq_result(s, delta, tol))


def gaussian_via_fredholm_result(s: float, delta: float = 0.4, tol: float = 1e-10) -> FredholmResult:
    if delta <= 0:
        raise ValueError("delta must be positive")
    return fredholm_det(gaussian_kernel(s, delta), gaussian_contour(s, delta), tol=tol, max_doublings=5)


def gaussian_via_fredholm(s: float, delta: float = 0.4, tol: float = 1e-10) -> float:
    """Standard normal CDF obtained as a Fredholm determinant."""
    return _real(gaussian_via_fredholm_result(s, delta, tol))


# -- real-line references (independent of the contour machinery) --------------

def _gl_interval(a: float, b: float, n: int):
    x, w = np.polynomial.legendre.leggauss(n)
    return a + (b - a) * (x + 1) / 2, w * (b - a) / 2


def f_gue_real_line(s: float, n: int = 80, length: float = 16.0) -> float:
    """``det(I - K_Airy)`` on ``(s, inf)`` by Gauss-Legendre on ``[s, s + length]``."""
    x, w = _gl_interval(s, s + length, n)
    ai, aip, _, _ = airy(x)
    dx = x[:, None] - x[None, :]
    np.fill_diagonal(dx, 1.0)
    k = (ai[:, None] * aip[None, :] - aip[:, None] * ai[None, :]) / dx
    np.fill_diagonal(k, aip**2 - x * ai**2)
    sw = np.sqrt(w)
    return float(np.linalg.det(np.eye(n) - sw[:, None] * k * sw[None, :]))


def f_goe_real_line(s: float, n: int = 80, length: float = 16.0) -> float:
    """``det(I - B_s)`` with ``B_s(x, y) = Ai((x + y)/2 + s)/2`` on ``(0, inf)``."""
    x, w = _gl_interval(0.0, length, n)
    k = 0.5 * airy((x[:, None] + x[None, :]) / 2 + s)[0]
    sw = np.sqrt(w)
    return float(np.linalg.det(np.eye(n) - sw[:, None] * k * sw[None, :]))


# -- tables -------------------------------------------------------------------

_EVALUATORS: dict[str, Callable[[float], float]] = {
    "gue": f_gue,
    "goe2": f_goe_sq,
    "gauss": gaussian_via_fredholm,
}

_RESULTS: dict[str, Callable[[float], FredholmResult]] = {
    "gue": f_gue_result,
    "goe2": f_goe_sq_result,
    "gauss": gaussian_via_fredholm_result,
}


@dataclass(frozen=True)
class DistributionTable:
    name: str
    s: np.ndarray
    F: np.ndarray
    certified: np.ndarray

    def cdf(self, x):
        """Monotone cubic interpolation, clamped to the end values outside the grid."""
        interp = PchipInterpolator(self.s, self.F, extrapolate=False)
        xx = np.asarray(x, dtype=np.float64)
        out = interp(np.clip(xx, self.s[0], self.s[-1]))
        return np.clip(out, 0.0, 1.0)

    @property
    def monotone(self) -> bool:
        return bool(np.all(np.diff(self.F) >= -1e-12))


def tabulate(name: str, grid: Sequence[float], tol: float = 1e-10) -> DistributionTable:
    """Evaluate a distribution on ``grid``; each row records whether it converged."""
    if name not in _RESULTS:
        raise ValueError(f"unknown distribution {name!r}; choose from {sorted(_RESULTS)}")
    s = np.asarray(grid, dtype=np.float64)
    if np.any(np.diff(s) <= 0):
        raise ValueError("grid must be strictly increasing")
    vals = np.empty_like(s)
    ok = np.zeros(s.shape, dtype=bool)
    for i, si in enumerate(s):
        try:
            res = _RESULTS[name](float(si), tol=tol)
            vals[i] = res.value.real
            ok[i] = abs(res.value.imag) < 1e-8
        except Exception:
            vals[i] = np.nan
    return DistributionTable(name, s, vals, ok)


@lru_cache(maxsize=8)
def distribution_table(name: str, lo: float = -8.0, hi: float = 6.0, step: float = 0.05) -> DistributionTable:
    n = int(round((hi - lo) / step)) + 1
    return tabulate(name, np.linspace(lo, hi, n))


def distribution_mean(cdf: Callable[[float], float], lo: float = -9.0, hi: float = 6.0, n: int = 96) -> float:
    """``int s dF(s) = hi - int_lo^hi F(s) ds`` for a law concentrated on ``[lo, hi]``."""
    x, w = _gl_interval(lo, hi, n)
    vals = np.array([cdf(float(v)) for v in x])
    return float(hi - np.sum(w * vals) - lo * cdf(lo))


def distribution_median(cdf: Callable[[float], float], lo: float = -6.0, hi: float = 4.0) -> float:
    return float(brentq(lambda s: cdf(s) - 0.5, lo, hi, xtol=1e-12))


def write_table_csv(fh: IO[str], table: DistributionTable, meta: dict | None = None) -> None:
    if meta:
        for k, v in meta.items():
            fh.write(f"# {k}: {v}\n")
    w = csv.writer(fh)
    w.writerow(["s", "F", "certified"])
    for s, f, ok in zip(table.s, table.F, table.certified):
        w.writerow([f"{s:.17g}", f"{f:.17g}", int(ok)])
