"""Finite-time q-Laplace transform and q-moments of the height function.

Sites are on the non-negative integers with step data filling ``[0, L]``, so
``N_x(0) = x + 1``; the contour formulas below therefore carry the exponent
``x + 1`` wherever the height at site ``x`` enters.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .contour import Contour
from .det import FredholmResult, KernelSpec, fredholm_det
from .qspecial import q_pochhammer

__all__ = [
    "QLaplaceContours",
    "ContourCertificationError",
    "default_contours",
    "certify_contours",
    "qlaplace_kernel",
    "q_laplace_finite_t",
    "q_laplace_finite_t_result",
    "q_laplace_closed_form_t0",
    "MomentContours",
    "moment_contours",
    "moment_qL",
]


class ContourCertificationError(ValueError):
    pass


@dataclass(frozen=True)
class QLaplaceContours:
    """Circle ``C_r`` for the Fredholm variable and the five-piece ``s`` contour."""

    center: float = -0.3
    radius: float = 0.45
    R: float = 8.0
    d: float = 0.4
    delta: float = 0.9
    report: dict = field(default_factory=dict, compare=False)

    def s_contour(self, zeta: complex, order: int) -> Contour:
        # vertical rays: 1/sin(pi s) decays like exp(-pi |Im s|) against |(-zeta)^s|
        grow = max(0.0, self.R * math.log(abs(zeta))) if zeta != 0 else 0.0
        ymax = self.d + (grow + 40.0) / math.pi
        R, d, dl = self.R, self.d, self.delta
        # the horizontal legs pass within d of the poles at 1, 2, ..., so split them per pole
        xs = np.concatenate(([dl], np.arange(math.floor(dl) + 1.5, R, 1.0), [R]))
        ys = np.linspace(d, ymax, max(2, math.ceil((ymax - d) / 2.0)) + 1)
        pts = ([R - 1j * y for y in ys[::-1]] + [xv - 1j * d for xv in xs[::-1][1:]]
               + [xv + 1j * d for xv in xs] + [R + 1j * y for y in ys[1:]])
        return Contour.polyline(pts, order)

    def w_contour(self, order: int) -> Contour:
        return Contour.circle(self.center, self.radius, order)


def default_contours(b: float) -> QLaplaceContours:
    """Default ``C_r``: centred at ``-0.6 b`` with radius ``0.9 b`` (``-0.3``, ``0.45`` at ``b = 1/2``)."""
    return QLaplaceContours(center=-0.6 * b, radius=0.9 * b)


def _g_ratio(w, bs, X: int, t: float, b: float, alpha: float):
    """``g(w) / g(b^s w)`` for node arrays ``w`` (rows) and ``b^s`` (columns)."""
    wm = w[:, None]
    u = bs[None, :] * wm
    out = ((1.0 + u / b) / (1.0 + wm / b)) ** X * np.exp(t * wm * (1.0 - bs[None, :]) / (b * (1.0 - b)))
    if alpha > 0:
        out = out * q_pochhammer(alpha * u / b, b) / q_pochhammer(alpha * w / b, b)[:, None]
    return out


def certify_contours(c: QLaplaceContours, x: int, t: float, b: float, rho: float,
                     zeta: complex, order: int = 64) -> dict:
    """Check separation and boundedness conditions on the quadrature nodes.

    Returns the observed ``inf |b^s w - w'|`` and ``sup |g(w)/g(b^s w)|``.
    """
    alpha = (1.0 - rho) / rho
    w = c.w_contour(order).nodes
    s = c.s_contour(zeta, order).nodes
    bs = b**s
    sep = float(np.min(np.abs(bs[None, :, None] * w[:, None, None] - w[None, None, :])))
    ratio = float(np.max(np.abs(_g_ratio(w, bs, x + 1, t, b, alpha))))
    contains = abs(0 - c.center) < c.radius and abs(-b - c.center) < c.radius
    excludes = alpha == 0 or abs(b / alpha - c.center) > c.radius
    nested = abs(b * c.center - c.center) + b * c.radius < c.radius
    return {
        "min_separation": sep,
        "max_g_ratio": ratio,
        "contains_0_and_minus_b": bool(contains),
        "excludes_b_over_alpha": bool(excludes),
        "b_scaled_inside": bool(nested),
        "ok": bool(sep > 1e-3 and ratio < 1e12 and contains and excludes and nested),
    }


def _search(x, t, b, rho, zeta) -> QLaplaceContours:
    base = default_contours(b)
    alpha = (1.0 - rho) / rho
    cands = [base]
    for frac_c in (0.5, 0.6, 0.7):
        for frac_r in (0.6, 0.75, 0.9):
            cands.append(QLaplaceContours(center=-frac_c * b, radius=frac_r * b))
    for R in (8.0, 6.0, 4.0):
        for dl in (0.9, 0.8, 0.95):
            for cc in cands:
                c = QLaplaceContours(cc.center, cc.radius, R, 0.4, dl)
                rep = certify_contours(c, x, t, b, rho, zeta, 32)
                if rep["ok"]:
                    return QLaplaceContours(c.center, c.radius, c.R, c.d, c.delta, rep)
    raise ContourCertificationError(
        f"no certified contour for b={b}, rho={rho} (b/alpha={b / alpha if alpha else math.inf})")


def qlaplace_kernel(c: QLaplaceContours, x: int, t: float, b: float, rho: float,
                    zeta: complex, s_order: int = 32) -> KernelSpec:
    alpha = (1.0 - rho) / rho
    log_mz = np.log(complex(-zeta))

    def evaluate(w, wp, level):
        sc = c.s_contour(zeta, s_order * 2**level)
        s, cs = sc.nodes, sc.weights
        bs = b**s
        # residues of pi/sin(pi s) at s = L are (-1)^L, turning (-zeta)^L into zeta^L
        fac = np.pi / np.sin(np.pi * s) * np.exp(s * log_mz) * cs / (2j * np.pi)
        a = _g_ratio(w, bs, x + 1, t, b, alpha) * fac[None, :]
        u = bs[None, :] * w[:, None]
        out = np.empty((w.shape[0], wp.shape[0]), dtype=np.complex128)
        for i in range(w.shape[0]):
            out[i] = a[i] @ (1.0 / (u[i][:, None] - wp[None, :]))
        return out

    return KernelSpec("qlaplace", evaluate, {"x": x, "t": t, "b": b, "rho": rho, "zeta": zeta})


def q_laplace_finite_t_result(x: int, t: float, b: float, rho: float, zeta: complex,
                              contours: QLaplaceContours | None = None, order: int = 64,
                              s_order: int = 32, tol: float = 1e-8,
                              max_doublings: int = 2) -> FredholmResult:
    if zeta != 0 and np.isreal(zeta) and np.real(zeta) >= 0:
        raise ValueError("zeta must not lie on the non-negative real axis")
    if not 0 < rho <= 1:
        raise ValueError("rho must lie in (0, 1]")
    if zeta == 0:
        return FredholmResult(1.0 + 0j, 1.0 + 0j, 0.0, 0, 0, 1.0)
    if contours is None:
        contours = _search(x, t, b, rho, zeta)
    else:
        rep = certify_contours(contours, x, t, b, rho, zeta, order)
        if not rep["ok"]:
            raise ContourCertificationError(f"contour certification failed: {rep}")
    kern = qlaplace_kernel(contours, x, t, b, rho, zeta, s_order)
    return fredholm_det(kern, contours.w_contour(order), tol=tol, max_doublings=max_doublings)


def q_laplace_finite_t(x: int, t: float, b: float, rho: float, zeta: complex, **kw) -> complex:
    """``E[1 / (zeta b^{N_x(t)}; b)_inf]`` under step Bernoulli(rho) data."""
    return q_laplace_finite_t_result(x, t, b, rho, zeta, **kw).value


def q_laplace_closed_form_t0(x: int, b: float, rho: float, zeta: complex) -> complex:
    """Exact value at ``t = 0``: ``N_x(0) ~ Binomial(x + 1, rho)``."""
    from scipy.stats import binom

    ks = np.arange(x + 2)
    pk = binom.pmf(ks, x + 1, rho)
    return complex(np.sum(pk / q_pochhammer(zeta * b**ks.astype(float), b)))


# -- q-moments -----------------------------------------------------------------

@dataclass(frozen=True)
class MomentContours:
    """Homothetic copies ``C_A = kappa^(A-1) C_1`` of one circle, traced by polar angle about 0.

    ``C_1`` has real extent ``[-left, right]``. With ``kappa = 1 / (b s)`` the
    pole ``u_A = b u_B`` sits on the dilate ``C_A / s``, a fixed log-radius
    ``log(1/s)`` away, so the trapezoid rule converges geometrically.
    """

    left: float
    right: float
    kappa: float
    L: int

    def nodes(self, A: int, n: int):
        c = 0.5 * (self.left - self.right)
        r = 0.5 * (self.left + self.right)
        th = 2.0 * np.pi * np.arange(n) / n
        sn, cs = np.sin(th), np.cos(th)
        root = np.sqrt(r * r - c * c * sn * sn)
        rad = -c * cs + root
        drad = c * sn - c * c * sn * cs / root
        scale = self.kappa ** (A - 1)
        e = np.exp(1j * th)
        return scale * rad * e, scale * (drad + 1j * rad) * e * (2.0 * np.pi / n)


def moment_contours(b: float, rho: float, L: int, s: float | None = None,
                    margin: float = 1.25) -> MomentContours:
    """Contours for ``E[b^{L N}]``: each contains ``0`` and ``-b``, excludes ``b / alpha``,
    and ``C_A`` lies inside ``b C_B`` for ``A < B``.

    Without an explicit ``s`` the ratio is chosen to balance the nesting gap
    ``log(1/s)`` against the analyticity strip of the polar parametrisation.
    """
    alpha = (1.0 - rho) / rho
    left = margin * b

    def build(sv):
        kappa = 1.0 / (b * sv)
        right = 0.5 * left
        if alpha > 0:
            right = min(right, b / alpha / margin / kappa ** (L - 1))
        return MomentContours(left, right, kappa, L)

    def quality(mc):
        sv = 1.0 / (b * mc.kappa)
        return min(math.log(1.0 / sv), math.acosh((mc.left + mc.right) / (mc.left - mc.right)))

    if s is not None:
        mc = build(s)
    else:
        mc = max((build(sv) for sv in np.linspace(0.5, 0.95, 19)), key=quality)
    if quality(mc) < 0.05:
        raise ValueError(f"nesting too tight: outer contour would reach b/alpha = {b / alpha:.4g}")
    return mc


def moment_qL(x: int, t: float, b: float, rho: float, L: int, nodes: int = 128,
              tol: float = 1e-10, max_doublings: int = 3) -> float:
    """``E[b^{L N_x(t)}]`` from the L-fold nested contour integral (``1 <= L <= 3``)."""
    if not 1 <= L <= 3:
        raise ValueError("L must be 1, 2 or 3")
    alpha = (1.0 - rho) / rho
    X = x + 1
    mc = moment_contours(b, rho, L)

    def value(n):
        us, fs = [], []
        for A in range(1, L + 1):
            u, w = mc.nodes(A, n)
            f = np.exp(t * u / b) * ((1.0 + u) / (1.0 + u / b)) ** X / (1.0 - alpha * u / b) / u
            us.append(u)
            fs.append(f * w / (2j * np.pi))

        def cross(a, c):
            ua, uc = us[a][:, None], us[c][None, :]
            return (ua - uc) / (ua - b * uc)

        if L == 1:
            total = fs[0].sum()
        elif L == 2:
            total = fs[0] @ cross(0, 1) @ fs[1]
        else:
            total = np.einsum("i,j,k,ij,ik,jk->", fs[0], fs[1], fs[2],
                              cross(0, 1), cross(0, 2), cross(1, 2), optimize=True)
        return b ** (L * (L - 1) / 2) * total

    n = nodes
    prev = value(n)
    for _ in range(max_doublings):
        n *= 2
        cur = value(n)
        gap = abs(cur - prev)
        if gap < tol:
            return float(cur.real)
        prev = cur
    raise ArithmeticError(f"q-moment quadrature did not converge (last gap {gap:.3e})")
