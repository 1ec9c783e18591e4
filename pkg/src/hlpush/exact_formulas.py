"""Exact finite-N laws of the push dynamics.

Three independent routes to the same transition probabilities:

* the compound-Poisson law of a lone particle,
* a master-equation oracle on a truncated lattice, integrated as an ODE,
* Bethe-ansatz contour integrals evaluated by trapezoid quadrature on circles.

All positions are strictly increasing tuples on the non-negative integers.
Contour radii are chosen per call: the admissible range comes from the pole
structure, and within it we minimise the size of the integrand relative to
the target so that cancellation in the quadrature stays small.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Iterator, Sequence

import numpy as np
from scipy import sparse
from scipy.integrate import solve_ivp
from scipy.special import gammaln

from .fredholm.qspecial import q_binomial

__all__ = [
    "BetheVector",
    "TruncatedGenerator",
    "LeakError",
    "ContourMismatchError",
    "single_particle_pmf",
    "cascade_outcomes",
    "master_equation_pmf",
    "MasterEquationResult",
    "bethe_phi",
    "eigenfunction_residual",
    "transition_pmf_contour",
    "transition_pmf_small",
    "transition_pmf_large",
    "mth_particle_pmf",
]

ADMISSIBLE_TOL = 1e-10


class LeakError(RuntimeError):
    """Truncated lattice lost too much mass; ``suggested_bound`` should fix it."""

    def __init__(self, leak: float, suggested_bound: int):
        super().__init__(f"leaked mass {leak:.3e} too large; try bound={suggested_bound}")
        self.leak = leak
        self.suggested_bound = suggested_bound


class ContourMismatchError(ArithmeticError):
    pass


def _check_positions(x: Sequence[int]) -> tuple[int, ...]:
    x = tuple(int(v) for v in x)
    if any(v < 0 for v in x) or any(a >= c for a, c in zip(x, x[1:])):
        raise ValueError(f"positions must be strictly increasing and non-negative: {x}")
    return x


# -- single particle ---------------------------------------------------------

def single_particle_pmf(t: float, k, b: float):
    """``P(x(t) - x(0) = k)`` for one particle: Poisson many Geometric(1 - b) jumps.

    ``k`` may be an integer or an integer array.
    """
    if t < 0:
        raise ValueError("t must be non-negative")
    ks = np.atleast_1d(np.asarray(k, dtype=np.int64))
    if np.any(ks < 0):
        raise ValueError("k must be non-negative")
    out = np.zeros(ks.shape, dtype=float)
    out[ks == 0] = math.exp(-t)
    if t > 0:
        for idx in np.flatnonzero(ks > 0):
            kk = int(ks[idx])
            n = np.arange(1, kk + 1)
            logs = (-t + n * math.log(t) - gammaln(n + 1) + gammaln(kk) - gammaln(n) - gammaln(kk - n + 1)
                    + n * math.log1p(-b) + ((kk - n) * math.log(b) if b > 0 else np.where(kk == n, 0.0, -np.inf)))
            out[idx] = float(np.exp(logs).sum())
    return out if np.ndim(k) else float(out[0])


# -- generator enumeration ---------------------------------------------------

def cascade_outcomes(x: tuple[int, ...], i: int, b: float, last_limit: int) -> Iterator[tuple[float, tuple[int, ...]]]:
    """Outcomes of activating particle ``i`` of ``x``.

    Yields ``(probability, new_positions)``. The rightmost particle's final jump
    is enumerated while its landing site is ``<= last_limit``; the remaining
    mass ``b ** (last_limit - position)`` is not yielded.
    """
    n = len(x)
    y = list(x)
    reach = 1.0
    while True:
        if i == n - 1:
            p0 = y[i]
            for site in range(p0 + 1, last_limit + 1):
                y[i] = site
                yield reach * (1.0 - b) * b ** (site - p0 - 1), tuple(y)
            return
        gap = y[i + 1] - y[i]
        for j in range(1, gap):
            z = list(y)
            z[i] += j
            yield reach * (1.0 - b) * b ** (j - 1), tuple(z)
        reach *= b ** (gap - 1)
        y[i] = y[i + 1]
        i += 1


@dataclass
class TruncatedGenerator:
    """Rate matrix of the dynamics on ordered ``N``-tuples in ``[0, lattice_bound]``.

    The final column is an absorbing leak state collecting every jump that
    would leave the lattice, so rows sum to zero exactly.
    """

    lattice_bound: int
    N: int
    b: float
    states: list = field(init=False, repr=False)
    index: dict = field(init=False, repr=False)
    Q: sparse.csr_matrix = field(init=False, repr=False)

    def __post_init__(self):
        if self.N < 1:
            raise ValueError("need at least one particle")
        self.states = list(itertools.combinations(range(self.lattice_bound + 1), self.N))
        self.index = {s: k for k, s in enumerate(self.states)}
        leak = len(self.states)
        rows, cols, vals = [], [], []
        for k, s in enumerate(self.states):
            for i in range(self.N):
                lost = 1.0
                for p, y in cascade_outcomes(s, i, self.b, self.lattice_bound):
                    rows.append(k)
                    cols.append(self.index[y])
                    vals.append(p)
                    lost -= p
                if lost > 0:
                    rows.append(k)
                    cols.append(leak)
                    vals.append(lost)
            rows.append(k)
            cols.append(k)
            vals.append(-float(self.N))
        size = leak + 1
        self.Q = sparse.csr_matrix((vals, (rows, cols)), shape=(size, size))

    @property
    def size(self) -> int:
        return self.Q.shape[0]

    def row_sums(self) -> np.ndarray:
        return np.asarray(self.Q.sum(axis=1)).ravel()


@dataclass
class MasterEquationResult:
    states: list
    pmf: np.ndarray
    leak: float
    bound: int

    def __getitem__(self, y) -> float:
        try:
            return float(self.pmf[self.states.index(tuple(y))])
        except ValueError:
            return 0.0

    def marginal(self, m: int) -> dict[int, float]:
        """Law of the ``m``-th particle (1-based)."""
        out: dict[int, float] = {}
        for s, p in zip(self.states, self.pmf):
            out[s[m - 1]] = out.get(s[m - 1], 0.0) + float(p)
        return out

    def as_dict(self) -> dict[tuple[int, ...], float]:
        return {s: float(p) for s, p in zip(self.states, self.pmf)}


_GENERATORS: dict[tuple[int, int, float], TruncatedGenerator] = {}


def _generator(bound: int, N: int, b: float) -> TruncatedGenerator:
    key = (bound, N, float(b))
    if key not in _GENERATORS:
        _GENERATORS[key] = TruncatedGenerator(bound, N, b)
    return _GENERATORS[key]


def master_equation_pmf(init: Sequence[int], t: float, bound: int, b: float,
                        leak_tol: float = 1e-10, rtol: float = 1e-12,
                        atol: float = 1e-15) -> MasterEquationResult:
    """Joint law at time ``t`` from the forward equation ``p' = p Q`` on ``[0, bound]``.

    Raises
    ------
    LeakError
        If more than ``leak_tol`` of the mass left the truncated lattice.
    """
    x0 = _check_positions(init)
    N = len(x0)
    if not 1 <= N <= 3:
        raise ValueError("master-equation oracle supports 1 <= N <= 3")
    if x0[-1] > bound:
        raise ValueError("initial positions exceed the lattice bound")
    if t < 0:
        raise ValueError("t must be non-negative")
    gen = _generator(bound, N, b)
    p0 = np.zeros(gen.size)
    p0[gen.index[x0]] = 1.0
    if t == 0:
        p = p0
    else:
        QT = gen.Q.T.tocsr()
        sol = solve_ivp(lambda _s, p: QT @ p, (0.0, t), p0, method="DOP853", rtol=rtol, atol=atol)
        if not sol.success:
            raise ArithmeticError(sol.message)
        p = sol.y[:, -1]
    leak = float(max(p[-1], 0.0))
    if leak > leak_tol:
        raise LeakError(leak, _suggest_bound(bound, leak, leak_tol))
    return MasterEquationResult(gen.states, p[:-1].copy(), leak, bound)


def _suggest_bound(bound: int, leak: float, tol: float) -> int:
    # leak decays roughly geometrically in the bound; double the margin until it fits
    extra = max(5, int(math.ceil(bound * math.log(leak / tol) / max(1.0, -math.log(tol)))))
    return bound + extra


# -- Bethe eigenfunctions ----------------------------------------------------

@dataclass(frozen=True)
class BetheVector:
    """Spectral variables ``z_1..z_N`` with ``|b z_i| < 1`` and non-vanishing pair factors."""

    z: tuple
    N: int
    b: float

    def __init__(self, z: Sequence[complex], b: float):
        zz = tuple(complex(v) for v in z)
        object.__setattr__(self, "z", zz)
        object.__setattr__(self, "N", len(zz))
        object.__setattr__(self, "b", float(b))
        if any(abs(b * v) >= 1.0 - ADMISSIBLE_TOL for v in zz):
            raise ValueError("need |b z_i| < 1")
        for i in range(self.N):
            for j in range(self.N):
                if i != j and abs(_pair(zz[i], zz[j], b)) < ADMISSIBLE_TOL:
                    raise ValueError(f"pair factor vanishes for (z_{i + 1}, z_{j + 1})")

    def swapped(self, i: int, j: int) -> "BetheVector":
        z = list(self.z)
        z[i], z[j] = z[j], z[i]
        return BetheVector(z, self.b)

    def eigenvalue(self) -> complex:
        return sum(-(1.0 - v) / (1.0 - self.b * v) for v in self.z)


def _pair(zi, zj, b):
    return 1.0 - (1.0 + b) * zj + b * zi * zj


def _sign(perm) -> int:
    s = 1
    p = list(perm)
    for i in range(len(p)):
        while p[i] != i:
            j = p[i]
            p[i], p[j] = p[j], p[i]
            s = -s
    return s


def _bethe_coefficients(z: Sequence[complex], b: float) -> list[tuple[tuple[int, ...], complex]]:
    N = len(z)
    den = 1.0 + 0j
    for i in range(N):
        for j in range(i + 1, N):
            den *= 1.0 - (1.0 + b) * z[i] + b * z[i] * z[j]
    out = []
    for perm in itertools.permutations(range(N)):
        num = 1.0 + 0j
        for i in range(N):
            for j in range(i + 1, N):
                zi, zj = z[perm[i]], z[perm[j]]
                num *= 1.0 - (1.0 + b) * zi + b * zi * zj
        out.append((perm, _sign(perm) * num / den))
    return out


def bethe_phi(x: Sequence[int], z: BetheVector) -> complex:
    """Symmetrised plane-wave sum ``sum_sigma A_sigma prod_i z_sigma(i)^x_i``."""
    total = 0j
    for perm, a in _bethe_coefficients(z.z, z.b):
        term = a
        for i, xi in enumerate(x):
            term *= z.z[perm[i]] ** xi
        total += term
    return total


def eigenfunction_residual(z: BetheVector, x: Sequence[int], b: float | None = None,
                           trunc: int = 200) -> tuple[float, float]:
    """``|L Phi(x) - E(z) Phi(x)|`` with ``L`` the generator acting on functions of positions.

    The rightmost particle's geometric jump is summed up to ``trunc`` sites;
    the returned bound dominates the neglected tail. Returns ``(residual, bound)``.
    """
    x = _check_positions(x)
    b = z.b if b is None else float(b)
    if len(x) != z.N:
        raise ValueError("dimension mismatch between x and z")
    coeffs = _bethe_coefficients(z.z, b)
    zmax = max(abs(v) for v in z.z)
    tail = 0.0
    lphi = 0j
    for i in range(z.N):
        for p, y in cascade_outcomes(x, i, b, x[-1] + trunc + z.N):
            lphi += p * bethe_phi(y, z)
    phi = bethe_phi(x, z)
    lphi -= z.N * phi
    # every cascade ends with a final geometric jump of the rightmost particle from below x[-1] + N
    scale = sum(abs(a) for _, a in coeffs) * max(1.0, zmax) ** (sum(x) + z.N * (z.N + trunc))
    if b * zmax < 1:
        tail = z.N * scale * (1.0 - b) * (b * max(zmax, 1e-300)) ** trunc / (1.0 - b * zmax)
    return float(abs(lphi - z.eigenvalue() * phi)), float(tail)


# -- contour formulas --------------------------------------------------------

def _circle_nodes(radius: float, n: int):
    th = 2.0 * np.pi * (np.arange(n) + 0.5) / n
    z = radius * np.exp(1j * th)
    # dz / (2 pi i) with the trapezoid weight
    return z, z / n


def _tensor(nodes, k):
    return np.meshgrid(*([nodes] * k), indexing="ij") if k else []


def _small_pole_radius(b: float) -> float:
    # |z_j| where 1 - (1 + b) z_j + b z_i z_j = 0 with |z_i| = |z_j| = r
    return (-(1.0 + b) + math.sqrt((1.0 + b) ** 2 + 4.0 * b)) / (2.0 * b)


def _large_pole_radius(b: float) -> float:
    # poles of the inverse-b pair factor stay inside |z| < R once R (R - 1 - b) > b
    return ((1.0 + b) + math.sqrt((1.0 + b) ** 2 + 4.0 * b)) / 2.0


def _small_integrand(xf, xi, t, b, Z):
    N = len(xf)
    E = [np.exp(-t * (1.0 - Z[i]) / (1.0 - b * Z[i])) * Z[i] ** (xi[i] - 1) for i in range(N)]
    total = 0j
    for perm in itertools.permutations(range(N)):
        a = np.full(Z[0].shape, float(_sign(perm)), dtype=complex)
        for i in range(N):
            for j in range(i + 1, N):
                zi, zj = Z[perm[i]], Z[perm[j]]
                a *= (1.0 - (1.0 + b) * zj + b * zi * zj) / (1.0 - (1.0 + b) * Z[j] + b * Z[i] * Z[j])
        for i in range(N):
            a *= Z[perm[i]] ** (-xf[i])
        total = total + a
    for e in E:
        total = total * e
    return total


def _large_integrand(xf, xi, t, b, Z):
    N = len(xf)
    E = [np.exp(-t * (1.0 - 1.0 / Z[i]) / (1.0 - b / Z[i])) * Z[i] ** (-xi[i] - 1) for i in range(N)]
    ib = 1.0 / b
    total = 0j
    for perm in itertools.permutations(range(N)):
        a = np.full(Z[0].shape, float(_sign(perm)), dtype=complex)
        for i in range(N):
            for j in range(i + 1, N):
                zi, zj = Z[perm[i]], Z[perm[j]]
                a *= (1.0 - (1.0 + ib) * zi + ib * zi * zj) / (1.0 - (1.0 + ib) * Z[i] + ib * Z[i] * Z[j])
        for i in range(N):
            a *= Z[perm[i]] ** xf[i]
        total = total + a
    for e in E:
        total = total * e
    return total


def _scale_estimate(f, radius: float, N: int, probe: int = 32) -> float:
    """``log`` of the largest integrand magnitude times the contour measure."""
    z, _ = _circle_nodes(radius, probe)
    Z = _tensor(z, N)
    with np.errstate(all="ignore"):
        v = np.abs(f(Z)) * radius**N
    m = float(np.max(v))
    return math.log(m) if m > 0 and np.isfinite(m) else math.inf


def _ranked_radii(f, lo: float, hi: float, N: int) -> list[float]:
    grid = np.geomspace(lo, hi, 24)
    scores = [_scale_estimate(f, r, N) for r in grid]
    return [float(grid[i]) for i in np.argsort(scores, kind="stable")]


def _best_radius(f, lo: float, hi: float, N: int) -> float:
    return _ranked_radii(f, lo, hi, N)[0]


def _integrate(f, lo: float, hi: float, N: int, nodes: int, tol: float, radius: float | None,
               attempts: int = 4):
    """Trapezoid rule on the best-scaled circle, falling back to the next candidates.

    The smallest integrand scale can sit right next to an essential
    singularity, where the rule converges too slowly.
    """
    radii = [radius] if radius is not None else _ranked_radii(f, lo, hi, N)[:attempts]
    err = None
    for r in radii:
        try:
            val, gap = _trapezoid(f, r, N, nodes, tol)
            return val, r, gap
        except ArithmeticError as e:
            err = e
    raise err


def _trapezoid(f, radius: float, N: int, nodes: int, tol: float, max_doublings: int = 3,
               resolution: float = 1e-10):
    """Node doubling until two values agree to ``tol`` or to the rounding floor of the sum.

    The floor is a small multiple of machine epsilon times the sum of the term
    magnitudes; no quadrature can resolve the value below it. Stopping at the
    floor is accepted only while the floor itself is below ``resolution``.
    """
    n = nodes
    prev = None
    for _ in range(max_doublings + 1):
        z, w = _circle_nodes(radius, n)
        Z = _tensor(z, N)
        W = _tensor(w, N)
        weight = np.ones_like(Z[0])
        for wi in W:
            weight = weight * wi
        terms = f(Z) * weight
        val = complex(np.sum(terms))
        floor = 64.0 * np.finfo(float).eps * float(np.sum(np.abs(terms)))
        if prev is not None and abs(val - prev) < max(tol, min(floor, resolution)):
            return val, abs(val - prev)
        prev = val
        n *= 2
    raise ArithmeticError(f"contour quadrature did not converge at radius {radius:.4g} "
                          f"(rounding floor {floor:.1e})")


def transition_pmf_small(x0, x1, t, b, nodes=64, radius=None, tol=1e-12):
    """Small-circle representation (all non-zero singularities outside)."""
    x0, x1 = _check_positions(x0), _check_positions(x1)
    N = len(x0)
    # the integrand is written for the reversed pair: exponent -final on the permuted variables
    f = lambda Z: _small_integrand(x1, x0, t, b, Z)  # noqa: E731
    hi = 0.8 * min(_small_pole_radius(b) if N > 1 else math.inf, 1.0 / b if b > 0 else math.inf)
    hi = min(hi, 1.0)
    return _integrate(f, 1e-2, hi, N, nodes, tol, radius)


def transition_pmf_large(x0, x1, t, b, nodes=64, radius=None, tol=1e-12):
    """Large-circle representation (all singularities inside)."""
    x0, x1 = _check_positions(x0), _check_positions(x1)
    N = len(x0)
    f = lambda Z: _large_integrand(x1, x0, t, b, Z)  # noqa: E731
    lo = 1.2 * max(_large_pole_radius(b) if N > 1 else b, b, 1e-2)
    return _integrate(f, lo, max(4.0 * lo, 10.0), N, nodes, tol, radius)


def transition_pmf_contour(x0: Sequence[int], x1: Sequence[int], t: float, b: float,
                           nodes: int = 64, tol: float = 1e-9) -> float:
    """``P(x(t) = x1 | x(0) = x0)`` from both Bethe inversion formulas, cross-checked.

    Raises
    ------
    ContourMismatchError
        If the two representations differ by more than ``tol``.
    """
    if not 1 <= len(x0) <= 3 or len(x0) != len(x1):
        raise ValueError("need 1 <= N <= 3 and matching dimensions")
    v1, r1, _ = transition_pmf_small(x0, x1, t, b, nodes)
    v2, r2, _ = transition_pmf_large(x0, x1, t, b, nodes)
    if abs(v1 - v2) > tol:
        raise ContourMismatchError(
            f"representations disagree by {abs(v1 - v2):.3e} (small radius {r1:.4g}, large radius {r2:.4g})")
    return float(0.5 * (v1 + v2).real)


def mth_particle_pmf(y: Sequence[int], m: int, x: int, t: float, b: float,
                     nodes: int = 64, tol: float = 1e-11, radius: float | None = None) -> float:
    """``P(x_m(t) = x)`` for particles started at ``y`` (``1 <= m <= N <= 3``).

    A signed sum over subsets ``S`` with ``|S| >= m`` of ``|S|``-fold integrals
    on equal large circles around every singularity.
    """
    y = _check_positions(y)
    N = len(y)
    if not 1 <= m <= N <= 3:
        raise ValueError("need 1 <= m <= N <= 3")
    ib = 1.0 / b
    lo = 1.2 * max(1.0, _large_pole_radius(b))
    total = 0.0
    for k in range(m, N + 1):
        coef_k = q_binomial(k - 1, m - 1, b)
        for S in itertools.combinations(range(N), k):
            ys = [y[i] for i in S]
            kappa = sum(i + 1 for i in S)
            pref = (-1) ** (m - 1) * b ** (m * (m - 1) / 2 + kappa - m * k - k * (k - 1) / 2) * coef_k

            def f(Z, ys=ys, k=k):
                val = np.ones_like(Z[0])
                prod = np.ones_like(Z[0])
                den = np.ones_like(Z[0])
                for a in range(k):
                    for c in range(a + 1, k):
                        val = val * (Z[c] - Z[a]) / (1.0 - (1.0 + ib) * Z[a] + ib * Z[a] * Z[c])
                for a in range(k):
                    val = val * Z[a] ** (x - ys[a] - 1) * np.exp(-t * (1.0 - 1.0 / Z[a]) / (1.0 - b / Z[a]))
                    prod = prod * Z[a]
                    den = den * (1.0 - Z[a])
                return val * (1.0 - prod) / den

            # a single variable only has to enclose z = 1 and z = b
            lo_k = lo if k > 1 else 1.05 * max(1.0, b)
            val, _, _ = _integrate(f, lo_k, max(4.0 * lo_k, 10.0), k, nodes, tol, radius)
            total += pref * val.real
    return float(total)
