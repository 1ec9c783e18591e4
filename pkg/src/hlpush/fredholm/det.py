"""Nyström evaluation of Fredholm determinants on complex contours.

The determinant uses the normalisation

    det(I + K) = sum_n 1/(n! (2 pi i)^n) int...int det[K(z_i, z_j)] dz_1...dz_n,

which the Nyström matrix ``M_ij = w_j K(z_i, z_j) / (2 pi i)`` reproduces.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .contour import Contour

__all__ = [
    "KernelSpec",
    "FredholmResult",
    "FredholmConvergenceError",
    "HadamardViolation",
    "nystrom_matrix",
    "hadamard_ratio",
    "fredholm_det",
]

TWO_PI_I = 2j * np.pi


class FredholmConvergenceError(RuntimeError):
    def __init__(self, msg: str, last: complex, previous: complex):
        super().__init__(f"{msg}: last={last!r}, previous={previous!r}")
        self.last = last
        self.previous = previous


class HadamardViolation(AssertionError):
    pass


@dataclass
class KernelSpec:
    """A kernel ``K(w, w')`` evaluated on whole node arrays.

    ``evaluate(w, wp, level)`` returns the matrix ``K(w_i, wp_j)``. ``level``
    counts node doublings of the outer contour; kernels defined by an inner
    contour integral refine that integral alongside.
    """

    name: str
    evaluate: Callable[[np.ndarray, np.ndarray, int], np.ndarray]
    params: dict = field(default_factory=dict)

    def __call__(self, w, wp, level: int = 0):
        return self.evaluate(np.atleast_1d(w), np.atleast_1d(wp), level)


@dataclass
class FredholmResult:
    value: complex
    previous: complex
    gap: float
    nodes: int
    doublings: int
    hadamard: float
    history: list = field(default_factory=list)

    @property
    def converged(self) -> bool:
        return bool(self.__dict__.get("_converged", False))


def nystrom_matrix(kernel: KernelSpec, contour: Contour, level: int = 0) -> np.ndarray:
    z, w = contour.nodes, contour.weights
    return kernel.evaluate(z, z, level) * (w / TWO_PI_I)[None, :]


def hadamard_ratio(a: np.ndarray, det: complex) -> float:
    """``|det(a)| / prod_i ||a_i||``; Hadamard's inequality says this is <= 1."""
    log_bound = float(np.sum(np.log(np.linalg.norm(a, axis=1))))
    if not np.isfinite(log_bound):
        return 0.0 if det == 0 else np.inf
    if det == 0:
        return 0.0
    return float(np.exp(np.log(abs(det)) - log_bound))


def _det_checked(m: np.ndarray) -> tuple[complex, float]:
    a = np.eye(m.shape[0], dtype=np.complex128) + m
    if not np.all(np.isfinite(a)):
        raise FloatingPointError("non-finite Nyström matrix")
    d = complex(np.linalg.det(a))
    ratio = hadamard_ratio(a, d)
    if ratio > 1.0 + 1e-8:
        raise HadamardViolation(f"|det| exceeds the Hadamard bound by factor {ratio}")
    return d, ratio


def fredholm_det(kernel: KernelSpec, contour: Contour, tol: float = 1e-9,
                 max_doublings: int = 4, min_doublings: int = 1) -> FredholmResult:
    """Nyström determinant with node doubling until successive values agree to ``tol``.

    Raises
    ------
    FredholmConvergenceError
        If the gap is still above ``tol`` after ``max_doublings`` doublings.
    HadamardViolation
        If an assembled matrix breaks Hadamard's inequality.
    """
    history = []
    c = contour
    prev = None
    worst = 0.0
    for level in range(max_doublings + 1):
        d, ratio = _det_checked(nystrom_matrix(kernel, c, level))
        worst = max(worst, ratio)
        history.append((len(c), d))
        if prev is not None:
            gap = abs(d - prev)
            if gap < tol and level >= min_doublings:
                res = FredholmResult(d, prev, gap, len(c), level, worst, history)
                res.__dict__["_converged"] = True
                return res
        prev = d
        if level < max_doublings:
            c = c.refined()
    raise FredholmConvergenceError(f"{kernel.name}: no convergence after {max_doublings} doublings",
                                   history[-1][1], history[-2][1])
