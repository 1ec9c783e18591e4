"""q-Pochhammer symbols and q-binomial coefficients."""
from __future__ import annotations

import math

import numpy as np

__all__ = ["q_pochhammer", "q_pochhammer_tail_bound", "q_binomial"]

_TRUNC = 1e-17


def q_pochhammer(a, q: float, n: float = math.inf):
    """``(a; q)_n = prod_{j=0}^{n-1} (1 - a q^j)``, vectorised over ``a``.

    For ``n = inf`` the product stops once every ``|a q^j|`` falls below
    ``1e-17``; :func:`q_pochhammer_tail_bound` bounds the neglected factor.
    """
    scalar = np.isscalar(a)
    arr = np.asarray(a, dtype=np.complex128)
    if n == math.inf:
        if not abs(q) < 1.0:
            raise ValueError("infinite q-Pochhammer requires |q| < 1")
        out = np.ones_like(arr)
        term = arr.copy()
        amax = float(np.max(np.abs(arr))) if arr.size else 0.0
        if amax == 0.0:
            return complex(out) if scalar else out
        jmax = 1 + int(math.ceil(math.log(_TRUNC / amax) / math.log(abs(q)))) if abs(q) > 0 else 1
        for _ in range(max(jmax, 1)):
            out *= 1.0 - term
            term *= q
        return complex(out) if scalar else out
    n = int(n)
    if n < 0:
        raise ValueError("n must be >= 0")
    out = np.ones_like(arr)
    term = arr.copy()
    for _ in range(n):
        out *= 1.0 - term
        term *= q
    return complex(out) if scalar else out


def q_pochhammer_tail_bound(a, q: float) -> float:
    """Bound on ``|log prod_{j >= J}(1 - a q^j)|`` for the truncation point used above."""
    amax = float(np.max(np.abs(np.asarray(a))))
    if amax == 0.0:
        return 0.0
    jmax = 1 + int(math.ceil(math.log(_TRUNC / amax) / math.log(abs(q))))
    first = amax * abs(q) ** max(jmax, 1)
    # sum of a geometric tail, with the log(1-z) <= |z|/(1-|z|) bound
    return first / (1.0 - abs(q)) / (1.0 - first)


def q_binomial(n: int, k: int, q: float) -> float:
    """Gaussian binomial ``(q^{n-k+1}; q)_k / (q; q)_k``; zero outside ``0 <= k <= n``."""
    if k < 0 or k > n:
        return 0.0
    num = 1.0
    den = 1.0
    for j in range(1, k + 1):
        num *= 1.0 - q ** (n - k + j)
        den *= 1.0 - q**j
    return num / den
