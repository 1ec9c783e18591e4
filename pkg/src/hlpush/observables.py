"""Scaling constants, regime classification and empirical fluctuation statistics."""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from enum import Enum
from typing import Callable, Iterable, Sequence

import numpy as np

__all__ = [
    "Regime",
    "ScalingConstants",
    "KpzQuantities",
    "classify_regime",
    "critical_density",
    "limit_shape",
    "kpz_quantities",
    "rescale_fluctuations",
    "ks_distance",
    "empirical_cdf",
]

CRITICAL_TOL = 1e-12


class Regime(str, Enum):
    GUE = "GUE"
    GOE2 = "GOE2"
    GAUSSIAN = "Gaussian"
    SUBCRITICAL_FAN = "SubcriticalFan"


@dataclass(frozen=True)
class ScalingConstants:
    """Regime label plus the centring/scaling constants.

    Constants that do not apply in the regime are ``None`` rather than NaN.
    """

    regime: Regime
    nu: float
    b: float
    rho: float
    m_nu: float
    sigma_nu: float | None
    varrho: float | None
    m_tilde: float | None
    sigma_tilde: float | None
    alpha: float

    def to_dict(self) -> dict:
        d = asdict(self)
        d["regime"] = self.regime.value
        return d


@dataclass(frozen=True)
class KpzQuantities:
    j_rho: float
    A_rho: float
    lambda_rho: float
    sigma_check: float
    y: float


def critical_density(nu: float, b: float) -> float:
    return 1.0 - (nu * (1.0 - b)) ** -0.5


def limit_shape(nu: float, b: float) -> float:
    """Macroscopic value of ``N_{nu t}(t) / t``; zero inside the rarefaction fan."""
    if nu < 0:
        raise ValueError("nu must be >= 0")
    if nu * (1.0 - b) <= 1.0:
        return 0.0
    return (math.sqrt(nu * (1.0 - b)) - 1.0) ** 2 / (1.0 - b)


def _sigma_nu(nu: float, b: float) -> float:
    r = math.sqrt(nu * (1.0 - b)) - 1.0
    return b ** (1 / 3) * r ** (2 / 3) / ((1.0 - b) ** 0.5 * nu ** (1 / 6))


def classify_regime(nu: float, b: float, rho: float, critical: bool = False) -> ScalingConstants:
    """Fluctuation regime of ``N_{nu t}(t)`` under step Bernoulli(rho) data.

    Parameters
    ----------
    critical
        Force the critical (GOE squared) regime regardless of the tolerance
        test, for callers that know ``rho`` equals the critical density exactly.
    """
    if not 0.0 < b < 1.0:
        raise ValueError("b must lie in (0, 1)")
    if not 0.0 < rho <= 1.0:
        raise ValueError("rho must lie in (0, 1]")
    if nu <= 0:
        raise ValueError("nu must be > 0")
    alpha = (1.0 - rho) / rho
    if nu * (1.0 - b) <= 1.0:
        return ScalingConstants(Regime.SUBCRITICAL_FAN, nu, b, rho, 0.0, None, None, None, None, alpha)
    m = limit_shape(nu, b)
    sig = _sigma_nu(nu, b)
    varrho = b * (math.sqrt(nu * (1.0 - b)) - 1.0)
    rho_c = critical_density(nu, b)
    if critical or abs(rho - rho_c) <= CRITICAL_TOL:
        return ScalingConstants(Regime.GOE2, nu, b, rho, m, sig, varrho, None, None, alpha)
    if rho > rho_c:
        return ScalingConstants(Regime.GUE, nu, b, rho, m, sig, varrho, None, None, alpha)
    m_t = nu / (1.0 + alpha) - 1.0 / (alpha * (1.0 - b))
    rad = (nu * (1.0 - b) * (1.0 - rho) ** 2 - 1.0) / (alpha**2 * (1.0 - b))
    s_t = math.sqrt(rad)
    return ScalingConstants(Regime.GAUSSIAN, nu, b, rho, m, None, None, m_t, s_t, alpha)


def kpz_quantities(rho: float, b: float) -> KpzQuantities:
    """Current, integrated covariance and curvature of the stationary flux.

    ``y`` is the characteristic speed at which density ``rho`` is seen, from
    ``rho = 1 - (y (1-b))^(-1/2)``; the curvature is ``-2 y^(3/2) b (1-b)^(1/2)``.
    """
    if not 0.0 < rho < 1.0:
        raise ValueError("rho must lie in (0, 1)")
    y = 1.0 / ((1.0 - rho) ** 2 * (1.0 - b))
    j = rho / ((1.0 - rho) * (1.0 - b))
    A = rho * (1.0 - rho)
    lam = -2.0 * y**1.5 * b * (1.0 - b) ** 0.5
    sig = (-0.5 * lam * A**2) ** (1 / 3)
    return KpzQuantities(j, A, lam, sig, y)


def rescale_fluctuations(samples: Iterable[tuple[float, float]], constants: ScalingConstants) -> np.ndarray:
    """Centre and scale ``(t, N)`` pairs according to the regime.

    ``(m t - N) / (sigma t^(1/3))`` in the GUE and critical regimes and
    ``(m~ t - N) / (sigma~ t^(1/2))`` in the Gaussian regime.
    """
    arr = np.asarray(list(samples), dtype=np.float64).reshape(-1, 2)
    t, n = arr[:, 0], arr[:, 1]
    if np.any(t <= 0):
        raise ValueError("times must be positive")
    reg = constants.regime
    if reg in (Regime.GUE, Regime.GOE2):
        if constants.sigma_nu is None:
            raise ValueError("constants lack sigma_nu")
        return (constants.m_nu * t - n) / (constants.sigma_nu * np.cbrt(t))
    if reg is Regime.GAUSSIAN:
        if constants.sigma_tilde is None or constants.m_tilde is None:
            raise ValueError("constants lack Gaussian-regime values")
        return (constants.m_tilde * t - n) / (constants.sigma_tilde * np.sqrt(t))
    raise ValueError(f"no fluctuation scaling in regime {reg.value}")


def empirical_cdf(samples: Sequence[float]) -> tuple[np.ndarray, np.ndarray]:
    x = np.sort(np.asarray(samples, dtype=np.float64))
    return x, np.arange(1, x.size + 1) / x.size


def ks_distance(samples: Sequence[float], cdf: Callable[[np.ndarray], np.ndarray]) -> float:
    """Sup distance between the empirical CDF of ``samples`` and ``cdf``.

    ``cdf`` is called once on the sorted sample array.
    """
    x = np.sort(np.asarray(samples, dtype=np.float64))
    n = x.size
    if n == 0:
        raise ValueError("need at least one sample")
    f = np.asarray(cdf(x), dtype=np.float64)
    i = np.arange(1, n + 1)
    return float(max(np.max(i / n - f), np.max(f - (i - 1) / n)))
