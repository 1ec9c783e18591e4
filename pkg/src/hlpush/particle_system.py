"""Event-driven simulation of the Hall-Littlewood PushTASEP on the non-negative integers.

Every particle carries a rate-1 exponential clock. When a clock rings the
particle jumps ``j`` sites to the right with probability ``(1-b) b^(j-1)`` for
``j`` smaller than the gap to its right neighbour, and otherwise lands on the
neighbour's site. The displaced neighbour is then activated and jumps by the
same rule, so a single ring can trigger a cascade of moves.

Cascades only ever move particles to the right, so the restriction of the
process to a window ``[0, y]`` is itself Markov: particles initially to the
right of ``y`` never influence sites ``<= y``. The simulators exploit this by
discarding particles once they finish a cascade beyond an optional ``x_max``;
statistics of ``N_x`` for ``x <= x_max`` are then exact.

Random numbers come from ``numpy.random.Generator``. Replica streams are
derived with :func:`replica_generators`, which spawns children of a single
``SeedSequence``; replica ``k`` always gets the ``k``-th child regardless of
how many replicas are requested or in which order they run.
"""
from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass
from typing import IO, Iterable, Sequence

import numpy as np
from numpy.typing import NDArray

from . import _kernels as K

__all__ = [
    "ModelParams",
    "Step",
    "StepBernoulli",
    "Explicit",
    "InitialCondition",
    "Configuration",
    "SixVertexParams",
    "EmptyConfigurationError",
    "sample_initial",
    "activate",
    "step",
    "run_until",
    "height",
    "influx_rate",
    "run_with_influx",
    "six_vertex_step",
    "six_vertex_run",
    "simulate_heights",
    "sample_heights_batch",
    "sample_positions_batch",
    "replica_generators",
    "sample_six_vertex_batch",
    "snapshot",
    "write_trajectory_jsonl",
    "write_heights_csv",
]


class EmptyConfigurationError(ValueError):
    """Raised when an operation needs at least one particle and there is none."""


@dataclass(frozen=True)
class ModelParams:
    b: float
    seed: int = 0

    def __post_init__(self):
        if not 0.0 < self.b < 1.0:
            raise ValueError(f"b must lie in (0, 1), got {self.b}")

    def generator(self) -> np.random.Generator:
        return np.random.default_rng(self.seed)


@dataclass(frozen=True)
class Step:
    """Every site of ``[0, L]`` occupied."""

    L: int

    def __post_init__(self):
        if self.L < 1:
            raise ValueError("L must be >= 1")


@dataclass(frozen=True)
class StepBernoulli:
    """Each site of ``[0, L]`` occupied independently with probability ``rho``."""

    rho: float
    L: int

    def __post_init__(self):
        if not 0.0 < self.rho <= 1.0:
            raise ValueError(f"rho must lie in (0, 1], got {self.rho}")
        if self.L < 1:
            raise ValueError("L must be >= 1")


@dataclass(frozen=True)
class Explicit:
    positions: tuple[int, ...]

    def __post_init__(self):
        p = tuple(int(v) for v in self.positions)
        object.__setattr__(self, "positions", p)
        if any(v < 0 for v in p):
            raise ValueError("positions must be non-negative")
        if any(b <= a for a, b in zip(p, p[1:])):
            raise ValueError("positions must be strictly increasing")


InitialCondition = Step | StepBernoulli | Explicit


@dataclass
class Configuration:
    """Mutable particle state.

    ``positions`` is strictly increasing. The operations in this module update
    a configuration in place and also return it, so calls can be chained.
    """

    positions: NDArray[np.int64]
    time: float = 0.0
    clock_rings: int = 0
    max_cascade_depth: int = 0
    boundary_touched: bool = False
    arrivals: int = 0

    def __post_init__(self):
        self.positions = np.ascontiguousarray(self.positions, dtype=np.int64)

    @property
    def n(self) -> int:
        return int(self.positions.shape[0])

    def copy(self) -> "Configuration":
        return Configuration(
            self.positions.copy(),
            self.time,
            self.clock_rings,
            self.max_cascade_depth,
            self.boundary_touched,
            self.arrivals,
        )

    def is_valid(self) -> bool:
        p = self.positions
        return bool(p.size == 0 or (p[0] >= 0 and np.all(np.diff(p) > 0)))


@dataclass(frozen=True)
class SixVertexParams:
    b1: float
    b2: float
    steps: int = 1

    def __post_init__(self):
        if not (0.0 <= self.b1 <= 1.0 and 0.0 <= self.b2 < 1.0):
            raise ValueError("need 0 <= b1 <= 1 and 0 <= b2 < 1")
        if self.steps < 0:
            raise ValueError("steps must be >= 0")


def replica_generators(seed: int, count: int) -> list[np.random.Generator]:
    """Independent generators for replicas ``0..count-1`` of a run seeded by ``seed``."""
    return [np.random.default_rng(s) for s in np.random.SeedSequence(seed).spawn(count)]


def _initial_positions(ic: InitialCondition, rng: np.random.Generator) -> NDArray[np.int64]:
    if isinstance(ic, Step):
        return np.arange(ic.L + 1, dtype=np.int64)
    if isinstance(ic, StepBernoulli):
        if ic.rho == 1.0:
            return np.arange(ic.L + 1, dtype=np.int64)
        occ = rng.random(ic.L + 1) < ic.rho
        return np.flatnonzero(occ).astype(np.int64)
    if isinstance(ic, Explicit):
        return np.asarray(ic.positions, dtype=np.int64)
    raise TypeError(f"unknown initial condition {ic!r}")


def sample_initial(params: ModelParams, ic: InitialCondition, rng: np.random.Generator | None = None) -> Configuration:
    """Draw a configuration at time 0.

    Raises
    ------
    EmptyConfigurationError
        If no particle was placed.
    """
    rng = params.generator() if rng is None else rng
    pos = _initial_positions(ic, rng)
    if pos.size == 0:
        raise EmptyConfigurationError("initial condition produced no particles")
    return Configuration(pos)


def activate(config: Configuration, index: int, b: float, rng: np.random.Generator) -> Configuration:
    """Run the full cascade triggered by activating particle ``index``."""
    n = config.n
    if not 0 <= index < n:
        raise IndexError(f"particle index {index} out of range for {n} particles")
    depth, last = K.cascade(config.positions, 0, n, index, b, rng)
    config.max_cascade_depth = max(config.max_cascade_depth, int(depth))
    if last == n - 1:
        config.boundary_touched = True
    return config


def step(config: Configuration, b: float, rng: np.random.Generator) -> Configuration:
    """One clock ring: Exp(N) holding time, then a uniformly chosen particle fires.

    The draw order (holding time, particle index, cascade) is the same as in
    the compiled bulk loop, so a sequence of ``step`` calls reproduces
    :func:`run_until` exactly for the same generator.
    """
    n = config.n
    if n == 0:
        raise EmptyConfigurationError("no particle left to activate")
    config.time += rng.exponential(1.0 / n)
    k = int(rng.integers(0, n))
    config.clock_rings += 1
    return activate(config, k, b, rng)


def _buffer(config: Configuration, slack: int) -> tuple[NDArray[np.int64], int]:
    n = config.n
    buf = np.zeros(n + 2 * slack + 2, dtype=np.int64)
    head = slack + 1
    buf[head:head + n] = config.positions
    return buf, head


def _stats(config: Configuration) -> NDArray[np.int64]:
    st = np.zeros(K.N_STATS, dtype=np.int64)
    st[K.STAT_RINGS] = config.clock_rings
    st[K.STAT_DEPTH] = config.max_cascade_depth
    st[K.STAT_TOUCHED] = int(config.boundary_touched)
    st[K.STAT_ARRIVALS] = config.arrivals
    return st


def _absorb(config: Configuration, buf, head, n, st, t_end) -> Configuration:
    config.positions = buf[head:head + n].copy()
    config.time = float(t_end)
    config.clock_rings = int(st[K.STAT_RINGS])
    config.max_cascade_depth = int(st[K.STAT_DEPTH])
    config.boundary_touched = bool(st[K.STAT_TOUCHED])
    config.arrivals = int(st[K.STAT_ARRIVALS])
    return config


_NO_LIMIT = np.iinfo(np.int64).max


def run_until(config: Configuration, t_end: float, b: float, rng: np.random.Generator,
              x_max: int | None = None) -> Configuration:
    """Apply clock rings until the next one would fall after ``t_end``.

    The holding time that overshoots ``t_end`` is discarded (memorylessness
    makes this exact in law), so ``run_until(c, 1)`` followed by
    ``run_until(c, 2)`` has the same distribution as ``run_until(c, 2)`` but
    not the same sample path for a fixed seed.

    When ``x_max`` is given, particles finishing a cascade beyond it are
    removed; the law of the configuration on ``[0, x_max]`` is unchanged.
    """
    if t_end < config.time:
        raise ValueError("t_end precedes the current time")
    if config.n == 0:
        raise EmptyConfigurationError("no particle to evolve")
    buf, head = _buffer(config, 0)
    st = _stats(config)
    limit = _NO_LIMIT if x_max is None else int(x_max)
    head, n = K.run_events(buf, head, config.n, float(config.time), float(t_end), b, 0.0, limit, rng, st)
    return _absorb(config, buf, head, n, st, t_end)


def height(config: Configuration, x: float) -> int:
    """N_x = number of particles at or to the left of ``x`` (``x`` may be ``inf``)."""
    if x == math.inf:
        return config.n
    return int(np.searchsorted(config.positions, math.floor(x), side="right"))


def influx_rate(rho: float, b: float) -> float:
    """Arrival rate that keeps Bernoulli(rho) product measure invariant."""
    if not 0.0 < rho < 1.0:
        raise ValueError("rho must lie in (0, 1)")
    return rho / ((1.0 - rho) * (1.0 - b))


def run_with_influx(params: ModelParams, rho: float, t_end: float, window: int,
                    rng: np.random.Generator | None = None) -> Configuration:
    """Start from Bernoulli(rho) on ``[0, window]`` and feed particles in from the left.

    An arrival behaves like an activated particle sitting at site -1: it jumps
    geometrically, settles on an empty site, or lands on the leftmost particle
    and passes the activation on. Particles that leave ``[0, window]`` are
    dropped and ``boundary_touched`` records that some cascade reached the
    rightmost particle.
    """
    rng = params.generator() if rng is None else rng
    tau = influx_rate(rho, params.b)
    occ = rng.random(window + 1) < rho
    config = Configuration(np.flatnonzero(occ).astype(np.int64))
    expected = tau * t_end
    slack = int(expected + 10.0 * math.sqrt(expected + 1.0)) + 16
    buf, head = _buffer(config, slack)
    st = _stats(config)
    head, n = K.run_events(buf, head, config.n, 0.0, float(t_end), params.b, tau, int(window), rng, st)
    return _absorb(config, buf, head, n, st, t_end)


def six_vertex_step(state: Configuration, sv: SixVertexParams, rng: np.random.Generator) -> Configuration:
    """One sweep of the discrete-time stochastic six vertex particle dynamics."""
    K.six_vertex_sweep(state.positions, state.n, sv.b1, sv.b2, rng)
    state.time += 1.0
    return state


def six_vertex_run(state: Configuration, sv: SixVertexParams, rng: np.random.Generator) -> Configuration:
    for _ in range(sv.steps):
        six_vertex_step(state, sv, rng)
    return state


def simulate_heights(b: float, ic: InitialCondition, times: Sequence[float], xs: Sequence[int],
                     rng: np.random.Generator, x_max: int | None = None,
                     tau: float = 0.0) -> tuple[NDArray[np.int64], Configuration]:
    """Sample ``N_x(t)`` on a grid of times and sites for one replica.

    ``x_max`` defaults to ``max(xs)``: nothing to the right of the largest
    requested site can affect the result.
    """
    times = np.asarray(times, dtype=np.float64)
    xs_arr = np.asarray(xs, dtype=np.int64)
    if times.size and np.any(np.diff(times) < 0):
        raise ValueError("times must be non-decreasing")
    pos = _initial_positions(ic, rng)
    limit = int(xs_arr.max()) if x_max is None else int(x_max)
    pos = pos[pos <= limit]
    config = Configuration(pos)
    buf, head = _buffer(config, 0)
    st = _stats(config)
    out, head, n = K.run_heights(buf, head, config.n, b, tau, limit, times, xs_arr, rng, st)
    _absorb(config, buf, head, n, st, times[-1] if times.size else 0.0)
    return out, config


def sample_heights_batch(b: float, rho: float, x: int, t: float, replicas: int,
                         rng: np.random.Generator) -> NDArray[np.int64]:
    """Many replicas of ``N_x(t)`` under step-Bernoulli data, in one compiled loop."""
    if x < 0 or replicas < 0:
        raise ValueError("x and replicas must be non-negative")
    if not 0.0 < rho <= 1.0:
        raise ValueError("rho must lie in (0, 1]")
    return K.batch_heights(float(rho), float(b), int(x), float(t), int(replicas), rng)


def sample_positions_batch(init: Sequence[int], b: float, t: float, replicas: int,
                           rng: np.random.Generator) -> NDArray[np.int64]:
    """Final positions, one row per replica, for a finite system started at ``init``."""
    pos = np.asarray(init, dtype=np.int64)
    if pos.size == 0 or np.any(np.diff(pos) <= 0):
        raise ValueError("init must be a non-empty strictly increasing sequence")
    return K.batch_positions(pos, float(b), float(t), int(replicas), rng)


def sample_six_vertex_batch(init: Sequence[int], sv: SixVertexParams, replicas: int,
                            rng: np.random.Generator) -> NDArray[np.int64]:
    """Positions after ``sv.steps`` six vertex sweeps, one row per replica."""
    pos = np.asarray(init, dtype=np.int64)
    if pos.size == 0 or np.any(np.diff(pos) <= 0):
        raise ValueError("init must be a non-empty strictly increasing sequence")
    return K.batch_six_vertex(pos, float(sv.b1), float(sv.b2), int(sv.steps), int(replicas), rng)


def snapshot(config: Configuration) -> dict:
    return {
        "time": float(config.time),
        "positions": [int(v) for v in config.positions],
        "clock_rings": int(config.clock_rings),
    }


def write_trajectory_jsonl(fh: IO[str], snapshots: Iterable[Configuration | dict]) -> None:
    for s in snapshots:
        rec = s if isinstance(s, dict) else snapshot(s)
        fh.write(json.dumps(rec) + "\n")


def write_heights_csv(fh: IO[str], rows: Iterable[tuple[int, float, int, int]], header: bool = True) -> None:
    """Rows of ``(seed, t, x, N_x)``."""
    w = csv.writer(fh)
    if header:
        w.writerow(["seed", "t", "x", "N_x"])
    for seed, t, x, nx in rows:
        w.writerow([int(seed), repr(float(t)), int(x), int(nx)])
