"""Compiled inner loops for the particle dynamics.

Positions live in a slice ``pos[head:head + n]`` of a larger int64 buffer so
that particles entering from the left (reservoir mode) are an O(1) operation.
All random draws go through a ``numpy.random.Generator`` so that the Python
and compiled paths consume exactly the same stream.
"""
from __future__ import annotations

import numpy as np
from numba import njit

# layout of the int64 statistics vector shared with the Python side
STAT_RINGS = 0
STAT_DEPTH = 1
STAT_TOUCHED = 2
STAT_ARRIVALS = 3
STAT_DROPPED = 4
N_STATS = 5


@njit(cache=True)
def cascade(pos, head, n, idx, b, rng):
    """Run one full activation cascade starting at buffer index ``idx``.

    Returns ``(depth, last)`` where ``last`` is the buffer index of the particle
    that finished the cascade.
    """
    p = 1.0 - b
    end = head + n - 1
    i = idx
    depth = 0
    while True:
        depth += 1
        if i == end:
            pos[i] += rng.geometric(p)
            return depth, i
        gap = pos[i + 1] - pos[i]
        if gap == 1:
            pos[i] = pos[i + 1]
            i += 1
            continue
        j = rng.geometric(p)
        if j < gap:
            pos[i] += j
            return depth, i
        # landed on the neighbour: it inherits the activation
        pos[i] = pos[i + 1]
        i += 1


@njit(cache=True)
def _compact(pos, head, n):
    cap = pos.shape[0]
    new_head = (cap - n) // 2
    if new_head <= head:
        return head
    for k in range(n - 1, -1, -1):
        pos[new_head + k] = pos[head + k]
    return new_head


@njit(cache=True)
def run_events(pos, head, n, t, t_end, b, tau, x_max, rng, stats):
    """Advance the system from time ``t`` to ``t_end``.

    Bulk clocks ring at total rate ``n`` (uniform particle choice); arrivals
    at site -1 occur at rate ``tau``. A particle finishing a cascade beyond
    ``x_max`` is removed; this only ever concerns the rightmost particle.
    Returns the new ``(head, n)``.
    """
    while True:
        rate = n + tau
        if rate <= 0.0:
            break
        dt = rng.exponential(1.0 / rate)
        if t + dt > t_end:
            break
        t += dt
        if tau > 0.0 and rng.random() * rate < tau:
            if head == 0:
                head = _compact(pos, head, n)
                if head == 0:
                    raise RuntimeError("position buffer exhausted")
            head -= 1
            pos[head] = -1
            n += 1
            idx = head
            stats[STAT_ARRIVALS] += 1
        else:
            idx = head + rng.integers(0, n)
            stats[STAT_RINGS] += 1
        depth, last = cascade(pos, head, n, idx, b, rng)
        if depth > stats[STAT_DEPTH]:
            stats[STAT_DEPTH] = depth
        if last == head + n - 1:
            stats[STAT_TOUCHED] = 1
            if pos[last] > x_max:
                n -= 1
                stats[STAT_DROPPED] += 1
    return head, n


@njit(cache=True)
def heights_at(pos, head, n, xs):
    """Height function N_x = #{i : x_i <= x} for sorted or unsorted ``xs``."""
    out = np.empty(xs.shape[0], dtype=np.int64)
    for k in range(xs.shape[0]):
        out[k] = np.searchsorted(pos[head:head + n], xs[k], side="right")
    return out


@njit(cache=True)
def run_heights(pos, head, n, b, tau, x_max, times, xs, rng, stats):
    """Record N_x at each time of the increasing array ``times``."""
    out = np.empty((times.shape[0], xs.shape[0]), dtype=np.int64)
    t = 0.0
    for k in range(times.shape[0]):
        head, n = run_events(pos, head, n, t, times[k], b, tau, x_max, rng, stats)
        t = times[k]
        out[k] = heights_at(pos, head, n, xs)
    return out, head, n


@njit(cache=True)
def occupation(pos, head, n, width):
    eta = np.zeros(width, dtype=np.int8)
    for k in range(head, head + n):
        x = pos[k]
        if 0 <= x < width:
            eta[x] = 1
    return eta


@njit(cache=True)
def six_vertex_sweep(pos, n, b1, b2, rng):
    """One left-to-right sweep of the stochastic six vertex dynamics.

    A particle that is pushed must move; otherwise it stays with probability
    ``b1``. A moving particle takes a geometric(1-b2) number of steps capped at
    its right neighbour, landing on it with the tail probability.
    """
    p = 1.0 - b2
    i = 0
    while i < n:
        if rng.random() < b1:
            i += 1
            continue
        # cascade started by particle i; pushes are forced moves
        while True:
            if i == n - 1:
                pos[i] += rng.geometric(p)
                break
            gap = pos[i + 1] - pos[i]
            if gap > 1:
                j = rng.geometric(p)
                if j < gap:
                    pos[i] += j
                    break
            pos[i] = pos[i + 1]
            i += 1
        i += 1


@njit(cache=True)
def batch_heights(rho, b, x, t_end, replicas, rng):
    """``N_x(t_end)`` for independent step-Bernoulli replicas drawn from one stream.

    Only ``[0, x]`` is simulated, which is exact for the height at ``x``.
    """
    out = np.empty(replicas, dtype=np.int64)
    pos = np.empty(x + 1, dtype=np.int64)
    stats = np.zeros(N_STATS, dtype=np.int64)
    for r in range(replicas):
        n = 0
        for site in range(x + 1):
            if rho >= 1.0 or rng.random() < rho:
                pos[n] = site
                n += 1
        head, n = run_events(pos, 0, n, 0.0, t_end, b, 0.0, x, rng, stats)
        out[r] = n
    return out


@njit(cache=True)
def batch_positions(init, b, t_end, replicas, rng):
    """Final positions of ``replicas`` independent copies started from ``init``."""
    n0 = init.shape[0]
    out = np.empty((replicas, n0), dtype=np.int64)
    pos = np.empty(n0, dtype=np.int64)
    stats = np.zeros(N_STATS, dtype=np.int64)
    big = np.iinfo(np.int64).max
    for r in range(replicas):
        pos[:] = init
        run_events(pos, 0, n0, 0.0, t_end, b, 0.0, big, rng, stats)
        out[r] = pos
    return out


@njit(cache=True)
def batch_six_vertex(init, b1, b2, steps, replicas, rng):
    """Positions after ``steps`` sweeps for ``replicas`` independent copies."""
    n0 = init.shape[0]
    out = np.empty((replicas, n0), dtype=np.int64)
    pos = np.empty(n0, dtype=np.int64)
    for r in range(replicas):
        pos[:] = init
        for _ in range(steps):
            six_vertex_sweep(pos, n0, b1, b2, rng)
        out[r] = pos
    return out
