import io
import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.stats import chisquare

from hlpush.exact_formulas import single_particle_pmf
from hlpush.particle_system import (
    Configuration,
    EmptyConfigurationError,
    Explicit,
    ModelParams,
    SixVertexParams,
    Step,
    StepBernoulli,
    activate,
    height,
    influx_rate,
    replica_generators,
    run_until,
    run_with_influx,
    sample_initial,
    sample_positions_batch,
    sample_six_vertex_batch,
    simulate_heights,
    six_vertex_step,
    step,
    write_heights_csv,
    write_trajectory_jsonl,
)


def _z(count, n, p):
    return (count - n * p) / math.sqrt(n * p * (1 - p))


# -- parameters and initial data ----------------------------------------------------

def test_model_params_rejects_bad_b():
    for b in (0.0, 1.0, -0.1, 1.5):
        with pytest.raises(ValueError):
            ModelParams(b)


def test_initial_condition_validation():
    with pytest.raises(ValueError):
        StepBernoulli(0.0, 4)
    with pytest.raises(ValueError):
        StepBernoulli(1.2, 4)
    with pytest.raises(ValueError):
        Step(0)
    with pytest.raises(ValueError):
        Explicit((0, 2, 2))
    with pytest.raises(ValueError):
        Explicit((-1, 2))


def test_step_fill():
    c = sample_initial(ModelParams(0.5), Step(4))
    assert c.positions.tolist() == [0, 1, 2, 3, 4]


def test_step_bernoulli_rho_one_is_step():
    c = sample_initial(ModelParams(0.5), StepBernoulli(1.0, 4))
    assert c.positions.tolist() == [0, 1, 2, 3, 4]


def test_step_bernoulli_particle_count():
    L, rho, seeds = 10_000, 0.5, 1000
    counts = [sample_initial(ModelParams(0.5, s), StepBernoulli(rho, L)).n for s in range(seeds)]
    se = math.sqrt((L + 1) * rho * (1 - rho) / seeds)
    assert abs(np.mean(counts) - 5000.5) <= 3 * se


def test_empty_configuration_error():
    with pytest.raises(EmptyConfigurationError):
        sample_initial(ModelParams(0.5), Explicit(()))
    with pytest.raises(EmptyConfigurationError):
        step(Configuration(np.zeros(0, dtype=np.int64)), 0.5, np.random.default_rng(0))


# -- activation -----------------------------------------------------------------------

def test_activate_single_step_probability():
    b, n = 0.5, 40_000
    rng = np.random.default_rng(1)
    hits = sum(activate(Configuration(np.array([0, 5])), 0, b, rng).positions[0] == 1 for _ in range(n))
    assert abs(_z(hits, n, 1 - b)) < 4


def test_activate_forced_push():
    rng = np.random.default_rng(2)
    for _ in range(200):
        c = activate(Configuration(np.array([0, 1])), 0, 0.5, rng)
        assert c.positions[0] == 1 and c.positions[1] > 1
        assert c.boundary_touched


def test_activate_cascade_enumeration():
    # jump exactly two sites and stop short of the neighbour at 3
    b, n = 0.5, 40_000
    rng = np.random.default_rng(3)
    hits = sum(activate(Configuration(np.array([0, 3, 4])), 0, b, rng).positions.tolist() == [2, 3, 4]
               for _ in range(n))
    assert abs(_z(hits, n, 0.25)) < 4


def test_activate_index_out_of_range():
    with pytest.raises(IndexError):
        activate(Configuration(np.array([0, 1])), 2, 0.5, np.random.default_rng(0))


@pytest.mark.parametrize("gap", [1, 2, 4])
def test_jump_size_law_chi_square(gap):
    b, n = 0.6, 1_000_000 if gap == 4 else 200_000
    rng = np.random.default_rng(10 + gap)
    init = np.array([0, gap])
    counts = np.zeros(gap + 1)
    for _ in range(n):
        c = activate(Configuration(init.copy()), 0, b, rng)
        counts[c.positions[0]] += 1
    probs = np.array([(1 - b) * b ** (j - 1) for j in range(1, gap)] + [b ** (gap - 1)])
    if gap == 1:
        assert counts[1] == n
        return
    assert chisquare(counts[1:], n * probs).pvalue > 1e-3


@settings(max_examples=60, deadline=None)
@given(st.lists(st.integers(0, 40), min_size=1, max_size=12, unique=True),
       st.floats(0.05, 0.95), st.integers(0, 2**32 - 1), st.data())
def test_activate_preserves_order_and_never_moves_left(pos, b, seed, data):
    pos = np.array(sorted(pos), dtype=np.int64)
    idx = data.draw(st.integers(0, pos.size - 1))
    c = activate(Configuration(pos.copy()), idx, b, np.random.default_rng(seed))
    assert c.is_valid()
    assert np.all(c.positions >= pos)
    # particles left of the activated one are untouched
    assert np.array_equal(c.positions[:idx], pos[:idx])


# -- clocks ---------------------------------------------------------------------------------

@pytest.mark.parametrize("n_particles,mean", [(1, 1.0), (10, 0.1)])
def test_holding_time_mean(n_particles, mean):
    rng = np.random.default_rng(4)
    c = Configuration(np.arange(0, 10 * n_particles, 10))
    steps = 100_000
    for _ in range(steps):
        step(c, 0.5, rng)
    assert abs(c.time / steps - mean) <= 3 * mean / math.sqrt(steps)


def test_rate_identity():
    c = Configuration(np.arange(0, 2000, 100))
    T = 5000.0
    run_until(c, T, 0.5, np.random.default_rng(5))
    rate = c.clock_rings / (c.n * T)
    assert abs(rate - 1.0) < 4 / math.sqrt(c.n * T)


def test_single_particle_mean_position():
    b, t, reps = 0.5, 1.0, 100_000
    x = sample_positions_batch([0], b, t, reps, np.random.default_rng(6))[:, 0]
    se = x.std(ddof=1) / math.sqrt(reps)
    assert abs(x.mean() - t / (1 - b)) <= 3 * se


def test_steps_reproduce_run_until():
    b = 0.7
    c1 = Configuration(np.array([0, 1, 2, 5, 9]))
    run_until(c1, 3.0, b, np.random.default_rng(7))
    c2 = Configuration(np.array([0, 1, 2, 5, 9]))
    rng = np.random.default_rng(7)
    for _ in range(c1.clock_rings):
        step(c2, b, rng)
    assert np.array_equal(c1.positions, c2.positions)


def test_run_until_zero_length_and_backwards():
    c = Configuration(np.array([0, 3]), time=1.5)
    run_until(c, 1.5, 0.5, np.random.default_rng(0))
    assert c.positions.tolist() == [0, 3] and c.time == 1.5
    with pytest.raises(ValueError):
        run_until(c, 1.0, 0.5, np.random.default_rng(0))


def test_run_until_markov_in_law():
    b, reps = 0.5, 20_000
    a, c = np.empty(reps), np.empty(reps)
    gens = replica_generators(8, 2 * reps)
    for r in range(reps):
        cfg = Configuration(np.array([0, 1, 2]))
        run_until(cfg, 1.0, b, gens[r])
        run_until(cfg, 2.0, b, gens[r])
        a[r] = cfg.positions[-1]
        cfg = Configuration(np.array([0, 1, 2]))
        run_until(cfg, 2.0, b, gens[reps + r])
        c[r] = cfg.positions[-1]
    se = math.sqrt(a.var() / reps + c.var() / reps)
    assert abs(a.mean() - c.mean()) <= 4 * se


def test_determinism():
    out1, c1 = simulate_heights(0.5, StepBernoulli(0.6, 50), [1.0, 5.0], [10, 30], np.random.default_rng(9))
    out2, c2 = simulate_heights(0.5, StepBernoulli(0.6, 50), [1.0, 5.0], [10, 30], np.random.default_rng(9))
    assert np.array_equal(out1, out2) and np.array_equal(c1.positions, c2.positions)


def test_window_truncation_is_exact_for_heights():
    # heights left of the window edge do not depend on particles to the right
    b, t, x = 0.5, 3.0, 12
    reps = 20_000
    small = np.array([simulate_heights(b, Step(x), [t], [x], g)[0][0, 0]
                      for g in replica_generators(11, reps)])
    big = np.array([simulate_heights(b, Step(60), [t], [x], g, x_max=60)[0][0, 0]
                    for g in replica_generators(12, reps)])
    se = math.sqrt(small.var() / reps + big.var() / reps)
    assert abs(small.mean() - big.mean()) <= 4 * se


# -- heights --------------------------------------------------------------------------------

def test_height_examples():
    c = Configuration(np.array([0, 2, 5]))
    assert height(c, 3) == 2
    assert height(c, -1) == 0
    assert height(c, math.inf) == 3


@settings(max_examples=100, deadline=None)
@given(st.lists(st.integers(0, 100), min_size=1, max_size=30, unique=True), st.integers(-5, 110))
def test_height_counts(pos, x):
    c = Configuration(np.array(sorted(pos)))
    assert height(c, x) == sum(p <= x for p in pos)


# -- influx -----------------------------------------------------------------------------------

def test_influx_rate_value():
    assert influx_rate(0.4, 0.5) == pytest.approx(4.0 / 3.0, rel=1e-15)
    with pytest.raises(ValueError):
        influx_rate(1.0, 0.5)


def test_influx_stationary_site_and_pair():
    rho, b, reps = 0.4, 0.5, 10_000
    params = ModelParams(b)
    s5 = s37 = 0
    for g in replica_generators(13, reps):
        c = run_with_influx(params, rho, 200.0, 40, g)
        occ = set(c.positions.tolist())
        s5 += 5 in occ
        s37 += (3 in occ) and (7 in occ)
    assert abs(_z(s5, reps, rho)) <= 3
    assert abs(_z(s37, reps, rho * rho)) <= 3


# -- six vertex -----------------------------------------------------------------------------

def test_six_vertex_b1_one_is_identity():
    c = Configuration(np.array([0, 1, 4, 9]))
    six_vertex_step(c, SixVertexParams(1.0, 0.5), np.random.default_rng(0))
    assert c.positions.tolist() == [0, 1, 4, 9]


def test_six_vertex_b1_zero_forced_push():
    rng = np.random.default_rng(1)
    for _ in range(100):
        c = Configuration(np.array([0, 1]))
        six_vertex_step(c, SixVertexParams(0.0, 0.5), rng)
        assert c.positions[0] == 1 and c.positions[1] > 1


def test_six_vertex_single_particle_total_variation():
    eps, b, t, reps = 1e-2, 0.5, 1.0, 100_000
    x = sample_six_vertex_batch([0], SixVertexParams(1 - eps, b, int(t / eps)), reps, np.random.default_rng(2))[:, 0]
    k = np.arange(x.max() + 1)
    emp = np.bincount(x) / reps
    tv = 0.5 * (np.abs(emp - single_particle_pmf(t, k, b)).sum() + 1 - single_particle_pmf(t, k, b).sum())
    assert tv <= 0.05


def test_six_vertex_params_validation():
    with pytest.raises(ValueError):
        SixVertexParams(1.5, 0.5)
    with pytest.raises(ValueError):
        SixVertexParams(0.5, 1.0)


# -- serialisation ------------------------------------------------------------------------------

def test_trajectory_jsonl_and_csv():
    buf = io.StringIO()
    c = Configuration(np.array([0, 2]), time=0.5, clock_rings=3)
    write_trajectory_jsonl(buf, [c, {"time": 1.0, "positions": [1, 2], "clock_rings": 4}])
    lines = [json.loads(s) for s in buf.getvalue().splitlines()]
    assert lines[0] == {"time": 0.5, "positions": [0, 2], "clock_rings": 3}
    assert lines[1]["positions"] == [1, 2]
    buf = io.StringIO()
    write_heights_csv(buf, [(1, 0.1, 3, 2)])
    assert buf.getvalue().splitlines() == ["seed,t,x,N_x", "1,0.1,3,2"]
