import io
import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from numpy.testing import assert_array_equal
from sklearn.base import clone

from ramimo.channel import SystemConfig, build_candidate_pool, sample_propagation
from ramimo.exceptions import BudgetExceededError, ConfigError
from ramimo.mode_select import (
    ModeMetric,
    ModeSelector,
    complexity_counters,
    evaluate_metric,
    exhaustive_mode_search,
    heuristic_mode_search,
    random_restart_search,
    write_trace_csv,
)
from ramimo.patterns import generate_pattern_set
from ramimo.precoding import fixed_rf_precoder, rbd_precoder, sum_rate

from conftest import crandn

SMALL = SystemConfig(n_tx=4, n_rx=2, n_users=2, n_rf=2, n_streams=1, n_modes=3)


def small_pool(seed, cfg=SMALL):
    pats = generate_pattern_set(cfg.n_modes)
    return build_candidate_pool(sample_propagation(cfg, seed=seed), pats, cfg)


def column_compose(pool, modes):
    return np.stack([pool[m][:, t] for t, m in enumerate(modes)], axis=1)


def brute_force(pool, cfg, score):
    best, arg = -np.inf, None
    for modes in itertools.product(range(cfg.n_modes), repeat=cfg.n_tx):
        v = score(column_compose(pool, modes))
        if v > best:
            best, arg = v, np.array(modes)
    return arg, best


class Counting:
    """Wraps a metric and counts every mode vector it scores."""

    def __init__(self, metric):
        self.metric, self.cfg, self.count = metric, metric.cfg, 0

    def scores(self, batch):
        self.count += np.atleast_2d(batch).shape[0]
        return self.metric.scores(batch)


def test_eig_sum_identity():
    cfg = SystemConfig(n_tx=4, n_rx=2, n_users=2, n_rf=4, n_streams=2, n_modes=1)
    m = ModeMetric("eig_sum", np.eye(4)[None].astype(complex), cfg)
    assert m(np.zeros(4, dtype=int)) == pytest.approx(4.0)


def test_eig_sum_is_frobenius_norm(rng):
    pool = crandn(rng, 3, 4, 4)
    m = ModeMetric("eig_sum", pool, SMALL)
    for _ in range(10):
        modes = rng.integers(3, size=4)
        assert m(modes) == pytest.approx(np.linalg.norm(column_compose(pool, modes)) ** 2, rel=1e-9)


def test_sum_rate_metric_is_definitional(rng):
    pool = crandn(rng, 3, 4, 4)
    m = ModeMetric("sum_rate", pool, SMALL, noise_power=0.05)
    modes = np.array([0, 2, 1, 1])
    h = column_compose(pool, modes)
    f_rf = fixed_rf_precoder(SMALL)
    expected = sum_rate(h, rbd_precoder(h, f_rf, 0.05, SMALL), 0.05, SMALL)
    assert evaluate_metric(m, modes) == pytest.approx(expected, rel=1e-12)


def test_bd_metric_scores_infeasible_as_minus_inf(rng):
    # two receive antennas per user fill both RF dimensions: no null space left
    cfg = SystemConfig(n_tx=2, n_rx=2, n_users=2, n_rf=2, n_streams=1, n_modes=1)
    pool = crandn(rng, 1, 4, 2)
    m = ModeMetric("sum_rate", pool, cfg, precoder="bd")
    assert m(np.zeros(2, dtype=int)) == -np.inf


def test_unknown_metric():
    with pytest.raises(ConfigError):
        ModeMetric("capacity", small_pool(0), SMALL)


def test_exhaustive_single_mode():
    cfg = SystemConfig(n_tx=4, n_rx=2, n_users=2, n_rf=2, n_streams=1, n_modes=1)
    res = exhaustive_mode_search(ModeMetric("eig_sum", small_pool(0, cfg), cfg))
    assert_array_equal(res.modes, 0)


def test_exhaustive_single_antenna(rng):
    cfg = SystemConfig(n_tx=1, n_rx=1, n_users=1, n_rf=1, n_streams=1, n_modes=5)
    pool = crandn(rng, 5, 1, 1)
    res = exhaustive_mode_search(ModeMetric("eig_sum", pool, cfg))
    assert res.modes[0] == np.argmax(np.abs(pool[:, 0, 0]))


@pytest.mark.parametrize("kind", ["eig_sum", "sum_rate"])
def test_exhaustive_matches_enumeration(kind):
    f_rf = fixed_rf_precoder(SMALL)

    def score(h):
        if kind == "eig_sum":
            return np.linalg.norm(h) ** 2
        return sum_rate(h, rbd_precoder(h, f_rf, SMALL.noise_power, SMALL), SMALL.noise_power, SMALL)

    for seed in range(5):
        pool = small_pool(seed)
        res = exhaustive_mode_search(ModeMetric(kind, pool, SMALL))
        modes, best = brute_force(pool, SMALL, score)
        assert_array_equal(res.modes, modes)
        assert res.score == pytest.approx(best, rel=1e-9)
        assert res.n_evaluations == 81


def test_exhaustive_ties_go_to_smallest_vector():
    pool = np.ones((3, 4, 4), dtype=complex)
    res = exhaustive_mode_search(ModeMetric("eig_sum", pool, SMALL))
    assert_array_equal(res.modes, 0)


def test_exhaustive_budget():
    with pytest.raises(BudgetExceededError):
        exhaustive_mode_search(ModeMetric("eig_sum", small_pool(0), SMALL), budget=80)


def test_heuristic_single_mode_one_sweep():
    cfg = SystemConfig(n_tx=4, n_rx=2, n_users=2, n_rf=2, n_streams=1, n_modes=1)
    res = heuristic_mode_search(ModeMetric("eig_sum", small_pool(0, cfg), cfg))
    assert res.n_sweeps == 1
    assert_array_equal(res.modes, 0)


def test_heuristic_single_antenna_equals_exhaustive(rng):
    cfg = SystemConfig(n_tx=1, n_rx=1, n_users=1, n_rf=1, n_streams=1, n_modes=6)
    pool = crandn(rng, 6, 1, 1)
    a = heuristic_mode_search(ModeMetric("eig_sum", pool, cfg))
    b = exhaustive_mode_search(ModeMetric("eig_sum", pool, cfg))
    assert_array_equal(a.modes, b.modes)


def test_heuristic_one_sweep_counts_default_size(pool, cfg):
    res = heuristic_mode_search(ModeMetric("eig_sum", pool, cfg), max_sweeps=1)
    assert res.n_evaluations == 80
    assert complexity_counters(res) == 80


def test_counters_match_instrumented_oracle(pool, cfg):
    wrapped = Counting(ModeMetric("sum_rate", pool, cfg))
    res = heuristic_mode_search(wrapped)
    assert complexity_counters(res) == wrapped.count == wrapped.metric.n_calls
    small = Counting(ModeMetric("eig_sum", small_pool(1, SystemConfig(n_tx=4, n_rx=2, n_users=2,
                                                                       n_rf=2, n_streams=1,
                                                                       n_modes=4)),
                                SystemConfig(n_tx=4, n_rx=2, n_users=2, n_rf=2, n_streams=1, n_modes=4)))
    res = exhaustive_mode_search(small)
    assert complexity_counters(res) == small.count == 256


def test_heuristic_trace_is_monotone(pool, cfg):
    res = heuristic_mode_search(ModeMetric("sum_rate", pool, cfg))
    scores = [s for *_, s in res.trace]
    assert all(b >= a - 1e-12 for a, b in zip(scores, scores[1:]))
    assert res.score == scores[-1]
    buf = io.StringIO()
    write_trace_csv(res, buf)
    assert buf.getvalue().splitlines()[0] == "iteration,antenna,mode,score"
    assert len(buf.getvalue().splitlines()) == 1 + len(res.trace)


def test_random_restarts_never_worse(pool, cfg):
    base = heuristic_mode_search(ModeMetric("sum_rate", pool, cfg))
    more = random_restart_search(ModeMetric("sum_rate", pool, cfg), n_restarts=3, seed=0)
    assert more.score >= base.score
    assert more.n_evaluations > base.n_evaluations


def test_selector_estimator_api(pool, cfg):
    sel = ModeSelector(config=cfg, metric="eig_sum").fit(pool)
    assert sel.modes_.shape == (8,)
    assert sel.transform(pool).shape == (4, 8)
    assert sel.get_params()["metric"] == "eig_sum"
    twin = clone(sel)
    assert not hasattr(twin, "modes_")


def test_selector_exhaustive_agrees_with_function():
    pool = small_pool(3)
    sel = ModeSelector(config=SMALL, search="exhaustive").fit(pool)
    res = exhaustive_mode_search(ModeMetric("sum_rate", pool, SMALL))
    assert_array_equal(sel.modes_, res.modes)


def test_selector_rejects_bad_search(pool, cfg):
    with pytest.raises(ConfigError):
        ModeSelector(config=cfg, search="annealing").fit(pool)


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 2**32 - 1))
def test_heuristic_property_eig_sum_is_optimal(seed):
    # eig_sum separates over antennas, so coordinate ascent is exact
    pool = crandn(np.random.default_rng(seed), 3, 4, 4)
    a = heuristic_mode_search(ModeMetric("eig_sum", pool, SMALL))
    b = exhaustive_mode_search(ModeMetric("eig_sum", pool, SMALL))
    assert a.score == pytest.approx(b.score, rel=1e-12)


@settings(max_examples=20, deadline=None)
@given(seed=st.integers(0, 2**32 - 1))
def test_heuristic_property_beats_start(seed):
    pool = crandn(np.random.default_rng(seed), 3, 4, 4)
    m = ModeMetric("sum_rate", pool, SMALL)
    res = heuristic_mode_search(m)
    assert res.score >= m(np.zeros(4, dtype=np.intp)) - 1e-12
    assert 1 <= res.n_sweeps <= 5
