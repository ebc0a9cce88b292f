"""Mean field forest fire model."""

import math

import numpy as np
import pytest

from steadytree import meanfield as mf
from steadytree import stattest as st


def test_trivial_cases():
    rng = np.random.default_rng(1)
    state, events, _ = mf.mf_run(1, 5.0, 3.0, rng)
    assert state.edge_count == 0
    assert mf.empirical_size_distribution(state) == {1: 1.0}
    # lambda = 0: pure edge growth, never burns
    state, events, _ = mf.mf_run(50, 0.0, 2.0, np.random.default_rng(2))
    assert all(ev.kind == "edge" for ev in events)


def test_conservation_and_consistency():
    rng = np.random.default_rng(3)
    state, _, _ = mf.mf_run(60, 0.3, 6.0, rng, debug_checks=True)
    vk = mf.empirical_size_distribution(state)
    assert sum(vk.values()) == pytest.approx(1.0, abs=1e-12)
    assert state.check_consistency()


def test_determinism():
    a, ev_a, _ = mf.mf_run(40, 0.2, 4.0, np.random.default_rng(9))
    b, ev_b, _ = mf.mf_run(40, 0.2, 4.0, np.random.default_rng(9))
    assert [(e.time, e.kind, e.vertices) for e in ev_a] == \
        [(e.time, e.kind, e.vertices) for e in ev_b]
    assert a.edge_count == b.edge_count


def test_er_thinning_edge_count():
    # burning off: E[edges at t] = C(n,2)(1 - e^{-t/n})
    n, t = 300, 3.0
    counts = [
        mf.mf_run(n, 0.0, t, np.random.default_rng(100 + s),
                  keep_events=False, burning=False)[0].edge_count
        for s in range(60)
    ]
    p = 1 - math.exp(-t / n)
    mean = n * (n - 1) / 2 * p
    sd = math.sqrt(n * (n - 1) / 2 * p * (1 - p))
    z = (np.mean(counts) - mean) / (sd / math.sqrt(len(counts)))
    assert abs(z) < 4.2, (np.mean(counts), mean)


def test_snapshots_and_ages():
    state, _, snaps = mf.mf_run(80, 0.5, 5.0, np.random.default_rng(5),
                                snapshot_times=[1.0, 2.5, 5.0])
    assert set(snaps) == {1.0, 2.5, 5.0}
    for vk in snaps.values():
        assert sum(vk.values()) == pytest.approx(1.0)
    ages = state.ages()
    assert np.all(ages >= 0) and np.all(ages <= 5.0 + 1e-12)


def test_tagged_trace():
    rng = np.random.default_rng(6)
    state, events, _ = mf.mf_run(200, 0.15, 12.0, rng, tagged=0)
    tr = mf.tagged_trace(events, 0, 12.0)
    # after each burn the tagged size resets to 1
    for i, k in enumerate(tr.kinds):
        if k == 1:
            assert tr.sizes_after[i] == 1
    assert np.all(np.diff(tr.times) >= 0)


def test_sup_deviation_trend():
    # medians over a handful of seeds decrease with n (exploratory)
    med = {}
    for n in (1000, 8000):
        sups = [
            mf.sup_deviation_from_w(mf.empirical_size_distribution(
                mf.mf_run(n, n ** -0.5, 10.0, np.random.default_rng(10 + s),
                          keep_events=False)[0]))
            for s in range(5)
        ]
        med[n] = float(np.median(sups))
    assert med[8000] < med[1000]


def test_tagged_interburn_times_versus_limit_law():
    # exploratory: at moderate n the tagged vertex's inter-burn times are
    # already close to the limiting cdf tanh^2(x/2)
    rng = np.random.default_rng(7)
    n = 3000
    state, events, _ = mf.mf_run(n, n ** -0.5, 60.0, rng, tagged=0)
    tr = mf.tagged_trace(events, 0, 60.0)
    gaps = np.diff(tr.theta_marks)
    gaps = gaps[len(gaps) // 4:]
    if len(gaps) >= 8:
        emp_med = float(np.median(gaps))
        # median of tanh^2(x/2): tanh(m/2) = sqrt(1/2)
        target = 2 * math.atanh(math.sqrt(0.5))
        assert abs(emp_med - target) < 1.2
