"""Truncated infinite forest fire: construction, evolution, projection."""

import math

import numpy as np
import pytest

from steadytree import closed_forms as cf
from steadytree import infinite_ff as ff
from steadytree import stattest as st


def test_determinism_given_seed_and_horizon():
    s1 = ff.ffh_init(2, 41, 3.0)
    s2 = ff.ffh_init(2, 41, 3.0)
    assert set(s1.nodes) == set(s2.nodes)
    f1 = ff.ffh_run(s1, 3.0)
    f2 = ff.ffh_run(s2, 3.0)
    assert f1[0] == f2[0] and f1[1] == f2[1]


def test_initial_state_structure():
    state = ff.ffh_init(2, 7, 2.0)
    for key, node in state.nodes.items():
        assert len(key) <= 2
        # live children are negative indices, future non-negative
        assert all(n < 0 for n in node.live_children)
        assert all(n >= 0 for n in node.future_children)
        # live child edge ages strictly decrease with the index
        ages = [-state.nodes[key + (n,)].arrival
                for n in sorted(node.live_children, reverse=True)]
        assert all(a < b for a, b in zip(ages, ages[1:]))
        # ages and arrivals are consistent
        if len(key) == 2:
            assert not node.future_children
        if node.parent_live:
            assert node.arrival <= 0
        # initial ages are non-negative
        assert state.age(key, 0.0) >= 0
    # finite live degree everywhere (no infinite component possible)
    assert all(len(n.live_children) < 10**6 for n in state.nodes.values())


def test_root_cluster_initial_law_h1():
    # P(root cluster size = 1 at t=0) = P(no live children) = w_1 = 1/2
    hits = 0
    n = 4000
    for i in range(n):
        state = ff.ffh_init(1, 2000 + i, 1.0)
        hits += len(ff.root_cluster(state)) == 1
    assert abs(hits / n - 0.5) < 3.9 * math.sqrt(0.25 / n)


def test_run_without_events():
    # a state whose ignitions and arrivals lie beyond the horizon only
    # ages up
    state = ff.ffh_init(0, 11, 0.001)
    fires, burns, snaps = ff.ffh_run(state, 0.001, snapshot_times=[0.0005])
    assert snaps[0.0005] == 1
    assert state.clock == 0.001


def test_self_ignition_renewal():
    rng = np.random.default_rng(12)
    inter, first = [], []
    for _ in range(3000):
        a0 = 2 * math.atanh(rng.random())
        pts = ff._ignition_points(rng, a0, 25.0)
        fires = ff.self_ignition_times(pts)
        if len(fires) >= 3:
            first.append(fires[0])
            inter.extend((fires[1] - fires[0], fires[2] - fires[1]))
    assert st.ks_test(inter, lambda v: math.tanh(v / 2) ** 2).passed
    assert st.ks_test(first, lambda v: math.tanh(v / 2)).passed


def test_root_cluster_size_pmf_truncation_exact_cells():
    # P(truncated root cluster size = k) = w_k exactly for k <= h
    h = 2
    n = 4000
    sizes = np.empty(n, dtype=np.int64)
    for i in range(n):
        state = ff.ffh_init(h, 50_000 + i, 2.0)
        _, _, snaps = ff.ffh_run(state, 2.0, snapshot_times=[1.0])
        sizes[i] = snaps[1.0]
    w = cf.w_float_array(h)
    probs = [w[k] for k in range(1, h + 1)]
    probs.append(1 - sum(probs))
    obs = [int((sizes == k).sum()) for k in range(1, h + 1)]
    obs.append(int((sizes > h).sum()))
    rep = st.chi_square_test(obs, probs)
    assert rep.passed, (rep.statistic, rep.p_value)


def test_root_interburn_times():
    # the renewal increment after the first burn has the singleton
    # explosion law; the horizon censors it, so keep replicas whose first
    # burn lands early and condition the target cdf on the uncensored
    # window (the increment is independent of the first burn time)
    n = 4000
    horizon, t1 = 6.0, 2.0
    window = horizon - t1
    inter = []
    for i in range(n):
        state = ff.ffh_init(1, 90_000 + i, horizon)
        _, burns, _ = ff.ffh_run(state, horizon)
        if burns and burns[0] <= t1 and len(burns) >= 2:
            delta = burns[1] - burns[0]
            if delta <= window:
                inter.append(delta)
    norm = math.tanh(window / 2) ** 2
    rep = st.ks_test(inter, lambda v: math.tanh(v / 2) ** 2 / norm)
    assert rep.passed, rep.statistic


def test_coupled_restriction():
    # restricting an h=2 run to height 1 matches a direct h=1 run
    n = 3000
    horizon = 3.0
    t_check = 1.0

    def run(h, seed_base):
        sizes = np.empty(n, dtype=np.int64)
        first_burn = []
        for i in range(n):
            state = ff.ffh_init(h, seed_base + i, horizon)
            _, burns, _ = ff.ffh_run(state, horizon, snapshot_times=[t_check])
            # height-(h-1)-measurable statistics: truncate the cluster
            comp = [k for k in ff.root_cluster(state)]
            state.clock = t_check
            comp = [k for k in ff.root_cluster(state) if len(k) <= 1]
            sizes[i] = len(comp)
            if burns:
                first_burn.append(burns[0])
        return sizes, first_burn

    # direct h=1 snapshot sizes vs h=2 sizes truncated to height 1: the
    # snapshot during the run is used for h=1; replay for h=2
    sizes2 = np.empty(n, dtype=np.int64)
    burns2 = []
    for i in range(n):
        state = ff.ffh_init(2, 10_000 + i, horizon)
        fires, burns, _ = ff.ffh_run(state, t_check)
        sizes2[i] = len([k for k in ff.root_cluster(state) if len(k) <= 1])
        state2 = ff.ffh_init(2, 10_000 + i, horizon)
        _, burns_full, _ = ff.ffh_run(state2, horizon)
        if burns_full:
            burns2.append(burns_full[0])
    sizes1 = np.empty(n, dtype=np.int64)
    burns1 = []
    for i in range(n):
        state = ff.ffh_init(1, 700_000 + i, horizon)
        _, burns, snaps = ff.ffh_run(state, horizon, snapshot_times=[t_check])
        sizes1[i] = snaps[t_check]
        if burns:
            burns1.append(burns[0])
    kcap = 6
    ca = [int((sizes2 == k).sum()) for k in range(1, kcap)] + [int((sizes2 >= kcap).sum())]
    cb = [int((sizes1 == k).sum()) for k in range(1, kcap)] + [int((sizes1 >= kcap).sum())]
    assert st.chi_square_two_sample(ca, cb).passed
    assert st.ks_two_sample(burns2, burns1).passed


def test_projection_poisson_field_and_theta_law():
    astar = 1.0
    horizon = 3.0
    reps = 1200
    ptsets = []
    for i in range(reps):
        state = ff.ffh_init(1, 300_000 + i, horizon, root_age=astar)
        ptsets.append(ff.ffh_project(state)[()])
    from scipy.integrate import quad

    rects = [(0, 1, 0, 1), (1, 2, 0, 1), (0, 1, 1, 2), (1, 2, 1, 2),
             (2, 3, 0, 1.5), (2, 3, 1.5, 4)]

    def mean_rect(t0, t1, y0, y1):
        f = lambda t: (math.tanh(min(y1, astar + t) / 2)
                       - math.tanh(min(y0, astar + t) / 2)
                       if astar + t > y0 else 0.0)
        return quad(f, t0, t1, limit=200)[0]

    means = np.array([mean_rect(*r) for r in rects])
    counts = np.zeros((reps, len(rects)))
    for i, pts in enumerate(ptsets):
        for (t, y) in pts:
            for j, (t0, t1, y0, y1) in enumerate(rects):
                if t0 <= t < t1 and y0 <= y < y1:
                    counts[i, j] += 1
    rep = st.poisson_field_test(counts, means)
    assert rep.passed, (rep.statistic, rep.p_value, rep.metadata)
    # future edges: Theta - alpha has the stationary residual law tanh(x/2)
    vals = []
    for i in range(800):
        state = ff.ffh_init(1, 400_000 + i, 25.0, root_age=astar)
        node = state.nodes[()]
        for nidx, alpha in node.future_children.items():
            if alpha > 3.0:
                continue
            leaf = state.nodes[(nidx,)]
            fires = ff.self_ignition_times(leaf.ignitions)
            theta = next((f for f in fires if f >= alpha), None)
            if theta is not None:
                vals.append(theta - alpha)
    assert st.ks_test(vals, lambda v: math.tanh(v / 2)).passed


def test_projection_requires_initial_state():
    state = ff.ffh_init(1, 1, 2.0)
    ff.ffh_run(state, 1.0)
    with pytest.raises(ValueError):
        ff.ffh_project(state)
    with pytest.raises(ValueError):
        ff.ffh_project(ff.ffh_init(0, 1, 1.0))


def test_serialization(tmp_path):
    state = ff.ffh_init(1, 5, 2.0)
    fires, _, _ = ff.ffh_run(state, 2.0)
    path = tmp_path / "fires.csv"
    ff.fire_log_csv(fires, path)
    assert path.read_text().startswith("t,igniting_leaf,component_size")
    js = ff.state_snapshot_json(state)
    import json

    obj = json.loads(js)
    assert obj["height"] == 1 and obj["clock"] == 2.0
