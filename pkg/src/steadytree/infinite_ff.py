"""Height-truncated infinite forest fire simulator.

The state lives on the height-h truncation of an infinite rooted plane
tree.  At time 0, live components are independent copies of the
stationary age-typed branching tree, glued inductively from the root
upward (live children carry negative indices in edge-age order); future
edges per vertex form a unit-rate Poisson arrival stream (non-negative
indices), and each height-h leaf carries a planar Poisson ignition
process with intensity 1(y < t + a0(v)) (1/2) sech^2(y/2) dt dy.

The evolution is deterministic given the initial data: ages grow at unit
rate, future edges go live at their arrival times, and an ignition point
reaching the time axis burns the whole live component of its leaf
(edges deleted, ages reset, sub-diagonal ignition points of burned
leaves pruned).  Everything is materialized lazily up to a time horizon
with per-vertex substreams keyed by the vertex string, so extending a
state is stable.
"""

from __future__ import annotations

import heapq
import json
import math
from dataclasses import dataclass, field

import numpy as np

from .samplers import sample_mgw

__all__ = ["FfhState", "ffh_init", "ffh_run", "ffh_project",
           "self_ignition_times", "root_cluster"]


@dataclass
class FfhNode:
    """One vertex of the truncated forest fire state."""

    key: tuple
    arrival: float  # parent-edge arrival time; -age for initially live
    last_burn: float  # time of last burn; -initial age at t=0
    live_children: set = field(default_factory=set)
    future_children: dict = field(default_factory=dict)  # index -> arrival
    parent_live: bool = False
    ignitions: list = field(default_factory=list)  # height-h leaves only


@dataclass
class FfhState:
    height: int
    horizon: float
    seed: int
    nodes: dict
    clock: float = 0.0

    def age(self, key: tuple, t: float | None = None) -> float:
        t = self.clock if t is None else t
        return t - self.nodes[key].last_burn


def _substream(seed: int, key: tuple, tag: int) -> np.random.Generator:
    zig = [n * 2 if n >= 0 else -2 * n - 1 for n in key]
    return np.random.default_rng((seed, tag, len(key), *zig))


def _ignition_points(rng, a0: float, horizon: float) -> list:
    """PRM with intensity 1(y < t + a0) (1/2) sech^2(y/2) on (0,horizon] x R+.

    Thinning from the unit-rate envelope: the y-marginal mass at time t is
    tanh((t + a0)/2) <= 1.
    """
    pts = []
    t = 0.0
    while True:
        t += rng.exponential(1.0)
        if t > horizon:
            return pts
        cap = math.tanh((t + a0) / 2.0)
        if rng.random() < cap:
            y = 2.0 * math.atanh(rng.random() * cap)
            pts.append((t, y))


def ffh_init(h: int, seed: int, horizon: float,
             root_age: float | None = None,
             subtree_size_cap: int = 10**6) -> FfhState:
    """Initial state at time 0.

    Unoccupied vertices up to height h are seeded with independent
    stationary branching trees (truncated at the remaining height), glued
    by mapping children in increasing edge-age order to indices -1, -2,
    ...; all materialization uses substreams keyed by the vertex string.
    ``root_age`` conditions the root component's root age (used by the
    projection tests).
    """
    if h < 0 or horizon <= 0:
        raise ValueError("need h >= 0 and a positive horizon")
    nodes: dict[tuple, FfhNode] = {}

    def seed_component(base_key: tuple, base_arrival: float) -> list:
        """Glue one branching-tree sample rooted at base_key; returns the
        keys created."""
        rng = _substream(seed, base_key, 1)
        aged = sample_mgw(
            rng,
            root_age=root_age if base_key == () else None,
            size_cap=subtree_size_cap,
            max_depth=h - len(base_key),
        )
        tree = aged.tree
        ch = tree.children()
        key_of = {tree.root: base_key}
        order = [tree.root]
        stack = [tree.root]
        while stack:
            v = stack.pop()
            kids = sorted(ch[v], key=lambda c: aged.edge_age[c])
            for i, c in enumerate(kids):
                key_of[c] = key_of[v] + (-(i + 1),)
                order.append(c)
                stack.append(c)
        for v in order:
            key = key_of[v]
            node = FfhNode(key=key, arrival=base_arrival,
                           last_burn=-float(aged.vertex_age[v]))
            if v != tree.root:
                node.arrival = -float(aged.edge_age[v])
                node.parent_live = True
                nodes[key[:-1]].live_children.add(key[-1])
            nodes[key] = node
        return [key_of[v] for v in order]

    # seed the root component, then give every materialized vertex below
    # height h its future arrivals; each future child seeds a fresh
    # component, recursively, until the horizon exhausts the frontier
    work = seed_component((), -math.inf)
    while work:
        key = work.pop()
        if len(key) >= h:
            continue
        rng = _substream(seed, key, 2)
        t = 0.0
        idx = 0
        while True:
            t += rng.exponential(1.0)
            if t > horizon:
                break
            nodes[key].future_children[idx] = t
            child_key = key + (idx,)
            if child_key not in nodes:
                work.extend(seed_component(child_key, t))
            idx += 1
    # ignition processes for height-h leaves
    for key, node in nodes.items():
        if len(key) == h:
            rng = _substream(seed, key, 3)
            node.ignitions = _ignition_points(rng, -node.last_burn, horizon)
    return FfhState(height=h, horizon=horizon, seed=seed, nodes=nodes)


def _live_component(state: FfhState, key: tuple) -> list:
    seen = {key}
    stack = [key]
    out = [key]
    while stack:
        k = stack.pop()
        node = state.nodes[k]
        nbrs = [k + (n,) for n in node.live_children]
        if node.parent_live and len(k) > 0:
            nbrs.append(k[:-1])
        for nk in nbrs:
            if nk not in seen:
                seen.add(nk)
                stack.append(nk)
                out.append(nk)
    return out


def root_cluster(state: FfhState) -> list:
    """Keys of the live cluster of the root at the current clock."""
    return _live_component(state, ())


def ffh_run(state: FfhState, horizon: float | None = None,
            snapshot_times=None):
    """Advance the deterministic evolution to the horizon.

    Returns (fires, root_burns, snapshots): fires is a list of
    (time, igniting leaf, component size); snapshots maps requested times
    to the root-cluster size then.
    """
    horizon = state.horizon if horizon is None else horizon
    if horizon > state.horizon:
        raise ValueError("cannot run beyond the materialization horizon")
    snapshot_times = sorted(snapshot_times or [])
    events = []
    for key, node in state.nodes.items():
        for n, t in node.future_children.items():
            child = key + (n,)
            if child in state.nodes:
                heapq.heappush(events, (t, 1, ("arrive", key, n)))
        if len(key) == state.height:
            for (t, y) in node.ignitions:
                heapq.heappush(events, (t, 0, ("ignite", key, t, y)))
    fires = []
    root_burns = []
    snapshots = {}
    snap_i = 0
    while events:
        t, _, ev = heapq.heappop(events)
        if t > horizon:
            break
        while snap_i < len(snapshot_times) and snapshot_times[snap_i] < t:
            state.clock = snapshot_times[snap_i]
            snapshots[snapshot_times[snap_i]] = len(root_cluster(state))
            snap_i += 1
        state.clock = t
        if ev[0] == "arrive":
            _, key, n = ev
            node = state.nodes[key]
            if n in node.future_children:
                del node.future_children[n]
                node.live_children.add(n)
                state.nodes[key + (n,)].parent_live = True
        else:
            _, key, t_pt, y = ev
            node = state.nodes[key]
            if (t_pt, y) not in node.ignitions:
                continue  # point was pruned by an earlier fire
            comp = _live_component(state, key)
            fires.append((t, key, len(comp)))
            if () in comp:
                root_burns.append(t)
            for k in comp:
                nk = state.nodes[k]
                nk.last_burn = t
                for n in nk.live_children:
                    state.nodes[k + (n,)].parent_live = False
                nk.live_children.clear()
                nk.parent_live = False
                if len(k) == state.height:
                    nk.ignitions = [
                        (ta, yy) for (ta, yy) in nk.ignitions if yy < ta - t
                    ]
    while snap_i < len(snapshot_times) and snapshot_times[snap_i] <= horizon:
        state.clock = snapshot_times[snap_i]
        snapshots[snapshot_times[snap_i]] = len(root_cluster(state))
        snap_i += 1
    state.clock = horizon
    return fires, root_burns, snapshots


def self_ignition_times(points: list) -> list:
    """Fire times of an isolated leaf given its ignition point set.

    The earliest remaining point fires; every later point whose y
    coordinate is at least its own remaining wait at the fire time is
    pruned (the leaf's age restarts), and so on.
    """
    pts = sorted(points)
    fires = []
    i = 0
    while i < len(pts):
        t_fire = pts[i][0]
        fires.append(t_fire)
        pts = [p for p in pts[i + 1:] if p[1] < p[0] - t_fire]
        i = 0
    return fires


def ffh_project(state: FfhState):
    """Project the initial state one level down.

    For every vertex v at height h-1 and child edge e = (v, v.n), the
    a-priori burning time Theta(e) is the first self-ignition of the leaf
    v.n at or after the edge's arrival; the projected point process for v
    is {(Theta(e), Theta(e) - alpha(e))}, statistically a PRM with
    intensity 1(y < a0(v) + t) (1/2) sech^2(y/2).
    """
    if state.height < 1:
        raise ValueError("projection needs height >= 1")
    if state.clock != 0.0:
        raise ValueError("projection is defined on the initial state")
    out = {}
    for key, node in state.nodes.items():
        if len(key) != state.height - 1:
            continue
        pts = []
        edges = [(n, state.nodes[key + (n,)].arrival) for n in node.live_children]
        edges += list(node.future_children.items())
        for n, alpha in edges:
            leaf = state.nodes[key + (n,)]
            fires = self_ignition_times(leaf.ignitions)
            theta = next((f for f in fires if f >= max(alpha, 0.0)), None)
            if theta is not None:
                pts.append((theta, theta - alpha))
        out[key] = sorted(pts)
    return out


def fire_log_csv(fires, path) -> None:
    import csv

    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(["t", "igniting_leaf", "component_size"])
        for t, key, size in fires:
            wr.writerow([repr(float(t)), ".".join(map(str, key)), size])


def state_snapshot_json(state: FfhState) -> str:
    nodes = {
        ".".join(map(str, k)): {
            "age": state.age(k),
            "arrival": n.arrival,
            "live_children": sorted(n.live_children),
            "future_children": {str(i): t for i, t in n.future_children.items()},
        }
        for k, n in state.nodes.items()
    }
    return json.dumps({"height": state.height, "clock": state.clock,
                       "horizon": state.horizon, "nodes": nodes})
