"""Discrete-event simulator of the mean field forest fire model.

n vertices; each absent edge appears at rate 1/n (implemented as a global
proposal clock of rate C(n,2)/n with uniform pairs and thinning of
already-present pairs); lightning strikes each vertex at rate lam and
instantaneously burns its whole component (edges removed, vertex ages
reset).  Components are maintained as membership lists with
smaller-into-larger merging, since burns destroy union-find structure;
burning is linear in the component's edge count.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

__all__ = ["MfState", "MfEvent", "mf_run", "empirical_size_distribution",
           "tagged_trace", "sup_deviation_from_w"]


@dataclass
class MfState:
    """Mean field forest fire state.

    ``last_burn[v]`` is the time vertex v last burned (0 initially), so
    its age at the current clock is ``clock - last_burn[v]``.
    """

    n: int
    lam: float
    adj: list = None
    comp_id: np.ndarray = None
    members: dict = None
    last_burn: np.ndarray = None
    clock: float = 0.0
    edge_count: int = 0

    def __post_init__(self):
        if self.adj is None:
            self.adj = [set() for _ in range(self.n)]
            self.comp_id = np.arange(self.n, dtype=np.int64)
            self.members = {i: [i] for i in range(self.n)}
            self.last_burn = np.zeros(self.n)

    def ages(self) -> np.ndarray:
        return self.clock - self.last_burn

    def component_sizes(self) -> np.ndarray:
        return np.array([len(m) for m in self.members.values()], dtype=np.int64)

    def check_consistency(self) -> bool:
        """Debug invariant: membership lists partition the vertices and
        match the components induced by the adjacency."""
        seen_all = sorted(v for m in self.members.values() for v in m)
        if seen_all != list(range(self.n)):
            return False
        for cid, m in self.members.items():
            if any(self.comp_id[v] != cid for v in m):
                return False
        seen = np.full(self.n, -1, dtype=np.int64)
        for v in range(self.n):
            if seen[v] >= 0:
                continue
            stack, group = [v], [v]
            seen[v] = v
            while stack:
                u = stack.pop()
                for w in self.adj[u]:
                    if seen[w] < 0:
                        seen[w] = v
                        stack.append(w)
                        group.append(w)
            cids = {int(self.comp_id[u]) for u in group}
            if len(cids) != 1 or len(group) != len(self.members[cids.pop()]):
                return False
        return True


@dataclass
class MfEvent:
    time: float
    kind: str  # 'edge' or 'burn'
    vertices: tuple
    component_size: int = 0


def mf_run(n: int, lam: float, horizon: float, rng,
           init: MfState | None = None,
           snapshot_times=None,
           keep_events: bool = True,
           tagged: int | None = None,
           burning: bool = True,
           debug_checks: bool = False):
    """Run the model to the horizon.

    Returns (state, events, snapshots); snapshots maps each requested
    time to the empirical size distribution there.  ``tagged`` restricts
    event recording to that vertex's component.  With ``burning`` off the
    edge process is the plain dynamical random graph (used by the
    thinning check).
    """
    if n < 1 or lam < 0 or horizon < 0:
        raise ValueError("need n >= 1, lam >= 0, horizon >= 0")
    state = init if init is not None else MfState(n, lam)
    snapshot_times = sorted(snapshot_times or [])
    snapshots = {}
    events = []
    edge_rate = (n - 1) / 2.0
    strike_rate = lam * n
    total = edge_rate + strike_rate
    t = state.clock
    snap_i = 0
    while True:
        t_next = t + (rng.exponential(1.0 / total) if total > 0 else float("inf"))
        while snap_i < len(snapshot_times) and snapshot_times[snap_i] <= min(
            t_next, horizon
        ):
            snapshots[snapshot_times[snap_i]] = empirical_size_distribution(state)
            snap_i += 1
        if t_next > horizon:
            t = horizon
            break
        t = t_next
        if rng.random() * total < edge_rate:
            a = int(rng.integers(0, n))
            b = int(rng.integers(0, n - 1))
            if b >= a:
                b += 1
            if b in state.adj[a]:
                continue  # thinning: the pair is already present
            state.adj[a].add(b)
            state.adj[b].add(a)
            state.edge_count += 1
            ca, cb = int(state.comp_id[a]), int(state.comp_id[b])
            if ca != cb:
                if len(state.members[ca]) < len(state.members[cb]):
                    ca, cb = cb, ca
                for v in state.members[cb]:
                    state.comp_id[v] = ca
                state.members[ca].extend(state.members[cb])
                del state.members[cb]
            if keep_events and (tagged is None
                                or state.comp_id[tagged] == ca):
                events.append(MfEvent(t, "edge", (a, b),
                                      len(state.members[ca])))
        else:
            v = int(rng.integers(0, n))
            if not burning:
                continue
            cid = int(state.comp_id[v])
            group = state.members[cid]
            size = len(group)
            deg_sum = 0
            for u in group:
                deg_sum += len(state.adj[u])
                state.adj[u].clear()
            state.edge_count -= deg_sum // 2
            for u in group:
                state.comp_id[u] = u
                state.members[u] = [u]
                state.last_burn[u] = t
            if keep_events and (tagged is None or tagged in group):
                events.append(MfEvent(t, "burn", (v,), size))
        if debug_checks and not state.check_consistency():
            raise AssertionError("component bookkeeping diverged")
    state.clock = t
    return state, events, snapshots


def empirical_size_distribution(state: MfState) -> dict:
    """k -> fraction of vertices living in size-k components."""
    out = {}
    for m in state.members.values():
        k = len(m)
        out[k] = out.get(k, 0) + k
    return {k: c / state.n for k, c in sorted(out.items())}


def sup_deviation_from_w(vk: dict, kmax: int = 10**6) -> float:
    """sup over k of |v_k - w_k| for an empirical size distribution."""
    from .closed_forms import cluster_size_pmf_float

    sup = 0.0
    ks = set(vk) | set(range(1, 65))
    for k in ks:
        if k > kmax:
            continue
        sup = max(sup, abs(vk.get(k, 0.0) - cluster_size_pmf_float(k)))
    return sup


def tagged_trace(events, tagged: int, horizon: float):
    """Component-size trace of a tagged vertex: burn times as explosions.

    Consumes events recorded by ``mf_run(tagged=...)``; returns the
    growth-module EventTrace so the same test machinery applies.
    """
    from .growth import EXPLOSION, JUMP, EventTrace

    times, kinds, jumps, sizes = [], [], [], []
    current = 1
    for ev in events:
        if ev.kind == "burn":
            times.append(ev.time)
            kinds.append(EXPLOSION)
            jumps.append(0)
            sizes.append(1)
            current = 1
        else:
            gain = ev.component_size - current
            if gain <= 0:
                continue
            times.append(ev.time)
            kinds.append(JUMP)
            jumps.append(gain)
            sizes.append(ev.component_size)
            current = ev.component_size
    theta = [t for t, k in zip(times, kinds) if k == EXPLOSION]
    return EventTrace(
        np.array(times), np.array(kinds, dtype=np.int8),
        np.array(jumps, dtype=np.int64), np.array(sizes, dtype=np.int64),
        window=(0.0, horizon), theta_marks=np.array(theta),
    )


def run_manifest(n, lam, horizon, seed) -> str:
    from . import __version__

    return json.dumps({"n": n, "lambda": lam, "horizon": horizon,
                       "seed": seed, "build": "steadytree-" + __version__})
