"""Trajectory simulators for the cluster growth process.

The free process holds Exp(mean 1/k) at size k and jumps by w-distributed
increments; it explodes (infinitely many jumps) in finite time.
Simulators run the jump ladder up to a size threshold and then draw the
residual explosion time from its exact conditional law
1 - sech^{2k}(x/2), so sampled explosion times are exact in law.

Conditioning on the next explosion time uses the time-inhomogeneous jump
rates k w_j q^j (survive past t) and (k+j) w_j q^j (explode at t), with
q = sech^2((t-s)/2); event times come from closed-form cumulative
hazards.  The structural version of the conditioned process attaches
independent shifted subtrees at uniform vertices and spinal subtrees at
the spine top, which reproduces those size rates exactly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import samplers as sm
from .closed_forms import w_tail
from .trees import AgedTree, RootedTree, join_parents
from .wlaw import (
    draw_w,
    residual_explosion_time,
    sample_sizebiased_tilted_w,
    sample_tilted_w,
)

__all__ = [
    "EventTrace",
    "TimeChange",
    "run_growth",
    "run_stationary",
    "run_conditioned",
    "structural_conditioned_run",
    "stationary_structural_snapshot",
    "bulk_explosion_times",
    "bulk_stationary_theta1",
    "bulk_stationary_ages",
    "bulk_stationary_snapshot",
    "bulk_explosion_scaling",
    "jumps_to_exceed",
    "explosion_scaling_stats",
    "sample_size_biased_lifetime",
    "reverse_logging",
    "subordinator_coupling_diagnostic",
    "DoobSimulator",
]

JUMP = 0
EXPLOSION = 1

DEFAULT_EXPLOSION_THRESHOLD = 10**4


@dataclass
class EventTrace:
    """Time-ordered growth events.

    ``kinds`` uses 0 for jumps and 1 for explosions; ``sizes_after`` is
    the size right after each event (1 after an explosion).
    """

    times: np.ndarray
    kinds: np.ndarray
    jump_sizes: np.ndarray
    sizes_after: np.ndarray
    window: tuple[float, float]
    init_size: int = 1
    theta_marks: np.ndarray = field(default_factory=lambda: np.array([]))
    aborted: str | None = None
    snapshots: list = field(default_factory=list)

    def explosion_time(self) -> float:
        if len(self.theta_marks) == 0:
            raise ValueError("trace has no explosion mark")
        return float(self.theta_marks[0])

    def size_at(self, t: float) -> int:
        """Size at time t (right-continuous)."""
        if not self.window[0] <= t <= self.window[1]:
            raise ValueError("time outside trace window")
        idx = int(np.searchsorted(self.times, t, side="right")) - 1
        if idx < 0:
            return self.init_size
        return int(self.sizes_after[idx])

    def to_csv(self, path) -> None:
        import csv

        with open(path, "w", newline="") as fh:
            wr = csv.writer(fh)
            wr.writerow(["time", "kind", "jump_size", "size_after"])
            for t, k, j, s in zip(self.times, self.kinds, self.jump_sizes,
                                  self.sizes_after):
                wr.writerow([repr(float(t)), "jump" if k == JUMP else "explosion",
                             int(j), int(s)])


@dataclass
class TimeChange:
    """Piecewise-linear sqrt(size) clock tau(t) with the log-size path."""

    t_knots: np.ndarray
    tau_knots: np.ndarray
    log_sizes: np.ndarray

    def tau_of_t(self, t: float) -> float:
        i = int(np.searchsorted(self.t_knots, t, side="right")) - 1
        i = max(0, min(i, len(self.t_knots) - 2))
        slope = (self.tau_knots[i + 1] - self.tau_knots[i]) / (
            self.t_knots[i + 1] - self.t_knots[i]
        )
        return float(self.tau_knots[i] + slope * (t - self.t_knots[i]))


def _logcosh(x: float) -> float:
    ax = abs(x)
    return ax + math.log1p(math.exp(-2.0 * ax)) - math.log(2.0)


# ---------------------------------------------------------------------------
# free growth
# ---------------------------------------------------------------------------


def run_growth(rng, init_size: int = 1, stop: str = "explosion",
               horizon: float | None = None,
               size_cap: int = sm.DEFAULT_SIZE_CAP,
               explosion_threshold: int = DEFAULT_EXPLOSION_THRESHOLD,
               structural: bool = False,
               snapshot_times=None) -> EventTrace:
    """One trajectory of the free growth process started from
    ``init_size``.

    stop = 'explosion': run the jump ladder to ``explosion_threshold``
    and finish with an exact residual draw; 'horizon': run to a fixed
    time; 'size': run until the size cap is hit (recorded as an abort).
    Structural mode maintains the rooted tree by joining environment
    clusters at uniform vertices; snapshots record it at the requested
    times.
    """
    if init_size < 1:
        raise ValueError("initial size must be positive")
    if stop not in ("explosion", "horizon", "size"):
        raise ValueError("unknown stop rule %r" % (stop,))
    if stop == "horizon" and horizon is None:
        raise ValueError("horizon stop needs a horizon")
    snapshot_times = sorted(snapshot_times or [])
    times, kinds, jumps, sizes = [], [], [], []
    snapshots = []
    aborted = None
    tree = None
    if structural:
        tree = (
            RootedTree.singleton()
            if init_size == 1
            else sm.sample_cluster_given_size(init_size, rng).tree
        )
    k = init_size
    t = 0.0
    snap_i = 0
    threshold = explosion_threshold if stop == "explosion" else size_cap
    while True:
        t_next = t + rng.exponential(1.0 / k)
        while snap_i < len(snapshot_times) and snapshot_times[snap_i] < t_next:
            if structural:
                snapshots.append((snapshot_times[snap_i], tree))
            snap_i += 1
        if stop == "horizon" and t_next > horizon:
            t = horizon
            break
        t = t_next
        if structural:
            arriving = sm.sample_rde(rng, size_cap=size_cap)
            j = len(arriving)
            attach = int(rng.integers(0, k))
            joined, root = join_parents(tree.parent, tree.root, attach,
                                        arriving.parent, arriving.root)
            tree = RootedTree(joined, root)
        else:
            j = int(draw_w(rng))
        k += j
        times.append(t)
        kinds.append(JUMP)
        jumps.append(j)
        sizes.append(k)
        if k > size_cap:
            aborted = "size_cap"
            break
        if stop == "size" and k >= size_cap:
            break
        if stop == "explosion" and k >= threshold:
            break
    theta = np.array([])
    if stop == "explosion" and aborted is None:
        t_exp = t + float(residual_explosion_time(k, rng))
        times.append(t_exp)
        kinds.append(EXPLOSION)
        jumps.append(0)
        sizes.append(1)
        theta = np.array([t_exp])
        t = t_exp
    return EventTrace(
        np.array(times), np.array(kinds, dtype=np.int8),
        np.array(jumps, dtype=np.int64), np.array(sizes, dtype=np.int64),
        window=(0.0, t), init_size=init_size, theta_marks=theta,
        aborted=aborted, snapshots=snapshots,
    )


def bulk_explosion_times(n: int, rng, init_size: int = 1,
                         threshold: int = DEFAULT_EXPLOSION_THRESHOLD) -> np.ndarray:
    """n independent explosion times (vectorized jump ladders plus exact
    residual completion)."""
    sizes = np.full(n, init_size, dtype=np.int64)
    t = np.zeros(n)
    active = np.arange(n)
    while len(active):
        s = sizes[active]
        t[active] += rng.exponential(1.0, size=len(active)) / s
        sizes[active] = s + draw_w(rng, len(active))
        active = active[sizes[active] < threshold]
    return t + residual_explosion_time(sizes, rng)


def jumps_to_exceed(n_target: int, rng, replicas: int) -> np.ndarray:
    """Number of jumps for the size to strictly exceed ``n_target``
    (the first jump already exceeds 1, so the count for target 1 is 1)."""
    if n_target < 1:
        raise ValueError("target must be positive")
    sizes = np.ones(replicas, dtype=np.int64)
    count = np.zeros(replicas, dtype=np.int64)
    active = np.arange(replicas)
    while len(active):
        sizes[active] += draw_w(rng, len(active))
        count[active] += 1
        active = active[sizes[active] <= n_target]
    return count


# ---------------------------------------------------------------------------
# stationarization
# ---------------------------------------------------------------------------

_SB_GRID = None


def _size_biased_tables():
    global _SB_GRID
    if _SB_GRID is None:
        x = np.linspace(0.0, 60.0, 6001)
        g = np.tanh(x / 2.0) - 0.5 * x / np.cosh(x / 2.0) ** 2
        _SB_GRID = (g, x)
    return _SB_GRID


def sample_size_biased_lifetime(rng, size=None):
    """Cycle length size-biased in the explosion time: density
    x tanh(x/2) sech^2(x/2) / 4, by table inversion refined with Newton."""
    g, x = _size_biased_tables()
    u = rng.random(size)
    out = np.interp(u, g, x)
    for _ in range(40):
        gv = np.tanh(out / 2.0) - 0.5 * out / np.cosh(out / 2.0) ** 2
        dv = 0.5 * out * np.tanh(out / 2.0) / np.cosh(out / 2.0) ** 2
        step = (gv - u) / np.maximum(dv, 1e-300)
        out = np.clip(out - step, 0.0, 60.0)
        if np.max(np.abs(step)) < 1e-12:
            break
    return out


def bulk_stationary_theta1(n: int, rng) -> np.ndarray:
    """theta_1 samples: (1 - U) times a size-biased cycle length."""
    s = sample_size_biased_lifetime(rng, n)
    return (1.0 - rng.random(n)) * s


def bulk_stationary_ages(n: int, rng) -> np.ndarray:
    """Root ages at a stationary time: U times a size-biased cycle."""
    s = sample_size_biased_lifetime(rng, n)
    return rng.random(n) * s


def bulk_stationary_snapshot(n: int, rng, count_cap: int = 40,
                             threshold: int = DEFAULT_EXPLOSION_THRESHOLD,
                             m_bound: float = 25.0,
                             batch: int = 100_000) -> dict:
    """Joint stationary snapshot (size, jump count, age, theta_1) at a
    uniform time of the length-biased cycle, by exact rejection.

    A candidate cycle is accepted with probability t_inf / m_bound
    (P(t_inf > m_bound) ~ 5e-11 is neglected); the observation point is
    uniform on the accepted cycle.  Jump counts above ``count_cap`` and
    landing points beyond the simulated ladder are reported as -1
    (tail); sizes there exceed the threshold anyway.
    """
    out_sizes, out_counts, out_ages, out_theta = [], [], [], []
    got = 0
    while got < n:
        # acceptance rate is E(t_inf)/m_bound
        b = min(batch, int((n - got) * m_bound / 2.0 * 1.15) + 1000)
        holds = np.empty((b, count_cap + 1))
        ladder = np.empty((b, count_cap + 1), dtype=np.int64)
        sizes = np.ones(b, dtype=np.int64)
        t = np.zeros(b)
        for i in range(count_cap + 1):
            holds[:, i] = t + rng.exponential(1.0, size=b) / sizes
            t = holds[:, i]
            sizes = sizes + draw_w(rng, b)
            ladder[:, i] = sizes
        # holds[:, i] = time of jump i+1; ladder[:, i] = size after it
        active = np.flatnonzero(sizes < threshold)
        while len(active):
            s = sizes[active]
            t[active] += rng.exponential(1.0, size=len(active)) / s
            sizes[active] = s + draw_w(rng, len(active))
            active = active[sizes[active] < threshold]
        t_inf = t + residual_explosion_time(sizes, rng)
        accept = rng.random(b) < np.minimum(t_inf / m_bound, 1.0)
        t_inf = t_inf[accept]
        jt = holds[accept]
        lad = ladder[accept]
        v = rng.random(len(t_inf)) * t_inf
        idx = np.array([np.searchsorted(jt[i], v[i], side="right")
                        for i in range(len(v))])
        resolved = idx <= count_cap
        n0 = np.where(resolved, idx, -1)
        sz = np.where(
            resolved,
            np.where(idx > 0, lad[np.arange(len(v)), np.minimum(idx, count_cap) - 1], 1),
            -1,
        )
        out_sizes.append(sz)
        out_counts.append(n0)
        out_ages.append(v)
        out_theta.append(t_inf - v)
        got += len(t_inf)
    return {
        "size": np.concatenate(out_sizes)[:n],
        "jumps": np.concatenate(out_counts)[:n],
        "age": np.concatenate(out_ages)[:n],
        "theta1": np.concatenate(out_theta)[:n],
    }


# ---------------------------------------------------------------------------
# Doob-conditioned size dynamics
# ---------------------------------------------------------------------------


class DoobSimulator:
    """Size process conditioned on the next explosion time.

    mode 'survive_past_t': rates k w_j q^j; mode 'explode_at_t':
    (k+j) w_j q^j, with q = sech^2((t-s)/2).  Event times invert the
    closed-form cumulative hazards
    k[(s2-s1) - 2 log(cosh((t-s1)/2)/cosh((t-s2)/2))]  and, in the
    explode mode, + log(tanh((t-s1)/2)/tanh((t-s2)/2)).
    """

    def __init__(self, t: float, mode: str):
        if mode not in ("survive_past_t", "explode_at_t"):
            raise ValueError("unknown mode %r" % (mode,))
        self.t = t
        self.explode = mode == "explode_at_t"

    def _hazard(self, k: int, s1: float, s2: float) -> float:
        t = self.t
        surv = k * ((s2 - s1) - 2.0 * (_logcosh((t - s1) / 2.0)
                                       - _logcosh((t - s2) / 2.0)))
        if not self.explode:
            return surv
        return surv + (math.log(math.tanh((t - s1) / 2.0))
                       - math.log(math.tanh((t - s2) / 2.0)))

    def _rate(self, k: int, s: float) -> float:
        tau = self.t - s
        r = k * (1.0 - math.tanh(tau / 2.0))
        if self.explode:
            r += 1.0 / math.sinh(tau)
        return r

    def next_jump_time(self, k: int, s: float, rng) -> float | None:
        """Time of the next jump after s, or None if the survive-mode
        process makes no further jump before t."""
        target = rng.exponential(1.0)
        t = self.t
        if not self.explode and self._hazard(k, s, t) <= target:
            return None
        lo, hi = s, t
        # expand an upper bracket strictly below t for the explode mode
        if self.explode:
            hi = s + 0.9 * (t - s)
            while self._hazard(k, s, hi) < target:
                hi = hi + 0.9 * (t - hi)
                if t - hi < 1e-15:
                    return t - 1e-15
        y = 0.5 * (lo + hi)
        for _ in range(200):
            g = self._hazard(k, s, y) - target
            if abs(g) < 1e-13 * max(1.0, target):
                break
            if g > 0:
                hi = y
            else:
                lo = y
            dg = self._rate(k, y)
            ynew = y - g / dg
            y = ynew if lo < ynew < hi else 0.5 * (lo + hi)
        return y

    def jump_size(self, k: int, s: float, rng, jcap: int = 10**6) -> int:
        """Jump increment at time s (tilted w, or its size-biased part)."""
        tau = self.t - s
        q = 1.0 / math.cosh(tau / 2.0) ** 2
        if self.explode:
            w_part = k * (1.0 - math.sqrt(1.0 - q))
            sb_part = q / (2.0 * math.sqrt(1.0 - q))
            if rng.random() * (w_part + sb_part) < sb_part:
                return sample_sizebiased_tilted_w(rng, q, jcap)
        return sample_tilted_w(rng, q, jcap)


def run_conditioned(rng, kern, init_size: int | None = None,
                    stop_time: float | None = None,
                    size_cap: int = sm.DEFAULT_SIZE_CAP,
                    jump_cap: int | None = None) -> EventTrace:
    """Size trajectory on [0, stop_time] conditioned per the kernel.

    ``kern`` is a closed_forms.ConditionalKernel; the default stop time
    is kern.s (where the conditioned laws are usually interrogated).
    Stationary kernels start from the equilibrium size law conditioned to
    survive, non-stationary ones from a singleton.
    """
    from .closed_forms import conditioned_size_pmf_table

    t = kern.t
    stop_time = kern.s if stop_time is None else stop_time
    if not 0.0 <= stop_time < t:
        raise ValueError("stop time must lie in [0, t)")
    sim = DoobSimulator(t, kern.mode)
    if init_size is None:
        if kern.stationary:
            # size at 0- conditioned on the explosion behaviour at t
            kern0 = type(kern)(s=0.0, t=t, mode=kern.mode, stationary=True)
            pmf = conditioned_size_pmf_table(4096, kern0)
            u = rng.random()
            init_size = int(np.searchsorted(np.cumsum(pmf), u) )
            init_size = max(1, min(init_size, 4096))
        else:
            init_size = 1
    k = int(init_size)
    s = 0.0
    times, kinds, jumps, sizes = [], [], [], []
    aborted = None
    while True:
        s_next = sim.next_jump_time(k, s, rng)
        if s_next is None or s_next > stop_time:
            break
        j = sim.jump_size(k, s_next, rng)
        if j > 10**6 or k + j > size_cap:
            aborted = "size_cap"
            k = size_cap + 1
            s = s_next
            break
        k += j
        s = s_next
        times.append(s)
        kinds.append(JUMP)
        jumps.append(j)
        sizes.append(k)
        if jump_cap is not None and len(times) > jump_cap:
            aborted = "jump_cap"
            break
    return EventTrace(
        np.array(times), np.array(kinds, dtype=np.int8),
        np.array(jumps, dtype=np.int64), np.array(sizes, dtype=np.int64),
        window=(0.0, stop_time), init_size=init_size, aborted=aborted,
    )


# ---------------------------------------------------------------------------
# structural conditioned dynamics (spinal arrivals)
# ---------------------------------------------------------------------------


def structural_conditioned_run(rng, t: float, until: float,
                               size_cap: int = 10**5):
    """Structural cycle conditioned to explode at time t, observed at
    ``until`` < t, started as a singleton of age 0.

    Every vertex receives independent arrivals at rate 1 - tanh((t-s)/2),
    each attaching a fresh shifted subtree; the spine top additionally
    receives spinal subtrees at rate cosech(t-s).  Returns a SpinalTree
    observed at time ``until``.
    """
    if not 0.0 <= until < t:
        raise ValueError("observation time must lie in [0, t)")
    birth_time = [0.0]
    birth_age = [0.0]
    edge_birth_age = [math.nan]
    parent = [-1]
    spine = [0]
    s = 0.0
    k = 1
    truncated = False
    while True:
        # next non-spinal (rate k r1) or spinal (rate r2) arrival
        target = rng.exponential(1.0)
        lo, hi = s, until

        def hazard(s2):
            surv = k * ((s2 - s) - 2.0 * (_logcosh((t - s) / 2.0)
                                          - _logcosh((t - s2) / 2.0)))
            spin = math.log(math.tanh((t - s) / 2.0)) - math.log(
                math.tanh((t - s2) / 2.0))
            return surv + spin

        if hazard(until) < target:
            break
        y = 0.5 * (lo + hi)
        for _ in range(200):
            g = hazard(y) - target
            if abs(g) < 1e-12 * max(1.0, target):
                break
            if g > 0:
                hi = y
            else:
                lo = y
            rate = k * (1.0 - math.tanh((t - y) / 2.0)) + 1.0 / math.sinh(t - y)
            ynew = y - g / rate
            y = ynew if lo < ynew < hi else 0.5 * (lo + hi)
        s_event = y
        x = t - s_event
        rate_ns = k * (1.0 - math.tanh(x / 2.0))
        rate_sp = 1.0 / math.sinh(x)
        if rng.random() * (rate_ns + rate_sp) < rate_sp:
            sub = sm.sample_spinal(x, rng, size_cap=size_cap - k)
            attach = spine[-1]
            base = len(parent)
            _splice(parent, birth_age, birth_time, edge_birth_age,
                    sub.aged, attach, s_event)
            spine.extend(base + v for v in sub.spine)
            truncated = truncated or sub.truncation_flag
        else:
            sub = sm.sample_hx(x, rng, size_cap=size_cap - k)
            attach = int(rng.integers(0, k))
            _splice(parent, birth_age, birth_time, edge_birth_age,
                    sub, attach, s_event)
        k = len(parent)
        s = s_event
    ages = np.array([a + (until - bt) for a, bt in zip(birth_age, birth_time)])
    edge_age = np.array([ea + (until - bt) for ea, bt
                         in zip(edge_birth_age, birth_time)])
    aged = AgedTree(RootedTree(parent, 0), ages, edge_age)
    return sm.SpinalTree(aged, spine, truncated)


def _splice(parent, birth_age, birth_time, edge_birth_age, sub: AgedTree,
            attach: int, s_event: float):
    """Graft an aged subtree: its root joins ``attach`` by an age-0 edge;
    internal edges keep their subtree ages (they grow from the splice)."""
    base = len(parent)
    for v, p in enumerate(sub.tree.parent):
        parent.append(attach if p < 0 else base + p)
        birth_age.append(float(sub.vertex_age[v]))
        edge_birth_age.append(0.0 if p < 0 else float(sub.edge_age[v]))
        birth_time.append(s_event)


def stationary_structural_snapshot(rng, size_cap: int = 10**5):
    """Rooted aged tree at a stationary time (cycle size-biased, uniform
    observation point); its law is the equilibrium cluster."""
    s_len = float(sample_size_biased_lifetime(rng))
    u = rng.random()
    return structural_conditioned_run(rng, s_len, u * s_len,
                                      size_cap=size_cap).aged


def run_stationary(rng, window: float,
                   size_cap: int = sm.DEFAULT_SIZE_CAP,
                   explosion_threshold: int = DEFAULT_EXPLOSION_THRESHOLD) -> EventTrace:
    """Stationary trace on [0, window]: size-biased covering cycle with a
    uniform shift, then independent fresh cycles."""
    if window <= 0:
        raise ValueError("window must be positive")
    s_len = float(sample_size_biased_lifetime(rng))
    u = rng.random()
    theta1 = (1.0 - u) * s_len
    times, kinds, jumps, sizes = [], [], [], []
    # covering cycle: explode-at dynamics replayed from the cycle start,
    # only as far as the window needs
    sim = DoobSimulator(s_len, "explode_at_t")
    k = 1
    s = 0.0
    s_stop = min(s_len * (1.0 - 1e-12), u * s_len + window)
    while True:
        s_next = sim.next_jump_time(k, s, rng)
        if s_next is None or s_next > s_stop:
            break
        j = sim.jump_size(k, s_next, rng)
        if k + j > size_cap:
            return EventTrace(
                np.array(times), np.array(kinds, dtype=np.int8),
                np.array(jumps, dtype=np.int64),
                np.array(sizes, dtype=np.int64),
                window=(0.0, window), init_size=1, aborted="size_cap",
            )
        k += j
        s = s_next
        tev = s - u * s_len
        if 0.0 <= tev <= window:
            times.append(tev)
            kinds.append(JUMP)
            jumps.append(j)
            sizes.append(k)
    thetas = []
    t0 = theta1
    while t0 <= window:
        thetas.append(t0)
        times.append(t0)
        kinds.append(EXPLOSION)
        jumps.append(0)
        sizes.append(1)
        cyc = run_growth(rng, stop="explosion", size_cap=size_cap,
                         explosion_threshold=explosion_threshold)
        for te, ke, je, se in zip(cyc.times, cyc.kinds, cyc.jump_sizes,
                                  cyc.sizes_after):
            if ke == JUMP and t0 + te <= window:
                times.append(t0 + te)
                kinds.append(JUMP)
                jumps.append(je)
                sizes.append(se)
        t0 = t0 + cyc.explosion_time()
    order = np.argsort(times) if times else np.array([], dtype=int)
    return EventTrace(
        np.array(times)[order], np.array(kinds, dtype=np.int8)[order],
        np.array(jumps, dtype=np.int64)[order],
        np.array(sizes, dtype=np.int64)[order],
        window=(0.0, window), init_size=1,
        theta_marks=np.array(thetas),
    )


# ---------------------------------------------------------------------------
# explosion scaling in the sqrt-size clock
# ---------------------------------------------------------------------------


def explosion_scaling_stats(trace: EventTrace, taus):
    """sqrt(size) * (t_inf - t(tau)) at the requested tau checkpoints.

    Returns (stats, skipped, time_change) where stats maps tau to the
    statistic and skipped lists checkpoints beyond the trace's reach.
    """
    t_inf = trace.explosion_time()
    jmask = trace.kinds == JUMP
    jt = trace.times[jmask]
    js = trace.sizes_after[jmask]
    t_knots = np.concatenate([[0.0], jt])
    sizes = np.concatenate([[trace.init_size], js]).astype(float)
    dt = np.diff(np.concatenate([t_knots, [t_inf]]))
    tau_knots = np.concatenate([[0.0], np.cumsum(np.sqrt(sizes) * dt)])
    tc = TimeChange(np.concatenate([t_knots, [t_inf]]), tau_knots,
                    np.log(sizes))
    stats, skipped = {}, []
    for tau in taus:
        idx = int(np.searchsorted(tau_knots, tau, side="right")) - 1
        if tau > tau_knots[-1] or idx >= len(sizes):
            skipped.append(tau)
            continue
        k = sizes[idx]
        t_at = t_knots[idx] + (tau - tau_knots[idx]) / math.sqrt(k)
        stats[tau] = math.sqrt(k) * (t_inf - t_at)
    return stats, skipped, tc


def bulk_explosion_scaling(n: int, rng, taus) -> dict:
    """n independent trajectories run in the sqrt-size clock; for each
    tau checkpoint returns the scaled remaining-time statistics."""
    taus = sorted(taus)
    tau_max = taus[-1]
    sizes = np.ones(n, dtype=np.int64)
    t = np.zeros(n)
    tau = np.zeros(n)
    k_at = {tt: np.zeros(n, dtype=np.int64) for tt in taus}
    t_at = {tt: np.zeros(n) for tt in taus}
    active = np.arange(n)
    while len(active):
        s = sizes[active].astype(float)
        h = rng.exponential(1.0, size=len(active)) / s
        tau_new = tau[active] + h * np.sqrt(s)
        for tt in taus:
            crossed = (tau[active] < tt) & (tau_new >= tt)
            if np.any(crossed):
                rows = active[crossed]
                k_at[tt][rows] = sizes[rows]
                t_at[tt][rows] = t[rows] + (tt - tau[rows]) / np.sqrt(
                    sizes[rows].astype(float))
        t[active] += h
        tau[active] = tau_new
        sizes[active] += draw_w(rng, len(active))
        active = active[tau[active] < tau_max]
    t_inf = t + residual_explosion_time(sizes, rng)
    return {
        tt: np.sqrt(k_at[tt].astype(float)) * (t_inf - t_at[tt]) for tt in taus
    }


# ---------------------------------------------------------------------------
# reverse logging
# ---------------------------------------------------------------------------


def reverse_logging(aged, rewind: float):
    """Wind the clock back: drop edges younger than ``rewind``, keep the
    root component, subtract ``rewind`` from all retained ages.

    Accepts an AgedTree or a SpinalTree (the surviving spine prefix is
    kept); applied to the size-biased infinite-cluster law with root age
    conditioned to exceed the rewind, the result has the correspondingly
    shifted spinal law.
    """
    spine = None
    if isinstance(aged, sm.SpinalTree):
        spine = aged.spine
        aged = aged.aged
    tree = aged.tree
    if rewind < 0 or rewind > aged.root_age:
        raise ValueError("rewind must lie in [0, root age]")
    keep_edge = [False] * len(tree)
    for v, p in tree.edges():
        keep_edge[v] = aged.edge_age[v] >= rewind
    ch = tree.children()
    keep = [False] * len(tree)
    stack = [tree.root]
    keep[tree.root] = True
    order = [tree.root]
    while stack:
        v = stack.pop()
        for c in ch[v]:
            if keep_edge[c]:
                keep[c] = True
                order.append(c)
                stack.append(c)
    new_id = {v: i for i, v in enumerate(order)}
    parent = [-1] * len(order)
    va = np.empty(len(order))
    ea = np.full(len(order), math.nan)
    for v in order:
        i = new_id[v]
        va[i] = aged.vertex_age[v] - rewind
        p = tree.parent[v]
        if v != tree.root and p in new_id:
            parent[i] = new_id[p]
            ea[i] = aged.edge_age[v] - rewind
    out = AgedTree(RootedTree(parent, new_id[tree.root]), va, ea)
    if spine is None:
        return out
    new_spine = []
    for v in spine:
        if v in new_id:
            new_spine.append(new_id[v])
        else:
            break
    return sm.SpinalTree(out, new_spine, False)


# ---------------------------------------------------------------------------
# subordinator coupling diagnostic (exploratory)
# ---------------------------------------------------------------------------


def subordinator_coupling_diagnostic(trace: EventTrace, rng):
    """Couple the log-size path in the sqrt-size clock to the comparison
    subordinator and report the residual path (no tolerance asserted).

    Each size jump k -> k+j maps to a subordinator jump drawn from its
    conditional interval (the jump-tail matching of the coupling); the
    subordinator's small uncoupled jumps enter through their mean drift.
    """
    jmask = trace.kinds == JUMP
    jt = trace.times[jmask]
    js = trace.sizes_after[jmask]
    sizes = np.concatenate([[trace.init_size], js]).astype(float)
    t_inf = trace.explosion_time()
    dt = np.diff(np.concatenate([[0.0], jt, [t_inf]]))
    tau = np.concatenate([[0.0], np.cumsum(np.sqrt(sizes) * dt)])
    z = np.log(sizes)
    y = np.empty_like(z)
    y[0] = z[0]
    sqrt_pi = math.sqrt(math.pi)
    for i in range(len(sizes) - 1):
        k = sizes[i]
        n = sizes[i + 1] - sizes[i]
        # interval of subordinator jumps matched to a size jump of n at size k:
        # sqrt(k) P(X >= m) >= 1/(sqrt(pi) sqrt(e^a - 1)) defines the matching
        tail_n = w_tail(int(n))
        tail_n1 = w_tail(int(n) + 1)
        a_lo = math.log1p(1.0 / (math.pi * k * tail_n**2))
        a_hi = math.log1p(1.0 / (math.pi * k * tail_n1**2))
        # draw a from the jump measure conditioned to [a_lo, a_hi): the
        # tail of the measure is 1/(sqrt(pi) sqrt(e^a - 1))
        v_hi = 1.0 / (sqrt_pi * math.sqrt(math.expm1(a_lo)))
        v_lo = 1.0 / (sqrt_pi * math.sqrt(math.expm1(a_hi)))
        v = v_lo + (v_hi - v_lo) * rng.random()
        a = math.log1p(1.0 / (math.pi * v * v))
        # drift of uncoupled small jumps over the elapsed sqrt-clock time
        u_k = math.log1p(1.0 / (math.pi * k))
        drift = (-u_k * math.sqrt(k)
                 + (2.0 / sqrt_pi) * math.atan(1.0 / math.sqrt(math.pi * k)))
        y[i + 1] = y[i] + a + drift * (tau[i + 1] - tau[i])
    return {"tau": tau[: len(z)], "Z": z, "Y": y, "residual": z - y}
