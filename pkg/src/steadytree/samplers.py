"""Exact samplers for the steady state cluster and its relatives.

All samplers take a ``numpy.random.Generator`` and are deterministic
given the stream.  Laws with heavy-tailed sizes enforce explicit caps:
exceeding a cap raises :class:`SizeCapExceeded` (callers running bulk
statistics catch it and count the sample in a tail bucket).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .trees import AgedTree, RootedTree, tree_from_edges
from .wlaw import draw_equilibrium_age

__all__ = [
    "SizeCapExceeded",
    "GenealogyPair",
    "OffspringIntensity",
    "SpinalTree",
    "sample_genealogy_pair",
    "sample_rde",
    "sample_cluster_given_size",
    "sample_age_vector_given_size",
    "sample_weighted_spanning_tree",
    "sample_mgw",
    "sample_hx",
    "sample_spinal",
    "spinal_age_chain",
]

DEFAULT_SIZE_CAP = 10**7


class SizeCapExceeded(RuntimeError):
    """A sampler hit its configured size cap."""

    def __init__(self, cap):
        super().__init__("size cap %d exceeded" % cap)
        self.cap = cap


# ---------------------------------------------------------------------------
# genealogical construction
# ---------------------------------------------------------------------------


@dataclass
class GenealogyPair:
    """Plane binary genealogical tree with spent times, plus the cluster
    built on its leaf set.

    ``left``/``right`` hold child node ids (-1 for leaves), ``spent``
    the per-node spent times; ``leaf_of_cluster_vertex[i]`` is the
    genealogy leaf carrying cluster vertex i.
    """

    left: np.ndarray
    right: np.ndarray
    parent: np.ndarray
    spent: np.ndarray
    cluster: RootedTree
    leaf_of_cluster_vertex: np.ndarray
    aged: AgedTree

    @property
    def n_nodes(self) -> int:
        return len(self.spent)

    def shape_code(self) -> bytes:
        """Plane-shape code: preorder bits, 1 = internal, 0 = leaf."""
        out = bytearray()
        stack = [0]
        while stack:
            v = stack.pop()
            if self.left[v] >= 0:
                out.append(1)
                stack.append(int(self.right[v]))
                stack.append(int(self.left[v]))
            else:
                out.append(0)
        return bytes(out)


def _binary_gw_shape(rng, leaf_cap: int):
    """Critical binary Galton-Watson plane tree (0 or 2 children, p=1/2).

    Returns (left, right, parent) arrays in allocation order where node 0
    is the root and children are allocated left before right.
    """
    left, right, parent = [-1], [-1], [-1]
    pending = [0]
    leaves = 0
    while pending:
        v = pending.pop()
        if rng.random() < 0.5:
            leaves += 1
            if leaves > leaf_cap:
                raise SizeCapExceeded(leaf_cap)
        else:
            a, b = len(left), len(left) + 1
            left.extend([-1, -1])
            right.extend([-1, -1])
            parent.extend([v, v])
            left[v], right[v] = a, b
            pending.append(b)
            pending.append(a)
    return (
        np.array(left, dtype=np.int64),
        np.array(right, dtype=np.int64),
        np.array(parent, dtype=np.int64),
    )


def _leaf_ranges(left, right):
    """DFS leaf intervals: leaves get consecutive ids left-to-right and
    every node v covers [lo[v], hi[v])."""
    n = len(left)
    lo = np.zeros(n, dtype=np.int64)
    hi = np.zeros(n, dtype=np.int64)
    order = []
    stack = [(0, False)]
    leaf_count = 0
    while stack:
        v, done = stack.pop()
        if left[v] < 0:
            lo[v] = leaf_count
            leaf_count += 1
            hi[v] = leaf_count
            continue
        if done:
            lo[v] = lo[left[v]]
            hi[v] = hi[right[v]]
            order.append(v)
        else:
            stack.append((v, True))
            stack.append((int(right[v]), False))
            stack.append((int(left[v]), False))
    return lo, hi


def _pair_from_shape(left, right, parent, rng):
    """Spent times, cluster and derived ages for a given genealogy shape."""
    n = len(left)
    lo, hi = _leaf_ranges(left, right)
    n_leaves = int(hi[0])
    spent = rng.exponential(1.0, size=n) / (hi - lo)
    # vertex/edge ages are path sums of spent times from the genealogy root
    pathsum = np.zeros(n)
    stack = [0]
    while stack:
        v = stack.pop()
        p = parent[v]
        pathsum[v] = spent[v] + (pathsum[p] if p >= 0 else 0.0)
        if left[v] >= 0:
            stack.append(int(left[v]))
            stack.append(int(right[v]))
    edges = []
    edge_age_of = {}
    for v in range(n):
        if left[v] >= 0:
            a = int(rng.integers(lo[left[v]], hi[left[v]]))
            b = int(rng.integers(lo[right[v]], hi[right[v]]))
            edges.append((a, b))
            edge_age_of[(a, b)] = pathsum[v]
            edge_age_of[(b, a)] = pathsum[v]
    root = int(rng.integers(0, n_leaves))
    cluster = tree_from_edges(n_leaves, edges, root)
    vertex_age = np.empty(n_leaves)
    is_leaf = left < 0
    vertex_age[lo[is_leaf]] = pathsum[is_leaf]
    edge_age = np.full(n_leaves, math.nan)
    for v, p in cluster.edges():
        edge_age[v] = edge_age_of[(v, p)]
    aged = AgedTree(cluster, vertex_age, edge_age)
    leaf_ids = np.flatnonzero(is_leaf)
    leaf_of_vertex = leaf_ids[np.argsort(lo[is_leaf])]
    return spent, cluster, leaf_of_vertex, aged


def sample_genealogy_pair(rng, leaf_cap: int = DEFAULT_SIZE_CAP) -> GenealogyPair:
    """Stationary genealogy/cluster pair.

    The genealogy is a critical binary Galton-Watson plane tree whose node
    with m leaves above it carries an Exp(mean 1/m) spent time; each
    internal node contributes a cluster edge between uniform leaves of its
    two subtrees, and the cluster root is a uniform leaf.
    """
    left, right, parent = _binary_gw_shape(rng, leaf_cap)
    spent, cluster, leaf_map, aged = _pair_from_shape(left, right, parent, rng)
    return GenealogyPair(left, right, parent, spent, cluster, leaf_map, aged)


def sample_cluster_given_size(k: int, rng) -> AgedTree:
    """Cluster conditioned to have exactly k vertices (with ages).

    Remy's algorithm draws the genealogy uniformly among plane binary
    trees with k leaves, which is its conditional law; spent times and the
    cluster follow as in the unconditioned construction.
    """
    if k < 1:
        raise ValueError("size must be a positive integer")
    n = 2 * k - 1
    left = np.full(n, -1, dtype=np.int64)
    right = np.full(n, -1, dtype=np.int64)
    parent = np.full(n, -1, dtype=np.int64)
    root = 0
    used = 1
    for j in range(1, k):
        u = int(rng.integers(0, used))
        internal, leaf = used, used + 1
        used += 2
        side = rng.random() < 0.5
        p = parent[u]
        parent[internal] = p
        if p >= 0:
            if left[p] == u:
                left[p] = internal
            else:
                right[p] = internal
        else:
            root = internal
        left[internal] = u if side else leaf
        right[internal] = leaf if side else u
        parent[u] = internal
        parent[leaf] = internal
    if root != 0:
        # relabel so the root is node 0 (the shape helpers assume it)
        perm = np.arange(n)
        perm[0], perm[root] = root, 0
        inv = np.empty(n, dtype=np.int64)
        inv[perm] = np.arange(n)
        left2 = np.where(left >= 0, inv[left], -1)[perm]
        right2 = np.where(right >= 0, inv[right], -1)[perm]
        parent2 = np.where(parent >= 0, inv[parent], -1)[perm]
        left, right, parent = left2, right2, parent2
    _, cluster, _, aged = _pair_from_shape(left, right, parent, rng)
    return aged


def sample_rde(rng, size_cap: int = DEFAULT_SIZE_CAP) -> RootedTree:
    """Sample the cluster law by its recursive description: a singleton
    with probability 1/2, else two independent copies joined at their
    roots and re-rooted uniformly."""
    left, right, parent = _binary_gw_shape(rng, size_cap)
    lo, hi = _leaf_ranges(left, right)
    n_leaves = int(hi[0])
    if n_leaves == 1:
        return RootedTree.singleton()
    # evaluate the recursion bottom-up over the plan tree
    edges = []
    root_of = np.zeros(len(left), dtype=np.int64)
    order = []
    stack = [(0, False)]
    while stack:
        v, done = stack.pop()
        if left[v] < 0:
            root_of[v] = lo[v]
            continue
        if done:
            order.append(v)
        else:
            stack.append((v, True))
            stack.append((int(right[v]), False))
            stack.append((int(left[v]), False))
    for v in order:
        edges.append((int(root_of[left[v]]), int(root_of[right[v]])))
        root_of[v] = int(rng.integers(lo[v], hi[v]))
    return tree_from_edges(n_leaves, edges, int(root_of[0]))


# ---------------------------------------------------------------------------
# age vectors and weighted spanning trees
# ---------------------------------------------------------------------------


def sample_age_vector_given_size(k: int, rng) -> np.ndarray:
    """Sorted vertex ages of a size-k cluster.

    The age sum is Gamma(2k-1, 1); its normalized partial sums are sorted
    size-biased uniforms, and the increments map back to ages through the
    triangular substitution e_i = (k+1-i)(a_i - a_{i-1}).
    """
    if k < 1:
        raise ValueError("size must be a positive integer")
    total = rng.gamma(2 * k - 1)
    if k == 1:
        return np.array([total])
    u = np.sort(total * np.sqrt(rng.random(k - 1)))
    e = np.diff(np.concatenate([[0.0], u, [total]]))
    ages = np.cumsum(e / np.arange(k, 0, -1))
    return ages


def sample_weighted_spanning_tree(ages, rng) -> RootedTree:
    """Spanning tree of the complete graph with probability proportional
    to the product of edge weights min(a_i, a_j), rooted uniformly.

    Wilson's algorithm: loop-erased random walks with the weights as
    conductances.
    """
    a = np.asarray(ages, dtype=float)
    k = len(a)
    if k < 1:
        raise ValueError("need at least one age")
    if len(set(a.tolist())) != k:
        raise ValueError("ages must be distinct")
    if k == 1:
        return RootedTree.singleton()
    w = np.minimum.outer(a, a)
    np.fill_diagonal(w, 0.0)
    cum = np.cumsum(w, axis=1)
    in_tree = np.zeros(k, dtype=bool)
    nxt = np.full(k, -1, dtype=np.int64)
    in_tree[0] = True
    for start in range(1, k):
        u = start
        while not in_tree[u]:
            r = rng.random() * cum[u, -1]
            nxt[u] = min(int(np.searchsorted(cum[u], r, side="right")), k - 1)
            u = nxt[u]
        u = start
        while not in_tree[u]:
            in_tree[u] = True
            u = nxt[u]
    # after cycle popping, nxt[v] is the tree parent of every non-walk-root v
    edges = [(v, int(nxt[v])) for v in range(1, k)]
    root = int(rng.integers(0, k))
    return tree_from_edges(k, edges, root)


# ---------------------------------------------------------------------------
# age-typed branching construction
# ---------------------------------------------------------------------------


def _logcosh(x: float) -> float:
    ax = abs(x)
    return ax + math.log1p(math.exp(-2.0 * ax)) - math.log(2.0)


@dataclass(frozen=True)
class OffspringIntensity:
    """Offspring age intensity of a parent of age ``parent_age`` under
    environment shift ``shift``: density (b ^ a) (1/2) sech^2((a+x)/2)."""

    parent_age: float
    shift: float = 0.0

    def total_mass(self) -> float:
        b, x = self.parent_age, self.shift
        return b - 2.0 * _logcosh((b + x) / 2.0) + 2.0 * _logcosh(x / 2.0)

    def cdf_value(self, y: float) -> float:
        """Unnormalized mass of [0, y]."""
        b, x = self.parent_age, self.shift
        if y <= b:
            return y * math.tanh((y + x) / 2.0) - 2.0 * _logcosh((y + x) / 2.0) \
                + 2.0 * _logcosh(x / 2.0)
        low = self.cdf_value(b)
        return low + b * (math.tanh((y + x) / 2.0) - math.tanh((b + x) / 2.0))

    def sample_age(self, rng) -> float:
        """One offspring age by numeric inversion (closed form above the
        parent-age kink, safeguarded Newton below, tolerance 1e-12)."""
        b, x = self.parent_age, self.shift
        m = rng.random() * self.total_mass()
        low_mass = self.cdf_value(b)
        if m >= low_mass:
            arg = math.tanh((b + x) / 2.0) + (m - low_mass) / b
            arg = min(arg, 1.0 - 1e-16)
            return 2.0 * math.atanh(arg) - x
        lo, hi = 0.0, b
        y = min(b, 2.0 * math.sqrt(max(m, 1e-300)))
        for _ in range(200):
            gy = self.cdf_value(y) - m
            if abs(gy) < 1e-13:
                break
            if gy > 0:
                hi = y
            else:
                lo = y
            dg = 0.5 * y / math.cosh((y + x) / 2.0) ** 2
            ynew = y - gy / dg if dg > 0 else 0.5 * (lo + hi)
            y = ynew if lo < ynew < hi else 0.5 * (lo + hi)
        return y

    def sample_count(self, rng) -> int:
        return int(rng.poisson(self.total_mass()))


def _draw_root_age_hx(x: float, rng) -> float:
    """Root age with survival (1 - tanh((x+y)/2)) / (1 - tanh(x/2))."""
    u = rng.random()
    return math.log((math.exp(x) + u) / (1.0 - u)) - x


def _grow_branching(rng, root_age, shift, size_cap, max_depth,
                    age_floor: float = 0.0):
    """Grow the age-typed branching tree; returns (parents, ages).

    Offspring of an age-b vertex follow a Poisson random measure with
    intensity (b ^ a)(1/2) sech^2((a+shift)/2) da.  Vertices younger than
    ``age_floor`` are kept but not expanded: sub-floor subtrees cannot
    survive a clock rewind by >= age_floor, so the truncation is exact
    for that purpose (and a bias otherwise).
    """
    parents = [-1]
    ages = [root_age]
    queue = [(0, root_age, 0)]
    while queue:
        v, b, depth = queue.pop()
        if max_depth is not None and depth >= max_depth:
            continue
        if b < age_floor:
            continue
        lam = OffspringIntensity(b, shift)
        for _ in range(lam.sample_count(rng)):
            a = lam.sample_age(rng)
            parents.append(v)
            ages.append(a)
            if len(parents) > size_cap:
                raise SizeCapExceeded(size_cap)
            queue.append((len(parents) - 1, a, depth + 1))
    return parents, ages


def _attach_edge_ages(tree: RootedTree, vertex_age, rng) -> AgedTree:
    """Uniform edge ages on [0, min endpoint age], from a child stream so
    the main stream is identical with or without them."""
    va = np.asarray(vertex_age, dtype=float)
    ea = np.full(len(va), math.nan)
    edge_rng = rng.spawn(1)[0]
    for v, p in tree.edges():
        ea[v] = edge_rng.uniform(0.0, min(va[v], va[p]))
    return AgedTree(tree, va, ea)


def sample_mgw(rng, root_age: float | None = None,
               size_cap: int = DEFAULT_SIZE_CAP,
               max_depth: int | None = None,
               edge_ages: bool = True,
               age_floor: float = 0.0) -> AgedTree:
    """The age-typed branching description of the cluster.

    Root age from the equilibrium density (1/2) sech^2(x/2) unless given;
    total progeny is w-distributed.  ``max_depth`` grows only the ball of
    that radius around the root (exact truncation of the full law).
    """
    if root_age is None:
        root_age = float(draw_equilibrium_age(rng))
    if root_age < 0:
        raise ValueError("root age must be non-negative")
    parents, ages = _grow_branching(rng, root_age, 0.0, size_cap, max_depth,
                                    age_floor)
    tree = RootedTree(parents, 0)
    if not edge_ages:
        return AgedTree(tree, np.array(ages), np.full(len(ages), math.nan))
    return _attach_edge_ages(tree, ages, rng)


def sample_hx(x: float, rng, root_age: float | None = None,
              size_cap: int = DEFAULT_SIZE_CAP,
              max_depth: int | None = None,
              edge_ages: bool = True,
              age_floor: float = 0.0) -> AgedTree:
    """Cluster conditioned to survive for a further time x (environment
    shift x); x = 0 recovers the unconditioned law."""
    if x < 0:
        raise ValueError("shift must be non-negative")
    if root_age is None:
        root_age = _draw_root_age_hx(x, rng)
    parents, ages = _grow_branching(rng, root_age, x, size_cap, max_depth,
                                    age_floor)
    tree = RootedTree(parents, 0)
    if not edge_ages:
        return AgedTree(tree, np.array(ages), np.full(len(ages), math.nan))
    return _attach_edge_ages(tree, ages, rng)


# ---------------------------------------------------------------------------
# spinal (size-biased) representation
# ---------------------------------------------------------------------------


@dataclass
class SpinalTree:
    """Size-biased tree with its root-anchored spine made explicit."""

    aged: AgedTree
    spine: list[int]
    truncation_flag: bool
    meta: dict = field(default_factory=dict)


def _draw_spinal_root_age(x: float, rng) -> float:
    """Density sech^2((a+x)/2) tanh((a+x)/2) cosh^2(x/2)."""
    u = rng.random()
    return 2.0 * math.acosh(math.cosh(x / 2.0) / math.sqrt(1.0 - u)) - x


def _draw_spinal_child_age(b: float, x: float, rng) -> float:
    """Tilted offspring age: density prop. to (b ^ a) sech^2((a+x)/2)
    tanh((a+x)/2), conditioned on the spinal child existing."""
    total = math.tanh((b + x) / 2.0) - math.tanh(x / 2.0)
    m = rng.random() * total

    def cdf_low(y):
        return (
            -0.5 * y / math.cosh((y + x) / 2.0) ** 2
            + math.tanh((y + x) / 2.0)
            - math.tanh(x / 2.0)
        )

    low = cdf_low(b)
    if m >= low:
        val = 1.0 / math.cosh((b + x) / 2.0) ** 2 - 2.0 * (m - low) / b
        val = max(val, 1e-300)
        return 2.0 * math.acosh(1.0 / math.sqrt(val)) - x
    lo, hi = 0.0, b
    y = 0.5 * b
    for _ in range(200):
        gy = cdf_low(y) - m
        if abs(gy) < 1e-13:
            break
        if gy > 0:
            hi = y
        else:
            lo = y
        dg = 0.5 * y / math.cosh((y + x) / 2.0) ** 2 * math.tanh((y + x) / 2.0)
        ynew = y - gy / dg if dg > 0 else 0.5 * (lo + hi)
        y = ynew if lo < ynew < hi else 0.5 * (lo + hi)
    return y


def sample_spinal(x: float, rng, root_age: float | None = None,
                  spine_cap: int = 64,
                  size_cap: int = DEFAULT_SIZE_CAP,
                  age_floor: float = 0.0,
                  max_depth: int | None = None) -> SpinalTree:
    """Size-biased cluster with explicit spine.

    Spinal vertices carry the usual Poisson offspring plus at most one
    tilted spinal child; there is no spinal child with probability
    tanh(x/2) / tanh((b+x)/2).  At x = 0 the spine is almost surely
    infinite and is truncated at ``spine_cap`` with the flag set.
    ``age_floor`` prunes expansion below sub-floor vertices (exact for
    clock rewinds by at least that amount, a bias otherwise).
    """
    if x < 0:
        raise ValueError("shift must be non-negative")
    if root_age is None:
        root_age = _draw_spinal_root_age(x, rng)
    parents = [-1]
    ages = [root_age]
    depth = [0]
    spine = [0]
    truncated = False
    meta = {}

    def grow_subtree(v, b):
        if b < age_floor:
            return
        if max_depth is not None and depth[v] >= max_depth:
            return
        lam = OffspringIntensity(b, x)
        for _ in range(lam.sample_count(rng)):
            a = lam.sample_age(rng)
            parents.append(v)
            ages.append(a)
            depth.append(depth[v] + 1)
            if len(parents) > size_cap:
                raise SizeCapExceeded(size_cap)
            stack.append((len(parents) - 1, a))

    b = root_age
    v = 0
    try:
        while True:
            # non-spinal offspring of the current spinal vertex, then
            # their full subtrees
            stack = []
            grow_subtree(v, b)
            while stack:
                u, a = stack.pop()
                grow_subtree(u, a)
            if b < age_floor:
                break  # the spinal edge below is younger than the floor
            if max_depth is not None and depth[v] >= max_depth:
                break
            th = math.tanh((b + x) / 2.0)
            if th <= 0:
                raise ZeroDivisionError("spinal child law undefined at b = x = 0")
            if rng.random() < math.tanh(x / 2.0) / th:
                break
            if len(spine) > spine_cap:
                truncated = True
                meta["truncation"] = "spine_cap"
                break
            a = _draw_spinal_child_age(b, x, rng)
            parents.append(v)
            ages.append(a)
            depth.append(depth[v] + 1)
            spine.append(len(parents) - 1)
            v, b = len(parents) - 1, a
    except SizeCapExceeded:
        truncated = True
        meta["truncation"] = "size_cap"
    tree = RootedTree(parents, 0)
    aged = _attach_edge_ages(tree, ages, rng)
    return SpinalTree(aged, spine, truncated, meta)


def spinal_age_chain(rng, steps: int, start_age: float | None = None) -> np.ndarray:
    """Ages along the infinite spine at x = 0 (a Markov chain whose
    invariant cdf is tanh^3(a/2))."""
    ages = np.empty(steps)
    b = _draw_spinal_root_age(0.0, rng) if start_age is None else start_age
    for i in range(steps):
        b = _draw_spinal_child_age(b, 0.0, rng)
        ages[i] = b
    return ages
