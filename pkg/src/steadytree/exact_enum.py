"""Exact enumeration of rooted-tree classes and their stationary masses.

The stationary law on rooted-tree isomorphism classes assigns the
singleton mass 1/2 and is then determined inductively: a class of size k
receives, from every ordered pair of classes (A, B) with |A| + |B| = k,
the mass  W(A) W(B) / (k |A|)  times the number of vertices v of A for
which attaching B's root to v reproduces the class.  All arithmetic is
exact (fractions).

The same module houses the exact age-labelling densities and the
matrix-tree machinery for the age-weighted spanning-tree description.
"""

from __future__ import annotations

import csv
import itertools
import math
import threading
from fractions import Fraction

import numpy as np

from .closed_forms import cluster_size_pmf
from .trees import (
    AgedTree,
    RootedTree,
    automorphism_orbits,
    canonical_code,
    decode_code,
    join_parents,
)

__all__ = [
    "DEFAULT_ENUM_CAP",
    "enumerate_rooted_trees",
    "class_mass_table",
    "fixed_point_mass",
    "stationary_balance_residual",
    "aged_tree_density",
    "age_weight_product",
    "age_vector_density",
    "kirchhoff_total_weight",
    "spanning_tree_weight_sum",
    "labeled_trees_prufer",
    "export_class_table",
]

DEFAULT_ENUM_CAP = 12

_lock = threading.Lock()
_classes: dict[int, dict[bytes, Fraction]] = {}
_reps: dict[bytes, "_Rep"] = {}

_OPEN = b"\x01"
_CLOSE = b"\x00"


class _Rep:
    """Representative of a class with the structure the join loop needs.

    Built from a single pass over the canonical code: each vertex's
    subtree code is a slice of the class code, and a canonical parent's
    child codes appear in sorted order.
    """

    __slots__ = ("parent", "orbits", "subcode", "childcodes")

    def __init__(self, code: bytes):
        parent = []
        starts = []
        stack = []
        subcode = []
        childcodes = []
        for pos, byte in enumerate(code):
            if byte == 1:  # open
                parent.append(stack[-1] if stack else -1)
                stack.append(len(parent) - 1)
                starts.append(pos)
                subcode.append(b"")
                childcodes.append([])
            else:  # close
                v = stack.pop()
                subcode[v] = code[starts[v]:pos + 1]
                if parent[v] >= 0:
                    childcodes[parent[v]].append(subcode[v])
        self.parent = parent
        self.subcode = subcode
        self.childcodes = childcodes
        # orbit of v <-> sequence of subtree codes along the root path
        keys: dict[bytes, list] = {}
        for v in range(len(parent)):
            path = [subcode[v]]
            u = v
            while parent[u] >= 0:
                u = parent[u]
                path.append(subcode[u])
            key = b"|".join(path)
            if key in keys:
                keys[key][1] += 1
            else:
                keys[key] = [v, 1]
        self.orbits = [(v, cnt) for v, cnt in keys.values()]

    def join_code(self, v: int, code_b: bytes) -> bytes:
        """Canonical code of this tree with an extra subtree (code_b)
        attached under vertex v; touches only the v -> root path."""
        kids = self.childcodes[v] + [code_b]
        kids.sort()
        new = _OPEN + b"".join(kids) + _CLOSE
        cur = v
        while self.parent[cur] >= 0:
            p = self.parent[cur]
            kids = list(self.childcodes[p])
            kids.remove(self.subcode[cur])
            kids.append(new)
            kids.sort()
            new = _OPEN + b"".join(kids) + _CLOSE
            cur = p
        return new


def _rep(code: bytes) -> _Rep:
    entry = _reps.get(code)
    if entry is None:
        entry = _Rep(code)
        _reps[code] = entry
    return entry


def _extend_cache(n: int) -> None:
    with _lock:
        if not _classes:
            single = canonical_code([-1], 0)
            _classes[1] = {single: Fraction(1, 2)}
            _rep(single)
        for k in range(max(_classes) + 1, n + 1):
            # integer accumulation over one level-wide denominator
            # (Fraction adds normalize with a gcd every time)
            dens = {i: math.lcm(*(m.denominator for m in _classes[i].values()))
                    for i in range(1, k)}
            den_k = k * math.lcm(*(dens[i] * dens[k - i] for i in range(1, k)))
            acc: dict[bytes, int] = {}
            acc_get = acc.get
            for i in range(1, k):
                scale = den_k // (k * dens[i] * dens[k - i])
                nums_a = {c: (m * dens[i]).numerator
                          for c, m in _classes[i].items()}
                nums_b = {c: (m * dens[k - i]).numerator
                          for c, m in _classes[k - i].items()}
                for code_a, num_a in nums_a.items():
                    rep_a = _rep(code_a)
                    orbits = [(v, cnt * num_a * scale) for v, cnt in rep_a.orbits]
                    join = rep_a.join_code
                    for code_b, num_b in nums_b.items():
                        for v, w in orbits:
                            code = join(v, code_b)
                            acc[code] = acc_get(code, 0) + w * num_b
            _classes[k] = {code: Fraction(num, den_k) for code, num in acc.items()}


def enumerate_rooted_trees(n: int, cap: int = DEFAULT_ENUM_CAP) -> list[RootedTree]:
    """One representative per isomorphism class of rooted trees on n
    vertices, ordered by canonical code."""
    if not 1 <= n <= cap:
        raise ValueError("n must lie in [1, %d]" % cap)
    _extend_cache(n)
    return [RootedTree.from_code(c) for c in sorted(_classes[n])]


def class_mass_table(n: int, cap: int = DEFAULT_ENUM_CAP) -> dict[bytes, Fraction]:
    """Canonical code -> stationary mass for all classes of size n."""
    if not 1 <= n <= cap:
        raise ValueError("n must lie in [1, %d]" % cap)
    _extend_cache(n)
    return dict(_classes[n])


def fixed_point_mass(t: RootedTree, cap: int = DEFAULT_ENUM_CAP) -> Fraction:
    """Exact stationary mass of the rooted-tree class of ``t``."""
    return class_mass_table(len(t), cap)[t.canonical_code]


def stationary_balance_residual(t: RootedTree, mass=None) -> Fraction:
    """|T| * mass(T) minus the total rate of entry into the class of T.

    Zero for every class under the stationary masses; ``mass`` may
    override the mass function (code -> Fraction) to probe sensitivity.
    """
    k = len(t)
    if k < 2:
        raise ValueError("balance residual needs at least 2 vertices")
    _extend_cache(k)
    if mass is None:
        tables = {i: _classes[i] for i in range(1, k + 1)}
        get = lambda code, i: tables[i][code]
    else:
        get = lambda code, i: mass(code)
    target = t.canonical_code
    entry = Fraction(0)
    for i in range(1, k):
        for code_a in _classes[i]:
            rep_a = _rep(code_a)
            for code_b in _classes[k - i]:
                parent_b = _rep(code_b).parent
                hits = 0
                for v, cnt in rep_a.orbits:
                    joined, _ = join_parents(rep_a.parent, 0, v, parent_b, 0)
                    if canonical_code(joined, 0) == target:
                        hits += cnt
                if hits:
                    entry += get(code_a, i) * get(code_b, k - i) * hits
    return k * get(target, k) - entry


# ---------------------------------------------------------------------------
# age-labelling densities
# ---------------------------------------------------------------------------


def aged_tree_density(at: AgedTree, marginal: str = "joint") -> float:
    """Density of an age-labelled tree under the stationary cluster law.

    ``joint``: vertex and edge ages; ``vertex``: edge ages integrated
    out; ``edge``: vertex ages integrated out.  Illegal labellings have
    density 0.
    """
    tree = at.tree
    va, ea = at.vertex_age, at.edge_age
    n = len(tree)
    if np.any(va < 0):
        return 0.0
    if marginal == "joint":
        dens = math.exp(-float(va.sum())) / 2.0**n
        for v, p in tree.edges():
            if not 0.0 <= ea[v] < min(va[v], va[p]):
                return 0.0
        return dens
    if marginal == "vertex":
        dens = math.exp(-float(va.sum())) / 2.0**n
        for v, p in tree.edges():
            dens *= min(va[v], va[p])
        return dens
    if marginal == "edge":
        edges = tree.edges()
        for v, p in edges:
            if ea[v] < 0:
                return 0.0
        incident = np.zeros(n)
        for v, p in edges:
            incident[v] = max(incident[v], ea[v])
            incident[p] = max(incident[p], ea[v])
        return math.exp(-float(incident.sum())) / 2.0**n
    raise ValueError("marginal must be joint, vertex or edge")


def age_weight_product(a) -> "Fraction | float":
    """Product over j < k of ((k-j+1) a_j + a_1 + ... + a_{j-1}).

    Equals k times the total a_i ^ a_j spanning-tree weight of the
    complete graph; exact when the ages are Fractions.
    """
    a = list(a)
    k = len(a)
    if sorted(a) != a or len(set(a)) != k or (k and a[0] <= 0):
        raise ValueError("ages must be strictly increasing and positive")
    prod = a[0] * 0 + 1  # one, in the arithmetic of the inputs
    run = a[0] * 0
    for j in range(1, k):
        prod *= (k - j + 1) * a[j - 1] + run
        run += a[j - 1]
    return prod


def age_vector_density(a) -> float:
    """Density of the sorted vertex-age vector of a size-k cluster."""
    a = list(a)
    k = len(a)
    prod = age_weight_product(a)
    return float(prod) * math.exp(-float(sum(a))) / 2.0**k


def _bareiss_det(m) -> Fraction:
    """Fraction-free determinant (Bareiss) for exact entries."""
    a = [[Fraction(x) for x in row] for row in m]
    n = len(a)
    sign = 1
    prev = Fraction(1)
    for i in range(n - 1):
        if a[i][i] == 0:
            for r in range(i + 1, n):
                if a[r][i] != 0:
                    a[i], a[r] = a[r], a[i]
                    sign = -sign
                    break
            else:
                return Fraction(0)
        for r in range(i + 1, n):
            for c in range(i + 1, n):
                a[r][c] = (a[r][c] * a[i][i] - a[r][i] * a[i][c]) / prev
        prev = a[i][i]
    return sign * a[-1][-1]


def spanning_tree_weight_sum(a, method: str = "det"):
    """Sum over spanning trees of K_k of the product of edge weights
    a_i ^ a_j (unrooted)."""
    a = list(a)
    k = len(a)
    if k == 1:
        return a[0] * 0 + 1
    if method == "enumerate":
        if k > 8:
            raise ValueError("enumeration limited to k <= 8")
        total = a[0] * 0
        for edges in labeled_trees_prufer(k):
            w = a[0] * 0 + 1
            for i, j in edges:
                w *= min(a[i], a[j])
            total += w
        return total
    if method != "det":
        raise ValueError("method must be det or enumerate")
    # reduced weighted Laplacian, row/col 0 removed
    exact = all(isinstance(x, (int, Fraction)) for x in a)
    lap = [[0] * (k - 1) for _ in range(k - 1)]
    for i in range(1, k):
        diag = a[0] * 0
        for j in range(k):
            if j != i:
                diag += min(a[i], a[j])
        lap[i - 1][i - 1] = diag
        for j in range(i + 1, k):
            lap[i - 1][j - 1] = -min(a[i], a[j])
            lap[j - 1][i - 1] = -min(a[i], a[j])
    if exact:
        return _bareiss_det(lap)
    return float(np.linalg.det(np.array(lap, dtype=float)))


def kirchhoff_total_weight(a, method: str = "det"):
    """Rooted spanning-tree weight total: k times the unrooted sum."""
    return len(list(a)) * spanning_tree_weight_sum(a, method)


def labeled_trees_prufer(k: int):
    """All labeled trees on {0..k-1} as edge lists, via Prufer sequences."""
    if k == 1:
        yield []
        return
    if k == 2:
        yield [(0, 1)]
        return
    for seq in itertools.product(range(k), repeat=k - 2):
        degree = [1] * k
        for v in seq:
            degree[v] += 1
        edges = []
        leaves = sorted(v for v in range(k) if degree[v] == 1)
        for v in seq:
            leaf = leaves.pop(0)
            edges.append((leaf, v))
            degree[v] -= 1
            if degree[v] == 1:
                # insert keeping sorted order
                lo, hi = 0, len(leaves)
                while lo < hi:
                    mid = (lo + hi) // 2
                    if leaves[mid] < v:
                        lo = mid + 1
                    else:
                        hi = mid
                leaves.insert(lo, v)
        edges.append((leaves[0], leaves[1]))
        yield edges


def export_class_table(nmax: int, path, cap: int = DEFAULT_ENUM_CAP) -> None:
    """CSV table (n, canonical_code, mass_num, mass_den) for n <= nmax."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["n", "canonical_code", "mass_num", "mass_den"])
        for n in range(1, nmax + 1):
            table = class_mass_table(n, cap)
            for code in sorted(table):
                m = table[code]
                writer.writerow([n, code.hex(), m.numerator, m.denominator])


def total_mass_check(n: int) -> bool:
    """Masses of size-n classes sum exactly to w_n."""
    return sum(class_mass_table(n).values()) == cluster_size_pmf(n)
