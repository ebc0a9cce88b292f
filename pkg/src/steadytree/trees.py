"""Rooted trees and age-labelled trees.

A rooted tree on n vertices is stored as a parent array: ``parent[v]`` is
the index of the parent of vertex ``v`` and ``parent[root] == -1``.
Isomorphism classes of rooted trees are identified by an AHU canonical
code (recursively sorted child codes), so two trees are isomorphic as
rooted trees iff their codes are equal.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

NO_PARENT = -1

# AHU byte alphabet: a vertex encodes as OPEN + sorted child codes + CLOSE.
_OPEN = b"\x01"
_CLOSE = b"\x00"
_MARK = b"\x02"


def children_lists(parent):
    """Child adjacency lists from a parent array."""
    n = len(parent)
    ch = [[] for _ in range(n)]
    for v, p in enumerate(parent):
        if p != NO_PARENT:
            ch[p].append(v)
    return ch


def _postorder(parent, root):
    """Vertices in post-order (children before parents)."""
    ch = children_lists(parent)
    order, stack = [], [root]
    while stack:
        v = stack.pop()
        order.append(v)
        stack.extend(ch[v])
    order.reverse()
    return order, ch


def canonical_code(parent, root, marked=None):
    """AHU canonical code of a rooted tree, as bytes.

    If ``marked`` is a vertex index, a marker byte is inserted in that
    vertex's code; two choices of marked vertex give equal codes iff the
    vertices lie in the same orbit of the automorphism group.
    """
    order, ch = _postorder(parent, root)
    code = [b""] * len(parent)
    for v in order:
        mark = _MARK if v == marked else b""
        kids = sorted(code[c] for c in ch[v])
        code[v] = _OPEN + mark + b"".join(kids) + _CLOSE
    return code[root]


def decode_code(code):
    """Parent array (root 0, DFS order) of the canonical representative."""
    parent = []
    stack = []
    for byte in code:
        if byte == _OPEN[0]:
            parent.append(stack[-1] if stack else NO_PARENT)
            stack.append(len(parent) - 1)
        elif byte == _CLOSE[0]:
            stack.pop()
        else:
            raise ValueError("invalid canonical code byte %r" % byte)
    if stack:
        raise ValueError("unbalanced canonical code")
    return parent


def subtree_codes(parent, root):
    """AHU code of the subtree rooted at each vertex."""
    order, ch = _postorder(parent, root)
    code = [b""] * len(parent)
    for v in order:
        kids = sorted(code[c] for c in ch[v])
        code[v] = _OPEN + b"".join(kids) + _CLOSE
    return code


def automorphism_orbits(parent, root):
    """[(representative vertex, orbit size)] under root-preserving automorphisms.

    Two vertices lie in the same orbit iff the sequences of subtree codes
    along their root paths coincide.
    """
    sub = subtree_codes(parent, root)
    keys = {}
    for v in range(len(parent)):
        path = [sub[v]]
        u = v
        while parent[u] != NO_PARENT:
            u = parent[u]
            path.append(sub[u])
        k = b"|".join(reversed(path))
        if k in keys:
            keys[k][1] += 1
        else:
            keys[k] = [v, 1]
    return [(v, cnt) for v, cnt in keys.values()]


def automorphism_orbits_marked(parent, root):
    """Orbit computation by full marked-code recomputation (slow oracle)."""
    keys = {}
    for v in range(len(parent)):
        k = canonical_code(parent, root, marked=v)
        if k in keys:
            keys[k][1] += 1
        else:
            keys[k] = [v, 1]
    return [(v, cnt) for v, cnt in keys.values()]


def join_parents(parent_a, root_a, attach_at, parent_b, root_b):
    """Join tree B to tree A by an edge from B's root to vertex ``attach_at`` of A.

    Returns the parent array of the joined tree, rooted at A's root; B's
    vertices are shifted by len(A).
    """
    na = len(parent_a)
    joined = list(parent_a)
    for v, p in enumerate(parent_b):
        joined.append(attach_at if p == NO_PARENT else p + na)
    joined[root_b + na] = attach_at
    return joined, root_a


def reroot(parent, new_root):
    """Parent array of the same tree re-rooted at ``new_root``.

    Reverses the parent pointers along the path from ``new_root`` up to
    the old root; everything else is unchanged.
    """
    out = list(parent)
    v = new_root
    prev = NO_PARENT
    while v != NO_PARENT:
        nxt = out[v]
        out[v] = prev
        prev = v
        v = nxt
    return out


@dataclass
class RootedTree:
    """Rooted unlabeled tree: parent array plus cached canonical code."""

    parent: list[int]
    root: int = 0
    _code: bytes | None = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        self.parent = list(int(p) for p in self.parent)
        n = len(self.parent)
        if not (0 <= self.root < n) or self.parent[self.root] != NO_PARENT:
            raise ValueError("root must have sentinel parent")
        if sum(1 for p in self.parent if p == NO_PARENT) != 1:
            raise ValueError("exactly one root expected")
        seen, _ = _postorder(self.parent, self.root)
        if len(seen) != n:
            raise ValueError("parent array is not a connected tree")

    def __len__(self):
        return len(self.parent)

    @property
    def canonical_code(self) -> bytes:
        if self._code is None:
            self._code = canonical_code(self.parent, self.root)
        return self._code

    def code_hex(self) -> str:
        return self.canonical_code.hex()

    def children(self):
        return children_lists(self.parent)

    def edges(self):
        """Edges as (child, parent) pairs, one per non-root vertex."""
        return [(v, p) for v, p in enumerate(self.parent) if p != NO_PARENT]

    def degrees(self):
        deg = [0] * len(self.parent)
        for v, p in self.edges():
            deg[v] += 1
            deg[p] += 1
        return deg

    def rerooted(self, new_root: int) -> "RootedTree":
        return RootedTree(reroot(self.parent, new_root), new_root)

    @classmethod
    def singleton(cls) -> "RootedTree":
        return cls([NO_PARENT], 0)

    @classmethod
    def from_code(cls, code: bytes) -> "RootedTree":
        t = cls(decode_code(code), 0)
        t._code = code
        return t


@dataclass
class AgedTree:
    """Rooted tree with vertex ages and per-edge ages.

    ``edge_age[v]`` is the age of the edge from ``v`` to its parent;
    the root's entry is NaN.  A labelling is *legal* when every edge age
    is strictly below both endpoint ages.
    """

    tree: RootedTree
    vertex_age: np.ndarray
    edge_age: np.ndarray

    def __post_init__(self):
        self.vertex_age = np.asarray(self.vertex_age, dtype=float)
        self.edge_age = np.asarray(self.edge_age, dtype=float)
        n = len(self.tree)
        if self.vertex_age.shape != (n,) or self.edge_age.shape != (n,):
            raise ValueError("age arrays must match vertex count")

    def __len__(self):
        return len(self.tree)

    @property
    def root_age(self) -> float:
        return float(self.vertex_age[self.tree.root])

    def is_legal(self) -> bool:
        ok = True
        for v, p in self.tree.edges():
            a = self.edge_age[v]
            ok = ok and (0.0 <= a < min(self.vertex_age[v], self.vertex_age[p]))
        return bool(ok and np.all(self.vertex_age >= 0))

    def shifted(self, delta: float) -> "AgedTree":
        """All vertex and edge ages shifted by ``delta``."""
        ea = self.edge_age + delta
        ea[self.tree.root] = math.nan
        return AgedTree(self.tree, self.vertex_age + delta, ea)

    def to_json(self) -> str:
        ea = [None if math.isnan(a) else a for a in self.edge_age.tolist()]
        return json.dumps(
            {
                "parents": self.tree.parent,
                "root": self.tree.root,
                "vertex_ages": self.vertex_age.tolist(),
                "edge_ages": ea,
            }
        )

    @classmethod
    def from_json(cls, text: str) -> "AgedTree":
        obj = json.loads(text)
        ea = [math.nan if a is None else a for a in obj["edge_ages"]]
        return cls(
            RootedTree(obj["parents"], obj["root"]),
            np.array(obj["vertex_ages"], dtype=float),
            np.array(ea, dtype=float),
        )


def tree_from_edges(n, edges, root):
    """RootedTree from an undirected edge list."""
    adj = [[] for _ in range(n)]
    for a, b in edges:
        adj[a].append(b)
        adj[b].append(a)
    parent = [NO_PARENT] * n
    seen = [False] * n
    seen[root] = True
    stack = [root]
    while stack:
        v = stack.pop()
        for u in adj[v]:
            if not seen[u]:
                seen[u] = True
                parent[u] = v
                stack.append(u)
    if not all(seen):
        raise ValueError("edge list is not a spanning tree")
    return RootedTree(parent, root)
