"""Canonical codes, joins, re-rooting and serialization."""

import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as hst

from steadytree.trees import (
    AgedTree,
    RootedTree,
    automorphism_orbits,
    automorphism_orbits_marked,
    canonical_code,
    decode_code,
    join_parents,
    reroot,
    tree_from_edges,
)

ROOTED_CLASS_COUNTS = {1: 1, 2: 1, 3: 2, 4: 4, 5: 9, 6: 20, 7: 48}


def labeled_rooted_trees(n):
    """All n^(n-1) labeled rooted trees via Prufer sequences x root choice."""
    from steadytree.exact_enum import labeled_trees_prufer

    for edges in labeled_trees_prufer(n):
        for root in range(n):
            yield tree_from_edges(n, edges, root)


@pytest.mark.parametrize("n", range(1, 8))
def test_canonical_code_counts_all_labeled_trees(n):
    codes = {t.canonical_code for t in labeled_rooted_trees(n)}
    assert len(codes) == ROOTED_CLASS_COUNTS[n]


def test_code_decode_roundtrip():
    for n in range(1, 7):
        for t in labeled_rooted_trees(n):
            code = t.canonical_code
            assert canonical_code(decode_code(code), 0) == code


@given(hst.integers(2, 9), hst.randoms(use_true_random=False))
@settings(max_examples=60, deadline=None)
def test_code_invariant_under_relabeling(n, rnd):
    parent = [-1] + [rnd.randrange(v) for v in range(1, n)]
    t = RootedTree(parent, 0)
    perm = list(range(n))
    rnd.shuffle(perm)
    relabeled = [-1] * n
    for v, p in enumerate(parent):
        if p >= 0:
            relabeled[perm[v]] = perm[p]
    t2 = RootedTree(relabeled, perm[0])
    assert t.canonical_code == t2.canonical_code


def test_reroot_preserves_edges():
    t = RootedTree([-1, 0, 0, 1, 1], 0)
    t2 = t.rerooted(3)
    assert set(map(frozenset, t.edges())) == set(map(frozenset, t2.edges()))
    assert t2.parent[3] == -1


def test_join_parents():
    a = RootedTree([-1, 0], 0)
    b = RootedTree([-1], 0)
    joined, root = join_parents(a.parent, a.root, 1, b.parent, b.root)
    assert joined == [-1, 0, 1] and root == 0


@pytest.mark.parametrize("n", range(2, 7))
def test_orbit_methods_agree(n):
    for t in labeled_rooted_trees(n):
        fast = sorted(cnt for _, cnt in automorphism_orbits(t.parent, t.root))
        slow = sorted(cnt for _, cnt in automorphism_orbits_marked(t.parent, t.root))
        assert fast == slow


def test_orbit_star():
    # 4-star rooted at the center: the three leaves form one orbit
    t = RootedTree([-1, 0, 0, 0], 0)
    sizes = sorted(cnt for _, cnt in automorphism_orbits(t.parent, t.root))
    assert sizes == [1, 3]


def test_aged_tree_json_roundtrip():
    t = RootedTree([-1, 0, 1], 0)
    aged = AgedTree(t, np.array([3.0, 2.0, 1.0]),
                    np.array([np.nan, 0.5, 0.25]))
    back = AgedTree.from_json(aged.to_json())
    assert back.tree.parent == t.parent
    np.testing.assert_allclose(back.vertex_age, aged.vertex_age)
    assert np.isnan(back.edge_age[0]) and back.edge_age[2] == 0.25
    assert aged.is_legal()


def test_aged_tree_legality():
    t = RootedTree([-1, 0], 0)
    bad = AgedTree(t, np.array([1.0, 2.0]), np.array([np.nan, 1.5]))
    assert not bad.is_legal()  # edge older than one endpoint


def test_invalid_trees_rejected():
    with pytest.raises(ValueError):
        RootedTree([-1, -1], 0)  # two roots
    with pytest.raises(ValueError):
        RootedTree([1, 0], 0)  # cycle
