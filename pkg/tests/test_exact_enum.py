"""Exact enumeration, stationary masses, age densities, matrix-tree."""

import math
from fractions import Fraction

import numpy as np
import pytest
from scipy.integrate import dblquad, tplquad

from steadytree import exact_enum as ee
from steadytree.closed_forms import cluster_size_pmf
from steadytree.trees import AgedTree, RootedTree, reroot

FIGURE1 = {
    1: ["1/2"],
    2: ["1/8"],
    3: ["1/48", "1/24"],
    4: ["11/768", "11/768", "1/128", "1/384"],
    5: ["19/3840", "19/3840", "19/7680", "1/960", "1/3840",
        "7/2560", "7/2560", "7/1280", "7/2560"],
}


def test_enumeration_counts():
    # rooted tree class counts 1, 1, 2, 4, 9, 20, 48, ...
    expected = [1, 1, 2, 4, 9, 20, 48, 115, 286, 719, 1842, 4766]
    got = [len(ee.enumerate_rooted_trees(n)) for n in range(1, 13)]
    assert got == expected
    with pytest.raises(ValueError):
        ee.enumerate_rooted_trees(13)
    with pytest.raises(ValueError):
        ee.enumerate_rooted_trees(0)


def test_enumeration_is_sorted_and_valid():
    for n in (3, 5, 7):
        trees = ee.enumerate_rooted_trees(n)
        codes = [t.canonical_code for t in trees]
        assert codes == sorted(codes)
        assert all(len(t) == n for t in trees)


def test_figure1_masses_exact():
    for n, wanted in FIGURE1.items():
        got = sorted(ee.class_mass_table(n).values())
        assert got == sorted(Fraction(s) for s in wanted)


def test_specific_masses():
    path2 = RootedTree([-1, 0], 0)
    assert ee.fixed_point_mass(path2) == Fraction(1, 8)
    path3_end = RootedTree([-1, 0, 1], 0)
    path3_mid = RootedTree([1, -1, 1], 1)
    assert ee.fixed_point_mass(path3_end) == Fraction(1, 24)
    assert ee.fixed_point_mass(path3_mid) == Fraction(1, 48)


def test_mass_sums_equal_w():
    for n in range(1, 13):
        assert sum(ee.class_mass_table(n).values()) == cluster_size_pmf(n)


def test_stationary_balance_residuals_zero():
    for n in range(2, 7):
        for t in ee.enumerate_rooted_trees(n):
            assert ee.stationary_balance_residual(t) == 0


def test_balance_residual_sensitivity():
    t = ee.enumerate_rooted_trees(3)[0]
    table = {}
    for n in range(1, 4):
        table.update(ee.class_mass_table(n))
    eps = Fraction(1, 1000)

    def perturbed(code):
        return table[code] + (eps if code == t.canonical_code else 0)

    assert ee.stationary_balance_residual(t, mass=perturbed) != 0
    with pytest.raises(ValueError):
        ee.stationary_balance_residual(RootedTree([-1], 0))


def test_reroot_invariance():
    # masses of the rooted versions of an unrooted tree are proportional
    # to the number of vertices in each root orbit
    from steadytree.trees import automorphism_orbits

    for n in range(2, 7):
        by_unrooted = {}
        for t in ee.enumerate_rooted_trees(n):
            # canonical unrooted key: min canonical code over all roots
            key = min(
                RootedTree(reroot(t.parent, v), v).canonical_code
                for v in range(n)
            )
            mass = ee.fixed_point_mass(t)
            orbit = {}
            for v in range(n):
                rt = RootedTree(reroot(t.parent, v), v)
                orbit[rt.canonical_code] = orbit.get(rt.canonical_code, 0) + 1
            share = mass / orbit[t.canonical_code]
            by_unrooted.setdefault(key, set()).add(share)
        for key, shares in by_unrooted.items():
            assert len(shares) == 1, "re-root invariance broken at %r" % key


def test_four_star_ratio():
    center = RootedTree([-1, 0, 0, 0], 0)  # root is the hub
    leaf = RootedTree([-1, 0, 1, 1], 0)  # root - hub - two leaves
    assert ee.fixed_point_mass(center) == Fraction(1, 384)
    assert ee.fixed_point_mass(leaf) == Fraction(1, 128)
    assert ee.fixed_point_mass(leaf) == 3 * ee.fixed_point_mass(center)


# ---------------------------------------------------------------------------
# age densities
# ---------------------------------------------------------------------------


def test_aged_tree_density_singleton():
    aged = AgedTree(RootedTree([-1], 0), np.array([1.7]), np.array([np.nan]))
    for marginal in ("joint", "vertex"):
        assert ee.aged_tree_density(aged, marginal) == pytest.approx(
            math.exp(-1.7) / 2)
    # with the vertex age integrated out only the class mass w_1 remains
    assert ee.aged_tree_density(aged, "edge") == pytest.approx(0.5)


def test_aged_tree_density_two_path():
    a1, a2, e = 1.2, 0.7, 0.3
    aged = AgedTree(RootedTree([-1, 0], 0), np.array([a1, a2]),
                    np.array([np.nan, e]))
    assert ee.aged_tree_density(aged, "joint") == pytest.approx(
        math.exp(-a1 - a2) / 4)
    assert ee.aged_tree_density(aged, "vertex") == pytest.approx(
        min(a1, a2) * math.exp(-a1 - a2) / 4)
    assert ee.aged_tree_density(aged, "edge") == pytest.approx(
        math.exp(-2 * e) / 4)
    # illegal labelling has zero density, not an error
    bad = AgedTree(RootedTree([-1, 0], 0), np.array([a1, a2]),
                   np.array([np.nan, 0.9]))
    assert ee.aged_tree_density(bad, "joint") == 0.0


def test_edge_marginal_matches_numeric_integration():
    # integrate the joint density over the edge age of a 2-path
    a1, a2 = 1.1, 0.6
    tree = RootedTree([-1, 0], 0)

    def joint(e):
        aged = AgedTree(tree, np.array([a1, a2]), np.array([np.nan, e]))
        return ee.aged_tree_density(aged, "joint")

    from scipy.integrate import quad

    val, _ = quad(joint, 0, min(a1, a2), epsabs=1e-12)
    vertex = ee.aged_tree_density(
        AgedTree(tree, np.array([a1, a2]), np.array([np.nan, 0.1])), "vertex")
    assert val == pytest.approx(vertex, abs=1e-10)


def test_age_weight_product_small_k():
    assert ee.age_weight_product([1.0]) == 1
    assert ee.age_weight_product([2.0, 5.0]) == pytest.approx(4.0)  # 2 a_1
    a = [1.0, 2.0, 9.0]
    assert ee.age_weight_product(a) == pytest.approx(3 * 1 * (1 + 2 * 2))
    with pytest.raises(ValueError):
        ee.age_weight_product([2.0, 1.0])
    with pytest.raises(ValueError):
        ee.age_weight_product([1.0, 1.0])


def test_matrix_tree_identity_exact_rationals():
    a = [Fraction(1, 3), Fraction(1, 2), Fraction(5, 4), Fraction(7, 3)]
    prod = ee.age_weight_product(a)
    det = ee.kirchhoff_total_weight(a, method="det")
    brute = ee.kirchhoff_total_weight(a, method="enumerate")
    assert prod == det == brute
    assert isinstance(det, Fraction)


def test_matrix_tree_identity_floats():
    rng = np.random.default_rng(2)
    for _ in range(25):
        for k in range(2, 7):
            a = np.sort(rng.exponential(1.0, k) + 1e-2)
            prod = ee.age_weight_product(a)
            det = ee.kirchhoff_total_weight(a, method="det")
            brute = ee.kirchhoff_total_weight(a, method="enumerate")
            assert abs(prod - det) <= 1e-10 * abs(det)
            assert abs(prod - brute) <= 1e-10 * abs(brute)


def test_kirchhoff_rooted_totals():
    assert ee.kirchhoff_total_weight([1.0, 2.0]) == pytest.approx(2.0)
    assert ee.kirchhoff_total_weight([1.0, 2.0, 3.0]) == pytest.approx(
        3 * 1 * (1 + 2 * 2))


def test_chamber_integral_exact():
    # the substitution chain reduces the chamber integral of the sorted
    # age density to (2k-2)! / (2^{2k-1} k! (k-1)!) = w_k
    for k in range(1, 9):
        val = Fraction(math.factorial(2 * k - 2),
                       2 ** (2 * k - 1) * math.factorial(k)
                       * math.factorial(k - 1))
        assert val == cluster_size_pmf(k)


def test_chamber_integral_numeric():
    # direct numeric integration of the product-formula density, k = 2, 3
    val2, _ = dblquad(
        lambda a2, a1: ee.age_vector_density([a1, a2]),
        0, 30, lambda a1: a1, 30)
    assert val2 == pytest.approx(float(cluster_size_pmf(2)), abs=1e-6)
    val3, _ = tplquad(
        lambda a3, a2, a1: ee.age_vector_density([a1, a2, a3]),
        0, 25, lambda a1: a1, 25, lambda a1, a2: a2, 25)
    assert val3 == pytest.approx(float(cluster_size_pmf(3)), abs=1e-5)


def test_export_class_table(tmp_path):
    out = tmp_path / "classes.csv"
    ee.export_class_table(4, out)
    lines = out.read_text().strip().splitlines()
    assert lines[0] == "n,canonical_code,mass_num,mass_den"
    assert len(lines) == 1 + 1 + 1 + 2 + 4
    # codes decode back to trees of the right size
    from steadytree.trees import decode_code

    for row in lines[1:]:
        n, code_hex, num, den = row.split(",")
        assert len(decode_code(bytes.fromhex(code_hex))) == int(n)
