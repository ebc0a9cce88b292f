"""Acceptance verification suites.

Each criterion function returns a list of TestReports; a criterion
passes when all its gating reports pass.  Statistical gates run at
alpha = 0.001 on a fixed seed with one retry on a backup seed (the
two-seed rule); sample sizes are pinned here.

The jump-scaling criterion is special: the target erf(alpha) for
P(J_n <= alpha sqrt(n)) carries a normalization slip - the constructive
limit is erf(alpha/2) (pinned by the exact first-passage reflection
oracle in the tests) - so ``criterion_06`` reports that check honestly
as failing alongside the doubled-normalization check
P(J_n <= 2 alpha sqrt(n)) vs erf(alpha), which passes.
"""

from __future__ import annotations

import math
import time
from collections import Counter

import numpy as np
from scipy.integrate import quad

from . import closed_forms as cf
from . import exact_enum as ee
from . import growth as gr
from . import infinite_ff as ff
from . import meanfield as mf
from . import samplers as sm
from . import stattest as st
from .stattest import TestReport, run_gate
from .trees import RootedTree

GATE_SEEDS = (20260809, 987654321)

FIGURE1_MASSES = {
    1: ["1/2"],
    2: ["1/8"],
    3: ["1/48", "1/24"],
    4: ["11/768", "11/768", "1/128", "1/384"],
    5: ["19/3840", "19/3840", "19/7680", "1/960", "1/3840",
        "7/2560", "7/2560", "7/1280", "7/2560"],
}


def _report(name, passed, statistic=0.0, **meta):
    return TestReport(name, statistic, passed, metadata=meta)


def _class_counts(sampler, n, size_limit, rng):
    counts = Counter()
    for _ in range(n):
        try:
            t = sampler(rng)
            counts[t.canonical_code if len(t) <= size_limit else "tail"] += 1
        except sm.SizeCapExceeded:
            counts["tail"] += 1
    return counts


def _mass_cells(size_limit):
    mass = {}
    for n in range(1, size_limit + 1):
        mass.update(ee.class_mass_table(n))
    codes = sorted(mass)
    probs = [float(mass[c]) for c in codes]
    probs.append(1.0 - float(sum(mass.values())))
    return codes, probs


def _counts_vector(counter, codes):
    return [counter.get(c, 0) for c in codes] + [counter.get("tail", 0)]


# ---------------------------------------------------------------------------


def criterion_01():
    """Exact masses: the 17 displayed values, w_k sums to k = 12, < 1 s."""
    from fractions import Fraction

    ee._classes.clear()
    ee._reps.clear()
    t0 = time.time()
    tables = {n: ee.class_mass_table(n) for n in range(1, 13)}
    elapsed = time.time() - t0
    reports = []
    for n, wanted in FIGURE1_MASSES.items():
        got = sorted(tables[n].values())
        want = sorted(Fraction(s) for s in wanted)
        reports.append(_report("figure1_masses_n%d" % n, got == want,
                               metadata_pass=str(got == want)))
    sums_ok = all(
        sum(tables[n].values()) == cf.cluster_size_pmf(n) for n in range(1, 13)
    )
    reports.append(_report("mass_sums_equal_w_k_to_12", sums_ok))
    reports.append(_report("enumeration_runtime_under_1s", elapsed < 1.0,
                           statistic=elapsed))
    return reports


def criterion_02():
    """Matrix-tree identity at relative 1e-10, k <= 6, 100 vectors, <10 s."""
    rng = np.random.default_rng(GATE_SEEDS[0])
    t0 = time.time()
    worst = 0.0
    for _ in range(100):
        for k in range(1, 7):
            a = np.sort(rng.exponential(1.0, size=k) + 1e-3)
            prod = ee.age_weight_product(a)
            det = ee.kirchhoff_total_weight(a, method="det")
            brute = ee.kirchhoff_total_weight(a, method="enumerate")
            worst = max(worst, abs(prod - det) / abs(det),
                        abs(prod - brute) / abs(brute))
    elapsed = time.time() - t0
    return [
        _report("matrix_tree_identity_rel_error", worst <= 1e-10, statistic=worst),
        _report("matrix_tree_runtime_under_10s", elapsed < 10.0, statistic=elapsed),
    ]


N_LAW = 10**6


def criterion_03():
    """Sampler law equivalence at 1e6 replicas, size <= 5 classes."""
    codes, probs = _mass_cells(5)
    samplers = {
        "rde": lambda rng: sm.sample_rde(rng, size_cap=64),
        "genealogy": lambda rng: sm.sample_genealogy_pair(rng, leaf_cap=64).cluster,
        "mgw": lambda rng: sm.sample_mgw(rng, size_cap=64, edge_ages=False).tree,
    }
    reports = []
    for name, sampler in samplers.items():
        def gate(seed, sampler=sampler, name=name):
            rng = np.random.default_rng(seed)
            counts = _class_counts(sampler, N_LAW, 5, rng)
            return st.chi_square_test(
                _counts_vector(counts, codes), probs,
                name="law_equivalence_%s" % name,
                metadata={"replicas": N_LAW},
            )
        reports.append(run_gate(gate, GATE_SEEDS))
    return reports


def criterion_04():
    """Explosion-time laws at 1e6 replicas."""
    def gate_tinf(seed):
        rng = np.random.default_rng(seed)
        x = gr.bulk_explosion_times(N_LAW, rng)
        return st.ks_test(x, lambda v: math.tanh(v / 2.0) ** 2,
                          name="t_inf_vs_tanh_sq")

    def gate_theta(seed):
        rng = np.random.default_rng(seed)
        x = gr.bulk_stationary_theta1(N_LAW, rng)
        return st.ks_test(x, lambda v: math.tanh(v / 2.0),
                          name="theta1_vs_tanh")

    return [run_gate(gate_tinf, GATE_SEEDS), run_gate(gate_theta, GATE_SEEDS)]


def criterion_05(n: int = 10**5):
    """Age structure given size 5: age sum Gamma(9,1); youngest edge
    Exp(mean 1/5)."""
    def gate_sum(seed):
        rng = np.random.default_rng(seed)
        sums = np.empty(n)
        for i in range(n):
            aged = sm.sample_cluster_given_size(5, rng)
            sums[i] = aged.vertex_age.sum()
        return st.ks_test(sums, lambda v: st.gamma_cdf(v, 9.0),
                          name="age_sum_given_5_vs_gamma9")

    def gate_edge(seed):
        rng = np.random.default_rng(seed)
        youngest = np.empty(n)
        for i in range(n):
            aged = sm.sample_cluster_given_size(5, rng)
            youngest[i] = np.nanmin(aged.edge_age)
        return st.ks_test(youngest, lambda v: -math.expm1(-5.0 * v),
                          name="youngest_edge_given_5_vs_exp")

    return [run_gate(gate_sum, GATE_SEEDS), run_gate(gate_edge, GATE_SEEDS)]


def criterion_06(n_yule: int = 10**5, n_jumps: int = 10**5):
    """Jump statistics: Yule-Simon law of the stationary jump count, and
    the jump-count scaling limit (stated + corrected normalization)."""
    def gate_yule(seed):
        rng = np.random.default_rng(seed)
        snap = gr.bulk_stationary_snapshot(n_yule, rng, count_cap=40)
        nc = snap["jumps"]
        ncap = 30
        probs = [1.0 / ((m + 1) * (m + 2)) for m in range(ncap + 1)]
        probs.append(1.0 - sum(probs))
        obs = [int((nc == m).sum()) for m in range(ncap + 1)]
        obs.append(int(((nc > ncap) | (nc < 0)).sum()))
        return st.chi_square_test(obs, probs, name="jump_counts_vs_yule_simon")

    reports = [run_gate(gate_yule, GATE_SEEDS)]
    rng = np.random.default_rng(GATE_SEEDS[0])
    n_target = 10**4
    j = gr.jumps_to_exceed(n_target, rng, n_jumps)
    sqrt_n = math.sqrt(n_target)
    for alpha in (0.5, 1.0, 2.0):
        stated = float((j <= alpha * sqrt_n).mean())
        target = st.erf(alpha)
        reports.append(TestReport(
            "jumps_scaling_stated_alpha_%g" % alpha,
            stated, abs(stated - target) <= 0.01,
            metadata={"target_erf_alpha": target,
                      "note": "normalization-defect check; the limit is erf(alpha/2)"},
        ))
        corrected = float((j <= 2.0 * alpha * sqrt_n).mean())
        reports.append(TestReport(
            "jumps_scaling_corrected_alpha_%g" % alpha,
            corrected, abs(corrected - target) <= 0.01,
            metadata={"target_erf_alpha": target},
        ))
    return reports


def criterion_07(n: int = 10**5):
    """Doob consistency at s=0.5, t=1 (explode mode)."""
    kern = cf.ConditionalKernel(s=0.5, t=1.0, mode=cf.EXPLODE)
    kmax = 60

    def gate(seed):
        rng = np.random.default_rng(seed)
        sizes = np.empty(n, dtype=np.int64)
        for i in range(n):
            tr = gr.run_conditioned(rng, kern, size_cap=10**6)
            sizes[i] = tr.sizes_after[-1] if len(tr.sizes_after) else 1
            if tr.aborted:
                sizes[i] = 10**6
        pmf = cf.conditioned_size_pmf_table(kmax, kern)
        probs = list(pmf[1:]) + [max(1.0 - pmf[1:].sum(), 1e-12)]
        obs = [int((sizes == k).sum()) for k in range(1, kmax + 1)]
        obs.append(int((sizes > kmax).sum()))
        rep = st.chi_square_test(obs, probs, name="doob_explode_pmf_vs_closed_form")
        mean = sizes[sizes < 10**6].mean()
        se = sizes[sizes < 10**6].std() / math.sqrt(n)
        target = cf.conditional_expected_size(kern)
        z = abs(mean - target) / se
        rep.metadata.update(mean=float(mean), mean_target=target,
                            mean_z=float(z))
        if rep.passed and z >= 3.89:
            return TestReport("doob_explode_mean_vs_formula", z, False,
                              metadata=rep.metadata)
        return rep

    return [run_gate(gate, GATE_SEEDS)]


def criterion_08():
    """Transfer operator: eigenrelations to n=5 at 1e-8 on a 41-point
    grid; generation sizes in the stated band and vs Monte Carlo."""
    grid = np.linspace(0.0, 1.0, 41)
    reports = []
    worst = 0.0
    for nn in range(1, 6):
        lam = float(cf.transfer_eigenvalue(nn))
        sup = max(
            abs(cf.transfer_apply(lambda u: cf.legendre_p(2 * nn - 1, u), float(s))
                - lam * cf.legendre_p(2 * nn - 1, float(s)))
            for s in grid
        )
        worst = max(worst, sup)
    reports.append(_report("transfer_eigenrelations_sup_error", worst < 1e-8,
                           statistic=worst))
    band_ok = all(
        0.75 < cf.expected_generation_size(k) <= 0.75 + 0.25 * 6.0 ** -k
        for k in range(1, 11)
    )
    reports.append(_report("generation_size_band_k_le_10", band_ok))

    def gate_mc(seed):
        rng = np.random.default_rng(seed)
        n = 200_000
        counts = np.zeros((n, 5))
        for i in range(n):
            aged = sm.sample_mgw(rng, size_cap=10**6, max_depth=4,
                                 edge_ages=False)
            parent = aged.tree.parent
            depth = np.zeros(len(parent), dtype=np.int64)
            for v in range(1, len(parent)):
                depth[v] = depth[parent[v]] + 1
            for d in range(5):
                counts[i, d] = np.count_nonzero(depth == d)
        z_worst, detail = 0.0, {}
        for d in range(1, 5):
            mean = counts[:, d].mean()
            se = counts[:, d].std() / math.sqrt(n)
            target = cf.expected_generation_size(d)
            z = abs(mean - target) / se
            z_worst = max(z_worst, z)
            detail["gen%d" % d] = (float(mean), target)
        return TestReport("generation_size_vs_mc", z_worst, z_worst < 3.89,
                          metadata=detail)

    reports.append(run_gate(gate_mc, GATE_SEEDS))
    return reports


def criterion_09(n_chain: int = 10**5, n_root: int = 10**5, n_sb: int = 10**5):
    """Spinal laws: chain invariant cdf tanh^3, root age tanh^2, and the
    spine-forgotten size law vs the size-biased law at x=1."""
    def gate_chain(seed):
        rng = np.random.default_rng(seed)
        chain = sm.spinal_age_chain(rng, n_chain)
        thin = chain[1000::10]  # burn-in and thinning to decorrelate
        return st.ks_test(thin, lambda v: math.tanh(v / 2.0) ** 3,
                          name="spinal_chain_vs_tanh_cubed",
                          metadata={"steps": n_chain, "thin": 10})

    def gate_root(seed):
        rng = np.random.default_rng(seed)
        ages = np.array([sm._draw_spinal_root_age(0.0, rng) for _ in range(n_root)])
        return st.ks_test(ages, lambda v: math.tanh(v / 2.0) ** 2,
                          name="spinal_root_age_vs_tanh_sq")

    def gate_sb(seed):
        rng = np.random.default_rng(seed)
        x = 1.0
        q = 1.0 / math.cosh(x / 2.0) ** 2
        kmax = 40
        sizes = np.empty(n_sb, dtype=np.int64)
        for i in range(n_sb):
            sp = sm.sample_spinal(x, rng, size_cap=10**5)
            sizes[i] = len(sp.aged) if not sp.truncation_flag else 10**5
        w = cf.w_float_array(kmax)
        norm = q / (2.0 * math.sqrt(1.0 - q))
        probs = [k * w[k] * q**k / norm for k in range(1, kmax + 1)]
        probs.append(1.0 - sum(probs))
        obs = [int((sizes == k).sum()) for k in range(1, kmax + 1)]
        obs.append(int((sizes > kmax).sum()))
        return st.chi_square_test(obs, probs, name="spinal_size_biased_x1")

    return [run_gate(gate_chain, GATE_SEEDS), run_gate(gate_root, GATE_SEEDS),
            run_gate(gate_sb, GATE_SEEDS)]


def criterion_10(n: int = 20000, k_cond: int = 200):
    """Local-limit evidence: radius-1 ball of the size-200 cluster vs the
    infinite spinal limit; gate on degree-law total variation < 0.05."""
    def make(seed):
        rng = np.random.default_rng(seed)
        deg_a = np.empty(n, dtype=np.int64)
        ages_a = []
        for i in range(n):
            aged = sm.sample_cluster_given_size(k_cond, rng)
            root = aged.tree.root
            ch = aged.tree.children()[root]
            nb = list(ch)
            deg_a[i] = len(nb)
            ages_a.extend(float(aged.vertex_age[v]) for v in nb)
        deg_b = np.empty(n, dtype=np.int64)
        ages_b = []
        for i in range(n):
            sp = sm.sample_spinal(0.0, rng, max_depth=1, spine_cap=4)
            ch = sp.aged.tree.children()[0]
            deg_b[i] = len(ch)
            ages_b.extend(float(sp.aged.vertex_age[v]) for v in ch)
        return deg_a, ages_a, deg_b, ages_b

    deg_a, ages_a, deg_b, ages_b = make(GATE_SEEDS[0])
    dmax = 9
    ca = [int((deg_a == d).sum()) for d in range(dmax)] + [int((deg_a >= dmax).sum())]
    cb = [int((deg_b == d).sum()) for d in range(dmax)] + [int((deg_b >= dmax).sum())]
    pa = np.array(ca, dtype=float) / n
    pb = np.array(cb, dtype=float) / n
    tv = 0.5 * float(np.abs(pa - pb).sum())
    rep_tv = TestReport("bs_degree_tv_estimate", tv, tv < 0.05,
                        metadata={"cells": dmax + 1, "n": n})
    rep_deg = st.chi_square_two_sample(ca, cb, name="bs_degree_two_sample")
    rep_ages = st.ks_two_sample(ages_a, ages_b, name="bs_neighbor_ages_two_sample")
    rep_deg.metadata["gating"] = False
    rep_ages.metadata["gating"] = False
    return [rep_tv, rep_deg, rep_ages]


def criterion_11(replicas: int = 10**4, proj_replicas: int = 2500):
    """Truncated forest fire consistency for h in {1, 2, 3}."""
    reports = []
    horizon = 4.0
    t_check = 1.0
    astar = 1.0
    # (a) ignition projection Poisson field at fixed root age, h = 1,
    # pooled over replicas (>= 1e4 projected leaf edges)
    rects = [(0, 1, 0, 1), (1, 2, 0, 1), (0, 1, 1, 2), (1, 2, 1, 2),
             (0, 1, 2, 3.5), (1, 2, 2, 3.5), (2, 3, 0, 1.5), (2, 3, 1.5, 4)]

    def mean_rect(t0r, t1r, y0r, y1r):
        f = lambda t: (
            math.tanh(min(y1r, astar + t) / 2.0)
            - math.tanh(min(y0r, astar + t) / 2.0)
            if astar + t > y0r else 0.0
        )
        return quad(f, t0r, t1r, limit=200)[0]

    means = np.array([mean_rect(*rc) for rc in rects])

    def gate_proj(seed):
        counts = np.zeros((proj_replicas, len(rects)))
        n_edges = 0
        for i in range(proj_replicas):
            state = ff.ffh_init(1, seed + i, horizon, root_age=astar)
            pts = ff.ffh_project(state)[()]
            n_edges += len(pts)
            for (t, y) in pts:
                for jr, (t0r, t1r, y0r, y1r) in enumerate(rects):
                    if t0r <= t < t1r and y0r <= y < y1r:
                        counts[i, jr] += 1
        return st.poisson_field_test(counts, means, name="ffh_projection_field",
                                     metadata={"projected_edges": n_edges})

    reports.append(run_gate(gate_proj, GATE_SEEDS))
    # (b) per-height: root-cluster size pmf at t=1 on the truncation-exact
    # cells {1..h} + tail, and root inter-burn times vs tanh^2
    t1 = 1.5
    window = horizon - t1
    norm = math.tanh(window / 2.0) ** 2
    for h in (1, 2, 3):
        def gate_h(seed, h=h):
            sizes = np.empty(replicas, dtype=np.int64)
            inter = []
            for i in range(replicas):
                state = ff.ffh_init(h, seed + i, horizon)
                _, burns, snaps = ff.ffh_run(state, horizon,
                                             snapshot_times=[t_check])
                sizes[i] = snaps[t_check]
                # censor-free renewal increment: condition on an early
                # first burn and an increment within the remaining window
                if burns and burns[0] <= t1 and len(burns) >= 2:
                    delta = burns[1] - burns[0]
                    if delta <= window:
                        inter.append(delta)
            w = cf.w_float_array(h)
            probs = [w[k] for k in range(1, h + 1)]
            probs.append(1.0 - sum(probs))
            obs = [int((sizes == k).sum()) for k in range(1, h + 1)]
            obs.append(int((sizes > h).sum()))
            rep = st.chi_square_test(obs, probs,
                                     name="ffh_root_size_vs_w_h%d" % h,
                                     metadata={"cells": "1..h + tail"})
            rep2 = st.ks_test(inter,
                              lambda v: math.tanh(v / 2.0) ** 2 / norm,
                              name="ffh_root_interburn_h%d" % h)
            if not rep2.passed:
                return rep2
            rep.metadata["interburn_ks"] = rep2.statistic
            return rep
        reports.append(run_gate(gate_h, GATE_SEEDS))
    return reports


def criterion_12(n: int = 10**4):
    """Explosion scaling: the sqrt(size) * remaining-time statistic is
    stationary in the sqrt-size clock (tau = 10 vs tau = 20)."""
    def gate(seed):
        rng = np.random.default_rng(seed)
        a = gr.bulk_explosion_scaling(n, rng, [10.0])[10.0]
        b = gr.bulk_explosion_scaling(n, rng, [20.0])[20.0]
        return st.ks_two_sample(a, b, name="explosion_scaling_tau10_vs_tau20")

    return [run_gate(gate, GATE_SEEDS)]


def criterion_13(seeds: int = 20, horizon: float = 10.0):
    """Mean-field evidence (non-gating): sup_k |v_k - w_k| should fall
    with n for lambda_n = n^(-1/2)."""
    med = {}
    for n in (1000, 10000):
        sups = []
        for s in range(seeds):
            state, _, _ = mf.mf_run(n, n ** -0.5, horizon,
                                    np.random.default_rng(1000 + s),
                                    keep_events=False)
            sups.append(mf.sup_deviation_from_w(
                mf.empirical_size_distribution(state)))
        med[n] = float(np.median(sups))
    decreasing = med[10000] < med[1000]
    rep = TestReport("meanfield_sup_deviation_trend", med[10000], True,
                     metadata={"median_sup": med, "decreasing": decreasing,
                               "gating": False,
                               "flag": None if decreasing else "trend reversal"})
    return [rep]


ALL_CRITERIA = {
    1: criterion_01, 2: criterion_02, 3: criterion_03, 4: criterion_04,
    5: criterion_05, 6: criterion_06, 7: criterion_07, 8: criterion_08,
    9: criterion_09, 10: criterion_10, 11: criterion_11, 12: criterion_12,
    13: criterion_13,
}

SUITES = {
    "figure1": [1],
    "exact": [1, 2],
    "samplers": [3, 5, 9, 10],
    "growth": [4, 6, 7, 12],
    "spectral": [8],
    "ffh": [11],
    "meanfield": [13],
    "all": list(range(1, 14)),
}


def run_suite(name: str, out=print):
    """Run a named suite; returns (reports, all_gates_passed)."""
    if name not in SUITES:
        raise ValueError("unknown suite %r (have %s)" % (name, sorted(SUITES)))
    all_reports = []
    ok = True
    for num in SUITES[name]:
        reports = ALL_CRITERIA[num]()
        for rep in reports:
            gating = rep.metadata.get("gating", True)
            stated_defect = rep.name.startswith("jumps_scaling_stated")
            status = "PASS" if rep.passed else (
                "EXPECTED-FAIL" if stated_defect else
                ("FLAG" if not gating else "FAIL"))
            out("criterion %02d  %-38s %s  stat=%.6g%s" % (
                num, rep.name, status, rep.statistic,
                "" if rep.p_value is None else "  p=%.3g" % rep.p_value))
            if gating and not rep.passed and not stated_defect:
                ok = False
            all_reports.append(rep)
    return all_reports, ok
