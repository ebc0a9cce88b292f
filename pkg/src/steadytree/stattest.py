"""Goodness-of-fit machinery for the verification suites.

Special functions used by the tests (regularized incomplete gamma, erf,
normal and Kolmogorov tails) are implemented here directly so that no
test outcome depends on an external statistics library.  Gating tests run
at alpha = 0.001 on fixed seeds; a failed gate is retried once on a
second fixed seed (two-seed rule) before it counts as a failure.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "TestReport",
    "GATE_ALPHA",
    "ln_gamma",
    "reg_gamma_p",
    "reg_gamma_q",
    "erf",
    "erfc",
    "normal_cdf",
    "gamma_cdf",
    "chi2_sf",
    "chi2_critical",
    "kolmogorov_sf",
    "ks_critical",
    "chi_square_test",
    "chi_square_two_sample",
    "ks_test",
    "ks_two_sample",
    "poisson_field_test",
    "pool_counts",
    "run_gate",
    "reports_to_jsonl",
    "reports_to_markdown",
]

GATE_ALPHA = 1e-3


@dataclass
class TestReport:
    """Outcome of one statistical check."""

    name: str
    statistic: float
    passed: bool
    p_value: float | None = None
    threshold: float | None = None
    sample_size: int | None = None
    metadata: dict = field(default_factory=dict)

    def to_json(self) -> str:
        d = dict(self.__dict__)
        d["metadata"] = {k: _plain(v) for k, v in self.metadata.items()}
        return json.dumps(d)


def _plain(v):
    if isinstance(v, (np.integer,)):
        return int(v)
    if isinstance(v, (np.floating,)):
        return float(v)
    if isinstance(v, np.ndarray):
        return v.tolist()
    return v


# ---------------------------------------------------------------------------
# special functions (Lanczos log-gamma, series / continued-fraction
# incomplete gamma, Abramowitz-Stegun style erf via incomplete gamma)
# ---------------------------------------------------------------------------

_LANCZOS = (
    76.18009172947146,
    -86.50532032941677,
    24.01409824083091,
    -1.231739572450155,
    0.1208650973866179e-2,
    -0.5395239384953e-5,
)


def ln_gamma(x: float) -> float:
    """log Gamma(x) for x > 0 (Lanczos approximation)."""
    y = x
    tmp = x + 5.5
    tmp -= (x + 0.5) * math.log(tmp)
    ser = 1.000000000190015
    for c in _LANCZOS:
        y += 1.0
        ser += c / y
    return -tmp + math.log(2.5066282746310005 * ser / x)


def _gamma_p_series(a: float, x: float) -> float:
    ap = a
    summ = 1.0 / a
    delta = summ
    for _ in range(10000):
        ap += 1.0
        delta *= x / ap
        summ += delta
        if abs(delta) < abs(summ) * 1e-16:
            break
    return summ * math.exp(-x + a * math.log(x) - ln_gamma(a))


def _gamma_q_contfrac(a: float, x: float) -> float:
    tiny = 1e-300
    b = x + 1.0 - a
    c = 1.0 / tiny
    d = 1.0 / b
    h = d
    for i in range(1, 10000):
        an = -i * (i - a)
        b += 2.0
        d = an * d + b
        if abs(d) < tiny:
            d = tiny
        c = b + an / c
        if abs(c) < tiny:
            c = tiny
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < 1e-16:
            break
    return h * math.exp(-x + a * math.log(x) - ln_gamma(a))


def reg_gamma_p(a: float, x: float) -> float:
    """Regularized lower incomplete gamma P(a, x)."""
    if x < 0 or a <= 0:
        raise ValueError("need x >= 0 and a > 0")
    if x == 0.0:
        return 0.0
    if x < a + 1.0:
        return _gamma_p_series(a, x)
    return 1.0 - _gamma_q_contfrac(a, x)


def reg_gamma_q(a: float, x: float) -> float:
    """Regularized upper incomplete gamma Q(a, x) = 1 - P(a, x)."""
    if x < 0 or a <= 0:
        raise ValueError("need x >= 0 and a > 0")
    if x == 0.0:
        return 1.0
    if x < a + 1.0:
        return 1.0 - _gamma_p_series(a, x)
    return _gamma_q_contfrac(a, x)


def erf(x: float) -> float:
    if x == 0.0:
        return 0.0
    v = reg_gamma_p(0.5, x * x)
    return v if x > 0 else -v


def erfc(x: float) -> float:
    return 1.0 - erf(x)


def normal_cdf(x: float) -> float:
    return 0.5 * erfc(-x / math.sqrt(2.0))


def gamma_cdf(x: float, shape: float, rate: float = 1.0) -> float:
    if x <= 0:
        return 0.0
    return reg_gamma_p(shape, rate * x)


def chi2_sf(x: float, df: int) -> float:
    """Upper tail of the chi-square distribution."""
    return reg_gamma_q(df / 2.0, x / 2.0)


def chi2_critical(df: int, alpha: float) -> float:
    """Upper alpha critical value, by bisection on the survival function."""
    lo, hi = 0.0, max(10.0, 4.0 * df)
    while chi2_sf(hi, df) > alpha:
        hi *= 2.0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if chi2_sf(mid, df) > alpha:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def kolmogorov_sf(y: float) -> float:
    """Tail of the Kolmogorov distribution, Q(y) = 2 sum (-1)^{r-1} e^{-2 r^2 y^2}."""
    if y < 1.1e-16:
        return 1.0
    total, sign = 0.0, 1.0
    for r in range(1, 200):
        term = math.exp(-2.0 * (r * y) ** 2)
        total += sign * term
        if term < 1e-18:
            break
        sign = -sign
    return max(0.0, min(1.0, 2.0 * total))


def ks_critical(alpha: float) -> float:
    """Asymptotic c(alpha) with P(D_n > c/sqrt(n)) = alpha."""
    return math.sqrt(-0.5 * math.log(alpha / 2.0))


# ---------------------------------------------------------------------------
# tests
# ---------------------------------------------------------------------------


def merge_groups(expected, min_expected: float = 5.0):
    """Index groups merging the smallest expected cells until every group
    reaches ``min_expected`` (or one group remains)."""
    groups = [[i] for i in range(len(expected))]
    totals = [float(e) for e in expected]
    while len(groups) > 1 and min(totals) < min_expected:
        i = totals.index(min(totals))
        gi, ti = groups.pop(i), totals.pop(i)
        j = totals.index(min(totals))
        groups[j] = groups[j] + gi
        totals[j] += ti
    return groups


def pool_counts(observed, expected, min_expected: float = 5.0):
    """Pool cells until every expected count is >= min_expected."""
    observed = np.asarray(observed, dtype=float)
    expected = np.asarray(expected, dtype=float)
    if observed.shape != expected.shape:
        raise ValueError("observed and expected must have equal length")
    groups = merge_groups(expected, min_expected)
    obs = np.array([observed[g].sum() for g in groups])
    exp = np.array([expected[g].sum() for g in groups])
    return obs, exp


def chi_square_test(observed, expected_probs, alpha: float = GATE_ALPHA,
                    name: str = "chi_square", min_expected: float = 5.0,
                    metadata=None) -> TestReport:
    """Pearson goodness-of-fit against fully specified cell probabilities.

    ``expected_probs`` must cover all mass (include an explicit tail
    bucket); cells with small expected counts are pooled to
    ``min_expected``.
    """
    observed = np.asarray(observed, dtype=float)
    probs = np.asarray(expected_probs, dtype=float)
    n = observed.sum()
    if n < 1:
        raise ValueError("need at least one observation")
    if not math.isclose(float(probs.sum()), 1.0, rel_tol=0, abs_tol=1e-9):
        raise ValueError("expected probabilities must sum to 1 (add a tail bucket)")
    obs, exp = pool_counts(observed, probs * n, min_expected)
    if len(obs) < 2:
        raise ValueError("degenerate single-cell layout")
    stat = float(np.sum((obs - exp) ** 2 / exp))
    df = len(obs) - 1
    p = chi2_sf(stat, df)
    md = {"df": df, "cells": len(obs)}
    md.update(metadata or {})
    return TestReport(name, stat, p >= alpha, p_value=p,
                      threshold=chi2_critical(df, alpha),
                      sample_size=int(n), metadata=md)


def chi_square_two_sample(counts_a, counts_b, alpha: float = GATE_ALPHA,
                          name: str = "chi_square_2s",
                          min_expected: float = 5.0, metadata=None) -> TestReport:
    """Two-sample homogeneity chi-square on a shared cell layout."""
    a = np.asarray(counts_a, dtype=float)
    b = np.asarray(counts_b, dtype=float)
    if a.shape != b.shape:
        raise ValueError("count vectors must have equal length")
    na, nb = a.sum(), b.sum()
    pooled = (a + b) / (na + nb)
    groups = merge_groups(pooled * min(na, nb), min_expected)
    a = np.array([a[g].sum() for g in groups])
    b = np.array([b[g].sum() for g in groups])
    pp = (a + b) / (na + nb)
    ea, eb = pp * na, pp * nb
    stat = float(np.sum((a - ea) ** 2 / ea) + np.sum((b - eb) ** 2 / eb))
    df = len(a) - 1
    p = chi2_sf(stat, df)
    md = {"df": df, "cells": len(a)}
    md.update(metadata or {})
    return TestReport(name, stat, p >= alpha, p_value=p,
                      threshold=chi2_critical(df, alpha),
                      sample_size=int(na + nb), metadata=md)


def ks_test(samples, cdf, alpha: float = GATE_ALPHA, name: str = "ks",
            metadata=None) -> TestReport:
    """One-sample Kolmogorov-Smirnov against a continuous cdf."""
    x = np.sort(np.asarray(samples, dtype=float))
    n = len(x)
    if n < 10:
        raise ValueError("need at least 10 samples")
    f = np.array([cdf(v) for v in x], dtype=float)
    if np.any(np.diff(f) < -1e-12) or np.any(f < -1e-12) or np.any(f > 1 + 1e-12):
        raise ValueError("cdf probe is not monotone into [0, 1]")
    grid = np.arange(1, n + 1) / n
    d = float(max(np.max(grid - f), np.max(f - (grid - 1.0 / n))))
    crit = ks_critical(alpha) / math.sqrt(n)
    p = kolmogorov_sf(d * math.sqrt(n))
    md = dict(metadata or {})
    return TestReport(name, d, d < crit, p_value=p, threshold=crit,
                      sample_size=n, metadata=md)


def ks_two_sample(samples_a, samples_b, alpha: float = GATE_ALPHA,
                  name: str = "ks_2s", metadata=None) -> TestReport:
    """Two-sample Kolmogorov-Smirnov."""
    x = np.sort(np.asarray(samples_a, dtype=float))
    y = np.sort(np.asarray(samples_b, dtype=float))
    n1, n2 = len(x), len(y)
    allv = np.concatenate([x, y])
    cdf1 = np.searchsorted(x, allv, side="right") / n1
    cdf2 = np.searchsorted(y, allv, side="right") / n2
    d = float(np.max(np.abs(cdf1 - cdf2)))
    en = math.sqrt(n1 * n2 / (n1 + n2))
    crit = ks_critical(alpha) / en
    p = kolmogorov_sf(d * en)
    md = dict(metadata or {})
    return TestReport(name, d, d < crit, p_value=p, threshold=crit,
                      sample_size=n1 + n2, metadata=md)


def poisson_field_test(count_matrix, means, alpha: float = GATE_ALPHA,
                       name: str = "poisson_field", metadata=None) -> TestReport:
    """Counts of a point process in disjoint rectangles vs Poisson law.

    ``count_matrix`` has one row per independent replica and one column
    per rectangle; ``means`` are the intensity integrals per rectangle
    for a single replica.  Checks total counts per rectangle against the
    Poisson means (chi-square on cells pooled to expected >= 5) and
    bounds pairwise between-rectangle count correlations.
    """
    counts = np.atleast_2d(np.asarray(count_matrix, dtype=float))
    means = np.asarray(means, dtype=float)
    reps, nrect = counts.shape
    if nrect != len(means) or nrect == 0:
        raise ValueError("count columns must match the rectangle grid")
    totals = counts.sum(axis=0)
    exp = means * reps
    obs_p, exp_p = pool_counts(totals, exp, 5.0)
    stat = float(np.sum((obs_p - exp_p) ** 2 / exp_p))
    df = len(obs_p)  # means are fixed, no normalization constraint
    p = chi2_sf(stat, df)
    ok = p >= alpha
    max_corr = 0.0
    if reps >= 10 and nrect >= 2:
        sd = counts.std(axis=0)
        use = sd > 0
        if use.sum() >= 2:
            cm = np.corrcoef(counts[:, use].T)
            off = cm[~np.eye(use.sum(), dtype=bool)]
            max_corr = float(np.max(np.abs(off)))
            npairs = use.sum() * (use.sum() - 1) / 2
            # normal bound on empirical correlations, Bonferroni over pairs
            z = math.sqrt(2.0) * _erfinv(1.0 - alpha / npairs)
            ok = ok and max_corr < z / math.sqrt(reps)
    md = {"df": df, "max_abs_corr": max_corr, "replicas": reps}
    md.update(metadata or {})
    return TestReport(name, stat, ok, p_value=p,
                      threshold=chi2_critical(df, alpha),
                      sample_size=int(totals.sum()), metadata=md)


def _erfinv(y: float) -> float:
    if not -1.0 < y < 1.0:
        raise ValueError("erfinv domain is (-1, 1)")
    lo, hi = -10.0, 10.0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if erf(mid) < y:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def run_gate(make_report, seeds=(20260809, 987654321)):
    """Two-seed gating rule: rerun a failed gate once on the backup seed.

    ``make_report`` maps a seed to a TestReport.  Returns the accepted
    report with retry provenance recorded in its metadata.
    """
    first = make_report(seeds[0])
    first.metadata.setdefault("seed", seeds[0])
    if first.passed or len(seeds) < 2:
        return first
    second = make_report(seeds[1])
    second.metadata.setdefault("seed", seeds[1])
    second.metadata["retry_of_seed"] = seeds[0]
    second.metadata["first_statistic"] = first.statistic
    return second


def reports_to_jsonl(reports, path) -> None:
    with open(path, "w") as fh:
        for r in reports:
            fh.write(r.to_json() + "\n")


def reports_to_markdown(reports, title: str = "Verification report") -> str:
    lines = ["# %s" % title, "", "| name | statistic | p | pass |", "|---|---|---|---|"]
    for r in reports:
        pv = "-" if r.p_value is None else "%.4g" % r.p_value
        lines.append("| %s | %.6g | %s | %s |" % (r.name, r.statistic, pv,
                                                  "PASS" if r.passed else "FAIL"))
    return "\n".join(lines) + "\n"
