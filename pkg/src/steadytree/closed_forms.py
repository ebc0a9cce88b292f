"""Closed-form laws of the steady state cluster growth process.

Exact values are returned as ``fractions.Fraction``; everything else is
binary64.  Size-distribution conventions used throughout the package:

* ``w_k = (2/k) C(2k-2, k-1) 4^{-k}`` with generating function
  ``W(z) = 1 - sqrt(1-z)``,
* survival time of a size-k cluster has cdf ``1 - sech^{2k}(x/2)``,
* the stationary cluster age density is ``(1/2) sech^2(x/2)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache

import numpy as np
from scipy.integrate import quad

__all__ = [
    "ConditionalKernel",
    "QuadratureError",
    "cluster_size_pmf",
    "cluster_size_pmf_float",
    "w_float_array",
    "w_tail",
    "size_gf",
    "hitting_prob",
    "explosion_cdf",
    "explosion_cdf_mixture",
    "expected_time_to_explosion",
    "conditional_expected_size",
    "survival_size_gf",
    "survival_coeffs",
    "stationary_survival_coeffs",
    "conditioned_size_pmf",
    "conditioned_size_pmf_table",
    "jump_count_pmf",
    "jump_joint_gf",
    "expected_jumps_given_size",
    "degree_joint_gf",
    "root_degree_pmf",
    "size_pmf_given_age",
    "levy_jump_density",
    "laplace_exponent",
    "legendre_p",
    "transfer_apply",
    "transfer_eigenvalue",
    "expected_generation_size",
]


class QuadratureError(RuntimeError):
    """Adaptive quadrature failed to reach the requested tolerance."""


# ---------------------------------------------------------------------------
# size distribution w and hitting probabilities
# ---------------------------------------------------------------------------


def cluster_size_pmf(k: int) -> Fraction:
    """Stationary cluster-size mass w_k, exact."""
    if k < 1:
        raise ValueError("size must be a positive integer")
    return Fraction(2 * math.comb(2 * k - 2, k - 1), k * 4**k)


def cluster_size_pmf_float(k: int) -> float:
    # stable for large k via log-gamma
    return math.exp(
        math.log(2.0)
        + math.lgamma(2 * k - 1)
        - math.lgamma(k)
        - math.lgamma(k + 1)
        - k * math.log(4.0)
    )


@lru_cache(maxsize=None)
def _w_array_cached(n: int) -> tuple:
    w = np.empty(n + 1)
    w[0] = 0.0
    if n >= 1:
        w[1] = 0.5
    for k in range(1, n):
        w[k + 1] = w[k] * (2 * k - 1) / (2 * k + 2)
    w.setflags(write=False)
    return (w,)


def w_float_array(n: int) -> np.ndarray:
    """Read-only float array [0, w_1, ..., w_n]."""
    return _w_array_cached(n)[0]


def w_tail(n: int) -> float:
    """P(size >= n) = C(2n-2, n-1) 4^{1-n}, stable for large n."""
    if n <= 1:
        return 1.0
    return math.exp(
        math.lgamma(2 * n - 1)
        - 2 * math.lgamma(n)
        + (1 - n) * math.log(4.0)
    )


def size_gf(z: float) -> float:
    """W(z) = 1 - sqrt(1-z) on [0, 1]."""
    if not 0.0 <= z <= 1.0:
        raise ValueError("z must lie in [0, 1]")
    return 1.0 - math.sqrt(1.0 - z)


def hitting_prob(r: int) -> Fraction:
    """Probability that the free growth process ever has size r, exact."""
    if r < 1:
        raise ValueError("size must be a positive integer")
    return Fraction(math.comb(2 * r - 2, r - 1) * 4, 4**r)


# ---------------------------------------------------------------------------
# explosion times
# ---------------------------------------------------------------------------


def explosion_cdf(k: int, x: float) -> float:
    """P(next explosion < x | current size k) = 1 - sech^{2k}(x/2)."""
    if k < 1:
        raise ValueError("size must be a positive integer")
    if x < 0:
        raise ValueError("time must be non-negative")
    return -math.expm1(-2.0 * k * _logcosh(x / 2.0))


def explosion_cdf_mixture(x: float) -> float:
    """P(theta_1 < x) for the stationary process: tanh(x/2)."""
    if x < 0:
        raise ValueError("time must be non-negative")
    return math.tanh(x / 2.0)


def expected_time_to_explosion(k: int) -> float:
    """e_k = 4^k / (k C(2k, k)); e_1 = 2 and sum_k e_k w_k = 2 log 2."""
    if k < 1:
        raise ValueError("size must be a positive integer")
    return float(Fraction(4**k, k * math.comb(2 * k, k)))


def _logcosh(x: float) -> float:
    ax = abs(x)
    return ax + math.log1p(math.exp(-2.0 * ax)) - math.log(2.0)


def _coth(x: float) -> float:
    return 1.0 / math.tanh(x)


# ---------------------------------------------------------------------------
# conditioning on the next explosion time
# ---------------------------------------------------------------------------

SURVIVE = "survive_past_t"
EXPLODE = "explode_at_t"


@dataclass(frozen=True)
class ConditionalKernel:
    """Conditioning data: observe at time s, condition on the next
    explosion being after (``survive_past_t``) or exactly at
    (``explode_at_t``) time t.  ``stationary`` selects the stationary
    process started from its equilibrium law instead of a singleton."""

    s: float
    t: float
    mode: str = SURVIVE
    stationary: bool = False

    def __post_init__(self):
        if not 0.0 <= self.s < self.t:
            raise ValueError("need 0 <= s < t")
        if self.mode not in (SURVIVE, EXPLODE):
            raise ValueError("unknown conditioning mode %r" % (self.mode,))


def conditional_expected_size(kern: ConditionalKernel) -> float:
    """Expected size at time s under the kernel's conditioning."""
    s, t = kern.s, kern.t
    half = math.tanh((t - s) / 2.0)
    if kern.mode == SURVIVE:
        if kern.stationary:
            return (1.0 / half) / (1.0 + math.exp(-t))
        return math.tanh(t / 2.0) / half
    if kern.stationary:
        return -1.0 + (1.0 / half) * (_coth(t - s) + math.tanh(t / 2.0))
    return -1.0 + (1.0 / half) * (
        _coth(t - s) + 2.0 * math.tanh(t / 2.0) - _coth(t)
    )


def survival_size_gf(z: float, t: float, stationary: bool = False,
                     normalized: bool = True) -> float:
    """Generating function of the size at time t on the no-explosion event.

    Non-stationary: E(z^{|C_1(t)|} ; t_inf > t), which normalizes to
    z / (1 + tanh(t/2) sqrt(1-z))^2.  Stationary: the analogue for the
    equilibrium process, normalizing to
    (1 - sqrt(1-z)) / (1 + tanh(t/2) sqrt(1-z)).
    """
    if not 0.0 <= z <= 1.0:
        raise ValueError("z must lie in [0, 1]")
    if t < 0:
        raise ValueError("time must be non-negative")
    u = math.sqrt(1.0 - z)
    th = math.tanh(t / 2.0)
    if stationary:
        val = (1.0 - u) / (1.0 + th * u)
        if normalized:
            return val
        return val * (1.0 - th)
    val = z / (1.0 + th * u) ** 2
    if normalized:
        return val
    return val / math.cosh(t / 2.0) ** 2


def survival_coeffs(kmax: int, s: float) -> np.ndarray:
    """c_k = P(t_inf > s and |C_1(s)| = k) for k = 0..kmax.

    Power-series coefficients of z / (cosh(s/2) + sqrt(1-z) sinh(s/2))^2,
    extracted by the reciprocal-series recurrence applied to the
    sqrt(1-z) binomial series.  All recurrence terms are positive, so the
    extraction is forward-stable for every s >= 0.
    """
    if s < 0:
        raise ValueError("time must be non-negative")
    d = math.sinh(s / 2.0)
    w = w_float_array(max(kmax, 1))
    q = np.empty(max(kmax, 1))
    q[0] = math.exp(-s / 2.0)
    for n in range(1, kmax):
        q[n] = q[0] * d * float(np.dot(w[1 : n + 1], q[n - 1 :: -1]))
    c = np.zeros(kmax + 1)
    for k in range(1, kmax + 1):
        c[k] = float(np.dot(q[:k], q[k - 1 :: -1]))
    return c


def stationary_survival_coeffs(kmax: int, s: float) -> np.ndarray:
    """h_k = P(theta_1 > s and |C(s)| = k) for the stationary process."""
    c = survival_coeffs(kmax, s)
    g = np.zeros(kmax + 1)
    g[0] = 1.0
    for n in range(1, kmax + 1):
        g[n] = -0.5 * (c[n] + float(np.dot(g[1:n], g[n - 1 : 0 : -1])))
    h = -g
    h[0] = 0.0
    return h


def conditioned_size_pmf(k: int, kern: ConditionalKernel) -> float:
    """P(size at time s = k) under the kernel's conditioning."""
    return float(conditioned_size_pmf_table(k, kern)[k])


def conditioned_size_pmf_table(kmax: int, kern: ConditionalKernel) -> np.ndarray:
    """Conditioned size pmf for k = 0..kmax (index 0 is zero)."""
    if kmax < 1:
        raise ValueError("need kmax >= 1")
    s, t = kern.s, kern.t
    tau = t - s
    base = (
        stationary_survival_coeffs(kmax, s)
        if kern.stationary
        else survival_coeffs(kmax, s)
    )
    ks = np.arange(kmax + 1)
    tilt = np.exp(-2.0 * ks * _logcosh(tau / 2.0))
    if kern.mode == SURVIVE:
        if kern.stationary:
            norm = 1.0 - math.tanh(t / 2.0)
        else:
            norm = 1.0 / math.cosh(t / 2.0) ** 2
        return base * tilt / norm
    tilt = tilt * ks * math.tanh(tau / 2.0)
    if kern.stationary:
        norm = 0.5 / math.cosh(t / 2.0) ** 2
    else:
        norm = math.tanh(t / 2.0) / math.cosh(t / 2.0) ** 2
    return base * tilt / norm


# ---------------------------------------------------------------------------
# jump counting
# ---------------------------------------------------------------------------


def jump_count_pmf(n: int) -> Fraction:
    """Stationary law of the jumps seen since the last fire:
    1 / ((n+1)(n+2))."""
    if n < 0:
        raise ValueError("count must be non-negative")
    return Fraction(1, (n + 1) * (n + 2))


def jump_joint_gf(z: float, x: float) -> float:
    """E(z^size x^jumps) for the stationary process."""
    if not 0.0 <= z <= 1.0 or not 0.0 <= x <= 1.0:
        raise ValueError("arguments must lie in [0, 1]")
    wz = size_gf(z)
    if x == 0.0:
        return wz - wz * wz / 2.0
    if x == 1.0:
        return wz
    return (wz + (1.0 - x) / x * math.log1p(-x * wz)) / x


def expected_jumps_given_size(k: int) -> Fraction:
    """E(jumps since last fire | size k) = 1/(2 k w_k) - 1, exact."""
    return 1 / (2 * k * cluster_size_pmf(k)) - 1


# ---------------------------------------------------------------------------
# root degree
# ---------------------------------------------------------------------------


def degree_joint_gf(z: float, s: float, root_age: float | None = None) -> float:
    """E(z^size s^{root degree}), optionally given the root age.

    Given root age x the law is the offspring tree of the age-typed
    branching description; without it the root age is mixed over the
    equilibrium age density (1/2) sech^2(x/2).
    """
    if not 0.0 <= z <= 1.0:
        raise ValueError("z must lie in [0, 1]")
    u = math.sqrt(1.0 - z)
    if root_age is not None:
        th = math.tanh(root_age / 2.0)
        return z * (1.0 + th) ** (2.0 * (s - 1.0)) / (1.0 + th * u) ** (2.0 * s)
    a = (1.0 + u) / 2.0
    eps = 2.0 * s - 1.0
    la = math.log(a)
    if abs(eps) < 1e-7:
        # removable singularity at s = 1/2
        return -2.0 * a * la * (1.0 + eps * la / 2.0)
    return 2.0 * (a ** (2.0 - 2.0 * s) - a) / eps


def root_degree_pmf(d: int, tol: float = 1e-12) -> float:
    """Marginal root-degree law: Poisson(2 log(1+U)) mixed over U~U(0,1)."""
    if d < 0:
        raise ValueError("degree must be non-negative")
    lfac = math.lgamma(d + 1)

    def integrand(u):
        m = 2.0 * math.log1p(u)
        if m == 0.0:
            return 1.0 if d == 0 else 0.0
        return math.exp(-m + d * math.log(m) - lfac)

    val, err = quad(integrand, 0.0, 1.0, epsabs=tol, limit=200)
    if err > 100 * tol:
        raise QuadratureError("root_degree_pmf error estimate %g" % err)
    return val


def size_pmf_given_age(k: int, x: float) -> float:
    """P(size = k | root age x): coefficients of z/(1+tanh(x/2) sqrt(1-z))^2.

    This is the non-stationary survival law at time x, normalized.
    """
    c = survival_coeffs(k, x)
    return float(c[k]) * math.cosh(x / 2.0) ** 2


# ---------------------------------------------------------------------------
# the explosion subordinator
# ---------------------------------------------------------------------------


def levy_jump_density(s: float) -> float:
    """Jump density e^s / (2 sqrt(pi) (e^s - 1)^{3/2}) of the comparison
    subordinator, s > 0."""
    if s <= 0:
        raise ValueError("jump size must be positive")
    return math.exp(s - 1.5 * (s + math.log(-math.expm1(-s)))) / (2.0 * math.sqrt(math.pi))


def laplace_exponent(lam: float) -> float:
    """Phi(lambda) = Gamma(lambda + 1/2) / Gamma(lambda), lambda > 0.

    This is the exponent of the subordinator with the jump density
    handled by :func:`levy_jump_density`: the pair satisfies
    Phi(lambda) = integral of (1 - e^{-lambda s}) against the jump
    measure (checked by quadrature in the tests), and Phi'(0) equals the
    sqrt-clock drift sqrt(pi) of the log-size process.
    """
    if lam <= 0:
        raise ValueError("argument must be positive")
    return math.exp(math.lgamma(lam + 0.5) - math.lgamma(lam))


# ---------------------------------------------------------------------------
# generation transfer operator
# ---------------------------------------------------------------------------


def legendre_p(n: int, x):
    """Legendre polynomial P_n, normalized by P_n(1) = 1."""
    x = np.asarray(x, dtype=float)
    if n == 0:
        return np.ones_like(x) if x.ndim else 1.0
    p_prev, p = np.ones_like(x), x.copy()
    for m in range(1, n):
        p_prev, p = p, ((2 * m + 1) * x * p - m * p_prev) / (m + 1)
    return p if p.ndim else float(p)


_ATANH_CLIP = 19.0  # tanh(19) is 1 - 6e-17; beyond this sech^2 underflows


def transfer_apply(f, s: float, tol: float = 1e-10) -> float:
    """Apply the generation transfer kernel: integral over [0,1] of
    2 arctanh(s ^ t) f(t) dt.

    Split at the kink t = s; the arctanh endpoint singularity at t = 1 is
    removed by the substitution t = tanh(u).
    """
    if not 0.0 <= s <= 1.0:
        raise ValueError("s must lie in [0, 1]")
    if s == 0.0:
        return 0.0
    upper = _ATANH_CLIP if s >= 1.0 else min(math.atanh(s), _ATANH_CLIP)
    val, err = quad(
        lambda u: u * f(math.tanh(u)) / math.cosh(u) ** 2,
        0.0,
        upper,
        epsabs=tol / 4,
        epsrel=1e-13,
        limit=400,
    )
    total, etotal = 2.0 * val, 2.0 * err
    if s < 1.0:
        atanh_s = math.atanh(s)
        val, err = quad(f, s, 1.0, epsabs=tol / 4, epsrel=1e-13, limit=400)
        total += 2.0 * atanh_s * val
        etotal += 2.0 * atanh_s * err
    if etotal > tol:
        raise QuadratureError("transfer_apply error estimate %g > %g" % (etotal, tol))
    return total


def transfer_eigenvalue(n: int) -> Fraction:
    """n-th eigenvalue 1/(n(2n-1)) of the transfer kernel (eigenfunction
    P_{2n-1})."""
    if n < 1:
        raise ValueError("index must be a positive integer")
    return Fraction(1, n * (2 * n - 1))


def expected_generation_size(k: int, tol: float = 1e-12) -> float:
    """Expected number of vertices at distance exactly k from the root:
    sum_i (4i-1) w_i^2 / (i(2i-1))^k, in (3/4, 3/4 + 6^{-k}/4]."""
    if k < 0:
        raise ValueError("generation must be non-negative")
    if k == 0:
        return 1.0
    total = 0.0
    w = 0.5  # w_1
    i = 1
    while True:
        total += (4 * i - 1) * w * w / (i * (2 * i - 1)) ** k
        # tail bound: (4i-1) w_i^2 <= 1/(pi i(i-1)) for i >= 2, summable to
        # 1/(pi I), and the geometric factor is monotone in i
        tail = (1.0 / (math.pi * i)) / ((i + 1) * (2 * i + 1)) ** k
        if tail < tol:
            return total
        w = w * (2 * i - 1) / (2 * i + 2)
        i += 1
        if i > 10**7:
            raise QuadratureError("generation-size series did not converge")
