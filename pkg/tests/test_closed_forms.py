"""Closed-form laws: exact values, identities, and series extraction.

Generating-function coefficients are checked against an independent
contour-integral (FFT) oracle; the subordinator's Laplace exponent is
checked against direct quadrature of its jump measure.
"""

import math
from fractions import Fraction

import numpy as np
import pytest
from scipy.integrate import quad

from steadytree import closed_forms as cf

# ---------------------------------------------------------------------------
# size distribution
# ---------------------------------------------------------------------------


def test_cluster_size_pmf_values():
    assert cf.cluster_size_pmf(1) == Fraction(1, 2)
    assert cf.cluster_size_pmf(4) == Fraction(5, 128)
    assert cf.cluster_size_pmf(5) == Fraction(7, 256)
    with pytest.raises(ValueError):
        cf.cluster_size_pmf(0)


def test_w_convolution_fixed_point_exact():
    # k w_k = sum_{i<k} i w_i w_{k-i}, exactly, to k = 64
    w = [Fraction(0)] + [cf.cluster_size_pmf(k) for k in range(1, 65)]
    for k in range(2, 65):
        assert k * w[k] == sum(i * w[i] * w[k - i] for i in range(1, k))


def test_w_float_and_tail():
    w = cf.w_float_array(600)
    for k in (1, 2, 10, 300):
        assert w[k] == pytest.approx(float(cf.cluster_size_pmf(k)), rel=1e-12)
    # tail identity P(X >= n) = C(2n-2, n-1) 4^{1-n}, exactly in rationals
    for n in (1, 2, 5, 40):
        exact = 1 - sum(cf.cluster_size_pmf(k) for k in range(1, n))
        assert cf.w_tail(n) == pytest.approx(float(exact), rel=1e-12)
        assert exact == Fraction(math.comb(2 * n - 2, n - 1) * 4, 4**n)


def test_size_gf():
    assert cf.size_gf(0.0) == 0.0
    assert cf.size_gf(1.0) == 1.0
    assert cf.size_gf(0.75) == pytest.approx(0.5)
    # agrees with the truncated series
    z = 0.6
    series = sum(float(cf.cluster_size_pmf(k)) * z**k for k in range(1, 400))
    assert cf.size_gf(z) == pytest.approx(series, abs=1e-10)
    with pytest.raises(ValueError):
        cf.size_gf(1.5)


def test_hitting_prob():
    assert cf.hitting_prob(1) == 1
    assert cf.hitting_prob(2) == Fraction(1, 2)
    assert cf.hitting_prob(3) == Fraction(3, 8)
    # exact convolution p_r = sum p_{r-i} w_i to r = 64
    p = [None] + [cf.hitting_prob(r) for r in range(1, 65)]
    w = [None] + [cf.cluster_size_pmf(k) for k in range(1, 65)]
    for r in range(2, 65):
        assert p[r] == sum(p[r - i] * w[i] for i in range(1, r))
    with pytest.raises(ValueError):
        cf.hitting_prob(0)


# ---------------------------------------------------------------------------
# explosion times
# ---------------------------------------------------------------------------


def test_explosion_cdf():
    for x in (0.0, 0.3, 1.7, 9.0):
        assert cf.explosion_cdf(1, x) == pytest.approx(math.tanh(x / 2) ** 2)
    assert cf.explosion_cdf(7, 0.0) == 0.0
    # mixture: sum_k w_k F_k(x) = tanh(x/2) with the exact tail bound
    for x in (0.4, 1.0, 3.0):
        kcap = 2000
        mix = sum(float(cf.cluster_size_pmf(k)) * cf.explosion_cdf(k, x)
                  for k in range(1, kcap + 1))
        tail = cf.w_tail(kcap + 1)
        assert abs(mix - math.tanh(x / 2)) <= tail + 1e-12


def test_expected_time_to_explosion():
    assert cf.expected_time_to_explosion(1) == 2.0
    assert cf.expected_time_to_explosion(2) == pytest.approx(4.0 / 3.0)
    # e_k w_k = 1/(k(2k-1)) exactly, so the mixture telescopes to 2 log 2
    for k in range(1, 65):
        ek = Fraction(4**k, k * math.comb(2 * k, k))
        assert ek * cf.cluster_size_pmf(k) == Fraction(1, k * (2 * k - 1))
    partial = sum(1.0 / (k * (2 * k - 1)) for k in range(1, 20000))
    assert partial == pytest.approx(2 * math.log(2), abs=1e-4)
    # e_k ~ sqrt(pi/k)
    assert cf.expected_time_to_explosion(5000) == pytest.approx(
        math.sqrt(math.pi / 5000), rel=2e-4)


# ---------------------------------------------------------------------------
# conditioned laws
# ---------------------------------------------------------------------------


def fft_coeffs(fun, kmax, r=0.8, n=8192):
    theta = 2 * np.pi * np.arange(n) / n
    z = r * np.exp(1j * theta)
    c = np.fft.fft(fun(z)) / n
    return (c[: kmax + 1] / r ** np.arange(kmax + 1)).real


@pytest.mark.parametrize("s", [0.3, 1.0, 2.5, 6.0])
def test_survival_coeffs_vs_fft_oracle(s):
    ch, sh = math.cosh(s / 2), math.sinh(s / 2)
    target = fft_coeffs(lambda z: z / (ch + np.sqrt(1 - z) * sh) ** 2, 50)
    got = cf.survival_coeffs(50, s)
    np.testing.assert_allclose(got[1:], target[1:], rtol=2e-8, atol=1e-12)
    h_target = fft_coeffs(
        lambda z: 1 - np.sqrt(1 - (z / (ch + np.sqrt(1 - z) * sh) ** 2)), 50)
    got_h = cf.stationary_survival_coeffs(50, s)
    np.testing.assert_allclose(got_h[1:], h_target[1:], rtol=2e-6, atol=1e-12)


def test_survival_coeff_identities():
    s = 0.8
    c = cf.survival_coeffs(3000, s)
    assert c[1] == pytest.approx(math.exp(-s), rel=1e-12)  # no jump by s
    # partial sums reach F(1,s) = sech^2(s/2) from below, k^{-1/2} tail
    deficit = 1 / math.cosh(s / 2) ** 2 - c.sum()
    assert 0 < deficit < 2.2 * 0.19 / math.sqrt(3000)
    # tilted sum: sum c_k sech^{2k}(tau/2) = sech^2((tau+s)/2)
    tau = 1.1
    q = 1 / math.cosh(tau / 2) ** 2
    lhs = float(np.dot(c, q ** np.arange(3001)))
    assert lhs == pytest.approx(1 / math.cosh((tau + s) / 2) ** 2, abs=1e-12)
    h = cf.stationary_survival_coeffs(100, s)
    assert h[1] == pytest.approx(math.exp(-s) / 2, rel=1e-12)


def test_survival_size_gf():
    assert cf.survival_size_gf(0.37, 0.0) == pytest.approx(0.37)
    assert cf.survival_size_gf(1.0, 2.3) == pytest.approx(1.0)
    assert cf.survival_size_gf(1.0, 2.3, stationary=True) == pytest.approx(1.0)
    # unnormalized values at z=1: survival probabilities
    t = 1.4
    assert cf.survival_size_gf(1.0, t, normalized=False) == pytest.approx(
        1 / math.cosh(t / 2) ** 2)
    assert cf.survival_size_gf(1.0, t, stationary=True, normalized=False) == \
        pytest.approx(1 - math.tanh(t / 2))
    # coefficient of z^1 in the unnormalized gf is e^{-t}
    eps = 1e-5
    deriv = (cf.survival_size_gf(eps, t, normalized=False)) / eps
    assert deriv == pytest.approx(math.exp(-t), abs=1e-4)


def test_conditional_expected_size():
    # started as a singleton, conditioning on survival: value 1 at s=0
    k = cf.ConditionalKernel(s=0.0, t=1.3, mode=cf.SURVIVE)
    assert cf.conditional_expected_size(k) == pytest.approx(1.0)
    # stationary survival at s=0
    k = cf.ConditionalKernel(s=0.0, t=1.3, mode=cf.SURVIVE, stationary=True)
    assert cf.conditional_expected_size(k) == pytest.approx(
        (1 / math.tanh(1.3 / 2)) / (1 + math.exp(-1.3)))
    # explode-at from a singleton: value 1 at s=0 (double-pole formula)
    k = cf.ConditionalKernel(s=0.0, t=0.9, mode=cf.EXPLODE)
    assert cf.conditional_expected_size(k) == pytest.approx(1.0)
    # means agree with the pmf tables
    for kern in (
        cf.ConditionalKernel(0.5, 1.0, cf.SURVIVE),
        cf.ConditionalKernel(0.5, 1.0, cf.EXPLODE),
        cf.ConditionalKernel(0.4, 1.2, cf.SURVIVE, stationary=True),
        cf.ConditionalKernel(0.4, 1.2, cf.EXPLODE, stationary=True),
    ):
        pmf = cf.conditioned_size_pmf_table(6000, kern)
        mean = float(np.dot(np.arange(6001), pmf))
        assert mean == pytest.approx(cf.conditional_expected_size(kern),
                                     rel=1e-6), kern
    with pytest.raises(ValueError):
        cf.ConditionalKernel(s=1.0, t=1.0, mode=cf.SURVIVE)


def test_conditioned_pmf_start_state_and_size_biasing():
    kern_s = cf.ConditionalKernel(s=0.5, t=1.2, mode=cf.SURVIVE)
    kern_e = cf.ConditionalKernel(s=0.5, t=1.2, mode=cf.EXPLODE)
    surv = cf.conditioned_size_pmf_table(200, kern_s)
    expl = cf.conditioned_size_pmf_table(200, kern_e)
    # the explode law is the size-biased survive law (exact ratio identity)
    ks = np.arange(1, 201)
    ratio = expl[1:] / (ks * surv[1:])
    np.testing.assert_allclose(ratio, ratio[0], rtol=1e-12)
    # both sum to 1
    assert cf.conditioned_size_pmf_table(6000, kern_s)[1:].sum() == \
        pytest.approx(1.0, abs=1e-9)
    assert cf.conditioned_size_pmf_table(6000, kern_e)[1:].sum() == \
        pytest.approx(1.0, abs=1e-9)
    # s = 0 degenerates to the singleton start state
    for mode in (cf.SURVIVE, cf.EXPLODE):
        pmf = cf.conditioned_size_pmf_table(5, cf.ConditionalKernel(0.0, 1.0, mode))
        assert pmf[1] == pytest.approx(1.0)
        assert abs(pmf[2:]).max() < 1e-14


def test_conditioned_pmf_tail_asymptotics():
    # survive mode: pmf(k) ~ sech^2(s/2) tanh(s/2) sech^{2k}(tau/2)
    #                        / (sqrt(pi) k^{3/2} sech^2(t/2))
    s, t = 0.5, 1.2
    tau = t - s
    kern = cf.ConditionalKernel(s, t, cf.SURVIVE)
    pmf = cf.conditioned_size_pmf_table(400, kern)
    const = (math.tanh(s / 2) / math.cosh(s / 2) ** 2 * math.cosh(t / 2) ** 2
             / math.sqrt(math.pi))
    for k in (250, 400):
        asym = const * k ** -1.5 * math.exp(-2 * k * math.log(math.cosh(tau / 2)))
        assert pmf[k] == pytest.approx(asym, rel=0.02)


# ---------------------------------------------------------------------------
# jumps and degrees
# ---------------------------------------------------------------------------


def test_jump_count_pmf():
    assert cf.jump_count_pmf(0) == Fraction(1, 2)
    total = sum(cf.jump_count_pmf(n) for n in range(4000))
    assert 1 - total == Fraction(1, 4001)  # telescoping tail
    assert cf.expected_jumps_given_size(1) == 0
    assert cf.expected_jumps_given_size(3) == Fraction(1, 2 * 3 * Fraction(1, 16)) - 1


def test_jump_joint_gf():
    z = 0.7
    wz = cf.size_gf(z)
    assert cf.jump_joint_gf(z, 1.0) == pytest.approx(wz)
    assert cf.jump_joint_gf(z, 0.0) == pytest.approx(wz - wz * wz / 2)
    # marginal in x at z->1 recovers the Yule-Simon pgf
    x = 0.6
    pgf = sum(float(cf.jump_count_pmf(n)) * x**n for n in range(4000))
    assert cf.jump_joint_gf(1.0, x) == pytest.approx(pgf, abs=1e-6)
    # d/dx at x=1 gives E(z^size n(0)) = -W(z) - log(1-z)/2
    eps = 1e-6
    num = (cf.jump_joint_gf(z, 1.0) - cf.jump_joint_gf(z, 1.0 - eps)) / eps
    assert num == pytest.approx(-wz - math.log(1 - z) / 2, abs=1e-4)


def test_degree_joint_gf():
    # given the root age, z=1 slices to a Poisson pgf
    x, s = 1.3, 0.7
    m = 2 * math.log(1 + math.tanh(x / 2))
    assert cf.degree_joint_gf(1.0, s, root_age=x) == pytest.approx(
        math.exp(m * (s - 1)))
    # s=1 marginalizes to the size gf given the root age
    z = 0.8
    th = math.tanh(x / 2)
    assert cf.degree_joint_gf(z, 1.0, root_age=x) == pytest.approx(
        z / (1 + th * math.sqrt(1 - z)) ** 2)
    # mixture: P(deg = 0) = value at z=1, s=0 is 1/2
    assert cf.degree_joint_gf(1.0, 0.0) == pytest.approx(0.5)
    # removable singularity at s = 1/2
    left = cf.degree_joint_gf(0.9, 0.5 - 1e-9)
    mid = cf.degree_joint_gf(0.9, 0.5)
    right = cf.degree_joint_gf(0.9, 0.5 + 1e-9)
    assert left == pytest.approx(mid, rel=1e-6)
    assert right == pytest.approx(mid, rel=1e-6)
    # mean degree 4 log 2 - 2
    eps = 1e-6
    mean = (cf.degree_joint_gf(1.0, 1.0) - cf.degree_joint_gf(1.0, 1 - eps)) / eps
    assert mean == pytest.approx(4 * math.log(2) - 2, abs=1e-5)


def test_root_degree_pmf():
    # pgf at a few points vs the pmf series
    total = sum(cf.root_degree_pmf(d) for d in range(40))
    assert total == pytest.approx(1.0, abs=1e-10)
    for s in (0.0, 0.35, 0.9):
        pgf = sum(cf.root_degree_pmf(d) * s**d for d in range(40))
        assert pgf == pytest.approx(cf.degree_joint_gf(1.0, s), abs=1e-9)
    assert cf.root_degree_pmf(1) == pytest.approx(1 - math.log(2), abs=1e-10)


def test_size_pmf_given_age():
    # matches the master gf marginal at s=1 via series
    x = 0.9
    pmf = [cf.size_pmf_given_age(k, x) for k in range(1, 200)]
    z = 0.6
    series = sum(p * z ** (k + 1) for k, p in enumerate(pmf))
    th = math.tanh(x / 2)
    assert series == pytest.approx(z / (1 + th * math.sqrt(1 - z)) ** 2, abs=1e-8)


# ---------------------------------------------------------------------------
# subordinator
# ---------------------------------------------------------------------------


def test_levy_density_and_laplace_exponent():
    # Gamma(1)/Gamma(1/2) and Gamma(3/2)/Gamma(1); the measure-consistent
    # exponent carries no 1/2 prefactor (its small-jump drift is the
    # sqrt-clock drift sqrt(pi), and the quadrature below pins it)
    assert cf.laplace_exponent(0.5) == pytest.approx(1 / math.sqrt(math.pi))
    assert cf.laplace_exponent(1.0) == pytest.approx(math.sqrt(math.pi) / 2)
    assert cf.laplace_exponent(1e-9) == pytest.approx(0.0, abs=1e-8)
    # small-jump drift: integral of s against the measure is sqrt(pi)
    drift, _ = quad(lambda s: s * cf.levy_jump_density(s), 0, 200,
                    points=[1e-6, 1e-3, 1.0], limit=400, epsabs=1e-12)
    assert drift == pytest.approx(math.sqrt(math.pi), abs=1e-9)
    for lam in (0.25, 0.5, 1.0, 2.0, 4.0):
        val, _ = quad(
            lambda s: -math.expm1(-lam * s) * cf.levy_jump_density(s),
            0.0, 200.0, points=[1e-6, 1e-3, 1.0], limit=400,
            epsabs=1e-12, epsrel=1e-12,
        )
        assert abs(val - cf.laplace_exponent(lam)) < 1e-8
    with pytest.raises(ValueError):
        cf.levy_jump_density(0.0)


# ---------------------------------------------------------------------------
# generation transfer operator
# ---------------------------------------------------------------------------


def test_transfer_eigenvalues():
    assert cf.transfer_eigenvalue(1) == 1
    assert cf.transfer_eigenvalue(2) == Fraction(1, 6)
    assert cf.transfer_eigenvalue(3) == Fraction(1, 15)


def test_transfer_apply_eigenrelations():
    grid = np.linspace(0, 1, 21)
    for n in range(1, 6):
        lam = float(cf.transfer_eigenvalue(n))
        for s in grid:
            lhs = cf.transfer_apply(lambda u: cf.legendre_p(2 * n - 1, u), float(s))
            assert lhs == pytest.approx(lam * cf.legendre_p(2 * n - 1, float(s)),
                                        abs=1e-9)


def test_transfer_apply_zero_and_legendre_moments():
    assert cf.transfer_apply(lambda u: 0.0, 0.7) == 0.0
    # integral of P_{2i-1} over [0,1] is (-1)^{i+1} w_i
    for i in (1, 2, 3):
        val, _ = quad(lambda u: cf.legendre_p(2 * i - 1, u), 0, 1, epsabs=1e-13)
        assert val == pytest.approx(
            (-1) ** (i + 1) * float(cf.cluster_size_pmf(i)), abs=1e-11)


def test_expected_generation_size():
    assert cf.expected_generation_size(0) == 1.0
    for k in range(1, 11):
        val = cf.expected_generation_size(k)
        assert 0.75 < val <= 0.75 + 0.25 * 6.0 ** -k
    # generation 1 is the mean root degree
    assert cf.expected_generation_size(1) == pytest.approx(4 * math.log(2) - 2,
                                                           abs=1e-10)
