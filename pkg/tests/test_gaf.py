import cmath
import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from kaclab.coeffs import RngStream, stream_index_for
from kaclab.gaf import (
    MAX_KAC_RICE_K,
    ZeroCountMismatch,
    argument_principle_count,
    gaf_from_coeffs,
    gaf_plan,
    gaf_zeros,
    intensity1,
    intensity_integral,
    intensity_integral_1d,
    kernel,
    kernel_deriv,
    kernel_integral,
    legendre_moments,
    parseval_deficit,
    permanent,
    phi_values,
    re_g_covariance,
    rho_k,
    sample_gaf,
)
from oracles import brute_permanent, mp_rho_k, quad_I, rho1_finite_difference

complex_pts = st.complex_numbers(max_magnitude=4, allow_nan=False, allow_infinity=False)


def test_kernel_values():
    assert kernel(0, 0) == 1
    assert kernel(1, 1) == pytest.approx((math.e**2 - 1) / 2, rel=1e-15)
    assert kernel(1, 1) == pytest.approx(3.1945280495, abs=1e-10)


@given(complex_pts)
def test_kernel_removable_singularity(z):
    assert kernel(z, -z.conjugate()) == pytest.approx(1, abs=1e-15)


@given(complex_pts, complex_pts)
def test_kernel_hermitian(z, w):
    assert kernel(z, w) == pytest.approx(kernel(w, z).conjugate(), rel=1e-14, abs=1e-300)


@given(st.lists(complex_pts, min_size=1, max_size=8))
@settings(max_examples=50, deadline=None)
def test_kernel_gram_psd(pts):
    z = np.array(pts)
    G = kernel(z[:, None], z[None, :])
    ev = np.linalg.eigvalsh((G + G.conj().T) / 2)
    assert ev.min() >= -1e-10 * np.trace(G).real


def test_kernel_deriv_examples():
    assert kernel_deriv(1, 0, 0, 0) == pytest.approx(0.5, rel=1e-15)
    assert kernel_deriv(1, 1, 0, 0) == pytest.approx(1 / 3, rel=1e-15)
    assert kernel_deriv(2, 0, 1, 0) == pytest.approx(quad_I(2, 1.0), abs=1e-12)
    assert abs(quad_I(2, 1.0) - (math.e - 2)) < 1e-14  # closed form e - 2
    with pytest.raises(ValueError):
        kernel_deriv(3, 2, 0, 0)


@pytest.mark.parametrize("m", range(5))
def test_kernel_integral_against_quadrature(m):
    for s in [0, 0.3, -0.7 + 0.2j, 1.5j, 4 - 3j, -8, 8]:
        assert kernel_integral(m, s) == pytest.approx(quad_I(m, s), rel=1e-12, abs=1e-14)


@pytest.mark.parametrize("m", range(5))
def test_series_and_recurrence_agree_on_overlap(m):
    r = np.linspace(0.5, 2, 16)
    ang = np.linspace(0, 2 * np.pi, 24, endpoint=False)
    s = (r[:, None] * np.exp(1j * ang)[None, :]).ravel()
    a = kernel_integral(m, s, "series")
    b = kernel_integral(m, s, "recurrence")
    assert np.max(np.abs(a - b)) <= 1e-10


def test_intensity_at_origin():
    exact = 1 / (12 * math.pi)
    assert abs(intensity1(0) - exact) <= 1e-8
    assert abs(rho1_finite_difference(0.0) - exact) <= 1e-8
    assert abs(intensity1(0) - rho1_finite_difference(0.0)) <= 1e-8


@pytest.mark.parametrize("x", [-3.0, -0.5, 0.2, 1.0, 3.0, 6.0])
def test_intensity_matches_finite_difference(x):
    assert intensity1(x) == pytest.approx(rho1_finite_difference(x), rel=1e-7)


def test_intensity_depends_only_on_abs_real_part():
    x = np.linspace(-6, 6, 25)
    for y in (0.0, 1.3, -7.0):
        assert np.max(np.abs(intensity1(x + 1j * y) - intensity1(x))) <= 1e-10
    assert np.max(np.abs(intensity1(x) - intensity1(-x))) <= 1e-10
    assert intensity1(3) == pytest.approx(intensity1(-3), abs=1e-14)


def test_rho_k_one_point_equals_intensity():
    grid = [complex(x, y) for x in np.linspace(-4, 4, 5) for y in (-2.0, 0.0, 1.0, 3.0)]
    assert len(grid) == 20
    for z in grid:
        assert abs(rho_k([z]) - intensity1(z)) <= 1e-8


@pytest.mark.parametrize(
    "pts",
    [[0, 1j], [0.5, -0.5 + 1j], [1 + 1j, -1 - 0.5j, 2j], [0.1, 0.6j, -1.2, 1 - 1j], [0, 0.05j]],
)
def test_rho_k_matches_high_precision(pts):
    assert rho_k(pts) == pytest.approx(mp_rho_k(pts), rel=1e-8)


def test_rho2_far_pair_factorizes():
    r1 = intensity1(0)
    # kernel decay is only algebraic (|K| ~ 2/|z - w|), so factorization is slow
    assert rho_k([0, 40j]) / r1**2 == pytest.approx(mp_rho_k([0, 40j]) / r1**2, rel=1e-8)
    assert abs(rho_k([0, 100j]) / r1**2 - 1) <= 0.01
    assert abs(rho_k([0, 400j]) / r1**2 - 1) <= 0.01


def test_rho2_repulsion():
    for z1 in (0, 1 + 1j, -2):
        assert rho_k([z1, z1 + 1e-3]) <= 1e-4 * intensity1(z1) ** 2


def test_rho_k_rejects_bad_input():
    with pytest.raises(ValueError):
        rho_k([0, 0])
    with pytest.raises(ValueError):
        rho_k(np.arange(MAX_KAC_RICE_K + 1) * 1j)
    with pytest.raises(ValueError):
        rho_k([])


def test_permanent_exact_cases():
    for k in range(1, 9):
        assert permanent(np.ones((k, k))) == math.factorial(k)
        d = np.arange(1, k + 1, dtype=float)
        assert permanent(np.diag(d)) == math.factorial(k)


@given(st.integers(1, 6), st.integers(0, 10**6))
@settings(max_examples=30, deadline=None)
def test_permanent_against_enumeration(k, seed):
    g = np.random.default_rng(seed)
    m = g.standard_normal((k, k)) + 1j * g.standard_normal((k, k))
    assert permanent(m) == pytest.approx(brute_permanent(m), rel=1e-10, abs=1e-12)


def test_legendre_moments_exact_values():
    mu = legendre_moments(3, 3)
    # mu(k, m) = sqrt(2k+1) (m!)^2 / ((m-k)! (m+k+1)!), zero for k > m
    for k in range(4):
        for m in range(4):
            if k > m:
                assert mu[k, m] == 0
            else:
                r = Fraction(math.factorial(m) ** 2, math.factorial(m - k) * math.factorial(m + k + 1))
                assert mu[k, m] == pytest.approx(math.sqrt(2 * k + 1) * float(r), rel=1e-15)


def test_hilbert_reconstruction():
    mu = legendre_moments(20, 20)
    H = mu.T @ mu
    m = np.arange(21)
    assert np.max(np.abs(H - 1.0 / (m[:, None] + m[None, :] + 1))) <= 1e-12


def test_phi_zero_is_kernel_row():
    z = np.array([0.5, 2j, -3 + 1j])
    assert phi_values(z, 3)[0] == pytest.approx(kernel(z, 0), rel=1e-13)


def test_parseval_deficit_properties():
    z = np.array([0.0, 3.0, -3.0, 4j, 3 + 3j])
    d = [parseval_deficit(z, N) for N in range(0, 16, 3)]
    for a, b in zip(d[:-1], d[1:]):
        assert np.all(b <= a)
    assert np.all(d[-1] >= 0)
    # the literal difference agrees where it is not swamped by cancellation
    assert parseval_deficit(z, 3, direct=True) == pytest.approx(parseval_deficit(z, 3), rel=1e-8)


@pytest.mark.parametrize("R_max, tol", [(5.0, 1e-10), (7.0, 1e-10), (4.0, 1e-12)])
def test_plan_meets_tolerance(R_max, tol):
    plan = gaf_plan(R_max, tol)
    ring = R_max * np.exp(2j * np.pi * np.arange(97) / 97)
    disk = np.concatenate([ring, 0.5 * ring, [0.0]])
    assert np.max(parseval_deficit(disk, plan.trunc_N)) <= tol
    assert plan.tail_bound <= tol


def test_forced_constant_basis_function():
    s = gaf_from_coeffs([1.0], 7.0)
    for z in (0.3, 2 + 1j, -4j):
        assert s(z) == pytest.approx((cmath.exp(z) - 1) / z, rel=1e-10)
    zeros = gaf_zeros(s, 7.0).points
    zeros = zeros[np.argsort(zeros.imag)]
    assert zeros.size == 2
    assert np.max(np.abs(zeros - np.array([-2j * np.pi, 2j * np.pi]))) <= 1e-8
    assert gaf_zeros(gaf_from_coeffs([1.0], 5.0), 5.0).points.size == 0


def test_gaf_zeros_rejects_window_beyond_plan():
    with pytest.raises(ValueError):
        gaf_zeros(gaf_from_coeffs([1.0], 4.0), 5.0)


def test_argument_principle_counts_known_polynomial():
    c = np.polynomial.polynomial.polyfromroots([0.5, 1.5j, -2.5, 3 + 3j])
    assert argument_principle_count(c, 1.0) == 1
    assert argument_principle_count(c, 2.0) == 2
    assert argument_principle_count(c, 3.0) == 3
    with pytest.raises(ZeroCountMismatch):
        argument_principle_count(c, 1.5, nodes=64, max_nodes=64)  # 1.5i sits on a node
    with pytest.raises(ZeroCountMismatch):
        argument_principle_count(c, 2.51, nodes=16, max_nodes=16)  # too coarse near -2.5


def test_sampler_covariance_small():
    T = 4000
    vals = np.array([sample_gaf(RngStream(1, stream_index_for("gafcov", t)), 4.0)(np.array([0, 1j, 1]))
                     for t in range(T)])
    emp = vals.T @ vals.conj() / T
    z = np.array([0, 1j, 1])
    K = kernel(z[:, None], z[None, :])
    assert np.max(np.abs(emp - K)) <= 5 * np.sqrt(np.max(np.abs(np.diag(K))) ** 2 * 2 / T) * 3


def test_gaf_zero_simplicity_and_count():
    for t in range(200):
        s = sample_gaf(RngStream(2, stream_index_for("simple", t)), 5.0)
        cfg = gaf_zeros(s, 4.0)
        p = cfg.points
        if p.size > 1:
            d = np.abs(p[:, None] - p[None, :]) + np.eye(p.size)
            assert d.min() > 1e-6


def test_re_g_covariance():
    phis = 16.0 * np.arange(8)
    sig = re_g_covariance(phis)
    assert np.all(np.diag(sig) == 0.5)
    off = ~np.eye(8, dtype=bool)
    gaps = np.abs(phis[:, None] - phis[None, :])
    assert np.all(np.abs(sig[off]) <= 1 / gaps[off])
    assert np.linalg.eigvalsh(sig).min() >= 0.25
    with pytest.raises(ValueError):
        re_g_covariance([1.0, 0.0])


def test_intensity_integral():
    for R in (1e-3, 1e-2):
        assert intensity_integral(R) / (math.pi * R**2) == pytest.approx(1 / (12 * math.pi), rel=1e-4)
    a, b = intensity_integral(4.0), intensity_integral_1d(4.0)
    assert abs(a - b) <= 1e-8
    with pytest.raises(ValueError):
        intensity_integral(0.0)
