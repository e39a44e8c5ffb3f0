"""The limiting Gaussian analytic function and its zero process.

``G(z) = int_0^1 exp(z t) dB(t)`` with complex Brownian motion ``B`` has
covariance ``K(z, w) = (exp(s) - 1) / s`` where ``s = z + conj(w)``. All
mixed derivatives reduce to ``I_m(s) = int_0^1 t**m exp(s t) dt``.

Samples are drawn through the Karhunen-Loeve expansion in the orthonormal
shifted Legendre basis of ``L^2[0, 1]``:
``G = sum_k xi_k phi_k`` with ``phi_k(z) = int_0^1 exp(z t) p_k(t) dt``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache

import numpy as np
from scipy import integrate
from scipy.linalg import cholesky, expm

from .coeffs import RngStream, make_law
from .kacsim import PointConfiguration
from .polyroots import aberth_roots, horner_eval

__all__ = [
    "MAX_KAC_RICE_K",
    "GafPlan",
    "GafSample",
    "ZeroCountMismatch",
    "argument_principle_count",
    "gaf_from_coeffs",
    "gaf_plan",
    "gaf_zeros",
    "intensity1",
    "intensity_integral",
    "intensity_integral_1d",
    "kernel",
    "kernel_deriv",
    "kernel_integral",
    "legendre_moments",
    "parseval_deficit",
    "permanent",
    "phi_values",
    "re_g_covariance",
    "rho_k",
    "sample_gaf",
]

MAX_DERIV_ORDER = 4
MAX_KAC_RICE_K = 8
MAX_KL_ORDER = 256
SERIES_SWITCH = 1.0
AP_NODES = 4096

_gaussian = make_law("gaussian-complex")


class ZeroCountMismatch(RuntimeError):
    """Extracted zeros disagree with the argument-principle count."""


# ---------------------------------------------------------------------------
# kernel and its derivatives


def _series_I(m: int, s: np.ndarray) -> np.ndarray:
    # sum_j s^j / (j! (m + j + 1)); stops once the next term is < 1e-18 relative
    out = np.zeros_like(s)
    term = np.ones_like(s)
    j = 0
    while True:
        add = term / (m + j + 1)
        out = out + add
        j += 1
        term = term * s / j
        if np.all(np.abs(term) / (m + j + 1) <= 1e-18 * np.maximum(np.abs(out), 1e-300)):
            return out


def _recurrence_I(m: int, s: np.ndarray) -> np.ndarray:
    es = np.exp(s)
    val = np.expm1(s) / s
    for j in range(1, m + 1):
        val = (es - j * val) / s
    return val


def kernel_integral(m: int, s, method: str = "auto"):
    """``I_m(s) = int_0^1 t**m exp(s t) dt``.

    ``method`` is ``"auto"`` (series for ``|s| < 1``, forward recurrence
    otherwise), ``"series"`` or ``"recurrence"``.
    """
    scalar = np.ndim(s) == 0
    s = np.atleast_1d(np.asarray(s, dtype=np.complex128))
    if method == "series":
        out = _series_I(m, s)
    elif method == "recurrence":
        out = _recurrence_I(m, s)
    elif method == "auto":
        out = np.empty_like(s)
        small = np.abs(s) < SERIES_SWITCH
        if small.any():
            out[small] = _series_I(m, s[small])
        if (~small).any():
            out[~small] = _recurrence_I(m, s[~small])
    else:
        raise ValueError(f"unknown method {method!r}")
    return complex(out[0]) if scalar else out


def kernel(z, w):
    """``K(z, w) = (exp(s) - 1) / s`` with ``s = z + conj(w)``; ``K = 1`` at ``s = 0``."""
    s = np.asarray(z, dtype=np.complex128) + np.conj(np.asarray(w, dtype=np.complex128))
    scalar = s.ndim == 0
    s = np.atleast_1d(s)
    out = np.empty_like(s)
    small = np.abs(s) < 1e-3
    if small.any():
        ss = s[small]
        # sum_m s^m / (m+1)!, six terms reach binary64 precision at |s| < 1e-3
        acc = np.zeros_like(ss)
        for m in range(6, -1, -1):
            acc = acc * ss / (m + 2) + 1.0
        out[small] = acc
    if (~small).any():
        ss = s[~small]
        out[~small] = np.expm1(ss) / ss
    return complex(out[0]) if scalar else out


def kernel_deriv(a: int, b: int, z, w):
    """``d^a/dz^a d^b/dconj(w)^b K(z, w) = I_{a+b}(z + conj(w))``."""
    if a < 0 or b < 0 or a + b > MAX_DERIV_ORDER:
        raise ValueError(f"derivative order a+b={a + b} outside [0, {MAX_DERIV_ORDER}]")
    s = np.asarray(z, dtype=np.complex128) + np.conj(np.asarray(w, dtype=np.complex128))
    return kernel_integral(a + b, s)


# ---------------------------------------------------------------------------
# Kac-Rice intensities


def intensity1(z):
    """First intensity ``rho_1(z) = (1/pi) d_z d_wbar log K(z, w)`` on ``w = z``.

    Depends only on ``Re z`` through ``s = 2 Re z``.
    """
    x = np.real(np.asarray(z, dtype=np.complex128))
    s = (2.0 * x).astype(np.complex128)
    i0 = kernel_integral(0, s)
    i1 = kernel_integral(1, s)
    i2 = kernel_integral(2, s)
    out = np.real((i2 * i0 - i1 * i1) / (i0 * i0)) / math.pi
    return float(out) if np.ndim(out) == 0 else out


def permanent(mat) -> complex:
    """Permanent by Ryser's inclusion-exclusion formula in Gray-code order."""
    a = np.asarray(mat)
    n = a.shape[0]
    if a.shape != (n, n):
        raise ValueError("permanent needs a square matrix")
    if n == 0:
        return 1
    row = np.zeros(n, dtype=a.dtype if a.dtype.kind in "iufc" else complex)
    total = 0
    gray = 0
    for i in range(1, 1 << n):
        nxt = i ^ (i >> 1)
        bit = (nxt ^ gray).bit_length() - 1
        if nxt & (1 << bit):
            row = row + a[:, bit]
        else:
            row = row - a[:, bit]
        gray = nxt
        term = np.prod(row)
        total = total - term if bin(gray).count("1") % 2 else total + term
    return total if n % 2 == 0 else -total


def intensity_matrices(points) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """``A = Cov(G, G)``, ``B = Cov(G, G')`` and ``C = Cov(G', G')`` at ``points``."""
    z = np.asarray(points, dtype=np.complex128).ravel()
    s = z[:, None] + np.conj(z)[None, :]
    return kernel_integral(0, s), kernel_integral(1, s), kernel_integral(2, s)


def _divided_difference_cov(x: np.ndarray, nodes: int = 160) -> np.ndarray:
    # D_p = G[x_0..x_p]; the divided differences of t -> exp(z t) over x are
    # the first row of expm(t J) with J bidiagonal (Opitz), integrated over t
    m = x.size
    J = np.diag(x) + np.diag(np.ones(m - 1), 1)
    tg, wg = np.polynomial.legendre.leggauss(nodes)
    rows = np.array([expm(0.5 * (tk + 1.0) * J)[0] for tk in tg])
    S = (rows.T * (0.5 * wg)) @ rows.conj()
    return (S + S.conj().T) / 2


def rho_k(points) -> float:
    """k-point function of the zeros, ``per(C - B* A^-1 B) / (pi^k det A)``.

    The Gaussian conditioning is carried out in the Hermite divided-difference
    basis over the nodes ``(z_1..z_k, z_1..z_k)``: ``G(z_i) = 0`` for all ``i``
    means the first ``k`` divided differences vanish, and
    ``G'(z_i) = w'(z_i) * (W F)_i`` with ``F`` the remaining ones. This equals
    the matrix formula but stays accurate for clustered points. Accurate to
    about 1e-12 relative for ``|Re z| <= 8``.
    """
    z = np.asarray(points, dtype=np.complex128).ravel()
    k = z.size
    if not 1 <= k <= MAX_KAC_RICE_K:
        raise ValueError(f"k={k} outside [1, {MAX_KAC_RICE_K}]")
    if k > 1:
        sep = np.abs(z[:, None] - z[None, :])[np.triu_indices(k, 1)].min()
        if sep < 1e-6:
            raise ValueError(f"points closer than 1e-6 (min separation {sep:.3g})")
    A = kernel_integral(0, z[:, None] + np.conj(z)[None, :])
    # singularity is judged on the correlation matrix so that the test does
    # not depend on how fast K(z, z) grows along the real axis
    d = 1.0 / np.sqrt(np.real(np.diag(A)))
    eig = np.linalg.eigvalsh(A * d[:, None] * d[None, :])
    if eig[0] < 1e-12 * k:
        raise ValueError("covariance matrix numerically singular; points too close")

    S = _divided_difference_cov(np.concatenate([z, z]))
    sd = 1.0 / np.sqrt(np.real(np.diag(S)))
    L = cholesky(S * sd[:, None] * sd[None, :], lower=True)
    log_det_e = 2.0 * np.sum(np.log(np.real(np.diag(L[:k, :k])))) - 2.0 * np.sum(np.log(sd[:k]))
    cond_f = (L[k:, k:] @ L[k:, k:].conj().T) / (sd[k:, None] * sd[None, k:])
    W = np.zeros((k, k), dtype=np.complex128)
    for i in range(k):
        for q in range(i + 1):
            W[i, q] = np.prod(z[i] - z[:q])
    cond_h = W @ cond_f @ W.conj().T
    log_vdm = 2.0 * np.sum(np.log(np.abs(z[:, None] - z[None, :])[np.triu_indices(k, 1)])) if k > 1 else 0.0
    per = float(np.real(permanent(cond_h)))
    return per * math.exp(log_vdm - log_det_e) / math.pi**k


def intensity_integral(R: float, tol: float = 1e-10) -> float:
    """Expected number of zeros in the disk of radius ``R``.

    Tensor Gauss-Legendre in polar coordinates; the node count doubles until
    two successive values agree to ``tol``.
    """
    if R <= 0:
        raise ValueError("radius must be positive")
    prev = None
    nodes = 16
    while nodes <= 4096:
        val = _polar_gauss(lambda r, t: intensity1(r * np.cos(t)), R, nodes)
        if prev is not None and abs(val - prev) <= tol:
            return val
        prev = val
        nodes *= 2
    raise RuntimeError("intensity quadrature failed to converge")


def _polar_gauss(f, R, nodes):
    x, wx = np.polynomial.legendre.leggauss(nodes)
    r = 0.5 * R * (x + 1.0)
    wr = 0.5 * R * wx
    t = math.pi * (x + 1.0)
    wt = math.pi * wx
    rr, tt = np.meshgrid(r, t, indexing="ij")
    vals = f(rr, tt)
    return float(np.einsum("i,j,ij->", wr * r, wt, vals))


def intensity_integral_1d(R: float) -> float:
    """Same quantity as :func:`intensity_integral` by adaptive 1-D quadrature.

    Uses ``rho_1`` depending on ``Re z`` only:
    ``int_{-R}^{R} rho_1(x) * 2 sqrt(R^2 - x^2) dx`` with an algebraic weight.
    """
    val, _ = integrate.quad(
        lambda x: 2.0 * intensity1(x), -R, R, weight="alg", wvar=(0.5, 0.5), epsabs=1e-13, epsrel=1e-13, limit=200
    )
    return val


# ---------------------------------------------------------------------------
# Karhunen-Loeve sampling


@lru_cache(maxsize=None)
def _legendre_rational(N: int, M: int) -> tuple[tuple[Fraction, ...], ...]:
    # r(k, m) = int_0^1 t^m P_k(2t - 1) dt = (m!)^2 / ((m-k)! (m+k+1)!)
    rows = []
    row = [Fraction(1, m + 1) for m in range(M + 1)]
    for k in range(N + 1):
        rows.append(tuple(row))
        row = [row[m] * Fraction(m - k, m + k + 2) if m > k else Fraction(0) for m in range(M + 1)]
    return tuple(rows)


@lru_cache(maxsize=None)
def _legendre_moments_cached(N: int, M: int) -> np.ndarray:
    rat = _legendre_rational(N, M)
    mu = np.array([[float(x) for x in row] for row in rat])
    mu *= np.sqrt(2.0 * np.arange(N + 1) + 1.0)[:, None]
    mu.setflags(write=False)
    return mu


def legendre_moments(N: int, M: int) -> np.ndarray:
    """``mu[k, m] = int_0^1 t**m p_k(t) dt`` for orthonormal shifted Legendre ``p_k``."""
    if not 0 <= N <= M:
        raise ValueError(f"need 0 <= N <= M, got N={N}, M={M}")
    return _legendre_moments_cached(N, M)


def _exp_tail_order(R: float, tol: float) -> int:
    # smallest M with sum_{m > M} R^m / m! <= tol
    M = 0
    term = 1.0
    while True:
        nxt = term * R / (M + 1)
        if M + 2 > R and nxt / (1.0 - R / (M + 2)) <= tol:
            return M
        term = nxt
        M += 1


def phi_values(z, K: int, tol: float = 1e-22) -> np.ndarray:
    """``phi_k(z)`` for ``k = 0..K`` by Taylor series; shape ``(K+1,) + z.shape``."""
    z = np.asarray(z, dtype=np.complex128)
    R = float(np.max(np.abs(z))) if z.size else 0.0
    M = max(K, _exp_tail_order(R, tol))
    mu = legendre_moments(K, M)
    coef = mu / np.array([math.factorial(m) for m in range(M + 1)], dtype=float)
    powers = np.ones(z.shape, dtype=np.complex128)
    out = np.zeros((K + 1,) + z.shape, dtype=np.complex128)
    for m in range(M + 1):
        out += coef[:, m].reshape((K + 1,) + (1,) * z.ndim) * powers
        powers = powers * z
    return out


def parseval_deficit(z, N: int, *, direct: bool = False):
    """``K(z, z) - sum_{k<=N} |phi_k(z)|^2``.

    By default the deficit is evaluated as the tail ``sum_{k>N} |phi_k(z)|^2``,
    which equals it by completeness and avoids cancellation. ``direct=True``
    forms the difference literally.
    """
    z = np.asarray(z, dtype=np.complex128)
    if direct:
        ph = phi_values(z, N)
        return np.real(kernel(z, z)) - np.sum(np.abs(ph) ** 2, axis=0)
    K = N + 1
    while True:
        K = max(2 * K, N + 32)
        ph = phi_values(z, K)
        last = np.max(np.abs(ph[-8:]) ** 2)
        if last <= 1e-40 or K > 4 * MAX_KL_ORDER:
            return np.sum(np.abs(ph[N + 1 :]) ** 2, axis=0)


@dataclass(frozen=True)
class GafPlan:
    """Truncation orders shared by every sample with the same ``(R_max, tol)``."""

    R_max: float
    tol: float
    trunc_N: int
    taylor_M: int
    tail_bound: float
    taylor_matrix: np.ndarray  # (N+1, M+1): mu[k, m] / m!


@lru_cache(maxsize=64)
def gaf_plan(R_max: float, tol: float) -> GafPlan:
    """Smallest KL order meeting the Parseval tolerance on ``|z| = R_max``."""
    if tol <= 0:
        raise ValueError("tolerance must be positive")
    theta = np.linspace(0.0, 2.0 * math.pi, 257)[:-1]
    circle = R_max * np.exp(1j * theta)
    K = 32
    while True:
        ph = phi_values(circle, K)
        sq = np.abs(ph) ** 2
        if np.max(sq[-8:]) <= 1e-40 or K >= 4 * MAX_KL_ORDER:
            break
        K *= 2
    # tails[N] = sum_{k > N} |phi_k|^2, maximized over the circle
    rev = np.cumsum(sq[::-1], axis=0)[::-1]
    tails = np.concatenate([rev[1:], np.zeros((1,) + rev.shape[1:])]).max(axis=1)
    ok = np.flatnonzero(tails <= tol)
    if not ok.size or ok[0] > MAX_KL_ORDER:
        raise ValueError(f"Parseval tolerance {tol} needs more than {MAX_KL_ORDER} basis functions at R={R_max}")
    N = int(ok[0])
    M = max(N, _exp_tail_order(R_max, tol))
    mu = legendre_moments(N, M)
    tm = mu / np.array([math.factorial(m) for m in range(M + 1)], dtype=float)
    tm.setflags(write=False)
    return GafPlan(float(R_max), float(tol), N, M, float(tails[N]), tm)


@dataclass(frozen=True)
class GafSample:
    kl_coeffs: np.ndarray
    taylor_coeffs: np.ndarray
    trunc_N: int
    taylor_M: int
    tail_bound: float
    R_max: float

    def __call__(self, z):
        return horner_eval(self.taylor_coeffs, z)[0]


def gaf_from_coeffs(xi, R_max: float, tol: float = 1e-10) -> GafSample:
    """GAF sample with prescribed KL coefficients (padded or cut to ``trunc_N + 1``)."""
    plan = gaf_plan(float(R_max), float(tol))
    x = np.zeros(plan.trunc_N + 1, dtype=np.complex128)
    xi = np.asarray(xi, dtype=np.complex128).ravel()[: plan.trunc_N + 1]
    x[: xi.size] = xi
    return GafSample(x, x @ plan.taylor_matrix, plan.trunc_N, plan.taylor_M, plan.tail_bound, plan.R_max)


def sample_gaf(stream: RngStream, R_max: float, tol: float = 1e-10) -> GafSample:
    """One realization of ``G`` accurate to ``tol`` on the disk of radius ``R_max``."""
    plan = gaf_plan(float(R_max), float(tol))
    xi = _gaussian.draw(stream.generator, plan.trunc_N + 1)
    return GafSample(xi, xi @ plan.taylor_matrix, plan.trunc_N, plan.taylor_M, plan.tail_bound, plan.R_max)


def argument_principle_count(coeffs, R: float, nodes: int = AP_NODES, max_nodes: int = 1 << 22) -> int:
    """Zeros of the polynomial inside ``|z| = R`` by the trapezoidal argument principle.

    The node count doubles while the quadrature is not within 0.05 of an integer.
    """
    while True:
        z = R * np.exp(2j * math.pi * np.arange(nodes) / nodes)
        val, der, _ = horner_eval(coeffs, z)
        if np.any(val == 0):
            raise ZeroCountMismatch(f"a zero lies on the contour |z| = {R}")
        est = np.mean(z * der / val)
        if not np.isfinite(est):
            raise ZeroCountMismatch(f"argument principle quadrature overflowed at |z| = {R}")
        near = round(est.real)
        if abs(est - near) <= 0.05 or nodes >= max_nodes:
            if abs(est - near) > 0.05:
                raise ZeroCountMismatch(f"argument principle did not settle: {est}")
            return int(near)
        nodes *= 2


def gaf_zeros(sample: GafSample, R: float) -> PointConfiguration:
    """Zeros of the truncated sample in the closed disk of radius ``R``.

    Roots come from :func:`aberth_roots` on the Taylor polynomial; each kept
    zero must have relative residual at most ``1e-8`` and the count must
    match :func:`argument_principle_count`.
    """
    if R > sample.R_max:
        raise ValueError(f"window {R} exceeds sampling radius {sample.R_max}")
    rep = aberth_roots(sample.taylor_coeffs)
    roots = rep.roots[np.abs(rep.roots) <= R]
    res = rep.residuals[np.abs(rep.roots) <= R]
    if res.size and res.max() > 1e-8:
        raise RuntimeError(f"GAF zero residual {res.max():.3g} above 1e-8")
    ap = argument_principle_count(sample.taylor_coeffs, R)
    if ap != roots.size:
        raise ZeroCountMismatch(f"{roots.size} zeros extracted, argument principle counts {ap}")
    return PointConfiguration(roots, R)


def re_g_covariance(phis) -> np.ndarray:
    """``Sigma[j, j'] = E[Re G(i phi_j) Re G(i phi_j')] = Re K(i phi_j, i phi_j') / 2``."""
    phis = np.asarray(phis, dtype=float).ravel()
    if np.any(np.diff(phis) <= 0):
        raise ValueError("phis must be strictly increasing")
    z = 1j * phis
    sigma = np.real(kernel(z[:, None], z[None, :])) / 2.0
    return sigma
