"""Independent reference computations used by the tests.

Nothing here calls into the package's numerical kernels; every value is
derived with mpmath, scipy quadrature or plain enumeration.
"""

from __future__ import annotations

import itertools
import math

import mpmath as mp
import numpy as np


def mp_horner(coeffs, z, dps: int = 80) -> complex:
    """Polynomial value at ``z`` in 80-digit arithmetic (about 256 bits)."""
    with mp.workdps(dps):
        zz = mp.mpc(complex(z))
        acc = mp.mpc(0)
        for c in reversed(list(coeffs)):
            acc = acc * zz + mp.mpc(complex(c))
        return complex(acc)


def mp_expand(roots, leading, dps: int = 60) -> np.ndarray:
    """Monomial coefficients of ``leading * prod (z - r)``, low order first."""
    with mp.workdps(dps):
        c = [mp.mpc(complex(leading))]
        for r in roots:
            r = mp.mpc(complex(r))
            nxt = [mp.mpc(0)] * (len(c) + 1)
            for i, v in enumerate(c):
                nxt[i + 1] += v
                nxt[i] -= r * v
            c = nxt
        return np.array([complex(v) for v in c])


def quad_I(m: int, s: complex) -> complex:
    """``integral_0^1 t^m exp(s t) dt`` by adaptive quadrature."""
    with mp.workdps(30):
        ss = mp.mpc(complex(s))
        return complex(mp.quad(lambda t: t**m * mp.exp(ss * t), [0, 1]))


def rho1_finite_difference(x: float, h: float = 1e-4) -> float:
    """``(1 / 4 pi) Laplacian log K(z, z)`` at ``z = x`` by Richardson-extrapolated differences.

    ``K(z, z) = (e^{2x} - 1) / (2x)`` depends on ``x = Re z`` only, so the
    Laplacian is the second ``x`` derivative. Evaluated in 50 digits so the
    step does not drown in rounding.
    """
    with mp.workdps(50):
        def logk(t):
            s = 2 * mp.mpf(t)
            return mp.log(mp.expm1(s) / s) if s != 0 else mp.mpf(0)

        def d2(step):
            step = mp.mpf(step)
            return (logk(x + step) - 2 * logk(x) + logk(x - step)) / step**2

        fine, coarse = d2(h / 2), d2(h)
        lap = (4 * fine - coarse) / 3
        return float(lap / (4 * mp.pi))


def mp_rho_k(points, dps: int = 50) -> float:
    """k-point function of the limiting zero set via the Gaussian-conditioning formula.

    ``rho_k = per(C - B^* A^{-1} B) / (pi^k det A)`` with ``A = K(z_i, z_j)``,
    ``B = d_w K``, ``C = d_z d_w K``, all from the integral representation
    evaluated in high precision.
    """
    with mp.workdps(dps):
        z = [mp.mpc(complex(p)) for p in points]
        k = len(z)

        def I(m, s):
            return mp.quad(lambda t: t**m * mp.exp(s * t), [0, 1])

        A = mp.matrix(k, k)
        B = mp.matrix(k, k)
        C = mp.matrix(k, k)
        for i in range(k):
            for j in range(k):
                s = z[i] + mp.conj(z[j])
                A[i, j] = I(0, s)
                B[i, j] = I(1, s)
                C[i, j] = I(2, s)
        M = C - B.H * mp.inverse(A) * B
        per = mp.mpf(0)
        for perm in itertools.permutations(range(k)):
            term = mp.mpc(1)
            for i in range(k):
                term *= M[i, perm[i]]
            per += term
        return float(mp.re(per) / (mp.pi**k * mp.re(mp.det(A))))


def brute_permanent(mat) -> complex:
    m = np.asarray(mat)
    k = m.shape[0]
    return sum(math.prod(m[i, p[i]] for i in range(k)) for p in itertools.permutations(range(k)))


def brute_t_phi(points, phi) -> float:
    """Enumeration over ordered tuples of distinct slots, no pruning, no shortcuts."""
    pts = list(points)
    total = 0.0
    for tup in itertools.permutations(range(len(pts)), phi.k):
        total += phi(*[pts[i] for i in tup])
    return total
