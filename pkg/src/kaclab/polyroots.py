"""Polynomial evaluation and simultaneous root finding.

The main solver is an Aberth-Ehrlich iteration compiled with numba. Roots
are accepted on a backward-error test: ``|p(a)| <= eps_res * sum_k |c_k| |a|^k``.
A companion-matrix eigenvalue solver is kept as an independent oracle for
small degrees.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numba
import numpy as np
from scipy.optimize import linear_sum_assignment
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components
from scipy.spatial import cKDTree

__all__ = [
    "EPS_RES",
    "MAX_SWEEPS",
    "Polynomial",
    "RootReport",
    "RootValidation",
    "aberth_roots",
    "companion_roots",
    "horner_eval",
    "match_roots",
    "newton_polygon_radii",
    "validate_roots",
]

EPS_RES = 1e-12
MAX_SWEEPS = 200
COMPANION_MAX_DEGREE = 512
CLUSTER_RADIUS = 1e-3
MAX_CLUSTER = 8


class Polynomial:
    """Polynomial with ascending complex coefficients ``c_0 .. c_n``."""

    __slots__ = ("coeffs", "degree")

    def __init__(self, coeffs):
        c = np.array(coeffs, dtype=np.complex128).ravel()
        if c.size == 0:
            raise ValueError("polynomial needs at least one coefficient")
        nz = np.flatnonzero(c)
        self.degree = int(nz[-1]) if nz.size else 0
        self.coeffs = c[: self.degree + 1]
        self.coeffs.setflags(write=False)

    def __call__(self, z):
        return horner_eval(self, z)[0]

    def __mul__(self, lam):
        return Polynomial(self.coeffs * lam)

    __rmul__ = __mul__

    def __repr__(self):
        return f"Polynomial(degree={self.degree})"


def _as_poly(p) -> Polynomial:
    return p if isinstance(p, Polynomial) else Polynomial(p)


@dataclass
class RootReport:
    roots: np.ndarray
    residuals: np.ndarray
    iterations: int
    converged: bool


@dataclass
class RootValidation:
    residuals: np.ndarray
    max_residual: float
    count_ok: bool
    reconstruction_error: float


def horner_eval(p, z):
    """Evaluate ``p(z)``, ``p'(z)`` and ``sum_k |c_k| |z|^k`` by Horner's rule.

    ``z`` may be a scalar or an array; outputs broadcast accordingly.
    Raises ``OverflowError`` when the magnitude scale is not finite.
    """
    c = _as_poly(p).coeffs
    z = np.asarray(z, dtype=np.complex128)
    az = np.abs(z)
    val = np.full(z.shape, c[-1], dtype=np.complex128)
    der = np.zeros(z.shape, dtype=np.complex128)
    scale = np.full(z.shape, abs(c[-1]), dtype=np.float64)
    for ck in c[-2::-1]:
        der = der * z + val
        val = val * z + ck
        scale = scale * az + abs(ck)
    if not np.all(np.isfinite(scale)):
        raise OverflowError("polynomial magnitude scale overflowed binary64")
    if val.ndim == 0:
        return complex(val), complex(der), float(scale)
    return val, der, scale


@numba.njit(cache=True)
def _eval_scaled(c, absc, z):
    # For |z| > 1 evaluate the reversed polynomial at 1/z; value and scale
    # are then both divided by |z|^n, which leaves their ratio unchanged.
    n = c.shape[0] - 1
    if abs(z) <= 1.0:
        val = c[n]
        der = 0j
        s = absc[n]
        az = abs(z)
        for k in range(n - 1, -1, -1):
            der = der * z + val
            val = val * z + c[k]
            s = s * az + absc[k]
        return val, der, s, False
    y = 1.0 / z
    val = c[0]
    der = 0j
    s = absc[0]
    ay = abs(y)
    for k in range(1, n + 1):
        der = der * y + val
        val = val * y + c[k]
        s = s * ay + absc[k]
    return val, der, s, True


@numba.njit(cache=True)
def _newton_ratio(n, z, val, der, rev):
    if rev:
        y = 1.0 / z
        den = n * y * val - y * y * der
    else:
        den = der
    if den == 0:
        return val * 1e-3 + 1e-8
    return val / den


@numba.njit(cache=True)
def _aberth_kernel(c, z, eps_res, max_sweeps):
    n = z.shape[0]
    absc = np.abs(c)
    frozen = np.zeros(n, dtype=np.bool_)
    sweeps = 0
    for it in range(max_sweeps):
        sweeps = it + 1
        active = 0
        for i in range(n):
            if frozen[i]:
                continue
            zi = z[i]
            val, der, s, rev = _eval_scaled(c, absc, zi)
            small = abs(val) <= eps_res * s
            ratio = _newton_ratio(n, zi, val, der, rev)
            xr = zi.real
            xi = zi.imag
            ar = 0.0
            ai = 0.0
            for j in range(n):
                if j != i:
                    dr = xr - z[j].real
                    di = xi - z[j].imag
                    inv = 1.0 / (dr * dr + di * di)
                    ar += dr * inv
                    ai -= di * inv
            acc = complex(ar, ai)
            den = 1.0 - ratio * acc
            corr = ratio / den if den != 0 else ratio
            z[i] = zi - corr
            # A frozen root still receives this last correction.
            if small:
                frozen[i] = True
            else:
                active += 1
        if active == 0:
            break
    res = np.empty(n)
    for i in range(n):
        val, der, s, rev = _eval_scaled(c, absc, z[i])
        res[i] = abs(val) / s if s > 0 else 0.0
    return sweeps, res


def newton_polygon_radii(coeffs) -> np.ndarray:
    """Initial root moduli from the upper convex hull of ``(k, log|c_k|)``.

    Returns one radius per root; the hull edge from ``k_i`` to ``k_j`` contributes
    ``k_j - k_i`` copies of ``(|c_ki| / |c_kj|) ** (1 / (k_j - k_i))``.
    """
    c = np.asarray(coeffs)
    nz = np.flatnonzero(c)
    logs = np.log(np.abs(c[nz]))
    hull: list[int] = []
    for idx in range(nz.size):
        while len(hull) >= 2:
            a, b = hull[-2], hull[-1]
            # drop b when it lies on or below segment a -> idx
            cross = (nz[b] - nz[a]) * (logs[idx] - logs[a]) - (logs[b] - logs[a]) * (nz[idx] - nz[a])
            if cross >= 0:
                hull.pop()
            else:
                break
        hull.append(idx)
    radii = []
    for a, b in zip(hull[:-1], hull[1:]):
        m = int(nz[b] - nz[a])
        radii.extend([math.exp((logs[a] - logs[b]) / m)] * m)
    return np.array(radii)


def _initial_guesses(coeffs, seed: int) -> np.ndarray:
    radii = newton_polygon_radii(coeffs)
    n = radii.size
    rng = np.random.default_rng(seed)
    phase = rng.uniform(0.0, 2.0 * math.pi)
    jitter = 1.0 + 0.1 * rng.uniform(-1.0, 1.0, size=n)
    angles = 2.0 * math.pi * np.arange(n) / n + phase
    return radii * jitter * np.exp(1j * angles)


def _refine_clusters(c, r, res, eps_res):
    """Move each tight root cluster so its centroid solves ``p^(m-1) = 0``.

    Near an ``m``-fold root the individual approximations are only accurate
    to about ``eps**(1/m)`` and freeze in a lopsided pattern, which spoils
    the coefficient reconstruction. The centroid of the cluster is well
    conditioned: it is a simple root of the ``(m-1)``-th derivative. Each
    cluster is shifted rigidly by a few Newton steps on that derivative, and
    the shift is kept only if every member still passes the residual test.
    """
    if r.size < 2:
        return r, res
    radius = CLUSTER_RADIUS * max(1.0, float(np.max(np.abs(r))))
    pairs = cKDTree(np.column_stack([r.real, r.imag])).query_pairs(radius, output_type="ndarray")
    if pairs.size == 0:
        return r, res
    graph = coo_matrix((np.ones(len(pairs)), (pairs[:, 0], pairs[:, 1])), shape=(r.size, r.size))
    _, labels = connected_components(graph, directed=False)
    sizes = np.bincount(labels)
    r, res = r.copy(), res.copy()
    absc = np.abs(c)
    for lab in np.flatnonzero(sizes > 1):
        idx = np.flatnonzero(labels == lab)
        m = idx.size
        if m > min(MAX_CLUSTER, c.size - 1):
            continue
        d = np.polynomial.polynomial.polyder(c, m - 1)
        d = d / np.max(np.abs(d))
        absd = np.abs(d)
        cen = r[idx].mean()
        x = cen
        for _ in range(3):
            v, dv, _, rev = _eval_scaled(d, absd, x)
            x -= _newton_ratio(d.size - 1, x, v, dv, rev)
        if not abs(x - cen) <= radius:
            continue
        moved = r[idx] + (x - cen)
        new_res = np.empty(m)
        for j in range(m):
            v, _, s, _ = _eval_scaled(c, absc, moved[j])
            new_res[j] = abs(v) / s
        if np.all(new_res <= eps_res):
            r[idx] = moved
            res[idx] = new_res
    return r, res


def aberth_roots(p, *, eps_res: float = EPS_RES, max_sweeps: int = MAX_SWEEPS, seed: int = 0) -> RootReport:
    """All roots of ``p`` by Gauss-Seidel Aberth-Ehrlich sweeps.

    Starting points sit on Newton-polygon circles (radius ~1 for Kac
    polynomials), equi-angular with a random phase and +-10% radial jitter.
    A root is frozen once its relative backward error is at most
    ``eps_res``; the run stops when every root is frozen or after
    ``max_sweeps`` sweeps. Non-convergence is reported, not raised.
    """
    p = _as_poly(p)
    if p.degree == 0:
        if p.coeffs[0] == 0:
            raise ValueError("degenerate polynomial: all coefficients are zero")
        raise ValueError("root finding needs degree >= 1")
    c = p.coeffs
    # roots at the origin come off exactly
    k0 = int(np.flatnonzero(c)[0])
    zeros = np.zeros(k0, dtype=np.complex128)
    c = c[k0:]
    c = c / np.max(np.abs(c))
    m = c.size - 1
    if m == 0:
        return RootReport(zeros, np.zeros(k0), 0, True)
    if m == 1:
        r = np.array([-c[0] / c[1]])
        res = np.abs(c[0] + c[1] * r) / (np.abs(c[0]) + np.abs(c[1] * r))
        sweeps = 0
    else:
        r = _initial_guesses(c, seed)
        sweeps, res = _aberth_kernel(c, r, float(eps_res), int(max_sweeps))
        r, res = _refine_clusters(c, r, res, float(eps_res))
    roots = np.concatenate([zeros, r])
    residuals = np.concatenate([np.zeros(k0), res])
    converged = bool(np.all(residuals <= eps_res)) and bool(np.all(np.isfinite(roots)))
    return RootReport(roots, residuals, int(sweeps), converged)


def companion_roots(p) -> np.ndarray:
    """Eigenvalues of the companion matrix of the monic normalization of ``p``."""
    p = _as_poly(p)
    n = p.degree
    if n < 1:
        raise ValueError("root finding needs degree >= 1")
    if n > COMPANION_MAX_DEGREE:
        raise ValueError(f"companion oracle limited to degree <= {COMPANION_MAX_DEGREE}, got {n}")
    c = p.coeffs
    comp = np.zeros((n, n), dtype=np.complex128)
    comp[1:, :-1] = np.eye(n - 1)
    comp[:, -1] = -c[:-1] / c[-1]
    return np.linalg.eigvals(comp)


def _leja_order(roots: np.ndarray) -> np.ndarray:
    r = np.asarray(roots)
    if r.size == 0:
        return r
    order = [int(np.argmax(np.abs(r)))]
    prod = np.abs(r - r[order[0]])
    used = np.zeros(r.size, dtype=bool)
    used[order[0]] = True
    logprod = np.log(prod + 1e-300)
    for _ in range(r.size - 1):
        cand = np.where(used, -np.inf, logprod)
        j = int(np.argmax(cand))
        order.append(j)
        used[j] = True
        logprod = logprod + np.log(np.abs(r - r[j]) + 1e-300)
    return r[order]


def expand_roots(roots, leading=1.0) -> np.ndarray:
    """Ascending coefficients of ``leading * prod_j (z - roots_j)`` (Leja order)."""
    coeffs = np.array([1.0 + 0j])
    for a in _leja_order(np.asarray(roots, dtype=np.complex128)):
        nxt = np.zeros(coeffs.size + 1, dtype=np.complex128)
        nxt[1:] += coeffs
        nxt[:-1] -= a * coeffs
        coeffs = nxt
    return leading * coeffs


def validate_roots(p, roots) -> RootValidation:
    """Recompute residuals and the coefficient-reconstruction error.

    Residuals are relative backward errors; the reconstruction error is
    ``max_k |rec_k - c_k| / max_k |c_k|`` with ``rec`` the expansion of
    ``c_n * prod (z - root)``.
    """
    p = _as_poly(p)
    roots = np.asarray(roots, dtype=np.complex128).ravel()
    val, _, scale = horner_eval(p, roots)
    with np.errstate(invalid="ignore", divide="ignore"):
        residuals = np.where(scale > 0, np.abs(val) / scale, 0.0)
    count_ok = roots.size == p.degree
    if count_ok:
        rec = expand_roots(roots, p.coeffs[-1])
        recon = float(np.max(np.abs(rec - p.coeffs)) / np.max(np.abs(p.coeffs)))
    else:
        recon = math.inf
    max_res = float(residuals.max()) if residuals.size else 0.0
    return RootValidation(residuals, max_res, count_ok, recon)


def match_roots(a, b, tol: float = 1e-8) -> tuple[float, np.ndarray]:
    """Pair two root multisets; return the largest paired distance and the pairing.

    Greedy nearest-neighbour first; if that pairing exceeds ``tol`` the optimal
    bottleneck-free assignment (Hungarian on distances) is used instead.
    """
    a = np.asarray(a, dtype=np.complex128).ravel()
    b = np.asarray(b, dtype=np.complex128).ravel()
    if a.size != b.size:
        raise ValueError(f"multisets differ in size: {a.size} vs {b.size}")
    if a.size == 0:
        return 0.0, np.zeros(0, dtype=int)
    dist = np.abs(a[:, None] - b[None, :])
    perm = np.full(a.size, -1)
    free = np.ones(b.size, dtype=bool)
    for i in np.argsort(dist.min(axis=1)):
        j = int(np.argmin(np.where(free, dist[i], np.inf)))
        perm[i] = j
        free[j] = False
    worst = float(dist[np.arange(a.size), perm].max())
    if worst > tol:
        rows, cols = linear_sum_assignment(dist)
        hung = float(dist[rows, cols].max())
        if hung < worst:
            perm = np.empty(a.size, dtype=int)
            perm[rows] = cols
            worst = hung
    return worst, perm
