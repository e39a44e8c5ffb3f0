"""Test functions and k-point statistics of point configurations.

``T_phi(L) = sum over ordered k-tuples of distinct slots of L of phi(tuple)``;
its expectation is the k-point measure tested against ``phi``. Repeated
points are separate slots, so two coincident points form a valid pair.
"""

from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass

import numpy as np

from .gaf import intensity1
from .kacsim import PointConfiguration

__all__ = [
    "BATTERY_VERSION",
    "CorrelationEstimate",
    "TestFunction",
    "battery_descriptor",
    "estimate",
    "estimate_values",
    "factorial_moment",
    "falling_factorial",
    "gaf_first_moment",
    "phi_battery",
    "t_phi",
]

BATTERY_VERSION = "1"

_K1_BUMPS = ((0.0 + 0.0j, 1.0), (1.0 + 1.0j, 1.5), (-2.0 + 0.0j, 2.0))
_K2_SEPARATIONS = (0.5, 1.0, 2.0, 4.0)
_K2_RADIUS = 1.0
_K3_RING = 1.5
_K3_RADIUS = 1.0


@dataclass(frozen=True)
class TestFunction:
    """``phi(z_1..z_k) = prod_j max(0, 1 - |z_j - c_j|^2 / r_j^2)^2``."""

    __test__ = False  # not a pytest class

    phi_id: str
    factors: tuple[tuple[complex, float], ...]

    @property
    def k(self) -> int:
        return len(self.factors)

    @property
    def support_disks(self) -> tuple[tuple[complex, float], ...]:
        return self.factors

    def factor_values(self, points) -> np.ndarray:
        """Bump values, shape ``(k, len(points))``."""
        pts = np.asarray(points, dtype=np.complex128).ravel()
        c = np.array([f[0] for f in self.factors], dtype=np.complex128)[:, None]
        r = np.array([f[1] for f in self.factors], dtype=float)[:, None]
        u = 1.0 - np.abs(pts[None, :] - c) ** 2 / r**2
        return np.maximum(u, 0.0) ** 2

    def __call__(self, *zs) -> float:
        if len(zs) != self.k:
            raise ValueError(f"{self.phi_id} takes {self.k} arguments")
        vals = self.factor_values(np.array(zs))
        return float(np.prod(np.diag(vals)))

    def support_radius(self) -> float:
        """Radius of the smallest origin-centred disk containing every factor support."""
        return max(abs(c) + r for c, r in self.factors)

    def as_dict(self) -> dict:
        return {
            "phi_id": self.phi_id,
            "k": self.k,
            "factors": [{"center": [c.real, c.imag], "radius": r} for c, r in self.factors],
        }


def phi_battery(k: int, window_R: float = 4.0) -> list[TestFunction]:
    """The frozen battery of bump test functions of order ``k``.

    * k=1: bumps at 0, 1+i, -2 with radii 1, 1.5, 2.
    * k=2: pairs of unit bumps at ``-s/2`` and ``+s/2`` for ``s`` in 0.5, 1, 2, 4.
    * k=3: unit bumps at the vertices of an equilateral triangle of circumradius 1.5.
    """
    if k == 1:
        fns = [TestFunction(f"k1-{i}", ((complex(c), float(r)),)) for i, (c, r) in enumerate(_K1_BUMPS)]
    elif k == 2:
        fns = [
            TestFunction(f"k2-sep{s:g}", ((complex(-s / 2), _K2_RADIUS), (complex(s / 2), _K2_RADIUS)))
            for s in _K2_SEPARATIONS
        ]
    elif k == 3:
        verts = [_K3_RING * complex(math.cos(a), math.sin(a)) for a in (0.0, 2 * math.pi / 3, 4 * math.pi / 3)]
        fns = [TestFunction("k3-tri", tuple((v, _K3_RADIUS) for v in verts))]
    else:
        raise ValueError(f"no battery for k={k}; supported k are 1, 2, 3")
    for f in fns:
        if f.support_radius() > window_R + 1e-12:
            raise ValueError(f"{f.phi_id} support reaches radius {f.support_radius()} > window {window_R}")
    return fns


def battery_descriptor(ks=(1, 2, 3), window_R: float = 4.0) -> str:
    """Versioned JSON description of the battery, shipped next to results."""
    doc = {
        "version": BATTERY_VERSION,
        "bump": "prod_j max(0, 1 - |z_j - c_j|^2 / r_j^2)^2",
        "functions": [f.as_dict() for k in ks for f in phi_battery(k, window_R)],
    }
    return json.dumps(doc, indent=2, sort_keys=True)


def _points_of(config) -> tuple[np.ndarray, float]:
    if isinstance(config, PointConfiguration):
        return config.points, config.window_R
    pts = np.asarray(config, dtype=np.complex128).ravel()
    return pts, math.inf


def t_phi(config, phi, *, prune: bool = True) -> float:
    """``sum over ordered k-tuples of distinct slots of phi(tuple)``.

    With ``prune`` only points inside the union of the factor supports are
    enumerated. ``phi`` needs ``k``, ``support_disks`` and ``factor_values``.
    """
    pts, window = _points_of(config)
    for c, r in phi.support_disks:
        if abs(c) + r > window + 1e-12:
            raise ValueError(f"test function support leaves the configuration window {window}")
    k = phi.k
    if prune and pts.size:
        keep = np.zeros(pts.size, dtype=bool)
        for c, r in phi.support_disks:
            keep |= np.abs(pts - c) <= r
        pts = pts[keep]
    if pts.size < k:
        return 0.0
    F = phi.factor_values(pts)
    if k == 1:
        return float(F[0].sum())
    if k == 2:
        return float(F[0].sum() * F[1].sum() - np.dot(F[0], F[1]))
    total = 0.0
    rows = range(k)
    for tup in itertools.permutations(range(pts.size), k):
        total += float(np.prod(F[rows, tup]))
    return total


def falling_factorial(z: int, k: int) -> int:
    out = 1
    for j in range(k):
        out *= z - j
    return max(out, 0)


def factorial_moment(config: PointConfiguration, k: int, R: float) -> int:
    """``Z (Z-1) ... (Z-k+1)`` for ``Z`` the number of points in the disk of radius ``R``."""
    if R > config.window_R:
        raise ValueError(f"radius {R} exceeds configuration window {config.window_R}")
    z = int(np.count_nonzero(np.abs(config.points) <= R))
    return falling_factorial(z, k)


@dataclass(frozen=True)
class CorrelationEstimate:
    k: int
    phi_id: str
    law_id: str
    n: int | str
    mean: float
    stderr: float
    trials: int


def estimate_values(values, *, k: int, phi_id: str, law_id: str, n) -> CorrelationEstimate:
    """Mean and standard error of per-trial values given in trial order."""
    v = np.asarray(values, dtype=float)
    if v.size < 2:
        raise ValueError(f"need at least 2 trials, got {v.size}")
    # sequential sums keep the result independent of any chunking upstream
    mean = math.fsum(v) / v.size
    var = math.fsum((v - mean) ** 2) / (v.size - 1)
    return CorrelationEstimate(k, phi_id, law_id, n, mean, math.sqrt(var / v.size), int(v.size))


def estimate(configs, phi, *, law_id: str = "", n="") -> CorrelationEstimate:
    """Monte Carlo estimate of ``E[T_phi]`` over configurations in trial order."""
    configs = list(configs)
    if len(configs) < 2:
        raise ValueError(f"need at least 2 configurations, got {len(configs)}")
    values = [t_phi(c, phi) for c in configs]
    return estimate_values(values, k=phi.k, phi_id=phi.phi_id, law_id=law_id, n=n)


def gaf_first_moment(phi: TestFunction, nodes: int = 64) -> float:
    """``integral of phi * rho_1 dA`` for a one-factor test function.

    Polar Gauss-Legendre around the bump centre; the bump is a polynomial in
    the radius, so the radial rule is exact up to the smooth ``rho_1`` factor.
    """
    if phi.k != 1:
        raise ValueError("only one-factor test functions have a first-moment integral")
    (c, r), = phi.factors
    x, w = np.polynomial.legendre.leggauss(nodes)
    rho = 0.5 * r * (x + 1.0)
    wr = 0.5 * r * w
    ang = 2 * math.pi * np.arange(2 * nodes) / (2 * nodes)
    pts = c + rho[:, None] * np.exp(1j * ang)[None, :]
    bump = (1.0 - (rho / r) ** 2) ** 2
    inner = intensity1(pts).mean(axis=1) * 2 * math.pi
    return float(np.sum(wr * rho * bump * inner))
