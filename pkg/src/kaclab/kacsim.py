"""Kac polynomials seen from a point of the unit circle.

With ``zeta0 = exp(i theta)`` the microscopic rescaling is
``F_n(z) = n**-0.5 * f_n(zeta0 * (1 + z / n))``; a root ``a`` of ``f_n`` maps
to ``w = n * (a / zeta0 - 1)``.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, field

import numpy as np

from .coeffs import CoefficientLaw, RngStream, sample_coeffs
from .polyroots import Polynomial, RootReport, horner_eval

__all__ = [
    "THETA_MARGIN",
    "LocalFrame",
    "PointConfiguration",
    "disk_count",
    "eval_Fn",
    "fn_cov",
    "geometric_sum",
    "local_roots",
    "sample_kac",
    "sample_kac_counted",
]

THETA_MARGIN = 0.1
DIRECT_SUM_THRESHOLD = 1e-6


@dataclass(frozen=True)
class LocalFrame:
    """Microscopic frame at ``zeta0 = exp(i theta)`` for degree ``n``.

    ``theta`` must lie in ``(THETA_MARGIN, pi - THETA_MARGIN)``.
    """

    theta: float
    n: int
    zeta0: complex = field(init=False)

    def __post_init__(self):
        if not THETA_MARGIN < self.theta < math.pi - THETA_MARGIN:
            raise ValueError(
                f"theta={self.theta} outside ({THETA_MARGIN}, pi - {THETA_MARGIN}); "
                "frames on or near the real axis are excluded"
            )
        if self.n < 1:
            raise ValueError(f"degree must be >= 1, got {self.n}")
        object.__setattr__(self, "zeta0", cmath.exp(1j * self.theta))

    def to_global(self, w):
        """Inverse of the microscopic map: ``w -> zeta0 * (1 + w / n)``."""
        return self.zeta0 * (1.0 + np.asarray(w) / self.n)

    def as_dict(self) -> dict:
        return {"theta": self.theta, "n": self.n}


@dataclass(frozen=True)
class PointConfiguration:
    """Finite multiset of points inside the closed disk of radius ``window_R``."""

    points: np.ndarray
    window_R: float

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=np.complex128).ravel()
        if pts.size and np.max(np.abs(pts)) > self.window_R:
            raise ValueError("configuration has points outside its window")
        object.__setattr__(self, "points", pts)

    def __len__(self):
        return self.points.size


def sample_kac_counted(law: CoefficientLaw, frame: LocalFrame, stream: RngStream) -> tuple[Polynomial, int]:
    """Like :func:`sample_kac` but also returns how many draws were rejected."""
    rejected = 0
    while True:
        c = sample_coeffs(law, frame.n, stream)
        if c[-1] != 0:
            return Polynomial(c), rejected
        rejected += 1


def sample_kac(law: CoefficientLaw, frame: LocalFrame, stream: RngStream) -> Polynomial:
    """Degree-``frame.n`` Kac polynomial with i.i.d. coefficients from ``law``.

    A draw whose leading coefficient is exactly zero is redrawn in full.
    """
    return sample_kac_counted(law, frame, stream)[0]


def eval_Fn(p, frame: LocalFrame, z):
    """``F_n(z) = n**-0.5 * p(zeta0 + zeta0 * z / n)`` by Horner's rule."""
    val, _, _ = horner_eval(p, frame.to_global(z))
    return val / math.sqrt(frame.n)


def local_roots(report: RootReport, frame: LocalFrame, R: float) -> PointConfiguration:
    """Zeros of ``F_n`` in the closed disk of radius ``R``."""
    if not report.converged:
        raise ValueError("root report did not converge; refusing to rescale")
    w = frame.n * (np.asarray(report.roots) / frame.zeta0 - 1.0)
    return PointConfiguration(w[np.abs(w) <= R], R)


def disk_count(config: PointConfiguration, R: float) -> int:
    """Number of points with modulus at most ``R``, counted with multiplicity."""
    if R > config.window_R:
        raise ValueError(f"radius {R} exceeds configuration window {config.window_R}")
    return int(np.count_nonzero(np.abs(config.points) <= R))


def geometric_sum(n: int, one_minus_r: complex, log_r: complex) -> complex:
    """``sum_{k=0}^n r**k`` from ``1 - r`` and ``log r`` without cancellation.

    Near ``r = 1`` (``|1 - r| < 1e-6``) the terms are summed directly.
    """
    if abs(one_minus_r) < DIRECT_SUM_THRESHOLD:
        r = 1.0 - one_minus_r
        k = np.arange(n + 1)
        if r == 1.0:
            return complex(n + 1)
        return complex(np.sum(np.exp(k * log_r)))
    return -_expm1((n + 1) * log_r) / one_minus_r


def _expm1(x: complex) -> complex:
    # complex expm1 keeping relative accuracy for small |x|
    if abs(x) < 1e-5:
        return x + x * x / 2 + x**3 / 6
    if abs(x) < 0.5:
        re, im = x.real, x.imag
        em = math.expm1(re)
        # exp(re)(cos im + i sin im) - 1
        cm1 = -2.0 * math.sin(im / 2) ** 2
        return complex(em * math.cos(im) + cm1, math.exp(re) * math.sin(im))
    return cmath.exp(x) - 1.0


def fn_cov(frame: LocalFrame, law: CoefficientLaw, z: complex, w: complex) -> tuple[complex, complex]:
    """Exact ``E[F_n(z) conj F_n(w)]`` and ``E[F_n(z) F_n(w)]`` at finite ``n``.

    Both are geometric sums in ``psi_n(z, w) = (1 + z/n)(1 + w/n)``: the
    covariance uses ratio ``psi_n(z, conj w)``, the pseudo-covariance ratio
    ``zeta0**2 * psi_n(z, w)`` scaled by ``E[xi**2]``.
    """
    n = frame.n
    a = complex(z) / n
    b = complex(w).conjugate() / n
    cov = geometric_sum(n, -(a + b + a * b), cmath.log(1 + a) + cmath.log(1 + b)) / n
    pm = complex(law.pseudo_moment)
    if pm == 0:
        return cov, 0j
    b2 = complex(w) / n
    zeta2 = frame.zeta0**2
    r = zeta2 * (1 + a) * (1 + b2)
    log_r = 2j * frame.theta + cmath.log(1 + a) + cmath.log(1 + b2)
    pseudo = pm * geometric_sum(n, 1.0 - r, log_r) / n
    return cov, pseudo
