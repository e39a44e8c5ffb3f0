"""Normalized coefficient laws and counter-based random streams.

Every law has mean 0 and unit second absolute moment, so a Kac polynomial
built from it is admissible regardless of which law is picked.
"""

from __future__ import annotations

import hashlib
import math
import re
from dataclasses import dataclass

import numpy as np

__all__ = [
    "LAW_KINDS",
    "CoefficientLaw",
    "RngStream",
    "make_law",
    "parse_law",
    "sample_coeffs",
    "stream_index_for",
]

LAW_KINDS = ("gaussian-complex", "gaussian-real", "rademacher", "uniform-real", "two-point")

_MASK64 = (1 << 64) - 1
_TWO_POINT_RE = re.compile(r"^two-point\(\s*([0-9.eE+-]+)\s*\)$")


@dataclass(frozen=True)
class CoefficientLaw:
    """A mean-zero, unit-variance distribution for the coefficients.

    ``pseudo_moment`` is ``E[xi**2]`` and ``fourth_moment`` is ``E[|xi|**4]``,
    both exact for the kind.
    """

    kind: str
    p: float | None = None
    is_complex: bool = False
    pseudo_moment: complex = 1.0
    fourth_moment: float = 1.0

    @property
    def name(self) -> str:
        if self.kind == "two-point":
            return f"two-point({self.p:g})"
        return self.kind

    def support(self) -> tuple[float, ...] | None:
        """Atoms of a discrete law, ``None`` for continuous ones."""
        if self.kind == "rademacher":
            return (-1.0, 1.0)
        if self.kind == "two-point":
            p = self.p
            return (math.sqrt((1 - p) / p), -math.sqrt(p / (1 - p)))
        return None

    def draw(self, gen: np.random.Generator, size) -> np.ndarray:
        """Draw ``size`` i.i.d. values as complex128."""
        if self.kind == "gaussian-complex":
            z = gen.standard_normal(size=_pair(size))
            return (z[0] + 1j * z[1]) / math.sqrt(2.0)
        if self.kind == "gaussian-real":
            x = gen.standard_normal(size=size)
        elif self.kind == "rademacher":
            x = 2.0 * gen.integers(0, 2, size=size) - 1.0
        elif self.kind == "uniform-real":
            s3 = math.sqrt(3.0)
            x = gen.uniform(-s3, s3, size=size)
        elif self.kind == "two-point":
            hi, lo = self.support()
            x = np.where(gen.random(size=size) < self.p, hi, lo)
        else:  # pragma: no cover - guarded by make_law
            raise ValueError(f"unknown law kind {self.kind!r}")
        return np.asarray(x, dtype=np.complex128)


def _pair(size):
    if isinstance(size, (tuple, list)):
        return (2,) + tuple(size)
    return (2, size)


def make_law(kind: str, params: dict | None = None) -> CoefficientLaw:
    """Build a normalized law by name.

    Parameters
    ----------
    kind : str
        One of :data:`LAW_KINDS`.
    params : dict, optional
        ``{"p": float}`` for ``two-point``; must be empty otherwise.
    """
    params = dict(params or {})
    if kind not in LAW_KINDS:
        raise ValueError(f"unknown coefficient law {kind!r}; expected one of {LAW_KINDS}")
    if kind == "two-point":
        if set(params) != {"p"}:
            raise ValueError("two-point law requires exactly one parameter 'p'")
        p = float(params["p"])
        if not 0.0 < p < 1.0:
            raise ValueError(f"two-point parameter p={p} outside (0, 1)")
        fourth = (1 - p) ** 2 / p + p**2 / (1 - p)
        return CoefficientLaw("two-point", p=p, pseudo_moment=1.0, fourth_moment=fourth)
    if params:
        raise ValueError(f"law {kind!r} takes no parameters, got {sorted(params)}")
    if kind == "gaussian-complex":
        return CoefficientLaw(kind, is_complex=True, pseudo_moment=0.0, fourth_moment=2.0)
    fourth = {"gaussian-real": 3.0, "rademacher": 1.0, "uniform-real": 9.0 / 5.0}[kind]
    return CoefficientLaw(kind, pseudo_moment=1.0, fourth_moment=fourth)


def parse_law(name: str) -> CoefficientLaw:
    """Parse a law name as written in configs and CLI flags, e.g. ``two-point(0.2)``."""
    name = name.strip()
    m = _TWO_POINT_RE.match(name)
    if m:
        return make_law("two-point", {"p": float(m.group(1))})
    return make_law(name)


class RngStream:
    """Philox counter-based stream keyed by ``(master_seed, stream_index)``.

    Replaying the same triple reproduces the same draws bit for bit; distinct
    keys give independent sequences. ``counter`` is the Philox block counter,
    so a replay resumes at a block boundary.
    """

    def __init__(self, master_seed: int, stream_index: int, counter: int = 0):
        self.master_seed = int(master_seed) & _MASK64
        self.stream_index = int(stream_index) & _MASK64
        key = np.array([self.master_seed, self.stream_index], dtype=np.uint64)
        self._bitgen = np.random.Philox(key=key, counter=int(counter) & _MASK64)
        self.generator = np.random.Generator(self._bitgen)

    @property
    def counter(self) -> int:
        return int(self._bitgen.state["state"]["counter"][0])

    def __repr__(self) -> str:
        return f"RngStream(master_seed={self.master_seed}, stream_index={self.stream_index}, counter={self.counter})"


def stream_index_for(cell_id: str, trial: int) -> int:
    """Stream index of ``trial`` within a cell: ``hash(cell_id) XOR trial``.

    The hash is the first 8 bytes of BLAKE2b over the UTF-8 cell id, so the
    mapping is stable across processes and Python versions.
    """
    digest = hashlib.blake2b(cell_id.encode("utf-8"), digest_size=8).digest()
    return int.from_bytes(digest, "little") ^ int(trial)


def sample_coeffs(law: CoefficientLaw, n: int, stream: RngStream) -> np.ndarray:
    """Return ``n + 1`` i.i.d. coefficients ``xi_0 .. xi_n`` drawn from ``law``."""
    if n < 1:
        raise ValueError(f"degree must be >= 1, got {n}")
    return law.draw(stream.generator, n + 1)
