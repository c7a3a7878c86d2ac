"""Branch bookkeeping on the Riemann surface of ``tau_j(z) = (z - sigma_j^2)^(1/2)``.

A point of the surface is a complex number plus the finite set of modes
whose square root is taken on the lower branch (``Im tau_j <= 0``).  With no
flips and ``z`` off ``[sigma_1^2, inf)`` this is the physical region, where
every ``Im tau_j > 0``.  Boundary points ``E +- i0`` are the limits from the
upper and lower half planes of the physical region.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Union

import numpy as np

from .cross_section import ModeBasis

#: relative tolerance for ``E == sigma_j^2`` (ramification)
RAMIFICATION_TOL = 1e-14


class RamificationError(ValueError):
    pass


@dataclass(frozen=True)
class SheetPoint:
    z: complex
    flipped: frozenset = field(default_factory=frozenset)

    def __post_init__(self):
        object.__setattr__(self, "z", complex(self.z))
        fl = frozenset(int(j) for j in self.flipped)
        if any(j < 1 for j in fl):
            raise ValueError("mode indices are 1-based")
        object.__setattr__(self, "flipped", fl)

    def to_json(self) -> dict:
        return {"re": self.z.real, "im": self.z.imag, "flipped": sorted(self.flipped)}

    @classmethod
    def from_json(cls, d: dict) -> "SheetPoint":
        return cls(complex(d["re"], d["im"]), frozenset(d.get("flipped", ())))


@dataclass(frozen=True)
class BoundaryPoint:
    """``E + i0`` (``side = +1``) or ``E - i0`` (``side = -1``)."""

    E: float
    side: int = 1

    def __post_init__(self):
        if self.side not in (1, -1):
            raise ValueError("side must be +1 or -1")
        if not math.isfinite(self.E):
            raise ValueError("E must be finite")
        object.__setattr__(self, "E", float(self.E))

    @property
    def z(self) -> complex:
        return complex(self.E, 0.0)

    @property
    def flipped(self) -> frozenset:
        return frozenset()

    def to_json(self) -> dict:
        return {"E": self.E, "side": self.side}


Point = Union[SheetPoint, BoundaryPoint]


def branch_tau(p: Point, s2: float, flip: bool = False):
    """``tau`` for a threshold ``s2`` (``sigma^2`` or a discrete eigenvalue).

    Returns ``(tau, ramified)``; at a ramification point ``tau`` is 0.
    """
    if isinstance(p, BoundaryPoint):
        d = p.E - s2
        if abs(d) <= RAMIFICATION_TOL * max(1.0, abs(s2)):
            return 0j, True
        if d > 0:
            t = complex(p.side * math.sqrt(d), 0.0)
        else:
            t = complex(0.0, math.sqrt(-d))
        return (-t if flip else t), False
    w = p.z - s2
    if abs(w) <= RAMIFICATION_TOL * max(1.0, abs(s2)):
        return 0j, True
    t = np.sqrt(w)
    if t.imag < 0 or (t.imag == 0 and t.real < 0):
        t = -t
    return (-t if flip else t), False


def tau_array(p: Point, s2: np.ndarray, flips: np.ndarray) -> np.ndarray:
    """Vectorised :func:`branch_tau`; raises on a ramification point."""
    s2 = np.asarray(s2, dtype=float)
    flips = np.asarray(flips, dtype=bool)
    if isinstance(p, BoundaryPoint):
        d = p.E - s2
        t = np.where(d > 0, p.side * np.sqrt(np.abs(d)) + 0j, 1j * np.sqrt(np.abs(d)))
    else:
        d = p.z - s2
        t = np.sqrt(d.astype(complex))
        neg = (t.imag < 0) | ((t.imag == 0) & (t.real < 0))
        t = np.where(neg, -t, t)
    if np.any(np.abs(d) <= RAMIFICATION_TOL * np.maximum(1.0, np.abs(s2))):
        raise RamificationError("threshold point: closure singular")
    return np.where(flips, -t, t)


def tau(p: Point, j: int, basis: ModeBasis) -> complex:
    """``tau_j`` at ``p``.  Returns 0 at a ramification point (see :func:`is_ramification`)."""
    s = basis.sigma(j)
    return branch_tau(p, s * s, j in p.flipped)[0]


def is_ramification(p: Point, j: int, basis: ModeBasis) -> bool:
    s = basis.sigma(j)
    return branch_tau(p, s * s)[1]


def is_physical(p: Point, basis: ModeBasis | None = None) -> bool:
    """``Im tau_j > 0`` for every ``j``: no flips and ``z`` off ``[sigma_1^2, inf)``."""
    if isinstance(p, BoundaryPoint):
        return False if basis is None else p.E < basis.sigma(1) ** 2
    if p.flipped:
        return False
    if p.z.imag != 0:
        return True
    if basis is None:
        raise ValueError("a basis is needed to place a real z relative to sigma_1^2")
    return p.z.real < basis.sigma(1) ** 2


def metric_d(p: Point, q: Point, basis: ModeBasis, detail: bool = False):
    """``sup_j |tau_j(p) - tau_j(q)|`` with a certified tail bound.

    For ``sigma_j^2 >= 2 M`` (``M = max(|z|, |z'|)``) and ``j`` beyond every
    flipped index both roots lie on the same branch and
    ``|tau_j(z) - tau_j(z')| <= |z - z'| / (2 sqrt(sigma_j^2 - M))``, which
    decreases in ``j``.  The sup is extended until that bound falls below the
    running maximum (or below round-off of the ``tau`` values).  With
    ``detail=True`` returns ``(d, argmax, J)``.
    """
    zp, zq = p.z, q.z
    M = max(abs(zp), abs(zq))
    last_flip = max(p.flipped | q.flipped, default=0)
    dz = abs(zp - zq)
    J = max(len(basis), last_flip + 1)
    while True:
        if J > len(basis):
            basis = basis.extended(J)
        s2 = basis.sigmas ** 2
        fp = np.array([j in p.flipped for j in range(1, J + 1)])
        fq = np.array([j in q.flipped for j in range(1, J + 1)])
        tp = _tau_all(p, s2, fp)
        tq = _tau_all(q, s2, fq)
        diff = np.abs(tp - tq)
        k = int(np.argmax(diff))
        best = float(diff[k])
        nxt = basis.extended(J + 1).sigma(J + 1) ** 2
        if nxt >= 2 * M and J >= last_flip:
            bound = dz / (2.0 * math.sqrt(nxt - M))
            # below the resolution of the computed tau values the tail cannot matter
            resolution = 4.0 * np.finfo(float).eps * math.sqrt(max(nxt, 1.0))
            if bound <= max(best, resolution):
                return (best, k + 1, J) if detail else best
        J *= 2


def _tau_all(p: Point, s2, flips):
    out = np.empty(len(s2), dtype=complex)
    for i, (s, f) in enumerate(zip(s2, flips)):
        out[i] = branch_tau(p, s, bool(f))[0]
    return out


def continued_sheet(E: float, basis: ModeBasis) -> frozenset:
    """Flip set reached from the upper half plane by crossing the real axis at ``E``."""
    return frozenset(j for j in range(1, len(basis) + 1) if basis.sigma(j) ** 2 < E)
