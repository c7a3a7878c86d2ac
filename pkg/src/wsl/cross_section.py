"""Closed-form Dirichlet spectra of planar cross-sections.

A cross-section is a finite union of disjoint open intervals.  On an interval
``(a, b)`` of length ``l`` the Dirichlet eigenpairs are

    sigma_k = k pi / l,   phi_k(y) = sqrt(2 / l) sin(k pi (y - a) / l),

and the spectrum of a union is the merge of the per-interval spectra.  Mode
indices ``j`` are 1-based throughout the package, matching the usual
``sigma_1 <= sigma_2 <= ...`` labelling.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, NamedTuple, Sequence

import numpy as np

#: two sigma values closer than this are treated as one eigenvalue
SIGMA_EQ_TOL = 1e-12


@dataclass(frozen=True)
class CrossSection:
    """Sorted union of disjoint open intervals ``(a_i, b_i)``."""

    intervals: tuple[tuple[float, float], ...]

    def __post_init__(self):
        ivs = tuple(sorted((float(a), float(b)) for a, b in self.intervals))
        for a, b in ivs:
            if not b - a > 0:
                raise ValueError(f"empty or reversed interval ({a}, {b})")
        for (_, b0), (a1, _) in zip(ivs, ivs[1:]):
            if not a1 > b0:
                raise ValueError("cross-section intervals must have disjoint closures")
        object.__setattr__(self, "intervals", ivs)

    @classmethod
    def from_pairs(cls, pairs: Iterable[Sequence[float]]) -> "CrossSection":
        return cls(tuple((p[0], p[1]) for p in pairs))

    @property
    def is_empty(self) -> bool:
        return not self.intervals

    def contains(self, y) -> np.ndarray:
        y = np.asarray(y, dtype=float)
        out = np.zeros(y.shape, dtype=bool)
        for a, b in self.intervals:
            out |= (y > a) & (y < b)
        return out

    @property
    def diameter(self) -> float:
        if self.is_empty:
            return 0.0
        return self.intervals[-1][1] - self.intervals[0][0]

    def to_json(self) -> list[list[float]]:
        return [[a, b] for a, b in self.intervals]


EMPTY = CrossSection(())


class Mode(NamedTuple):
    sigma: float
    interval: int
    harmonic: int


@dataclass(frozen=True)
class ModeBasis:
    """First ``J`` Dirichlet eigenpairs of a (disjoint union of) cross-section(s).

    ``intervals`` lists every interval the modes live on; ``owner`` tags each
    interval with the label of the cross-section it came from (``-1``/``+1``
    for the two ends of a waveguide, ``0`` for a plain cross-section).
    """

    intervals: tuple[tuple[float, float], ...]
    modes: tuple[Mode, ...]
    owner: tuple[int, ...] = field(default=())

    def __len__(self) -> int:
        return len(self.modes)

    @property
    def sigmas(self) -> np.ndarray:
        return np.array([m.sigma for m in self.modes])

    def sigma(self, j: int) -> float:
        return self.modes[self._index(j)].sigma

    def _index(self, j: int) -> int:
        if not 1 <= j <= len(self.modes):
            raise IndexError(f"mode index {j} outside 1..{len(self.modes)}")
        return j - 1

    def extended(self, J: int) -> "ModeBasis":
        """The same spectrum truncated at ``J`` modes instead."""
        return _merge(self.intervals, self.owner, J)

    def index_of(self, interval: int, harmonic: int) -> int:
        """1-based index of the mode with the given interval and harmonic."""
        for j, m in enumerate(self.modes, start=1):
            if m.interval == interval and m.harmonic == harmonic:
                return j
        raise KeyError((interval, harmonic))


def _merge(intervals, owner, J: int) -> ModeBasis:
    if J < 1:
        raise ValueError("J must be >= 1")
    cand = []
    for i, (a, b) in enumerate(intervals):
        length = b - a
        for k in range(1, J + 1):
            cand.append(Mode(k * math.pi / length, i, k))
    cand.sort(key=lambda m: (m.sigma, m.interval, m.harmonic))
    return ModeBasis(tuple(intervals), tuple(cand[:J]), tuple(owner))


def modes(Y: CrossSection, J: int) -> ModeBasis:
    """First ``J`` eigenpairs of ``-d^2/dy^2`` on ``Y`` with Dirichlet conditions."""
    if Y.is_empty:
        raise ValueError("empty cross-section has no modes")
    return _merge(Y.intervals, (0,) * len(Y.intervals), J)


def union_modes(sections: Sequence[tuple[int, CrossSection]], J: int) -> ModeBasis:
    """Modes of the disjoint union of labelled cross-sections.

    The two ends of a waveguide may occupy the same ``y``-range, so the union
    is formal: intervals are concatenated, not merged.
    """
    intervals, owner = [], []
    for label, Y in sections:
        for iv in Y.intervals:
            intervals.append(iv)
            owner.append(label)
    if not intervals:
        raise ValueError("all cross-sections empty")
    return _merge(tuple(intervals), tuple(owner), J)


def evaluate_mode(basis: ModeBasis, j: int, y):
    """Unit-normalised eigenfunction ``phi_j`` at ``y`` (zero off its interval)."""
    m = basis.modes[basis._index(j)]
    a, b = basis.intervals[m.interval]
    y = np.asarray(y, dtype=float)
    length = b - a
    val = math.sqrt(2.0 / length) * np.sin(m.harmonic * math.pi * (y - a) / length)
    out = np.where((y > a) & (y < b), val, 0.0)
    return float(out) if out.ndim == 0 else out


def weyl_count(Y: CrossSection, lam: float) -> int:
    """Number of ``sigma_j <= lam`` counted with multiplicity."""
    return sum(math.floor(lam * (b - a) / math.pi + 1e-12) for a, b in Y.intervals)


@dataclass(frozen=True)
class GapCheck:
    ok: bool
    witness: tuple[float, float] | None = None

    def __bool__(self) -> bool:
        return self.ok


def distinct_sigmas(basis: ModeBasis) -> np.ndarray:
    s = np.sort(basis.sigmas)
    keep = [s[0]]
    for v in s[1:]:
        if v - keep[-1] > SIGMA_EQ_TOL * max(1.0, v):
            keep.append(v)
    return np.array(keep)


def check_gap_condition(basis: ModeBasis, c_Y: float, N_Y: float) -> GapCheck:
    """Check ``sigma' - sigma >= c_Y sigma^(-N_Y)`` for consecutive distinct values."""
    if c_Y <= 0 or N_Y < 0:
        raise ValueError("need c_Y > 0 and N_Y >= 0")
    d = distinct_sigmas(basis)
    if len(d) < 2:
        raise ValueError("gap condition needs at least two distinct eigenvalues")
    for s0, s1 in zip(d, d[1:]):
        if s1 - s0 < c_Y * s0 ** (-N_Y):
            return GapCheck(False, (float(s0), float(s1)))
    return GapCheck(True)
