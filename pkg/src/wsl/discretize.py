"""Staircase finite-difference grids, the 5-point Laplacian, weights and cutoffs.

Nodes sit on the lattice ``(i h, y_ref + j h)`` where ``y_ref`` is the lower
wall of the first nonempty end, so straight end walls fall on grid lines when
``h`` divides the end widths.  Masks are ``(nx, ny)`` boolean arrays and
unknowns are numbered by flattening the mask in C order, so each column of
constant ``x`` is contiguous.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy.sparse as sp

from .geometry import GeometryError, WaveguideDomain

MIN_NODES_ACROSS = 8


@dataclass(frozen=True)
class Face:
    """Nodes on a truncation face ``x = side * L``.

    ``runs`` lists the contiguous blocks of face nodes (one per interval of
    the end cross-section) as ``(unknown indices, interval index)``.
    """

    side: int
    column: int
    runs: tuple[tuple[np.ndarray, int], ...]

    @property
    def nodes(self) -> np.ndarray:
        return np.concatenate([r for r, _ in self.runs])


@dataclass(frozen=True, eq=False)
class Grid:
    domain: WaveguideDomain
    h: float
    xs: np.ndarray
    ys: np.ndarray
    mask: np.ndarray
    faces: dict = field(default_factory=dict)
    L: float = 0.0

    @property
    def shape(self) -> tuple[int, int]:
        return self.mask.shape

    @property
    def n(self) -> int:
        return int(self.mask.sum())

    @property
    def index(self) -> np.ndarray:
        """``(nx, ny)`` array of unknown numbers, ``-1`` off the mask."""
        idx = np.full(self.mask.shape, -1, dtype=np.int64)
        idx[self.mask] = np.arange(self.n)
        return idx

    @property
    def X(self) -> np.ndarray:
        return np.broadcast_to(self.xs[:, None], self.mask.shape)[self.mask]

    @property
    def Y(self) -> np.ndarray:
        return np.broadcast_to(self.ys[None, :], self.mask.shape)[self.mask]

    def to_full(self, u) -> np.ndarray:
        """Scatter unknowns into an ``(nx, ny)`` array padded with zeros."""
        u = np.asarray(u)
        out = np.zeros(self.mask.shape, dtype=u.dtype)
        out[self.mask] = u
        return out

    def inner(self, u, v) -> complex:
        """Discrete ``L^2`` inner product ``h^2 sum u conj(v)``."""
        return self.h**2 * np.vdot(v, u)

    def norm(self, u) -> float:
        return float(self.h * np.linalg.norm(u))

    def metadata(self) -> dict:
        return {
            "h": self.h,
            "L": self.L,
            "nx": int(self.mask.shape[0]),
            "ny": int(self.mask.shape[1]),
            "x0": float(self.xs[0]),
            "y0": float(self.ys[0]),
            "unknowns": self.n,
            "faces": {str(s): int(len(f.nodes)) for s, f in self.faces.items()},
            "mask_layout": "uint8, row-major (nx, ny), index [i, j] at x0 + i h, y0 + j h",
        }


def _y_anchor(domain: WaveguideDomain) -> float:
    for _, Y in domain.ends:
        return Y.intervals[0][0]
    return domain.y_range()[0]


def build_grid(domain: WaveguideDomain, h: float, L: float) -> Grid:
    """Staircase grid of ``domain`` truncated to ``|x| <= L``.

    Nodes strictly inside the domain are unknowns.  Faces are the columns at
    ``x = +-L`` on sides with a nonempty end; ``L`` is rounded to a multiple
    of ``h``.
    """
    if not h > 0:
        raise GeometryError("h must be positive")
    if domain.cylindrical and not L > domain.R0:
        raise GeometryError(f"truncation L={L} must exceed R0={domain.R0}")
    for _, Y in domain.ends:
        for a, b in Y.intervals:
            if (b - a) / h < MIN_NODES_ACROSS + 1:
                raise GeometryError(
                    f"h={h} too coarse: fewer than {MIN_NODES_ACROSS} nodes across channel ({a}, {b})")
    iL = int(round(L / h))
    lo, hi = domain.x_range()
    i_hi = iL if not domain.Y_plus.is_empty or not domain.cylindrical else int(math.ceil(hi / h))
    i_lo = -iL if not domain.Y_minus.is_empty else int(math.floor(lo / h))
    if not domain.cylindrical:
        i_lo, i_hi = int(math.floor(lo / h)) if math.isfinite(lo) else -iL, iL
    y_ref = _y_anchor(domain)
    y_lo, y_hi = domain.y_range()
    j_lo = int(math.floor((y_lo - y_ref) / h))
    j_hi = int(math.ceil((y_hi - y_ref) / h))
    xs = np.arange(i_lo, i_hi + 1) * h
    ys = y_ref + np.arange(j_lo, j_hi + 1) * h
    XX, YY = np.meshgrid(xs, ys, indexing="ij")
    mask = domain.inside(XX, YY)
    # drop empty border rows/columns
    cols = np.flatnonzero(mask.any(axis=1))
    rows = np.flatnonzero(mask.any(axis=0))
    if cols.size == 0:
        raise GeometryError("grid contains no interior nodes")
    mask = mask[cols[0]:cols[-1] + 1, rows[0]:rows[-1] + 1]
    xs = xs[cols[0]:cols[-1] + 1]
    ys = ys[rows[0]:rows[-1] + 1]

    idx = np.full(mask.shape, -1, dtype=np.int64)
    idx[mask] = np.arange(mask.sum())
    faces = {}
    for side, Y in domain.ends:
        col = mask.shape[0] - 1 if side > 0 else 0
        if abs(abs(xs[col]) - iL * h) > 1e-9 * h:
            raise GeometryError("end face not on the grid boundary")
        runs = []
        offset = 0 if side < 0 else len(domain.Y_minus.intervals)
        for k, (a, b) in enumerate(Y.intervals):
            sel = mask[col] & (ys > a) & (ys < b)
            nodes = idx[col, sel]
            if nodes.size == 0:
                raise GeometryError("face nodes empty on a nonempty end")
            runs.append((nodes, offset + k))
        faces[side] = Face(side, col, tuple(runs))
    return Grid(domain, float(h), xs, ys, mask, faces, iL * h)


# --------------------------------------------------------------------------- operator


@dataclass(frozen=True, eq=False)
class DiscreteOperator:
    """``-Delta_h`` with Dirichlet conditions off the mask (and at the faces)."""

    grid: Grid
    A: sp.csr_matrix

    @property
    def shape(self):
        return self.A.shape

    def __matmul__(self, u):
        return self.A @ u


def _neighbour_pairs(mask: np.ndarray, idx: np.ndarray):
    """Unknown-index pairs of horizontal and vertical nearest neighbours."""
    hx = mask[:-1, :] & mask[1:, :]
    hy = mask[:, :-1] & mask[:, 1:]
    return (idx[:-1, :][hx], idx[1:, :][hx]), (idx[:, :-1][hy], idx[:, 1:][hy])


def assemble_laplacian(grid: Grid) -> DiscreteOperator:
    n = grid.n
    (ax, bx), (ay, by) = _neighbour_pairs(grid.mask, grid.index)
    rows = np.concatenate([ax, bx, ay, by])
    cols = np.concatenate([bx, ax, by, ay])
    off = sp.coo_matrix((np.full(rows.size, -1.0), (rows, cols)), shape=(n, n))
    A = (sp.identity(n, format="csr") * 4.0 + off.tocsr()) / grid.h**2
    return DiscreteOperator(grid, A.tocsr())


# --------------------------------------------------------------------------- weights


def _smooth_step(t):
    """C-infinity step: 0 for t <= 0, 1 for t >= 1."""
    t = np.asarray(t, dtype=float)
    a = np.where(t > 0, np.exp(-1.0 / np.where(t > 0, t, 1.0)), 0.0)
    b = np.where(t < 1, np.exp(-1.0 / np.where(t < 1, 1.0 - t, 1.0)), 0.0)
    return a / (a + b)


def cutoff(x, inner: float, outer: float, x0: float = 0.0):
    """Smooth even cutoff: 1 for ``|x - x0| <= inner``, 0 for ``|x - x0| >= outer``."""
    if not 0 <= inner < outer:
        raise ValueError("need 0 <= inner < outer")
    r = np.abs(np.asarray(x, float) - x0)
    return 1.0 - _smooth_step((r - inner) / (outer - inner))


WEIGHT_NAMES = ("poly_minus", "poly_plus", "morawetz_w", "cutoff_chi")


def weight_diag(grid: Grid, name: str, delta: float = 1.0, x0: float = 0.0,
                one_ended: bool | None = None, inner: float | None = None,
                outer: float | None = None) -> np.ndarray:
    """Nodewise weight.

    ``poly_minus``/``poly_plus`` are ``(1 + |x - x0|)^(-+(3 + delta)/2)``;
    on one-ended domains the weight is ``(1 + x)`` based and nodes with
    ``x < 0`` are rejected.  ``morawetz_w`` is ``1 - (1 + x)^(-delta)``;
    ``cutoff_chi`` is a smooth bump equal to 1 on ``|x - x0| <= inner``.
    """
    x = grid.X
    if one_ended is None:
        one_ended = grid.domain.Y_minus.is_empty and grid.domain.cylindrical
    if name in ("poly_minus", "poly_plus"):
        if not 0 < delta <= 1:
            raise ValueError("delta must lie in (0, 1]")
        if one_ended:
            if np.any(x < x0):
                raise ValueError("one-ended weight requested at a node with x < x0")
            r = x - x0
        else:
            r = np.abs(x - x0)
        p = (3.0 + delta) / 2.0
        return (1.0 + r) ** (-p if name == "poly_minus" else p)
    if name == "morawetz_w":
        if np.any(x < 0):
            raise ValueError("morawetz_w is defined for x >= 0")
        return 1.0 - (1.0 + x) ** (-delta)
    if name == "cutoff_chi":
        inner = grid.domain.R0 if inner is None else inner
        outer = inner + 2.0 if outer is None else outer
        return cutoff(x, inner, outer, x0)
    raise ValueError(f"unknown weight {name!r}; choose from {WEIGHT_NAMES}")


# --------------------------------------------------------------------------- calculus


def _derivative(grid: Grid, u, axis: int):
    U = grid.to_full(u)
    M = grid.mask
    h = grid.h
    fwd = np.zeros_like(M)
    bwd = np.zeros_like(M)
    Uf = np.zeros_like(U)
    Ub = np.zeros_like(U)
    sl_a = [slice(None)] * 2
    sl_b = [slice(None)] * 2
    sl_a[axis] = slice(None, -1)
    sl_b[axis] = slice(1, None)
    sl_a, sl_b = tuple(sl_a), tuple(sl_b)
    fwd[sl_a] = M[sl_b]
    bwd[sl_b] = M[sl_a]
    Uf[sl_a] = U[sl_b]
    Ub[sl_b] = U[sl_a]
    D = np.where(fwd & bwd, (Uf - Ub) / (2 * h),
                 np.where(fwd, (Uf - U) / h, np.where(bwd, (U - Ub) / h, 0.0)))
    return D[M]


def discrete_derivative_x(grid: Grid, u):
    """Centered ``d/dx`` in the interior, one-sided next to the mask boundary."""
    return _derivative(grid, u, 0)


def discrete_derivative_y(grid: Grid, u):
    return _derivative(grid, u, 1)


# --------------------------------------------------------------------------- export


def write_mask(grid: Grid, path) -> list[Path]:
    """Write ``<path>.json`` metadata and ``<path>.mask`` raw uint8 bytes."""
    path = Path(path)
    meta = path.with_suffix(".json")
    raw = path.with_suffix(".mask")
    meta.write_text(json.dumps(grid.metadata(), indent=2, sort_keys=True))
    raw.write_bytes(grid.mask.astype(np.uint8).tobytes(order="C"))
    return [meta, raw]


def write_grid_function(grid: Grid, u, path) -> Path:
    """CSV with columns ``x, y, re, im``."""
    u = np.asarray(u, dtype=complex)
    path = Path(path)
    with path.open("w") as fh:
        fh.write("x,y,re,im\n")
        for x, y, v in zip(grid.X, grid.Y, u):
            fh.write(f"{x!r},{y!r},{v.real!r},{v.imag!r}\n")
    return path
