"""Modal Dirichlet-to-Neumann closure and weighted resolvent norms.

On a cylindrical end the 5-point scheme separates into face modes: discrete
sines ``Phi_m`` with eigenvalues ``lambda_m = (4/h^2) sin^2(m pi / (2(n+1)))``
on each run of ``n`` face nodes.  Along ``x`` each mode obeys the 1D
recurrence ``(2 - zeta - 1/zeta) / h^2 = z - lambda_m = tau_m^2``, whose
outgoing root is ``zeta_m = exp(2i arcsin(tau_m h / 2))``.  Eliminating the
ghost column ``u_{N+1} = Phi diag(zeta) Phi^T u_N`` closes the truncated
system exactly, so no spurious reflection is created at the faces.  The
branch of ``tau_m`` follows the sheet of the continuum mode with the same
interval and harmonic.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .discretize import DiscreteOperator, Grid, assemble_laplacian, weight_diag
from .riemann import Point, RamificationError, SheetPoint, tau_array

RESIDUAL_TOL = 1e-8
POWER_TOL = 1e-4
SEED = 42


class NearSingular(RuntimeError):
    """Solve failed: possible resonance at this sheet point."""

    def __init__(self, detail: str = ""):
        msg = "near-singular: possible resonance at this sheet point"
        super().__init__(f"{msg} ({detail})" if detail else msg)


@dataclass(frozen=True)
class FaceModes:
    """Discrete sine modes on one truncation face."""

    side: int
    nodes: np.ndarray
    Phi: np.ndarray
    lam: np.ndarray
    mode_index: np.ndarray

    @property
    def rank(self) -> int:
        return self.Phi.shape[1]


def face_modes(grid: Grid, side: int) -> FaceModes:
    """Orthonormal (plain ``l^2``) discrete sines on the face runs of ``side``."""
    face = grid.faces[side]
    n_tot = len(face.nodes)
    basis = grid.domain.basis(max(2 * n_tot, 4))
    cols, lams, idx = [], [], []
    offset = 0
    for nodes, interval in face.runs:
        n = len(nodes)
        k = np.arange(1, n + 1)
        jj = np.arange(1, n + 1)
        S = math.sqrt(2.0 / (n + 1)) * np.sin(np.outer(jj, k) * math.pi / (n + 1))
        block = np.zeros((n_tot, n))
        block[offset:offset + n] = S
        cols.append(block)
        lams.append((4.0 / grid.h**2) * np.sin(k * math.pi / (2 * (n + 1))) ** 2)
        for kk in k:
            try:
                idx.append(basis.index_of(interval, int(kk)))
            except KeyError:
                idx.append(basis.extended(8 * n_tot).index_of(interval, int(kk)))
        offset += n
    return FaceModes(side, face.nodes, np.hstack(cols), np.concatenate(lams), np.array(idx))


def outgoing_zeta(tau: np.ndarray, h: float) -> np.ndarray:
    """Root of ``(2 - zeta - 1/zeta)/h^2 = tau^2`` continuing ``exp(i tau h)``."""
    return np.exp(2j * np.arcsin(tau * h / 2.0))


def dtn_matrix(grid: Grid, side: int, p: Point, fm: FaceModes | None = None) -> tuple[np.ndarray, np.ndarray]:
    """Face nodes and the block ``B = Phi diag(g) Phi^T`` with ``g = (zeta - 1)/h``.

    ``B`` maps a face trace to its outgoing one-sided normal difference.
    """
    fm = face_modes(grid, side) if fm is None else fm
    flips = np.array([j in p.flipped for j in fm.mode_index], dtype=bool)
    t = tau_array(p, fm.lam, flips)
    g = (outgoing_zeta(t, grid.h) - 1.0) / grid.h
    return fm.nodes, (fm.Phi * g) @ fm.Phi.T


@dataclass(eq=False)
class DiscreteSystem:
    """``A(z) = -Delta_h - z`` closed with the DtN blocks at the point ``p``."""

    grid: Grid
    point: Point
    A: sp.csc_matrix
    _lu: object = field(default=None, repr=False)

    @property
    def lu(self):
        if self._lu is None:
            try:
                self._lu = spla.splu(self.A, permc_spec="COLAMD")
            except RuntimeError as exc:
                raise NearSingular(str(exc)) from None
        return self._lu

    def _check(self, rhs, u, trans: str):
        Au = self.A @ u if trans == "N" else self.A.conj().T @ u
        nb = np.linalg.norm(rhs)
        r = np.linalg.norm(Au - rhs) / nb if nb > 0 else float(np.linalg.norm(Au))
        return r

    def solve(self, rhs, trans: str = "N", with_residual: bool = False):
        """``A^{-1} rhs`` (``trans='H'`` for the adjoint) with a residual check."""
        rhs = np.asarray(rhs, dtype=complex)
        if not np.any(rhs):
            u = np.zeros_like(rhs)
            return (u, 0.0) if with_residual else u
        u = self.lu.solve(rhs, trans=trans)
        r = self._check(rhs, u, trans)
        for _ in range(2):
            if r <= RESIDUAL_TOL or not np.isfinite(r):
                break
            Au = self.A @ u if trans == "N" else self.A.conj().T @ u
            u = u + self.lu.solve(rhs - Au, trans=trans)
            r = self._check(rhs, u, trans)
        if not (np.isfinite(r) and r <= RESIDUAL_TOL):
            raise NearSingular(f"relative residual {r:.2e}")
        return (u, r) if with_residual else u


def assemble_system(grid: Grid, p: Point, op: DiscreteOperator | None = None,
                    closure: bool = True) -> DiscreteSystem:
    """Closed system at ``p``; ``closure=False`` keeps Dirichlet faces."""
    op = assemble_laplacian(grid) if op is None else op
    z = p.z
    A = op.A.astype(complex) - z * sp.identity(grid.n, format="csr", dtype=complex)
    if closure:
        rows, cols, vals = [], [], []
        for side in grid.faces:
            try:
                nodes, B = dtn_matrix(grid, side, p)
            except RamificationError:
                raise
            # ghost column u_{N+1} = (I + h B) u_N enters the face rows with -1/h^2
            blk = -(np.eye(len(nodes)) + grid.h * B) / grid.h**2
            r, c = np.meshgrid(nodes, nodes, indexing="ij")
            rows.append(r.ravel())
            cols.append(c.ravel())
            vals.append(blk.ravel())
        if rows:
            C = sp.coo_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                              shape=A.shape)
            A = A + C.tocsr()
    return DiscreteSystem(grid, p, sp.csc_matrix(A))


def solve(system: DiscreteSystem, rhs):
    return system.solve(rhs)


# --------------------------------------------------------------------------- norms


@dataclass
class ResolventProbe:
    point: Point
    delta: float
    norm_estimate: float
    iterations: int
    relative_residual: float
    h: float = 0.0
    L: float = 0.0
    converged: bool = True

    @property
    def E(self) -> float:
        return float(self.point.z.real)

    @property
    def eps(self) -> float:
        return float(self.point.z.imag)

    def row(self) -> dict:
        return {"E": self.E, "eps": self.eps, "delta": self.delta, "norm_estimate": self.norm_estimate,
                "iterations": self.iterations, "residual": self.relative_residual,
                "L": self.L, "h": self.h}


def operator_norm(apply, apply_adj, n: int, tol: float = POWER_TOL, maxiter: int = 500,
                  seed: int = SEED) -> tuple[float, int, bool]:
    """Power iteration on ``M^H M``; returns ``(lower bound on ||M||, iterations, converged)``."""
    rng = np.random.default_rng(seed)
    v = rng.standard_normal(n) + 1j * rng.standard_normal(n)
    v /= np.linalg.norm(v)
    prev = None
    est = 0.0
    for it in range(1, maxiter + 1):
        Mv = apply(v)
        est = float(np.linalg.norm(Mv))
        if prev is not None and abs(est - prev) <= tol * est:
            return est, it, True
        prev = est
        w = apply_adj(Mv)
        nw = np.linalg.norm(w)
        if nw == 0:
            return 0.0, it, True
        v = w / nw
    return est, maxiter, False


def weighted_resolvent_norm(system: DiscreteSystem, W: np.ndarray, W2: np.ndarray | None = None,
                            tol: float = POWER_TOL, maxiter: int = 500, seed: int = SEED):
    """``||W R(z) W2||`` by power iteration; returns ``(estimate, iterations, residual, converged)``."""
    W2 = W if W2 is None else W2
    res = [0.0]

    def apply(v):
        u, r = system.solve(W2 * v, with_residual=True)
        res[0] = max(res[0], r)
        return W * u

    def apply_adj(v):
        u, r = system.solve(np.conj(W) * v, trans="H", with_residual=True)
        res[0] = max(res[0], r)
        return np.conj(W2) * u

    est, it, conv = operator_norm(apply, apply_adj, system.grid.n, tol, maxiter, seed)
    return est, it, res[0], conv


def estimate_weighted_norm(domain, p: Point, delta: float, grid: Grid, weight: str = "poly_minus",
                           x0: float | None = None, op: DiscreteOperator | None = None,
                           tol: float = POWER_TOL, maxiter: int = 500, seed: int = SEED,
                           **weight_kw) -> ResolventProbe:
    """Lower bound on ``||W R(z) W||`` for the named weight.

    Polynomial weights ``(1 + x)^{-(3+delta)/2}`` are used on one-ended
    domains and ``(1 + |x - x0|)^{-(3+delta)/2}`` otherwise.
    """
    if grid.domain is not domain:
        raise ValueError("grid was built for a different domain")
    x0 = domain.x0 if x0 is None else x0
    W = weight_diag(grid, weight, delta, x0, **weight_kw)
    system = assemble_system(grid, p, op)
    est, it, res, conv = weighted_resolvent_norm(system, W, tol=tol, maxiter=maxiter, seed=seed)
    return ResolventProbe(p, delta, est, it, res, grid.h, grid.L, conv)


def resolvent_bound(z: complex, delta: float) -> float:
    """``(3/delta)(1 + |z|^{1/2})``."""
    return 3.0 / delta * (1.0 + math.sqrt(abs(z)))


@dataclass
class SweepResult:
    probes: list
    slope: float
    intercept: float
    sup_by_E: dict
    bound_violations: list
    divergent_E: list

    def to_json(self) -> dict:
        return {
            "slope": self.slope,
            "intercept": self.intercept,
            "sup_by_E": {repr(k): v for k, v in sorted(self.sup_by_E.items())},
            "bound_violations": self.bound_violations,
            "divergent_E": self.divergent_E,
        }


def loglog_slope(x, y) -> tuple[float, float]:
    c = np.polyfit(np.log(np.asarray(x, float)), np.log(np.asarray(y, float)), 1)
    return float(c[0]), float(c[1])


def _probe_task(args):
    spec, h, L, E, eps, delta, weight, x0, kw = args
    from .discretize import build_grid
    from .geometry import domain_from_json

    domain = domain_from_json(spec)
    grid = build_grid(domain, h, L)
    return estimate_weighted_norm(domain, SheetPoint(complex(E, eps)), delta, grid, weight, x0, **kw)


def sweep_bound(domain, E_grid, eps_grid, delta: float, grid: Grid, weight: str = "poly_minus",
                x0: float | None = None, check_bound: bool | None = None, headroom: float = 1.07,
                divergence_slope: float = -0.3, jobs: int = 1, **kw) -> SweepResult:
    """Probes at ``z = E + i eps`` on the physical sheet and the log-log slope of ``sup_eps``.

    Divergence is flagged at an ``E`` where the estimates grow like
    ``eps^s`` with ``s <= divergence_slope`` as ``eps`` decreases.
    """
    E_grid = [float(e) for e in E_grid]
    eps_grid = [float(e) for e in eps_grid]
    if check_bound is None:
        check_bound = domain.Y_minus.is_empty
    tasks = [(E, eps) for E in E_grid for eps in eps_grid]
    if jobs > 1 and domain.spec:
        # domains carry closures, so workers rebuild them from the JSON spec
        args = [(domain.spec, grid.h, grid.L, E, eps, delta, weight, x0, kw) for E, eps in tasks]
        with ProcessPoolExecutor(max_workers=jobs) as ex:
            probes = list(ex.map(_probe_task, args))
    else:
        op = assemble_laplacian(grid)
        probes = [estimate_weighted_norm(domain, SheetPoint(complex(E, eps)), delta, grid, weight, x0,
                                         op=op, **kw) for E, eps in tasks]
    sup_by_E = {}
    divergent = []
    for E in E_grid:
        ps = [p for p in probes if p.E == E]
        sup_by_E[E] = max(p.norm_estimate for p in ps)
        if len(ps) >= 2:
            s, _ = loglog_slope([p.eps for p in ps], [p.norm_estimate for p in ps])
            if s <= divergence_slope:
                divergent.append(E)
    violations = []
    if check_bound:
        for p in probes:
            if p.norm_estimate > headroom * resolvent_bound(p.point.z, delta):
                violations.append(p.row())
    if len(E_grid) >= 2:
        slope, icpt = loglog_slope(list(sup_by_E), list(sup_by_E.values()))
    else:
        slope, icpt = float("nan"), float("nan")
    return SweepResult(probes, slope, icpt, sup_by_E, violations, divergent)
