"""Leapfrog wave propagation on staircase grids and local-energy decay fits.

The scheme ``u^{n+1} = 2u^n - u^{n-1} - dt^2 A u^n`` conserves the staggered
energy ``1/2 (||(u^{n+1} - u^n)/dt||^2 + <A u^{n+1}, u^n>)`` exactly, so drift
measures round-off only.  Faces are Dirichlet; end reflections are kept out
of the observation window by bounding ``T`` with the truncation length.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .discretize import DiscreteOperator, Grid
from .geometry import GeometryError

CFL_MAX = 0.9 / math.sqrt(2.0)


@dataclass
class WaveState:
    u: np.ndarray
    v: np.ndarray
    t: float = 0.0


@dataclass
class Series:
    """Sampled ``(t, norm_m0, norm_m1, energy)`` records."""

    t: list = field(default_factory=list)
    norm_m0: list = field(default_factory=list)
    norm_m1: list = field(default_factory=list)
    energy: list = field(default_factory=list)

    def rows(self):
        for row in zip(self.t, self.norm_m0, self.norm_m1, self.energy):
            yield dict(zip(("t", "norm_m0", "norm_m1", "energy"), row))

    def as_arrays(self):
        return tuple(np.asarray(a) for a in (self.t, self.norm_m0, self.norm_m1, self.energy))


@dataclass
class DecayFit:
    exponent: float
    window: tuple[float, float]
    residual: float
    series: list
    intercept: float = 0.0

    def to_json(self) -> dict:
        return {"exponent": self.exponent, "window": list(self.window), "residual": self.residual,
                "points": len(self.series)}


def mollifier(r):
    """``exp(1 - 1/(1 - r^2))`` on ``r < 1``, peak value 1 at the origin."""
    r = np.asarray(r, float)
    inside = r < 1
    out = np.zeros_like(r)
    out[inside] = np.exp(1.0 - 1.0 / (1.0 - r[inside] ** 2))
    return out


def initial_bump(grid: Grid, center, radius: float, m: int = 0):
    """Mollifier bump as ``(f1, f2)``: in ``f1`` for ``m = 0``, in ``f2`` for ``m = 1``."""
    cx, cy = map(float, center)
    th = np.linspace(0, 2 * math.pi, 721)
    px, py = cx + radius * np.cos(th), cy + radius * np.sin(th)
    if not (np.all(grid.domain.inside(px, py)) and grid.domain.inside(np.array([cx]), np.array([cy]))[0]):
        raise GeometryError("bump support exits the domain")
    if grid.xs[0] > cx - radius or grid.xs[-1] < cx + radius:
        raise GeometryError("bump support exits the truncated grid")
    b = mollifier(np.hypot(grid.X - cx, grid.Y - cy) / radius)
    z = np.zeros_like(b)
    if m == 0:
        return b, z
    if m == 1:
        return z, b
    raise ValueError("m must be 0 or 1")


def gradient_norm_sq(grid: Grid, u) -> float:
    """``sum over grid edges |u_a - u_b|^2`` (Dirichlet zeros off the mask), times ``h^0``."""
    U = grid.to_full(u)
    P = np.pad(U, 1)
    dx = np.diff(P, axis=0)
    dy = np.diff(P, axis=1)
    return float(np.sum(np.abs(dx) ** 2) + np.sum(np.abs(dy) ** 2))


def local_norm(grid: Grid, u, chi, m: int = 0) -> float:
    """Discrete ``||chi u||_{L^2}`` (``m = 0``) or ``||chi u||_{H^1}`` (``m = 1``)."""
    if isinstance(u, WaveState):
        u = u.u
    w = np.asarray(chi) * np.asarray(u)
    l2 = grid.h**2 * float(np.sum(np.abs(w) ** 2))
    if m == 0:
        return math.sqrt(l2)
    if m == 1:
        return math.sqrt(l2 + gradient_norm_sq(grid, w))
    raise ValueError("m must be 0 or 1")


def propagate(grid: Grid, op: DiscreteOperator, state: WaveState, T: float, cfl: float = 0.6,
              chi=None, record_every: int = 1, snapshot_times: Sequence[float] = (),
              support_radius: float | None = None):
    """Leapfrog to time ``T``; returns ``(snapshots, series)``.

    ``series`` samples local norms of ``chi u`` (when ``chi`` is given) and
    the staggered energy every ``record_every`` steps.  With
    ``support_radius`` the horizon ``T <= 2(L - r - R0)`` is enforced.
    """
    if not 0 < cfl <= CFL_MAX + 1e-15:
        raise ValueError(f"CFL number {cfl} violates the stability limit {CFL_MAX:.4f}")
    if support_radius is not None and grid.domain.cylindrical:
        horizon = 2.0 * (grid.L - support_radius - grid.domain.R0)
        if T > horizon:
            raise ValueError(f"T={T} exceeds the reflection-free horizon {horizon:.4g}")
    dt = cfl * grid.h
    nsteps = int(math.ceil(T / dt))
    A = op.A
    h2 = grid.h**2
    u_prev = np.asarray(state.u, float).copy()
    Au = A @ u_prev
    u = u_prev + dt * np.asarray(state.v, float) - 0.5 * dt * dt * Au
    t = state.t + dt
    series = Series()
    snaps = []
    pending = sorted(snapshot_times)

    def record(t_now, u_new, u_old, Au_new):
        vel = (u_new - u_old) / dt
        energy = 0.5 * h2 * (float(vel @ vel) + float(Au_new @ u_old))
        series.t.append(t_now)
        series.energy.append(energy)
        if chi is not None:
            series.norm_m0.append(local_norm(grid, u_new, chi, 0))
            series.norm_m1.append(local_norm(grid, u_new, chi, 1))
        else:
            series.norm_m0.append(float("nan"))
            series.norm_m1.append(float("nan"))

    record(t, u, u_prev, A @ u)
    for n in range(1, nsteps):
        Au = A @ u
        u_next = 2.0 * u - u_prev - dt * dt * Au
        u_prev, u = u, u_next
        t = state.t + (n + 1) * dt
        if n % record_every == 0 or n == nsteps - 1:
            record(t, u, u_prev, A @ u)
        while pending and pending[0] <= t + 0.5 * dt:
            snaps.append(WaveState(u.copy(), (u - u_prev) / dt, t))
            pending.pop(0)
    return snaps, series


def fit_decay(t, norms, window: tuple[float, float], envelope: bool = True) -> DecayFit:
    """Least-squares slope of ``log norm`` against ``log t`` on ``window``.

    With ``envelope`` only local maxima enter the fit, which removes the
    ``e^{+- i t sigma_j}`` oscillation of the expansion.
    """
    t = np.asarray(t, float)
    y = np.asarray(norms, float)
    t_min, t_max = window
    if not 0 < t_min < t_max:
        raise ValueError("window must satisfy 0 < t_min < t_max")
    sel = (t >= t_min) & (t <= t_max)
    ts, ys = t[sel], y[sel]
    if ts.size < 3 or ts.max() / ts.min() < 1.5:
        raise ValueError("window too short for a decay fit")
    if np.any(ys <= 100 * np.finfo(float).eps):
        raise ValueError("norms too small for a reliable fit")
    if envelope:
        peak = np.r_[False, (ys[1:-1] >= ys[:-2]) & (ys[1:-1] >= ys[2:]), False]
        if peak.sum() >= 3:
            ts, ys = ts[peak], ys[peak]
        # drop peaks that sit below a later one (beats of several modes)
        keep = ys >= np.minimum.accumulate(ys[::-1])[::-1] - 1e-300
        ts, ys = ts[keep], ys[keep]
    lt, ly = np.log(ts), np.log(ys)
    c, res, *_ = np.polyfit(lt, ly, 1, full=True)
    rms = float(np.sqrt(res[0] / len(lt))) if len(res) else 0.0
    return DecayFit(float(c[0]), (float(t_min), float(t_max)), rms, list(zip(ts.tolist(), ys.tolist())),
                    float(c[1]))
