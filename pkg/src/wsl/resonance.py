"""Pole indicators for the continued resolvent.

The indicator is the relative smallest singular value ``sigma_min(A) / ||A||``
of the DtN-closed system at a sheet point.  Real-axis scans look for dips of
this profile, dips are refined by bounded 1D minimisation and kept only if
they survive a rescan at half the grid spacing.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.ndimage import median_filter
from scipy.optimize import minimize, minimize_scalar

from .discretize import DiscreteOperator, Grid, assemble_laplacian, build_grid, weight_diag
from .dtn import NearSingular, SEED, assemble_system, weighted_resolvent_norm
from .riemann import BoundaryPoint, Point, RamificationError, SheetPoint, continued_sheet, metric_d

SIGMA_TOL = 1e-6
DIP_FACTOR = 10.0
MEDIAN_WINDOW = 101


def matrix_norm_2(A, iters: int = 60, seed: int = SEED) -> float:
    """Power-iteration estimate of ``||A||_2`` using sparse products only."""
    rng = np.random.default_rng(seed)
    v = rng.standard_normal(A.shape[0]) + 0j
    v /= np.linalg.norm(v)
    AH = A.conj().T
    est = 0.0
    for _ in range(iters):
        w = AH @ (A @ v)
        nw = np.linalg.norm(w)
        if nw == 0:
            return 0.0
        new = math.sqrt(nw)
        v = w / nw
        if abs(new - est) <= 1e-8 * new:
            return new
        est = new
    return est


def sigma_min(system, tol: float = SIGMA_TOL, maxiter: int = 200, seed: int = SEED,
              start: np.ndarray | None = None, return_vector: bool = False):
    """Smallest singular value by inverse iteration on ``(A^H A)^{-1}``.

    ``start`` warm-starts the iteration (e.g. with the vector from a nearby
    point of a scan); ``return_vector`` also returns the final iterate.
    """
    try:
        lu = system.lu
    except NearSingular:
        return (0.0, start) if return_vector else 0.0
    if start is None:
        rng = np.random.default_rng(seed)
        x = rng.standard_normal(system.grid.n) + 0j
    else:
        x = np.asarray(start, dtype=complex).copy()
    x /= np.linalg.norm(x)
    prev = None
    est = math.inf
    for _ in range(maxiter):
        y = lu.solve(x)
        ny = np.linalg.norm(y)
        if not np.isfinite(ny) or ny == 0:
            return (0.0, x) if return_vector else 0.0
        est = 1.0 / ny
        if prev is not None and abs(est - prev) <= tol * est:
            break
        prev = est
        x = lu.solve(y / ny, trans="H")
        nx = np.linalg.norm(x)
        if not np.isfinite(nx) or nx == 0:
            return (0.0, x) if return_vector else 0.0
        x /= nx
    return (float(est), x) if return_vector else float(est)


def min_singular_value(domain, p: Point, grid: Grid, op: DiscreteOperator | None = None,
                       tol: float = SIGMA_TOL) -> float:
    """Relative ``sigma_min`` of the closed system at ``p``."""
    if grid.domain is not domain:
        raise ValueError("grid was built for a different domain")
    system = assemble_system(grid, p, op)
    return sigma_min(system, tol) / matrix_norm_2(system.A)


# --------------------------------------------------------------------------- scans


@dataclass
class Dip:
    point: Point
    sigma_min: float
    depth: float
    persistent: bool | None = None
    history: list = field(default_factory=list)

    @property
    def location(self) -> complex:
        return self.point.z

    def to_json(self) -> dict:
        return {"point": self.point.to_json(), "sigma_min": self.sigma_min, "depth": self.depth,
                "persistent": self.persistent, "history": self.history}


@dataclass
class PoleScanResult:
    points: list
    dips: list
    skipped: list = field(default_factory=list)

    @property
    def persistent_dips(self) -> list:
        return [d for d in self.dips if d.persistent]

    def rows(self):
        for p, s in self.points:
            yield {"re_z": p.z.real, "im_z": p.z.imag, "flipped_modes": " ".join(map(str, sorted(p.flipped))),
                   "sigma_min": s}


class _Profile:
    """Relative sigma_min along ``E + i0`` on one grid, with the operator and norm cached."""

    def __init__(self, domain, grid: Grid, side: int = 1):
        self.domain = domain
        self.grid = grid
        self.op = assemble_laplacian(grid)
        self.side = side
        self._norm = None
        self._vec = None

    def __call__(self, E: float) -> float:
        system = assemble_system(self.grid, BoundaryPoint(E, self.side), self.op)
        if self._norm is None:
            self._norm = matrix_norm_2(system.A)
        s, self._vec = sigma_min(system, start=self._vec, return_vector=True)
        return s / self._norm


def _find_dips(E, s, factor: float, window: int):
    s = np.asarray(s)
    w = min(window, len(s) if len(s) % 2 else len(s) - 1)
    med = median_filter(s, size=max(w, 3), mode="nearest")
    out = []
    for i in range(len(s)):
        left = s[i - 1] if i > 0 else math.inf
        right = s[i + 1] if i + 1 < len(s) else math.inf
        if s[i] < med[i] / factor and s[i] <= left and s[i] <= right:
            out.append((i, float(med[i])))
    return out


def _refine(profile: _Profile, E0: float, step: float):
    res = minimize_scalar(lambda e: _safe(profile, e), bounds=(E0 - step, E0 + step), method="bounded",
                          options={"xatol": 1e-5})
    return float(res.x), float(res.fun)


def _safe(profile, E):
    try:
        return profile(E)
    except RamificationError:
        return 0.0


def scan_real_axis(domain, E_range, steps: int, grid: Grid, refine: bool = True,
                   persistence: bool = True, factor: float = DIP_FACTOR, window: int = MEDIAN_WINDOW,
                   side: int = 1, recheck_halfwidth: float = 0.1) -> PoleScanResult:
    """Relative sigma_min along ``E + i0`` for ``steps`` equispaced ``E`` in ``E_range``.

    Samples more than ``factor`` below the rolling median are dips.  Each dip
    is refined by bounded minimisation and, with ``persistence``, rescanned on
    a window of ``+-recheck_halfwidth`` at ``h/2``; the reported location is
    the one from the finest grid.
    """
    if not domain.cylindrical:
        raise ValueError("real-axis scans need cylindrical ends")
    lo, hi = E_range
    Es = np.linspace(lo, hi, steps)
    step = float(Es[1] - Es[0]) if steps > 1 else 0.0
    prof = _Profile(domain, grid, side)
    points, vals, skipped = [], [], []
    for E in Es:
        try:
            s = prof(float(E))
        except RamificationError:
            skipped.append(float(E))
            continue
        points.append((BoundaryPoint(float(E), side), s))
        vals.append(s)
    kept_E = np.array([p.E for p, _ in points])
    dips = []
    for i, med in _find_dips(kept_E, vals, factor, window):
        E0, s0 = float(kept_E[i]), float(vals[i])
        hist = [{"h": grid.h, "E": E0, "sigma_min": s0, "median": med}]
        if refine and step > 0:
            E0, s0 = _refine(prof, E0, step)
            hist.append({"h": grid.h, "E": E0, "sigma_min": s0, "refined": True})
        dip = Dip(BoundaryPoint(E0, side), s0, med / max(s0, 1e-300), history=hist)
        if persistence:
            fine = build_grid(domain, grid.h / 2, grid.L)
            fprof = _Profile(domain, fine, side)
            n_loc = max(int(round(2 * recheck_halfwidth / max(step, 1e-3))) + 1, 9)
            loc = np.linspace(E0 - recheck_halfwidth, E0 + recheck_halfwidth, n_loc)
            lv = np.array([_safe(fprof, float(e)) for e in loc])
            k = int(np.argmin(lv))
            lmed = float(np.median(lv))
            Ef, sf = float(loc[k]), float(lv[k])
            if refine:
                # threshold cusps are narrow: judge the located minimum, not the nearest sample
                Ef, sf = _refine(fprof, Ef, float(loc[1] - loc[0]))
            dip.persistent = bool(sf < lmed / factor)
            if dip.persistent:
                dip.point, dip.sigma_min, dip.depth = BoundaryPoint(Ef, side), sf, lmed / max(sf, 1e-300)
            dip.history.append({"h": fine.h, "E": Ef, "sigma_min": sf, "median": lmed,
                                "persistent": dip.persistent})
        dips.append(dip)
    dips.sort(key=lambda d: abs(d.location))
    return PoleScanResult(points, dips, skipped)


def locate_pole(domain, seed: Point, grid: Grid, refine_grid: bool = True, xatol: float = 1e-4):
    """Minimise relative sigma_min over ``z`` on the seed's sheet.

    Returns ``(Dip, flags)``; ``flags`` notes approaches to ramification
    points.  The dip is marked persistent if the minimum at ``h/2`` is not
    shallower than the one at ``h``.
    """
    flags = []

    def f_grid(g):
        op = assemble_laplacian(g)
        norm_cache = {}

        def f(v):
            p = BoundaryPoint(v[0], seed.side) if isinstance(seed, BoundaryPoint) else \
                SheetPoint(complex(v[0], v[1]), seed.flipped)
            try:
                system = assemble_system(g, p, op)
            except RamificationError:
                flags.append(f"ramification near {v[0]!r}")
                return 0.0
            if "n" not in norm_cache:
                norm_cache["n"] = matrix_norm_2(system.A)
            return sigma_min(system) / norm_cache["n"]
        return f

    def run(g, start):
        f = f_grid(g)
        if isinstance(seed, BoundaryPoint):
            r = minimize_scalar(lambda e: f([e]), bracket=None, bounds=(start[0] - 0.05, start[0] + 0.05),
                                method="bounded", options={"xatol": xatol})
            return [float(r.x)], float(r.fun)
        r = minimize(f, start, method="Nelder-Mead",
                     options={"xatol": xatol, "fatol": 1e-12, "initial_simplex":
                              [start, [start[0] + 0.02, start[1]], [start[0], start[1] + 0.02]]})
        return [float(r.x[0]), float(r.x[1])], float(r.fun)

    start = [seed.z.real] if isinstance(seed, BoundaryPoint) else [seed.z.real, seed.z.imag]
    x1, s1 = run(grid, start)
    hist = [{"h": grid.h, "z": x1, "sigma_min": s1}]
    persistent = None
    x, s = x1, s1
    if refine_grid:
        x2, s2 = run(build_grid(domain, grid.h / 2, grid.L), x1)
        hist.append({"h": grid.h / 2, "z": x2, "sigma_min": s2})
        persistent = s2 <= 1.5 * s1
        x, s = x2, s2
    p = BoundaryPoint(x[0], seed.side) if isinstance(seed, BoundaryPoint) else \
        SheetPoint(complex(x[0], x[1]), seed.flipped)
    return Dip(p, s, float("nan"), persistent, hist), flags


# --------------------------------------------------------------------------- resonance-free balls


def ball_samples(E: float, radius: float, basis, n: int, seed: int = SEED) -> list[SheetPoint]:
    """Sheet points within metric distance ``radius`` of ``E + i0``.

    Half the samples lie on the physical sheet above the axis; the rest are
    reached by continuing across ``(sigma_J^2, inf)`` at ``E``, which flips
    every mode with ``sigma_j^2 < E``.
    """
    rng = np.random.default_rng(seed)
    centre = BoundaryPoint(E, 1)
    flips = continued_sheet(E, basis)
    out = []
    tries = 0
    while len(out) < n and tries < 200 * n:
        tries += 1
        lower = len(out) % 2 == 1
        theta = rng.uniform(0.05, 0.95) * math.pi
        if lower:
            theta = -theta
        rho = radius * rng.uniform(0.05, 1.0)
        for _ in range(40):
            p = SheetPoint(E + rho * complex(math.cos(theta), math.sin(theta)), flips if lower else frozenset())
            if metric_d(p, centre, basis) < radius:
                out.append(p)
                break
            rho *= 0.5
    return out


@dataclass
class ResFreeReport:
    ok: bool
    E: float
    radius: float
    samples: list
    sigma_mins: list
    norms: list
    c2: float | None
    pole_threshold: float | None
    vacuous: bool = False

    def to_json(self) -> dict:
        return {"ok": self.ok, "E": self.E, "radius": self.radius, "vacuous": self.vacuous,
                "c2": self.c2, "pole_threshold": self.pole_threshold,
                "samples": [p.to_json() for p in self.samples],
                "sigma_min": self.sigma_mins, "norms": self.norms}


def _chi(grid: Grid, inner: float | None = None, outer: float | None = None):
    dom = grid.domain
    inner = dom.R0 if inner is None else inner
    outer = min(inner + 1.0, grid.L - grid.h) if outer is None else outer
    return weight_diag(grid, "cutoff_chi", x0=0.0, inner=inner, outer=outer)


def probe_ball(domain, E: float, radius: float, grid: Grid, samples: int, seed: int = SEED,
               op: DiscreteOperator | None = None):
    """Relative sigma_min and ``||chi R chi||`` at sampled points of the ball."""
    op = assemble_laplacian(grid) if op is None else op
    basis = domain.basis(64)
    pts = ball_samples(E, radius, basis, samples, seed)
    chi = _chi(grid)
    smins, norms = [], []
    for p in pts:
        system = assemble_system(grid, p, op)
        smins.append(sigma_min(system) / matrix_norm_2(system.A))
        try:
            est, _, _, _ = weighted_resolvent_norm(system, chi)
        except NearSingular:
            est = math.inf
        norms.append(est)
    return pts, smins, norms


def verify_resonance_free(domain, E: float, c1: float, grid: Grid, samples: int = 20,
                          c2: float | None = None, pole_threshold: float | None = None,
                          seed: int = SEED) -> ResFreeReport:
    """Check the ball ``d(z, E + i0) < c1 / (1 + E)`` for poles and the ``chi R chi`` bound."""
    radius = c1 / (1.0 + E)
    if radius <= 0:
        return ResFreeReport(True, E, radius, [], [], [], c2, pole_threshold, vacuous=True)
    pts, smins, norms = probe_ball(domain, E, radius, grid, samples, seed)
    if not pts:
        raise ValueError("sample set empty: ball too small for the sampler")
    ok = True
    if pole_threshold is not None:
        ok &= min(smins) > pole_threshold
    if c2 is not None:
        ok &= max(norms) <= c2 * math.sqrt(1.0 + E)
    return ResFreeReport(bool(ok), E, radius, pts, smins, norms, c2, pole_threshold)


@dataclass
class Calibration:
    c1: float
    c2: float
    pole_threshold: float
    training: dict

    def to_json(self) -> dict:
        return {"c1": self.c1, "c2": self.c2, "pole_threshold": self.pole_threshold,
                "training": self.training}


def calibrate(domain, grid: Grid, E_train=(30.0, 60.0), c1_candidates=(1.0, 0.5, 0.2, 0.1, 0.05),
              samples: int = 20, safety: float = 1.5, seed: int = SEED) -> Calibration:
    """Largest ``c1`` whose training balls show no dip below a tenth of the centre value.

    ``c2`` is ``safety`` times the largest training ratio
    ``||chi R chi|| / (1 + E)^{1/2}`` and the pole threshold is a tenth of the
    smallest training sigma_min.
    """
    op = assemble_laplacian(grid)
    prof = _Profile(domain, grid)
    centre = {E: prof(E) for E in E_train}
    for c1 in sorted(c1_candidates, reverse=True):
        data = {}
        good = True
        for E in E_train:
            pts, smins, norms = probe_ball(domain, E, c1 / (1 + E), grid, samples, seed, op)
            if not pts or min(smins) < 0.1 * centre[E] or not all(map(math.isfinite, norms)):
                good = False
                break
            data[E] = (smins, norms)
        if good:
            ratio = max(max(n) / math.sqrt(1 + E) for E, (_, n) in data.items())
            thr = 0.1 * min(min(s) for s, _ in data.values())
            training = {repr(E): {"centre_sigma_min": centre[E], "min_sigma_min": min(s), "max_norm": max(n)}
                        for E, (s, n) in data.items()}
            return Calibration(c1, safety * ratio, thr, training)
    raise ValueError("no candidate c1 passed calibration")
