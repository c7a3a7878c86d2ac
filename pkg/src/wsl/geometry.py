"""Planar waveguide domains and their geometric hypotheses.

A :class:`WaveguideDomain` is described by a closed-form ``inside`` test, the
parametrised boundary curves of its bounded part, and the cross-sections of
its two (possibly empty) cylindrical ends beyond ``|x| >= R0``.  The checkers
sample boundary normals and decide which of the star-shaped (``x nu_x <= 0``)
and flaring (``x nu_x <= -C_I``) hypotheses hold.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.interpolate import CubicSpline

from .cross_section import EMPTY, CrossSection, ModeBasis, union_modes

#: tolerance for sign decisions on x * nu_x
SIGN_TOL = 1e-10
#: parameter neighbourhood excluded at segment ends (corners)
CORNER_EXCLUSION = 1e-6
#: offset used to orient normals against the inside test
PROBE_OFFSET = 1e-6

THEOREM_CLASSES = ("cig", "hour", "flat", "convexobs", "none")


class GeometryError(ValueError):
    pass


@dataclass(frozen=True)
class BoundarySegment:
    """Parametrised boundary curve ``t -> (x(t), y(t))`` for ``t`` in ``[0, 1]``."""

    point: Callable[[np.ndarray], tuple[np.ndarray, np.ndarray]]
    derivative: Callable[[np.ndarray], tuple[np.ndarray, np.ndarray]]
    regularity: str = "smooth"
    label: str = ""

    def sample(self, n: int, exclude: float = CORNER_EXCLUSION) -> np.ndarray:
        return np.linspace(exclude, 1.0 - exclude, n)


def line(p0, p1, label="line") -> BoundarySegment:
    x0, y0 = map(float, p0)
    x1, y1 = map(float, p1)

    def point(t):
        t = np.asarray(t, dtype=float)
        return x0 + t * (x1 - x0), y0 + t * (y1 - y0)

    def deriv(t):
        t = np.asarray(t, dtype=float)
        return np.full(t.shape, x1 - x0), np.full(t.shape, y1 - y0)

    return BoundarySegment(point, deriv, "piecewise_linear", label)


def arc(center, radius, theta0, theta1, label="arc") -> BoundarySegment:
    cx, cy = map(float, center)
    r = float(radius)
    span = theta1 - theta0

    def point(t):
        th = theta0 + span * np.asarray(t, dtype=float)
        return cx + r * np.cos(th), cy + r * np.sin(th)

    def deriv(t):
        th = theta0 + span * np.asarray(t, dtype=float)
        return -r * span * np.sin(th), r * span * np.cos(th)

    return BoundarySegment(point, deriv, "smooth", label)


def ellipse_arc(center, axes, angle, theta0, theta1, label="ellipse") -> BoundarySegment:
    cx, cy = map(float, center)
    a, b = map(float, axes)
    ca, sa = math.cos(angle), math.sin(angle)
    span = theta1 - theta0

    def point(t):
        th = theta0 + span * np.asarray(t, dtype=float)
        u, v = a * np.cos(th), b * np.sin(th)
        return cx + ca * u - sa * v, cy + sa * u + ca * v

    def deriv(t):
        th = theta0 + span * np.asarray(t, dtype=float)
        du, dv = -a * span * np.sin(th), b * span * np.cos(th)
        return ca * du - sa * dv, sa * du + ca * dv

    return BoundarySegment(point, deriv, "smooth", label)


def graph(f, fprime, s0, s1, of="x", label="graph") -> BoundarySegment:
    """Curve ``y = f(x)`` (``of='x'``) or ``x = f(y)`` (``of='y'``) for ``s`` in ``[s0, s1]``."""
    span = s1 - s0

    def point(t):
        s = s0 + span * np.asarray(t, dtype=float)
        return (s, f(s)) if of == "x" else (f(s), s)

    def deriv(t):
        s = s0 + span * np.asarray(t, dtype=float)
        ds = np.full(s.shape, span)
        return (ds, span * fprime(s)) if of == "x" else (span * fprime(s), ds)

    return BoundarySegment(point, deriv, "smooth", label)


@dataclass(frozen=True)
class Obstacle:
    """Rotated ellipse ``center + R(angle) (a cos t, b sin t)``."""

    center: tuple[float, float]
    axes: tuple[float, float]
    angle: float = 0.0

    def contains(self, x, y) -> np.ndarray:
        ca, sa = math.cos(self.angle), math.sin(self.angle)
        dx, dy = np.asarray(x) - self.center[0], np.asarray(y) - self.center[1]
        u = ca * dx + sa * dy
        v = -sa * dx + ca * dy
        return (u / self.axes[0]) ** 2 + (v / self.axes[1]) ** 2 < 1.0

    def _extreme(self, coord: str, sign: float) -> tuple[float, float]:
        a, b = self.axes
        ca, sa = math.cos(self.angle), math.sin(self.angle)
        # x(t) = cx + A cos t + B sin t, likewise y
        A, B = (a * ca, -b * sa) if coord == "x" else (a * sa, b * ca)
        t = math.atan2(sign * B, sign * A)
        u, v = a * math.cos(t), b * math.sin(t)
        return (self.center[0] + ca * u - sa * v, self.center[1] + sa * u + ca * v)

    def extremal_points(self) -> dict[str, tuple[float, float]]:
        """Top (M), bottom (m), rightmost (+) and leftmost (-) boundary points."""
        return {
            "M": self._extreme("y", 1.0),
            "m": self._extreme("y", -1.0),
            "+": self._extreme("x", 1.0),
            "-": self._extreme("x", -1.0),
        }

    def segment(self) -> BoundarySegment:
        return ellipse_arc(self.center, self.axes, self.angle, 0.0, 2 * math.pi, "obstacle")


@dataclass(frozen=True)
class WaveguideDomain:
    """Planar domain with cylindrical ends ``[R0, inf) x Y_plus`` and ``(-inf, -R0] x Y_minus``."""

    name: str
    core_segments: tuple[BoundarySegment, ...]
    inside_fn: Callable[[np.ndarray, np.ndarray], np.ndarray]
    R0: float
    Y_minus: CrossSection = EMPTY
    Y_plus: CrossSection = EMPTY
    x0: float = 0.0
    params: dict = field(default_factory=dict)
    obstacle: Obstacle | None = None
    cylindrical: bool = True
    spec: dict = field(default_factory=dict)

    def inside(self, x, y) -> np.ndarray:
        return np.asarray(self.inside_fn(np.asarray(x, float), np.asarray(y, float)), bool)

    def segments(self, extent: float | None = None) -> list[BoundarySegment]:
        """Boundary curves with the end walls continued out to ``|x| = extent``."""
        if extent is None:
            extent = self.R0 + 1.0
        segs = list(self.core_segments)
        if self.cylindrical and extent > self.R0:
            for sgn, Y in ((1.0, self.Y_plus), (-1.0, self.Y_minus)):
                for a, b in Y.intervals:
                    x_in, x_out = sgn * self.R0, sgn * extent
                    # orientation is irrelevant: normals are fixed by the inside test
                    segs.append(line((x_in, a), (x_out, a), f"wall{'+' if sgn > 0 else '-'}"))
                    segs.append(line((x_out, b), (x_in, b), f"wall{'+' if sgn > 0 else '-'}"))
        return segs

    @property
    def boundary(self) -> list[BoundarySegment]:
        return self.segments()

    @property
    def ends(self) -> list[tuple[int, CrossSection]]:
        return [(s, Y) for s, Y in ((-1, self.Y_minus), (1, self.Y_plus)) if not Y.is_empty]

    def basis(self, J: int) -> ModeBasis:
        """Modes of the disjoint union ``Y_minus + Y_plus`` (owner tags -1 / +1)."""
        return union_modes(self.ends, J)

    def y_range(self) -> tuple[float, float]:
        ys = []
        for seg in self.core_segments:
            _, y = seg.point(np.linspace(0, 1, 401))
            ys.append(y)
        for _, Y in self.ends:
            ys.append(np.array([Y.intervals[0][0], Y.intervals[-1][1]]))
        ys = np.concatenate(ys)
        return float(ys.min()), float(ys.max())

    def x_range(self) -> tuple[float, float]:
        xs = np.concatenate([seg.point(np.linspace(0, 1, 401))[0] for seg in self.core_segments])
        lo = -math.inf if not self.Y_minus.is_empty else float(xs.min())
        hi = math.inf if not self.Y_plus.is_empty else float(xs.max())
        return lo, hi

    def validate(self, n: int = 41) -> None:
        if self.cylindrical:
            if self.Y_minus.is_empty and self.Y_plus.is_empty:
                raise GeometryError("at least one cylindrical end must be nonempty")
            if not self.R0 > 0:
                raise GeometryError("R0 must be positive")
            y_lo, y_hi = self.y_range()
            ys = np.linspace(y_lo - 0.5, y_hi + 0.5, 8 * n + 1)
            for sgn, Y in ((1.0, self.Y_plus), (-1.0, self.Y_minus)):
                for xa in (self.R0, self.R0 + 0.37, self.R0 + 5.0):
                    got = self.inside(np.full(ys.shape, sgn * xa), ys)
                    if np.any(got != Y.contains(ys)):
                        raise GeometryError(
                            f"{self.name}: inside test disagrees with the product end at x={sgn * xa}")
        for seg in self.segments():
            tx, ty = seg.derivative(seg.sample(n))
            if np.any(np.hypot(tx, ty) == 0):
                raise GeometryError("non-Lipschitz parametrization point")


# --------------------------------------------------------------------------- normals


def _normals(domain: WaveguideDomain, seg: BoundarySegment, t: np.ndarray):
    x, y = seg.point(t)
    tx, ty = seg.derivative(t)
    norm = np.hypot(tx, ty)
    if np.any(norm <= 1e-14):
        raise GeometryError("non-Lipschitz parametrization point")
    nx, ny = ty / norm, -tx / norm
    eps = PROBE_OFFSET
    out_plus = ~domain.inside(x + eps * nx, y + eps * ny) & domain.inside(x - eps * nx, y - eps * ny)
    out_minus = domain.inside(x + eps * nx, y + eps * ny) & ~domain.inside(x - eps * nx, y - eps * ny)
    sign = np.where(out_plus, 1.0, np.where(out_minus, -1.0, np.nan))
    return np.asarray(x, float), np.asarray(y, float), sign * nx, sign * ny


def outward_normal(domain: WaveguideDomain, segment: int, t: float) -> tuple[float, float]:
    """Unit outward normal at parameter ``t`` of boundary segment ``segment``."""
    if not 0.0 <= t <= 1.0:
        raise GeometryError("t must lie in [0, 1]")
    seg = domain.boundary[segment]
    _, _, nx, ny = _normals(domain, seg, np.array([t]))
    if np.isnan(nx[0]):
        raise GeometryError("cannot orient the normal at this point (corner or cusp)")
    return float(nx[0]), float(ny[0])


def boundary_samples(domain: WaveguideDomain, samples_per_segment: int, extent: float | None = None):
    """Boundary points and outward normals, corners excluded.

    Returns arrays ``x, y, nu_x, nu_y, seg_index``; points whose normal could
    not be oriented (numerical corners) are dropped.
    """
    if samples_per_segment < 2:
        raise GeometryError("samples_per_segment must be >= 2")
    cols = [[], [], [], [], []]
    for k, seg in enumerate(domain.segments(extent)):
        x, y, nx, ny = _normals(domain, seg, seg.sample(samples_per_segment))
        ok = ~np.isnan(nx)
        for c, v in zip(cols, (x[ok], y[ok], nx[ok], ny[ok], np.full(ok.sum(), k))):
            c.append(v)
    return tuple(np.concatenate(c) for c in cols)


# --------------------------------------------------------------------------- checkers


@dataclass
class GeometryReport:
    sup_x_nu_x: float
    violating_points: list[tuple[float, float]]
    flaring_constant: float | None = None
    flaring_interval: tuple[float, float] | None = None
    theorem_class: str = "none"

    @property
    def star_shaped(self) -> bool:
        return not self.violating_points

    def to_json(self) -> dict:
        return {
            "sup_x_nu_x": self.sup_x_nu_x,
            "violating_points": [list(p) for p in self.violating_points],
            "flaring_constant": self.flaring_constant,
            "flaring_interval": list(self.flaring_interval) if self.flaring_interval else None,
            "theorem_class": self.theorem_class,
        }


def check_star_shaped_x(domain: WaveguideDomain, samples_per_segment: int = 400) -> GeometryReport:
    """Sample ``x nu_x`` over the boundary and collect points where it is positive."""
    x, y, nx, _, _ = boundary_samples(domain, samples_per_segment)
    prod = x * nx
    bad = prod > SIGN_TOL
    pts = [(float(a), float(b)) for a, b in zip(x[bad], y[bad])]
    return GeometryReport(float(prod.max()), pts)


def check_flaring(domain: WaveguideDomain, interval: tuple[float, float], samples: int = 400) -> float | None:
    """Largest ``C_I >= 0`` with ``x nu_x <= -C_I`` on the boundary inside the slab ``I x R``.

    Returns ``None`` when the supremum of ``x nu_x`` there is not negative.
    """
    a, b = interval
    if not (math.isfinite(a) and math.isfinite(b) and a < b):
        raise GeometryError("flaring interval must be bounded and nonempty")
    extent = max(domain.R0 + 1.0, abs(a) + 1.0, abs(b) + 1.0)
    x, _, nx, _, _ = boundary_samples(domain, samples, extent)
    sel = (x > a) & (x < b)
    if not sel.any():
        raise GeometryError("empty flaring set")
    sup = float((x[sel] * nx[sel]).max())
    if sup >= -SIGN_TOL:
        return None
    return -sup


def _candidate_intervals(domain: WaveguideDomain):
    R = domain.R0
    if not math.isfinite(R):
        return
    lo, hi = domain.x_range()
    lo = max(lo, -R) if math.isfinite(lo) else -R
    hi = min(hi, R) if math.isfinite(hi) else R
    for width in (R / 4, R / 8, R / 16):
        for c in np.linspace(lo + width, hi - width, 33):
            if abs(c) > width:  # x nu_x vanishes on x = 0
                yield (float(c - width / 2), float(c + width / 2))


def _flat_slab(domain: WaveguideDomain, interval, samples: int) -> bool:
    """Partial flaring in a slab: non-flaring boundary lies on one horizontal line per component."""
    a, b = interval
    extent = max(domain.R0 + 1.0, abs(a) + 1.0, abs(b) + 1.0)
    x, y, nx, ny, _ = boundary_samples(domain, samples, extent)
    sel = (x > a) & (x < b)
    if not sel.any():
        return False
    xs, ys, nxs, nys = x[sel], y[sel], nx[sel], ny[sel]
    prod = xs * nxs
    if prod.min() >= -SIGN_TOL:
        return False
    cut = 0.5 * prod.min()
    flare = prod <= cut
    rest = ~flare
    if np.any(np.abs(nxs[rest]) > 1e-8) or np.any(np.abs(np.abs(nys[rest]) - 1) > 1e-8):
        return False
    lines = np.unique(np.round(ys[rest], 9))
    y_lo, y_hi = domain.y_range()
    yy = np.linspace(y_lo - 0.1, y_hi + 0.1, 4001)
    for xc in np.linspace(a, b, 7)[1:-1]:
        ins = domain.inside(np.full(yy.shape, xc), yy)
        edges = np.flatnonzero(np.diff(ins.astype(int)))
        for k in range(0, len(edges) - 1, 2):
            lo_y, hi_y = yy[edges[k]], yy[edges[k + 1] + 1]
            on_line = sum(np.any(np.abs(lines - v) < 2 * (yy[1] - yy[0])) for v in (lo_y, hi_y))
            if on_line > 1:
                return False
    return True


def classify_theorem(domain: WaveguideDomain, samples_per_segment: int = 400) -> str:
    """Which resolvent theorem's hypotheses the domain satisfies.

    ``convexobs`` takes precedence for a straight strip minus a convex
    obstacle, ``cig`` for one-ended star-shaped domains, then full flaring
    (``hour``) and partial flaring (``flat``).
    """
    if domain.obstacle is not None:
        return "convexobs"
    rep = check_star_shaped_x(domain, samples_per_segment)
    if not rep.star_shaped:
        return "none"
    x, _, _, _, _ = boundary_samples(domain, samples_per_segment)
    if domain.Y_minus.is_empty and x.min() >= -SIGN_TOL:
        return "cig"
    if domain.Y_plus.is_empty and x.max() <= SIGN_TOL:
        return "cig"
    cands = list(_candidate_intervals(domain))
    for iv in cands:
        try:
            if check_flaring(domain, iv, samples_per_segment):
                return "hour"
        except GeometryError:
            continue
    for iv in cands:
        if _flat_slab(domain, iv, samples_per_segment):
            return "flat"
    return "none"


def flaring_interval(domain: WaveguideDomain, samples_per_segment: int = 400):
    """First candidate slab with full flaring and its constant, or ``None``."""
    for iv in _candidate_intervals(domain):
        try:
            c = check_flaring(domain, iv, samples_per_segment)
        except GeometryError:
            continue
        if c:
            return iv, c
    return None


def report(domain: WaveguideDomain, samples_per_segment: int = 400) -> GeometryReport:
    rep = check_star_shaped_x(domain, samples_per_segment)
    fl = flaring_interval(domain, samples_per_segment) if rep.star_shaped else None
    if fl:
        rep.flaring_interval, rep.flaring_constant = fl
    rep.theorem_class = classify_theorem(domain, samples_per_segment)
    return rep


# --------------------------------------------------------------------------- gallery


def _smoothstep(t):
    t = np.clip(t, 0.0, 1.0)
    return t * t * (3.0 - 2.0 * t)


def _dsmoothstep(t):
    inside = (t > 0) & (t < 1)
    return np.where(inside, 6.0 * t * (1.0 - t), 0.0)


def half_strip(width: float = math.pi, R0: float = 1.0) -> WaveguideDomain:
    w = float(width)
    segs = (
        line((0.0, w), (0.0, 0.0), "left"),
        line((0.0, 0.0), (R0, 0.0), "bottom"),
        line((R0, w), (0.0, w), "top"),
    )
    return WaveguideDomain(
        "half_strip", segs, lambda x, y: (x > 0) & (y > 0) & (y < w), R0,
        Y_plus=CrossSection(((0.0, w),)), x0=0.0, params={"width": w, "R0": R0})


def strip(y0: float, y1: float, R0: float = 1.0, name: str = "full_strip") -> WaveguideDomain:
    segs = (line((-R0, y0), (R0, y0), "bottom"), line((R0, y1), (-R0, y1), "top"))
    Y = CrossSection(((y0, y1),))
    return WaveguideDomain(
        name, segs, lambda x, y: (y > y0) & (y < y1), R0, Y_minus=Y, Y_plus=Y,
        params={"y0": y0, "y1": y1, "R0": R0})


def cigar(radius: float = 1.0) -> WaveguideDomain:
    r = float(radius)

    def inside(x, y):
        return ((x - r) ** 2 + y**2 < r * r) | ((x > r) & (np.abs(y) < r))

    segs = (arc((r, 0.0), r, math.pi / 2, 3 * math.pi / 2, "cap"),)
    return WaveguideDomain(
        "cigar", segs, inside, r, Y_plus=CrossSection(((-r, r),)), x0=0.0, params={"radius": r})


def parabola(y_max: float = 3.0) -> WaveguideDomain:
    segs = (graph(lambda s: s**2, lambda s: 2 * s, -y_max, y_max, of="y", label="parabola"),)
    return WaveguideDomain(
        "parabola", segs, lambda x, y: x > y**2, math.inf, cylindrical=False,
        params={"y_max": y_max})


def hourglass(neck: float = 1.0, end: float = 1.5, R0: float = 3.0) -> WaveguideDomain:
    """``|y| < f(x)`` with ``f`` rising from ``neck`` at ``x = 0`` to ``end`` at ``|x| = R0``."""
    if not 0 < neck < end:
        raise GeometryError("hourglass needs 0 < neck < end")

    def f(x):
        return neck + (end - neck) * _smoothstep(np.abs(x) / R0)

    def fp(x):
        return (end - neck) * _dsmoothstep(np.abs(x) / R0) * np.sign(x) / R0

    segs = (
        graph(f, fp, -R0, R0, of="x", label="upper"),
        graph(lambda x: -f(x), lambda x: -fp(x), -R0, R0, of="x", label="lower"),
    )
    Y = CrossSection(((-end, end),))
    interval = (R0 / 6, R0 / 2)
    return WaveguideDomain(
        "hourglass", segs, lambda x, y: np.abs(y) < f(x), R0, Y_minus=Y, Y_plus=Y,
        x0=0.5 * (interval[0] + interval[1]),
        params={"neck": neck, "end": end, "R0": R0, "flaring_interval": list(interval)})


def strip_minus_convex(a: float = 0.5, b: float = 0.3, center=(0.0, 0.0), angle: float = 0.0,
                       half_width: float = 1.0) -> WaveguideDomain:
    """``R x (-half_width, half_width)`` minus a closed rotated ellipse."""
    obs = Obstacle((float(center[0]), float(center[1])), (float(a), float(b)), float(angle))
    ext = obs.extremal_points()
    if not (ext["M"][1] < half_width and ext["m"][1] > -half_width):
        raise GeometryError("obstacle must lie strictly inside the strip")
    R0 = max(abs(ext["+"][0]), abs(ext["-"][0])) + 0.5
    hw = float(half_width)
    segs = (
        line((-R0, -hw), (R0, -hw), "bottom"),
        line((R0, hw), (-R0, hw), "top"),
        obs.segment(),
    )
    Y = CrossSection(((-hw, hw),))
    return WaveguideDomain(
        "strip_minus_convex", segs,
        lambda x, y: (np.abs(y) < hw) & ~obs.contains(x, y), R0, Y_minus=Y, Y_plus=Y,
        x0=float(center[0]), obstacle=obs,
        params={"a": a, "b": b, "center": list(center), "angle": angle, "half_width": hw})


GALLERY = {
    "half_strip": half_strip,
    "full_strip": lambda half_width=1.0, R0=1.0: strip(-half_width, half_width, R0, "full_strip"),
    "product_cylinder": lambda width=math.pi, R0=1.0: strip(0.0, width, R0, "product_cylinder"),
    "cigar": cigar,
    "parabola": parabola,
    "hourglass": hourglass,
    "strip_minus_convex": strip_minus_convex,
}


def gallery(name: str, **params) -> WaveguideDomain:
    """Named example domain with validated invariants."""
    try:
        factory = GALLERY[name]
    except KeyError:
        raise GeometryError(f"unknown gallery domain {name!r}; choose from {sorted(GALLERY)}") from None
    try:
        dom = factory(**params)
    except TypeError as exc:
        raise GeometryError(f"bad parameters for {name}: {exc}") from None
    dom.validate()
    object.__setattr__(dom, "spec", {"type": name, "params": params})
    return dom


# --------------------------------------------------------------------------- custom / JSON


def _segment_from_json(d: dict) -> BoundarySegment:
    kind = d.get("kind")
    if kind == "line":
        return line(d["p0"], d["p1"])
    if kind == "arc":
        return arc(d["center"], d["radius"], d["theta0"], d["theta1"])
    if kind == "graph":
        s = np.asarray(d["s"], float)
        v = np.asarray(d["values"], float)
        spl = CubicSpline(s, v)
        return graph(spl, spl.derivative(), float(s[0]), float(s[-1]), of=d.get("of", "x"))
    raise GeometryError(f"unknown segment kind {kind!r}")


def _ray_parity_inside(segs: Sequence[BoundarySegment], n: int = 2000):
    """Even-odd test with an upward vertical ray against polyline approximations."""
    px, py = [], []
    for seg in segs:
        x, y = seg.point(np.linspace(0.0, 1.0, n))
        px.append(x)
        py.append(y)

    def inside(x, y):
        x = np.atleast_1d(x).astype(float)
        y = np.atleast_1d(y).astype(float)
        count = np.zeros(x.shape, dtype=int)
        for sx, sy in zip(px, py):
            x0, x1, y0, y1 = sx[:-1], sx[1:], sy[:-1], sy[1:]
            for k in range(len(x0)):
                if x0[k] == x1[k]:
                    continue
                lo, hi = min(x0[k], x1[k]), max(x0[k], x1[k])
                hit = (x > lo) & (x <= hi)
                if not hit.any():
                    continue
                yc = y0[k] + (x[hit] - x0[k]) * (y1[k] - y0[k]) / (x1[k] - x0[k])
                idx = np.flatnonzero(hit)
                count[idx[yc > y[hit]]] += 1
        return count % 2 == 1

    return inside


def custom_domain(doc: dict) -> WaveguideDomain:
    segs = tuple(_segment_from_json(s) for s in doc["segments"])
    ends = doc.get("ends", {})
    R0 = float(ends["R0"])
    Ym = CrossSection.from_pairs(ends.get("minus", []))
    Yp = CrossSection.from_pairs(ends.get("plus", []))
    core = _ray_parity_inside(segs)

    def inside(x, y):
        x = np.asarray(x, float)
        y = np.asarray(y, float)
        out = np.zeros(np.broadcast(x, y).shape, dtype=bool)
        x, y = np.broadcast_arrays(x, y)
        plus, minus = x >= R0, x <= -R0
        out[plus] = Yp.contains(y[plus])
        out[minus] = Ym.contains(y[minus])
        mid = ~(plus | minus)
        if mid.any():
            out[mid] = core(x[mid], y[mid])
        return out

    dom = WaveguideDomain(doc.get("name", "custom"), segs, inside, R0, Ym, Yp,
                          x0=float(doc.get("x0", 0.0)), spec=doc)
    dom.validate()
    return dom


def domain_from_json(doc: dict) -> WaveguideDomain:
    """``{"type": <gallery name>, "params": {...}}`` or ``{"type": "custom", ...}``."""
    kind = doc.get("type")
    if kind == "custom":
        return custom_domain(doc)
    return gallery(kind, **doc.get("params", {}))
