"""Discrete checks of the multiplier identities and the weights used with them.

Solver output is first localised with a smooth ``x`` cutoff, ``v = chi u``,
and ``Pv = (A_h - z) v`` is formed with the Dirichlet 5-point operator, so
``v`` is compactly supported and the identities carry no truncation-face
terms.  Volume terms use centered differences at nodes and edge sums for
squared derivatives.  Boundary terms ``int w |d_nu v|^2 nu_x`` are integrated
along the true parametrised boundary; ``d_nu v`` comes from a quadratic fit
(free intercept) to interpolated values at distances ``2.5h .. 5.5h`` along
the inward normal.  One-sided differences across the staircase would weight
``|d_nu u|^2`` by ``nu_x^3`` instead of ``nu_x``, which is an O(1) error on
curved walls.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np
from numpy.polynomial import Polynomial
from scipy.fft import dst
from scipy.interpolate import RegularGridInterpolator

from .discretize import Grid, assemble_laplacian, cutoff
from .geometry import GeometryError, WaveguideDomain, _normals

NORMAL_OFFSETS = (2.5, 3.5, 4.5, 5.5)


# --------------------------------------------------------------------------- weights


@dataclass(frozen=True)
class Weight:
    """Scalar multiplier with derivatives up to third order."""

    w: Callable
    d1: Callable
    d2: Callable
    d3: Callable | None = None
    name: str = ""

    def __call__(self, x):
        return self.w(np.asarray(x, float))


def build_weight_basic(delta: float) -> Weight:
    """``w(x) = 1 - (1 + x)^{-delta}`` for ``x >= 0``."""
    if not 0 < delta <= 1:
        raise ValueError("delta must lie in (0, 1]")
    d = delta
    return Weight(
        lambda x: 1.0 - (1.0 + x) ** (-d),
        lambda x: d * (1.0 + x) ** (-1.0 - d),
        lambda x: -d * (1.0 + d) * (1.0 + x) ** (-2.0 - d),
        lambda x: d * (1.0 + d) * (2.0 + d) * (1.0 + x) ** (-3.0 - d),
        f"basic(delta={delta})",
    )


def tanh_weight(scale: float = 1.0, x0: float = 0.0) -> Weight:
    """``tanh((x - x0)/scale)``: a bounded increasing weight for two-ended domains."""
    s = scale

    def t(x):
        return np.tanh((np.asarray(x, float) - x0) / s)

    return Weight(
        t,
        lambda x: (1 - t(x) ** 2) / s,
        lambda x: -2 * t(x) * (1 - t(x) ** 2) / s**2,
        lambda x: (-2 + 8 * t(x) ** 2 - 6 * t(x) ** 4) / s**3,
        f"tanh(scale={scale})",
    )


def polynomial_weight(coeffs) -> Weight:
    p = Polynomial(coeffs)
    return Weight(p, p.deriv(1), p.deriv(2), p.deriv(3), f"poly{tuple(coeffs)}")


CONSTANT_WEIGHT = polynomial_weight([1.0])
IDENTITY_WEIGHT = polynomial_weight([0.0, 1.0])


# --------------------------------------------------------------------------- reports


@dataclass
class IdentityReport:
    lhs: float
    rhs: float
    residual: float
    h: float
    boundary_term: float
    terms: dict

    @property
    def relative_residual(self) -> float:
        scale = max(abs(self.lhs), sum(abs(v) for v in self.terms.values()), 1e-300)
        return self.residual / scale

    def to_json(self) -> dict:
        return {"lhs": self.lhs, "rhs": self.rhs, "residual": self.residual, "h": self.h,
                "boundary_term": self.boundary_term, "relative_residual": self.relative_residual,
                "terms": self.terms}


def _report(lhs, terms, grid, bkey="boundary"):
    rhs = float(sum(terms.values()))
    return IdentityReport(float(lhs), rhs, abs(float(lhs) - rhs), grid.h, float(terms.get(bkey, 0.0)), terms)


# --------------------------------------------------------------------------- discrete calculus


def _ip(grid, a, b) -> complex:
    """``<a, b> = h^2 sum a conj(b)``."""
    return grid.h**2 * complex(np.sum(a * np.conj(b)))


def _dc(grid: Grid, v, axis: int):
    """Centered difference with zero extension off the mask."""
    P = np.pad(grid.to_full(v), 1)
    if axis == 0:
        D = (P[2:, 1:-1] - P[:-2, 1:-1]) / (2 * grid.h)
    else:
        D = (P[1:-1, 2:] - P[1:-1, :-2]) / (2 * grid.h)
    return D[grid.mask]


def _edge_energy(grid: Grid, v, axis: int, coef=None) -> float:
    """``sum_edges c(midpoint) |v_b - v_a|^2`` along ``axis`` (equals ``int c |d v|^2``)."""
    P = np.pad(grid.to_full(v), 1)
    d = np.diff(P, axis=axis)
    h = grid.h
    if axis == 0:
        xm = np.r_[grid.xs[0] - h / 2, grid.xs + h / 2][:, None]
        ym = np.r_[grid.ys[0] - h, grid.ys, grid.ys[-1] + h][None, :]
    else:
        xm = np.r_[grid.xs[0] - h, grid.xs, grid.xs[-1] + h][:, None]
        ym = np.r_[grid.ys[0] - h / 2, grid.ys + h / 2][None, :]
    c = 1.0 if coef is None else coef(np.broadcast_to(xm, d.shape), np.broadcast_to(ym, d.shape))
    return float(np.sum(c * np.abs(d) ** 2))


def apply_P(grid: Grid, v, z: complex, op=None):
    """``(A_h - z) v`` with Dirichlet conditions off the mask."""
    op = assemble_laplacian(grid) if op is None else op
    return op.A @ v - z * v


def localize(grid: Grid, u, inner: float, outer: float, x0: float = 0.0):
    """``chi(x) u`` with a smooth cutoff equal to 1 on ``|x - x0| <= inner``."""
    if outer >= grid.L - 2 * grid.h and grid.domain.cylindrical:
        raise GeometryError("cutoff support reaches the truncation faces")
    return cutoff(grid.X, inner, outer, x0) * np.asarray(u)


# --------------------------------------------------------------------------- boundary terms


def normal_derivative_samples(grid: Grid, v, n_per_h: float = 2.0, x_window=None):
    """Boundary points, outward normals, arclength weights and ``d_nu v``.

    ``d_nu v`` is minus the slope of a quadratic fit to bilinearly
    interpolated values at ``NORMAL_OFFSETS * h`` along the inward normal.
    """
    dom = grid.domain
    interp = RegularGridInterpolator((grid.xs, grid.ys), grid.to_full(v), bounds_error=False, fill_value=0.0)
    s = np.array(NORMAL_OFFSETS) * grid.h
    S = np.vstack([np.ones_like(s), s, s * s]).T
    pinv = np.linalg.pinv(S)
    # walls of a one-ended domain sit at x = 0, left of the first grid column
    xlo, xhi = (-grid.L - grid.h, grid.L + grid.h) if x_window is None else x_window
    out = [[], [], [], [], [], []]
    for seg in dom.segments(max(grid.L, dom.R0 + 1.0) if dom.cylindrical else None):
        pts = seg.point(np.linspace(0, 1, 201))
        length = float(np.sum(np.hypot(np.diff(pts[0]), np.diff(pts[1]))))
        N = max(int(math.ceil(n_per_h * length / grid.h)), 50)
        t = (np.arange(N) + 0.5) / N
        x, y, nx, ny = _normals(dom, seg, t)
        dx, dy = seg.derivative(t)
        ds = np.hypot(dx, dy) / N
        ok = ~np.isnan(nx) & (x > xlo) & (x < xhi)
        if not ok.any():
            continue
        x, y, nx, ny, ds = x[ok], y[ok], nx[ok], ny[ok], ds[ok]
        qx = x[:, None] - s[None, :] * nx[:, None]
        qy = y[:, None] - s[None, :] * ny[:, None]
        vals = interp(np.stack([qx.ravel(), qy.ravel()], axis=1)).reshape(qx.shape)
        coef = vals @ pinv.T
        dnu = -coef[:, 1]
        for c, a in zip(out, (x, y, nx, ny, ds, dnu)):
            c.append(a)
    if not out[0]:
        return tuple(np.zeros(0) for _ in range(6))
    return tuple(np.concatenate(c) for c in out)


def boundary_integral(grid: Grid, v, fn, x_window=None) -> float:
    """``int_{dOmega} fn(x, y, nu_x, nu_y) |d_nu v|^2 ds``."""
    x, y, nx, ny, ds, dnu = normal_derivative_samples(grid, v, x_window=x_window)
    return float(np.sum(fn(x, y, nx, ny) * np.abs(dnu) ** 2 * ds))


# --------------------------------------------------------------------------- identities


def multiplier_identity(grid: Grid, v, z: complex, weight: Weight, direction: str = "x",
                        Pv=None) -> IdentityReport:
    """``<w' d_e v, d_e v> = 1/4 <w''' v, v> + 1/2 Re<Pv, d_e(w v)> + 1/2 Re<w d_e v, Pv>
    + eps Im<w d_e v, v> + 1/2 int w |d_nu v|^2 nu_e`` for ``w = w(e)``."""
    if weight.d3 is None:
        raise ValueError("weight needs a third derivative")
    axis = 0 if direction == "x" else 1
    coord = grid.X if axis == 0 else grid.Y
    eps = z.imag
    v = np.asarray(v, dtype=complex)
    f = apply_P(grid, v, z) if Pv is None else Pv
    w = weight.w(coord)
    dv = _dc(grid, v, axis)
    lhs = _edge_energy(grid, v, axis, lambda X, Y: weight.d1(X if axis == 0 else Y))
    terms = {
        "w3": 0.25 * _ip(grid, weight.d3(coord) * v, v).real,
        "P1": 0.5 * _ip(grid, f, _dc(grid, w * v, axis)).real,
        "P2": 0.5 * _ip(grid, w * dv, f).real,
        "eps": eps * _ip(grid, w * dv, v).imag,
        "boundary": 0.5 * boundary_integral(
            grid, v, lambda x, y, nx, ny: weight.w(x if axis == 0 else y) * (nx if axis == 0 else ny)),
    }
    return _report(lhs, terms, grid)


def morawetz_residual(grid: Grid, u, w: Weight, E: float, eps: float, localize_to=None) -> IdentityReport:
    """The ``w(x) d_x`` multiplier identity for (localised) solver output."""
    if w.d3 is None:
        raise ValueError("weight needs a third derivative")
    v = u if localize_to is None else localize(grid, u, *localize_to)
    return multiplier_identity(grid, v, complex(E, eps), w, "x")


def ibpe_residual(grid: Grid, u, mu: Weight, E: float, eps: float, localize_to=None) -> IdentityReport:
    """``<mu' v', v'> + E<mu' v, v> = 2Re<mu Pv, v'> - 2eps Im<mu v, v'> + <mu' d_y v, d_y v>
    + int mu |d_nu v|^2 nu_x``."""
    v = u if localize_to is None else localize(grid, u, *localize_to)
    v = np.asarray(v, dtype=complex)
    z = complex(E, eps)
    f = apply_P(grid, v, z)
    X = grid.X
    m, m1 = mu.w(X), mu.d1(X)
    dvx = _dc(grid, v, 0)
    lhs = _edge_energy(grid, v, 0, lambda Xe, Ye: mu.d1(Xe)) + E * _ip(grid, m1 * v, v).real
    terms = {
        "P": 2 * _ip(grid, m * f, dvx).real,
        "eps": -2 * eps * _ip(grid, m * v, dvx).imag,
        "y": _edge_energy(grid, v, 1, lambda Xe, Ye: mu.d1(Xe)),
        "boundary": boundary_integral(grid, v, lambda x, y, nx, ny: mu.w(x) * nx),
    }
    return _report(lhs, terms, grid)


def ibpy_residual(grid: Grid, u, E: float, eps: float, variant: str = "yj", localize_to=None) -> IdentityReport:
    """``y d_y`` multiplier identity (``variant='yj'``) or the translation identity
    ``0 = Re<Pv, d_y v> + eps Im<d_y v, v> + 1/2 int |d_nu v|^2 nu_y`` (``'translation'``)."""
    v = u if localize_to is None else localize(grid, u, *localize_to)
    if not np.any(v):
        return IdentityReport(0.0, 0.0, 0.0, grid.h, 0.0, {})
    if variant == "yj":
        return multiplier_identity(grid, v, complex(E, eps), IDENTITY_WEIGHT, "y")
    if variant == "translation":
        return multiplier_identity(grid, v, complex(E, eps), CONSTANT_WEIGHT, "y")
    raise ValueError("variant must be 'yj' or 'translation'")


# --------------------------------------------------------------------------- truncated identities


def _face_column_values(grid: Grid, u, R: float, side: int):
    """Fourth-order midpoint value and ``x``-derivative on the cut ``x = side * R``."""
    h = grid.h
    s = (side * R - grid.xs[0]) / h - 0.5
    i = int(round(s))
    if abs(s - i) > 1e-9:
        raise GeometryError("cut must lie midway between grid columns")
    if i - 1 < 0 or i + 2 >= len(grid.xs):
        raise GeometryError("R beyond grid")
    U = grid.to_full(np.asarray(u, dtype=complex))
    c = U[i - 1:i + 3]
    m = grid.mask[i - 1:i + 3]
    if not np.all(m == m[0]):
        raise GeometryError("cut stencil leaves the product region")
    val = (-c[0] + 9 * c[1] + 9 * c[2] - c[3]) / 16.0
    der = (c[0] - 27 * c[1] + 27 * c[2] - c[3]) / (24.0 * h)
    return val, der, m[0]


def _runs(mask_col):
    idx = np.flatnonzero(mask_col)
    if idx.size == 0:
        return []
    breaks = np.flatnonzero(np.diff(idx) > 1)
    return np.split(idx, breaks + 1)


def face_integrals(grid: Grid, u, R: float, side: int) -> dict:
    """``int |u|^2, int |u_y|^2, int |u'|^2, int u' conj(u)`` over the cut ``x = side R``.

    ``y`` integrals are spectral: each run of face nodes is expanded in
    discrete sines, which integrate exactly against each other.
    """
    val, der, m = _face_column_values(grid, u, R, side)
    h = grid.h
    out = {"u2": 0.0, "uy2": 0.0, "ux2": 0.0, "uxu": 0j}
    for run in _runs(m):
        a, b = val[run], der[run]
        n = len(run)
        ell = (n + 1) * h
        out["u2"] += h * float(np.sum(np.abs(a) ** 2))
        out["ux2"] += h * float(np.sum(np.abs(b) ** 2))
        out["uxu"] += h * complex(np.sum(b * np.conj(a)))
        # u(y_j) = sum_k c_k sin(k pi j/(n+1)); int |u_y|^2 = (ell/2) sum (k pi/ell)^2 |c_k|^2
        ck = (dst(a.real, type=1) + 1j * dst(a.imag, type=1)) / (n + 1)
        k = np.arange(1, n + 1)
        out["uy2"] += float(0.5 * ell * np.sum((k * math.pi / ell) ** 2 * np.abs(ck) ** 2))
    return out


def eigenvalue_identity_check(grid: Grid, u, E: float, R: float, eps: float = 0.0, Pu=None):
    """Both truncated ``x d_x`` identities on ``Omega_R = Omega cap {|x| < R}``.

    ``R`` is moved to the nearest half-integer grid position.  Returns the
    real-part and imaginary-part reports.
    """
    h = grid.h
    R = (math.floor(R / h) + 0.5) * h
    if R + 2 * h > max(abs(grid.xs[0]), abs(grid.xs[-1])):
        raise GeometryError("R beyond grid")
    z = complex(E, eps)
    u = np.asarray(u, dtype=complex)
    f = apply_P(grid, u, z) if Pu is None else Pu
    X = grid.X
    inR = np.abs(X) < R
    sides = [s for s in (1, -1) if (s * grid.xs[-1 if s > 0 else 0]) > R]
    # volume sums over Omega_R; stencils use the full u, so nodes next to the cut see real neighbours
    ux = _dc(grid, u, 0)
    xu_x = _dc(grid, X * u, 0)
    ip = lambda a, b: grid.h**2 * complex(np.sum((a * np.conj(b))[inR]))
    P = np.pad(grid.to_full(u), 1)
    d = np.diff(P, axis=0)
    xm = np.r_[grid.xs[0] - h / 2, grid.xs + h / 2]
    wmid = np.where(np.abs(xm) < R - 1e-9 * h, 1.0, np.where(np.abs(np.abs(xm) - R) < 1e-9 * h, 0.5, 0.0))
    lhs = float(np.sum(wmid[:, None] * np.abs(d) ** 2))
    B = 0.5 * boundary_integral(grid, u, lambda x, y, nx, ny: x * nx, x_window=(-R, R))
    face_re = 0.0
    face_im = 0.0
    for s in sides:
        fi = face_integrals(grid, u, R, s)
        face_re += 0.5 * (s * fi["uxu"].real + R * (-fi["uy2"] + E * fi["u2"] + fi["ux2"]))
        face_im += eps * R * fi["u2"] + s * fi["uxu"].imag
    terms_re = {
        "P1": 0.5 * ip(f, xu_x).real,
        "P2": 0.5 * ip(X * ux, f).real,
        "eps": eps * ip(X * ux, u).imag,
        "boundary": B,
        "faces": face_re,
    }
    rep_re = _report(lhs, terms_re, grid)
    terms_im = {
        "P1": ip(f, xu_x).imag,
        "P2": ip(X * ux, f).imag,
        "eps": -2 * eps * ip(X * ux, u).real,
        "faces": face_im,
    }
    rep_im = _report(0.0, terms_im, grid)
    return rep_re, rep_im


# --------------------------------------------------------------------------- Poincare


@dataclass
class PoincareReport:
    ratio: float
    bound: float
    slack: float

    @property
    def ok(self) -> bool:
        return self.ratio <= self.bound + self.slack


def poincare_bound(delta: float) -> float:
    return 2.0 * math.sqrt(1.0 + delta) / math.sqrt(2.0 + delta)


def poincare_check(grid: Grid, u, delta: float, x0: float = 0.0, slack: float = 0.05) -> PoincareReport:
    """``||sqrt(w''') u|| / ||sqrt(w') u'||`` for ``w(x) = 1 - (1 + x - x0)^{-delta}``."""
    u = np.asarray(u)
    if u.shape != (grid.n,):
        raise ValueError("u must be a grid function on the mask")
    if np.any(grid.X[np.abs(u) > 0] < x0):
        raise ValueError("u must be supported in x >= x0")
    w = build_weight_basic(delta)
    num = grid.h**2 * float(np.sum(w.d3(np.maximum(grid.X - x0, 0.0)) * np.abs(u) ** 2))
    den = _edge_energy(grid, u, 0, lambda X, Y: w.d1(np.maximum(X - x0, 0.0)))
    if den == 0:
        raise ValueError("u' vanishes: u must vanish on the boundary and be nonzero")
    return PoincareReport(math.sqrt(num / den), poincare_bound(delta), slack)


# --------------------------------------------------------------------------- convex-obstacle weight


def _g(delta, x3):
    d = delta

    def g0(x):
        return d * (1 + np.abs(x - x3)) ** (-d - 1)

    def g1(x):
        return -d * (d + 1) * np.sign(x - x3) * (1 + np.abs(x - x3)) ** (-d - 2)

    def g2(x):
        return d * (d + 1) * (d + 2) * (1 + np.abs(x - x3)) ** (-d - 3)

    def g3(x):
        return -d * (d + 1) * (d + 2) * (d + 3) * np.sign(x - x3) * (1 + np.abs(x - x3)) ** (-d - 4)

    def G(x):
        r = np.abs(x - x3)
        return np.sign(x - x3) * (1 - (1 + r) ** (-d))

    return (g0, g1, g2, g3), G


def _hermite(a, b, fa, fb) -> Polynomial:
    """Quintic matching value, first and second derivative at ``a`` and ``b``.

    Built in the local variable ``t = (2x - a - b)/(b - a)`` so that shifted
    intervals keep the same conditioning.
    """
    s = 0.5 * (b - a)
    rows, rhs = [], []
    for t, f in ((-1.0, fa), (1.0, fb)):
        for k in range(3):
            row = np.zeros(6)
            for p in range(k, 6):
                row[p] = math.factorial(p) / math.factorial(p - k) * t ** (p - k)
            rows.append(row)
            rhs.append(f[k] * s**k)
    return Polynomial(np.linalg.solve(np.array(rows), np.array(rhs)), domain=[a, b], window=[-1, 1])


def _bump(a, b) -> Polynomial:
    """``(x - a)^3 (b - x)^3`` on the same local variable as :func:`_hermite`."""
    s = 0.5 * (b - a)
    return Polynomial((Polynomial([1.0, 0.0, -1.0]) ** 3).coef * s**6, domain=[a, b], window=[-1, 1])


@dataclass
class _Piecewise:
    """Piecewise ``w'``: closed-form target outside the polynomial pieces."""

    gs: tuple
    G: Callable
    pieces: list  # (a, b, Polynomial)

    def d(self, x, k: int = 1):
        """``w^{(k)}`` for ``k = 1, 2, 3``."""
        x = np.asarray(x, float)
        out = self.gs[k - 1](x)
        for a, b, p in self.pieces:
            sel = (x >= a) & (x <= b)
            if np.any(sel):
                out = np.where(sel, p.deriv(k - 1)(x), out)
        return out

    def antiderivative(self, x):
        """An antiderivative of ``w'`` (continuous, exact on every piece)."""
        x = np.asarray(x, float)
        out = self.G(x)
        for a, b, p in self.pieces:
            P = p.integ()
            inside = (x >= a) & (x <= b)
            past = x > b
            corr_in = (P(x) - P(a)) - (self.G(x) - self.G(a))
            corr_past = (P(b) - P(a)) - (self.G(b) - self.G(a))
            out = out + np.where(inside, corr_in, 0.0) + np.where(past, corr_past, 0.0)
        return out

    def integral(self, lo, hi) -> float:
        return float(self.antiderivative(hi) - self.antiderivative(lo))


@dataclass
class ConvexWeight:
    breakpoints: tuple
    delta: float
    rho0: float
    plus: _Piecewise
    minus: _Piecewise
    amplitudes: dict

    def w_plus(self, x):
        x4 = self.breakpoints[3]
        return self.plus.antiderivative(x) - self.plus.antiderivative(x4)

    def w_minus(self, x):
        x2 = self.breakpoints[1]
        return self.minus.antiderivative(x) - self.minus.antiderivative(x2)

    def dw_plus(self, x, k: int = 1):
        return self.plus.d(x, k)

    def dw_minus(self, x, k: int = 1):
        return self.minus.d(x, k)

    def target(self, x):
        return self.plus.gs[0](np.asarray(x, float))

    def check_bullets(self, n: int = 1000, tol: float = 1e-8) -> dict:
        """The four defining properties at ``n`` sample points per check."""
        x1, x2, x3, x4, x5 = self.breakpoints
        span = x5 - x1
        xs = np.linspace(x1 - span, x5 + span, n)
        pos = bool(np.all(self.dw_plus(xs) > 0) and np.all(self.dw_minus(xs) > 0))
        out_x = np.r_[np.linspace(x1 - 3 * span, x1, n // 2, endpoint=False),
                      np.linspace(x5, x5 + 3 * span, n - n // 2 + 1)[1:]]
        outside = max(float(np.max(np.abs(self.w_plus(out_x) - self.w_minus(out_x)))),
                      float(np.max(np.abs(self.dw_plus(out_x) - self.target(out_x)))),
                      float(np.max(np.abs(self.dw_minus(out_x) - self.target(out_x)))))
        r = self.rho0 * (1 - 1e-9)
        near = np.r_[np.linspace(x2 - r, x2 + r, n // 2), np.linspace(x4 - r, x4 + r, n - n // 2)]
        near_err = max(float(np.max(np.abs(self.dw_plus(near) - self.target(near)))),
                       float(np.max(np.abs(self.dw_minus(near) - self.target(near)))))
        zeros = max(abs(float(self.w_plus(x4))), abs(float(self.w_minus(x2))))
        return {
            "positive_derivative": pos,
            "equal_outside": outside <= tol,
            "target_near_x2_x4": near_err <= tol,
            "zeros": zeros <= tol,
            "max_errors": {"outside": outside, "near": near_err, "zeros": zeros},
        }


def build_convex_weight(delta: float, breakpoints) -> ConvexWeight:
    """Weights ``w_+-`` with ``w_+-' = delta (1 + |x - x3|)^{-delta-1}`` away from three pieces.

    Each piece is the quintic Hermite interpolant of the target (value, first
    and second derivative at both ends) plus ``A (x - a)^3 (b - x)^3``.  The
    amplitudes of ``h_{-,1}`` and ``h_{+,3}`` are solved from the two
    integral conditions, which are linear in them; any piece whose Hermite
    part is not positive is lifted first.
    """
    x1, x2, x3, x4, x5 = map(float, breakpoints)
    if not x1 < x2 < x3 < x4 < x5:
        raise ValueError("need x1 < x2 < x3 < x4 < x5")
    if delta <= 0:
        raise ValueError("delta must be positive")
    rho0 = min(x2 - x1, x3 - x2, x4 - x3, x5 - x4) / 3.0
    gs, G = _g(delta, x3)
    ivs = [(x1, x2 - rho0), (x2 + rho0, x4 - rho0), (x4 + rho0, x5)]

    def base(a, b):
        fa = [float(gk(np.array(a))) for gk in gs[:3]]
        fb = [float(gk(np.array(b))) for gk in gs[:3]]
        return _hermite(a, b, fa, fb)

    bases = [base(a, b) for a, b in ivs]
    bumps = [_bump(a, b) for a, b in ivs]
    bump_int = [float(B.integ()(b) - B.integ()(a)) for B, (a, b) in zip(bumps, ivs)]

    def min_amp(k):
        a, b = ivs[k]
        xs = np.linspace(a, b, 2001)[1:-1]
        p, B = bases[k](xs), bumps[k](xs)
        need = (1e-3 * gs[0](xs) - p) / B
        return max(0.0, float(np.max(need)))

    lift = [min_amp(k) for k in range(3)]
    amps_plus = [lift[0], lift[1], 0.0]
    amps_minus = [0.0, lift[1], lift[2]]

    def make(amps):
        return _Piecewise(gs, G, [(a, b, bases[k] + amps[k] * bumps[k]) for k, (a, b) in enumerate(ivs)])

    # first condition: int_{x1}^{x4} w_+' = int_{x1}^{x2} w_-'
    plus0 = make(amps_plus)
    minus0 = make([0.0] + amps_minus[1:])
    A_m1 = (plus0.integral(x1, x4) - minus0.integral(x1, x2)) / bump_int[0]
    # second condition: int_{x4}^{x5} w_+' = int_{x2}^{x5} w_-'
    minus1 = make([A_m1] + amps_minus[1:])
    plus1 = make(amps_plus[:2] + [0.0])
    A_p3 = (minus1.integral(x2, x5) - plus1.integral(x4, x5)) / bump_int[2]
    if A_m1 < 0 or A_p3 < lift[2] - 1e-15 or A_m1 < lift[0] - 1e-15:
        raise ValueError(f"infeasible positivity: amplitudes A-1={A_m1:.3e}, A+3={A_p3:.3e}, lifts={lift}")
    plus = make(amps_plus[:2] + [A_p3])
    minus = make([A_m1] + amps_minus[1:])
    cw = ConvexWeight((x1, x2, x3, x4, x5), float(delta), rho0, plus, minus,
                      {"plus": amps_plus[:2] + [A_p3], "minus": [A_m1] + amps_minus[1:]})
    xs = np.linspace(x1, x5, 4001)
    if np.any(cw.dw_plus(xs) <= 0) or np.any(cw.dw_minus(xs) <= 0):
        raise ValueError("infeasible positivity after amplitude solve")
    return cw


def obstacle_breakpoints(domain: WaveguideDomain) -> tuple:
    """``x_- + r1, x_m, (x_m + x_M)/2, x_M, x_+ - r1`` from the obstacle's extremal points."""
    ob = domain.obstacle
    if ob is None:
        raise ValueError("domain has no obstacle")
    ext = ob.extremal_points()
    xM, xm = ext["M"][0], ext["m"][0]
    if xM < xm:
        raise ValueError("reflect the domain so that x_M >= x_m")
    if abs(xM - xm) < 1e-12:
        raise ValueError("x_M = x_m: covered by the partial-flaring case")
    xp, xn = ext["+"][0], ext["-"][0]
    r1 = min(xp - xM, xM - xm, xm - xn) / 3.0
    return (xn + r1, xm, 0.5 * (xm + xM), xM, xp - r1)


@dataclass
class ObstacleSignReport:
    max_w_nu_x: float
    zero_points: list
    extremal: dict

    def ok(self, tol: float = 1e-10, near: float = 1e-2) -> bool:
        if self.max_w_nu_x > tol:
            return False
        targets = [self.extremal["M"], self.extremal["m"]]
        return all(min(math.hypot(p[0] - t[0], p[1] - t[1]) for t in targets) <= near
                   for p in self.zero_points)


def obstacle_sign_check(domain: WaveguideDomain, cw: ConvexWeight, n: int = 4000,
                        zero_tol: float = 1e-6) -> ObstacleSignReport:
    """``w nu_x`` on the obstacle boundary, ``w = w_+`` on the upper arc and ``w_-`` on the lower."""
    ob = domain.obstacle
    seg = ob.segment()
    t = (np.arange(n) + 0.5) / n
    x, y, nx, ny = _normals(domain, seg, t)
    ext = ob.extremal_points()
    # upper arc: above the chord through the leftmost and rightmost points
    (xl, yl), (xr, yr) = ext["-"], ext["+"]
    chord = yl + (x - xl) * (yr - yl) / (xr - xl)
    upper = y >= chord
    w = np.where(upper, cw.w_plus(x), cw.w_minus(x))
    prod = w * nx
    zeros = [(float(a), float(b)) for a, b, p in zip(x, y, prod) if abs(p) <= zero_tol]
    return ObstacleSignReport(float(np.nanmax(prod)), zeros, ext)
