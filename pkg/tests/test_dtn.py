import math

import numpy as np
import pytest
import scipy.sparse as sp

from oracles import half_line_solution, half_strip_weighted_norm
from wsl.discretize import build_grid, cutoff
from wsl.dtn import (
    DiscreteSystem,
    NearSingular,
    assemble_system,
    dtn_matrix,
    estimate_weighted_norm,
    face_modes,
    outgoing_zeta,
    sweep_bound,
    resolvent_bound,
)
from wsl.geometry import gallery
from wsl.riemann import BoundaryPoint, SheetPoint

HS = gallery("half_strip")
PC = gallery("product_cylinder")


def _bump(g, x0=1.5, w=0.8):
    return cutoff(g.X, 0.0, w, x0) * np.sin(g.Y)


def test_face_modes_orthonormal():
    g = build_grid(HS, math.pi / 16, 4.0)
    fm = face_modes(g, 1)
    np.testing.assert_allclose(fm.Phi.T @ fm.Phi, np.eye(fm.rank), atol=1e-13)
    np.testing.assert_allclose(fm.lam[0], (4 / g.h**2) * math.sin(g.h / 2) ** 2)


def test_outgoing_zeta_above_and_below_threshold():
    g = build_grid(PC, math.pi / 16, 4.0)
    fm = face_modes(g, 1)
    t = np.sqrt(2.0 - fm.lam + 0j)
    t = np.where(t.imag < 0, -t, t)
    zeta = np.abs(outgoing_zeta(t, g.h))
    assert zeta[0] == pytest.approx(1.0, abs=1e-12)
    assert np.all(zeta[1:] < 1)


def test_zero_rhs_gives_zero():
    g = build_grid(HS, math.pi / 16, 4.0)
    sysm = assemble_system(g, SheetPoint(4 + 0.5j))
    u, r = sysm.solve(np.zeros(g.n), with_residual=True)
    assert not np.any(u) and r == 0.0


def test_below_spectrum_resolvent_bound():
    # dist(-1, [lambda_1, inf)) is about 2, so ||u|| <= ||f|| / 2
    g = build_grid(HS, math.pi / 32, 8.0)
    f = _bump(g) + 0.3 * cutoff(g.X, 0.5, 1.5, 3.0) * np.sin(3 * g.Y)
    u = assemble_system(g, SheetPoint(-1.0)).solve(f)
    lam1 = (4 / g.h**2) * math.sin(g.h / 2) ** 2
    assert g.norm(u) <= g.norm(f) / (1 + lam1) * 1.05


def test_below_spectrum_matches_long_dirichlet_box():
    p = SheetPoint(-1.0)
    short = build_grid(HS, math.pi / 16, 4.0)
    long = build_grid(HS, math.pi / 16, 12.0)
    u_s = assemble_system(short, p).solve(_bump(short))
    u_l = assemble_system(long, p, closure=False).solve(_bump(long))
    u_l = long.to_full(u_l)[: short.mask.shape[0]][short.mask]
    assert np.max(np.abs(u_s - u_l)) < 10 * math.exp(-math.sqrt(2) * (12.0 - 2.3))


@pytest.mark.parametrize("z", [4 + 0.5j, 10 + 0.05j])
def test_truncation_independence(z):
    # the closure is exact for the discrete scheme, so moving the face changes nothing
    p = SheetPoint(z)
    a = build_grid(PC, math.pi / 16, 3.0)
    b = build_grid(PC, math.pi / 16, 4.5)
    ua = a.to_full(assemble_system(a, p).solve(_bump(a, 0.5)))
    ub = b.to_full(assemble_system(b, p).solve(_bump(b, 0.5)))
    off = (b.mask.shape[0] - a.mask.shape[0]) // 2
    ub = ub[off: off + a.mask.shape[0]]
    assert np.max(np.abs(ua - ub)) < 1e-9 * np.max(np.abs(ua))


def test_single_mode_stays_single_and_matches_half_line():
    z = 3 + 0.2j
    g = build_grid(HS, math.pi / 64, 6.0)
    f = cutoff(g.X, 0.0, 1.0, 2.0)
    rhs = f * np.sin(g.Y)
    u = g.to_full(assemble_system(g, SheetPoint(z)).solve(rhs))
    # project every column onto the discrete sines
    ny = u.shape[1]
    k = np.arange(1, ny + 1)
    S = math.sqrt(2 / (ny + 1)) * np.sin(np.outer(k, k) * math.pi / (ny + 1))
    c = u @ S
    assert np.max(np.abs(c[:, 1:])) < 1e-10 * np.max(np.abs(c[:, 0]))
    lam1 = (4 / g.h**2) * math.sin(g.h / 2) ** 2
    ref = half_line_solution(z, lam1, lambda x: cutoff(x, 0.0, 1.0, 2.0), g.xs, 6.0)
    # the column profile is u(x) sin(y); compare after dividing out sin
    prof = u[:, ny // 2] / math.sin(g.ys[ny // 2])
    assert np.max(np.abs(prof - ref)) < 5e-3 * np.max(np.abs(ref))


def test_adjoint_consistency():
    g = build_grid(gallery("hourglass"), 3 / 16, 4.0)
    sysm = assemble_system(g, SheetPoint(6 + 0.3j))
    rng = np.random.default_rng(1)
    f = rng.standard_normal(g.n) + 1j * rng.standard_normal(g.n)
    v = rng.standard_normal(g.n) + 1j * rng.standard_normal(g.n)
    u = sysm.solve(f)
    w = sysm.solve(v, trans="H")
    assert abs(np.vdot(f, w) - np.vdot(u, v)) < 1e-8 * abs(np.vdot(u, v))


def test_near_singular_raises():
    g = build_grid(HS, math.pi / 16, 3.0)
    A = sp.identity(g.n, format="lil", dtype=complex)
    A[0, 0] = 0.0
    with pytest.raises(NearSingular, match="possible resonance"):
        DiscreteSystem(g, SheetPoint(1j), sp.csc_matrix(A)).solve(np.ones(g.n))


def test_ramification_rejected():
    from wsl.riemann import RamificationError

    g = build_grid(HS, math.pi / 16, 4.0)
    # the closure sees the discrete face eigenvalues, so the branch point sits at lambda_1(h)
    lam1 = float(face_modes(g, 1).lam[0])
    with pytest.raises(RamificationError):
        dtn_matrix(g, 1, BoundaryPoint(lam1))
    dtn_matrix(g, 1, BoundaryPoint(1.0))


def test_estimate_below_bound_and_oracle():
    h, L = math.pi / 16, 12.0
    g = build_grid(HS, h, L)
    z = 4 + 0.5j
    pr = estimate_weighted_norm(HS, SheetPoint(z), 1.0, g, x0=0.0)
    assert pr.norm_estimate <= resolvent_bound(z, 1.0)
    ref = half_strip_weighted_norm(z, 1.0, h, g.L)
    assert pr.norm_estimate == pytest.approx(ref, rel=0.03)
    assert set(pr.row()) >= {"E", "eps", "delta", "norm_estimate", "iterations", "residual", "L", "h"}


def test_grid_convergence():
    z = SheetPoint(4 + 0.5j)
    vals = [estimate_weighted_norm(HS, z, 1.0, build_grid(HS, math.pi / m, 10.0), x0=0.0).norm_estimate
            for m in (16, 32)]
    assert vals[1] == pytest.approx(vals[0], rel=0.05)


def test_product_cylinder_bounded_at_boundary_point():
    g = build_grid(PC, math.pi / 16, 6.0)
    est = [estimate_weighted_norm(PC, SheetPoint(complex(2.0, e)), 1.0, g).norm_estimate
           for e in (1.0, 0.1, 0.01)]
    edge = estimate_weighted_norm(PC, BoundaryPoint(2.0), 1.0, g).norm_estimate
    assert max(est) < 1.5 * edge
    assert est[-1] == pytest.approx(edge, rel=0.05)


def test_sweep_flags_straight_strip_threshold():
    dom = gallery("full_strip")
    g = build_grid(dom, 1 / 16, 4.0)
    # sigma_1^2 = pi^2 / 4 for the unit-half-width strip; the discrete threshold sits just below
    E = (4 * 16**2) * math.sin(math.pi / (2 * 32)) ** 2
    res = sweep_bound(dom, [E, 6.0], [0.1, 0.01, 0.001], 1.0, g)
    assert E in res.divergent_E
    assert 6.0 not in res.divergent_E
    assert res.bound_violations == []
