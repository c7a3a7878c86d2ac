import cmath
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from wsl.cross_section import CrossSection, modes
from wsl.riemann import (
    BoundaryPoint,
    RamificationError,
    SheetPoint,
    continued_sheet,
    is_physical,
    is_ramification,
    metric_d,
    tau,
    tau_array,
)

BASIS = modes(CrossSection(((0.0, math.pi),)), 40)


def test_tau_on_boundary_sheet():
    p = BoundaryPoint(2.0)
    assert tau(p, 1, BASIS) == pytest.approx(1.0)
    assert tau(p, 2, BASIS) == pytest.approx(1j * math.sqrt(2))


def test_tau_lower_side():
    assert tau(BoundaryPoint(2.0, -1), 1, BASIS) == pytest.approx(-1.0)


def test_tau_flipped_branch():
    # the square root here is the physical one (Im > 0); flipping negates it onto Im < 0
    root = cmath.sqrt(1 - 0.1j)
    root = -root if root.imag < 0 else root
    t = tau(SheetPoint(2 - 0.1j, {1}), 1, BASIS)
    assert t == pytest.approx(-root)
    assert t.imag < 0


def test_ramification_flagged():
    assert is_ramification(BoundaryPoint(4.0), 2, BASIS)
    assert tau(BoundaryPoint(4.0), 2, BASIS) == 0
    with pytest.raises(RamificationError):
        tau_array(BoundaryPoint(4.0), BASIS.sigmas**2, np.zeros(len(BASIS), bool))


def test_metric_examples():
    p = SheetPoint(2 + 0.3j)
    assert metric_d(p, p, BASIS) == 0.0
    d = metric_d(BoundaryPoint(4.0), BoundaryPoint(4.2), BASIS)
    brute = max(abs(tau(BoundaryPoint(4.0), j, BASIS) - tau(BoundaryPoint(4.2), j, BASIS))
                for j in range(1, 41))
    big = modes(CrossSection(((0.0, math.pi),)), 200)
    brute200 = max(abs(tau(BoundaryPoint(4.0), j, big) - tau(BoundaryPoint(4.2), j, big)) for j in range(1, 201))
    assert d == pytest.approx(brute200, abs=1e-14) and d == pytest.approx(brute)
    assert d == pytest.approx(math.sqrt(0.2))
    flip = metric_d(SheetPoint(2 - 0.1j), SheetPoint(2 - 0.1j, {1}), BASIS)
    assert flip == pytest.approx(2 * abs(cmath.sqrt(1 - 0.1j)))
    assert flip == pytest.approx(2.005, abs=1e-3)


def test_is_physical():
    assert is_physical(SheetPoint(-5), BASIS)
    assert is_physical(SheetPoint(2 + 0.3j))
    assert not is_physical(SheetPoint(2 + 0.3j, {1}))
    assert is_physical(BoundaryPoint(0.5), BASIS)
    assert not is_physical(BoundaryPoint(2.0), BASIS)


def test_sheet_point_json_roundtrip():
    p = SheetPoint(3 - 0.2j, {2, 1})
    assert SheetPoint.from_json(p.to_json()) == p
    with pytest.raises(ValueError):
        SheetPoint(1j, {0})
    with pytest.raises(ValueError):
        BoundaryPoint(1.0, 0)


def test_continued_sheet():
    assert continued_sheet(5.0, BASIS) == frozenset({1, 2})


def test_continuation_across_cut():
    # crossing the real axis at E = 2 onto the continued sheet keeps tau_1 continuous
    E = 2.0
    flips = continued_sheet(E, BASIS)
    above = tau(SheetPoint(E + 1e-9j), 1, BASIS)
    below = tau(SheetPoint(E - 1e-9j, flips), 1, BASIS)
    assert abs(above - below) < 1e-8
    unflipped = tau(SheetPoint(E - 1e-9j), 1, BASIS)
    assert abs(above - unflipped) > 1.9


points = st.builds(
    lambda re, im, fl: SheetPoint(complex(re, im), fl),
    st.floats(-10, 60), st.floats(-3, 3).filter(lambda v: abs(v) > 1e-6),
    st.frozensets(st.integers(1, 6), max_size=3),
)


@settings(max_examples=300, deadline=None)
@given(points, points, points)
def test_metric_axioms(p, q, r):
    dpq = metric_d(p, q, BASIS)
    assert dpq == pytest.approx(metric_d(q, p, BASIS), abs=1e-10)
    assert dpq <= metric_d(p, r, BASIS) + metric_d(r, q, BASIS) + 1e-10
    assert metric_d(p, p, BASIS) == 0.0


@settings(max_examples=200, deadline=None)
@given(st.floats(1.0001, 99.0))
def test_boundary_point_real_count(E):
    k = int(np.sum(BASIS.sigmas**2 < E))
    if any(abs(E - s * s) < 1e-9 for s in BASIS.sigmas):
        return
    t = [tau(BoundaryPoint(E), j, BASIS) for j in range(1, len(BASIS) + 1)]
    real = [v for v in t if v.imag == 0]
    assert len(real) == k and all(v.real > 0 for v in real)
    assert all(v.real == 0 and v.imag > 0 for v in t if v.imag != 0)


@settings(max_examples=100, deadline=None)
@given(st.floats(-20, 80), st.floats(0.01, 5))
def test_physical_sheet_has_positive_imaginary_parts(re, im):
    t = tau_array(SheetPoint(complex(re, im)), BASIS.sigmas**2, np.zeros(len(BASIS), bool))
    assert np.all(t.imag > 0)
