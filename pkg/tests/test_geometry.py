import json
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from wsl.geometry import (
    GALLERY,
    GeometryError,
    boundary_samples,
    check_flaring,
    check_star_shaped_x,
    classify_theorem,
    domain_from_json,
    gallery,
    outward_normal,
    report,
)


def _segment_index(dom, label):
    return next(i for i, s in enumerate(dom.boundary) if s.label == label)


def test_half_strip_top_wall_normal():
    dom = gallery("half_strip")
    x, y, nx, ny, _ = boundary_samples(dom, 50)
    top = (np.abs(y - math.pi) < 1e-12) & (x > 0.1)
    assert top.any()
    np.testing.assert_allclose(nx[top], 0.0, atol=1e-15)
    np.testing.assert_allclose(ny[top], 1.0)


def test_parabola_normal_at_y_equals_one():
    dom = gallery("parabola")
    k = _segment_index(dom, "parabola")
    t = (1.0 + 3.0) / 6.0  # s = 1 on the parameter range (-3, 3)
    nx, ny = outward_normal(dom, k, t)
    np.testing.assert_allclose([nx, ny], np.array([-1.0, 2.0]) / math.sqrt(5), atol=1e-12)


@pytest.mark.parametrize("theta", [math.pi / 2 + 0.3, math.pi, 3 * math.pi / 2 - 0.2])
def test_cigar_cap_normal(theta):
    dom = gallery("cigar")
    k = _segment_index(dom, "cap")
    t = (theta - math.pi / 2) / math.pi
    nx, ny = outward_normal(dom, k, t)
    np.testing.assert_allclose([nx, ny], [math.cos(theta), math.sin(theta)], atol=1e-12)


def test_parabola_star_shaped():
    rep = check_star_shaped_x(gallery("parabola"))
    assert rep.sup_x_nu_x <= 1e-10
    assert rep.violating_points == []


def test_straight_strip_sup_is_zero():
    rep = check_star_shaped_x(gallery("full_strip"))
    assert rep.sup_x_nu_x == 0.0


def test_off_axis_obstacle_violates():
    dom = gallery("strip_minus_convex", a=0.5, b=0.3, center=(0.2, 0.1), angle=0.5)
    rep = check_star_shaped_x(dom)
    assert rep.violating_points
    assert rep.sup_x_nu_x > 1e-3


def test_flaring_examples():
    hour = gallery("hourglass")
    assert check_flaring(hour, (0.5, 1.5)) > 0
    assert check_flaring(gallery("full_strip"), (0.2, 0.8)) is None
    assert check_flaring(gallery("cigar"), (1.5, 3.0)) is None


@pytest.mark.parametrize("name,expected", [
    ("cigar", "cig"),
    ("half_strip", "cig"),
    ("hourglass", "hour"),
    ("full_strip", "none"),
])
def test_classification(name, expected):
    assert classify_theorem(gallery(name)) == expected


def test_centered_disk_is_convexobs():
    assert classify_theorem(gallery("strip_minus_convex", a=0.5, b=0.5)) == "convexobs"


def test_custom_hourglass_like_graph_is_flaring():
    xs = np.linspace(-2, 2, 41).tolist()
    f = [1.0 + x * x / 4 for x in xs]
    doc = {
        "type": "custom",
        "name": "bowl",
        "segments": [
            {"kind": "graph", "s": xs, "values": f},
            {"kind": "graph", "s": xs, "values": [-v for v in f]},
        ],
        "ends": {"R0": 2.0, "minus": [[-2.0, 2.0]], "plus": [[-2.0, 2.0]]},
    }
    dom = domain_from_json(json.loads(json.dumps(doc)))
    assert dom.inside(np.array([0.0, 0.0, 3.0]), np.array([0.0, 1.2, 1.9])).tolist() == [True, False, True]
    assert check_flaring(dom, (0.5, 1.5)) > 0


def test_gallery_errors():
    with pytest.raises(GeometryError):
        gallery("nope")
    with pytest.raises(GeometryError):
        gallery("cigar", width=3)
    with pytest.raises(GeometryError):
        gallery("hourglass", neck=2.0, end=1.0)
    with pytest.raises(GeometryError):
        gallery("strip_minus_convex", a=2.0, b=2.0)


def test_gallery_shapes():
    hs = gallery("half_strip")
    assert hs.Y_minus.is_empty and hs.Y_plus.intervals == ((0.0, math.pi),)
    cig = gallery("cigar", radius=1.0)
    assert cig.inside(np.array([1.0, 0.05, 5.0, 0.5]), np.array([0.0, 0.0, 0.9, 0.9])).tolist() == \
        [True, True, True, False]


@pytest.mark.parametrize("name", ["half_strip", "cigar", "parabola", "hourglass"])
def test_gallery_obeys_condition(name):
    assert check_star_shaped_x(gallery(name)).sup_x_nu_x <= 1e-10


@pytest.mark.parametrize("name", sorted(GALLERY))
def test_classification_stable_under_refinement(name):
    dom = gallery(name)
    assert classify_theorem(dom, 200) == classify_theorem(dom, 400)


def test_report_json_roundtrip():
    rep = report(gallery("hourglass"))
    doc = json.loads(json.dumps(rep.to_json()))
    assert doc["theorem_class"] == "hour"
    assert doc["flaring_constant"] > 0


@settings(max_examples=25, deadline=None)
@given(st.sampled_from(sorted(GALLERY)), st.integers(20, 120))
def test_normals_point_outward(name, n):
    dom = gallery(name)
    x, y, nx, ny, _ = boundary_samples(dom, n)
    np.testing.assert_allclose(np.hypot(nx, ny), 1.0, atol=1e-12)
    assert np.all(~dom.inside(x + 1e-6 * nx, y + 1e-6 * ny))
    assert np.all(dom.inside(x - 1e-6 * nx, y - 1e-6 * ny))


@settings(max_examples=25, deadline=None)
@given(st.floats(0.1, 0.6), st.floats(0.1, 0.6), st.floats(-0.3, 0.3), st.floats(-0.3, 0.3),
       st.floats(0, math.pi))
def test_obstacle_extremal_points_are_extremal(a, b, cx, cy, angle):
    dom = gallery("strip_minus_convex", a=a, b=b, center=(cx, cy), angle=angle)
    obs = dom.obstacle
    ext = obs.extremal_points()
    x, y = obs.segment().point(np.linspace(0, 1, 4001))
    assert ext["M"][1] >= y.max() - 1e-9 and ext["m"][1] <= y.min() + 1e-9
    assert ext["+"][0] >= x.max() - 1e-9 and ext["-"][0] <= x.min() + 1e-9
