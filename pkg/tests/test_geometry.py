import math

import numpy as np
import pytest

from dgrod import geometry
from dgrod.geometry import (NoIntersection, TangentAmbiguity, annulus, disk,
                            ray_boundary_intersect, rose)

from conftest import make_domain


def test_contains_disk():
    d = disk(1.0)
    assert d.contains((0.0, 0.0))
    assert not d.contains((2.0, 0.0))
    assert d.contains((1.0, 0.0))  # boundary counts as contained


def test_contains_annulus_hole():
    a = annulus(0.5, 1.0)
    assert not a.contains((0.25, 0.0))
    assert a.contains((0.75, 0.0))


def test_domain_parameter_validation():
    with pytest.raises(ValueError):
        disk(-1.0)
    with pytest.raises(ValueError):
        annulus(1.0, 0.5)
    with pytest.raises(ValueError):
        rose(magnitude=0.5)
    with pytest.raises(ValueError):
        rose(petals=0)


def test_boundary_point_disk():
    d = disk(1.0)
    p = d.boundary_point("outer", math.pi / 2)
    assert np.allclose(p, (0.0, 1.0), atol=1e-15)
    with pytest.raises(ValueError):
        d.boundary_point("inner", 0.0)
    with pytest.raises(ValueError):
        d.boundary_point("bogus", 0.0)


def test_boundary_point_rose_radius():
    r = rose(0.5, 1.0, petals=8, magnitude=0.1)
    p0 = r.boundary_point("outer", 0.0)
    assert math.hypot(*p0) == pytest.approx(1.0, abs=1e-15)
    # alpha*theta = pi flips the cosine: radius 1 - 2*beta
    p1 = r.boundary_point("outer", math.pi / 8)
    assert math.hypot(*p1) == pytest.approx(0.8, abs=1e-14)
    assert math.hypot(*r.boundary_point("inner", math.pi / 8)) == pytest.approx(0.4, abs=1e-14)


def test_ray_intersect_disk_axis():
    hit = ray_boundary_intersect(disk(1.0), (0.0, 0.0), (0.5, 0.0))
    assert np.allclose(hit.point, (1.0, 0.0), atol=1e-14)
    assert hit.ray_parameter == pytest.approx(1.0)
    assert hit.curve_id == "outer"


def test_ray_intersect_vertical_chord():
    hit = ray_boundary_intersect(disk(1.0), (0.0, -0.2), (0.0, 0.9))
    assert np.allclose(hit.point, (0.0, 1.0), atol=1e-14)


def test_rose_radial_rays_match_polar_formula():
    # Radial rays hit at exactly the polar radius: the bisection root finder
    # must agree with direct evaluation of the radius formula.
    r = rose(0.5, 1.0, petals=8, magnitude=0.1)
    for theta in np.linspace(0.0, 2 * np.pi, 37, endpoint=False):
        expect = float(r.curve_radius("outer", theta))
        through = (0.9 * expect * math.cos(theta), 0.9 * expect * math.sin(theta))
        hit = ray_boundary_intersect(r, (0.0, 0.0), through)
        assert math.hypot(*hit.point) == pytest.approx(expect, rel=1e-12)
        assert hit.curve_id == "outer"


def test_annulus_ray_nearest_curve():
    a = annulus(0.5, 1.0)
    # aiming at the inner circle from inside the ring: nearest hit is inner
    hit = ray_boundary_intersect(a, (0.9, 0.0), (0.55, 0.0))
    assert np.allclose(hit.point, (0.5, 0.0), atol=1e-14)
    assert hit.curve_id == "inner"
    # aiming outward: outer
    hit = ray_boundary_intersect(a, (0.6, 0.0), (0.95, 0.0))
    assert np.allclose(hit.point, (1.0, 0.0), atol=1e-14)
    assert hit.curve_id == "outer"


@pytest.mark.parametrize("kind", ["disk", "annulus", "rose"])
def test_hit_points_satisfy_boundary_residual(kind, rng):
    dom = make_domain(kind)
    lo = 0.55 if kind != "disk" else 0.1
    for _ in range(200):
        th = rng.uniform(0, 2 * np.pi)
        r0 = rng.uniform(lo, 0.9)
        origin = (r0 * math.cos(th), r0 * math.sin(th))
        th2 = th + rng.uniform(-0.3, 0.3)
        r2 = r0 + rng.uniform(0.02, 0.08)
        through = (r2 * math.cos(th2), r2 * math.sin(th2))
        try:
            hit = ray_boundary_intersect(dom, origin, through)
        except NoIntersection:
            continue
        assert dom.boundary_residual(hit.point) <= 1e-10
        assert hit.ray_parameter > 0.0


@pytest.mark.parametrize("kind", ["disk", "annulus", "rose"])
def test_rescaling_through_point_invariance(kind):
    dom = make_domain(kind)
    origin = (0.62, 0.05)
    through = (0.8, 0.2)
    ref = ray_boundary_intersect(dom, origin, through)
    for s in (0.3, 0.6, 0.9):
        mid = (origin[0] + s * (ref.point[0] - origin[0]),
               origin[1] + s * (ref.point[1] - origin[1]))
        hit = ray_boundary_intersect(dom, origin, mid)
        assert np.allclose(hit.point, ref.point, atol=1e-12)


@pytest.mark.parametrize("kind", ["disk", "annulus", "rose"])
def test_scaled_boundary_samples_are_contained(kind):
    dom = make_domain(kind)
    thetas = np.linspace(0.0, 2 * np.pi, 1000, endpoint=False)
    for cid, scale in (("outer", 0.999), ("inner", 1.001)):
        if cid == "inner" and kind == "disk":
            continue
        for th in thetas:
            x, y = dom.boundary_point(cid, th)
            assert dom.contains((scale * x, scale * y))


def test_boundary_samples_on_curve():
    for kind in ("disk", "annulus", "rose"):
        dom = make_domain(kind)
        for cid in dom.curve_ids:
            for th in np.linspace(0, 2 * np.pi, 97):
                p = dom.boundary_point(cid, th)
                assert dom.boundary_residual(p) <= 1e-12 * dom.outer_radius


def test_no_intersection_inside_rose_ring():
    r = rose(0.5, 1.0, petals=8, magnitude=0.1)
    with pytest.raises(NoIntersection):
        ray_boundary_intersect(r, (0.7, 0.0), (0.705, 0.0))


def test_tangent_ray_warns_and_returns_smaller_parameter():
    with pytest.warns(TangentAmbiguity):
        hit = ray_boundary_intersect(disk(1.0), (-2.0, 1.0), (-1.0, 1.0))
    assert np.allclose(hit.point, (0.0, 1.0), atol=1e-9)


def test_coincident_points_rejected():
    with pytest.raises(ValueError):
        ray_boundary_intersect(disk(1.0), (0.1, 0.1), (0.1, 0.1))
