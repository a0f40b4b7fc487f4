"""Tests for the shared geometry primitives."""

import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from guidebot.geometry import (
    Ellipse,
    Point2D,
    Pose2D,
    ellipse_boundary_distance,
    mvee_fit,
    user_position,
    wrap_angle,
)


# ---------------------------------------------------------------- oracles

def ray_support_oracle(ellipse: Ellipse, toward: Point2D) -> float:
    """Numeric ray-conic intersection: bisect on the quadratic form along the ray."""
    d = toward.as_array() - ellipse.center.as_array()
    d = d / np.linalg.norm(d)

    def form(t: float) -> float:
        p = ellipse.center.as_array() + t * d
        return ellipse.quadratic_form(Point2D(p[0], p[1])) - 1.0

    lo, hi = 0.0, 2.0 * ellipse.a
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if form(mid) < 0.0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def min_area_grid_search(pts: np.ndarray, n_theta: int = 60, n_scale: int = 80) -> float:
    """Dense search over rotation and axis ratio for the smallest enclosing
    ellipse area. Coarse but independent; used as an upper-bound oracle."""
    best = math.inf
    centroid = pts.mean(axis=0)
    centered = pts - centroid
    for theta in np.linspace(0.0, math.pi, n_theta, endpoint=False):
        c, s = math.cos(theta), math.sin(theta)
        u = centered @ np.array([c, s])
        v = centered @ np.array([-s, c])
        for ratio in np.geomspace(0.05, 20.0, n_scale):
            # given axis ratio a/b = ratio, the minimal enclosing scaled circle
            # radius is max over points of sqrt((u/ratio)^2 + v^2) -> b
            b = np.sqrt((u / ratio) ** 2 + v**2).max()
            a = ratio * b
            if a < b:
                a, b = b, a
            best = min(best, math.pi * a * b)
    return best


# ------------------------------------------------------------- wrap_angle

def test_wrap_identity():
    assert wrap_angle(0.0) == 0.0


def test_wrap_documented_boundary():
    # convention: result in (-pi, pi], odd multiples of pi map to +pi
    assert wrap_angle(3 * math.pi) == pytest.approx(math.pi)
    assert wrap_angle(-math.pi) == pytest.approx(math.pi)
    assert wrap_angle(math.pi) == pytest.approx(math.pi)


def test_wrap_modular():
    assert wrap_angle(2 * math.pi + 0.5) == pytest.approx(0.5, abs=1e-12)


def test_wrap_rejects_non_finite():
    with pytest.raises(ValueError):
        wrap_angle(float("nan"))
    with pytest.raises(ValueError):
        wrap_angle(float("inf"))


@given(st.floats(-50.0, 50.0), st.integers(-5, 5))
def test_wrap_idempotent_and_periodic(x, n):
    w = wrap_angle(x)
    assert -math.pi < w <= math.pi
    assert wrap_angle(w) == pytest.approx(w, abs=1e-12)
    assert wrap_angle(x + 2 * math.pi * n) == pytest.approx(w, abs=1e-9)
    # same angle modulo 2*pi
    assert math.isclose(math.cos(w), math.cos(x), abs_tol=1e-9)
    assert math.isclose(math.sin(w), math.sin(x), abs_tol=1e-9)


# -------------------------------------------------------------- mvee_fit

def test_mvee_unit_circle_cross():
    pts = [Point2D(-1, 0), Point2D(1, 0), Point2D(0, -1), Point2D(0, 1)]
    ell = mvee_fit(pts, tolerance=1e-8)
    assert ell.a == pytest.approx(1.0, abs=1e-3)
    assert ell.b == pytest.approx(1.0, abs=1e-3)
    assert ell.center.x == pytest.approx(0.0, abs=1e-6)
    assert ell.center.y == pytest.approx(0.0, abs=1e-6)
    for p in pts:
        assert ell.contains(p, tol=1e-9)
    # area within tolerance of the grid-search bound
    oracle_area = min_area_grid_search(np.array([[p.x, p.y] for p in pts]))
    assert math.pi * ell.a * ell.b <= oracle_area * (1.0 + 1e-2)


def test_mvee_single_point_fallback():
    ell = mvee_fit([Point2D(2, 3)], r_min=0.05)
    assert (ell.center.x, ell.center.y) == (2, 3)
    assert ell.a == pytest.approx(0.05)
    assert ell.b == pytest.approx(0.05)


def test_mvee_collinear_fallback():
    pts = [Point2D(0, 0), Point2D(1, 0), Point2D(2, 0)]
    ell = mvee_fit(pts, r_min=0.05)
    assert ell.center.x == pytest.approx(1.0)
    assert ell.center.y == pytest.approx(0.0, abs=1e-12)
    assert ell.b == pytest.approx(0.05, abs=1e-9)
    assert ell.a >= 1.0 + 0.05 - 1e-9
    for p in pts:
        assert ell.contains(p, tol=1e-9)
    # minimal width: the fallback should not be much wider than the span
    assert ell.a <= 1.0 + 0.05 + 1e-6


def test_mvee_rejects_empty():
    with pytest.raises(ValueError):
        mvee_fit([])


@given(st.lists(st.tuples(st.floats(-5, 5), st.floats(-5, 5)), min_size=1, max_size=25))
def test_mvee_containment_random(points):
    pts = [Point2D(x, y) for x, y in points]
    ell = mvee_fit(pts, tolerance=1e-6)
    for p in pts:
        assert ell.quadratic_form(p) <= 1.0 + 1e-6


def test_mvee_minimality_proxy():
    rng = np.random.default_rng(0)
    for _ in range(20):
        pts = rng.normal(size=(12, 2)) * [2.0, 0.7]
        ell = mvee_fit([Point2D(*p) for p in pts], tolerance=1e-6)
        shrink = 1.0 - 10 * 1e-6
        small = Ellipse(ell.center, ell.a * shrink, ell.b * shrink, ell.theta)
        assert any(small.quadratic_form(Point2D(*p)) > 1.0 for p in pts)


def test_mvee_area_near_optimal_random():
    rng = np.random.default_rng(7)
    for _ in range(10):
        pts = rng.uniform(-3, 3, size=(10, 2))
        ell = mvee_fit([Point2D(*p) for p in pts], tolerance=1e-7)
        oracle_area = min_area_grid_search(pts)
        # grid search is itself approximate, allow a small band both ways
        assert math.pi * ell.a * ell.b <= oracle_area * 1.02 + 1e-9


# ----------------------------------------------- ellipse_boundary_distance

def test_boundary_distance_major_axis():
    ell = Ellipse(Point2D(0, 0), 2.0, 1.0, 0.0)
    assert ellipse_boundary_distance(ell, Point2D(5, 0)) == pytest.approx(2.0)


def test_boundary_distance_minor_axis():
    ell = Ellipse(Point2D(0, 0), 2.0, 1.0, 0.0)
    assert ellipse_boundary_distance(ell, Point2D(0, 5)) == pytest.approx(1.0)


def test_boundary_distance_diagonal_oracle():
    ell = Ellipse(Point2D(0, 0), 2.0, 1.0, 0.0)
    d = ellipse_boundary_distance(ell, Point2D(1, 1))
    assert d == pytest.approx(1.26491, abs=1e-5)
    assert d == pytest.approx(ray_support_oracle(ell, Point2D(1, 1)), abs=1e-8)


def test_boundary_distance_rejects_center():
    ell = Ellipse(Point2D(1, 1), 2.0, 1.0, 0.0)
    with pytest.raises(ValueError):
        ellipse_boundary_distance(ell, Point2D(1, 1))


@given(
    st.floats(0.2, 4.0),
    st.floats(0.1, 1.0),
    st.floats(-3.0, 3.0),
    st.floats(-3.0, 3.0),
    st.floats(-3.0, 3.0),
)
def test_boundary_distance_bounds_and_rotation(a_extra, b, theta, phi, rot):
    a = b + a_extra
    ell = Ellipse(Point2D(0, 0), a, b, theta)
    toward = Point2D(10 * math.cos(phi), 10 * math.sin(phi))
    d = ellipse_boundary_distance(ell, toward)
    assert b - 1e-9 <= d <= a + 1e-9
    # invariant under rigid rotation of the (ellipse, toward) pair
    c, s = math.cos(rot), math.sin(rot)
    toward_r = Point2D(c * toward.x - s * toward.y, s * toward.x + c * toward.y)
    ell_r = Ellipse(Point2D(0, 0), a, b, theta + rot)
    assert ellipse_boundary_distance(ell_r, toward_r) == pytest.approx(d, abs=1e-9)


def test_boundary_distance_matches_oracle_random():
    rng = np.random.default_rng(3)
    for _ in range(50):
        b = rng.uniform(0.2, 2.0)
        a = b + rng.uniform(0.01, 3.0)
        ell = Ellipse(Point2D(*rng.uniform(-2, 2, 2)), a, b, rng.uniform(-3, 3))
        ang = rng.uniform(-math.pi, math.pi)
        toward = Point2D(
            ell.center.x + 10 * math.cos(ang), ell.center.y + 10 * math.sin(ang)
        )
        assert ellipse_boundary_distance(ell, toward) == pytest.approx(
            ray_support_oracle(ell, toward), abs=1e-7
        )


# ----------------------------------------------------------- user_position

def test_user_position_examples():
    p = user_position(Pose2D(0, 0, 0), 1.0)
    assert (p.x, p.y) == pytest.approx((-1.0, 0.0))
    p = user_position(Pose2D(0, 0, math.pi / 2), 1.0)
    assert (p.x, p.y) == pytest.approx((0.0, -1.0), abs=1e-12)
    p = user_position(Pose2D(2, 3, math.pi), 0.8)
    assert (p.x, p.y) == pytest.approx((2.8, 3.0), abs=1e-12)


def test_user_position_rejects_bad_rod():
    with pytest.raises(ValueError):
        user_position(Pose2D(0, 0, 0), 0.0)


@given(st.floats(-5, 5), st.floats(-5, 5), st.floats(-10, 10), st.floats(0.1, 3.0))
def test_user_distance_equals_rod(x, y, theta, s):
    robot = Pose2D(x, y, theta)
    u = user_position(robot, s)
    assert math.hypot(u.x - x, u.y - y) == pytest.approx(s, rel=1e-12)
