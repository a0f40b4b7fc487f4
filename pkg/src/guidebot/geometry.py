"""Planar geometry primitives shared by perception, tracking, and planning."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

TWO_PI = 2.0 * math.pi


def wrap_angle(angle: float) -> float:
    """Wrap an angle in radians into (-pi, pi].

    The -pi boundary is excluded so every orientation has a unique
    representative; -pi and odd multiples of pi map to +pi.
    """
    if not math.isfinite(angle):
        raise ValueError(f"angle must be finite, got {angle!r}")
    r = math.fmod(angle + math.pi, TWO_PI)
    if r <= 0.0:
        r += TWO_PI
    return r - math.pi


@dataclass(frozen=True, slots=True)
class Point2D:
    x: float
    y: float

    def __post_init__(self) -> None:
        if not (math.isfinite(self.x) and math.isfinite(self.y)):
            raise ValueError(f"coordinates must be finite, got ({self.x}, {self.y})")

    def as_array(self) -> np.ndarray:
        return np.array([self.x, self.y], dtype=float)

    def distance_to(self, other: "Point2D") -> float:
        return math.hypot(self.x - other.x, self.y - other.y)


@dataclass(frozen=True, slots=True)
class Pose2D:
    """Robot pose (x, y, heading); theta is stored wrapped to (-pi, pi]."""

    x: float
    y: float
    theta: float

    def __post_init__(self) -> None:
        object.__setattr__(self, "theta", wrap_angle(self.theta))

    @property
    def position(self) -> Point2D:
        return Point2D(self.x, self.y)

    def as_array(self) -> np.ndarray:
        return np.array([self.x, self.y, self.theta], dtype=float)

    @staticmethod
    def from_array(v) -> "Pose2D":
        return Pose2D(float(v[0]), float(v[1]), float(v[2]))


@dataclass(frozen=True, slots=True)
class VelocityCommand:
    """Body-frame velocity: forward, lateral, and yaw rate."""

    vx: float
    vy: float
    wz: float

    def as_array(self) -> np.ndarray:
        return np.array([self.vx, self.vy, self.wz], dtype=float)

    @staticmethod
    def from_array(v) -> "VelocityCommand":
        return VelocityCommand(float(v[0]), float(v[1]), float(v[2]))

    @staticmethod
    def zero() -> "VelocityCommand":
        return VelocityCommand(0.0, 0.0, 0.0)


@dataclass(frozen=True, slots=True)
class Ellipse:
    """Obstacle ellipse: center, semi-major a, semi-minor b, rotation theta."""

    center: Point2D
    a: float
    b: float
    theta: float

    def __post_init__(self) -> None:
        if not (self.a >= self.b > 0.0):
            raise ValueError(f"require a >= b > 0, got a={self.a}, b={self.b}")
        object.__setattr__(self, "theta", wrap_angle(self.theta))

    def quadratic_form(self, p: Point2D) -> float:
        """Value of ((x'/a)^2 + (y'/b)^2) at p in the ellipse frame; <= 1 inside."""
        dx = p.x - self.center.x
        dy = p.y - self.center.y
        c, s = math.cos(self.theta), math.sin(self.theta)
        u = c * dx + s * dy
        v = -s * dx + c * dy
        return (u / self.a) ** 2 + (v / self.b) ** 2

    def contains(self, p: Point2D, tol: float = 0.0) -> bool:
        return self.quadratic_form(p) <= 1.0 + tol


def ellipse_boundary_distance(ellipse: Ellipse, toward: Point2D) -> float:
    """Distance from the ellipse center to its boundary along the ray to `toward`.

    Equals the radial support a*b / sqrt(b^2 cos^2 phi + a^2 sin^2 phi) with phi
    the ray angle expressed in the ellipse frame.
    """
    dx = toward.x - ellipse.center.x
    dy = toward.y - ellipse.center.y
    if math.hypot(dx, dy) <= 0.0:
        raise ValueError("toward must not coincide with the ellipse center")
    phi = math.atan2(dy, dx) - ellipse.theta
    c, s = math.cos(phi), math.sin(phi)
    return ellipse.a * ellipse.b / math.sqrt((ellipse.b * c) ** 2 + (ellipse.a * s) ** 2)


def user_position(robot: Pose2D, rod_length: float) -> Point2D:
    """Position of the user holding the rigid rod behind the robot."""
    if not rod_length > 0.0:
        raise ValueError(f"rod_length must be positive, got {rod_length}")
    return Point2D(
        robot.x - rod_length * math.cos(robot.theta),
        robot.y - rod_length * math.sin(robot.theta),
    )


def _degenerate_fit(pts: np.ndarray, r_min: float) -> Ellipse:
    """Fallback for <3 points or (nearly) collinear input: span-aligned ellipse
    inflated by r_min on both axes so downstream consumers never see zero area."""
    centroid = pts.mean(axis=0)
    centered = pts - centroid
    if len(pts) == 1:
        return Ellipse(Point2D(*centroid), r_min, r_min, 0.0)
    # principal direction of the spread
    _, _, vt = np.linalg.svd(centered, full_matrices=False)
    u = vt[0]
    t = centered @ u
    w = centered @ np.array([-u[1], u[0]])
    mid = centroid + 0.5 * (t.min() + t.max()) * u
    half_span = 0.5 * (t.max() - t.min())
    half_width = 0.5 * (w.max() - w.min())
    a = half_span + r_min
    b = half_width + r_min
    theta = math.atan2(u[1], u[0])
    if a < b:
        a, b = b, a
        theta += math.pi / 2.0
    ell = Ellipse(Point2D(*mid), a, b, theta)
    return _normalize_containment(ell, pts)


def _normalize_containment(ell: Ellipse, pts: np.ndarray) -> Ellipse:
    """Scale axes so every point satisfies the quadratic form <= 1 exactly."""
    d = pts - (ell.center.x, ell.center.y)
    c, s = math.cos(ell.theta), math.sin(ell.theta)
    u = (c * d[:, 0] + s * d[:, 1]) / ell.a
    v = (-s * d[:, 0] + c * d[:, 1]) / ell.b
    worst = float((u * u + v * v).max())
    if worst <= 1.0:
        return ell
    scale = math.sqrt(worst) * (1.0 + 1e-12)
    return Ellipse(ell.center, ell.a * scale, ell.b * scale, ell.theta)


def _khachiyan_weights(q: np.ndarray, tolerance: float, max_iter: int):
    """Khachiyan weight updates with Wolfe away steps over the lifted points.

    The plain ascent is sublinear and cannot certify a small dual gap within a
    practical iteration cap; away (and drop) steps restore linear convergence.
    Returns the weight vector; all-NaN when the lifted scatter goes singular.
    """
    n = q.shape[0]
    u = np.full(n, 1.0 / n)
    m = np.empty(n)
    for _ in range(max_iter):
        # v = sum_i u_i q_i q_i^T, symmetric 3x3; inverse via the adjugate
        v00 = v01 = v02 = v11 = v12 = v22 = 0.0
        for i in range(n):
            w = u[i]
            if w <= 0.0:
                continue
            a, b, c = q[i, 0], q[i, 1], q[i, 2]
            v00 += w * a * a
            v01 += w * a * b
            v02 += w * a * c
            v11 += w * b * b
            v12 += w * b * c
            v22 += w * c * c
        c00 = v11 * v22 - v12 * v12
        c01 = v02 * v12 - v01 * v22
        c02 = v01 * v12 - v02 * v11
        c11 = v00 * v22 - v02 * v02
        c12 = v01 * v02 - v00 * v12
        c22 = v00 * v11 - v01 * v01
        det = v00 * c00 + v01 * c01 + v02 * c02
        if abs(det) < 1e-300:
            u[:] = np.nan
            return u
        j_plus = 0
        m_plus = -np.inf
        j_minus = 0
        m_minus = np.inf
        for i in range(n):
            a, b, c = q[i, 0], q[i, 1], q[i, 2]
            mi = (
                a * (c00 * a + c01 * b + c02 * c)
                + b * (c01 * a + c11 * b + c12 * c)
                + c * (c02 * a + c12 * b + c22 * c)
            ) / det
            m[i] = mi
            if mi > m_plus:
                m_plus = mi
                j_plus = i
            if u[i] > 1e-12 and mi < m_minus:
                m_minus = mi
                j_minus = i
        gap_plus = m_plus / 3.0 - 1.0
        gap_minus = 1.0 - m_minus / 3.0
        if gap_plus <= tolerance and gap_minus <= tolerance:
            break
        j = j_plus if gap_plus >= gap_minus else j_minus
        step = (m[j] - 3.0) / (3.0 * (m[j] - 1.0))
        if j == j_minus and step < -u[j] / (1.0 - u[j]):
            step = -u[j] / (1.0 - u[j])  # drop step floor
        for i in range(n):
            u[i] *= 1.0 - step
        u[j] += step
    return u


try:  # the weight loop is scalar-sequential; jit it when numba is present
    from numba import njit as _njit

    _khachiyan_weights = _njit(cache=True)(_khachiyan_weights)
except ImportError:  # pragma: no cover - numba is a soft dependency
    pass


def mvee_fit(
    points,
    tolerance: float = 1e-6,
    r_min: float = 0.05,
    max_iter: int = 1000,
) -> Ellipse:
    """Minimum-volume enclosing ellipse of a 2D point set.

    Uses Khachiyan's iterative weight update with the given dual-gap tolerance
    and iteration cap. Degenerate inputs (fewer than 3 points, collinear sets)
    fall back to a span-aligned ellipse inflated by r_min. The returned ellipse
    always contains every input point.
    """
    if tolerance <= 0.0:
        raise ValueError("tolerance must be positive")
    pts = np.asarray([[p.x, p.y] if isinstance(p, Point2D) else p for p in points], dtype=float)
    if pts.ndim != 2 or pts.shape[0] == 0:
        raise ValueError("mvee_fit requires at least one point")
    pts = pts.reshape(-1, 2)
    n = pts.shape[0]
    if n < 3:
        return _degenerate_fit(pts, r_min)
    # collinearity check on the centered spread
    centered = pts - pts.mean(axis=0)
    sv = np.linalg.svd(centered, compute_uv=False)
    if sv[1] <= max(1e-9, 1e-9 * sv[0]):
        return _degenerate_fit(pts, r_min)
    all_pts = pts
    if n > 12:
        # only hull vertices can touch the optimal ellipse; very dense hulls
        # are thinned (the containment normalization below re-covers any
        # dropped vertex at negligible area cost)
        try:
            from scipy.spatial import ConvexHull, QhullError

            hull = ConvexHull(pts)
            order = hull.vertices  # counterclockwise
            if len(order) > 16:
                order = order[np.linspace(0, len(order) - 1, 16).astype(int)]
            pts = pts[np.unique(order)]
            n = pts.shape[0]
        except QhullError:
            return _degenerate_fit(all_pts, r_min)

    q = np.column_stack([pts, np.ones(n)])  # lifted points, (n, 3)
    u = _khachiyan_weights(q, tolerance, max_iter)
    if not np.isfinite(u[0]):
        return _degenerate_fit(all_pts, r_min)

    center = pts.T @ u
    cov = (pts * u[:, None]).T @ pts - np.outer(center, center)
    try:
        a_mat = np.linalg.inv(cov) / 2.0
    except np.linalg.LinAlgError:
        return _degenerate_fit(all_pts, r_min)
    eigval, eigvec = np.linalg.eigh(a_mat)
    if np.any(eigval <= 0.0):
        return _degenerate_fit(all_pts, r_min)
    # eigh sorts ascending: smallest eigenvalue -> longest axis
    axes = 1.0 / np.sqrt(eigval)
    theta = math.atan2(eigvec[1, 0], eigvec[0, 0])
    ell = Ellipse(Point2D(*center), float(axes[0]), float(axes[1]), theta)
    return _normalize_containment(ell, all_pts)
