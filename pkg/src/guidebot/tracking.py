"""Frame-to-frame obstacle tracking: gated minimum-cost association, a
constant-acceleration Kalman filter on the ellipse state, and horizon
prediction for the planner."""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np
from scipy.optimize import linear_sum_assignment

from .geometry import Ellipse, Point2D, wrap_angle

# state layout: [x, y, vx, vy, ax, ay, a, b, theta]
STATE_DIM = 9
MEAS_DIM = 5
_GATE_COST = 1e9


def transition_matrix(dt: float) -> np.ndarray:
    """Constant-acceleration motion block plus identity shape block."""
    a = np.eye(STATE_DIM)
    for axis in range(2):
        p, v, acc = axis, axis + 2, axis + 4
        a[p, v] = dt
        a[p, acc] = 0.5 * dt * dt
        a[v, acc] = dt
    return a


def measurement_matrix() -> np.ndarray:
    h = np.zeros((MEAS_DIM, STATE_DIM))
    h[0, 0] = h[1, 1] = 1.0  # position
    h[2, 6] = h[3, 7] = h[4, 8] = 1.0  # shape
    return h


def _require_psd(m: np.ndarray, name: str) -> np.ndarray:
    m = np.asarray(m, dtype=float)
    if not np.allclose(m, m.T, atol=1e-9):
        raise ValueError(f"{name} must be symmetric")
    if np.linalg.eigvalsh(m).min() < -1e-9:
        raise ValueError(f"{name} must be positive semidefinite")
    return m


@dataclass(frozen=True, slots=True)
class TrackerParams:
    """Noise model and lifecycle parameters.

    Process noise on the motion block follows a piecewise-constant-jerk model;
    the shape block random-walks slowly. All values are overridable per run.
    """

    jerk_sigma: float = 2.0
    shape_process_sigma: float = 0.05
    pos_meas_sigma: float = 0.05
    shape_meas_sigma: float = 0.1
    theta_meas_sigma: float = 0.1
    birth_derivative_var: float = 1e3
    d_max: float = 1.0
    max_missed: int = 5

    def process_noise(self, dt: float) -> np.ndarray:
        q = np.zeros((STATE_DIM, STATE_DIM))
        g = np.array([dt**3 / 6.0, dt**2 / 2.0, dt])
        block = np.outer(g, g) * self.jerk_sigma**2
        for axis in range(2):
            idx = np.array([axis, axis + 2, axis + 4])
            q[np.ix_(idx, idx)] = block
        q[6:, 6:] = (self.shape_process_sigma**2 * dt) * np.eye(3)
        return q

    def measurement_noise(self) -> np.ndarray:
        return np.diag(
            [
                self.pos_meas_sigma**2,
                self.pos_meas_sigma**2,
                self.shape_meas_sigma**2,
                self.shape_meas_sigma**2,
                self.theta_meas_sigma**2,
            ]
        )

    def birth_covariance(self) -> np.ndarray:
        p = np.eye(STATE_DIM)
        r = self.measurement_noise()
        p[0, 0] = p[1, 1] = r[0, 0]
        for i in (2, 3, 4, 5):
            p[i, i] = self.birth_derivative_var
        p[6, 6] = p[7, 7] = r[2, 2]
        p[8, 8] = r[4, 4]
        return p

    def __post_init__(self) -> None:
        _require_psd(self.process_noise(0.1), "process noise")
        _require_psd(self.measurement_noise(), "measurement noise")
        if self.d_max <= 0:
            raise ValueError("d_max must be positive")


@dataclass(frozen=True, slots=True)
class Measurement:
    """Observable ellipse parameters [x, y, a, b, theta]."""

    z: np.ndarray

    def __post_init__(self) -> None:
        z = np.asarray(self.z, dtype=float).reshape(-1)
        if z.shape != (MEAS_DIM,):
            raise ValueError("measurement must have 5 components")
        if not z[2] >= z[3] > 0:
            raise ValueError("measurement requires a >= b > 0")
        object.__setattr__(self, "z", z)

    @staticmethod
    def from_ellipse(e: Ellipse) -> "Measurement":
        return Measurement(np.array([e.center.x, e.center.y, e.a, e.b, e.theta]))


@dataclass(frozen=True)
class ObstacleTrack:
    id: int
    state: np.ndarray
    covariance: np.ndarray
    missed_frames: int = 0

    def __post_init__(self) -> None:
        object.__setattr__(self, "state", np.asarray(self.state, dtype=float).reshape(STATE_DIM))
        object.__setattr__(self, "covariance", _require_psd(self.covariance, "track covariance"))

    @property
    def ellipse(self) -> Ellipse:
        a = max(self.state[6], 1e-6)
        b = min(max(self.state[7], 1e-6), a)
        return Ellipse(Point2D(self.state[0], self.state[1]), a, b, self.state[8])

    @staticmethod
    def from_measurement(track_id: int, m: Measurement, params: TrackerParams) -> "ObstacleTrack":
        state = np.zeros(STATE_DIM)
        state[0], state[1] = m.z[0], m.z[1]
        state[6], state[7], state[8] = m.z[2], m.z[3], m.z[4]
        return ObstacleTrack(track_id, state, params.birth_covariance())


@dataclass(frozen=True, slots=True)
class Association:
    """Gated matching result between two ellipse frames."""

    pairs: tuple[tuple[int, int], ...]
    unmatched_prev: tuple[int, ...]
    unmatched_cur: tuple[int, ...]


def associate(prev, cur, d_max: float) -> Association:
    """Minimum total center-distance assignment over pairs within the gate.

    Pairs farther apart than d_max are forbidden; among gated matchings the
    result maximizes the number of matches, then minimizes total distance.
    """
    if d_max <= 0:
        raise ValueError("d_max must be positive")
    m, n = len(prev), len(cur)
    if m == 0 or n == 0:
        return Association((), tuple(range(m)), tuple(range(n)))
    cost = np.empty((m, n))
    for i, pe in enumerate(prev):
        for j, ce in enumerate(cur):
            cost[i, j] = pe.center.distance_to(ce.center)
    gated = np.where(cost <= d_max, cost, _GATE_COST)
    rows, cols = linear_sum_assignment(gated)
    pairs = tuple(
        (int(i), int(j)) for i, j in zip(rows, cols) if cost[i, j] <= d_max
    )
    matched_prev = {i for i, _ in pairs}
    matched_cur = {j for _, j in pairs}
    return Association(
        pairs,
        tuple(i for i in range(m) if i not in matched_prev),
        tuple(j for j in range(n) if j not in matched_cur),
    )


def kf_step(
    track: ObstacleTrack,
    z: Measurement | None,
    dt: float,
    process_noise: np.ndarray,
    measurement_noise: np.ndarray,
) -> ObstacleTrack:
    """Predict with the constant-acceleration model, then update if a
    measurement is present (Joseph-form update keeps the covariance PSD).

    The shape-angle innovation is wrapped into (-pi/2, pi/2] because an
    ellipse is invariant under a half-turn.
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    a = transition_matrix(dt)
    x = a @ track.state
    p = a @ track.covariance @ a.T + process_noise
    if z is None:
        p = 0.5 * (p + p.T)
        return replace(track, state=x, covariance=p, missed_frames=track.missed_frames + 1)
    h = measurement_matrix()
    r = np.asarray(measurement_noise, dtype=float)
    innovation = z.z - h @ x
    innovation[4] = _wrap_half_pi(innovation[4])
    s = h @ p @ h.T + r
    k = np.linalg.solve(s.T, (p @ h.T).T).T
    x = x + k @ innovation
    ikh = np.eye(STATE_DIM) - k @ h
    p = ikh @ p @ ikh.T + k @ r @ k.T
    p = 0.5 * (p + p.T)
    x[8] = wrap_angle(x[8])
    x[6] = max(x[6], 1e-6)
    x[7] = min(max(x[7], 1e-6), x[6])
    return replace(track, state=x, covariance=p, missed_frames=0)


def _wrap_half_pi(angle: float) -> float:
    r = math.fmod(angle + math.pi / 2.0, math.pi)
    if r <= 0.0:
        r += math.pi
    return r - math.pi / 2.0


def predict_trajectory(track: ObstacleTrack, n_steps: int, dt: float) -> list[Ellipse]:
    """Open-loop prediction: centers follow the transition model, the shape is
    frozen at the current estimate."""
    if n_steps < 1:
        raise ValueError("n_steps must be >= 1")
    a = transition_matrix(dt)
    shape = track.ellipse
    x = track.state.copy()
    out = []
    for _ in range(n_steps):
        x = a @ x
        out.append(Ellipse(Point2D(x[0], x[1]), shape.a, shape.b, shape.theta))
    return out


def manage_tracks(
    tracks: list[ObstacleTrack],
    association: Association,
    new_ellipses,
    dt: float,
    params: TrackerParams,
    next_id: int,
) -> tuple[list[ObstacleTrack], int]:
    """Update matched tracks, age unmatched ones, spawn tracks for unmatched
    detections, and drop tracks missed for more than max_missed frames."""
    q = params.process_noise(dt)
    r = params.measurement_noise()
    by_index: dict[int, ObstacleTrack] = {}
    for i, j in association.pairs:
        by_index[i] = kf_step(
            tracks[i], Measurement.from_ellipse(new_ellipses[j]), dt, q, r
        )
    for i in association.unmatched_prev:
        by_index[i] = kf_step(tracks[i], None, dt, q, r)
    out = [by_index[i] for i in range(len(tracks))]
    out = [t for t in out if t.missed_frames <= params.max_missed]
    for j in association.unmatched_cur:
        out.append(
            ObstacleTrack.from_measurement(
                next_id, Measurement.from_ellipse(new_ellipses[j]), params
            )
        )
        next_id += 1
    return out, next_id


class Tracker:
    """Owns the track set; one update per perception frame."""

    def __init__(self, params: TrackerParams):
        self.params = params
        self.tracks: list[ObstacleTrack] = []
        self._next_id = 1

    def update(self, ellipses, dt: float) -> list[ObstacleTrack]:
        assoc = associate(
            [t.ellipse for t in self.tracks], list(ellipses), self.params.d_max
        )
        self.tracks, self._next_id = manage_tracks(
            self.tracks, assoc, list(ellipses), dt, self.params, self._next_id
        )
        return self.tracks

    def predictions(self, n_steps: int, dt: float) -> list[list[Ellipse]]:
        """Per-track predicted ellipses for horizon steps 0..n_steps (step 0 is
        the current estimate)."""
        return [
            [t.ellipse] + predict_trajectory(t, n_steps, dt) for t in self.tracks
        ]
