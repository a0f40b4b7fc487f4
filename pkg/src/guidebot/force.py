"""External-force estimation and compliance: forgetting-factor RLS over a
generalized-force regression, discounted impulse accumulation, compliance
velocity, and a planar rigid-body fixture that generates the regression
signal."""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field, replace

import numpy as np

from .geometry import Pose2D, VelocityCommand, wrap_angle


@dataclass(frozen=True, slots=True)
class Wrench2D:
    """Planar wrench: forces along x/y and moment about z."""

    fx: float
    fy: float
    mz: float

    def __post_init__(self) -> None:
        if not all(map(math.isfinite, (self.fx, self.fy, self.mz))):
            raise ValueError("wrench components must be finite")

    def as_array(self) -> np.ndarray:
        return np.array([self.fx, self.fy, self.mz], dtype=float)

    @staticmethod
    def from_array(v) -> "Wrench2D":
        return Wrench2D(float(v[0]), float(v[1]), float(v[2]))

    @staticmethod
    def zero() -> "Wrench2D":
        return Wrench2D(0.0, 0.0, 0.0)


@dataclass(frozen=True, slots=True)
class InertiaParams:
    """Base inertia: mass and yaw moment of inertia."""

    m: float = 50.0
    jz: float = 8.0

    def __post_init__(self) -> None:
        if self.m <= 0 or self.jz <= 0:
            raise ValueError("mass and inertia must be positive")

    def w_matrix(self) -> np.ndarray:
        return np.diag([self.m, self.m, self.jz])


@dataclass(frozen=True)
class RlsState:
    """Estimator state: current estimate, covariance, and forgetting factor."""

    estimate: np.ndarray
    covariance: np.ndarray
    alpha: float = 0.98
    regularized: bool = False  # last step needed a ridge solve

    def __post_init__(self) -> None:
        if not 0.0 < self.alpha <= 1.0:
            raise ValueError(f"alpha must be in (0, 1], got {self.alpha}")
        p = np.asarray(self.covariance, dtype=float)
        if p.shape[0] != p.shape[1] or p.shape[0] != len(self.estimate):
            raise ValueError("covariance shape must match estimate dimension")
        if not np.allclose(p, p.T, atol=1e-9):
            raise ValueError("covariance must be symmetric")
        if np.linalg.eigvalsh(p).min() <= 0:
            raise ValueError("covariance must be positive definite")

    @staticmethod
    def initial(n: int, alpha: float = 0.98, p0: float = 1e3) -> "RlsState":
        return RlsState(np.zeros(n), p0 * np.eye(n), alpha)


def rls_step(state: RlsState, regressor: np.ndarray, tau_obs: np.ndarray) -> RlsState:
    """One forgetting-factor RLS update.

    `regressor` is the n x n matrix J whose transpose maps the estimate to the
    observed generalized force. The gain is K = P J (alpha I + J^T P J)^-1, the
    covariance update is P <- (I - K J^T) P / alpha, and the estimate update is
    the innovation form A <- A + K (tau_obs - J^T A).
    """
    j = np.asarray(regressor, dtype=float)
    tau = np.asarray(tau_obs, dtype=float).reshape(-1)
    n = len(state.estimate)
    if j.shape != (n, n) or tau.shape != (n,):
        raise ValueError("regressor/observation dimensions do not match state")
    p = state.covariance
    inner = state.alpha * np.eye(n) + j.T @ p @ j
    regularized = False
    try:
        k = np.linalg.solve(inner.T, (p @ j).T).T
    except np.linalg.LinAlgError:
        k = np.linalg.solve(inner.T + 1e-9 * np.eye(n), (p @ j).T).T
        regularized = True
    estimate = state.estimate + k @ (tau - j.T @ state.estimate)
    cov = (np.eye(n) - k @ j.T) @ p / state.alpha
    cov = 0.5 * (cov + cov.T)
    return replace(state, estimate=estimate, covariance=cov, regularized=regularized)


def extract_base_wrench(estimate) -> Wrench2D:
    """Planar wrench from the estimated generalized force.

    A 3-vector maps directly to (fx, fy, mz); for a full floating-base vector
    (n >= 6) the x/y force rows and the z moment row of the base block are used.
    """
    v = np.asarray(estimate, dtype=float).reshape(-1)
    if v.shape[0] == 3:
        return Wrench2D(v[0], v[1], v[2])
    if v.shape[0] >= 6:
        return Wrench2D(v[0], v[1], v[5])
    raise ValueError(f"estimate must have 3 or >= 6 components, got {v.shape[0]}")


class ImpulseBuffer:
    """Ring of recent (wrench, dt) samples with a discount on older entries."""

    def __init__(self, capacity: int, gamma: float):
        if capacity < 1:
            raise ValueError("capacity must be >= 1")
        if not 0.0 < gamma <= 1.0:
            raise ValueError(f"gamma must be in (0, 1], got {gamma}")
        self.gamma = gamma
        self._ring: deque[tuple[np.ndarray, float]] = deque(maxlen=capacity)

    def __len__(self) -> int:
        return len(self._ring)

    def push(self, wrench: Wrench2D, dt: float) -> None:
        if dt <= 0:
            raise ValueError("dt must be positive")
        self._ring.append((wrench.as_array(), float(dt)))

    def clear(self) -> None:
        self._ring.clear()


def accumulate_impulse(buffer: ImpulseBuffer) -> np.ndarray:
    """Discounted impulse sum over the buffered window, newest weight 1."""
    if len(buffer) == 0:
        raise ValueError("impulse buffer is empty")
    total = np.zeros(3)
    weight = 1.0
    for wrench, dt in reversed(buffer._ring):
        total += weight * wrench * dt
        weight *= buffer.gamma
    return total


def compliance_velocity(
    impulse,
    v0: VelocityCommand,
    inertia: InertiaParams,
    deadband: tuple[float, float],
    current_wrench: Wrench2D,
) -> VelocityCommand:
    """Velocity target from the discounted impulse.

    Below the force/moment deadband the target is zero (the planner then falls
    back to plain tracking); otherwise v0 + W^-1 L.
    """
    f_mag = math.hypot(current_wrench.fx, current_wrench.fy)
    if f_mag < deadband[0] and abs(current_wrench.mz) < deadband[1]:
        return VelocityCommand.zero()
    delta = np.asarray(impulse, dtype=float) / np.array(
        [inertia.m, inertia.m, inertia.jz]
    )
    return VelocityCommand.from_array(v0.as_array() + delta)


def planar_fixture_step(
    pose: Pose2D,
    velocity: VelocityCommand,
    applied_wrench: Wrench2D,
    inertia: InertiaParams,
    dt: float,
    damping: tuple[float, float] = (10.0, 4.0),
):
    """Integrate a planar rigid body one step under the applied wrench and
    viscous damping, and emit the generalized-force observation.

    tau_obs = W * accel + damping * velocity, so in the noiseless case it
    equals the applied wrench exactly and the estimation chain must recover it.
    Returns (pose, velocity, tau_obs, regressor).
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    c_lin, c_rot = damping
    v = velocity.as_array()
    f = applied_wrench.as_array()
    damp = np.array([c_lin, c_lin, c_rot])
    w_diag = np.array([inertia.m, inertia.m, inertia.jz])
    accel = (f - damp * v) / w_diag
    tau_obs = w_diag * accel + damp * v
    new_v = v + accel * dt
    c, s = math.cos(pose.theta), math.sin(pose.theta)
    new_pose = Pose2D(
        pose.x + (c * v[0] - s * v[1]) * dt,
        pose.y + (s * v[0] + c * v[1]) * dt,
        wrap_angle(pose.theta + v[2] * dt),
    )
    return new_pose, VelocityCommand.from_array(new_v), tau_obs, np.eye(3)


@dataclass(frozen=True, slots=True)
class EstimatorParams:
    """Configuration of the 50 Hz estimation chain."""

    alpha: float = 0.98
    p0: float = 1e3
    n_r: int = 20
    gamma: float = 0.9
    deadband_force: float = 5.0
    deadband_moment: float = 2.0
    inertia: InertiaParams = field(default_factory=InertiaParams)
    dt: float = 0.02
    damping_linear: float = 10.0
    damping_rotational: float = 4.0

    def __post_init__(self) -> None:
        if self.n_r < 1 or self.dt <= 0:
            raise ValueError("n_r must be >= 1 and dt positive")


@dataclass(frozen=True, slots=True)
class ForceSnapshot:
    """Immutable estimate published to the planner after each estimator step."""

    wrench: Wrench2D
    v_tgt: VelocityCommand


class ForceEstimator:
    """Runs the RLS -> impulse -> compliance-velocity chain at its own cadence.

    The caller feeds one (tau_obs, regressor, robot velocity) tuple per
    estimator step; the robot-velocity history provides the base velocity of
    the impulse window (oldest available sample when the history is short).
    """

    def __init__(self, params: EstimatorParams):
        self.params = params
        self.rls = RlsState.initial(3, params.alpha, params.p0)
        self.impulses = ImpulseBuffer(params.n_r, params.gamma)
        self._velocity_history: deque[VelocityCommand] = deque(maxlen=params.n_r)
        self.snapshot = ForceSnapshot(Wrench2D.zero(), VelocityCommand.zero())

    def reset(self) -> None:
        self.rls = RlsState.initial(3, self.params.alpha, self.params.p0)
        self.impulses.clear()
        self._velocity_history.clear()
        self.snapshot = ForceSnapshot(Wrench2D.zero(), VelocityCommand.zero())

    def step(
        self, tau_obs: np.ndarray, regressor: np.ndarray, robot_velocity: VelocityCommand
    ) -> ForceSnapshot:
        self.rls = rls_step(self.rls, regressor, tau_obs)
        wrench = extract_base_wrench(self.rls.estimate)
        self.impulses.push(wrench, self.params.dt)
        self._velocity_history.append(robot_velocity)
        v0 = self._velocity_history[0]
        v_tgt = compliance_velocity(
            accumulate_impulse(self.impulses),
            v0,
            self.params.inertia,
            (self.params.deadband_force, self.params.deadband_moment),
            wrench,
        )
        self.snapshot = ForceSnapshot(wrench, v_tgt)
        return self.snapshot
