"""Force-compliance MPC local planner with robot/user barrier-function soft
constraints over predicted obstacle ellipses.

Each control step solves a convex QP: states are eliminated through the
kinematics linearized around a nominal trajectory (heading frozen per step),
the barrier constraints are linearized around the same nominal, and
non-negative slack variables soften them with per-agent quadratic penalties.
A short SQP loop re-linearizes around the previous solution until the first
control settles, which keeps the realized one-step barrier decrease exact up
to solver tolerance.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field, replace

import numpy as np

from .astar import GridPath, astar, inflate, reference_from_path
from .geometry import (
    Ellipse,
    Point2D,
    Pose2D,
    VelocityCommand,
    ellipse_boundary_distance,
    user_position,
    wrap_angle,
)
from .perception import BinaryGrid
from .qp import OPTIMAL, QpProblem, QpSolution, solve_qp

ROBOT = 1
USER = 2

STATUS_OPTIMAL = "optimal"
STATUS_DEGRADED = "degraded"
STATUS_NO_PATH = "no-path"


def _psd(m, name):
    m = np.asarray(m, dtype=float)
    if m.shape != (3, 3) or not np.allclose(m, m.T, atol=1e-9):
        raise ValueError(f"{name} must be a symmetric 3x3 matrix")
    if np.linalg.eigvalsh(m).min() < -1e-9:
        raise ValueError(f"{name} must be positive semidefinite")
    return m


@dataclass(frozen=True)
class PlannerConfig:
    """Horizon, weights, and safety parameters of the local planner."""

    z_steps: int = 10
    dt: float = 0.1
    q_weight: np.ndarray = field(default_factory=lambda: np.diag([5.0, 5.0, 1.0]))
    qf_weight: np.ndarray = field(default_factory=lambda: np.diag([10.0, 10.0, 2.0]))
    r_weight: np.ndarray = field(default_factory=lambda: np.diag([2.0, 2.0, 1.0]))
    s_weight: np.ndarray = field(default_factory=lambda: np.diag([1.0, 1.0, 0.5]))
    kappa1: float = 1e3
    kappa2: float = 1e5
    beta: float = 0.2
    mu: float = 0.9
    d_safe1: float = 0.3
    d_safe2: float = 0.5
    v_max: float = 1.0
    omega_max: float = 1.0
    rod_length: float = 0.9
    cruise_speed: float = 0.6
    hard_slack: bool = False
    sqp_iters: int = 4
    sqp_tol: float = 1e-5
    qp_tol: float = 1e-8
    qp_max_iter: int = 2000
    robot_radius: float = 0.45
    prune_h: float = 1.5  # rows with both barrier values above this never bind

    def __post_init__(self) -> None:
        for name in ("q_weight", "qf_weight", "r_weight", "s_weight"):
            object.__setattr__(self, name, _psd(getattr(self, name), name))
        if self.z_steps < 1 or self.dt <= 0:
            raise ValueError("z_steps must be >= 1 and dt positive")
        if not 0.0 < self.beta <= 1.0:
            raise ValueError("beta must be in (0, 1]")
        if not 0.0 < self.mu < 1.0:
            raise ValueError("mu must be in (0, 1)")
        if self.kappa1 < 0 or self.kappa2 < 0:
            raise ValueError("slack penalties must be non-negative")
        if self.v_max <= 0 or self.omega_max <= 0 or self.rod_length <= 0:
            raise ValueError("v_max, omega_max, rod_length must be positive")

    @property
    def n_controls(self) -> int:
        return 3 * self.z_steps

    @property
    def n_vars(self) -> int:
        return 5 * self.z_steps  # controls + one slack per agent per step


@dataclass(frozen=True, slots=True)
class CbfConstraintRow:
    """One linearized barrier-decrease row over the decision variables."""

    agent: int  # ROBOT or USER
    obstacle: int
    step: int
    coeffs: np.ndarray  # over the flattened controls
    rhs: float
    slack_index: int
    h_now: float  # barrier value at the nominal current step
    h_next: float  # barrier value at the nominal next step


def cbf_value(agent_pos: Point2D, obstacle: Ellipse, d_safe: float) -> float:
    """Barrier value: center distance minus the boundary support toward the
    agent minus the safety margin; negative inside the margin."""
    d_center = agent_pos.distance_to(obstacle.center)
    if d_center <= 0.0:
        raise ValueError("agent position coincides with the obstacle center")
    return d_center - ellipse_boundary_distance(obstacle, agent_pos) - d_safe


def _clearance_gradient(agent_pos: Point2D, obstacle: Ellipse) -> np.ndarray:
    """Analytic gradient of (center distance - boundary support) in the agent
    position."""
    dx = agent_pos.x - obstacle.center.x
    dy = agent_pos.y - obstacle.center.y
    d2 = dx * dx + dy * dy
    d = math.sqrt(d2)
    e = np.array([dx / d, dy / d])
    phi = math.atan2(dy, dx) - obstacle.theta
    c, s = math.cos(phi), math.sin(phi)
    a, b = obstacle.a, obstacle.b
    denom = (b * c) ** 2 + (a * s) ** 2
    dr_dphi = a * b * s * c * (b * b - a * a) / denom**1.5
    dphi_dp = np.array([-dy / d2, dx / d2])
    return e - dr_dphi * dphi_dp


def _agent_state_gradient(agent: int, pose: Pose2D, obstacle: Ellipse, rod: float) -> np.ndarray:
    """Gradient of the barrier in the robot state (x, y, theta)."""
    if agent == ROBOT:
        g = _clearance_gradient(pose.position, obstacle)
        return np.array([g[0], g[1], 0.0])
    p_user = user_position(pose, rod)
    g = _clearance_gradient(p_user, obstacle)
    # d p_user / d state = [[1, 0, s sin th], [0, 1, -s cos th]]
    return np.array(
        [
            g[0],
            g[1],
            rod * (g[0] * math.sin(pose.theta) - g[1] * math.cos(pose.theta)),
        ]
    )


def _agent_position(agent: int, pose: Pose2D, rod: float) -> Point2D:
    return pose.position if agent == ROBOT else user_position(pose, rod)


def rotation(theta: float) -> np.ndarray:
    c, s = math.cos(theta), math.sin(theta)
    return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])


def rollout(x0: Pose2D, controls: np.ndarray, dt: float) -> list[Pose2D]:
    """Exact kinematic rollout of the body-frame controls; length Z+1."""
    poses = [x0]
    x = x0.as_array()
    for u in controls.reshape(-1, 3):
        x = x + rotation(x[2]) @ u * dt
        x[2] = wrap_angle(x[2])
        poses.append(Pose2D.from_array(x))
    return poses


def build_constraints(
    x_nominal: list[Pose2D],
    obstacle_predictions: list[list[Ellipse]],
    config: PlannerConfig,
) -> list[CbfConstraintRow]:
    """Linearized barrier-decrease rows for every (step, obstacle, agent).

    `obstacle_predictions` holds, per obstacle, the predicted ellipse for
    horizon steps 0..Z. Rows couple h at step k+1 and k through the state
    sensitivity to the controls (heading frozen at the nominal per step).
    Rows whose barrier values both exceed prune_h are dropped; they cannot
    bind within one horizon step.
    """
    z = config.z_steps
    if len(x_nominal) != z + 1:
        raise ValueError(f"nominal trajectory must have {z + 1} poses")
    rows: list[CbfConstraintRow] = []
    if not obstacle_predictions:
        return rows
    for preds in obstacle_predictions:
        if len(preds) < z + 1:
            raise ValueError("each obstacle needs predictions for steps 0..Z")
    m = len(obstacle_predictions)
    # B_k maps u_k into the next state; sensitivity of x_k is sum of B_j, j<k
    b_stack = np.stack([rotation(p.theta) * config.dt for p in x_nominal[:z]])
    poses = np.array([p.as_array() for p in x_nominal])  # (Z+1, 3)
    sin_t, cos_t = np.sin(poses[:, 2]), np.cos(poses[:, 2])
    centers = np.array(
        [[[e.center.x, e.center.y] for e in preds] for preds in obstacle_predictions]
    )  # (m, Z+1, 2)
    ax = np.array([[e.a for e in preds] for preds in obstacle_predictions])
    bx = np.array([[e.b for e in preds] for preds in obstacle_predictions])
    th = np.array([[e.theta for e in preds] for preds in obstacle_predictions])

    rod = config.rod_length
    agent_defs = (
        (ROBOT, config.d_safe1, poses[:, :2]),
        (
            USER,
            config.d_safe2,
            poses[:, :2] - rod * np.column_stack([cos_t, sin_t]),
        ),
    )
    one_minus_beta = 1.0 - config.beta
    for agent, d_safe, pos in agent_defs:
        diff = pos[None, :, :] - centers  # (m, Z+1, 2)
        dist = np.linalg.norm(diff, axis=2)
        ok = dist > 1e-9
        safe_dist = np.where(ok, dist, 1.0)
        phi = np.arctan2(diff[..., 1], diff[..., 0]) - th
        cp, sp = np.cos(phi), np.sin(phi)
        denom = (bx * cp) ** 2 + (ax * sp) ** 2
        support = ax * bx / np.sqrt(denom)
        h = dist - support - d_safe  # (m, Z+1)
        # gradient of (dist - support) in the agent position
        e_vec = diff / safe_dist[..., None]
        dr_dphi = ax * bx * sp * cp * (bx**2 - ax**2) / denom**1.5
        dphi_dp = (
            np.stack([-diff[..., 1], diff[..., 0]], axis=-1)
            / (safe_dist**2)[..., None]
        )
        grad_p = e_vec - dr_dphi[..., None] * dphi_dp  # (m, Z+1, 2)
        if agent == ROBOT:
            grad_x = np.concatenate(
                [grad_p, np.zeros((m, z + 1, 1))], axis=-1
            )  # (m, Z+1, 3)
        else:
            dtheta = rod * (
                grad_p[..., 0] * sin_t[None, :] - grad_p[..., 1] * cos_t[None, :]
            )
            grad_x = np.concatenate([grad_p, dtheta[..., None]], axis=-1)
        # grad_b[j, k, jj] = grad_x[j, k] @ b_stack[jj], shape (m, Z+1, Z, 3)
        grad_b = np.einsum("mki,jil->mkjl", grad_x, b_stack)
        keep = (
            (np.minimum(h[:, :z], h[:, 1:]) <= config.prune_h)
            & ok[:, :z]
            & ok[:, 1:]
        )
        for j, k in np.argwhere(keep):
            h_k, h_k1 = h[j, k], h[j, k + 1]
            coeffs = np.zeros(3 * z)
            coeffs[: 3 * (k + 1)] = grad_b[j, k + 1, : k + 1].ravel()
            if k:
                coeffs[: 3 * k] -= one_minus_beta * grad_b[j, k, :k].ravel()
            g_bar = h_k1 - one_minus_beta * h_k
            rows.append(
                CbfConstraintRow(
                    agent=agent,
                    obstacle=int(j),
                    step=int(k),
                    coeffs=coeffs,
                    rhs=-g_bar,  # coeffs . (u - u_nom) + slack >= -g_bar
                    slack_index=3 * z + (agent - 1) * z + int(k),
                    h_now=float(h_k),
                    h_next=float(h_k1),
                )
            )
    return rows


def build_qp(
    x0: Pose2D,
    u_prev: VelocityCommand,
    refs: list[Pose2D],
    v_tgt: VelocityCommand,
    constraints: list[CbfConstraintRow],
    config: PlannerConfig,
    x_nominal: list[Pose2D] | None = None,
    u_nominal: np.ndarray | None = None,
) -> QpProblem:
    """Assemble the convex subproblem over (controls, robot slacks, user slacks).

    Cost: reference tracking (stage Q, terminal Q'), compliance pull toward
    mu^k * v_tgt (R), control smoothness (S), and quadratic slack penalties.
    States are affine in the controls via the frozen-heading sensitivity around
    the nominal trajectory.
    """
    z = config.z_steps
    n_u = 3 * z
    n = config.n_vars
    if u_nominal is None:
        u_nominal = np.zeros(n_u)
    if x_nominal is None:
        x_nominal = rollout(x0, u_nominal, config.dt)
    if len(refs) != z:
        raise ValueError(f"need {z} reference poses, got {len(refs)}")
    hess = np.zeros((n, n))
    lin = np.zeros(n)
    b_mats = [rotation(p.theta) * config.dt for p in x_nominal[:z]]

    # tracking terms: x_k = x_nom_k + T_k (u - u_nom)
    t_k = np.zeros((3, n_u))
    for k in range(1, z + 1):
        t_k = t_k.copy()
        t_k[:, 3 * (k - 1) : 3 * k] += b_mats[k - 1]
        w = config.qf_weight if k == z else config.q_weight
        if not w.any():
            continue
        ref = refs[k - 1]
        err = x_nominal[k].as_array() - ref.as_array()
        err[2] = wrap_angle(err[2])
        const = err - t_k @ u_nominal
        hess[:n_u, :n_u] += 2.0 * t_k.T @ w @ t_k
        lin[:n_u] += 2.0 * t_k.T @ w @ const

    # compliance and smoothness terms
    r_w, s_w = config.r_weight, config.s_weight
    v_tgt_vec = v_tgt.as_array()
    prev = u_prev.as_array()
    for k in range(z):
        sl = slice(3 * k, 3 * k + 3)
        hess[sl, sl] += 2.0 * r_w
        lin[sl] += -2.0 * r_w @ (config.mu**k * v_tgt_vec)
        hess[sl, sl] += 2.0 * s_w
        if k == 0:
            lin[sl] += -2.0 * s_w @ prev
        else:
            sp = slice(3 * (k - 1), 3 * k)
            hess[sp, sp] += 2.0 * s_w
            hess[sl, sp] += -2.0 * s_w
            hess[sp, sl] += -2.0 * s_w

    # slack penalties
    for k in range(z):
        i1 = n_u + k
        i2 = n_u + z + k
        hess[i1, i1] += 2.0 * config.kappa1
        hess[i2, i2] += 2.0 * config.kappa2
    hess[np.diag_indices(n)] += 1e-8

    # constraint rows: coeffs . u + slack >= rhs + coeffs . u_nom
    m = len(constraints)
    g = np.zeros((m, n))
    h_vec = np.zeros(m)
    for i, row in enumerate(constraints):
        g[i, :n_u] = -row.coeffs
        g[i, row.slack_index] = -1.0
        h_vec[i] = -(row.rhs + row.coeffs @ u_nominal)

    lb = np.full(n, 0.0)
    ub = np.full(n, np.inf)
    bound = np.array([config.v_max, config.v_max, config.omega_max])
    lb[:n_u] = -np.tile(bound, z)
    ub[:n_u] = np.tile(bound, z)
    # hard variant pins enabled slacks at zero; a disabled (unpenalized) user
    # slack stays free so its rows never bind
    if config.hard_slack:
        ub[n_u : n_u + z] = 0.0
        if config.kappa2 > 0:
            ub[n_u + z :] = 0.0
    return QpProblem(hess, lin, g, h_vec, lb, ub)


@dataclass
class PlanDiagnostics:
    """Per-step planner output for logging and the invariance check."""

    status: str
    h_min_robot: float
    h_min_user: float
    slack_robot: float
    slack_user: float
    solve_time: float
    sqp_iterations: int
    invariance_margin: float  # min over qualifying rows of h1 - (1-beta) h0
    qp_status: str = OPTIMAL
    path_cost: float = float("nan")


class Planner:
    """Stateful planner: caches the global path and warm-starts each solve
    from the shifted previous solution."""

    def __init__(self, config: PlannerConfig, grid: BinaryGrid | None = None):
        self.config = config
        self._grid = grid
        self._inflated: BinaryGrid | None = None
        self._path: GridPath | None = None
        self._path_goal: Point2D | None = None
        self._prev_controls: np.ndarray | None = None
        self._warm: tuple[np.ndarray, np.ndarray] | None = None
        self._row_duals: dict[tuple[int, int, int], float] = {}
        self._bound_duals: np.ndarray | None = None

    def _store_duals(self, rows, duals: np.ndarray, n_vars: int) -> None:
        self._row_duals = {
            (row.agent, row.obstacle, row.step): float(duals[idx])
            for idx, row in enumerate(rows)
        }
        self._bound_duals = duals[len(rows):].copy()

    def _assemble_duals(self, rows, n_vars: int, shift: bool) -> np.ndarray:
        """Dual warm start: constraint rows are keyed (agent, obstacle, step),
        so between ticks each row inherits the dual of the row one horizon
        step ahead; within a tick rows carry their own duals."""
        y = np.zeros(len(rows) + n_vars)
        if self._bound_duals is not None and len(self._bound_duals) == n_vars:
            y[len(rows):] = self._bound_duals
        if self._row_duals:
            offset = 1 if shift else 0
            for idx, row in enumerate(rows):
                v = self._row_duals.get((row.agent, row.obstacle, row.step + offset))
                if v is None and shift:
                    v = self._row_duals.get((row.agent, row.obstacle, row.step))
                if v is not None:
                    y[idx] = v
        return y

    def set_grid(self, grid: BinaryGrid | None) -> None:
        self._grid = grid
        self._inflated = None
        self._path = None
        self._path_goal = None

    def _ensure_path(self, x0: Pose2D, goal: Point2D) -> GridPath | None:
        if self._grid is None:
            return None
        if self._inflated is None:
            self._inflated = inflate(
                self._grid, self.config.robot_radius + self.config.d_safe1
            )
        if self._path is not None and self._path_goal == goal:
            return self._path
        start = self._nudge_to_free(x0.position)
        if start is None:
            return None
        self._path = astar(self._inflated, start, goal)
        self._path_goal = goal
        return self._path

    def _nudge_to_free(self, p: Point2D) -> Point2D | None:
        """The robot may legitimately stand inside the inflated band (the CBF
        margin is smaller than the inflation radius); plan from the nearest
        free cell instead of failing."""
        grid = self._inflated
        occ = grid.values
        h, w = occ.shape
        r, c = grid.geometry.cell_of(p.x, p.y)
        if not (0 <= r < h and 0 <= c < w):
            return None
        if not occ[r, c]:
            return p
        free = np.argwhere(~occ)
        if free.size == 0:
            return None
        d2 = (free[:, 0] - r) ** 2 + (free[:, 1] - c) ** 2
        fr, fc = free[int(np.argmin(d2))]
        return grid.geometry.cell_center(int(fr), int(fc))

    def plan_step(
        self,
        x0: Pose2D,
        u_prev: VelocityCommand,
        v_tgt: VelocityCommand,
        obstacle_predictions: list[list[Ellipse]],
        goal: Point2D | None,
        gn_enabled: bool = True,
        oa_enabled: bool = True,
    ) -> tuple[VelocityCommand, PlanDiagnostics]:
        cfg = self.config
        z = cfg.z_steps
        t_start = time.perf_counter()

        use_gn = gn_enabled and cfg.q_weight.any() and goal is not None
        path = None
        if use_gn:
            try:
                path = self._ensure_path(x0, goal)
            except ValueError:
                path = None
            if path is None:
                diag = PlanDiagnostics(
                    status=STATUS_NO_PATH,
                    h_min_robot=math.inf,
                    h_min_user=math.inf,
                    slack_robot=0.0,
                    slack_user=0.0,
                    solve_time=time.perf_counter() - t_start,
                    sqp_iterations=0,
                    invariance_margin=math.inf,
                )
                return VelocityCommand.zero(), diag
            refs = reference_from_path(path, x0, z, cfg.dt, cfg.cruise_speed)
            cfg_eff = cfg
        else:
            refs = [x0] * z
            cfg_eff = replace(
                cfg, q_weight=np.zeros((3, 3)), qf_weight=np.zeros((3, 3))
            )

        preds = obstacle_predictions if oa_enabled else []

        # shift-by-one warm start for the nominal controls
        if self._prev_controls is not None:
            u_nom = np.concatenate(
                [self._prev_controls[3:], self._prev_controls[-3:]]
            )
        else:
            u_nom = np.zeros(3 * z)

        sol: QpSolution | None = None
        rows: list[CbfConstraintRow] = []
        iterations = 0
        for iterations in range(1, cfg.sqp_iters + 1):
            x_nom = rollout(x0, u_nom, cfg.dt)
            rows = build_constraints(x_nom, preds, cfg_eff)
            qp = build_qp(
                x0, u_prev, refs, v_tgt, rows, cfg_eff,
                x_nominal=x_nom, u_nominal=u_nom,
            )
            warm = None
            if self._warm is not None and self._warm[0].shape[0] == qp.n:
                warm = (
                    self._warm[0],
                    self._assemble_duals(rows, qp.n, shift=(iterations == 1)),
                )
            sol = solve_qp(qp, tol=cfg.qp_tol, max_iter=cfg.qp_max_iter,
                           warm_start=warm)
            self._store_duals(rows, sol.duals, qp.n)
            self._warm = (sol.z, sol.duals)
            new_controls = sol.z[: 3 * z]
            delta = float(np.abs(new_controls - u_nom).max())
            u_nom = new_controls
            if delta < cfg.sqp_tol or sol.status != OPTIMAL:
                break  # converged, or infeasible: re-linearizing will not help

        assert sol is not None
        controls = sol.z[: 3 * z]
        slacks_robot = sol.z[3 * z : 4 * z]
        slacks_user = sol.z[4 * z :]
        bound = np.array([cfg.v_max, cfg.v_max, cfg.omega_max])
        u0 = np.clip(controls[:3], -bound, bound)
        command = VelocityCommand.from_array(u0)
        self._prev_controls = controls.copy()

        diag = self._diagnostics(
            x0, command, rows, sol, slacks_robot, slacks_user,
            time.perf_counter() - t_start, iterations, preds, cfg_eff,
        )
        if path is not None:
            diag.path_cost = path.cost
        return command, diag

    def _diagnostics(
        self, x0, command, rows, sol, slacks_robot, slacks_user,
        elapsed, iterations, preds, cfg,
    ) -> PlanDiagnostics:
        status = STATUS_OPTIMAL if sol.status == OPTIMAL else STATUS_DEGRADED
        h_min = {ROBOT: math.inf, USER: math.inf}
        for row in rows:
            if row.step == 0:
                h_min[row.agent] = min(h_min[row.agent], row.h_now)
        # realized one-step barrier decrease at the applied control
        margin = math.inf
        if preds:
            x1 = rollout(x0, command.as_array(), cfg.dt)[1]
            for j, pred in enumerate(preds):
                for agent, d_safe, slacks in (
                    (ROBOT, cfg.d_safe1, slacks_robot),
                    (USER, cfg.d_safe2, slacks_user),
                ):
                    p0 = _agent_position(agent, x0, cfg.rod_length)
                    p1 = _agent_position(agent, x1, cfg.rod_length)
                    if (
                        p0.distance_to(pred[0].center) < 1e-9
                        or p1.distance_to(pred[1].center) < 1e-9
                    ):
                        continue
                    h0 = cbf_value(p0, pred[0], d_safe)
                    h1 = cbf_value(p1, pred[1], d_safe)
                    if h0 > 0.0 and slacks[0] <= 1e-8:
                        margin = min(margin, h1 - (1.0 - cfg.beta) * h0)
        return PlanDiagnostics(
            status=status,
            h_min_robot=h_min[ROBOT],
            h_min_user=h_min[USER],
            slack_robot=float(slacks_robot.max(initial=0.0)),
            slack_user=float(slacks_user.max(initial=0.0)),
            solve_time=elapsed,
            sqp_iterations=iterations,
            invariance_margin=margin,
            qp_status=sol.status,
        )
