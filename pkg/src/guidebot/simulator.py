"""Deterministic 2D world: commanded-velocity robot with a rod-attached user,
scripted obstacles, synthetic scans feeding the perception chain, the force
estimation loop, and scenario/batch execution with metrics logging."""

from __future__ import annotations

import dataclasses
import json
import math
import time
from dataclasses import dataclass, field, replace

import numpy as np

from .force import (
    EstimatorParams,
    ForceEstimator,
    InertiaParams,
    Wrench2D,
    planar_fixture_step,
)
from .geometry import (
    Ellipse,
    Point2D,
    Pose2D,
    VelocityCommand,
    ellipse_boundary_distance,
    user_position,
    wrap_angle,
)
from .perception import BinaryGrid, GridGeometry, PerceptionParams, perceive
from .planner import (
    STATUS_DEGRADED,
    STATUS_OPTIMAL,
    Planner,
    PlannerConfig,
)
from .tracking import Tracker, TrackerParams

SCHEMA_VERSION = 1
INFEASIBLE_WATCHDOG_S = 5.0
SUB_STEPS = 5  # estimator runs this many sub-steps per planner tick

STEP_LOG_HEADER = (
    "t,x,y,theta,vx,vy,wz,fx_est,fy_est,mz_est,vtgt_x,vtgt_y,vtgt_w,"
    "hmin_robot,hmin_user,dmin_robot,dmin_user,slack1,slack2,status"
)
BATCH_HEADER = "variant,trials,successes,rate"

CAUSE_COLLISION = "collision"
CAUSE_INFEASIBLE = "infeasible>5s"
CAUSE_TIMEOUT = "timeout"

VARIANTS = (
    "robot-only-hard",
    "robot-user-hard",
    "robot-only-soft",
    "robot-user-soft",
)


@dataclass(frozen=True, slots=True)
class ModeFlags:
    """Capability toggles: force compliance, global navigation, obstacle
    avoidance."""

    fc: bool = True
    gn: bool = True
    oa: bool = True


@dataclass(frozen=True, slots=True)
class ForceEvent:
    """Scripted user wrench. Frame "body" pushes along the robot axes;
    "world" holds a fixed direction in world coordinates; "goal" models a
    user steering toward the scenario goal (push magnitude along the current
    goal bearing). World/goal wrenches are rotated into the body frame at the
    robot's current heading."""

    t_start: float
    duration: float
    wrench: Wrench2D
    frame: str = "body"

    def __post_init__(self) -> None:
        if self.frame not in ("body", "world", "goal"):
            raise ValueError(f"unknown force frame {self.frame!r}")

    def active(self, t: float) -> bool:
        return self.t_start <= t < self.t_start + self.duration


@dataclass(frozen=True)
class ObstacleSpec:
    """Ground-truth ellipse following a piecewise-linear waypoint script at
    constant speed (instant turns); static when the script is empty."""

    ellipse: Ellipse
    waypoints: tuple[Point2D, ...] = ()
    speed: float = 0.0
    start_delay: float = 0.0

    def __post_init__(self) -> None:
        if self.speed < 0:
            raise ValueError("obstacle speed must be >= 0")

    @property
    def is_static(self) -> bool:
        return self.speed == 0.0 or not self.waypoints

    def position_at(self, t: float) -> Point2D:
        if self.is_static or t <= self.start_delay:
            return self.ellipse.center
        travel = self.speed * (t - self.start_delay)
        prev = self.ellipse.center
        for wp in self.waypoints:
            seg = prev.distance_to(wp)
            if travel <= seg or seg == 0.0:
                if seg == 0.0:
                    prev = wp
                    continue
                f = travel / seg
                return Point2D(
                    prev.x + f * (wp.x - prev.x), prev.y + f * (wp.y - prev.y)
                )
            travel -= seg
            prev = wp
        return prev

    def ellipse_at(self, t: float) -> Ellipse:
        c = self.position_at(t)
        e = self.ellipse
        return Ellipse(c, e.a, e.b, e.theta)


@dataclass(frozen=True, slots=True)
class ScanParams:
    points_per_obstacle: int = 140
    ground_points: int = 120
    noise_sigma: float = 0.01
    obstacle_height: float = 0.6


@dataclass(frozen=True, slots=True)
class WorldBounds:
    xmin: float = -5.0
    ymin: float = -5.0
    xmax: float = 15.0
    ymax: float = 5.0
    resolution: float = 0.1


@dataclass(frozen=True)
class ScenarioConfig:
    name: str = "scenario"
    seed: int = 0
    duration: float = 20.0
    world: WorldBounds = field(default_factory=WorldBounds)
    robot_start: Pose2D = field(default_factory=lambda: Pose2D(0.0, 0.0, 0.0))
    goal: Point2D | None = None
    goal_tolerance: float = 0.5
    r_robot: float = 0.45
    r_user: float = 0.25
    modes: ModeFlags = field(default_factory=ModeFlags)
    force_script: tuple[ForceEvent, ...] = ()
    obstacles: tuple[ObstacleSpec, ...] = ()
    scan: ScanParams = field(default_factory=ScanParams)
    planner: PlannerConfig = field(default_factory=PlannerConfig)
    estimator: EstimatorParams = field(default_factory=EstimatorParams)
    tracker: TrackerParams = field(default_factory=TrackerParams)
    perception: PerceptionParams = field(default_factory=PerceptionParams)

    def __post_init__(self) -> None:
        if self.duration <= 0:
            raise ValueError("duration must be positive")
        events = sorted(self.force_script, key=lambda e: e.t_start)
        for a, b in zip(events, events[1:]):
            if a.t_start + a.duration > b.t_start + 1e-9:
                raise ValueError("force script intervals must not overlap")

    @property
    def dt(self) -> float:
        return self.planner.dt


@dataclass(frozen=True)
class WorldState:
    """Ground truth at one instant; the user hangs rigidly on the rod."""

    time: float
    robot: Pose2D
    velocity: VelocityCommand
    obstacle_specs: tuple[ObstacleSpec, ...]
    applied_wrench: Wrench2D = field(default_factory=Wrench2D.zero)
    rod_length: float = 0.9

    @property
    def user(self) -> Point2D:
        return user_position(self.robot, self.rod_length)

    @property
    def obstacles(self) -> list[Ellipse]:
        return [s.ellipse_at(self.time) for s in self.obstacle_specs]


def step_world(state: WorldState, command: VelocityCommand, dt: float) -> WorldState:
    """Advance the world one tick: exact body-frame integration of the
    commanded velocity, obstacle scripts advanced to the new time."""
    if dt <= 0:
        raise ValueError("dt must be positive")
    c, s = math.cos(state.robot.theta), math.sin(state.robot.theta)
    robot = Pose2D(
        state.robot.x + (c * command.vx - s * command.vy) * dt,
        state.robot.y + (s * command.vx + c * command.vy) * dt,
        wrap_angle(state.robot.theta + command.wz * dt),
    )
    return replace(state, time=state.time + dt, robot=robot, velocity=command)


def synth_scan(
    state: WorldState, scan: ScanParams, window: float, seed: int
) -> np.ndarray:
    """Sample boundary and interior points of every ground-truth obstacle at a
    fixed height plus sparse ground points, with seeded isotropic noise."""
    rng = np.random.default_rng(seed)
    half = window / 2.0
    cx, cy = state.robot.x, state.robot.y
    points = []
    for ell in state.obstacles:
        if abs(ell.center.x - cx) > half + ell.a or abs(ell.center.y - cy) > half + ell.a:
            continue
        n = scan.points_per_obstacle
        angles = rng.uniform(0.0, 2.0 * math.pi, n)
        # half the samples on the boundary, half in the interior
        radial = np.concatenate(
            [np.ones(n // 2), np.sqrt(rng.uniform(0.0, 1.0, n - n // 2))]
        )
        ca, sa = np.cos(angles), np.sin(angles)
        ex = ell.a * radial * ca
        ey = ell.b * radial * sa
        ct, st = math.cos(ell.theta), math.sin(ell.theta)
        xs = ell.center.x + ct * ex - st * ey
        ys = ell.center.y + st * ex + ct * ey
        zs = np.full(n, scan.obstacle_height)
        points.append(np.column_stack([xs, ys, zs]))
    if scan.ground_points:
        gx = rng.uniform(cx - half, cx + half, scan.ground_points)
        gy = rng.uniform(cy - half, cy + half, scan.ground_points)
        points.append(np.column_stack([gx, gy, np.zeros(scan.ground_points)]))
    cloud = np.vstack(points) if points else np.zeros((0, 3))
    if scan.noise_sigma > 0 and cloud.shape[0]:
        cloud = cloud + rng.normal(scale=scan.noise_sigma, size=cloud.shape)
    return cloud


def build_static_grid(config: ScenarioConfig) -> BinaryGrid:
    """Rasterize the static obstacles over the world bounds for global
    planning; dynamic obstacles are the local planner's job."""
    w = config.world
    nx = max(1, int(round((w.xmax - w.xmin) / w.resolution)))
    ny = max(1, int(round((w.ymax - w.ymin) / w.resolution)))
    geo = GridGeometry(w.resolution, Point2D(w.xmin, w.ymin))
    occ = np.zeros((ny, nx), dtype=bool)
    xs = w.xmin + (np.arange(nx) + 0.5) * w.resolution
    ys = w.ymin + (np.arange(ny) + 0.5) * w.resolution
    gx, gy = np.meshgrid(xs, ys)
    for spec in config.obstacles:
        if not spec.is_static:
            continue
        e = spec.ellipse
        ct, st = math.cos(e.theta), math.sin(e.theta)
        dx, dy = gx - e.center.x, gy - e.center.y
        u = ct * dx + st * dy
        v = -st * dx + ct * dy
        occ |= (u / e.a) ** 2 + (v / e.b) ** 2 <= 1.0
    return BinaryGrid(occ, geo)


def ray_clearance(point: Point2D, ell: Ellipse) -> float:
    """Distance from the point to the ellipse boundary along the center ray;
    negative inside."""
    d = point.distance_to(ell.center)
    if d <= 1e-12:
        return -ell.b
    return d - ellipse_boundary_distance(ell, point)


@dataclass
class StepRecord:
    t: float
    x: float
    y: float
    theta: float
    vx: float
    vy: float
    wz: float
    fx_est: float
    fy_est: float
    mz_est: float
    vtgt_x: float
    vtgt_y: float
    vtgt_w: float
    hmin_robot: float
    hmin_user: float
    dmin_robot: float
    dmin_user: float
    slack1: float
    slack2: float
    status: str
    # extra diagnostics (not part of the CSV contract)
    clearance_robot: float = math.inf
    clearance_user: float = math.inf
    invariance_margin: float = math.inf
    plan_ms: float = 0.0
    tick_ms: float = 0.0

    def csv_row(self) -> str:
        vals = [
            self.t, self.x, self.y, self.theta, self.vx, self.vy, self.wz,
            self.fx_est, self.fy_est, self.mz_est,
            self.vtgt_x, self.vtgt_y, self.vtgt_w,
            self.hmin_robot, self.hmin_user, self.dmin_robot, self.dmin_user,
            self.slack1, self.slack2,
        ]
        return ",".join(_fmt(v) for v in vals) + f",{self.status}"


def _fmt(v: float) -> str:
    if math.isinf(v):
        return "inf" if v > 0 else "-inf"
    return f"{v:.10g}"


@dataclass
class MetricsRecord:
    success: bool
    failure_cause: str | None
    completion_time: float
    n_steps: int
    min_clearance_robot: float
    min_clearance_user: float
    min_h_robot: float
    min_h_user: float
    invariance_violations: int
    mean_tick_ms: float
    mean_plan_ms: float


class Simulation:
    """One closed-loop run; `step()` advances one planner tick."""

    def __init__(self, config: ScenarioConfig):
        self.config = config
        self.modes = config.modes
        self.state = WorldState(
            time=0.0,
            robot=config.robot_start,
            velocity=VelocityCommand.zero(),
            obstacle_specs=config.obstacles,
            rod_length=config.planner.rod_length,
        )
        self.goal = config.goal
        self.planner = Planner(config.planner, build_static_grid(config))
        self.estimator = ForceEstimator(config.estimator)
        self.tracker = Tracker(config.tracker)
        self.command = VelocityCommand.zero()
        self._fixture_pose = Pose2D(0.0, 0.0, 0.0)
        self._fixture_vel = VelocityCommand.zero()
        self._infeasible_time = 0.0
        self.infeasible_exceeded = False
        self.collided = False
        self.goal_reached = False
        self.invariance_violations = 0
        self._external: tuple[Wrench2D, float, float] | None = None  # wrench, hold_end, decay_end
        self._tick_index = 0
        self.last_record: StepRecord | None = None

    # ------------------------------------------------------------ commands

    def set_external_wrench(self, wrench: Wrench2D, hold_s: float, decay_s: float = 0.3) -> None:
        t = self.state.time
        self._external = (wrench, t + max(hold_s, 0.0), t + max(hold_s, 0.0) + decay_s)

    def set_goal(self, goal: Point2D) -> None:
        self.goal = goal
        self.goal_reached = False

    def applied_wrench(self) -> Wrench2D:
        t = self.state.time
        if self._external is not None:
            wrench, hold_end, decay_end = self._external
            if t < hold_end:
                return wrench
            if t < decay_end:
                f = (decay_end - t) / max(decay_end - hold_end, 1e-9)
                return Wrench2D(wrench.fx * f, wrench.fy * f, wrench.mz * f)
            self._external = None
            return Wrench2D.zero()
        for event in self.config.force_script:
            if event.active(t):
                w = event.wrench
                if event.frame == "body":
                    return w
                if event.frame == "goal" and self.goal is not None:
                    mag = math.hypot(w.fx, w.fy)
                    dx = self.goal.x - self.state.robot.x
                    dy = self.goal.y - self.state.robot.y
                    d = math.hypot(dx, dy)
                    if d > 1e-9:
                        w = Wrench2D(mag * dx / d, mag * dy / d, w.mz)
                    else:
                        w = Wrench2D(0.0, 0.0, w.mz)
                th = self.state.robot.theta
                c, s = math.cos(th), math.sin(th)
                return Wrench2D(c * w.fx + s * w.fy, -s * w.fx + c * w.fy, w.mz)
        return Wrench2D.zero()

    # ---------------------------------------------------------------- tick

    def step(self) -> StepRecord:
        t_tick = time.perf_counter()
        cfg = self.config
        wrench_applied = self.applied_wrench()
        self.state = replace(self.state, applied_wrench=wrench_applied)

        # force estimation at its own cadence
        sub_dt = cfg.dt / SUB_STEPS
        snapshot = self.estimator.snapshot
        for _ in range(SUB_STEPS):
            self._fixture_pose, self._fixture_vel, tau, reg = planar_fixture_step(
                self._fixture_pose,
                self._fixture_vel,
                wrench_applied,
                cfg.estimator.inertia,
                sub_dt,
                damping=(cfg.estimator.damping_linear, cfg.estimator.damping_rotational),
            )
            snapshot = self.estimator.step(tau, reg, self.state.velocity)
        v_tgt = snapshot.v_tgt if self.modes.fc else VelocityCommand.zero()

        # perception and tracking
        scan_seed = int(
            np.random.SeedSequence((cfg.seed, self._tick_index)).generate_state(1)[0]
        )
        cloud = synth_scan(self.state, cfg.scan, cfg.perception.window, scan_seed)
        _, _, ellipses = perceive(cloud, self.state.robot.position, cfg.perception)
        self.tracker.update(ellipses, cfg.dt)
        preds = self.tracker.predictions(cfg.planner.z_steps, cfg.dt)

        # plan and act
        t_plan = time.perf_counter()
        cmd, diag = self.planner.plan_step(
            self.state.robot,
            self.command,
            v_tgt,
            preds,
            self.goal,
            gn_enabled=self.modes.gn,
            oa_enabled=self.modes.oa,
        )
        plan_ms = (time.perf_counter() - t_plan) * 1e3
        self.command = cmd
        self.state = step_world(self.state, cmd, cfg.dt)
        self._tick_index += 1

        # ground-truth safety metrics at the new state
        clear_r, clear_u = math.inf, math.inf
        for ell in self.state.obstacles:
            clear_r = min(clear_r, ray_clearance(self.state.robot.position, ell))
            clear_u = min(clear_u, ray_clearance(self.state.user, ell))
        dmin_r = clear_r - cfg.r_robot
        dmin_u = clear_u - cfg.r_user
        if dmin_r <= 0.0 or dmin_u <= 0.0:
            self.collided = True
        if diag.status == STATUS_DEGRADED:
            self._infeasible_time += cfg.dt
            if self._infeasible_time > INFEASIBLE_WATCHDOG_S:
                self.infeasible_exceeded = True
        else:
            self._infeasible_time = 0.0
        if diag.status == STATUS_OPTIMAL and diag.invariance_margin < -1e-6:
            self.invariance_violations += 1
        if (
            self.goal is not None
            and self.state.robot.position.distance_to(self.goal) <= cfg.goal_tolerance
        ):
            self.goal_reached = True

        self.last_record = StepRecord(
            t=self.state.time,
            x=self.state.robot.x,
            y=self.state.robot.y,
            theta=self.state.robot.theta,
            vx=cmd.vx,
            vy=cmd.vy,
            wz=cmd.wz,
            fx_est=snapshot.wrench.fx,
            fy_est=snapshot.wrench.fy,
            mz_est=snapshot.wrench.mz,
            vtgt_x=v_tgt.vx,
            vtgt_y=v_tgt.vy,
            vtgt_w=v_tgt.wz,
            hmin_robot=clear_r - cfg.planner.d_safe1,
            hmin_user=clear_u - cfg.planner.d_safe2,
            dmin_robot=dmin_r,
            dmin_user=dmin_u,
            slack1=diag.slack_robot,
            slack2=diag.slack_user,
            status=diag.status,
            clearance_robot=clear_r,
            clearance_user=clear_u,
            invariance_margin=diag.invariance_margin,
            plan_ms=plan_ms,
            tick_ms=(time.perf_counter() - t_tick) * 1e3,
        )
        return self.last_record

    @property
    def done(self) -> bool:
        if self.collided or self.infeasible_exceeded:
            return True
        if self.goal is not None and self.goal_reached:
            return True
        return self.state.time >= self.config.duration - 1e-9


def run_scenario(config: ScenarioConfig) -> tuple[MetricsRecord, list[StepRecord]]:
    """Run the loop until goal, collision, watchdog, or timeout."""
    sim = Simulation(config)
    records: list[StepRecord] = []
    while not sim.done:
        records.append(sim.step())
    if sim.collided:
        cause = CAUSE_COLLISION
    elif sim.infeasible_exceeded:
        cause = CAUSE_INFEASIBLE
    elif config.goal is not None and not sim.goal_reached:
        cause = CAUSE_TIMEOUT
    else:
        cause = None
    success = cause is None
    metrics = MetricsRecord(
        success=success,
        failure_cause=cause,
        completion_time=sim.state.time,
        n_steps=len(records),
        min_clearance_robot=min((r.clearance_robot for r in records), default=math.inf),
        min_clearance_user=min((r.clearance_user for r in records), default=math.inf),
        min_h_robot=min((r.hmin_robot for r in records), default=math.inf),
        min_h_user=min((r.hmin_user for r in records), default=math.inf),
        invariance_violations=sim.invariance_violations,
        mean_tick_ms=float(np.mean([r.tick_ms for r in records])) if records else 0.0,
        mean_plan_ms=float(np.mean([r.plan_ms for r in records])) if records else 0.0,
    )
    return metrics, records


def write_step_log(path, records: list[StepRecord]) -> None:
    with open(path, "w") as f:
        f.write(STEP_LOG_HEADER + "\n")
        for r in records:
            f.write(r.csv_row() + "\n")


# ------------------------------------------------------------------ batches

def apply_variant(config: ScenarioConfig, variant: str) -> ScenarioConfig:
    if variant not in VARIANTS:
        raise ValueError(f"unknown variant {variant!r}; expected one of {VARIANTS}")
    planner = config.planner
    if variant.startswith("robot-only"):
        planner = replace(planner, kappa2=0.0)
    planner = replace(planner, hard_slack=variant.endswith("-hard"))
    return replace(config, planner=planner)


def jitter_trial(config: ScenarioConfig, seed: int) -> ScenarioConfig:
    """Per-trial perturbation: start pose +-0.1 m, obstacle timing +-0.3 s."""
    rng = np.random.default_rng(seed)
    start = config.robot_start
    robot_start = Pose2D(
        start.x + rng.uniform(-0.1, 0.1),
        start.y + rng.uniform(-0.1, 0.1),
        start.theta,
    )
    obstacles = tuple(
        replace(o, start_delay=max(0.0, o.start_delay + rng.uniform(-0.3, 0.3)))
        if not o.is_static
        else o
        for o in config.obstacles
    )
    return replace(config, robot_start=robot_start, obstacles=obstacles, seed=seed)


def _limit_worker_threads():
    # workers are process-parallel; per-process BLAS threads only thrash
    try:
        import threadpoolctl

        threadpoolctl.threadpool_limits(1)
    except ImportError:
        pass


def _run_trial(args):
    config, variant, trial_seed = args
    trial_cfg = jitter_trial(apply_variant(config, variant), trial_seed)
    metrics, _ = run_scenario(trial_cfg)
    return variant, trial_seed, metrics


@dataclass
class BatchResult:
    rows: list[tuple[str, int, int, float]]  # variant, trials, successes, rate
    trials: dict[str, list[MetricsRecord]]

    def rate(self, variant: str) -> float:
        for v, _, _, rate in self.rows:
            if v == variant:
                return rate
        raise KeyError(variant)

    def to_csv(self) -> str:
        lines = [BATCH_HEADER]
        for variant, n, wins, rate in self.rows:
            lines.append(f"{variant},{n},{wins},{rate:.4f}")
        return "\n".join(lines) + "\n"


def run_batch(
    config: ScenarioConfig,
    n_trials: int,
    seed_base: int,
    variants=VARIANTS,
    workers: int = 1,
) -> BatchResult:
    """Run seeded trials of each CBF variant and tabulate success rates."""
    if n_trials < 1:
        raise ValueError("n_trials must be >= 1")
    jobs = [
        (config, variant, seed_base + trial)
        for variant in variants
        for trial in range(n_trials)
    ]
    if workers > 1:
        import multiprocessing as mp

        with mp.Pool(workers, initializer=_limit_worker_threads) as pool:
            outcomes = pool.map(_run_trial, jobs)
    else:
        outcomes = [_run_trial(j) for j in jobs]
    per_variant: dict[str, list[MetricsRecord]] = {v: [] for v in variants}
    for variant, _, metrics in outcomes:
        per_variant[variant].append(metrics)
    rows = []
    for variant in variants:
        ms = per_variant[variant]
        wins = sum(1 for m in ms if m.success)
        rows.append((variant, len(ms), wins, wins / len(ms)))
    return BatchResult(rows, per_variant)


# -------------------------------------------------------------- JSON config

def _matrix(v) -> np.ndarray:
    arr = np.asarray(v, dtype=float)
    if arr.shape == (3,):
        return np.diag(arr)
    if arr.shape == (3, 3):
        return arr
    raise ValueError("weight matrices must be a 3-vector diagonal or 3x3")


def scenario_to_dict(config: ScenarioConfig) -> dict:
    p = config.planner
    return {
        "schema_version": SCHEMA_VERSION,
        "name": config.name,
        "seed": config.seed,
        "duration": config.duration,
        "world": dataclasses.asdict(config.world),
        "robot_start": {
            "x": config.robot_start.x,
            "y": config.robot_start.y,
            "theta": config.robot_start.theta,
        },
        "goal": None
        if config.goal is None
        else {"x": config.goal.x, "y": config.goal.y},
        "goal_tolerance": config.goal_tolerance,
        "r_robot": config.r_robot,
        "r_user": config.r_user,
        "modes": dataclasses.asdict(config.modes),
        "force_script": [
            {
                "t_start": e.t_start,
                "duration": e.duration,
                "wrench": {"fx": e.wrench.fx, "fy": e.wrench.fy, "mz": e.wrench.mz},
                "frame": e.frame,
            }
            for e in config.force_script
        ],
        "obstacles": [
            {
                "x": o.ellipse.center.x,
                "y": o.ellipse.center.y,
                "a": o.ellipse.a,
                "b": o.ellipse.b,
                "theta": o.ellipse.theta,
                "waypoints": [[w.x, w.y] for w in o.waypoints],
                "speed": o.speed,
                "start_delay": o.start_delay,
            }
            for o in config.obstacles
        ],
        "scan": dataclasses.asdict(config.scan),
        "planner": {
            "z_steps": p.z_steps,
            "dt": p.dt,
            "q_weight": p.q_weight.tolist(),
            "qf_weight": p.qf_weight.tolist(),
            "r_weight": p.r_weight.tolist(),
            "s_weight": p.s_weight.tolist(),
            "kappa1": p.kappa1,
            "kappa2": p.kappa2,
            "beta": p.beta,
            "mu": p.mu,
            "d_safe1": p.d_safe1,
            "d_safe2": p.d_safe2,
            "v_max": p.v_max,
            "omega_max": p.omega_max,
            "rod_length": p.rod_length,
            "cruise_speed": p.cruise_speed,
            "hard_slack": p.hard_slack,
            "robot_radius": p.robot_radius,
        },
        "estimator": {
            "alpha": config.estimator.alpha,
            "p0": config.estimator.p0,
            "n_r": config.estimator.n_r,
            "gamma": config.estimator.gamma,
            "deadband_force": config.estimator.deadband_force,
            "deadband_moment": config.estimator.deadband_moment,
            "m": config.estimator.inertia.m,
            "jz": config.estimator.inertia.jz,
            "dt": config.estimator.dt,
            "damping_linear": config.estimator.damping_linear,
            "damping_rotational": config.estimator.damping_rotational,
        },
        "tracker": {
            f.name: getattr(config.tracker, f.name)
            for f in dataclasses.fields(TrackerParams)
        },
        "perception": {
            "window": config.perception.window,
            "resolution": config.perception.resolution,
            "q_th": config.perception.q_th,
            "s_th": config.perception.s_th,
            "k": config.perception.clustering.k,
            "min_pts": config.perception.clustering.min_pts,
            "mvee_tolerance": config.perception.mvee_tolerance,
        },
    }


def scenario_from_dict(data: dict) -> ScenarioConfig:
    if data.get("schema_version") != SCHEMA_VERSION:
        raise ValueError(
            f"unsupported schema_version {data.get('schema_version')!r}, "
            f"expected {SCHEMA_VERSION}"
        )
    from .perception import ClusteringParams

    world = WorldBounds(**data.get("world", {}))
    rs = data.get("robot_start", {})
    robot_start = Pose2D(rs.get("x", 0.0), rs.get("y", 0.0), rs.get("theta", 0.0))
    goal = data.get("goal")
    goal_pt = None if goal is None else Point2D(goal["x"], goal["y"])
    modes = ModeFlags(**data.get("modes", {}))
    events = tuple(
        ForceEvent(
            e["t_start"],
            e["duration"],
            Wrench2D(
                e["wrench"].get("fx", 0.0),
                e["wrench"].get("fy", 0.0),
                e["wrench"].get("mz", 0.0),
            ),
            e.get("frame", "body"),
        )
        for e in data.get("force_script", [])
    )
    obstacles = tuple(
        ObstacleSpec(
            Ellipse(Point2D(o["x"], o["y"]), o["a"], o["b"], o.get("theta", 0.0)),
            tuple(Point2D(w[0], w[1]) for w in o.get("waypoints", [])),
            o.get("speed", 0.0),
            o.get("start_delay", 0.0),
        )
        for o in data.get("obstacles", [])
    )
    pd = dict(data.get("planner", {}))
    for key in ("q_weight", "qf_weight", "r_weight", "s_weight"):
        if key in pd:
            pd[key] = _matrix(pd[key])
    planner = PlannerConfig(**pd)
    ed = dict(data.get("estimator", {}))
    inertia = InertiaParams(m=ed.pop("m", 50.0), jz=ed.pop("jz", 8.0))
    estimator = EstimatorParams(inertia=inertia, **ed)
    tracker = TrackerParams(**data.get("tracker", {}))
    pc = dict(data.get("perception", {}))
    clustering = ClusteringParams(
        k=pc.pop("k", 1), min_pts=pc.pop("min_pts", 3)
    )
    perception = PerceptionParams(clustering=clustering, **pc)
    return ScenarioConfig(
        name=data.get("name", "scenario"),
        seed=data.get("seed", 0),
        duration=data.get("duration", 20.0),
        world=world,
        robot_start=robot_start,
        goal=goal_pt,
        goal_tolerance=data.get("goal_tolerance", 0.5),
        r_robot=data.get("r_robot", 0.45),
        r_user=data.get("r_user", 0.25),
        modes=modes,
        force_script=events,
        obstacles=obstacles,
        scan=ScanParams(**data.get("scan", {})),
        planner=planner,
        estimator=estimator,
        tracker=tracker,
        perception=perception,
    )


def load_scenario(path) -> ScenarioConfig:
    with open(path) as f:
        return scenario_from_dict(json.load(f))


def save_scenario(config: ScenarioConfig, path) -> None:
    with open(path, "w") as f:
        json.dump(scenario_to_dict(config), f, indent=2)
        f.write("\n")
