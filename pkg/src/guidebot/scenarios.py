"""Built-in scenario definitions mirroring the four scripted experiments:
pure force interaction, force-adaptive navigation, force-driven obstacle
avoidance, and dynamic avoidance during autonomous navigation."""

from __future__ import annotations

from dataclasses import replace

from .force import Wrench2D
from .geometry import Ellipse, Point2D, Pose2D
from .perception import PerceptionParams
from .planner import PlannerConfig
from .simulator import (
    ForceEvent,
    ModeFlags,
    ObstacleSpec,
    ScenarioConfig,
    WorldBounds,
)


def _planner(**overrides) -> PlannerConfig:
    base = dict(d_safe1=0.6, d_safe2=0.6, qp_max_iter=2000)
    base.update(overrides)
    return PlannerConfig(**base)


def _perception() -> PerceptionParams:
    # coarser than the benchmark grid; plenty for 0.5 m obstacles
    return PerceptionParams(resolution=0.12)


def make_q1(seed: int = 7) -> ScenarioConfig:
    """Pure force interaction: a 3 s forward push, no navigation, no obstacles."""
    return ScenarioConfig(
        name="q1-pure-force",
        seed=seed,
        duration=12.0,
        world=WorldBounds(-4.0, -4.0, 12.0, 4.0),
        robot_start=Pose2D(0.0, 0.0, 0.0),
        goal=None,
        modes=ModeFlags(fc=True, gn=False, oa=False),
        force_script=(ForceEvent(1.0, 3.0, Wrench2D(30.0, 0.0, 0.0)),),
        planner=_planner(),
    )


def make_q2(seed: int = 11) -> ScenarioConfig:
    """Force-adaptive autonomous navigation: straight goal, a lateral nudge
    mid-run, no obstacle avoidance."""
    return ScenarioConfig(
        name="q2-force-adaptive-nav",
        seed=seed,
        duration=30.0,
        world=WorldBounds(-4.0, -4.0, 14.0, 4.0),
        robot_start=Pose2D(0.0, 0.0, 0.0),
        goal=Point2D(10.0, 0.0),
        goal_tolerance=0.5,
        modes=ModeFlags(fc=True, gn=True, oa=False),
        force_script=(ForceEvent(6.0, 2.5, Wrench2D(0.0, 25.0, 0.0)),),
        planner=_planner(),
    )


def make_q3(seed: int = 23) -> ScenarioConfig:
    """Force-driven traversal of a static obstacle field: the user pushes
    forward for the whole run while the planner threads the slalom."""
    obstacles = tuple(
        ObstacleSpec(Ellipse(Point2D(x, y), a, b, th))
        for x, y, a, b, th in (
            (2.8, 0.85, 0.55, 0.45, 0.3),
            (2.8, -1.75, 0.55, 0.5, -0.2),
            (5.0, -0.95, 0.6, 0.5, 0.1),
            (5.0, 1.85, 0.55, 0.45, 0.0),
            (7.2, 0.75, 0.55, 0.5, -0.3),
            (7.2, -1.95, 0.6, 0.45, 0.2),
        )
    )
    return ScenarioConfig(
        name="q3-force-obstacle-field",
        seed=seed,
        duration=30.0,
        world=WorldBounds(-4.0, -4.5, 14.0, 4.5),
        robot_start=Pose2D(0.0, 0.0, 0.0),
        goal=Point2D(9.8, 0.0),
        goal_tolerance=2.2,
        modes=ModeFlags(fc=True, gn=False, oa=True),
        force_script=(ForceEvent(0.5, 29.0, Wrench2D(40.0, 0.0, 0.0), frame="goal"),),
        obstacles=obstacles,
        planner=_planner(),
        perception=_perception(),
    )


def make_q4(seed: int = 31) -> ScenarioConfig:
    """Autonomous navigation with a 1.5 m/s pedestrian approaching head-on;
    the user pulls briefly after the encounter."""
    pedestrian = ObstacleSpec(
        Ellipse(Point2D(10.5, 0.0), 0.45, 0.35, 0.0),
        waypoints=(Point2D(-3.0, 0.0),),
        speed=1.5,
        start_delay=1.0,
    )
    return ScenarioConfig(
        name="q4-dynamic-head-on",
        seed=seed,
        duration=26.0,
        world=WorldBounds(-4.0, -4.5, 14.0, 4.5),
        robot_start=Pose2D(0.0, 0.0, 0.0),
        goal=Point2D(8.5, 0.0),
        goal_tolerance=0.6,
        modes=ModeFlags(fc=True, gn=True, oa=True),
        force_script=(ForceEvent(8.0, 2.0, Wrench2D(-15.0, 0.0, 0.0)),),
        obstacles=(pedestrian,),
        planner=_planner(),
        perception=_perception(),
    )


BUILDERS = {
    "q1": make_q1,
    "q2": make_q2,
    "q3": make_q3,
    "q4": make_q4,
}


def make(name: str, seed: int | None = None) -> ScenarioConfig:
    if name not in BUILDERS:
        raise KeyError(f"unknown scenario {name!r}; available: {sorted(BUILDERS)}")
    cfg = BUILDERS[name]()
    if seed is not None:
        cfg = replace(cfg, seed=seed)
    return cfg
