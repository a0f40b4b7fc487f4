"""Force-compliant, safety-constrained guide-robot navigation stack."""

__version__ = "0.1.0"

from .geometry import Ellipse, Point2D, Pose2D, VelocityCommand, wrap_angle
from .force import Wrench2D

__all__ = [
    "Ellipse",
    "Point2D",
    "Pose2D",
    "VelocityCommand",
    "Wrench2D",
    "wrap_angle",
    "__version__",
]
