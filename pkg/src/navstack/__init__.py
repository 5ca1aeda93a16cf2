"""Mobile robot navigation stack: 3D laser mapping, grid A*, tracking and
sonar obstacle avoidance, plus a deterministic 2.5D scenario simulator."""

from navstack.geometry import Pose

__version__ = "0.1.0"

__all__ = ["Pose", "__version__"]
