"""Part-based structural support kernel correlation filter tracker."""
from .solver import SolverConfig, solve_joint
from .tracker import Tracker, TrackerConfig, run_sequence

__all__ = ["SolverConfig", "Tracker", "TrackerConfig", "run_sequence", "solve_joint"]
__version__ = "0.1.0"
