"""Optimal design of mobile sensor paths for goal-oriented inference in
linear Bayesian inverse problems governed by advection-diffusion."""
from .forward import ForwardModel
from .mesh import StructuredMesh, build_mesh
from .observation import ObscuredRegion, ObservationSchedule
from .oed import GoalFunctional, LowRankPosterior, ProblemSetup
from .paths import BezierPath, FourierPath
from .prior import EllipticPrior

__all__ = [
    "BezierPath", "EllipticPrior", "ForwardModel", "FourierPath", "GoalFunctional",
    "LowRankPosterior", "ObscuredRegion", "ObservationSchedule", "ProblemSetup",
    "StructuredMesh", "build_mesh",
]
__version__ = "0.1.0"
