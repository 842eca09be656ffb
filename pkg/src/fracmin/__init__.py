"""Fractional perimeters, nonlocal curvature and exact discrete s-minimal sets in the plane."""

__version__ = "0.1.0"

from .core import (  # noqa: E402
    Complement,
    Disk,
    Empty,
    ExplicitMask,
    FractionalOrder,
    GridSpec,
    Halfplane,
    Mask,
    OscillatingJM,
    PerturbedHalfplane,
    PixelProblem,
    ProblemError,
    RingCap,
    Sector,
    disk_problem,
    geometric_constants,
    make_problem,
)
from .interaction import InteractionModel, build_model, cell_pair_weight, frac_perimeter  # noqa: E402
from .mincut import MinimizerResult, SPerimeterMinimizer, minimize  # noqa: E402

__all__ = [
    "Complement", "Disk", "Empty", "ExplicitMask", "FractionalOrder", "GridSpec", "Halfplane",
    "InteractionModel", "Mask", "MinimizerResult", "OscillatingJM", "PerturbedHalfplane",
    "PixelProblem", "ProblemError", "RingCap", "SPerimeterMinimizer", "Sector",
    "build_model", "cell_pair_weight", "disk_problem", "frac_perimeter",
    "geometric_constants", "make_problem", "minimize",
]
