"""Edge-based active contours with an equilibrium flow for the tangential residual."""

__version__ = "0.1.0"

from .diagnostics import (
    CriticalPoint,
    PSPReport,
    classify_contours,
    classify_psp,
    dice_coefficient,
    find_critical_points,
    level_set_residence,
)
from .edges import EdgeModel, EdgeModelConfig, build_edge_model, edge_indicator, gvf
from .fields import VectorField
from .flows import FlowParams
from .levelset import Circle, Contour, Polygon, Rectangle, extract_contour, init_from_shapes
from .scheduler import EvolutionResult, EvolutionTrace, ScheduleConfig, run_alternating, run_method
from .synth import SyntheticSpec, generate

__all__ = [
    "Circle",
    "Contour",
    "CriticalPoint",
    "EdgeModel",
    "EdgeModelConfig",
    "EvolutionResult",
    "EvolutionTrace",
    "FlowParams",
    "PSPReport",
    "Polygon",
    "Rectangle",
    "ScheduleConfig",
    "SyntheticSpec",
    "VectorField",
    "build_edge_model",
    "classify_contours",
    "classify_psp",
    "dice_coefficient",
    "edge_indicator",
    "extract_contour",
    "find_critical_points",
    "generate",
    "gvf",
    "init_from_shapes",
    "level_set_residence",
    "run_alternating",
    "run_method",
]
