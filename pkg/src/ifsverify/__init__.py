"""Finite models of weak-IFS counterexample spaces and numeric checks of their claims."""

from .engine import (
    CoverCertificate,
    IfsSystem,
    LipschitzReport,
    MapSpec,
    certify_composition_diameter,
    chaos_game,
    check_weak_contraction,
    estimate_lipschitz,
    hutchinson,
    iterate_attractor,
    min_word_length,
)
from .geometry import (
    Point2,
    PointCloud,
    PolarPoint,
    Polyline,
    diameter,
    hausdorff_distance,
    polyline_length,
)

__version__ = "0.1.0"

__all__ = [
    "CoverCertificate",
    "IfsSystem",
    "LipschitzReport",
    "MapSpec",
    "Point2",
    "PointCloud",
    "PolarPoint",
    "Polyline",
    "certify_composition_diameter",
    "chaos_game",
    "check_weak_contraction",
    "diameter",
    "estimate_lipschitz",
    "hausdorff_distance",
    "hutchinson",
    "iterate_attractor",
    "min_word_length",
    "polyline_length",
]
