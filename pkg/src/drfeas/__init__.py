"""Douglas-Rachford feasibility toolkit for two closed sets."""

from .sets import (
    AffineSubspace,
    Ball,
    Box,
    HalfSpace,
    Multiplicity,
    ParabolaHypograph,
    ProjectionResult,
    Slab,
    Sphere,
    Transformed,
    affine_hull,
    as_vector,
    contains,
    distance,
    project,
    proximal_normal_sample,
    reflect,
    set_from_dict,
    set_to_dict,
)
from .dr_core import (
    DRStepRecord,
    StopReason,
    Trajectory,
    dr_step,
    fixed_point_residual,
    lemma43_probe,
    run,
)

__version__ = "0.1.0"

__all__ = [
    "AffineSubspace",
    "Ball",
    "Box",
    "DRStepRecord",
    "HalfSpace",
    "Multiplicity",
    "ParabolaHypograph",
    "ProjectionResult",
    "Slab",
    "Sphere",
    "StopReason",
    "Trajectory",
    "Transformed",
    "affine_hull",
    "as_vector",
    "contains",
    "distance",
    "dr_step",
    "fixed_point_residual",
    "lemma43_probe",
    "project",
    "proximal_normal_sample",
    "reflect",
    "run",
    "set_from_dict",
    "set_to_dict",
]
