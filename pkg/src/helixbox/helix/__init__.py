"""Helix-box surfaces: boundary path synthesis, ruled-surface meshing,
single boxes with product collars, and the full section planner."""

from .paths import BoundaryPath, build_lambda_paths
from .surface import helix_surface
from .boxes import HelixBoxSpec, RingStore, helix_box
from .planner import (Family, PlanSegment, PlanningError, SectionPlan,
                      assemble_mesh, plan_section)

__all__ = [
    "BoundaryPath", "build_lambda_paths", "helix_surface",
    "HelixBoxSpec", "RingStore", "helix_box",
    "Family", "PlanSegment", "PlanningError", "SectionPlan",
    "assemble_mesh", "plan_section",
]
