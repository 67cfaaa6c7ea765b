"""Moment-map gradient flow for polyhedral surface maps into C^m.

Drives discrete 1-forms on a flat triangulated surface toward isotropic
(Lagrangian-type) configurations by following the energy gradient restricted
to exact forms; lifting through integration gives the corresponding flow of
vertex maps.  See the README for the file formats and the CLI.
"""

from ._core import BACKEND
from .exact import (
    ExactnessError,
    ExactProjector,
    GramSchmidtProjector,
    PolyMap,
    StiffnessReport,
    differential,
    exactness_residual,
    hat_differential,
    integrate,
    project_exact,
    stiffness_comparison,
    stiffness_matrix,
)
from .flow import (
    FlowConfig,
    FlowError,
    FlowResult,
    FlowTrace,
    LiftedFlowResult,
    RegularitySummary,
    SolitonResult,
    find_soliton,
    flow_step,
    regularity_diagnostic,
    renormalized_step,
    run_flow,
    run_lifted_flow,
    soliton_residual,
)
from .forms import (
    DiscreteOneForm,
    MomentDensity,
    TargetSpace,
    apply_R,
    gauge_act,
    infinitesimal_action,
    inner_product,
    kahler_form,
    mult_i,
    norm,
    pullback_density,
    random_form,
    rotate_form,
    split_pm,
)
from .io import clifford_sample, export_obj, random_exact
from .mesh import (
    MeshError,
    TriangulatedSurface,
    build_torus_mesh,
    read_mesh,
    validate_mesh,
    write_mesh,
)
from .moment import energy, gradient, moment_map, restricted_gradient

__version__ = "0.1.0"

__all__ = [
    "BACKEND",
    "DiscreteOneForm",
    "ExactProjector",
    "ExactnessError",
    "FlowConfig",
    "FlowError",
    "FlowResult",
    "FlowTrace",
    "GramSchmidtProjector",
    "LiftedFlowResult",
    "MeshError",
    "MomentDensity",
    "PolyMap",
    "RegularitySummary",
    "SolitonResult",
    "StiffnessReport",
    "TargetSpace",
    "TriangulatedSurface",
    "apply_R",
    "build_torus_mesh",
    "clifford_sample",
    "differential",
    "energy",
    "exactness_residual",
    "export_obj",
    "find_soliton",
    "flow_step",
    "gauge_act",
    "gradient",
    "hat_differential",
    "infinitesimal_action",
    "inner_product",
    "integrate",
    "kahler_form",
    "moment_map",
    "mult_i",
    "norm",
    "project_exact",
    "pullback_density",
    "random_exact",
    "random_form",
    "read_mesh",
    "regularity_diagnostic",
    "renormalized_step",
    "restricted_gradient",
    "rotate_form",
    "run_flow",
    "run_lifted_flow",
    "soliton_residual",
    "split_pm",
    "stiffness_comparison",
    "stiffness_matrix",
    "validate_mesh",
    "write_mesh",
]
