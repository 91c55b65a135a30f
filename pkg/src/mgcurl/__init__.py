"""Multigrid V-cycles with overlapping Schwarz smoothers for ``alpha curl curl u + u = f``.

Lowest-order Nedelec edge elements on nested uniform hexahedral grids of the
cube ``(-1, 1)^3``. The hot smoother kernel is compiled when the optional
extension is available; see :mod:`mgcurl.kernels`.
"""
from .assembly import SystemOperator, assemble_load, assemble_operator, dump_operator
from .element import local_curlcurl_matrix, local_mass_matrix, local_matrices
from .experiments import (
    ContractionReport,
    ExperimentConfig,
    estimate_contraction,
    manufactured_convergence,
    run_table,
)
from .kernels import available_backends, current_backend, set_backend, use_backend
from .mesh import GridHierarchy, GridLevel, build_hierarchy, coarse_entity_stencils
from .multigrid import MultigridHierarchy, build_multigrid, error_propagation_apply, mg_apply, pcg_solve
from .smoothers import apply_smoother, build_blocks, harmonic_extension, lemma_coarse_check
from .transfer import build_prolongation

__version__ = "0.1.0"

__all__ = [
    "GridHierarchy",
    "GridLevel",
    "build_hierarchy",
    "coarse_entity_stencils",
    "local_mass_matrix",
    "local_curlcurl_matrix",
    "local_matrices",
    "SystemOperator",
    "assemble_operator",
    "assemble_load",
    "dump_operator",
    "build_prolongation",
    "build_blocks",
    "apply_smoother",
    "harmonic_extension",
    "lemma_coarse_check",
    "MultigridHierarchy",
    "build_multigrid",
    "mg_apply",
    "error_propagation_apply",
    "pcg_solve",
    "ExperimentConfig",
    "ContractionReport",
    "estimate_contraction",
    "run_table",
    "manufactured_convergence",
    "current_backend",
    "available_backends",
    "set_backend",
    "use_backend",
]
