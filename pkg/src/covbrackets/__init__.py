"""Covariant Poisson brackets for linear lattice field theories."""

from .brackets import (
    CauchyLinear,
    FieldPoint,
    FlowOperator,
    bracket,
    bracket_batch,
    bracket_spacetime,
    build_flow,
    evolve,
    hamiltonian_vector_field,
    pullback_observable,
)
from .ddw import DiscretizedSection, FieldTheorySpec, ddw_residual, evaluate_action
from .gauge import ConnectionProjector, coulomb_projector, helmholtz_decompose
from .lattice import SpacetimeLattice, SpatialLattice
from .presymp import (
    Classification,
    ConstraintChainResult,
    LinearSubspace,
    PresymplecticSystem,
    QuadraticHamiltonian,
    constraint_algorithm,
    flat_solve,
    kernel,
    orthosymplectic_complement,
)
from .slicing import (
    SliceModel,
    SliceState,
    build_slice_model,
    build_slice_system,
    curve_to_section,
    restrict_to_slice,
    slice_constraints,
)

__all__ = [
    "CauchyLinear", "FieldPoint", "FlowOperator", "bracket", "bracket_batch",
    "bracket_spacetime", "build_flow", "evolve", "hamiltonian_vector_field",
    "pullback_observable", "DiscretizedSection", "FieldTheorySpec", "ddw_residual",
    "evaluate_action", "ConnectionProjector", "coulomb_projector", "helmholtz_decompose",
    "SpacetimeLattice", "SpatialLattice", "Classification", "ConstraintChainResult",
    "LinearSubspace", "PresymplecticSystem", "QuadraticHamiltonian", "constraint_algorithm",
    "flat_solve", "kernel", "orthosymplectic_complement", "SliceModel", "SliceState",
    "build_slice_model", "build_slice_system", "curve_to_section", "restrict_to_slice",
    "slice_constraints",
]
