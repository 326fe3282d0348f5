"""Submodule containing conjugation interpolation for symmetric and skew relations, and hyperinvariance."""

from .hyperinvariant import hyperinvariance_falsifier, is_hyperinvariant
from .problem import (
    Certificate,
    CertificateCheck,
    ConstructionError,
    InterpolationProblem,
    PartialIsometryWitness,
    PerturbationReport,
    ProblemError,
    partial_isometry_witness,
    perturbation_suite,
    verify_certificate,
)
from .skew import SkewSolver, construct_skew, feasibility_skew
from .symmetric import (
    NormalityWitness,
    SymmetricSolver,
    construct_symmetric,
    feasibility_single,
    feasibility_symmetric,
    is_normal_by_fixed_conjugations,
    subspace_family_problem,
    unitary_commutant_witness,
)

__all__ = [
    "Certificate",
    "CertificateCheck",
    "ConstructionError",
    "InterpolationProblem",
    "NormalityWitness",
    "PartialIsometryWitness",
    "PerturbationReport",
    "ProblemError",
    "SkewSolver",
    "SymmetricSolver",
    "construct_skew",
    "construct_symmetric",
    "feasibility_single",
    "feasibility_skew",
    "feasibility_symmetric",
    "hyperinvariance_falsifier",
    "is_hyperinvariant",
    "is_normal_by_fixed_conjugations",
    "partial_isometry_witness",
    "perturbation_suite",
    "subspace_family_problem",
    "unitary_commutant_witness",
    "verify_certificate",
]
