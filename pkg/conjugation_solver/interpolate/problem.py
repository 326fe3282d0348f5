"""
Module with the interpolation problem instance, the certificate produced for it and the independent
checks run against certificates: re-verification from scratch, the partial isometry witness and the
rank-one perturbation report.
"""

import logging
from dataclasses import dataclass, field
from functools import cached_property
from typing import Literal, Sequence

import numpy as np
import numpy.typing as npt

from conjugation_solver.antilinear import AntilinearMap, Conjugation, relation_residuals
from conjugation_solver.config import Tolerances
from conjugation_solver.linalg import (
    CMatrix,
    DimensionError,
    adjoint,
    as_columns,
    as_matrix,
    fro,
    qr_orthonormalize,
    rank_one,
)
from conjugation_solver.report import Violation
from conjugation_solver.spectral import (
    JointSpectralDecomp,
    NotCommutingError,
    NotNormalError,
    joint_decompose,
    orbit_subspace,
)

logger = logging.getLogger(__name__)

Mode = Literal["symmetric", "skew"]


class ProblemError(ValueError):
    """Raised when an interpolation problem violates its structural preconditions."""


class ConstructionError(ValueError):
    """Raised when a construction fails although the problem was declared feasible."""


def _check_orthogonal(cols: CMatrix, name: str, tol: Tolerances) -> None:
    norms = np.linalg.norm(cols, axis=0)
    if np.any(norms <= tol.rank):
        raise ProblemError(f"All vectors in {name} must be non-zero")
    gram = adjoint(cols) @ cols
    off = np.abs(gram - np.diag(np.diag(gram)))
    if off.size and (worst := float(np.max(off))) > tol.scaled(float(np.max(norms)) ** 2):
        raise ProblemError(f"Vectors in {name} are not pairwise orthogonal, largest inner product {worst:.3e}")


@dataclass(frozen=True)
class InterpolationProblem:
    """
    Find a conjugation C with C x_i = y_i and C N_k C = N_k* (symmetric mode) or C N C = -N* (skew mode).
    Vector lists are stored as column matrices. Use `InterpolationProblem.build` to get a validated instance.
    """

    operators: tuple[CMatrix, ...]
    xs: CMatrix
    ys: CMatrix
    mode: Mode = "symmetric"
    tol: Tolerances = field(default_factory=Tolerances)

    @classmethod
    def build(
        cls,
        operators: Sequence[npt.ArrayLike],
        xs: Sequence[npt.ArrayLike] | CMatrix,
        ys: Sequence[npt.ArrayLike] | CMatrix,
        mode: Mode = "symmetric",
        tol: Tolerances | None = None,
    ) -> "InterpolationProblem":
        """Validate and normalize the problem data; raises ProblemError on structural violations."""
        tol = tol or Tolerances()
        if not operators:
            raise ProblemError("At least one operator is needed")
        if mode == "skew" and len(operators) != 1:
            raise ProblemError(f"Skew mode takes exactly one operator, got {len(operators)}")
        try:
            mats = tuple(as_matrix(op, square=True) for op in operators)
            dim = mats[0].shape[0]
            if any(m.shape != (dim, dim) for m in mats):
                raise ProblemError(f"Operators have shapes {[m.shape for m in mats]}")
            x_cols, y_cols = as_columns(xs, dim=dim), as_columns(ys, dim=dim)
        except DimensionError as exc:
            raise ProblemError(str(exc)) from exc
        if x_cols.shape[1] != y_cols.shape[1]:
            raise ProblemError(f"Got {x_cols.shape[1]} vectors in xs but {y_cols.shape[1]} in ys")
        _check_orthogonal(x_cols, "xs", tol)
        _check_orthogonal(y_cols, "ys", tol)

        problem = cls(mats, x_cols, y_cols, mode, tol)
        try:
            _ = problem.decomposition
        except (NotNormalError, NotCommutingError) as exc:
            raise ProblemError(str(exc)) from exc
        return problem

    @property
    def dim(self) -> int:
        """Dimension of the underlying space."""
        return self.operators[0].shape[0]

    @property
    def pair_count(self) -> int:
        """Number of interpolation pairs."""
        return self.xs.shape[1]

    @cached_property
    def decomposition(self) -> JointSpectralDecomp:
        """Joint spectral decomposition of the operator family."""
        return joint_decompose(self.operators, self.tol)

    @cached_property
    def orbit_basis(self) -> CMatrix:
        """Orthonormal basis of the reducing subspace generated by xs and ys."""
        if self.pair_count == 0:
            return np.zeros((self.dim, 0), dtype=np.complex128)
        return orbit_subspace(self.decomposition, np.hstack([self.xs, self.ys]), self.tol)

    def norm_violations(self) -> list[Violation]:
        """Pairs with ||x_i|| != ||y_i||."""
        out = []
        for i in range(self.pair_count):
            nx, ny = fro(self.xs[:, i]), fro(self.ys[:, i])
            if abs(nx - ny) > self.tol.scaled(max(nx, ny)):
                out.append(Violation(kind="norm", i=i, lhs=complex(nx), rhs=complex(ny)))
        return out


@dataclass(frozen=True)
class Certificate:
    """
    Outcome of a construction: the conjugation with its recomputed residuals when feasible, or the
    full violation list when not.
    """

    feasible: bool
    conjugation: Conjugation | None = None
    residuals: dict[str, float] = field(default_factory=dict)
    violations: tuple[Violation, ...] = ()

    def __post_init__(self) -> None:
        assert self.feasible == (self.conjugation is not None), "Exactly the feasible certificates carry a conjugation"
        assert self.feasible or self.violations, "Infeasible certificates must list their violations"


@dataclass(frozen=True)
class CertificateCheck:
    """Residuals recomputed from a conjugation and a problem, and whether all are within tolerance."""

    residuals: dict[str, float]
    failed: tuple[str, ...]

    @property
    def passed(self) -> bool:
        """True when every residual is within tolerance."""
        return not self.failed


def verify_certificate(conjugation: Conjugation | npt.ArrayLike, problem: InterpolationProblem) -> CertificateCheck:
    """
    Recompute every residual of a claimed solution from scratch: the conjugation identities, the
    relation with each operator and each interpolation pair.
    """
    tol = problem.tol
    c = conjugation if isinstance(conjugation, Conjugation) else Conjugation(np.asarray(conjugation))
    if c.dim != problem.dim:
        raise DimensionError(f"Conjugation of dimension {c.dim} does not match problem of dimension {problem.dim}")

    residuals: dict[str, float] = {}
    limits: dict[str, float] = {}
    report = c.verify(tol)
    residuals["symmetry"], limits["symmetry"] = report.symmetry, tol.residual
    residuals["unitarity"], limits["unitarity"] = report.unitarity, tol.residual
    if report.passed:
        for k, op in enumerate(problem.operators):
            res = relation_residuals(c, op, tol)
            residuals[f"relation_{k}"] = res.sym if problem.mode == "symmetric" else res.skew
            limits[f"relation_{k}"] = tol.scaled(fro(op))
    for i in range(problem.pair_count):
        residuals[f"pair_{i}"] = fro(c.apply(problem.xs[:, i]) - problem.ys[:, i])
        limits[f"pair_{i}"] = tol.scaled(fro(problem.xs[:, i]))

    failed = tuple(name for name, val in residuals.items() if not val <= limits[name])
    if not report.passed:
        failed = failed + tuple(f"relation_{k}" for k in range(len(problem.operators)))
    return CertificateCheck(residuals, failed)


@dataclass(frozen=True)
class PartialIsometryWitness:
    """Antilinear partial isometry V = C P_L, isometric on span(domain_basis) and zero on its complement."""

    v: AntilinearMap
    domain_basis: CMatrix


def partial_isometry_witness(cert: Certificate, problem: InterpolationProblem) -> PartialIsometryWitness:
    """
    Restrict a feasible certificate's conjugation to the reducing subspace L generated by xs and ys. The
    result maps x_i to y_i and y_i to x_i, and intertwines every N_k with N_k* (or -N* in skew mode).
    """
    if cert.conjugation is None:
        raise ProblemError("Partial isometry witness needs a feasible certificate")
    basis = problem.orbit_basis
    # V h = C P_L h = s conj(P_L) conj(h)
    v = AntilinearMap(cert.conjugation.s @ (basis @ adjoint(basis)).conj())
    return PartialIsometryWitness(v=v, domain_basis=basis)


@dataclass(frozen=True)
class PerturbationReport:
    """Relation residuals of rank-one perturbations, keyed by (operator index, lambda)."""

    residuals: dict[tuple[int, complex], float]
    limits: dict[tuple[int, complex], float]

    @property
    def passed(self) -> bool:
        """True when every perturbed operator keeps the relation within tolerance."""
        return all(self.residuals[key] <= self.limits[key] for key in self.residuals)


def perturbation_suite(
    cert: Certificate, problem: InterpolationProblem, samples: Sequence[complex]
) -> PerturbationReport:
    """
    For a single-pair certificate, check that N_k + lambda x (x) y stays C-symmetric (symmetric mode) or
    that N + lambda (x (x) x - y (x) y) stays C-skew-symmetric (skew mode, x and y independent).
    """
    if cert.conjugation is None:
        raise ProblemError("Perturbation report needs a feasible certificate")
    if problem.pair_count != 1:
        raise ProblemError(f"Perturbation report needs exactly one pair, got {problem.pair_count}")
    tol = problem.tol
    x, y = problem.xs[:, 0], problem.ys[:, 0]

    if problem.mode == "symmetric":
        pert = rank_one(x, y)
    else:
        if qr_orthonormalize(np.column_stack([x, y]), tol, prefix=0)[1] < 2:
            raise ProblemError("Skew perturbations need linearly independent x and y")
        pert = rank_one(x, x) - rank_one(y, y)

    residuals, limits = {}, {}
    for k, op in enumerate(problem.operators):
        for lam in samples:
            res = relation_residuals(cert.conjugation, op + lam * pert, tol)
            residuals[(k, lam)] = res.sym if problem.mode == "symmetric" else res.skew
            limits[(k, lam)] = tol.scaled(fro(op) + abs(lam) * fro(pert))
    logger.debug("perturbation residuals: %s", residuals)
    return PerturbationReport(residuals, limits)
