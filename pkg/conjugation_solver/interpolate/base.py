"""
Module containing the base solver class that decides and constructs conjugation interpolations.
Do not use directly, use SymmetricSolver or SkewSolver instead.
"""

import logging
from abc import ABC, abstractmethod

import numpy as np

from conjugation_solver.antilinear import Conjugation, InconsistentConstraintsError, complete_partial_conjugation
from conjugation_solver.linalg import CMatrix, adjoint, complement_basis, inner, pinv, qr_orthonormalize
from conjugation_solver.report import Verdict, Violation
from conjugation_solver.interpolate.problem import (
    Certificate,
    ConstructionError,
    InterpolationProblem,
    ProblemError,
    verify_certificate,
)

logger = logging.getLogger(__name__)


class InterpolationSolver(ABC):
    """
    Abstract base class for deciding and constructing conjugations C with C x_i = y_i that relate the
    operators to their adjoints. Subclasses choose which atom each atom is mapped to and how the
    conjugation is completed on the part of the space the pairs do not reach.
    """

    _mode: str

    def __init__(self, problem: InterpolationProblem):
        if problem.mode != self._mode:
            raise ProblemError(f"{type(self).__name__} solves {self._mode} problems, got mode {problem.mode}")
        self.problem = problem
        self.tol = problem.tol
        self.decomp = problem.decomposition
        self.projections = [atom.projection() for atom in self.decomp.atoms]

    @abstractmethod
    def _partner(self, idx: int) -> int | None:
        """Index of the atom that C maps atom `idx` onto, None if there is none."""

    @abstractmethod
    def _complement_factor(self, basis: CMatrix) -> CMatrix | Verdict:
        """
        Symmetric unitary factor (in coordinates of the orthonormal `basis`) of a conjugation with the
        required relation to the operators restricted to span(basis), or the violations preventing one.
        """

    def _extra_violations(self) -> list[Violation]:
        return []

    def _partner_projection(self, idx: int) -> CMatrix:
        if (partner := self._partner(idx)) is None:
            return np.zeros_like(self.projections[idx])
        return self.projections[partner]

    def atom_violations(self) -> list[Violation]:
        """
        Per-atom conditions <Q x_i, x_j> = <Q' y_j, y_i> and <Q x_i, y_j> = <Q' x_j, y_i>, where Q' is the
        projection of the partner atom. Additivity over atoms makes these equivalent to the conditions
        over all spectral subsets.
        """
        xs, ys = self.problem.xs, self.problem.ys
        count = self.problem.pair_count
        if count == 0:
            return []
        scale = float(max(np.max(np.linalg.norm(xs, axis=0)), np.max(np.linalg.norm(ys, axis=0)))) ** 2
        limit = self.tol.scaled(scale)
        zero = np.zeros_like(self.projections[0])
        # atoms nothing is mapped onto pair with the empty set: their y-components must vanish
        reached = {self._partner(idx) for idx in range(len(self.projections))}
        checks = [(idx, proj, self._partner_projection(idx)) for idx, proj in enumerate(self.projections)]
        checks += [(idx, zero, proj) for idx, proj in enumerate(self.projections) if idx not in reached]
        out = []
        for idx, proj, partner in checks:
            for i in range(count):
                for j in range(count):
                    lhs, rhs = inner(proj @ xs[:, i], xs[:, j]), inner(partner @ ys[:, j], ys[:, i])
                    if abs(lhs - rhs) > limit:
                        out.append(Violation(kind="atom_gram", atom=idx, i=i, j=j, lhs=lhs, rhs=rhs))
                    lhs, rhs = inner(proj @ xs[:, i], ys[:, j]), inner(partner @ xs[:, j], ys[:, i])
                    if abs(lhs - rhs) > limit:
                        out.append(Violation(kind="atom_cross", atom=idx, i=i, j=j, lhs=lhs, rhs=rhs))
        return out

    def feasibility(self) -> Verdict:
        """Decide solvability, listing every failed condition."""
        violations = self.problem.norm_violations() + self.atom_violations() + self._extra_violations()
        verdict = Verdict(tuple(violations))
        logger.debug("%s feasibility: %d violations", self._mode, len(violations))
        return verdict

    def _orbit_constraints(self) -> tuple[CMatrix, CMatrix]:
        """
        Orthonormal e_j spanning the orbit of the xs (normalized xs first) and their images f_j = W e_j
        under the antilinear isometry W that sends Q x_i to Q' y_i.
        """
        xs, ys = self.problem.xs, self.problem.ys
        norms = np.linalg.norm(xs, axis=0)
        gens_x = np.hstack([proj @ xs for proj in self.projections])
        gens_y = np.hstack([self._partner_projection(idx) @ ys for idx in range(len(self.projections))])
        e_basis, rank = qr_orthonormalize(np.hstack([xs / norms[np.newaxis, :], gens_x]), self.tol)
        # e = A c for the generator matrix A, so W e = B conj(c)
        coeffs = pinv(gens_x, self.tol) @ e_basis
        f_basis = gens_y @ coeffs.conj()
        logger.debug("orbit of xs has dimension %d", rank)
        return e_basis, f_basis

    def construct(self) -> Certificate:
        """Build a conjugation for a feasible problem, or an infeasible certificate with its violations."""
        if not (verdict := self.feasibility()):
            return Certificate(feasible=False, violations=verdict.violations)

        dim = self.problem.dim
        orbit = self.problem.orbit_basis
        s = np.zeros((dim, dim), dtype=np.complex128)
        if self.problem.pair_count:
            e_basis, f_basis = self._orbit_constraints()
            try:
                inner_conj = complete_partial_conjugation(
                    adjoint(orbit) @ e_basis, adjoint(orbit) @ f_basis, self.tol, dim=orbit.shape[1]
                )
            except InconsistentConstraintsError as exc:
                raise ConstructionError(f"Completion on the orbit failed for a feasible problem: {exc}") from exc
            s += orbit @ inner_conj.s @ orbit.T

        comp = complement_basis(orbit, dim, self.tol)
        if comp.shape[1]:
            factor = self._complement_factor(comp)
            if isinstance(factor, Verdict):
                raise ConstructionError(f"No conjugation on the orbit complement: {factor.witness}")
            s += comp @ factor @ comp.T
        logger.debug("orbit dimension %d, complement dimension %d", orbit.shape[1], comp.shape[1])

        conj = Conjugation(s)
        check = verify_certificate(conj, self.problem)
        if not check.passed:
            raise ConstructionError(f"Constructed conjugation fails re-verification on {', '.join(check.failed)}")
        return Certificate(feasible=True, conjugation=conj, residuals=check.residuals)
