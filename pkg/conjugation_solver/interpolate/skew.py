"""
Module containing the solver for conjugations with C x_i = y_i and C N C = -N* for a single normal N.
"""

import logging

from conjugation_solver.interpolate.base import InterpolationSolver
from conjugation_solver.interpolate.problem import Certificate, InterpolationProblem
from conjugation_solver.linalg import CMatrix, adjoint, complement_basis
from conjugation_solver.report import Verdict, Violation
from conjugation_solver.spectral import (
    SpectralDecomp,
    decompose,
    multiplicity_violations,
    negation_partner,
    skew_witness,
)

logger = logging.getLogger(__name__)


class SkewSolver(InterpolationSolver):
    """
    Every atom is mapped onto the atom at its negated eigenvalue. The part of the space the pairs do not
    reach must carry a skew-symmetric restriction of N on its own.
    """

    _mode = "skew"

    def _partner(self, idx: int) -> int | None:
        return negation_partner(self.decomp, idx, self.tol)

    def _restricted_decomp(self, basis: CMatrix) -> SpectralDecomp:
        return decompose(adjoint(basis) @ self.problem.operators[0] @ basis, self.tol)

    def _complement_verdict(self) -> Verdict:
        comp = complement_basis(self.problem.orbit_basis, self.problem.dim, self.tol)
        if comp.shape[1] == 0:
            return Verdict()
        return multiplicity_violations(self._restricted_decomp(comp), self.tol)

    def _extra_violations(self) -> list[Violation]:
        verdict = self._complement_verdict()
        if not verdict:
            logger.debug("restriction to the orbit complement is not skew-symmetric")
        return [
            Violation(kind="complement_multiplicity", lhs=v.lhs, rhs=v.rhs, value=v.value)
            for v in verdict.violations
        ]

    def _complement_factor(self, basis: CMatrix) -> CMatrix | Verdict:
        decomp = self._restricted_decomp(basis)
        if not (verdict := multiplicity_violations(decomp, self.tol)):
            return verdict
        return skew_witness(decomp, self.tol).s


def feasibility_skew(p: InterpolationProblem) -> Verdict:
    """Decide whether a conjugation with C x_i = y_i and C N C = -N* exists."""
    return SkewSolver(p).feasibility()


def construct_skew(p: InterpolationProblem) -> Certificate:
    """Construct and re-verify such a conjugation, or return an infeasible certificate."""
    return SkewSolver(p).construct()
