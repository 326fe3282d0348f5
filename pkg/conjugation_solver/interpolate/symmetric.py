"""
Module containing the solver for conjugations with C x_i = y_i and C N_k C = N_k* for a commuting
normal family, and the results built on it: single-pair decisions with unitary commutant witnesses,
subspace-family interpolation and the normality test by fixed conjugations.
"""

import logging
from dataclasses import dataclass
from typing import Sequence

import numpy as np
import numpy.typing as npt

from conjugation_solver.antilinear import Conjugation, relation_residuals
from conjugation_solver.config import Tolerances
from conjugation_solver.interpolate.base import InterpolationSolver
from conjugation_solver.interpolate.problem import Certificate, ConstructionError, InterpolationProblem, ProblemError
from conjugation_solver.linalg import CMatrix, adjoint, as_matrix, as_vector, fro, unitary_mapping
from conjugation_solver.report import Verdict, Violation
from conjugation_solver.spectral import NotNormalError, check_normal, joint_decompose

logger = logging.getLogger(__name__)


class SymmetricSolver(InterpolationSolver):
    """Every joint atom is mapped onto itself; off the orbit, C conjugates entrywise in a joint eigenbasis."""

    _mode = "symmetric"

    def _partner(self, idx: int) -> int | None:
        return idx

    def _complement_factor(self, basis: CMatrix) -> CMatrix:
        restricted = [adjoint(basis) @ op @ basis for op in self.problem.operators]
        eigvecs = np.hstack([atom.basis for atom in joint_decompose(restricted, self.tol).atoms])
        return eigvecs @ eigvecs.T


def feasibility_symmetric(p: InterpolationProblem) -> Verdict:
    """Decide whether a conjugation with C x_i = y_i and C N_k C = N_k* exists."""
    return SymmetricSolver(p).feasibility()


def construct_symmetric(p: InterpolationProblem) -> Certificate:
    """Construct and re-verify such a conjugation, or return an infeasible certificate."""
    return SymmetricSolver(p).construct()


def _single_pair(x: npt.ArrayLike, y: npt.ArrayLike, tol: Tolerances) -> tuple[CMatrix, CMatrix]:
    x, y = as_vector(x), as_vector(y)
    if fro(x) <= tol.rank or fro(y) <= tol.rank:
        raise ValueError("Single-pair interpolation needs non-zero x and y")
    return x, y


def feasibility_single(family: Sequence[npt.ArrayLike], x: npt.ArrayLike, y: npt.ArrayLike, tol: Tolerances) -> Verdict:
    """A single pair is solvable iff ||Q x|| = ||Q y|| for every joint atom projection Q."""
    x, y = _single_pair(x, y, tol)
    decomp = joint_decompose(family, tol)
    limit = tol.scaled(max(fro(x), fro(y)))
    violations = []
    for idx, atom in enumerate(decomp.atoms):
        nx, ny = fro(adjoint(atom.basis) @ x), fro(adjoint(atom.basis) @ y)
        if abs(nx - ny) > limit:
            violations.append(Violation(kind="atom_norm", atom=idx, lhs=complex(nx), rhs=complex(ny)))
    return Verdict(tuple(violations))


def unitary_commutant_witness(
    family: Sequence[npt.ArrayLike], x: npt.ArrayLike, y: npt.ArrayLike, tol: Tolerances
) -> CMatrix:
    """
    Unitary U commuting with the family and with U x = y, assembled atom by atom from unitaries
    mapping Q x to Q y inside each joint eigenspace.
    """
    if not (verdict := feasibility_single(family, x, y, tol)):
        raise ConstructionError(f"No commuting unitary maps x to y: {verdict.witness}")
    x, y = as_vector(x), as_vector(y)
    decomp = joint_decompose(family, tol)
    u = np.zeros((decomp.source_dim, decomp.source_dim), dtype=np.complex128)
    for atom in decomp.atoms:
        cx, cy = adjoint(atom.basis) @ x, adjoint(atom.basis) @ y
        nx, ny = fro(cx), fro(cy)
        if min(nx, ny) <= tol.rank:
            block = np.eye(atom.dim, dtype=np.complex128)
        else:
            block = unitary_mapping(cx, cy * (nx / ny), tol)
        u += atom.basis @ block @ adjoint(atom.basis)
    return u


def subspace_family_problem(
    projections: Sequence[npt.ArrayLike],
    xs: Sequence[npt.ArrayLike] | CMatrix,
    ys: Sequence[npt.ArrayLike] | CMatrix,
    tol: Tolerances | None = None,
) -> InterpolationProblem:
    """
    Problem for a conjugation with C M_k = M_k for subspaces given by commuting orthogonal projections,
    which is the symmetric problem for the projections as a hermitian family.
    """
    tol = tol or Tolerances()
    for k, proj in enumerate(projections):
        mat = as_matrix(proj, square=True)
        if (res := max(fro(mat - adjoint(mat)), fro(mat @ mat - mat))) > tol.scaled(fro(mat)):
            raise ProblemError(f"Matrix {k} is not an orthogonal projection, residual {res:.3e}")
    return InterpolationProblem.build(projections, xs, ys, "symmetric", tol)


@dataclass(frozen=True)
class NormalityWitness:
    """
    Result of probing T with fixed conjugations: for each sampled unit x, the gap
    |<T*T x, x> - <T T* x, x>|, which vanishes for all x exactly when T is normal, and the conjugations
    fixing x that make T C-symmetric (built only when T is normal).
    """

    gaps: tuple[float, ...]
    conjugations: tuple[Conjugation, ...]
    normal: bool


def is_normal_by_fixed_conjugations(
    t: npt.ArrayLike, samples: int, tol: Tolerances, seed: int = 0
) -> NormalityWitness:
    """
    Test normality of T through conjugations C with C x = x: when T is normal such a C making T
    C-symmetric exists for every x, and every such C also makes T C-normal. For non-normal T the
    C-normal gap at some sampled x separates it.
    """
    t = as_matrix(t, square=True)
    rng = np.random.default_rng(seed)
    dim = t.shape[0]
    gaps, conjugations = [], []
    normal = check_normal(t) <= tol.scaled(fro(t) ** 2)
    for _ in range(samples):
        x = rng.standard_normal(dim) + 1j * rng.standard_normal(dim)
        x /= fro(x)
        gaps.append(abs(np.vdot(x, adjoint(t) @ t @ x) - np.vdot(x, t @ adjoint(t) @ x)))
        if not normal:
            continue
        try:
            cert = construct_symmetric(InterpolationProblem.build([t], [x], [x], "symmetric", tol))
        except (NotNormalError, ProblemError) as exc:
            raise ConstructionError(f"Fixed conjugation for a normal operator failed: {exc}") from exc
        assert cert.conjugation is not None, "A pair x -> x is always interpolable for a normal operator"
        cnormal = relation_residuals(cert.conjugation, t, tol).cnormal
        if cnormal > tol.scaled(fro(t) ** 2):
            raise ConstructionError(f"C-symmetric operator is not C-normal, residual {cnormal:.3e}")
        conjugations.append(cert.conjugation)
    limit = tol.scaled(fro(t) ** 2)
    logger.debug("normality test gaps: %s", gaps)
    return NormalityWitness(tuple(gaps), tuple(conjugations), normal and all(gap <= limit for gap in gaps))
