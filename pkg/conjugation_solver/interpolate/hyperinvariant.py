"""
Module deciding whether a subspace is hyperinvariant for a normal matrix, i.e. a sum of its eigenspaces,
and searching for a conjugation C with C N C = N* that moves the subspace when it is not.
"""

import logging
from typing import Sequence

import numpy as np
import numpy.typing as npt

from conjugation_solver.antilinear import Conjugation
from conjugation_solver.config import Tolerances
from conjugation_solver.interpolate.problem import InterpolationProblem
from conjugation_solver.interpolate.symmetric import construct_symmetric
from conjugation_solver.linalg import CMatrix, adjoint, as_columns, as_matrix, fro, qr_orthonormalize
from conjugation_solver.spectral import decompose, random_commutant_unitary

logger = logging.getLogger(__name__)


def _subspace_basis(n: CMatrix, m_basis: Sequence[npt.ArrayLike] | CMatrix, tol: Tolerances) -> CMatrix:
    basis, _ = qr_orthonormalize(as_columns(m_basis, dim=n.shape[0]), tol, prefix=0)
    return basis


def is_hyperinvariant(n: npt.ArrayLike, m_basis: Sequence[npt.ArrayLike] | CMatrix, tol: Tolerances) -> bool:
    """
    True iff the span of `m_basis` is invariant under every operator commuting with the normal N, which
    holds iff its projection commutes with each eigenprojection P and P_M P is either 0 or P.
    """
    n = as_matrix(n, square=True)
    decomp = decompose(n, tol)
    basis = _subspace_basis(n, m_basis, tol)
    p_m = basis @ adjoint(basis)
    for idx, atom in enumerate(decomp.atoms):
        proj = atom.projection()
        prod = p_m @ proj
        if fro(prod - proj @ p_m) > tol.scaled(atom.dim):
            logger.debug("subspace projection does not commute with atom %d", idx)
            return False
        if fro(prod) > tol.scaled(atom.dim) and fro(prod - proj) > tol.scaled(atom.dim):
            logger.debug("subspace cuts atom %d properly", idx)
            return False
    return True


def hyperinvariance_falsifier(
    n: npt.ArrayLike,
    m_basis: Sequence[npt.ArrayLike] | CMatrix,
    trials: int,
    tol: Tolerances,
    seed: int = 0,
) -> Conjugation | None:
    """
    Search for a conjugation C with C N C = N* and C M not contained in M: pick a random unit x in M and
    a random unitary U commuting with N, interpolate C x = U x and keep the first C moving M.
    """
    n = as_matrix(n, square=True)
    decomp = decompose(n, tol)
    basis = _subspace_basis(n, m_basis, tol)
    if basis.shape[1] == 0:
        return None
    rng = np.random.default_rng(seed)
    outside = np.eye(n.shape[0]) - basis @ adjoint(basis)
    for trial in range(trials):
        coeffs = rng.standard_normal(basis.shape[1]) + 1j * rng.standard_normal(basis.shape[1])
        x = basis @ (coeffs / fro(coeffs))
        y = random_commutant_unitary(decomp, rng) @ x
        cert = construct_symmetric(InterpolationProblem.build([n], [x], [y], "symmetric", tol))
        assert cert.conjugation is not None, "Commutant images are always interpolable"
        if (moved := fro(outside @ cert.conjugation.apply(basis))) > tol.scaled(1.0):
            logger.debug("trial %d moves the subspace by %.3e", trial, moved)
            return cert.conjugation
    return None
