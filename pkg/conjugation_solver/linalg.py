"""
Dense complex linear algebra kernels shared by every other module: orthonormalization
with rank detection, hermitian eigendecomposition, pseudoinverse, rank-one operators
and vector-to-vector unitaries.

Vectors are 1-D complex128 arrays; lists of vectors and orthonormal bases are 2-D arrays
whose columns are the vectors.
"""

import logging
from typing import Sequence

import numpy as np
import numpy.typing as npt
import scipy.linalg as la

from conjugation_solver.config import Tolerances

logger = logging.getLogger(__name__)

CVector = npt.NDArray[np.complex128]
CMatrix = npt.NDArray[np.complex128]


class DimensionError(ValueError):
    """Raised when operands do not share a dimension."""


class NotHermitianError(ValueError):
    """Raised when a hermitian routine receives a matrix that is not hermitian within tolerance."""


def as_vector(h: npt.ArrayLike) -> CVector:
    """Coerce to a finite 1-D complex vector."""
    vec = np.asarray(h, dtype=np.complex128)
    if vec.ndim != 1:
        raise DimensionError(f"Expected a vector, got an array of shape {vec.shape}")
    if not np.all(np.isfinite(vec)):
        raise ValueError("Vector entries must be finite")
    return vec


def as_matrix(a: npt.ArrayLike, square: bool = False) -> CMatrix:
    """Coerce to a finite 2-D complex matrix."""
    mat = np.asarray(a, dtype=np.complex128)
    if mat.ndim != 2 or 0 in mat.shape:
        raise DimensionError(f"Expected a non-empty matrix, got an array of shape {mat.shape}")
    if square and mat.shape[0] != mat.shape[1]:
        raise DimensionError(f"Expected a square matrix, got shape {mat.shape}")
    if not np.all(np.isfinite(mat)):
        raise ValueError("Matrix entries must be finite")
    return mat


def as_columns(vectors: Sequence[npt.ArrayLike] | npt.ArrayLike, dim: int | None = None) -> CMatrix:
    """
    Stack a sequence of vectors into the columns of a matrix. A 2-D array is taken to be
    already column-stacked. `dim` fixes the row count so that empty sequences give (dim, 0).
    """
    if isinstance(vectors, np.ndarray) and vectors.ndim == 2:
        cols = vectors.astype(np.complex128)
    else:
        vecs = [as_vector(v) for v in vectors]  # type: ignore[union-attr]
        if not vecs:
            return np.zeros((dim or 0, 0), dtype=np.complex128)
        if len({v.shape[0] for v in vecs}) != 1:
            raise DimensionError(f"Vectors have mismatched dimensions {[v.shape[0] for v in vecs]}")
        cols = np.column_stack(vecs)
    if dim is not None and cols.shape[0] != dim:
        raise DimensionError(f"Vectors have dimension {cols.shape[0]}, expected {dim}")
    return cols


def adjoint(a: CMatrix) -> CMatrix:
    """Conjugate transpose."""
    return a.conj().T


def fro(a: npt.ArrayLike) -> float:
    """Frobenius norm (Euclidean norm for vectors)."""
    return float(np.linalg.norm(a))


def inner(h: CVector, k: CVector) -> complex:
    """Inner product <h, k>, linear in the first argument."""
    return complex(np.vdot(k, h))


def is_orthonormal(basis: CMatrix, tol: Tolerances) -> bool:
    """Check |<b_i, b_j> - delta_ij| <= tol.residual for all columns."""
    if basis.shape[1] == 0:
        return True
    gram = adjoint(basis) @ basis
    return bool(np.max(np.abs(gram - np.eye(basis.shape[1]))) <= tol.residual)


def _orthonormal_prefix_length(cols: CMatrix, tol: Tolerances) -> int:
    length = 0
    while length < cols.shape[1] and is_orthonormal(cols[:, : length + 1], tol):
        length += 1
    return length


def qr_orthonormalize(
    vectors: Sequence[npt.ArrayLike] | CMatrix, tol: Tolerances, prefix: int | None = None
) -> tuple[CMatrix, int]:
    """
    Return an orthonormal basis (as columns) of the span of `vectors` and its rank.

    The first `prefix` vectors are kept verbatim when they are orthonormal; if `prefix` is None,
    the longest leading orthonormal run is detected and kept. The remaining vectors are projected
    off that prefix and reduced with column-pivoted Householder QR, with rank decided relative to
    the largest input column norm.
    """
    cols = as_columns(vectors)
    if cols.shape[1] == 0:
        return cols, 0

    if prefix is None:
        prefix = _orthonormal_prefix_length(cols, tol)
    elif not is_orthonormal(cols[:, :prefix], tol):
        raise ValueError(f"Designated prefix of {prefix} vectors is not orthonormal")

    head, rest = cols[:, :prefix], cols[:, prefix:]
    threshold = tol.rank * max(float(np.max(np.linalg.norm(cols, axis=0))), 1.0)

    # two projection passes keep the new directions orthogonal to the head at working precision
    for _ in range(2):
        rest = rest - head @ (adjoint(head) @ rest)
    if rest.shape[1] == 0:
        return head, prefix

    q, r, _ = la.qr(rest, mode="economic", pivoting=True)
    diag = np.abs(np.diag(r))
    new_rank = int(np.sum(diag > threshold))
    tail = q[:, :new_rank]

    # pin the phase so that each new vector has a positive component along its pivot column
    phases = np.diag(r)[:new_rank]
    tail = tail * (phases / np.abs(phases))[np.newaxis, :]

    # reorthogonalize against the head and earlier columns without changing directions
    for _ in range(2):
        for k in range(new_rank):
            done = np.hstack([head, tail[:, :k]])
            col = tail[:, k] - done @ (adjoint(done) @ tail[:, k])
            tail[:, k] = col / np.linalg.norm(col)

    basis = np.hstack([head, tail])
    logger.debug("orthonormalized %d vectors into rank %d (kept prefix of %d)", cols.shape[1], basis.shape[1], prefix)
    return basis, basis.shape[1]


def complement_basis(basis: CMatrix, dim: int, tol: Tolerances) -> CMatrix:
    """Orthonormal basis of the orthogonal complement of the span of `basis` columns in C^dim."""
    if basis.shape[1] == 0:
        return np.eye(dim, dtype=np.complex128)
    return la.null_space(adjoint(basis), rcond=tol.rank).astype(np.complex128)


def hermitian_eig(a: npt.ArrayLike, tol: Tolerances) -> tuple[npt.NDArray[np.float64], CMatrix]:
    """
    Eigendecomposition of a hermitian matrix: ascending real eigenvalues and a unitary
    matrix of eigenvectors with A V = V diag(lambda).
    """
    mat = as_matrix(a, square=True)
    asym = fro(mat - adjoint(mat))
    if asym > tol.scaled(fro(mat)):
        raise NotHermitianError(f"Matrix is not hermitian, ||A - A*|| = {asym:.3e}")
    eigvals, eigvecs = la.eigh((mat + adjoint(mat)) / 2)
    return eigvals, eigvecs.astype(np.complex128)


def pinv(a: npt.ArrayLike, tol: Tolerances) -> CMatrix:
    """Moore-Penrose pseudoinverse; singular values below tol.rank * sigma_max are treated as zero."""
    mat = np.asarray(a, dtype=np.complex128)
    if mat.size == 0:
        return np.zeros(mat.shape[::-1], dtype=np.complex128)
    return la.pinv(mat, atol=0.0, rtol=tol.rank)


def rank_one(x: npt.ArrayLike, y: npt.ArrayLike) -> CMatrix:
    """The operator x (x) y : h -> <h, y> x."""
    x, y = as_vector(x), as_vector(y)
    if x.shape != y.shape:
        raise DimensionError(f"Rank-one factors have dimensions {x.shape[0]} and {y.shape[0]}")
    return np.outer(x, y.conj())


def _householder(u: CVector) -> tuple[CMatrix, complex]:
    """Hermitian unitary reflector R and scalar alpha with R u = alpha e_1, |alpha| = ||u||."""
    norm = fro(u)
    lead = u[0]
    phase = lead / abs(lead) if abs(lead) > 0 else 1.0
    alpha = -phase * norm
    w = u.copy()
    w[0] -= alpha
    dim = u.shape[0]
    if fro(w) == 0.0:
        return np.eye(dim, dtype=np.complex128), complex(u[0])
    return np.eye(dim, dtype=np.complex128) - 2 * np.outer(w, w.conj()) / np.vdot(w, w), complex(alpha)


def unitary_mapping(u: npt.ArrayLike, v: npt.ArrayLike, tol: Tolerances) -> CMatrix:
    """
    Deterministic unitary U with U u = v for vectors of equal norm, composed of two Householder
    reflections and a phase on e_1. Returns the identity when both vectors vanish.
    """
    u, v = as_vector(u), as_vector(v)
    if u.shape != v.shape:
        raise DimensionError(f"Cannot map a vector of dimension {u.shape[0]} to one of dimension {v.shape[0]}")
    nu, nv = fro(u), fro(v)
    if abs(nu - nv) > tol.scaled(max(nu, nv)):
        raise ValueError(f"Unitary mapping needs equal norms, got {nu} and {nv}")
    if min(nu, nv) <= tol.rank:
        return np.eye(u.shape[0], dtype=np.complex128)
    r_u, alpha = _householder(u)
    r_v, beta = _householder(v)
    phase = np.eye(u.shape[0], dtype=np.complex128)
    phase[0, 0] = beta / alpha
    return r_v @ phase @ r_u
