"""
Module with the representation of antilinear maps h -> m conj(h) and of conjugations
(symmetric unitary m), together with the interpolation and completion routines that every
construction in the package ends in.
"""

import logging
from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np
import numpy.typing as npt
import scipy.linalg as la

from conjugation_solver.config import Tolerances
from conjugation_solver.linalg import (
    CMatrix,
    CVector,
    DimensionError,
    adjoint,
    as_columns,
    as_matrix,
    complement_basis,
    fro,
    hermitian_eig,
    inner,
    pinv,
    qr_orthonormalize,
)
from conjugation_solver.report import Verdict, Violation

logger = logging.getLogger(__name__)


class ConjugationError(ValueError):
    """Raised when a matrix fails to encode a conjugation within tolerance."""


class InconsistentConstraintsError(ValueError):
    """Raised when interpolation constraints admit no conjugation (dependent constraints disagree)."""


class ConjugationReport(NamedTuple):
    """Residuals of the two defining identities of a conjugation."""

    symmetry: float  # ||m - m^T||
    unitarity: float  # ||m m* - I||
    passed: bool


class RelationResiduals(NamedTuple):
    """Residuals of C T C against T*, -T* and of C T T* C against T* T."""

    sym: float
    skew: float
    cnormal: float


@dataclass(frozen=True)
class AntilinearMap:
    """Antilinear map h -> m conj(h) on C^d."""

    m: CMatrix

    def __post_init__(self) -> None:
        object.__setattr__(self, "m", as_matrix(self.m, square=True))

    @property
    def dim(self) -> int:
        """Dimension of the underlying space."""
        return self.m.shape[0]

    def apply(self, h: npt.ArrayLike) -> CVector | CMatrix:
        """Apply to a vector, or column-wise to a matrix of vectors."""
        arr = np.asarray(h, dtype=np.complex128)
        if arr.shape[0] != self.dim:
            raise DimensionError(f"Cannot apply a map of dimension {self.dim} to a vector of dimension {arr.shape[0]}")
        return self.m @ arr.conj()

    def sharp(self) -> "AntilinearMap":
        """The antilinear adjoint: <A h, k> = <A# k, h>."""
        return AntilinearMap(self.m.T.copy())

    def linear_part(self, t: CMatrix) -> CMatrix:
        """Matrix of the linear composite A T A#, i.e. m conj(t) m^T."""
        return self.m @ np.asarray(t).conj() @ self.m.T

    def verify(self, tol: Tolerances) -> ConjugationReport:
        """Check whether the map is a conjugation: m symmetric and unitary."""
        symmetry = fro(self.m - self.m.T)
        unitarity = fro(self.m @ adjoint(self.m) - np.eye(self.dim))
        return ConjugationReport(symmetry, unitarity, symmetry <= tol.residual and unitarity <= tol.residual)


@dataclass(frozen=True)
class Conjugation(AntilinearMap):
    """A conjugation h -> s conj(h): s symmetric unitary, so C^2 = I and <Ch, Ck> = <k, h>."""

    @classmethod
    def from_matrix(cls, s: npt.ArrayLike, tol: Tolerances) -> "Conjugation":
        """Build from a matrix, raising ConjugationError unless it is symmetric unitary."""
        conj = cls(np.asarray(s, dtype=np.complex128))
        if not (report := conj.verify(tol)).passed:
            raise ConjugationError(
                f"Matrix is not a conjugation: ||S - S^T|| = {report.symmetry:.3e}, "
                f"||S S* - I|| = {report.unitarity:.3e}"
            )
        return conj

    @property
    def s(self) -> CMatrix:
        """Symmetric unitary factor."""
        return self.m

    def restricted(self, basis: CMatrix) -> CMatrix:
        """Symmetric unitary factor of the restriction to an invariant subspace, in `basis` coordinates."""
        return adjoint(basis) @ self.m @ basis.conj()


def verify_conjugation(a: AntilinearMap, tol: Tolerances) -> ConjugationReport:
    """Report ||m - m^T|| and ||m m* - I||; passes iff both are within tol.residual."""
    return a.verify(tol)


def sharp(a: AntilinearMap) -> AntilinearMap:
    """Antilinear adjoint of `a`."""
    return a.sharp()


def relation_residuals(c: Conjugation, t: npt.ArrayLike, tol: Tolerances) -> RelationResiduals:
    """Residuals of C T C = T*, C T C = -T* and C T T* C = T* T, with C T C computed as s conj(t) s*."""
    if not (report := c.verify(tol)).passed:
        raise ConjugationError(f"Residuals need a verified conjugation, got {report}")
    t = as_matrix(t, square=True)
    if t.shape[0] != c.dim:
        raise DimensionError(f"Operator of dimension {t.shape[0]} does not match conjugation of dimension {c.dim}")
    ctc = c.s @ t.conj() @ adjoint(c.s)
    ctstc = c.s @ (t @ adjoint(t)).conj() @ adjoint(c.s)
    return RelationResiduals(
        sym=fro(ctc - adjoint(t)),
        skew=fro(ctc + adjoint(t)),
        cnormal=fro(ctstc - adjoint(t) @ t),
    )


def _check_orthogonal_set(vectors: CMatrix, name: str, tol: Tolerances) -> None:
    norms = np.linalg.norm(vectors, axis=0)
    if np.any(norms <= tol.rank):
        raise ValueError(f"Vectors in {name} must be non-zero")
    gram = adjoint(vectors) @ vectors
    off = gram - np.diag(np.diag(gram))
    if off.size and np.max(np.abs(off)) > tol.scaled(float(np.max(norms)) ** 2):
        raise ValueError(f"Vectors in {name} must be pairwise orthogonal")


def zhu_li_interpolate(
    xs: Sequence[npt.ArrayLike] | CMatrix, ys: Sequence[npt.ArrayLike] | CMatrix, tol: Tolerances
) -> "Conjugation | Verdict":
    """
    Find a conjugation with C x_i = y_i for orthogonal sets of equal-norm vectors. Feasible exactly
    when <x_i, y_j> = <x_j, y_i> for all i, j; otherwise an infeasible verdict lists every failing
    index pair.
    """
    x_cols, y_cols = as_columns(xs), as_columns(ys)
    if x_cols.shape[1] == 0:
        raise ValueError("Interpolation needs at least one vector pair")
    if x_cols.shape != y_cols.shape:
        raise DimensionError(f"Vector sets have shapes {x_cols.shape} and {y_cols.shape}")
    _check_orthogonal_set(x_cols, "xs", tol)
    _check_orthogonal_set(y_cols, "ys", tol)
    x_norms, y_norms = np.linalg.norm(x_cols, axis=0), np.linalg.norm(y_cols, axis=0)
    for i, (nx, ny) in enumerate(zip(x_norms, y_norms)):
        if abs(nx - ny) > tol.scaled(max(nx, ny)):
            raise ValueError(f"Norm mismatch for pair {i}: ||x|| = {nx}, ||y|| = {ny}")

    scale = float(np.max(x_norms)) ** 2
    violations = []
    for i in range(x_cols.shape[1]):
        for j in range(i + 1, x_cols.shape[1]):
            lhs, rhs = inner(x_cols[:, i], y_cols[:, j]), inner(x_cols[:, j], y_cols[:, i])
            if abs(lhs - rhs) > tol.scaled(scale):
                violations.append(Violation(kind="gram", i=i, j=j, lhs=lhs, rhs=rhs))
    if violations:
        logger.debug("Zhu-Li Gram test failed on %d pairs", len(violations))
        return Verdict(tuple(violations))
    return complete_partial_conjugation(x_cols, y_cols, tol)


def _polar_unitary(a: CMatrix) -> CMatrix:
    u, _ = la.polar(a)
    return u


def complete_partial_conjugation(
    domain: Sequence[npt.ArrayLike] | CMatrix,
    images: Sequence[npt.ArrayLike] | CMatrix,
    tol: Tolerances,
    dim: int | None = None,
) -> Conjugation:
    """
    Extend the constraints C g_l = h_l (swap-closed here by adding C h_l = g_l) to a conjugation
    on the whole space.

    On V = span{g_l, h_l} the factor is the least-squares solution S0 conj(G) = H, symmetrized and
    re-unitarized through its polar factor; on V-perp the conjugation is entrywise conjugation in a
    computed orthonormal basis B, i.e. the factor B B^T. `dim` is needed only for empty constraint lists.
    """
    g_cols, h_cols = as_columns(domain, dim=dim), as_columns(images, dim=dim)
    if g_cols.shape != h_cols.shape:
        raise DimensionError(f"Domain and image sets have shapes {g_cols.shape} and {h_cols.shape}")
    dim = g_cols.shape[0]

    gs = np.hstack([g_cols, h_cols])
    hs = np.hstack([h_cols, g_cols])
    scale = fro(gs)

    q, rank = qr_orthonormalize(gs, tol, prefix=0)
    if rank == 0:
        return Conjugation(np.eye(dim, dtype=np.complex128))
    g_c, h_c = adjoint(q) @ gs, adjoint(q) @ hs
    s_v = h_c @ pinv(g_c.conj(), tol)
    if (fit := fro(s_v @ g_c.conj() - h_c)) > tol.scaled(scale):
        raise InconsistentConstraintsError(f"Constraints are inconsistent, least-squares residual {fit:.3e}")

    symmetry, unitarity = fro(s_v - s_v.T), fro(s_v @ adjoint(s_v) - np.eye(rank))
    if symmetry > tol.scaled(scale) or unitarity > tol.scaled(scale):
        raise InconsistentConstraintsError(
            f"Constraints admit no conjugation on their span: ||S - S^T|| = {symmetry:.3e}, "
            f"||S S* - I|| = {unitarity:.3e}"
        )
    s_v = _polar_unitary((s_v + s_v.T) / 2)
    s_v = (s_v + s_v.T) / 2
    logger.debug("partial conjugation on rank %d span repaired from %.2e / %.2e", rank, symmetry, unitarity)

    comp = complement_basis(q, dim, tol)
    s = q @ s_v @ q.T + comp @ comp.T
    conj = Conjugation(s)
    if (fit := fro(conj.apply(g_cols) - h_cols)) > tol.scaled(scale):
        raise InconsistentConstraintsError(f"Completed conjugation misses the constraints by {fit:.3e}")
    return conj


def _fixed_points_by_real_parts(c: Conjugation, tol: Tolerances) -> CMatrix:
    """
    Takagi-type factorization S = Z Z^T of a symmetric unitary S: its real and imaginary parts are
    commuting real symmetric matrices, diagonalized together by a real orthogonal O, after which
    S = O diag(e^{i theta}) O^T and Z = O diag(e^{i theta / 2}).
    """
    re, im = c.s.real, c.s.imag
    eigvals, vecs = hermitian_eig(re, tol)
    basis = vecs.real
    start = 0
    columns = []
    while start < len(eigvals):
        stop = start + 1
        while stop < len(eigvals) and eigvals[stop] - eigvals[stop - 1] <= tol.cluster:
            stop += 1
        block = basis[:, start:stop]
        _, sub = hermitian_eig(block.T @ im @ block, tol)
        columns.append(block @ sub.real)
        start = stop
    ortho = np.hstack(columns)
    thetas = np.angle(np.diag(ortho.T @ c.s @ ortho))
    return ortho * np.exp(0.5j * thetas)[np.newaxis, :]


def _fixed_points_by_search(c: Conjugation, tol: Tolerances, rng: np.random.Generator, attempts: int) -> CMatrix:
    """Deflation search: z = h + Ch (or i(h - Ch)) is fixed by C and its orthogonal complement is C-invariant."""
    found: list[CVector] = []
    for _ in range(attempts * c.dim):
        if len(found) == c.dim:
            break
        h = rng.standard_normal(c.dim) + 1j * rng.standard_normal(c.dim)
        if found:
            done = np.column_stack(found)
            h = h - done @ (adjoint(done) @ h)
        ch = c.apply(h)
        z = h + ch
        if fro(z) <= 0.1 * fro(h):
            z = 1j * (h - ch)
        z = z / fro(z)
        if found:
            done = np.column_stack(found)
            z = z - done @ (adjoint(done) @ z)
            z = z / fro(z)
        found.append(z)
    if len(found) < c.dim:
        raise ConjugationError(f"Fixed point search found only {len(found)} of {c.dim} vectors")
    return np.column_stack(found)


def fixed_point_basis(c: Conjugation, tol: Tolerances, seed: int = 0, attempts: int = 64) -> CMatrix:
    """
    Orthonormal basis {z_r} with C z_r = z_r, so that C acts as coefficientwise conjugation in it.
    Tries the real-part diagonalization first and falls back to a seeded deflation search.
    """
    if not (report := c.verify(tol)).passed:
        raise ConjugationError(f"Fixed points need a verified conjugation, got {report}")
    basis = _fixed_points_by_real_parts(c, tol)
    if fro(c.apply(basis) - basis) > tol.scaled(c.dim):
        logger.warning("fixed points by real parts missed by %.3e, using deflation search", fro(c.apply(basis) - basis))
        basis = _fixed_points_by_search(c, tol, np.random.default_rng(seed), attempts)
    return basis


def conjugation_factor(u: npt.ArrayLike, j: Conjugation, tol: Tolerances) -> Conjugation:
    """For a unitary U with J U J = U*, return the conjugation C = J U with U = J C."""
    u = as_matrix(u, square=True)
    if (res := fro(j.linear_part(u) - adjoint(u))) > tol.scaled(fro(u)):
        raise ConjugationError(f"J U J differs from U* by {res:.3e}, U is not of the form J C")
    # C h = J U h = j.s conj(U h) = j.s conj(U) conj(h)
    return Conjugation.from_matrix(j.s @ u.conj(), tol)
