"""
Module solving the system sum_k phi_ik(z) f_k(z) = g_i(z) for fields of n x n unitary matrices over a
discrete measure, in the unitary class and in the symmetric class with phi(-z) = phi(z)^T.

Functions in L^2(mu) are stored in weighted coordinates v_a = sqrt(w_a) h(z_a), atom-major, so the
multiplication operator by z and the parity-time conjugation h(z) -> conj(h(-z)) act on plain C^(m n).
"""

import logging
from dataclasses import dataclass
from typing import Sequence

import numpy as np
import numpy.typing as npt
import scipy.linalg as la

from conjugation_solver.antilinear import Conjugation, conjugation_factor
from conjugation_solver.config import Tolerances
from conjugation_solver.interpolate import ConstructionError, InterpolationProblem, construct_skew
from conjugation_solver.linalg import CMatrix, CVector, adjoint, as_matrix, fro, unitary_mapping
from conjugation_solver.report import Verdict, Violation

logger = logging.getLogger(__name__)


class MeasureError(ValueError):
    """Raised for invalid discrete measures, or non-symmetric ones where symmetry is required."""


class FieldExtractionError(ValueError):
    """Raised when a constructed operator does not split into per-atom blocks."""


@dataclass(frozen=True)
class DiscreteMeasure:
    """Atomic measure sum_a w_a delta(z_a) with positive weights."""

    points: CVector
    weights: npt.NDArray[np.float64]

    def __post_init__(self) -> None:
        points = np.asarray(self.points, dtype=np.complex128).reshape(-1)
        weights = np.asarray(self.weights, dtype=np.float64).reshape(-1)
        if points.shape != weights.shape or points.size == 0:
            raise MeasureError(f"Need one weight per atom, got {points.size} points and {weights.size} weights")
        if not np.all(weights > 0):
            raise MeasureError("Atom weights must be positive")
        object.__setattr__(self, "points", points)
        object.__setattr__(self, "weights", weights)

    @classmethod
    def from_atoms(cls, atoms: Sequence[tuple[complex, float]], tol: Tolerances) -> "DiscreteMeasure":
        """Build from (point, weight) pairs, requiring points separated by more than tol.cluster."""
        mu = cls(np.array([z for z, _ in atoms], dtype=np.complex128), np.array([w for _, w in atoms]))
        mu.check_distinct(tol)
        return mu

    def __len__(self) -> int:
        return self.points.size

    def check_distinct(self, tol: Tolerances) -> None:
        """Raise MeasureError when two atoms are within tol.cluster."""
        gaps = np.abs(self.points[:, np.newaxis] - self.points[np.newaxis, :]) + np.diag(np.full(len(self), np.inf))
        if np.any(gaps <= tol.cluster):
            a, b = np.argwhere(gaps <= tol.cluster)[0]
            raise MeasureError(f"Atoms {a} and {b} at {self.points[a]} and {self.points[b]} are not distinct")

    def scaled(self, factor: float) -> "DiscreteMeasure":
        """Same atoms with all weights multiplied by a positive factor."""
        return DiscreteMeasure(self.points, self.weights * factor)


@dataclass(frozen=True)
class FunctionTable:
    """Values of n functions at the atoms of a measure, one row per atom."""

    values: CMatrix

    def __post_init__(self) -> None:
        object.__setattr__(self, "values", as_matrix(self.values))

    @property
    def n(self) -> int:
        """Number of functions."""
        return self.values.shape[1]

    def at(self, atom: int) -> CVector:
        """Vector (f_1(z), ..., f_n(z)) at an atom."""
        return self.values[atom]


@dataclass(frozen=True)
class UField:
    """Field of n x n matrices, one block per atom, stored as an array of shape (atoms, n, n)."""

    blocks: npt.NDArray[np.complex128]

    @classmethod
    def identity(cls, atoms: int, n: int) -> "UField":
        """The constant identity field."""
        return cls(np.tile(np.eye(n, dtype=np.complex128), (atoms, 1, 1)))

    def operator(self) -> CMatrix:
        """Block-diagonal multiplication operator of the field on C^(atoms n)."""
        atoms, n, _ = self.blocks.shape
        out = np.zeros((atoms * n, atoms * n), dtype=np.complex128)
        for a in range(atoms):
            out[a * n : (a + 1) * n, a * n : (a + 1) * n] = self.blocks[a]
        return out


@dataclass(frozen=True)
class FieldReport:
    """Largest per-atom residuals of a field against the system, unitarity and (optionally) parity."""

    equation: float
    unitarity: float
    parity: float | None
    passed: bool


def _check_shapes(mu: DiscreteMeasure, f: FunctionTable, g: FunctionTable) -> None:
    if f.values.shape != g.values.shape:
        raise ValueError(f"Function tables have shapes {f.values.shape} and {g.values.shape}")
    if f.values.shape[0] != len(mu):
        raise ValueError(f"Function tables have {f.values.shape[0]} rows for a measure with {len(mu)} atoms")


def _norm_violations(mu: DiscreteMeasure, f: FunctionTable, g: FunctionTable, tol: Tolerances) -> list[Violation]:
    out = []
    for a in range(len(mu)):
        nf2, ng2 = float(np.sum(np.abs(f.at(a)) ** 2)), float(np.sum(np.abs(g.at(a)) ** 2))
        if abs(nf2 - ng2) > tol.residual * (1 + nf2):
            out.append(Violation(kind="norm", atom=a, lhs=complex(nf2), rhs=complex(ng2), value=complex(mu.points[a])))
    return out


def _rescaled(fz: CVector, gz: CVector) -> CVector:
    """g(z) moved to the norm of f(z) along its own direction; f(z) itself where g(z) vanishes."""
    ng = fro(gz)
    return gz * (fro(fz) / ng) if ng > 0 else fz.copy()


def _pair_rotation(fa: CVector, ga: CVector, fp: CVector, gp: CVector) -> CMatrix:
    """
    Unitary A minimizing ||A f(z) - g(z)||^2 + ||A^T f(-z) - g(-z)||^2. The second term equals
    ||A conj(g(-z)) - conj(f(-z))||^2, so this is a Procrustes fit solved by a polar factor.
    """
    x, y = np.column_stack([fa, gp.conj()]), np.column_stack([ga, fp.conj()])
    a, _ = la.polar(y @ adjoint(x))
    return a


def nearest_solvable(f: FunctionTable, g: FunctionTable, pairing: Sequence[int | None] | None = None) -> FunctionTable:
    """
    The right-hand side closest to g that the system solves exactly: per atom in the unitary class, per
    parity pair (given `pairing`) in the symmetric class. Equals g whenever g is exactly solvable.
    """
    out = np.empty_like(g.values)
    for a in range(g.values.shape[0]):
        p = a if pairing is None else pairing[a]
        if p is None:
            raise MeasureError(f"Atom {a} has no parity partner")
        if p == a:
            out[a] = _rescaled(f.at(a), g.at(a))
        elif a < p:
            rot = _pair_rotation(f.at(a), g.at(a), f.at(p), g.at(p))
            out[a], out[p] = rot @ f.at(a), rot.T @ f.at(p)
    return FunctionTable(out)


def _block(fz: CVector, gz: CVector, tol: Tolerances) -> CMatrix:
    nf = fro(fz)
    if nf == 0.0:
        return np.eye(fz.size, dtype=np.complex128)
    return unitary_mapping(fz / nf, gz / nf, tol)


def solve_ufield(mu: DiscreteMeasure, f: FunctionTable, g: FunctionTable, tol: Tolerances) -> UField | Verdict:
    """
    Unitary field with U(z) f(z) = g(z) at every atom, which exists iff sum |f_k(z)|^2 = sum |g_k(z)|^2
    everywhere; each block is a phase-pinned two-reflection unitary, the identity where f vanishes.

    Norms accepted as equal within tolerance are matched exactly first, so U(z) f(z) misses g(z) by
    no more than the norm gap.
    """
    _check_shapes(mu, f, g)
    if violations := _norm_violations(mu, f, g, tol):
        return Verdict(tuple(violations))
    target = nearest_solvable(f, g)
    return UField(np.stack([_block(f.at(a), target.at(a), tol) for a in range(len(mu))]))


def pair_atoms(mu: DiscreteMeasure, tol: Tolerances) -> list[int | None]:
    """For each atom, the index of the atom at the negated point (itself at the origin), None if missing."""
    out: list[int | None] = []
    for z in mu.points:
        if abs(z) <= tol.cluster:
            out.append(int(np.argmin(np.abs(mu.points))))
            continue
        dist = np.abs(mu.points + z)
        out.append(int(np.argmin(dist)) if np.min(dist) <= tol.cluster else None)
    return out


def is_symmetric_measure(mu: DiscreteMeasure, tol: Tolerances) -> bool:
    """True iff atoms come in (z, -z) pairs of equal weight, the origin pairing with itself."""
    for a, partner in enumerate(pair_atoms(mu, tol)):
        if partner is None or abs(mu.weights[a] - mu.weights[partner]) > tol.scaled(mu.weights[a]):
            return False
    return True


def _parity_permutation(mu: DiscreteMeasure, n: int, tol: Tolerances) -> CMatrix:
    """Permutation P of C^(m n) with (P v)_a = v_pi(a) for the parity pairing pi; J v = P conj(v)."""
    pairing = pair_atoms(mu, tol)
    perm = np.zeros((len(mu), len(mu)))
    for a, partner in enumerate(pairing):
        assert partner is not None, f"Atom {a} has no parity partner"
        perm[a, partner] = 1.0
    return np.kron(perm, np.eye(n)).astype(np.complex128)


def _parity_violations(
    mu: DiscreteMeasure, f: FunctionTable, g: FunctionTable, pairing: Sequence[int | None], tol: Tolerances
) -> list[Violation]:
    out = []
    for a, partner in enumerate(pairing):
        assert partner is not None
        lhs, rhs = complex(f.at(a) @ g.at(partner)), complex(f.at(partner) @ g.at(a))
        scale = 1 + float(np.sum(np.abs(f.at(a)) ** 2) + np.sum(np.abs(f.at(partner)) ** 2))
        if abs(lhs - rhs) > tol.residual * scale:
            out.append(Violation(kind="pt_parity", atom=a, lhs=lhs, rhs=rhs, value=complex(mu.points[a])))
    return out


def _weighted(mu: DiscreteMeasure, table: FunctionTable) -> CVector:
    return (np.sqrt(mu.weights)[:, np.newaxis] * table.values).reshape(-1)


def solve_sufield(mu: DiscreteMeasure, f: FunctionTable, g: FunctionTable, tol: Tolerances) -> UField | Verdict:
    """
    Field in the symmetric class (unitary with U(-z) = U(z)^T) solving the system. It exists iff at every
    atom the norms agree and sum f_k(z) g_k(-z) = sum f_k(-z) g_k(z).

    Construction: with M the multiplication by z (tensor I_n) and J the parity-time conjugation, find a
    conjugation C with C M C = -M* and C F = J G, then U = J C commutes with M and is read off blockwise.
    G is the nearest exactly solvable right-hand side and both sides are normalized together, so the
    interpolation step sees unit-scale data however small f and g are.
    """
    _check_shapes(mu, f, g)
    mu.check_distinct(tol)
    if not is_symmetric_measure(mu, tol):
        raise MeasureError("Symmetric fields need a symmetric measure")

    pairing = pair_atoms(mu, tol)
    if violations := _norm_violations(mu, f, g, tol) + _parity_violations(mu, f, g, pairing, tol):
        return Verdict(tuple(violations))

    atoms, n = len(mu), f.n
    x = _weighted(mu, f)
    # f = 0 forces the target to vanish too
    if (scale := fro(x)) == 0.0:
        return UField.identity(atoms, n)

    parity = _parity_permutation(mu, n, tol)
    j = Conjugation.from_matrix(parity, tol)
    mult = np.kron(np.diag(mu.points), np.eye(n))
    y = j.apply(_weighted(mu, nearest_solvable(f, g, pairing)))
    problem = InterpolationProblem.build([mult], [x / scale], [y / scale], "skew", tol)
    cert = construct_skew(problem)
    if cert.conjugation is None:
        raise ConstructionError(f"Pointwise conditions hold but the skew interpolation failed: {cert.violations[0]}")

    # U h = J C h = P conj(S conj(h)) = P conj(S) h
    u = parity @ cert.conjugation.s.conj()
    conjugation_factor(u, j, tol)
    field = UField(np.stack([u[a * n : (a + 1) * n, a * n : (a + 1) * n] for a in range(atoms)]))
    if (off := fro(u - field.operator())) > tol.scaled(fro(u)):
        raise FieldExtractionError(f"Constructed operator has off-block mass {off:.3e}, atoms are not separated")
    logger.debug("symmetric field over %d atoms with n = %d extracted", atoms, n)
    return field


def verify_ufield(
    mu: DiscreteMeasure, f: FunctionTable, g: FunctionTable, field: UField, symmetric: bool, tol: Tolerances
) -> FieldReport:
    """
    Largest residuals of U(z) f(z) - g(z), U(z) U(z)* - I and, if `symmetric`, U(z) - U(-z)^T.

    The equation residual is measured against the least one any field of the class can reach, per atom
    or per parity pair, since data accepted as solvable within tolerance may still miss by a norm gap.
    The field only passes when the data itself is solvable.
    """
    _check_shapes(mu, f, g)
    if field.blocks.shape != (len(mu), f.n, f.n):
        raise ValueError(f"Field has block shape {field.blocks.shape}, expected {(len(mu), f.n, f.n)}")
    pairing: list[int | None] | None = None
    if symmetric:
        if not is_symmetric_measure(mu, tol):
            raise MeasureError("Parity check needs a symmetric measure")
        pairing = pair_atoms(mu, tol)

    target = nearest_solvable(f, g, pairing)
    misses = np.array([fro(field.blocks[a] @ f.at(a) - g.at(a)) for a in range(len(mu))])
    least = np.array([fro(target.at(a) - g.at(a)) for a in range(len(mu))])
    partners = range(len(mu)) if pairing is None else [a if p is None else p for a, p in enumerate(pairing)]
    groups = [[a] if p == a else [a, p] for a, p in enumerate(partners)]
    equation = max(max(fro(misses[grp]) - fro(least[grp]), 0.0) for grp in groups)
    unitarity = max(fro(block @ adjoint(block) - np.eye(f.n)) for block in field.blocks)
    scale = float(max(np.max(np.abs(f.values)), np.max(np.abs(g.values))))
    passed = equation <= tol.scaled(scale) and unitarity <= tol.residual and not _norm_violations(mu, f, g, tol)
    parity = None
    if pairing is not None:
        parity = max(fro(field.blocks[a] - field.blocks[p].T) for a, p in enumerate(pairing) if p is not None)
        passed = passed and parity <= tol.residual and not _parity_violations(mu, f, g, pairing, tol)
    return FieldReport(equation, unitarity, parity, passed)
