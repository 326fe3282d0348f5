"""
Module with the spectral structure of normal matrices and commuting normal families: atoms (joint
eigenspaces), spectral projections for atom selections, reducing subspaces generated by seed vectors,
multiplicities, the normal part of an arbitrary matrix and the skew-symmetry decision for normal matrices.
"""

import logging
from dataclasses import dataclass
from itertools import combinations
from typing import Callable, Iterable, Sequence

import numpy as np
import numpy.typing as npt
import scipy.linalg as la
from scipy.cluster.hierarchy import fclusterdata
from scipy.stats import unitary_group

from conjugation_solver.antilinear import Conjugation
from conjugation_solver.config import Tolerances
from conjugation_solver.linalg import (
    CMatrix,
    DimensionError,
    adjoint,
    as_columns,
    as_matrix,
    fro,
    hermitian_eig,
    qr_orthonormalize,
)
from conjugation_solver.report import Verdict, Violation

logger = logging.getLogger(__name__)

BorelSelector = frozenset[int]


class NotNormalError(ValueError):
    """Raised when an operator is not normal within tolerance."""


class NotCommutingError(ValueError):
    """Raised when members of an operator family do not commute within tolerance."""


class SelectorError(ValueError):
    """Raised when an atom selection refers to atoms that do not exist."""


@dataclass(frozen=True)
class Atom:
    """A joint eigenspace: the common eigenvalue tuple and an orthonormal basis (as columns)."""

    values: tuple[complex, ...]
    basis: CMatrix

    @property
    def value(self) -> complex:
        """Eigenvalue of the first family member, the only one for a single operator."""
        return self.values[0]

    @property
    def dim(self) -> int:
        """Dimension of the eigenspace."""
        return self.basis.shape[1]

    def projection(self) -> CMatrix:
        """Orthogonal projection onto the eigenspace."""
        return self.basis @ adjoint(self.basis)


@dataclass(frozen=True)
class JointSpectralDecomp:
    """Joint atoms of a commuting normal family; atom bases are orthonormal and together complete."""

    family_size: int
    atoms: tuple[Atom, ...]
    source_dim: int

    def __len__(self) -> int:
        return len(self.atoms)

    def select(self, predicate: Callable[[tuple[complex, ...]], bool]) -> BorelSelector:
        """Indices of the atoms whose eigenvalue tuple satisfies `predicate`."""
        return frozenset(idx for idx, atom in enumerate(self.atoms) if predicate(atom.values))

    def everything(self) -> BorelSelector:
        """Selector of all atoms."""
        return frozenset(range(len(self.atoms)))

    def find(self, values: Sequence[complex], tol: Tolerances) -> int | None:
        """Index of the atom whose eigenvalue tuple is within tol.cluster of `values`, if any."""
        for idx, atom in enumerate(self.atoms):
            if max(abs(a - b) for a, b in zip(atom.values, values)) <= tol.cluster:
                return idx
        return None

    def projection(self, sel: Iterable[int]) -> CMatrix:
        """Sum of the orthogonal projections of the selected atoms."""
        sel = frozenset(sel)
        if bad := sorted(idx for idx in sel if not 0 <= idx < len(self.atoms)):
            raise SelectorError(f"Selector refers to atoms {bad}, decomposition has {len(self.atoms)}")
        out = np.zeros((self.source_dim, self.source_dim), dtype=np.complex128)
        for idx in sel:
            out += self.atoms[idx].projection()
        return out


@dataclass(frozen=True)
class SpectralDecomp(JointSpectralDecomp):
    """Atoms of a single normal matrix."""

    @property
    def eigenvalues(self) -> list[complex]:
        """Atom eigenvalues in atom order."""
        return [atom.value for atom in self.atoms]


def check_normal(n: npt.ArrayLike, tol: Tolerances | None = None) -> float:  # pylint: disable=unused-argument
    """Return ||N N* - N* N||_F."""
    n = as_matrix(n, square=True)
    return fro(n @ adjoint(n) - adjoint(n) @ n)


def _require_normal(n: CMatrix, tol: Tolerances, name: str = "operator") -> None:
    if (res := check_normal(n)) > tol.scaled(fro(n) ** 2):
        raise NotNormalError(f"The {name} is not normal, ||N N* - N* N|| = {res:.3e}")


def check_commuting(family: Sequence[CMatrix], tol: Tolerances) -> None:
    """Raise NotCommutingError unless the family pairwise commutes within tolerance."""
    for (k, a), (l, b) in combinations(enumerate(family), 2):
        if (res := fro(a @ b - b @ a)) > tol.scaled(fro(a) * fro(b)):
            raise NotCommutingError(f"Operators {k} and {l} do not commute, ||N_k N_l - N_l N_k|| = {res:.3e}")


def _split_sorted(values: npt.NDArray[np.float64], tol: Tolerances) -> list[slice]:
    """Single-linkage groups of an ascending sequence: consecutive gaps above tol.cluster split groups."""
    groups, start = [], 0
    for idx in range(1, len(values) + 1):
        if idx == len(values) or values[idx] - values[idx - 1] > tol.cluster:
            groups.append(slice(start, idx))
            start = idx
    return groups


def _eigenspaces(n: CMatrix, tol: Tolerances) -> list[CMatrix]:
    """
    Eigenspace bases of a normal matrix from its commuting hermitian parts: diagonalize the real part,
    then split each of its eigenspaces by the compressed imaginary part.
    """
    re_part, im_part = (n + adjoint(n)) / 2, (n - adjoint(n)) / 2j
    re_vals, re_vecs = hermitian_eig(re_part, tol)
    spaces = []
    for group in _split_sorted(re_vals, tol):
        block = re_vecs[:, group]
        im_vals, im_vecs = hermitian_eig(adjoint(block) @ im_part @ block, tol)
        spaces.extend(block @ im_vecs[:, sub] for sub in _split_sorted(im_vals, tol))
    return spaces


def _projected_mean(n: CMatrix, basis: CMatrix) -> complex:
    return complex(np.trace(adjoint(basis) @ n @ basis)) / basis.shape[1]


def _merge_close(bases: list[CMatrix], values: list[tuple[complex, ...]], tol: Tolerances) -> list[CMatrix]:
    """Merge eigenspaces whose eigenvalue tuples are linked within tol.cluster (single linkage)."""
    if len(bases) < 2:
        return bases
    points = np.array([[part for val in vals for part in (val.real, val.imag)] for vals in values])
    labels = fclusterdata(points, t=tol.cluster, criterion="distance", method="single", metric="chebyshev")
    merged: dict[int, list[CMatrix]] = {}
    for label, basis in zip(labels, bases):
        merged.setdefault(int(label), []).append(basis)
    return [np.hstack(parts) for parts in merged.values()]


def _build_atoms(family: Sequence[CMatrix], bases: list[CMatrix]) -> tuple[Atom, ...]:
    atoms = [Atom(tuple(_projected_mean(op, basis) for op in family), basis) for basis in bases]
    atoms.sort(key=lambda atom: [(round(val.real, 12), round(val.imag, 12)) for val in atom.values])
    return tuple(atoms)


def decompose(n: npt.ArrayLike, tol: Tolerances) -> SpectralDecomp:
    """
    Spectral decomposition of a normal matrix into atoms; eigenvalues within tol.cluster are merged
    and each atom carries the projected mean trace(B* N B) / dim B as its eigenvalue.
    """
    n = as_matrix(n, square=True)
    _require_normal(n, tol)
    bases = _eigenspaces(n, tol)
    bases = _merge_close(bases, [(_projected_mean(n, b),) for b in bases], tol)
    atoms = _build_atoms([n], bases)
    logger.debug("decomposed %dx%d normal matrix into %d atoms", *n.shape, len(atoms))
    return SpectralDecomp(family_size=1, atoms=atoms, source_dim=n.shape[0])


def joint_decompose(family: Sequence[npt.ArrayLike], tol: Tolerances) -> JointSpectralDecomp:
    """
    Joint atoms of a commuting normal family by recursive refinement: decompose the first member,
    then split every atom by the compression of the next member onto it, and so on.
    """
    if not family:
        raise ValueError("Operator family must not be empty")
    mats = [as_matrix(op, square=True) for op in family]
    if len({m.shape for m in mats}) != 1:
        raise DimensionError(f"Family members have shapes {[m.shape for m in mats]}")
    for k, mat in enumerate(mats):
        _require_normal(mat, tol, name=f"operator {k}")
    check_commuting(mats, tol)

    bases = [atom.basis for atom in decompose(mats[0], tol).atoms]
    for mat in mats[1:]:
        refined = []
        for basis in bases:
            compressed = adjoint(basis) @ mat @ basis
            refined.extend(basis @ sub for sub in _eigenspaces(compressed, tol))
        bases = refined
    bases = _merge_close(bases, [tuple(_projected_mean(m, b) for m in mats) for b in bases], tol)
    atoms = _build_atoms(mats, bases)
    logger.debug("joint decomposition of %d operators has %d atoms", len(mats), len(atoms))
    return JointSpectralDecomp(family_size=len(mats), atoms=atoms, source_dim=mats[0].shape[0])


def projection(d: JointSpectralDecomp, sel: Iterable[int]) -> CMatrix:
    """Spectral projection of an atom selection."""
    return d.projection(sel)


def orbit_subspace(d: JointSpectralDecomp, seeds: Sequence[npt.ArrayLike] | CMatrix, tol: Tolerances) -> CMatrix:
    """
    Orthonormal basis (as columns) of the smallest reducing subspace containing the seeds, which at
    finite dimension is span{Q_a x} over atom projections Q_a and seeds x. The normalized seeds lead
    the basis when they are mutually orthogonal.
    """
    cols = as_columns(seeds, dim=d.source_dim)
    norms = np.linalg.norm(cols, axis=0)
    if np.any(norms <= tol.rank):
        raise ValueError("Orbit seeds must be non-zero")
    if cols.shape[1] == 0:
        return cols
    normalized = cols / norms[np.newaxis, :]
    pieces = [atom.basis @ (adjoint(atom.basis) @ cols) for atom in d.atoms]
    basis, rank = qr_orthonormalize(np.hstack([normalized, *pieces]), tol)
    logger.debug("orbit of %d seeds has dimension %d", cols.shape[1], rank)
    return basis


def multiplicity_map(d: JointSpectralDecomp) -> dict[complex, int] | dict[tuple[complex, ...], int]:
    """Atom dimensions keyed by eigenvalue (single operator) or eigenvalue tuple (family)."""
    if d.family_size == 1:
        return {atom.value: atom.dim for atom in d.atoms}
    return {atom.values: atom.dim for atom in d.atoms}


def negation_partner(d: JointSpectralDecomp, idx: int, tol: Tolerances) -> int | None:
    """Index of the atom at the negated eigenvalue; atoms within tol.cluster of zero pair with themselves."""
    values = d.atoms[idx].values
    if max(abs(val) for val in values) <= tol.cluster:
        return idx
    return d.find([-val for val in values], tol)


def multiplicity_violations(d: JointSpectralDecomp, tol: Tolerances) -> Verdict:
    """Atoms whose negated eigenvalue is missing or carries a different multiplicity."""
    violations = []
    for idx, atom in enumerate(d.atoms):
        partner = negation_partner(d, idx, tol)
        partner_dim = 0 if partner is None else d.atoms[partner].dim
        if partner_dim != atom.dim:
            violations.append(
                Violation(
                    kind="multiplicity",
                    atom=idx,
                    lhs=complex(atom.dim),
                    rhs=complex(partner_dim),
                    value=atom.value,
                )
            )
    return Verdict(tuple(violations))


def skew_witness(d: JointSpectralDecomp, tol: Tolerances) -> Conjugation:
    """
    Conjugation with C N C = -N* for a decomposition with symmetric multiplicities: an orthonormal
    basis {a_r} of each atom is swapped with a basis {b_r} of its negated partner, and the zero atom is
    conjugated entrywise, giving S = B A^T + A B^T + K K^T.
    """
    s = np.zeros((d.source_dim, d.source_dim), dtype=np.complex128)
    for idx, atom in enumerate(d.atoms):
        partner = negation_partner(d, idx, tol)
        assert partner is not None and d.atoms[partner].dim == atom.dim, f"Atom {idx} has no matching partner"
        if partner == idx:
            s += atom.basis @ atom.basis.T
        elif idx < partner:
            other = d.atoms[partner].basis
            s += other @ atom.basis.T + atom.basis @ other.T
    return Conjugation.from_matrix(s, tol)


def is_skew_symmetric_normal(n: npt.ArrayLike, tol: Tolerances) -> tuple[bool, Conjugation | Verdict]:
    """
    Decide whether a normal matrix is skew-symmetric with respect to some conjugation, which holds iff
    mult(lambda) = mult(-lambda) for every eigenvalue. Returns the witness conjugation when it is, and the
    multiplicity mismatches otherwise.
    """
    d = decompose(n, tol)
    if not (verdict := multiplicity_violations(d, tol)):
        logger.debug("not skew-symmetric: %s", ", ".join(str(v) for v in verdict.violations))
        return False, verdict
    return True, skew_witness(d, tol)


def normal_part(t: npt.ArrayLike, tol: Tolerances) -> CMatrix:
    """
    Orthonormal basis of the largest reducing subspace on which T is normal: the common kernel of
    T*^n T^m - T^m T*^n for 1 <= n, m <= dim.
    """
    t = as_matrix(t, square=True)
    dim = t.shape[0]
    if (norm := fro(t)) == 0.0:
        return np.eye(dim, dtype=np.complex128)
    t = t / norm
    t_star = adjoint(t)
    powers, star_powers = [t], [t_star]
    for _ in range(dim - 1):
        powers.append(powers[-1] @ t)
        star_powers.append(star_powers[-1] @ t_star)
    stacked = np.vstack([tn_star @ tm - tm @ tn_star for tn_star in star_powers for tm in powers])
    _, sing, vh = la.svd(stacked)
    basis = adjoint(vh[int(np.sum(sing > tol.rank)) :])
    logger.debug("normal part has dimension %d of %d", basis.shape[1], dim)
    return basis


def random_commutant_unitary(d: JointSpectralDecomp, rng: np.random.Generator) -> CMatrix:
    """Random unitary commuting with the decomposed family: an independent Haar unitary on every atom."""
    out = np.zeros((d.source_dim, d.source_dim), dtype=np.complex128)
    for atom in d.atoms:
        if atom.dim == 1:
            block = np.exp(2j * np.pi * rng.uniform()) * np.ones((1, 1))
        else:
            block = unitary_group.rvs(atom.dim, random_state=rng)
        out += atom.basis @ block @ adjoint(atom.basis)
    return out
