import itertools

import numpy as np
import pytest
import scipy.linalg as la
from conftest import engineered_normal, random_unitary
from hypothesis import given, settings
from hypothesis import strategies as st

from conjugation_solver.antilinear import relation_residuals
from conjugation_solver.config import Tolerances
from conjugation_solver.interpolate import hyperinvariance_falsifier, is_hyperinvariant
from conjugation_solver.linalg import rank_one
from conjugation_solver.spectral import NotNormalError, decompose

TOL = Tolerances()
N = np.diag([1, 1, 2]).astype(complex)
E = np.eye(3, dtype=complex)


@pytest.mark.parametrize(
    "subspace,expected",
    [
        ([E[2]], True),
        ([E[0], E[1]], True),
        ([E[0]], False),
        ([E[0] + E[2]], False),
        ([E[0], E[1], E[2]], True),
        ([], True),
    ],
)
def test_is_hyperinvariant(subspace, expected):
    assert is_hyperinvariant(N, np.column_stack(subspace) if subspace else np.zeros((3, 0)), TOL) == expected


def test_falsifier_moves_subspace():
    falsifier = hyperinvariance_falsifier(N, [E[0]], trials=20, tol=TOL, seed=0)
    assert falsifier is not None
    assert relation_residuals(falsifier, N, TOL).sym <= 1e-9
    moved = falsifier.apply(E[0])
    assert np.linalg.norm(moved - E[0] * np.vdot(E[0], moved)) > 1e-3


def test_no_falsifier_for_hyperinvariant():
    assert hyperinvariance_falsifier(N, [E[2]], trials=10, tol=TOL) is None


@settings(max_examples=20, deadline=None)
@given(seed=st.integers(0, 2**32 - 1))
def test_spectral_subspaces_are_hyperinvariant(seed):
    rng = np.random.default_rng(seed)
    n = engineered_normal([1, 1j, -2, 3], [2, 1, 3, 1], rng)
    d = decompose(n, TOL)
    chosen = [atom.basis for idx, atom in enumerate(d.atoms) if rng.integers(0, 2) or idx == 0]
    basis = np.hstack(chosen)
    # an arbitrary spanning set of the same subspace
    basis = basis @ random_unitary(basis.shape[1], rng)
    assert is_hyperinvariant(n, basis, TOL)
    assert hyperinvariance_falsifier(n, basis, trials=5, tol=TOL, seed=seed) is None


@settings(max_examples=20, deadline=None)
@given(seed=st.integers(0, 2**32 - 1))
def test_cut_eigenspace_is_falsified(seed):
    rng = np.random.default_rng(seed)
    n = engineered_normal([1, 1j], [3, 2], rng)
    d = decompose(n, TOL)
    big = max(d.atoms, key=lambda atom: atom.dim)
    vec = big.basis @ (rng.standard_normal(big.dim) + 1j * rng.standard_normal(big.dim))
    assert not is_hyperinvariant(n, [vec], TOL)
    falsifier = hyperinvariance_falsifier(n, [vec], trials=50, tol=TOL, seed=seed)
    assert falsifier is not None
    unit = vec / np.linalg.norm(vec)
    outside = np.eye(5) - np.outer(unit, unit.conj())
    assert np.linalg.norm(outside @ falsifier.apply(unit)) > 1e-9
    assert relation_residuals(falsifier, n, TOL).sym <= 1e-8
    assert falsifier.verify(TOL).passed


def test_non_normal_is_out_of_contract():
    # t lies in its own commutant and moves span{e1}
    t = rank_one(E[0, :2], E[0, :2]) + 1j * rank_one(E[0, :2] + E[1, :2], E[0, :2] + E[1, :2])
    assert np.linalg.norm(t @ E[0, :2] - E[0, :2] * t[0, 0]) > 0.5
    with pytest.raises(NotNormalError):
        is_hyperinvariant(t, [E[0, :2]], TOL)


def _candidate_subspaces(d):
    """Every sum of eigenspaces, each also enlarged by part of a further eigenspace or by a vector straddling two."""
    cases = []
    for size in range(len(d) + 1):
        for sel in itertools.combinations(range(len(d)), size):
            base = [d.atoms[idx].basis for idx in sel]
            cases.append(base)
            rest = [idx for idx in range(len(d)) if idx not in sel]
            if big := [idx for idx in rest if d.atoms[idx].dim >= 2]:
                cases.append(base + [d.atoms[big[0]].basis[:, :1]])
            if len(rest) >= 2:
                cases.append(base + [d.atoms[rest[0]].basis[:, :1] + d.atoms[rest[1]].basis[:, :1]])
    return [np.hstack(case) if case else np.zeros((d.source_dim, 0)) for case in cases]


def _is_eigenspace_sum(d, basis):
    q = la.orth(basis) if basis.shape[1] else basis
    outside = np.eye(d.source_dim) - q @ q.conj().T
    contained = sum(atom.dim for atom in d.atoms if np.linalg.norm(outside @ atom.basis) <= 1e-8)
    return contained == q.shape[1]


@pytest.mark.parametrize(
    "values,multiplicities",
    [
        ([1, 2, 3, 4], [1, 1, 1, 1]),
        ([1, 2], [2, 2]),
        ([1, 1j, -1], [2, 1, 1]),
        ([1, 2], [3, 1]),
        ([5], [4]),
    ],
)
def test_hyperinvariance_matches_enumeration(values, multiplicities, rng):
    n = engineered_normal(values, multiplicities, rng)
    d = decompose(n, TOL)
    for basis in _candidate_subspaces(d):
        expected = _is_eigenspace_sum(d, basis)
        assert is_hyperinvariant(n, basis, TOL) == expected
        falsifier = hyperinvariance_falsifier(n, basis, trials=50, tol=TOL, seed=0)
        assert (falsifier is None) == expected
        if falsifier is not None:
            q = la.orth(basis)
            assert np.linalg.norm(falsifier.apply(q) - q @ (q.conj().T @ falsifier.apply(q))) > 1e-9
            assert relation_residuals(falsifier, n, TOL).sym <= 1e-8
