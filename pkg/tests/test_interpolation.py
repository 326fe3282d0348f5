from itertools import chain, combinations

import numpy as np
import pytest
from conftest import engineered_normal, orthogonal_set, planted_skew, planted_symmetric, random_unitary, random_vector
from hypothesis import given, settings
from hypothesis import strategies as st
from numpy.testing import assert_allclose

from conjugation_solver.antilinear import relation_residuals
from conjugation_solver.config import Tolerances
from conjugation_solver.interpolate import (
    ConstructionError,
    InterpolationProblem,
    ProblemError,
    SkewSolver,
    construct_skew,
    construct_symmetric,
    feasibility_single,
    feasibility_skew,
    feasibility_symmetric,
    is_normal_by_fixed_conjugations,
    partial_isometry_witness,
    perturbation_suite,
    subspace_family_problem,
    unitary_commutant_witness,
    verify_certificate,
)
from conjugation_solver.linalg import adjoint, inner
from conjugation_solver.spectral import joint_decompose

TOL = Tolerances()
LAMBDAS = [0, 1, 1j, 1 + 2j, -3]

E = np.eye(3, dtype=complex)


def _build(operators, xs, ys, mode="symmetric"):
    return InterpolationProblem.build(operators, xs, ys, mode, TOL)


def test_symmetric_feasible_example():
    p = _build([np.diag([1, 1, 2])], [E[0]], [E[1]])
    assert feasibility_symmetric(p)
    cert = construct_symmetric(p)
    assert cert.feasible
    assert_allclose(cert.conjugation.apply(E[0]), E[1], atol=1e-12)
    assert verify_certificate(cert.conjugation, p).passed


def test_symmetric_infeasible_example():
    p = _build([np.diag([1, 2])], [np.array([1, 0])], [np.array([0, 1])])
    verdict = feasibility_symmetric(p)
    assert not verdict
    assert verdict.witness.kind == "atom_gram" and verdict.witness.atom == 0
    cert = construct_symmetric(p)
    assert not cert.feasible and cert.conjugation is None and cert.violations


def test_symmetric_norm_mismatch():
    verdict = feasibility_symmetric(_build([np.eye(2)], [np.array([1, 0])], [np.array([0, 2])]))
    assert not verdict and verdict.witness.kind == "norm"


def test_symmetric_without_pairs():
    rotation = np.array([[0, -1], [1, 0]])
    cert = construct_symmetric(_build([rotation], [], []))
    assert cert.feasible
    assert relation_residuals(cert.conjugation, rotation, TOL).sym <= 1e-10


def test_skew_swap_example():
    n = np.diag([1, -1])
    cert = construct_skew(_build([n], [np.array([1, 0])], [np.array([0, 1])], "skew"))
    assert cert.feasible
    assert abs(cert.conjugation.s[0, 1]) == pytest.approx(1.0)
    assert relation_residuals(cert.conjugation, n, TOL).skew <= 1e-10


def test_skew_unpaired_multiplicities():
    verdict = feasibility_skew(_build([np.diag([1, 1, -1])], [], [], "skew"))
    assert not verdict
    assert verdict.witness.kind == "complement_multiplicity"


def test_skew_complement_after_pairs():
    # the pair uses one dimension of each of +-1; the leftover eigenvalue 1 has no partner off the orbit
    n = np.diag([1, 1, -1, 2, -2])
    e = np.eye(5, dtype=complex)
    verdict = feasibility_skew(_build([n], [e[0]], [e[2]], "skew"))
    assert not verdict and any(v.kind == "complement_multiplicity" for v in verdict.violations)
    cert = construct_skew(_build([np.diag([1, -1, 2, -2])], [np.eye(4)[0]], [np.eye(4)[1]], "skew"))
    assert cert.feasible


@pytest.mark.parametrize(
    "operators,xs,ys,mode",
    [
        ([np.eye(2)], [np.array([1, 0]), np.array([1, 1])], [np.array([1, 0]), np.array([0, 1])], "symmetric"),
        ([np.eye(2)], [np.array([1, 0])], [], "symmetric"),
        ([np.array([[0, 1], [0, 0]])], [], [], "symmetric"),
        ([np.diag([1, 2]), np.array([[0, 1], [1, 0]])], [], [], "symmetric"),
        ([np.eye(2), np.eye(2)], [], [], "skew"),
        ([np.eye(2)], [np.zeros(2)], [np.array([1, 0])], "symmetric"),
        ([np.eye(2)], [np.array([1, 0, 0])], [np.array([1, 0, 0])], "symmetric"),
    ],
)
def test_problem_preconditions(operators, xs, ys, mode):
    with pytest.raises(ProblemError):
        _build(operators, xs, ys, mode)


def test_solver_mode_mismatch():
    with pytest.raises(ProblemError):
        SkewSolver(_build([np.eye(2)], [], []))


def _selector_oracle(p: InterpolationProblem) -> bool:
    """Brute force over every union of joint atoms, symmetric mode."""
    atoms = joint_decompose(p.operators, TOL).atoms
    count = p.pair_count
    limit = 1e-8 * max(1.0, float(np.max(np.linalg.norm(np.hstack([p.xs, p.ys]), axis=0))) ** 2)
    subsets = chain.from_iterable(combinations(range(len(atoms)), r) for r in range(len(atoms) + 1))
    for subset in subsets:
        proj = sum((atoms[idx].projection() for idx in subset), np.zeros((p.dim, p.dim), dtype=complex))
        for i in range(count):
            for j in range(count):
                x_i, x_j, y_i, y_j = p.xs[:, i], p.xs[:, j], p.ys[:, i], p.ys[:, j]
                if abs(inner(proj @ x_i, x_j) - inner(proj @ y_j, y_i)) > limit:
                    return False
                if abs(inner(proj @ x_i, y_j) - inner(proj @ x_j, y_i)) > limit:
                    return False
    return True


def _random_symmetric_instance(rng: np.random.Generator, kind: str) -> InterpolationProblem:
    atoms = int(rng.integers(1, 5))
    family_size = int(rng.integers(1, 4))
    mults = [int(m) for m in rng.integers(1, 3, size=atoms)]
    spectra = [list(range(atoms))] + [list(rng.integers(-2, 3, size=atoms)) for _ in range(family_size - 1)]
    planted = planted_symmetric(spectra, mults, rng)
    dim = sum(mults)
    xs = orthogonal_set(dim, int(rng.integers(1, min(dim, 3) + 1)), rng)
    match kind:
        case "planted":
            ys = planted.images(xs)
        case "phased":
            # a unitary in the commutant keeps feasibility
            proj = planted.eigvecs[:, : mults[0]] @ adjoint(planted.eigvecs[:, : mults[0]])
            ys = (np.eye(dim) + (np.exp(1j * rng.uniform(0, 2 * np.pi)) - 1) * proj) @ planted.images(xs)
        case _:
            ys = random_unitary(dim, rng) @ xs
    return _build(planted.family, xs, ys)


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), kind=st.sampled_from(["planted", "phased", "random"]))
def test_atom_reduction_matches_selector_oracle(seed, kind):
    rng = np.random.default_rng(seed)
    p = _random_symmetric_instance(rng, kind)
    verdict = feasibility_symmetric(p)
    assert verdict.feasible == _selector_oracle(p)
    if kind != "random":
        assert verdict.feasible
    cert = construct_symmetric(p)
    assert cert.feasible == verdict.feasible
    if cert.feasible:
        check = verify_certificate(cert.conjugation, p)
        assert check.passed and max(check.residuals.values()) <= 1e-8


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 2**32 - 1))
def test_planted_skew_completeness(seed):
    rng = np.random.default_rng(seed)
    count = int(rng.integers(1, 3))
    values = rng.standard_normal(count) + 1j * rng.standard_normal(count)
    planted = planted_skew(values, [int(m) for m in rng.integers(1, 3, size=count)], int(rng.integers(0, 3)), rng)
    dim = planted.family[0].shape[0]
    xs = orthogonal_set(dim, int(rng.integers(1, min(dim, 3) + 1)), rng)
    p = _build(planted.family, xs, planted.images(xs), "skew")
    cert = construct_skew(p)
    assert cert.feasible
    check = verify_certificate(cert.conjugation, p)
    assert check.passed and max(check.residuals.values()) <= 1e-8


def test_verify_certificate_detects_tampering():
    p = _build([np.diag([1, 1, 2])], [E[0]], [E[1]])
    cert = construct_symmetric(p)
    s = cert.conjugation.s.copy()
    s[0, 0] += 1e-3
    check = verify_certificate(s, p)
    assert not check.passed and "symmetry" not in check.failed and "unitarity" in check.failed


def test_partial_isometry_witness(rng):
    planted = planted_symmetric([[0, 1, 2]], [2, 2, 1], rng)
    xs = orthogonal_set(5, 1, rng)
    p = _build(planted.family, xs, planted.images(xs))
    cert = construct_symmetric(p)
    witness = partial_isometry_witness(cert, p)
    assert_allclose(witness.v.apply(xs), p.ys, atol=1e-9)
    assert_allclose(witness.v.apply(p.ys), xs, atol=1e-9)
    basis = witness.domain_basis
    images = witness.v.apply(basis)
    assert_allclose(adjoint(images) @ images, np.eye(basis.shape[1]), atol=1e-9)
    outside = np.eye(5) - basis @ adjoint(basis)
    assert_allclose(witness.v.apply(outside @ random_vector(5, rng)), 0, atol=1e-9)


@settings(max_examples=20, deadline=None)
@given(seed=st.integers(0, 2**32 - 1))
def test_perturbation_symmetric(seed):
    rng = np.random.default_rng(seed)
    planted = planted_symmetric([[0, 1, 2], [1, 1, 0]], [1, 2, 1], rng)
    x = orthogonal_set(4, 1, rng)
    p = _build(planted.family, x, planted.images(x))
    report = perturbation_suite(construct_symmetric(p), p, LAMBDAS)
    assert report.passed and max(report.residuals.values()) <= 1e-8


@settings(max_examples=20, deadline=None)
@given(seed=st.integers(0, 2**32 - 1))
def test_perturbation_skew(seed):
    rng = np.random.default_rng(seed)
    planted = planted_skew([1 + 1j, 3], [1, 1], 1, rng)
    x = orthogonal_set(5, 1, rng)
    p = _build(planted.family, x, planted.images(x), "skew")
    report = perturbation_suite(construct_skew(p), p, LAMBDAS)
    assert report.passed and max(report.residuals.values()) <= 1e-8


def test_perturbation_preconditions():
    p = _build([np.diag([1, -1])], [np.array([1, 1])], [np.array([1, 1])], "skew")
    cert = construct_skew(p)
    assert cert.feasible
    with pytest.raises(ProblemError):
        perturbation_suite(cert, p, LAMBDAS)
    two = _build([np.eye(2)], [np.array([1, 0]), np.array([0, 1])], [np.array([1, 0]), np.array([0, 1])])
    with pytest.raises(ProblemError):
        perturbation_suite(construct_symmetric(two), two, LAMBDAS)


def test_single_pair_feasibility_and_witness(rng):
    n = engineered_normal([1, 2, 3j], [2, 1, 2], rng)
    x = random_vector(5, rng)
    u = random_unitary(5, rng)
    # a unitary mixing only inside atoms: the commutant of N
    d = joint_decompose([n], TOL)
    planted_unitary = sum(atom.basis @ random_unitary(atom.dim, rng) @ adjoint(atom.basis) for atom in d.atoms)
    y = planted_unitary @ x
    assert feasibility_single([n], x, y, TOL)
    witness = unitary_commutant_witness([n], x, y, TOL)
    assert_allclose(witness @ x, y, atol=1e-9)
    assert_allclose(witness @ n, n @ witness, atol=1e-9)
    assert_allclose(witness @ adjoint(witness), np.eye(5), atol=1e-9)

    verdict = feasibility_single([n], x, u @ x, TOL)
    assert not verdict and verdict.witness.kind == "atom_norm"
    with pytest.raises(ConstructionError):
        unitary_commutant_witness([n], x, u @ x, TOL)


def test_subspace_family():
    p1 = np.diag([1, 1, 0, 0]).astype(complex)
    p2 = np.diag([0, 1, 1, 0]).astype(complex)
    e = np.eye(4, dtype=complex)
    p = subspace_family_problem([p1, p2], [e[0]], [1j * e[0]], TOL)
    cert = construct_symmetric(p)
    assert cert.feasible
    c = cert.conjugation
    for proj in (p1, p2):
        # C maps each subspace onto itself
        assert_allclose(proj @ c.apply(proj), c.apply(proj), atol=1e-9)
    assert not feasibility_symmetric(subspace_family_problem([p1, p2], [e[0]], [e[1]], TOL))
    with pytest.raises(ProblemError):
        subspace_family_problem([np.array([[1, 1], [0, 0]])], [], [], TOL)


def test_normality_by_fixed_conjugations(rng):
    n = engineered_normal([1, 1j, -1], [1, 1, 1], rng)
    witness = is_normal_by_fixed_conjugations(n, 5, TOL, seed=3)
    assert witness.normal and len(witness.conjugations) == 5
    assert all(c.verify(TOL).passed for c in witness.conjugations)
    assert all(relation_residuals(c, n, TOL).sym <= 1e-8 for c in witness.conjugations)

    witness = is_normal_by_fixed_conjugations(np.array([[0, 1], [0, 0]]), 5, TOL, seed=3)
    assert not witness.normal and not witness.conjugations
    assert max(witness.gaps) > 1e-3
