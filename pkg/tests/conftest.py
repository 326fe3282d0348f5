"""Seeded generators of unitaries, commuting normal families and planted conjugations."""

from dataclasses import dataclass
from typing import Sequence

import numpy as np
import pytest
from scipy.stats import unitary_group

from conjugation_solver.config import Tolerances


@pytest.fixture
def tol() -> Tolerances:
    return Tolerances()


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(1234)


def random_unitary(dim: int, rng: np.random.Generator) -> np.ndarray:
    if dim == 1:
        return np.exp(2j * np.pi * rng.uniform()) * np.ones((1, 1))
    return unitary_group.rvs(dim, random_state=rng)


def random_vector(dim: int, rng: np.random.Generator) -> np.ndarray:
    return rng.standard_normal(dim) + 1j * rng.standard_normal(dim)


def random_conjugation(dim: int, rng: np.random.Generator) -> np.ndarray:
    """Symmetric unitary U U^T for a Haar unitary U."""
    u = random_unitary(dim, rng)
    return u @ u.T


def block_diag(blocks: Sequence[np.ndarray]) -> np.ndarray:
    dim = sum(block.shape[0] for block in blocks)
    out = np.zeros((dim, dim), dtype=np.complex128)
    start = 0
    for block in blocks:
        stop = start + block.shape[0]
        out[start:stop, start:stop] = block
        start = stop
    return out


def orthogonal_set(dim: int, count: int, rng: np.random.Generator) -> np.ndarray:
    """`count` pairwise orthogonal columns with random norms in [0.5, 2]."""
    cols = random_unitary(dim, rng)[:, :count]
    return cols * rng.uniform(0.5, 2.0, size=count)[np.newaxis, :]


@dataclass
class Planted:
    """A commuting normal family N_k = V D_k V* together with a conjugation S related to it."""

    family: list[np.ndarray]
    s: np.ndarray
    eigvecs: np.ndarray

    def images(self, xs: np.ndarray) -> np.ndarray:
        return self.s @ xs.conj()


def planted_symmetric(
    spectra: Sequence[Sequence[complex]], multiplicities: Sequence[int], rng: np.random.Generator
) -> Planted:
    """
    Family with joint atoms of the given multiplicities; spectra[k][a] is the eigenvalue of N_k on atom a.
    The planted S = V Z V^T has a block Z_a = U_a U_a^T on every atom, so C N_k C = N_k*.
    """
    dim = sum(multiplicities)
    v = random_unitary(dim, rng)
    family = [
        v @ np.diag(np.repeat(np.asarray(vals, dtype=np.complex128), multiplicities)) @ v.conj().T
        for vals in spectra
    ]
    z = block_diag([random_conjugation(mult, rng) for mult in multiplicities])
    return Planted(family, v @ z @ v.T, v)


def planted_skew(
    values: Sequence[complex], multiplicities: Sequence[int], zero_dim: int, rng: np.random.Generator
) -> Planted:
    """
    Normal N with eigenvalues +-lambda of equal multiplicity and a zero eigenspace of dimension
    `zero_dim`. The planted S swaps every lambda block with its -lambda block through a random unitary W.
    """
    diag_vals: list[complex] = []
    blocks = []
    for val, mult in zip(values, multiplicities):
        diag_vals += [val] * mult + [-val] * mult
        w = random_unitary(mult, rng)
        swap = np.zeros((2 * mult, 2 * mult), dtype=np.complex128)
        swap[:mult, mult:] = w
        swap[mult:, :mult] = w.T
        blocks.append(swap)
    if zero_dim:
        diag_vals += [0] * zero_dim
        blocks.append(random_conjugation(zero_dim, rng))
    dim = len(diag_vals)
    v = random_unitary(dim, rng)
    n = v @ np.diag(np.asarray(diag_vals, dtype=np.complex128)) @ v.conj().T
    return Planted([n], v @ block_diag(blocks) @ v.T, v)


def engineered_normal(values: Sequence[complex], multiplicities: Sequence[int], rng: np.random.Generator) -> np.ndarray:
    """Normal matrix with exactly the given eigenvalues and multiplicities in a random eigenbasis."""
    v = random_unitary(sum(multiplicities), rng)
    return v @ np.diag(np.repeat(np.asarray(values, dtype=np.complex128), multiplicities)) @ v.conj().T
