"""
Module containing the problem and certificate file schemas, their conversion to solver inputs and the
canonical digest binding a certificate to the problem it was produced for.

Complex scalars are two-element [re, im] arrays; matrices are row-major nested arrays of scalars.
"""

import hashlib
import json
import os
import tempfile
from pathlib import Path
from typing import Any, Literal

import numpy as np
import numpy.typing as npt
import yaml
from pydantic import BaseModel, Field, FiniteFloat, PositiveFloat, model_validator

from conjugation_solver.config import Tolerances
from conjugation_solver.interpolate import InterpolationProblem
from conjugation_solver.linalg import CMatrix, CVector
from conjugation_solver.mu_field import DiscreteMeasure, FunctionTable

SCHEMA_VERSION = "1"

ComplexScalar = tuple[FiniteFloat, FiniteFloat]
ComplexVector = list[ComplexScalar]
ComplexMatrix = list[list[ComplexScalar]]

ProblemMode = Literal["symmetric", "skew", "hyperinvariant", "ufield", "sufield"]


def decode_vector(vec: ComplexVector) -> CVector:
    """[[re, im], ...] to a complex vector."""
    return np.array([complex(re, im) for re, im in vec], dtype=np.complex128)


def decode_matrix(mat: ComplexMatrix) -> CMatrix:
    """Row-major [[[re, im], ...], ...] to a complex matrix."""
    return np.array([[complex(re, im) for re, im in row] for row in mat], dtype=np.complex128)


def encode_scalar(z: complex) -> list[float]:
    """Complex number to [re, im]."""
    return [float(np.real(z)), float(np.imag(z))]


def encode_matrix(mat: npt.ArrayLike) -> list[list[list[float]]]:
    """Complex matrix to row-major [[[re, im], ...], ...]."""
    return [[encode_scalar(z) for z in row] for row in np.asarray(mat)]


class ToleranceOverrides(BaseModel, extra="forbid"):
    """Tolerances a problem file may set for itself."""

    residual: PositiveFloat | None = None
    cluster: PositiveFloat | None = None
    rank: PositiveFloat | None = None

    def apply(self, base: Tolerances) -> Tolerances:
        """Overridden copy of `base`."""
        return Tolerances(**(base.model_dump() | self.model_dump(exclude_none=True)))


class MeasureAtom(BaseModel, extra="forbid"):
    """A point mass; zero weights are rejected rather than treated as null sets."""

    z: ComplexScalar
    weight: PositiveFloat


class ProblemFile(BaseModel, extra="forbid"):
    """A problem instance in one of the supported modes, carrying exactly the fields its mode needs."""

    schema_version: str = SCHEMA_VERSION
    dimension: int = Field(ge=1)
    mode: ProblemMode
    operators: dict[str, ComplexMatrix] = {}
    xs: list[ComplexVector] = []
    ys: list[ComplexVector] = []
    subspace: list[ComplexVector] | None = None
    measure: list[MeasureAtom] | None = None
    n: int | None = Field(default=None, ge=1)
    f: list[ComplexVector] | None = None
    g: list[ComplexVector] | None = None
    tolerances: ToleranceOverrides | None = None

    @model_validator(mode="after")
    def check_version(self):
        """Only the current schema version is understood."""
        assert self.schema_version == SCHEMA_VERSION, f"Unsupported schema_version {self.schema_version}"
        return self

    @model_validator(mode="after")
    def check_mode_fields(self):
        """Make sure the fields present are exactly the ones the mode uses."""
        field_mode = self.mode in ("ufield", "sufield")
        if field_mode:
            assert not self.operators and not self.xs and not self.ys and self.subspace is None, (
                f"Mode {self.mode} takes measure, n, f and g only"
            )
            assert self.measure and self.n is not None and self.f is not None and self.g is not None, (
                f"Mode {self.mode} needs measure, n, f and g"
            )
            return self
        assert self.measure is None and self.n is None and self.f is None and self.g is None, (
            f"Mode {self.mode} does not take measure, n, f or g"
        )
        assert self.operators, f"Mode {self.mode} needs at least one operator"
        if self.mode == "hyperinvariant":
            assert len(self.operators) == 1, "Mode hyperinvariant takes exactly one operator"
            assert self.subspace is not None, "Mode hyperinvariant needs a subspace"
            assert not self.xs and not self.ys, "Mode hyperinvariant does not take xs or ys"
        else:
            assert self.subspace is None, f"Mode {self.mode} does not take a subspace"
            assert len(self.xs) == len(self.ys), f"Got {len(self.xs)} vectors in xs but {len(self.ys)} in ys"
        if self.mode == "skew":
            assert len(self.operators) == 1, "Mode skew takes exactly one operator"
        return self

    @model_validator(mode="after")
    def check_dimensions(self):
        """Validate that every matrix, vector and function table matches the declared dimensions."""
        dim = self.dimension
        for name, mat in self.operators.items():
            assert len(mat) == dim and all(len(row) == dim for row in mat), (
                f'Operator "{name}" is not {dim}x{dim}'
            )
        for name, vecs in (("xs", self.xs), ("ys", self.ys), ("subspace", self.subspace or [])):
            for idx, vec in enumerate(vecs):
                assert len(vec) == dim, f"Vector {idx} in {name} has length {len(vec)}, expected {dim}"
        if self.measure is not None:
            assert self.n == dim, f"Field modes need n ({self.n}) equal to dimension ({dim})"
            for name, table in (("f", self.f or []), ("g", self.g or [])):
                assert len(table) == len(self.measure), (
                    f"Table {name} has {len(table)} rows for {len(self.measure)} measure atoms"
                )
                assert all(len(row) == dim for row in table), f"Rows of table {name} must have length {dim}"
        return self

    def resolve_tolerances(self, base: Tolerances) -> Tolerances:
        """Tolerances with this file's overrides applied on top of `base`."""
        return self.tolerances.apply(base) if self.tolerances is not None else base

    def operator_matrices(self) -> list[CMatrix]:
        """Operators in file order."""
        return [decode_matrix(mat) for mat in self.operators.values()]

    def to_problem(self, tol: Tolerances) -> InterpolationProblem:
        """Validated interpolation problem for the symmetric and skew modes."""
        assert self.mode in ("symmetric", "skew"), f"Mode {self.mode} is not an interpolation problem"
        dim = self.dimension
        xs = np.column_stack([decode_vector(v) for v in self.xs]) if self.xs else np.zeros((dim, 0), complex)
        ys = np.column_stack([decode_vector(v) for v in self.ys]) if self.ys else np.zeros((dim, 0), complex)
        return InterpolationProblem.build(self.operator_matrices(), xs, ys, self.mode, tol)

    def subspace_basis(self) -> CMatrix:
        """Spanning vectors of the subspace as columns."""
        vecs = [decode_vector(v) for v in self.subspace or []]
        return np.column_stack(vecs) if vecs else np.zeros((self.dimension, 0), dtype=np.complex128)

    def to_measure(self, tol: Tolerances) -> DiscreteMeasure:
        """The measure of a field problem, with distinct atoms."""
        assert self.measure is not None
        return DiscreteMeasure.from_atoms([(complex(*atom.z), atom.weight) for atom in self.measure], tol)

    def function_tables(self) -> tuple[FunctionTable, FunctionTable]:
        """The tables f and g of a field problem."""
        assert self.f is not None and self.g is not None
        return (
            FunctionTable(np.array([decode_vector(row) for row in self.f])),
            FunctionTable(np.array([decode_vector(row) for row in self.g])),
        )


class CertificateFile(BaseModel, extra="forbid"):
    """A solver outcome bound to its problem file by digest; residuals are informative only."""

    schema_version: str = SCHEMA_VERSION
    tool_version: str
    input_digest: str = Field(pattern=r"^[0-9a-f]{64}$")
    mode: ProblemMode
    feasible: bool
    conjugation_s: ComplexMatrix | None = None
    field_blocks: list[ComplexMatrix] | None = None
    hyperinvariant: bool | None = None
    residuals: dict[str, float] = {}
    violations: list[dict[str, Any]] = []

    @model_validator(mode="after")
    def check_payload(self):
        """Feasible certificates carry the witness their mode produces."""
        if self.feasible and self.mode in ("symmetric", "skew"):
            assert self.conjugation_s is not None, "Feasible interpolation certificates need conjugation_s"
        if self.feasible and self.mode in ("ufield", "sufield"):
            assert self.field_blocks is not None, "Feasible field certificates need field_blocks"
        if self.mode == "hyperinvariant":
            assert self.hyperinvariant is not None, "Hyperinvariance certificates need the hyperinvariant flag"
        for mat in ([self.conjugation_s] if self.conjugation_s is not None else []) + (self.field_blocks or []):
            assert all(len(row) == len(mat) for row in mat), "Certificate matrices must be square"
        return self

    def to_json(self, indent: int | None) -> str:
        """Deterministic JSON text."""
        return json.dumps(self.model_dump(exclude_none=True), indent=indent, sort_keys=True, allow_nan=False) + "\n"


def load_raw(path: Path) -> dict[str, Any]:
    """Read a problem or certificate file: JSON for *.json, YAML otherwise."""
    text = path.read_text(encoding="utf-8")
    raw = json.loads(text) if path.suffix == ".json" else yaml.safe_load(text)
    if not isinstance(raw, dict):
        raise ValueError(f"{path} does not contain a mapping")
    return raw


def canonical_digest(raw: dict[str, Any]) -> str:
    """SHA-256 of the canonical JSON form (sorted keys, no whitespace) of a parsed file."""
    canonical = json.dumps(raw, sort_keys=True, separators=(",", ":"), ensure_ascii=True, allow_nan=False)
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


def write_atomic(path: Path, text: str) -> None:
    """Write text to path via a temporary file in the same directory and a rename."""
    path.parent.mkdir(parents=True, exist_ok=True)
    with tempfile.NamedTemporaryFile("w", encoding="utf-8", dir=path.parent, delete=False, suffix=".tmp") as tmp:
        tmp.write(text)
    os.replace(tmp.name, path)
