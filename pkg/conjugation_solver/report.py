"""Structured outcomes of decision procedures: violations and the verdicts that carry them."""

from dataclasses import dataclass, field
from typing import Any


@dataclass(frozen=True)
class Violation:
    """
    A single failed condition. `kind` names the condition (e.g. "gram", "atom_gram", "atom_cross",
    "multiplicity", "norm", "pt_parity"), `atom` the spectral atom or measure point it was checked at,
    `i`/`j` the 0-based pair indices, and `lhs`/`rhs` the two sides that were expected to agree.
    """

    kind: str
    i: int | None = None
    j: int | None = None
    atom: int | None = None
    lhs: complex = 0j
    rhs: complex = 0j
    value: complex | None = None  # eigenvalue or measure point the condition refers to

    @property
    def gap(self) -> float:
        """Absolute disagreement between both sides."""
        return abs(self.lhs - self.rhs)

    def to_dict(self) -> dict[str, Any]:
        """Serializable form with complex numbers as [re, im] pairs."""
        out: dict[str, Any] = {"kind": self.kind}
        for name in ("atom", "i", "j"):
            if (val := getattr(self, name)) is not None:
                out[name] = val
        out["lhs"] = [self.lhs.real, self.lhs.imag]
        out["rhs"] = [self.rhs.real, self.rhs.imag]
        if self.value is not None:
            out["value"] = [self.value.real, self.value.imag]
        return out

    def __str__(self) -> str:
        where = ", ".join(
            f"{name}={val}" for name in ("atom", "i", "j") if (val := getattr(self, name)) is not None
        )
        return f"{self.kind}({where}): {self.lhs:.6g} != {self.rhs:.6g}"


@dataclass(frozen=True)
class Verdict:
    """Outcome of a feasibility decision; infeasible iff any violation was recorded."""

    violations: tuple[Violation, ...] = field(default_factory=tuple)

    @property
    def feasible(self) -> bool:
        """True when no condition failed."""
        return not self.violations

    @property
    def witness(self) -> Violation | None:
        """The first failing condition, if any."""
        return self.violations[0] if self.violations else None

    def __bool__(self) -> bool:
        return self.feasible

    def merged(self, other: "Verdict") -> "Verdict":
        """Verdict holding the violations of both."""
        return Verdict(self.violations + other.violations)
