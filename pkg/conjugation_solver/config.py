"""
Module containing numerical tolerances and solver settings used throughout the package,
and the top-level configuration object the CLI reads from YAML.
"""

from pydantic import BaseModel, ConfigDict, Field, model_validator
from pydantic_settings import BaseSettings, PydanticBaseSettingsSource


class _NoEnvSettings(BaseSettings):
    """Settings base that only takes values from init arguments, never from the environment."""

    @classmethod
    def settings_customise_sources(
        cls,
        settings_cls: type[BaseSettings],
        init_settings: PydanticBaseSettingsSource,
        env_settings: PydanticBaseSettingsSource,
        dotenv_settings: PydanticBaseSettingsSource,
        file_secret_settings: PydanticBaseSettingsSource,
    ) -> tuple[PydanticBaseSettingsSource, ...]:
        return (init_settings,)


class Tolerances(BaseModel):
    """Numerical thresholds for residual checks, eigenvalue clustering and rank decisions."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    # Frobenius-norm residual accepted for every verified identity
    residual: float = Field(default=1e-9, gt=0)

    # eigenvalues closer than this are merged into a single spectral atom
    cluster: float = Field(default=1e-7, gt=0)

    # singular values / pivots below rank * largest are treated as zero
    rank: float = Field(default=1e-9, gt=0)

    @model_validator(mode="after")
    def check_ordering(self):
        """Clustering must never be finer than the residual threshold."""
        assert self.cluster >= self.residual, (
            f"Cluster tolerance ({self.cluster}) must be at least the residual tolerance ({self.residual})"
        )
        return self

    def overridden(self, residual: float | None = None, cluster: float | None = None) -> "Tolerances":
        """
        Copy with the given values replaced. A residual override without a cluster override lifts the
        cluster tolerance to at least the new residual so the ordering constraint keeps holding.
        """
        updates = {key: val for key, val in (("residual", residual), ("cluster", cluster)) if val is not None}
        if residual is not None and cluster is None:
            updates["cluster"] = max(self.cluster, residual)
        return Tolerances(**(self.model_dump() | updates)) if updates else self

    def scaled(self, scale: float) -> float:
        """Residual threshold relative to a data magnitude, never below the absolute threshold."""
        return self.residual * max(1.0, scale)


class SolverConfig(_NoEnvSettings, extra="ignore"):
    """Settings for randomized subroutines and auxiliary reports."""

    # seed for every randomized subroutine (falsifier sampling, fixed point fallback)
    seed: int = 0

    # number of random commutant samples tried by the hyperinvariance falsifier
    falsifier_trials: int = Field(default=50, ge=1)

    # lambda values, as [re, im] pairs, used by the perturbation report on single-pair certificates
    perturbation_samples: list[tuple[float, float]] = [(0, 0), (1, 0), (0, 1), (1, 2), (-3, 0)]

    # random restarts for the fallback fixed-point basis search
    fixed_point_attempts: int = Field(default=64, ge=1)

    @property
    def lambdas(self) -> list[complex]:
        """Perturbation samples as complex numbers."""
        return [complex(re, im) for re, im in self.perturbation_samples]


class OutputConfig(_NoEnvSettings, extra="ignore"):
    """Settings for certificate output."""

    # indentation of certificate JSON files, None for a single line
    indent: int | None = 2


class Config(_NoEnvSettings):
    """All configuration settings used for this module."""

    tolerances: Tolerances = Tolerances()
    solver_config: SolverConfig = SolverConfig()
    output_config: OutputConfig = OutputConfig()
