"""Run configuration using pydantic-settings.

RunConfig is read from a TOML file with CHORDATLAS_ environment overrides
(nested keys joined by "__", e.g. CHORDATLAS_SOLVER__NEWTON_TOL). Unknown
keys are rejected in every section.

Sections:
- system: Which Hamiltonian family, lambda, mu range and boundary planes
- solver: Integrator and Newton tolerances
- contact: mu grid and sampler of the contact check
- chord: Guesses or scan grid of find-chord
- continuation: Seeds, step control, probe and census settings
- gradient: Seed, schedule and stretching values of gradient-flow
- output: Where artifacts go
"""

import math
import tomllib
from pathlib import Path
from typing import Any, Dict, List, Literal, Optional, Tuple, Type, Union

from pydantic import (
    BaseModel,
    ConfigDict,
    Field,
    ValidationError,
    ValidationInfo,
    field_validator,
    model_validator,
)
from pydantic_settings import (
    BaseSettings,
    PydanticBaseSettingsSource,
    SettingsConfigDict,
    TomlConfigSettingsSource,
)

from src.chordatlas.chords.models import ShootingGuess, ShootingOptions
from src.chordatlas.continuation.models import ContinuationOptions
from src.chordatlas.flow.models import IntegratorOptions
from src.chordatlas.gradient.models import FlowOptions
from src.chordatlas.phase.models import AffineLagrangian, LambdaChoice, SamplerConfig, SystemDescriptor
from src.chordatlas.phase.systems import builtin_system


class ConfigError(ValueError):
    """Raised when a configuration file cannot be loaded or validated."""

    def __init__(self, path: Optional[Union[str, Path]], reason: str):
        self.path = str(path) if path is not None else None
        self.reason = reason
        where = f" in {self.path}" if self.path else ""
        super().__init__(f"Invalid configuration{where}: {reason}")


def _positive(name: str, value: Optional[float]) -> Optional[float]:
    if value is not None and not (value > 0 and math.isfinite(value)):
        raise ValueError(f"{name} must be positive and finite, got {value!r}")
    return value


class _Section(BaseModel):
    model_config = ConfigDict(extra="forbid")


# -------------------------------------------------------------------------
# System
# -------------------------------------------------------------------------
class LagrangianSection(_Section):
    """A boundary plane given by a base point and tangent rows."""

    base_point: List[float]
    basis: List[List[float]]


class SystemSection(_Section):
    name: Literal["harmonic", "henon_heiles", "rtbp_planar", "fold_quartic"]
    params: Dict[str, Any] = Field(default_factory=dict)
    lambda_choice: Optional[LambdaChoice] = None
    mu_range: Optional[Tuple[float, float]] = None
    lagrangians: Optional[List[LagrangianSection]] = None

    @field_validator("lagrangians")
    @classmethod
    def validate_lagrangians(cls, v: Optional[List[LagrangianSection]]) -> Optional[List[LagrangianSection]]:
        if v is not None and len(v) != 2:
            raise ValueError("exactly two [[system.lagrangians]] entries are required")
        return v

    def build(self) -> SystemDescriptor:
        planes = None
        if self.lagrangians is not None:
            planes = tuple(AffineLagrangian.from_rows(p.base_point, p.basis) for p in self.lagrangians)
        return builtin_system(
            self.name,
            self.params,
            lambda_choice=self.lambda_choice,
            mu_range=self.mu_range,
            lagrangians=planes,
        )


# -------------------------------------------------------------------------
# Solver
# -------------------------------------------------------------------------
class SolverSection(_Section):
    rtol: float = 1e-10
    atol: float = 1e-12
    newton_tol: float = 1e-10
    max_newton_iter: int = Field(50, gt=0)
    tau_floor: float = 1e-4
    samples: int = Field(256, ge=2)
    degeneracy_threshold: float = 1e-6
    collision_floor: float = 1e-3
    max_workers: Optional[int] = Field(None, gt=0)

    @field_validator("rtol", "atol", "newton_tol", "tau_floor", "degeneracy_threshold", "collision_floor")
    @classmethod
    def validate_tolerance(cls, v: float, info: ValidationInfo) -> float:
        return _positive(info.field_name, v)

    def shooting_options(self) -> ShootingOptions:
        return ShootingOptions(
            newton_tol=self.newton_tol,
            max_iter=self.max_newton_iter,
            tau_floor=self.tau_floor,
            samples=self.samples,
            degeneracy_threshold=self.degeneracy_threshold,
            integrator=IntegratorOptions(
                rtol=self.rtol, atol=self.atol, collision_floor=self.collision_floor
            ),
        )


# -------------------------------------------------------------------------
# Contact check
# -------------------------------------------------------------------------
class ContactSection(_Section):
    """mu grid plus the SamplerConfig fields."""

    mu_grid: List[float] = Field(default_factory=list)
    mode: Literal["grid", "random"] = "grid"
    samples: int = Field(400, gt=0)
    seed: int = 0
    min_accepted: int = Field(50, gt=0)
    max_iter: int = Field(25, gt=0)
    tol: float = 1e-10
    box_center: Optional[List[float]] = None
    box_half_width: Union[float, List[float]] = 1.5
    region_center: Optional[List[float]] = None
    region_radius: Optional[float] = None

    @field_validator("tol", "region_radius")
    @classmethod
    def validate_tolerance(cls, v: Optional[float], info: ValidationInfo) -> Optional[float]:
        return _positive(info.field_name, v)

    def sampler(self) -> SamplerConfig:
        return SamplerConfig(**self.model_dump(exclude={"mu_grid"}))


# -------------------------------------------------------------------------
# Chords
# -------------------------------------------------------------------------
class ChordSection(_Section):
    mu: float = 0.0
    mode: Literal["guess", "scan"] = "guess"
    guesses: List[ShootingGuess] = Field(default_factory=list)
    scan_u: List[List[float]] = Field(default_factory=list)
    scan_tau: List[float] = Field(default_factory=list)
    max_guesses: int = Field(10, gt=0)


class SeedSection(_Section):
    """A continuation seed: a guess at mu and the initial direction in mu."""

    mu: float
    u: List[float] = Field(..., min_length=1)
    tau: float
    direction: Literal[-1, 1] = 1

    @field_validator("u", mode="before")
    @classmethod
    def coerce_u(cls, v):
        return [v] if isinstance(v, (int, float)) else v

    @property
    def guess(self) -> ShootingGuess:
        return ShootingGuess(u=self.u, tau=self.tau)


# -------------------------------------------------------------------------
# Continuation
# -------------------------------------------------------------------------
class ContinuationSection(_Section):
    seeds: List[SeedSection] = Field(default_factory=list)
    ds: float = 1e-3
    ds_min: float = 1e-6
    ds_max: float = 1e-2
    max_steps: int = Field(500, gt=0)
    mu_window: Optional[Tuple[float, float]] = None
    probe_depth: int = Field(8, ge=0)
    probe_delta: float = 1e-3
    probe_ratio: float = Field(2.0, gt=1)
    census_delta: float = 1e-3
    census_radius: float = 1e-2
    census_grid: int = Field(6, ge=2)
    distinct_cutoff: float = 1e-6
    kappa_margin: float = Field(0.05, ge=0)
    check_envelope: bool = False
    verify: bool = True

    @field_validator(
        "ds", "ds_min", "ds_max", "probe_delta", "census_delta", "census_radius", "distinct_cutoff"
    )
    @classmethod
    def validate_tolerance(cls, v: float, info: ValidationInfo) -> float:
        return _positive(info.field_name, v)

    @field_validator("census_grid")
    @classmethod
    def validate_grid(cls, v: int) -> int:
        if v % 2:
            raise ValueError("census_grid must be even so the grid avoids its center")
        return v

    def options(self, degeneracy_threshold: float) -> ContinuationOptions:
        return ContinuationOptions(
            ds=self.ds,
            ds_min=self.ds_min,
            ds_max=self.ds_max,
            max_steps=self.max_steps,
            mu_window=self.mu_window,
            degeneracy_threshold=degeneracy_threshold,
        )


# -------------------------------------------------------------------------
# Gradient flow
# -------------------------------------------------------------------------
class GradientSection(_Section):
    nodes: int = Field(64, ge=2)
    mu0: float = 0.0
    mu1: float = 0.0
    seed: Optional[ShootingGuess] = None
    target: Optional[ShootingGuess] = None
    r_values: List[float] = Field(default_factory=lambda: [1.0])
    scheme: Literal["split", "descent"] = "split"
    ds: Optional[float] = None
    tol: float = 1e-8
    s_settle: float = Field(100.0, ge=0)
    max_steps: int = Field(20000, gt=0)
    rho: Optional[float] = None
    sigma_floor: float = 1e-4
    plateau_tol: float = 1e-6
    relax_seed: bool = True
    energy_margin: float = Field(0.2, ge=0)

    @field_validator("ds", "tol", "rho", "sigma_floor", "plateau_tol")
    @classmethod
    def validate_tolerance(cls, v: Optional[float], info: ValidationInfo) -> Optional[float]:
        return _positive(info.field_name, v)

    @field_validator("r_values")
    @classmethod
    def validate_r_values(cls, v: List[float]) -> List[float]:
        if not v:
            raise ValueError("r_values must not be empty")
        if any(r < 0 or not math.isfinite(r) for r in v):
            raise ValueError("r_values must be non-negative and finite")
        return v

    def flow_options(self) -> FlowOptions:
        return FlowOptions(
            scheme=self.scheme,
            ds=self.ds,
            tol=self.tol,
            s_settle=self.s_settle,
            max_steps=self.max_steps,
            rho=self.rho,
            sigma_floor=self.sigma_floor,
        )


# -------------------------------------------------------------------------
# Output
# -------------------------------------------------------------------------
class OutputSection(_Section):
    dir: Path = Path("out")
    prefix: str = ""

    def path(self, out_dir: Path, name: str) -> Path:
        return out_dir / f"{self.prefix}{name}"


class RunConfig(BaseSettings):
    """Configuration of one chordatlas run.

    Sources, highest priority first: keyword arguments, CHORDATLAS_*
    environment variables, then the TOML file set as toml_file.
    """

    model_config = SettingsConfigDict(
        env_prefix="CHORDATLAS_",
        env_nested_delimiter="__",
        case_sensitive=False,
        extra="forbid",
    )

    system: SystemSection
    solver: SolverSection = Field(default_factory=SolverSection)
    contact: ContactSection = Field(default_factory=ContactSection)
    chord: ChordSection = Field(default_factory=ChordSection)
    continuation: ContinuationSection = Field(default_factory=ContinuationSection)
    gradient: GradientSection = Field(default_factory=GradientSection)
    output: OutputSection = Field(default_factory=OutputSection)

    @model_validator(mode="after")
    def validate_mu_values(self) -> "RunConfig":
        if self.system.mu_range is not None and self.system.mu_range[0] > self.system.mu_range[1]:
            raise ValueError("system.mu_range must be increasing")
        return self

    @classmethod
    def settings_customise_sources(
        cls,
        settings_cls: Type[BaseSettings],
        init_settings: PydanticBaseSettingsSource,
        env_settings: PydanticBaseSettingsSource,
        dotenv_settings: PydanticBaseSettingsSource,
        file_secret_settings: PydanticBaseSettingsSource,
    ) -> Tuple[PydanticBaseSettingsSource, ...]:
        sources: List[PydanticBaseSettingsSource] = [init_settings, env_settings]
        if settings_cls.model_config.get("toml_file"):
            sources.append(TomlConfigSettingsSource(settings_cls))
        return tuple(sources)


def load_config(path: Union[str, Path], **overrides: Any) -> RunConfig:
    """Load a RunConfig from a TOML file.

    Raises:
        ConfigError: The file is missing, is not valid TOML or violates
            the schema.
    """
    path = Path(path)
    if not path.is_file():
        raise ConfigError(path, "file not found")

    class FileRunConfig(RunConfig):
        model_config = SettingsConfigDict({**RunConfig.model_config, "toml_file": path})

    try:
        return FileRunConfig(**overrides)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(path, f"TOML syntax error: {exc}") from exc
    except ValidationError as exc:
        raise ConfigError(path, str(exc)) from exc
