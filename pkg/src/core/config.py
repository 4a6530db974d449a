"""Configuration management for the inner-function toolkit.

Two layers:
- Settings: process environment and optional .env file (pydantic-settings).
- RunConfig: the flat JSON run document consumed by every CLI command.
"""

import json
from pathlib import Path
from typing import Any, Optional

from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator
from pydantic_settings import BaseSettings, SettingsConfigDict

from src.core.errors import ConfigurationError

# Numerical defaults shared by the modules and the CLI

DEFAULT_BOUNDARY_TOLERANCE = 1e-9
"""Boundary membership tolerance: | |z1|^2 + |z2|^(2q) - 1 | < tolerance."""

DEFAULT_RAMIFICATION_GUARD = 1e-6
"""Lift refuses points with |z2| below this radius (arg/root stability)."""

DEFAULT_TERM_CAP = 100_000
"""Maximum number of stored terms in an FPolynomial product or projection."""

DEFAULT_SAMPLE_COUNT = 200_000
"""Monte Carlo sample count for boundary integrals."""

DEFAULT_PROBE_COUNT = 10_000
"""Dense probe set used for sup-norm and ceiling checks."""

DEFAULT_CANDIDATE_COUNT = 100_000
"""Candidate cloud size for greedy packings."""

DEFAULT_SIGN_TRIALS = 256
"""Random sign vectors tried by the RW search (plus the all-plus vector)."""

DEFAULT_ROTATION_TRIALS = 64
"""Haar-random unitaries tried when adapting W to a measure."""

DEFAULT_BUDGET = 50
"""Maximum number of series steps."""

DEFAULT_DEFECT_FRACTION = 0.05
"""Default defect target as a fraction of the sheet count N."""

DEFAULT_SYMBOL_DEGREE = 6
"""Starting degree of the polynomial surrogate of the residual modulus."""

DEFAULT_SYMBOL_DEGREE_MAX = 12
"""Largest surrogate degree tried before damping or giving up."""

DEFAULT_ENERGY_FLOOR = 1e-4
"""Minimum accepted energy ratio int|P|^2 / int psi^2 per step."""

DEFAULT_SIGMA_THRESHOLD = 3.0
"""Statistical acceptance in standard errors."""

DEFAULT_CHUNK_SIZE = 8192
"""Fixed reduction chunk; results are bit-identical for a given chunk size."""

SHELL_TAIL_CUTOFF = 1e-12
"""Partial sums of the shell series stop once the next term is below this."""


class Settings(BaseSettings):
    """Process-level settings from environment variables.

    Attributes:
        log_level: Logging level (DEBUG, INFO, WARNING, ERROR)
        output_dir: Default directory for reports and artifacts
        chunk_size: Reduction chunk used by integrators and evaluators
        term_cap: Default FPolynomial term cap
    """

    model_config = SettingsConfigDict(
        env_prefix="INNER_",
        env_file=".env",
        env_file_encoding="utf-8",
        case_sensitive=False,
        extra="ignore",
    )

    log_level: str = "INFO"
    output_dir: Path = Field(
        default=Path("runs"),
        description="Directory receiving reports, CSV tables and the manifest",
    )
    chunk_size: int = Field(
        default=DEFAULT_CHUNK_SIZE,
        description="Points per evaluation/reduction chunk",
    )
    term_cap: int = Field(
        default=DEFAULT_TERM_CAP,
        description="Maximum FPolynomial terms before TermBudgetError",
    )

    def run_defaults(self) -> dict[str, Any]:
        """RunConfig fields the environment may supply when neither file nor flag does."""
        return {
            "output_dir": self.output_dir,
            "chunk_size": self.chunk_size,
            "term_cap": self.term_cap,
        }


class RunConfig(BaseModel):
    """Flat run document shared by all commands.

    Unknown keys are rejected. Counts must be positive.
    """

    model_config = ConfigDict(extra="forbid", frozen=True)

    q: int = Field(default=1, ge=1, description="Covering exponent; sheet count N = q")
    seed: int = Field(ge=0, lt=2**64, description="Master seed (64-bit)")
    sample_count: int = Field(default=DEFAULT_SAMPLE_COUNT, gt=0)
    probe_count: int = Field(default=DEFAULT_PROBE_COUNT, gt=0)
    candidate_count: int = Field(default=DEFAULT_CANDIDATE_COUNT, gt=0)
    k: int = Field(default=8, gt=0, description="RW degree; packing radius r = 1/sqrt(k)")
    sign_trials: int = Field(default=DEFAULT_SIGN_TRIALS, gt=0)
    rotation_trials: int = Field(default=DEFAULT_ROTATION_TRIALS, gt=0)
    budget: int = Field(default=DEFAULT_BUDGET, gt=0)
    defect_target: Optional[float] = Field(
        default=None, description="Stop once the defect drops below; default 0.05*N"
    )
    d_psi: int = Field(default=DEFAULT_SYMBOL_DEGREE, ge=0)
    d_psi_max: int = Field(default=DEFAULT_SYMBOL_DEGREE_MAX, ge=0)
    epsilon_energy: float = Field(default=DEFAULT_ENERGY_FLOOR, gt=0)
    output_dir: Path = Field(default=Path("runs"))
    boundary_tolerance: float = Field(default=DEFAULT_BOUNDARY_TOLERANCE, gt=0)
    ramification_guard: float = Field(default=DEFAULT_RAMIFICATION_GUARD, gt=0)
    sigma_threshold: float = Field(default=DEFAULT_SIGMA_THRESHOLD, gt=0)
    term_cap: int = Field(default=DEFAULT_TERM_CAP, gt=0)
    chunk_size: int = Field(default=DEFAULT_CHUNK_SIZE, gt=0)
    phase_grid: int = Field(default=64, gt=0)
    max_damping: int = Field(default=4, ge=0)
    packing_slack: float = Field(default=0.05, ge=0, lt=1)
    li_modulus: Optional[int] = Field(default=None, gt=0)
    li_width: Optional[int] = Field(default=None, gt=0)
    target_constant: float = Field(default=1.0, description="phi(eta) = c + s*|eta_1|^2")
    target_slope: float = Field(default=0.0)
    monomial_degree: int = Field(
        default=4, ge=0, le=12, description="Largest |alpha|, |beta| in the monomial identity suite"
    )

    @property
    def sheet_count(self) -> int:
        """Sheet count N of the covering (equals q)."""
        return self.q

    @property
    def radius(self) -> float:
        """Packing radius r = 1/sqrt(k)."""
        return self.k**-0.5

    @property
    def resolved_defect_target(self) -> float:
        """Defect target, defaulting to 0.05*N."""
        if self.defect_target is None:
            return DEFAULT_DEFECT_FRACTION * self.sheet_count
        return self.defect_target

    @model_validator(mode="after")
    def _check_ranges(self) -> "RunConfig":
        if self.d_psi > self.d_psi_max:
            raise ValueError(f"d_psi ({self.d_psi}) exceeds d_psi_max ({self.d_psi_max})")
        if self.defect_target is not None and not 0 < self.defect_target < self.sheet_count:
            raise ValueError(
                f"defect_target must lie in (0, N={self.sheet_count}), got {self.defect_target}"
            )
        if (self.li_modulus is None) != (self.li_width is None):
            raise ValueError("li_modulus and li_width must be given together")
        if self.li_modulus is not None and self.li_width >= self.li_modulus:
            raise ValueError("li_width must be smaller than li_modulus")
        return self


def load_run_config(
    path: Optional[Path],
    overrides: dict[str, Any],
    defaults: Optional[dict[str, Any]] = None,
) -> RunConfig:
    """Load a RunConfig from a JSON document and explicit CLI overrides.

    Precedence: defaults < document < overrides.

    Args:
        path: Optional path to a flat JSON document
        overrides: Field values given on the command line (None entries ignored)
        defaults: Fallback values, typically Settings.run_defaults()

    Returns:
        Validated RunConfig

    Raises:
        ConfigurationError: If the document is unreadable or any field is invalid
    """
    document: dict[str, Any] = {}
    if path is not None:
        try:
            document = json.loads(Path(path).read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as e:
            raise ConfigurationError(f"Cannot read config file {path}: {e}")
        if not isinstance(document, dict):
            raise ConfigurationError(f"Config file {path} must hold a flat JSON object")

    document = {**(defaults or {}), **document}
    document.update({key: value for key, value in overrides.items() if value is not None})

    try:
        return RunConfig.model_validate(document)
    except ValidationError as e:
        first = e.errors()[0]
        field = ".".join(str(part) for part in first.get("loc", ())) or "config"
        raise ConfigurationError(f"Invalid value for '{field}': {first['msg']}", field=field)


_settings: Optional[Settings] = None


def get_settings() -> Settings:
    """Get the settings singleton, creating it on first use.

    Returns:
        Settings instance with environment variables loaded from .env
    """
    global _settings
    if _settings is None:
        _settings = Settings()
    return _settings
