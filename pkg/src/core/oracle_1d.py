"""One-variable inner functions used as an independent oracle.

Finite Blaschke products and atomic singular factors on the unit disc. Both
have unimodular boundary values, which makes them a trusted reference for the
boundary-modulus checks run elsewhere.
"""

import json
import logging
import math
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Any, Optional

import numpy as np
from pydantic import (
    BaseModel,
    ConfigDict,
    Field,
    ValidationError,
    field_validator,
    model_validator,
)

from src.core.errors import ConfigurationError, DomainError, PoleError
from src.core.reports import IDENTITY_ANCHORS

logger = logging.getLogger(__name__)

POLE_TOLERANCE = 1e-12
"""Distance to a reflected zero below which evaluation raises PoleError."""

BOUNDARY_TOLERANCE = 1e-12
RADIAL_TOLERANCE = 1e-6


def _as_pair(value: Any) -> tuple[float, float]:
    if isinstance(value, complex):
        return (value.real, value.imag)
    if isinstance(value, (int, float)):
        return (float(value), 0.0)
    re, im = value
    return (float(re), float(im))


class BlaschkeSpec(BaseModel):
    """Finite Blaschke product e^{i theta} z^k prod (|a|/a)(a - z)/(1 - conj(a) z).

    Zeros are stored as (re, im) pairs so the model round-trips through JSON.
    Zeros at the origin are folded into the vanishing order.
    """

    model_config = ConfigDict(extra="forbid", frozen=True)

    zeros: list[tuple[float, float]] = Field(
        default_factory=list, description="Zeros in the open unit disc, excluding 0"
    )
    order: int = Field(0, ge=0, description="Vanishing order at the origin")
    phase: float = Field(0.0, description="Rotation angle theta")

    @model_validator(mode="before")
    @classmethod
    def fold_origin_zeros(cls, data: Any) -> Any:
        if not isinstance(data, dict) or "zeros" not in data:
            return data
        pairs = [_as_pair(z) for z in data["zeros"]]
        kept = [p for p in pairs if p != (0.0, 0.0)]
        folded = len(pairs) - len(kept)
        return {**data, "zeros": kept, "order": int(data.get("order", 0)) + folded}

    @field_validator("zeros")
    @classmethod
    def zeros_inside_disc(cls, zeros: list[tuple[float, float]]) -> list[tuple[float, float]]:
        for re, im in zeros:
            if not math.isfinite(re) or not math.isfinite(im) or math.hypot(re, im) >= 1.0:
                raise ValueError(f"zero {complex(re, im)} is not inside the unit disc")
        return zeros

    @property
    def zero_values(self) -> np.ndarray:
        return np.array([complex(re, im) for re, im in self.zeros], dtype=np.complex128)

    @property
    def degree(self) -> int:
        return self.order + len(self.zeros)


class SingularSpec(BaseModel):
    """Atomic singular inner factor exp(-sum m_j (zeta_j + z)/(zeta_j - z))."""

    model_config = ConfigDict(extra="forbid", frozen=True)

    atoms: list[tuple[float, float]] = Field(
        default_factory=list, description="(angle, mass) pairs on the unit circle"
    )

    @field_validator("atoms")
    @classmethod
    def masses_positive(cls, atoms: list[tuple[float, float]]) -> list[tuple[float, float]]:
        for angle, mass in atoms:
            if not math.isfinite(angle) or not math.isfinite(mass) or mass <= 0:
                raise ValueError(f"atom at angle {angle} has non-positive mass {mass}")
        return atoms

    @property
    def atom_points(self) -> np.ndarray:
        return np.exp(1j * np.array([a for a, _ in self.atoms], dtype=float))

    @property
    def masses(self) -> np.ndarray:
        return np.array([m for _, m in self.atoms], dtype=float)


class OracleSpec(BaseModel):
    """JSON document consumed by the oracle-1d command."""

    model_config = ConfigDict(extra="forbid")

    blaschke: BlaschkeSpec = Field(default_factory=BlaschkeSpec)
    singular: SingularSpec = Field(default_factory=SingularSpec)
    boundary_count: int = Field(1000, gt=0)
    radius: float = Field(1.0 - 1e-8, gt=0.0, lt=1.0)
    radial_angles: Optional[list[float]] = None


def default_oracle_spec() -> OracleSpec:
    """Reference spec used when oracle-1d runs without a document."""
    return OracleSpec(
        blaschke=BlaschkeSpec(
            zeros=[(0.5, 0.0), (0.0, 0.3), (-0.7, 0.2), (0.1, -0.9)], order=1, phase=0.25
        ),
        singular=SingularSpec(atoms=[(0.0, 1.0), (math.pi / 2, 0.5)]),
    )


def load_oracle_spec(path: Optional[Path]) -> OracleSpec:
    if path is None:
        return default_oracle_spec()
    try:
        data = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as e:
        raise ConfigurationError(f"Cannot read oracle spec {path}: {e}") from e
    try:
        return OracleSpec.model_validate(data)
    except ValidationError as e:
        first = e.errors()[0]
        field = ".".join(str(part) for part in first["loc"])
        raise ConfigurationError(f"Invalid value for '{field}': {first['msg']}", field=field) from e


def compose_blaschke(first: BlaschkeSpec, second: BlaschkeSpec) -> BlaschkeSpec:
    """Spec of the product of two Blaschke products."""
    return BlaschkeSpec(
        zeros=[*first.zeros, *second.zeros],
        order=first.order + second.order,
        phase=first.phase + second.phase,
    )


def blaschke_eval(spec: BlaschkeSpec, z: complex | np.ndarray) -> complex | np.ndarray:
    """Evaluate a Blaschke product.

    Args:
        spec: Zeros, vanishing order and phase
        z: Point or array of points

    Returns:
        Values of the product, same shape as z

    Raises:
        PoleError: If z hits a reflected zero 1/conj(a)
    """
    scalar = np.ndim(z) == 0
    points = np.atleast_1d(np.asarray(z, dtype=np.complex128))
    result = np.exp(1j * spec.phase) * points**spec.order

    for a in spec.zero_values:
        denominator = 1.0 - np.conj(a) * points
        if np.any(np.abs(denominator) < POLE_TOLERANCE):
            raise PoleError(f"Evaluation at the reflected zero {1.0 / np.conj(a)}")
        result = result * (abs(a) / a) * (a - points) / denominator

    return complex(result[0]) if scalar else result


def singular_eval(spec: SingularSpec, z: complex | np.ndarray) -> complex | np.ndarray:
    """Evaluate an atomic singular inner factor inside the open disc.

    Raises:
        DomainError: If any |z| >= 1
    """
    scalar = np.ndim(z) == 0
    points = np.atleast_1d(np.asarray(z, dtype=np.complex128))
    if np.any(np.abs(points) >= 1.0):
        raise DomainError("Singular factor is evaluated inside the open unit disc only")

    exponent = np.zeros(points.shape, dtype=np.complex128)
    for zeta, mass in zip(spec.atom_points, spec.masses):
        exponent -= mass * (zeta + points) / (zeta - points)
    result = np.exp(exponent)
    return complex(result[0]) if scalar else result


@dataclass
class OracleCheck:
    """Measured deviation of a boundary-modulus check."""

    name: str
    identity: str
    count: int
    max_deviation: float
    tolerance: float

    @property
    def passed(self) -> bool:
        return self.max_deviation <= self.tolerance

    def to_dict(self) -> dict[str, Any]:
        return {**asdict(self), "passed": self.passed, "anchor": IDENTITY_ANCHORS[self.name]}


def circle_points(count: int) -> np.ndarray:
    """Equispaced points on the unit circle, offset by half a step."""
    if count < 1:
        raise DomainError(f"count must be positive, got {count}")
    angles = 2.0 * np.pi * (np.arange(count) + 0.5) / count
    return np.exp(1j * angles)


def check_blaschke_boundary(spec: BlaschkeSpec, count: int = 1000) -> OracleCheck:
    values = blaschke_eval(spec, circle_points(count))
    deviation = float(np.max(np.abs(np.abs(values) - 1.0)))
    logger.debug(f"Blaschke boundary deviation {deviation:.3e} over {count} points")
    return OracleCheck(
        name="blaschke_boundary_modulus",
        identity="|B(e^{it})| = 1",
        count=count,
        max_deviation=deviation,
        tolerance=BOUNDARY_TOLERANCE,
    )


def default_radial_angles(spec: SingularSpec, count: int = 64) -> list[float]:
    """Angles halfway between grid points, dropping those within 0.5 of an atom."""
    grid = 2.0 * np.pi * (np.arange(count) + 0.5) / count
    atoms = np.array([a for a, _ in spec.atoms], dtype=float)
    if atoms.size == 0:
        return grid.tolist()
    gap = np.abs(np.angle(np.exp(1j * (grid[:, None] - atoms[None, :]))))
    return grid[np.all(gap > 0.5, axis=1)].tolist()


def check_singular_radial(
    spec: SingularSpec, angles: Optional[list[float]] = None, radius: float = 1.0 - 1e-8
) -> OracleCheck:
    """Measure | |G(radius e^{it})| - 1 | along the given angles."""
    if angles is None:
        angles = default_radial_angles(spec)
    if not angles:
        raise DomainError("No radial angles to check")
    points = radius * np.exp(1j * np.asarray(angles, dtype=float))
    values = singular_eval(spec, points)
    deviation = float(np.max(np.abs(np.abs(values) - 1.0)))
    logger.debug(f"Singular radial deviation {deviation:.3e} at radius {radius}")
    return OracleCheck(
        name="singular_radial_modulus",
        identity="|G(r e^{it})| -> 1 off the atoms",
        count=len(angles),
        max_deviation=deviation,
        tolerance=RADIAL_TOLERANCE,
    )


def check_factorization(
    first: BlaschkeSpec, second: BlaschkeSpec, count: int = 1000
) -> OracleCheck:
    """Compare B_a * B_b against the concatenated spec on the circle."""
    points = circle_points(count)
    product = blaschke_eval(first, points) * blaschke_eval(second, points)
    combined = blaschke_eval(compose_blaschke(first, second), points)
    return OracleCheck(
        name="blaschke_factorization",
        identity="B_a B_b = B_(a,b)",
        count=count,
        max_deviation=float(np.max(np.abs(product - combined))),
        tolerance=BOUNDARY_TOLERANCE,
    )


def run_oracle_suite(spec: OracleSpec) -> list[OracleCheck]:
    """Boundary, radial and factorization checks of one oracle document."""
    half = len(spec.blaschke.zeros) // 2
    first = BlaschkeSpec(zeros=spec.blaschke.zeros[:half], order=spec.blaschke.order)
    second = BlaschkeSpec(zeros=spec.blaschke.zeros[half:], phase=spec.blaschke.phase)
    checks = [
        check_blaschke_boundary(spec.blaschke, spec.boundary_count),
        check_factorization(first, second, spec.boundary_count),
    ]
    if spec.singular.atoms:
        checks.append(check_singular_radial(spec.singular, spec.radial_angles, spec.radius))
    return checks
