"""Sampling of the sphere measure sigma and the boundary measure sigma_M.

sigma is the rotation-invariant probability measure on the unit sphere S of C^2.
sigma_M is its sheet-local pullback to the boundary of M_q, with total mass N.
Sample sets are weighted point clouds; the same type models any positive
measure mu used downstream.
"""

import csv
import hashlib
import json
import logging
from dataclasses import dataclass, field
from fractions import Fraction
from math import factorial
from pathlib import Path
from typing import Callable, NamedTuple, Optional, Union

import numpy as np

from src.core.config import DEFAULT_CHUNK_SIZE, DEFAULT_SIGMA_THRESHOLD
from src.core.covering_domain import CoveringMap, PointArray, image_inner
from src.core.errors import ConfigurationError, DomainError, EmptyInputError, NonFiniteError

logger = logging.getLogger(__name__)


class MultiIndex(NamedTuple):
    """Exponent pair alpha = (a1, a2) of a monomial z1^a1 z2^a2."""

    a1: int
    a2: int

    @property
    def degree(self) -> int:
        return self.a1 + self.a2

    def factorial(self) -> int:
        """alpha! = a1! a2!"""
        return factorial(self.a1) * factorial(self.a2)


@dataclass(frozen=True)
class IntegralEstimate:
    """Monte Carlo estimate with its standard error.

    Attributes:
        value: Estimate (real or complex)
        std_error: Standard error (0 for exact values, inf when undetermined)
        sample_count: Number of samples behind the estimate
    """

    value: Union[float, complex]
    std_error: float
    sample_count: int

    def within(
        self,
        target: Union[float, complex],
        sigmas: float = DEFAULT_SIGMA_THRESHOLD,
        atol: float = 1e-12,
    ) -> bool:
        """True iff |value - target| <= sigmas * std_error + atol."""
        return bool(abs(self.value - target) <= sigmas * self.std_error + atol)

    def deviation(self, target: Union[float, complex]) -> float:
        """Distance to target in units of the standard error."""
        gap = abs(self.value - target)
        if self.std_error == 0:
            return 0.0 if gap == 0 else float("inf")
        return float(gap / self.std_error)

    def to_dict(self) -> dict:
        value = complex(self.value)
        return {
            "value": value.real if value.imag == 0 else [value.real, value.imag],
            "std_error": self.std_error,
            "sample_count": self.sample_count,
        }


@dataclass(frozen=True, eq=False)
class BoundarySampleSet:
    """Weighted boundary points representing sigma_M (or any positive measure).

    Attributes:
        points: Complex array (count, 2) of boundary points
        weights: Positive weights; uniform N / count for sigma_M
        mass: Total mass (exactly N for sigma_M)
        seed: Seed the points were drawn from
        q: Covering exponent the points belong to
        resample_count: Draws discarded inside the ramification guard
    """

    points: PointArray
    weights: np.ndarray
    mass: float
    seed: Optional[int]
    q: int
    resample_count: int = 0
    uniform: bool = True
    label: str = field(default="sigma_M")

    @property
    def count(self) -> int:
        return int(self.points.shape[0])

    @property
    def total_mass(self) -> float:
        return self.mass

    def head(self, count: int) -> "BoundarySampleSet":
        """First `count` points, reweighted to the same total mass."""
        count = min(count, self.count)
        weights = self.weights[:count]
        scale = self.mass / float(np.sum(weights))
        return BoundarySampleSet(
            points=self.points[:count],
            weights=weights * scale,
            mass=self.mass,
            seed=self.seed,
            q=self.q,
            resample_count=self.resample_count,
            uniform=self.uniform,
            label=self.label,
        )

    def reweighted(self, density: np.ndarray, label: str = "mu") -> "BoundarySampleSet":
        """The measure density * self as a new sample set.

        Raises:
            DomainError: If the density is negative, non-finite or has zero total mass
        """
        density = np.asarray(density, dtype=float)
        if density.shape != (self.count,):
            raise DomainError(f"Density must have shape ({self.count},), got {density.shape}")
        if not np.all(np.isfinite(density)) or np.any(density < 0):
            raise DomainError("Density must be finite and nonnegative")
        weights = self.weights * density
        mass = float(np.sum(weights))
        if mass <= 0:
            raise DomainError("Reweighted measure has zero total mass")
        return BoundarySampleSet(
            points=self.points,
            weights=weights,
            mass=mass,
            seed=self.seed,
            q=self.q,
            resample_count=self.resample_count,
            uniform=False,
            label=label,
        )

    @classmethod
    def point_mass(cls, point: np.ndarray, q: int, mass: float = 1.0) -> "BoundarySampleSet":
        """A single atom of the given mass at a boundary point."""
        if mass <= 0:
            raise DomainError("Point mass must be positive")
        return cls(
            points=np.asarray(point, dtype=complex).reshape(1, 2),
            weights=np.array([mass]),
            mass=float(mass),
            seed=None,
            q=q,
            uniform=False,
            label="point_mass",
        )


# ----------------------------------------------------------------------
# Sampling
# ----------------------------------------------------------------------


def _draw_sphere(rng: np.random.Generator, count: int) -> PointArray:
    gaussian = rng.standard_normal((count, 4))
    norms = np.linalg.norm(gaussian, axis=1)
    while np.any(norms == 0):
        bad = norms == 0
        gaussian[bad] = rng.standard_normal((int(bad.sum()), 4))
        norms = np.linalg.norm(gaussian, axis=1)
    gaussian /= norms[:, np.newaxis]
    return np.column_stack(
        (gaussian[:, 0] + 1j * gaussian[:, 1], gaussian[:, 2] + 1j * gaussian[:, 3])
    )


def derive_seed(seed: int, *tags: Union[int, str]) -> int:
    """Independent 64-bit child seed for a named stage of a seeded run."""
    entropy = [int(seed)]
    for tag in tags:
        if isinstance(tag, str):
            tag = int.from_bytes(hashlib.sha256(tag.encode("utf-8")).digest()[:8], "big")
        entropy.append(int(tag))
    return int(np.random.SeedSequence(entropy).generate_state(1, dtype=np.uint64)[0])


def sample_sphere(seed: int, count: int) -> PointArray:
    """Draw sigma-uniform points on S by normalizing 4-dimensional Gaussians.

    Args:
        seed: Generator seed
        count: Number of points (>= 1)

    Returns:
        Complex array of shape (count, 2)
    """
    if count < 1:
        raise EmptyInputError("sample_sphere needs count >= 1")
    return _draw_sphere(np.random.default_rng(seed), count)


def sample_boundary(covering: CoveringMap, seed: int, count: int) -> BoundarySampleSet:
    """Draw a sigma_M sample: lifts of sigma-uniform sphere points onto uniform sheets.

    Draws landing inside the ramification guard are replaced by further draws
    from the same generator; the number of replacements is recorded.

    Args:
        covering: Covering map defining the boundary
        seed: Generator seed
        count: Number of points (>= 1)

    Returns:
        BoundarySampleSet with uniform weights N / count and mass N
    """
    if count < 1:
        raise EmptyInputError("sample_boundary needs count >= 1")

    rng = np.random.default_rng(seed)
    spheres = _draw_sphere(rng, count)
    resample_count = 0
    if covering.q > 1:
        bad = np.abs(spheres[:, 1]) < covering.ramification_guard
        while np.any(bad):
            hits = int(bad.sum())
            resample_count += hits
            spheres[bad] = _draw_sphere(rng, hits)
            bad = np.abs(spheres[:, 1]) < covering.ramification_guard
    sheets = rng.integers(0, covering.sheet_count, size=count)

    points = covering.lift_many(spheres, sheets)
    n = covering.sheet_count
    if resample_count:
        logger.debug(f"Resampled {resample_count} draws inside the ramification guard")
    return BoundarySampleSet(
        points=points,
        weights=np.full(count, n / count),
        mass=float(n),
        seed=seed,
        q=covering.q,
        resample_count=resample_count,
    )


# ----------------------------------------------------------------------
# Exact monomial integrals
# ----------------------------------------------------------------------


def _check_index(alpha: tuple[int, int]) -> MultiIndex:
    index = MultiIndex(int(alpha[0]), int(alpha[1]))
    if index.a1 < 0 or index.a2 < 0:
        raise DomainError(f"Multi-index entries must be nonnegative, got {tuple(alpha)}")
    return index


def monomial_integral(alpha: tuple[int, int]) -> Fraction:
    """Integral over S of |z^alpha|^2 d sigma = alpha! / (1 + |alpha|)!, exact."""
    index = _check_index(alpha)
    return Fraction(index.factorial(), factorial(1 + index.degree))


def mixed_monomial_integral(alpha: tuple[int, int], beta: tuple[int, int]) -> Fraction:
    """Integral over S of z^alpha conj(z)^beta d sigma: 0 unless alpha == beta."""
    a, b = _check_index(alpha), _check_index(beta)
    if a != b:
        return Fraction(0)
    return monomial_integral(a)


def pulled_back_monomial_integral(
    covering: CoveringMap, alpha: tuple[int, int], beta: tuple[int, int]
) -> Fraction:
    """Integral over dM of f^alpha conj(f)^beta d sigma_M = N times the sphere value."""
    return covering.sheet_count * mixed_monomial_integral(alpha, beta)


def cap_measure(delta: float) -> float:
    """sigma(E(eta, delta)) = delta^2 for 0 < delta <= 1.

    Raises:
        DomainError: If delta is outside (0, 1]
    """
    if not 0 < delta <= 1:
        raise DomainError(f"Cap radius must lie in (0, 1], got {delta}")
    return float(delta) ** 2


def estimate_cap_measure(center: np.ndarray, delta: float, spheres: PointArray) -> IntegralEstimate:
    """Monte Carlo count of sphere points in E(center, delta) = {|<eta, xi>|^2 > 1 - delta^2}."""
    if spheres.shape[0] == 0:
        raise EmptyInputError("No sphere points to count")
    gram = np.abs(image_inner(spheres, np.asarray(center, dtype=complex).reshape(1, 2))[:, 0]) ** 2
    hits = gram > 1.0 - delta**2
    n = hits.size
    p = float(np.mean(hits))
    return IntegralEstimate(p, float(np.sqrt(p * (1.0 - p) / n)) if n > 1 else float("inf"), n)


# ----------------------------------------------------------------------
# Integration
# ----------------------------------------------------------------------


def _chunked_sum(values: np.ndarray, chunk_size: int) -> Union[float, complex]:
    partials = [np.sum(values[i : i + chunk_size]) for i in range(0, values.shape[0], chunk_size)]
    return np.sum(np.array(partials))


def integrate_values(
    values: np.ndarray, samples: BoundarySampleSet, chunk_size: int = DEFAULT_CHUNK_SIZE
) -> IntegralEstimate:
    """Weighted sum of precomputed integrand values with a jackknife standard error.

    Raises:
        NonFiniteError: If any value is NaN or infinite
        DomainError: If the value count does not match the sample count
    """
    values = np.asarray(values)
    if values.shape != (samples.count,):
        raise DomainError(f"Expected {samples.count} integrand values, got {values.shape}")
    if not np.all(np.isfinite(values)):
        bad = int(np.count_nonzero(~np.isfinite(values)))
        raise NonFiniteError(f"Integrand is non-finite at {bad} sample points")

    n = samples.count
    if n == 0:
        raise EmptyInputError("Cannot integrate over an empty sample set")
    if np.all(values == values[0]):
        exact = values[0] * samples.mass
        return IntegralEstimate(_scalar(exact), 0.0, n)

    weights = samples.weights
    if samples.uniform:
        # equal weights: N * mean, with the jackknife reducing to the sample deviation
        value = samples.mass * _chunked_sum(values, chunk_size) / n
        spread = np.sum(np.abs(values - values.mean()) ** 2) / (n - 1) if n > 1 else np.inf
        std_error = float(samples.mass * np.sqrt(spread / n))
        return IntegralEstimate(_scalar(value), std_error, n)

    total = _chunked_sum(weights * values, chunk_size)
    # a leave-one-out needs at least two points carrying mass
    if n < 2 or np.count_nonzero(weights > 0) < 2:
        return IntegralEstimate(_scalar(total), float("inf"), n)
    mass = float(np.sum(weights))
    leave_out = mass / (mass - weights) * (total - weights * values)
    centered = leave_out - leave_out.mean()
    std_error = float(np.sqrt((n - 1) / n * np.sum(np.abs(centered) ** 2)))
    return IntegralEstimate(_scalar(total), std_error, n)


def integrate_boundary(
    integrand: Callable[[PointArray], np.ndarray],
    samples: BoundarySampleSet,
    chunk_size: int = DEFAULT_CHUNK_SIZE,
) -> IntegralEstimate:
    """Estimate the integral of G over dM against the sample measure.

    Args:
        integrand: Vectorized G mapping a (n, 2) point array to n values
        samples: Sample set representing the measure
        chunk_size: Evaluation and reduction chunk

    Returns:
        IntegralEstimate (exact with zero error for constant integrands)
    """
    pieces = [
        np.asarray(integrand(samples.points[i : i + chunk_size]))
        for i in range(0, samples.count, chunk_size)
    ]
    values = np.concatenate(pieces) if pieces else np.zeros(0)
    return integrate_values(values, samples, chunk_size)


def _scalar(value) -> Union[float, complex]:
    value = complex(value)
    return value.real if value.imag == 0 else value


# ----------------------------------------------------------------------
# Export / import
# ----------------------------------------------------------------------


def save_sample_set(samples: BoundarySampleSet, path: Path) -> Path:
    """Write rows (re z1, im z1, re z2, im z2, weight) and a JSON sidecar.

    Returns:
        Path of the sidecar
    """
    path = Path(path)
    with path.open("w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle)
        writer.writerow(["re_z1", "im_z1", "re_z2", "im_z2", "weight"])
        for row, weight in zip(samples.points, samples.weights):
            fields = (row[0].real, row[0].imag, row[1].real, row[1].imag, weight)
            writer.writerow([repr(float(v)) for v in fields])
    sidecar = path.with_suffix(".json")
    meta = {
        "count": samples.count,
        "label": samples.label,
        "mass": samples.mass,
        "q": samples.q,
        "resample_count": samples.resample_count,
        "seed": samples.seed,
        "uniform": samples.uniform,
    }
    sidecar.write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return sidecar


def load_sample_set(path: Path) -> BoundarySampleSet:
    """Read a sample set written by save_sample_set.

    Raises:
        ConfigurationError: If the CSV or its sidecar is missing or inconsistent
    """
    path = Path(path)
    sidecar = path.with_suffix(".json")
    try:
        meta = json.loads(sidecar.read_text(encoding="utf-8"))
        with path.open(newline="", encoding="utf-8") as handle:
            rows = list(csv.reader(handle))[1:]
    except (OSError, json.JSONDecodeError) as e:
        raise ConfigurationError(f"Cannot read sample set {path}: {e}")

    data = np.array([[float(v) for v in row] for row in rows], dtype=float).reshape(-1, 5)
    if data.shape[0] != meta.get("count"):
        raise ConfigurationError(
            f"Sample set {path} holds {data.shape[0]} rows, sidecar says {meta.get('count')}"
        )
    points = np.column_stack((data[:, 0] + 1j * data[:, 1], data[:, 2] + 1j * data[:, 3]))
    return BoundarySampleSet(
        points=points,
        weights=data[:, 4],
        mass=float(meta["mass"]),
        seed=meta.get("seed"),
        q=int(meta["q"]),
        resample_count=int(meta.get("resample_count", 0)),
        uniform=bool(meta.get("uniform", True)),
        label=meta.get("label", "sigma_M"),
    )
