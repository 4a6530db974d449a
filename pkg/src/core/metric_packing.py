"""Maximal r-separated packings of the boundary under d_M and doubling diagnostics.

Distances are computed on ball images: d_M(z, w) = sqrt(1 - |<f(z), f(w)>|^2).
"""

import logging
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from src.core.covering_domain import (
    CoveringMap,
    PointArray,
    image_distance,
    measure_quasi_triangle,
)
from src.core.errors import DomainError, EmptyInputError, SeparationError
from src.core.sphere_measure import BoundarySampleSet

logger = logging.getLogger(__name__)

SEPARATION_TOLERANCE = 1e-9
"""Slack allowed when re-checking the pairwise separation of a center set."""

_BLOCK = 512


@dataclass(frozen=True, eq=False)
class PackingResult:
    """Greedy maximal packing over a candidate cloud.

    Attributes:
        centers: Accepted centers, complex array (K, 2)
        radius: Separation radius r
        candidate_count: Size of the candidate cloud
        seed: Seed of the candidate cloud
        q: Covering exponent
        center_indices: Positions of the centers in the candidate cloud
    """

    centers: PointArray
    radius: float
    candidate_count: int
    seed: Optional[int]
    q: int
    center_indices: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.int64))

    @property
    def K(self) -> int:
        return int(self.centers.shape[0])

    def to_dict(self) -> dict:
        return {
            "K": self.K,
            "candidate_count": self.candidate_count,
            "centers": [
                [float(z1.real), float(z1.imag), float(z2.real), float(z2.imag)]
                for z1, z2 in self.centers
            ],
            "q": self.q,
            "r": self.radius,
            "seed": self.seed,
        }


@dataclass(frozen=True)
class CoverReport:
    """Outcome of verify_cover: covered iff worst_distance <= 2r."""

    covered: bool
    worst_distance: float
    radius: float

    def to_dict(self) -> dict:
        return {
            "covered": self.covered,
            "cover_radius": 2 * self.radius,
            "worst_distance": self.worst_distance,
        }


@dataclass(frozen=True)
class ShellHistogram:
    """Counts #H_m of centers with m r <= d_M(zeta, center) < (m + 1) r."""

    counts: tuple[int, ...]
    radius: float

    @property
    def total(self) -> int:
        return int(sum(self.counts))

    @property
    def bounds(self) -> tuple[int, ...]:
        return tuple((m + 2) ** 2 for m in range(len(self.counts)))

    @property
    def violations(self) -> list[int]:
        """Shells whose count exceeds (m + 2)^2."""
        return [m for m, (c, b) in enumerate(zip(self.counts, self.bounds)) if c > b]

    @property
    def within_bound(self) -> bool:
        return not self.violations

    def to_dict(self) -> dict:
        return {
            "bounds": list(self.bounds),
            "counts": list(self.counts),
            "within_bound": self.within_bound,
        }


@dataclass(frozen=True)
class DoublingReport:
    """Measured constants of the homogeneous-space structure of the boundary.

    Attributes:
        c1: Quasi-triangle constant (max over sampled triples)
        c2: Doubling constant, max of mass(E(w, 2r)) / mass(E(w, r))
        c3: Engulfing diagnostic for intersecting balls (not asserted)
        c4: Total boundary mass
        ratios: Per-radius doubling ratios with their relative standard errors
    """

    c1: float
    c2: float
    c3: float
    c4: float
    ratios: list[dict] = field(default_factory=list)

    def c2_within(self, ceiling: float = 4.0, sigmas: float = 3.0) -> bool:
        """True iff every doubling ratio is below ceiling up to sigmas relative errors."""
        return all(
            entry["ratio"] <= ceiling * (1.0 + sigmas * entry["relative_error"])
            for entry in self.ratios
        )

    def to_dict(self) -> dict:
        return {
            "c1": self.c1,
            "c2": self.c2,
            "c2_within_4": self.c2_within(),
            "c3_diagnostic": self.c3,
            "c4": self.c4,
            "ratios": self.ratios,
        }


def greedy_packing(
    candidates: BoundarySampleSet, r: float, covering: CoveringMap
) -> PackingResult:
    """Sweep candidates in order, accepting a point iff it is >= r from every center.

    Candidates are screened against earlier centers block by block; acceptance
    inside a block stays sequential, so the result equals the plain sweep.

    Raises:
        EmptyInputError: If there are no candidates
        DomainError: If r <= 0
    """
    if candidates.count == 0:
        raise EmptyInputError("greedy_packing needs at least one candidate")
    if r <= 0:
        raise DomainError(f"Packing radius must be positive, got {r}")

    images = covering.images(candidates.points)
    accepted: list[int] = []
    center_images = np.zeros((0, 2), dtype=complex)

    for start in range(0, candidates.count, _BLOCK):
        block = images[start : start + _BLOCK]
        if center_images.shape[0]:
            survivors = np.all(image_distance(block, center_images) >= r, axis=1)
        else:
            survivors = np.ones(block.shape[0], dtype=bool)

        fresh: list[int] = []
        for offset in np.flatnonzero(survivors):
            point = block[offset : offset + 1]
            if fresh and np.any(image_distance(point, block[fresh]) < r):
                continue
            fresh.append(int(offset))

        if fresh:
            accepted.extend(start + i for i in fresh)
            center_images = np.vstack((center_images, block[fresh]))

    indices = np.array(accepted, dtype=np.int64)
    logger.info(f"Greedy packing: K={indices.size} centers at r={r:.4f}")
    return PackingResult(
        centers=candidates.points[indices],
        radius=float(r),
        candidate_count=candidates.count,
        seed=candidates.seed,
        q=covering.q,
        center_indices=indices,
    )


def min_center_distance(
    points: PointArray, centers: PointArray, covering: CoveringMap
) -> np.ndarray:
    """Distance from every point to its nearest center."""
    center_images = covering.images(centers)
    images = covering.images(points)
    out = np.empty(images.shape[0])
    for start in range(0, images.shape[0], 4 * _BLOCK):
        chunk = image_distance(images[start : start + 4 * _BLOCK], center_images)
        out[start : start + 4 * _BLOCK] = chunk.min(axis=1)
    return out


def verify_cover(
    result: PackingResult, candidates: BoundarySampleSet, covering: CoveringMap
) -> CoverReport:
    """Check that every candidate lies within 2r of some center."""
    if result.K == 0:
        return CoverReport(False, float("inf"), result.radius)
    worst = float(min_center_distance(candidates.points, result.centers, covering).max())
    return CoverReport(worst <= 2 * result.radius, worst, result.radius)


def minimum_separation(centers: PointArray, covering: CoveringMap) -> float:
    """Smallest pairwise d_M between distinct centers (inf for fewer than two)."""
    if centers.shape[0] < 2:
        return float("inf")
    distances = covering.distance_matrix(centers, centers)
    np.fill_diagonal(distances, np.inf)
    return float(distances.min())


def shell_histogram(
    centers: PointArray,
    zeta: PointArray,
    r: float,
    covering: CoveringMap,
    tolerance: float = SEPARATION_TOLERANCE,
) -> ShellHistogram:
    """Count centers per shell H_m around zeta.

    Raises:
        SeparationError: If the centers are not r-separated (up to tolerance)
    """
    if r <= 0:
        raise DomainError(f"Shell width must be positive, got {r}")
    separation = minimum_separation(centers, covering)
    if separation < r - tolerance:
        raise SeparationError(f"Centers are only {separation:.6g}-separated, need {r:.6g}")

    zeta = covering.require_boundary(zeta)
    distances = covering.distance_matrix(zeta, centers)[0]
    shells = np.floor(distances / r).astype(np.int64)
    counts = np.bincount(shells, minlength=int(np.floor(1.0 / r)) + 1)
    return ShellHistogram(counts=tuple(int(c) for c in counts), radius=float(r))


def kernel_decay_holds(
    centers: PointArray, zeta: PointArray, r: float, covering: CoveringMap, atol: float = 1e-12
) -> bool:
    """Check |<f(zeta), f(w_j)>|^2 <= 1 - m^2 r^2 for every center w_j in shell H_m."""
    u = covering.images(zeta)
    v = covering.images(centers)
    gram = np.abs(u @ v.conj().T)[0] ** 2
    shells = np.floor(np.sqrt(np.clip(1.0 - gram, 0.0, None)) / r)
    return bool(np.all(gram <= 1.0 - shells**2 * r**2 + atol))


def packing_lower_bound(result: PackingResult, mass: float, slack: float) -> tuple[float, bool]:
    """Lower bound mass / (4 r^2) on K, and whether K meets it up to the relative slack."""
    bound = mass / (4.0 * result.radius**2)
    return bound, result.K >= bound * (1.0 - slack)


def measure_doubling(
    covering: CoveringMap,
    samples: BoundarySampleSet,
    radii: Sequence[float],
    seed: int,
    ball_count: int = 16,
    triples: int = 10_000,
) -> DoublingReport:
    """Measure C1, C2, C3 and C4 on a sample of sigma_M.

    C3 uses the intersecting-balls reading: for E(w, r) and E(z, r) sharing a
    sample point, the smallest factor with E(w, r) inside E(z, C3 r).
    """
    rng = np.random.default_rng(seed)
    points = samples.points
    n = samples.count

    picks = rng.integers(0, n, size=(3, triples))
    c1 = measure_quasi_triangle(covering, points[picks[0]], points[picks[1]], points[picks[2]])

    ratios: list[dict] = []
    c3 = 0.0
    centers = points[rng.integers(0, n, size=ball_count)]
    partners = points[rng.integers(0, n, size=ball_count)]
    distances = covering.distance_matrix(centers, points)
    partner_distances = covering.distance_matrix(partners, points)
    for radius in radii:
        inner = distances < radius
        outer = distances < 2 * radius
        small = samples.weights @ inner.T
        large = samples.weights @ outer.T
        counts_small = inner.sum(axis=1)
        counts_large = outer.sum(axis=1)
        usable = counts_small > 0
        if not np.any(usable):
            continue
        ratio = large[usable] / small[usable]
        relative = np.sqrt(1.0 / counts_small[usable] + 1.0 / counts_large[usable])
        worst = int(np.argmax(ratio))
        ratios.append(
            {
                "radius": float(radius),
                "ratio": float(ratio[worst]),
                "relative_error": float(relative[worst]),
            }
        )

        partner_balls = partner_distances < radius
        for i in range(ball_count):
            if np.any(inner[i] & partner_balls[i]):
                c3 = max(c3, float(partner_distances[i][inner[i]].max() / radius))

    c2 = max((entry["ratio"] for entry in ratios), default=float("nan"))
    report = DoublingReport(c1=c1, c2=c2, c3=c3, c4=samples.total_mass, ratios=ratios)
    logger.info(f"Doubling constants: C1={c1:.4f} C2={c2:.4f} C3~{c3:.4f} C4={report.c4:g}")
    return report
