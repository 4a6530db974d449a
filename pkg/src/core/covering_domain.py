"""Covering domain M_q, the covering map f(z1, z2) = (z1, z2^q) and boundary geometry.

M_q = {|z1|^2 + |z2|^(2q) < 1} is mapped onto the unit ball B of C^2 by f with
N = q sheets. The ramification locus is Z = {z2 = 0}.

Scalar operations take ComplexPoint2 values. Vectorized helpers take numpy
arrays of shape (n, 2) with complex dtype; rows are (z1, z2).
"""

import logging
from dataclasses import dataclass
from typing import Sequence, Union

import numpy as np

from src.core.config import DEFAULT_BOUNDARY_TOLERANCE, DEFAULT_RAMIFICATION_GUARD
from src.core.errors import BoundaryError, DomainError, RamificationError

logger = logging.getLogger(__name__)

PointArray = np.ndarray
"""Complex array of shape (n, 2)."""


@dataclass(frozen=True)
class ComplexPoint2:
    """A point (z1, z2) of C^2 with finite components."""

    z1: complex
    z2: complex

    def __post_init__(self) -> None:
        object.__setattr__(self, "z1", complex(self.z1))
        object.__setattr__(self, "z2", complex(self.z2))
        if not (np.isfinite(self.z1) and np.isfinite(self.z2)):
            raise DomainError(f"Non-finite point component: ({self.z1}, {self.z2})")

    def as_array(self) -> np.ndarray:
        """Return the point as a complex array of shape (2,)."""
        return np.array([self.z1, self.z2], dtype=complex)

    @classmethod
    def from_array(cls, row: Sequence[complex]) -> "ComplexPoint2":
        return cls(complex(row[0]), complex(row[1]))

    def to_list(self) -> list[float]:
        """Coordinate quadruple (re z1, im z1, re z2, im z2)."""
        return [self.z1.real, self.z1.imag, self.z2.real, self.z2.imag]


PointLike = Union[ComplexPoint2, Sequence[ComplexPoint2], np.ndarray]


def as_point_array(points: PointLike) -> PointArray:
    """Normalize a point, a sequence of points or an array into shape (n, 2).

    Raises:
        DomainError: If the array has the wrong shape or non-finite entries
    """
    if isinstance(points, ComplexPoint2):
        array = points.as_array()[np.newaxis, :]
    elif isinstance(points, np.ndarray):
        array = np.asarray(points, dtype=complex)
        if array.ndim == 1:
            array = array[np.newaxis, :]
    else:
        array = np.array([p.as_array() for p in points], dtype=complex).reshape(-1, 2)

    if array.ndim != 2 or array.shape[1] != 2:
        raise DomainError(f"Expected points of shape (n, 2), got {array.shape}")
    if not np.all(np.isfinite(array)):
        raise DomainError("Point array contains non-finite entries")
    return array


def image_inner(u: PointArray, v: PointArray) -> np.ndarray:
    """Hermitian inner products <u_i, v_j> = u_i1 conj(v_j1) + u_i2 conj(v_j2), shape (n, m)."""
    return u @ v.conj().T


def image_distance(u: PointArray, v: PointArray) -> np.ndarray:
    """Nonisotropic distance sqrt(1 - |<u_i, v_j>|^2) between sphere points, shape (n, m)."""
    gram = np.abs(image_inner(u, v)) ** 2
    return np.sqrt(np.clip(1.0 - gram, 0.0, None))


@dataclass(frozen=True)
class RamificationLocus:
    """Z = {z2 = 0}, its boundary trace Z1 = Z on dM and image Z2 = f(Z) on S.

    Both traces are the circle {|z1| = 1, z2 = 0}; they carry no boundary mass.
    """

    q: int

    @property
    def description(self) -> dict[str, str]:
        return {
            "Z": "{z2 = 0}",
            "Z1": "{|z1| = 1, z2 = 0} on the boundary of M",
            "Z2": "{|eta1| = 1, eta2 = 0} on the unit sphere",
        }

    def tube_mask(self, points: PointArray, width: float) -> np.ndarray:
        """Boolean mask of points with |z2| < width."""
        return np.abs(points[:, 1]) < width


@dataclass(frozen=True)
class CoveringMap:
    """The covering f(z1, z2) = (z1, z2^q) of the unit ball by M_q.

    Attributes:
        q: Exponent of the second coordinate (q >= 1)
        boundary_tolerance: Tolerance of the boundary membership test
        ramification_guard: Lift refuses |s2| below this radius when q > 1
    """

    q: int
    boundary_tolerance: float = DEFAULT_BOUNDARY_TOLERANCE
    ramification_guard: float = DEFAULT_RAMIFICATION_GUARD

    def __post_init__(self) -> None:
        if int(self.q) != self.q or self.q < 1:
            raise DomainError(f"Covering exponent q must be a positive integer, got {self.q}")
        if self.boundary_tolerance <= 0:
            raise DomainError("boundary_tolerance must be positive")

    @property
    def sheet_count(self) -> int:
        """Number of sheets N (= q)."""
        return self.q

    @property
    def locus(self) -> RamificationLocus:
        return RamificationLocus(self.q)

    # ------------------------------------------------------------------
    # Boundary membership
    # ------------------------------------------------------------------

    def boundary_residual(self, points: PointLike) -> np.ndarray:
        """Residual |z1|^2 + |z2|^(2q) - 1 for every point."""
        array = as_point_array(points)
        return np.abs(array[:, 0]) ** 2 + np.abs(array[:, 1]) ** (2 * self.q) - 1.0

    def is_on_boundary(self, points: PointLike) -> np.ndarray:
        return np.abs(self.boundary_residual(points)) < self.boundary_tolerance

    def require_boundary(self, points: PointLike) -> PointArray:
        """Return points as an array, raising if any fails boundary membership.

        Raises:
            BoundaryError: If some point is off dM_q
        """
        array = as_point_array(points)
        residual = np.abs(self.boundary_residual(array))
        if residual.size and residual.max() >= self.boundary_tolerance:
            worst = int(np.argmax(residual))
            raise BoundaryError(
                f"Point {worst} is off the boundary of M_{self.q} "
                f"(residual {residual[worst]:.3e} >= {self.boundary_tolerance:.1e})"
            )
        return array

    # ------------------------------------------------------------------
    # Covering map and lift
    # ------------------------------------------------------------------

    def apply_map(self, point: ComplexPoint2) -> ComplexPoint2:
        """f(z1, z2) = (z1, z2^q)."""
        return ComplexPoint2(point.z1, point.z2**self.q)

    def images(self, points: PointLike) -> PointArray:
        """Vectorized apply_map over an array of points."""
        array = as_point_array(points)
        out = array.copy()
        out[:, 1] = array[:, 1] ** self.q
        return out

    def lift(self, s: ComplexPoint2, sheet: int) -> ComplexPoint2:
        """Lift a sphere point to the boundary of M_q on the given sheet.

        Args:
            s: Point on the unit sphere S
            sheet: Sheet index in [0, N)

        Returns:
            (s1, |s2|^(1/q) exp(i (arg s2 + 2 pi sheet) / q))

        Raises:
            BoundaryError: If s is not on the unit sphere
            RamificationError: If q > 1 and |s2| is inside the ramification guard
            DomainError: If the sheet index is out of range
        """
        lifted = self.lift_many(as_point_array(s), np.array([sheet]))
        return ComplexPoint2.from_array(lifted[0])

    def lift_many(self, spheres: PointArray, sheets: np.ndarray) -> PointArray:
        """Vectorized lift of sphere points with per-point sheet indices."""
        sheets = np.asarray(sheets, dtype=np.int64)
        if np.any((sheets < 0) | (sheets >= self.sheet_count)):
            raise DomainError(f"Sheet index outside [0, {self.sheet_count})")

        residual = np.abs(np.abs(spheres[:, 0]) ** 2 + np.abs(spheres[:, 1]) ** 2 - 1.0)
        if residual.size and residual.max() >= self.boundary_tolerance:
            raise BoundaryError(
                f"Lift input is off the unit sphere (residual {residual.max():.3e})"
            )

        out = spheres.copy()
        if self.q == 1:
            return out

        radius = np.abs(spheres[:, 1])
        if np.any(radius < self.ramification_guard):
            raise RamificationError(
                f"Lift undefined within {self.ramification_guard:.0e} of the ramification locus"
            )
        angle = (np.angle(spheres[:, 1]) + 2.0 * np.pi * sheets) / self.q
        out[:, 1] = radius ** (1.0 / self.q) * np.exp(1j * angle)
        return out

    def sheet_index(self, point: ComplexPoint2) -> int:
        """Recover the sheet index j with lift(apply_map(point), j) == point.

        Raises:
            RamificationError: If q > 1 and the point lies on the ramification locus
        """
        if self.q == 1:
            return 0
        if abs(point.z2) < self.ramification_guard ** (1.0 / self.q):
            raise RamificationError("Sheet index undefined on the ramification locus")
        theta = np.angle(point.z2)
        base = np.angle(point.z2**self.q)
        return int(np.rint((self.q * theta - base) / (2.0 * np.pi))) % self.q

    # ------------------------------------------------------------------
    # Boundary metric
    # ------------------------------------------------------------------

    def boundary_distance(self, z: ComplexPoint2, w: ComplexPoint2) -> float:
        """d_M(z, w) = sqrt(1 - |<f(z), f(w)>|^2).

        Raises:
            BoundaryError: If either point is off dM_q
        """
        self.require_boundary([z, w])
        u = self.images(z)
        v = self.images(w)
        return float(image_distance(u, v)[0, 0])

    def distance_matrix(self, points: PointArray, others: PointArray) -> np.ndarray:
        """Pairwise d_M between two arrays of boundary points."""
        return image_distance(self.images(points), self.images(others))

    def boundary_ball_membership(
        self, center: ComplexPoint2, radius: float, query: ComplexPoint2
    ) -> bool:
        """True iff d_M(center, query) < radius.

        Raises:
            DomainError: If radius <= 0
            BoundaryError: If either point is off dM_q
        """
        if radius <= 0:
            raise DomainError(f"Ball radius must be positive, got {radius}")
        return self.boundary_distance(center, query) < radius


def measure_quasi_triangle(
    covering: CoveringMap, first: PointArray, middle: PointArray, last: PointArray
) -> float:
    """Measured quasi-triangle constant over triples (z, u, w).

    Returns:
        max d(z, w) / (d(z, u) + d(u, w)) over triples with a nonzero denominator
    """
    u, v, w = covering.images(first), covering.images(middle), covering.images(last)
    d_zw = _row_distance(u, w)
    d_zu = _row_distance(u, v)
    d_uw = _row_distance(v, w)
    denominator = d_zu + d_uw
    usable = denominator > 0
    if not np.any(usable):
        return 0.0
    constant = float(np.max(d_zw[usable] / denominator[usable]))
    logger.debug(f"Quasi-triangle constant over {int(usable.sum())} triples: {constant:.6f}")
    return constant


def ramification_tube_mass(points: PointArray, weights: np.ndarray, width: float) -> float:
    """Boundary mass of the tube {|z2| < width} around Z1."""
    mask = RamificationLocus(1).tube_mask(points, width)
    return float(np.sum(weights[mask]))


def _row_distance(u: PointArray, v: PointArray) -> np.ndarray:
    inner = np.sum(u * v.conj(), axis=1)
    return np.sqrt(np.clip(1.0 - np.abs(inner) ** 2, 0.0, None))
