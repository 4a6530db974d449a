"""Coefficient algebra for polynomials in (f, conj f) and their exact boundary integrals.

An FPolynomial is a finite sum  sum c[a, b] f^a conj(f)^b  with multi-indices a, b.
Terms are stored as an (m, 4) integer array of exponents (a1, a2, b1, b2) sorted
lexicographically, plus a complex coefficient vector. Zero coefficients are never
stored.

Integrals use the monomial law on the boundary of M_q:

    int f^a conj(f)^b d sigma_M = N a! / (1 + |a|)!   if a == b, else 0

Weights are handled in log space so degrees in the thousands neither overflow
nor underflow.
"""

import logging
import math
from dataclasses import dataclass
from typing import Any, Iterable, Mapping, Optional, Union

import numpy as np

from src.core.config import DEFAULT_CHUNK_SIZE, DEFAULT_TERM_CAP
from src.core.covering_domain import CoveringMap, PointArray
from src.core.errors import DomainError, TermBudgetError
from src.core.sphere_measure import MultiIndex

logger = logging.getLogger(__name__)

TermKey = tuple[tuple[int, int], tuple[int, int]]

_PAIR_CHUNK = 1_000_000
_TERM_CHUNK = 256
_TINY = np.finfo(float).tiny

_log_factorial_table = np.zeros(1)


def log_factorials(n: int) -> np.ndarray:
    """Table of log(j!) for j = 0..n (grown on demand)."""
    global _log_factorial_table
    if _log_factorial_table.shape[0] <= n:
        size = max(n + 1, 2 * _log_factorial_table.shape[0])
        _log_factorial_table = np.array([math.lgamma(j + 1) for j in range(size)])
    return _log_factorial_table


def log_monomial_weight(a1: np.ndarray, a2: np.ndarray) -> np.ndarray:
    """log of a! / (1 + |a|)!, the sphere integral of |z^a|^2."""
    table = log_factorials(int(np.max(a1 + a2, initial=0)) + 1)
    return table[a1] + table[a2] - table[a1 + a2 + 1]


def _encode(exponents: np.ndarray, base: int) -> np.ndarray:
    e = exponents.astype(np.int64)
    return ((e[:, 0] * base + e[:, 1]) * base + e[:, 2]) * base + e[:, 3]


def _decode(keys: np.ndarray, base: int) -> np.ndarray:
    out = np.empty((keys.shape[0], 4), dtype=np.int64)
    rest = keys.copy()
    for column in (3, 2, 1, 0):
        out[:, column] = rest % base
        rest //= base
    return out


def _canonical(exponents: np.ndarray, coefficients: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Merge duplicate exponents, drop zero coefficients, sort lexicographically."""
    exponents = np.asarray(exponents, dtype=np.int64).reshape(-1, 4)
    coefficients = np.asarray(coefficients, dtype=complex).reshape(-1)
    if exponents.shape[0] == 0:
        return np.zeros((0, 4), dtype=np.int64), np.zeros(0, dtype=complex)
    if np.any(exponents < 0):
        raise DomainError("Exponents must be nonnegative")

    base = int(exponents.max()) + 1
    keys, inverse = np.unique(_encode(exponents, base), return_inverse=True)
    inverse = inverse.reshape(-1)
    real = np.bincount(inverse, weights=coefficients.real, minlength=keys.shape[0])
    imag = np.bincount(inverse, weights=coefficients.imag, minlength=keys.shape[0])
    merged = real + 1j * imag
    keep = merged != 0
    return _decode(keys[keep], base), merged[keep]


@dataclass(frozen=True)
class HomogeneityCertificate:
    """Homogeneity of an FPolynomial: degree k, or None when inhomogeneous (or zero)."""

    degree: Optional[int]

    @property
    def homogeneous(self) -> bool:
        return self.degree is not None

    def to_dict(self) -> dict:
        return {"degree": self.degree if self.degree is not None else "inhomogeneous"}


class FPolynomial:
    """Finite combination of mixed monomials f^a conj(f)^b with complex coefficients."""

    __slots__ = ("_exponents", "_coefficients")

    def __init__(self, terms: Optional[Mapping[TermKey, complex]] = None):
        if terms:
            exponents = np.array([[a[0], a[1], b[0], b[1]] for (a, b) in terms], dtype=np.int64)
            coefficients = np.array(list(terms.values()), dtype=complex)
        else:
            exponents = np.zeros((0, 4), dtype=np.int64)
            coefficients = np.zeros(0, dtype=complex)
        self._exponents, self._coefficients = _canonical(exponents, coefficients)

    @classmethod
    def from_arrays(cls, exponents: np.ndarray, coefficients: np.ndarray) -> "FPolynomial":
        poly = cls.__new__(cls)
        poly._exponents, poly._coefficients = _canonical(exponents, coefficients)
        return poly

    @classmethod
    def zero(cls) -> "FPolynomial":
        return cls()

    @classmethod
    def constant(cls, value: complex) -> "FPolynomial":
        return cls({((0, 0), (0, 0)): value})

    @classmethod
    def monomial(
        cls,
        a: tuple[int, int],
        b: tuple[int, int] = (0, 0),
        coefficient: complex = 1.0,
    ) -> "FPolynomial":
        return cls({(tuple(a), tuple(b)): coefficient})

    @classmethod
    def f1(cls) -> "FPolynomial":
        return cls.monomial((1, 0))

    @classmethod
    def f2(cls) -> "FPolynomial":
        return cls.monomial((0, 1))

    @property
    def exponents(self) -> np.ndarray:
        view = self._exponents.view()
        view.flags.writeable = False
        return view

    @property
    def coefficients(self) -> np.ndarray:
        view = self._coefficients.view()
        view.flags.writeable = False
        return view

    @property
    def terms(self) -> dict[tuple[MultiIndex, MultiIndex], complex]:
        return {
            (MultiIndex(int(e[0]), int(e[1])), MultiIndex(int(e[2]), int(e[3]))): complex(c)
            for e, c in zip(self._exponents, self._coefficients)
        }

    def __len__(self) -> int:
        return int(self._coefficients.shape[0])

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, FPolynomial):
            return NotImplemented
        return np.array_equal(self._exponents, other._exponents) and np.array_equal(
            self._coefficients, other._coefficients
        )

    __hash__ = None  # type: ignore[assignment]

    def __add__(self, other: "FPolynomial") -> "FPolynomial":
        return FPolynomial.from_arrays(
            np.vstack((self._exponents, other._exponents)),
            np.concatenate((self._coefficients, other._coefficients)),
        )

    def __neg__(self) -> "FPolynomial":
        return self.scale(-1.0)

    def __sub__(self, other: "FPolynomial") -> "FPolynomial":
        return self + (-other)

    def __mul__(self, other: Union["FPolynomial", complex, float]) -> "FPolynomial":
        if isinstance(other, FPolynomial):
            return multiply(self, other)
        return self.scale(other)

    def __rmul__(self, other: Union[complex, float]) -> "FPolynomial":
        return self.scale(other)

    def __repr__(self) -> str:
        return f"FPolynomial(terms={len(self)}, holomorphic={self.is_holomorphic()})"

    def scale(self, factor: complex) -> "FPolynomial":
        return FPolynomial.from_arrays(self._exponents, self._coefficients * factor)

    def is_zero(self) -> bool:
        return len(self) == 0

    def is_holomorphic(self) -> bool:
        return bool(np.all(self._exponents[:, 2:] == 0))

    def holomorphic_degrees(self) -> list[int]:
        """Sorted distinct degrees |a| of a holomorphic-only polynomial."""
        if not self.is_holomorphic():
            raise DomainError("Degree support is defined for holomorphic polynomials only")
        return sorted({int(d) for d in self._exponents[:, 0] + self._exponents[:, 1]})

    def symbol_degree(self) -> int:
        """Largest |a| + |b| over the stored terms."""
        if self.is_zero():
            return 0
        return int(np.max(self._exponents.sum(axis=1)))

    def allclose(self, other: "FPolynomial", atol: float = 1e-12) -> bool:
        """Coefficient-wise agreement within atol (missing terms count as zero)."""
        difference = self - other
        return bool(np.all(np.abs(difference._coefficients) <= atol))

    def to_json(self) -> list[dict[str, Any]]:
        """Serialize as a list of {a, b, re, im} records in canonical order."""
        return [
            {
                "a": [int(e[0]), int(e[1])],
                "b": [int(e[2]), int(e[3])],
                "re": float(c.real),
                "im": float(c.imag),
            }
            for e, c in zip(self._exponents, self._coefficients)
        ]

    @classmethod
    def from_json(cls, records: Iterable[Mapping[str, Any]]) -> "FPolynomial":
        records = list(records)
        exponents = np.array([[*r["a"], *r["b"]] for r in records], dtype=np.int64)
        coefficients = np.array([complex(r["re"], r["im"]) for r in records], dtype=complex)
        return cls.from_arrays(exponents.reshape(-1, 4), coefficients)


# ----------------------------------------------------------------------
# Algebra
# ----------------------------------------------------------------------


def conjugate(p: FPolynomial) -> FPolynomial:
    """Swap holomorphic and antiholomorphic exponents and conjugate coefficients."""
    swapped = p.exponents[:, [2, 3, 0, 1]]
    return FPolynomial.from_arrays(swapped, np.conj(p.coefficients))


def _pair_chunks(p: FPolynomial, q: FPolynomial) -> Iterable[tuple[np.ndarray, np.ndarray]]:
    rows = max(1, _PAIR_CHUNK // max(len(q), 1))
    for start in range(0, len(p), rows):
        e = p.exponents[start : start + rows]
        c = p.coefficients[start : start + rows]
        exponents = (e[:, np.newaxis, :] + q.exponents[np.newaxis, :, :]).reshape(-1, 4)
        coefficients = (c[:, np.newaxis] * q.coefficients[np.newaxis, :]).reshape(-1)
        yield exponents, coefficients


def _check_cap(result: FPolynomial, term_cap: int, operation: str) -> FPolynomial:
    if len(result) > term_cap:
        raise TermBudgetError(
            f"{operation} produced {len(result)} terms (cap {term_cap})",
            terms=len(result),
            cap=term_cap,
        )
    return result


def multiply(p: FPolynomial, q: FPolynomial, term_cap: int = DEFAULT_TERM_CAP) -> FPolynomial:
    """Coefficient convolution of two FPolynomials.

    Raises:
        TermBudgetError: If the product holds more than term_cap terms
    """
    result = FPolynomial.zero()
    for exponents, coefficients in _pair_chunks(p, q):
        result = _check_cap(
            result + FPolynomial.from_arrays(exponents, coefficients), term_cap, "multiply"
        )
    return result


def _project_arrays(
    exponents: np.ndarray, coefficients: np.ndarray
) -> tuple[np.ndarray, np.ndarray]:
    a = exponents[:, :2]
    b = exponents[:, 2:]
    keep = np.all(a >= b, axis=1)
    a, b, coefficients = a[keep], b[keep], coefficients[keep]
    shifted = a - b
    log_ratio = log_monomial_weight(a[:, 0], a[:, 1]) - log_monomial_weight(
        shifted[:, 0], shifted[:, 1]
    )
    projected = np.zeros((shifted.shape[0], 4), dtype=np.int64)
    projected[:, :2] = shifted
    return projected, coefficients * np.exp(log_ratio)


def szego_project(
    p: FPolynomial, covering: Optional[CoveringMap] = None, term_cap: int = DEFAULT_TERM_CAP
) -> FPolynomial:
    """Orthogonal projection onto holomorphic polynomials in f.

    f^a conj(f)^b maps to (w(a) / w(a - b)) f^(a - b) when a >= b componentwise and
    to 0 otherwise, where w(c) = c! / (1 + |c|)!. The factor N of sigma_M cancels,
    so the covering only documents the measure the projection is orthogonal for.

    Raises:
        TermBudgetError: If the projection holds more than term_cap terms
    """
    exponents, coefficients = _project_arrays(p.exponents, p.coefficients)
    return _check_cap(FPolynomial.from_arrays(exponents, coefficients), term_cap, "szego_project")


def project_product(
    p: FPolynomial,
    q: FPolynomial,
    covering: Optional[CoveringMap] = None,
    term_cap: int = DEFAULT_TERM_CAP,
) -> FPolynomial:
    """szego_project(multiply(p, q)) without materializing the mixed product."""
    result = FPolynomial.zero()
    for exponents, coefficients in _pair_chunks(p, q):
        projected = FPolynomial.from_arrays(*_project_arrays(exponents, coefficients))
        result = _check_cap(result + projected, term_cap, "project_product")
    return result


def cauchy_transform_degree(k: int, alpha: tuple[int, int], beta: tuple[int, int]) -> int:
    """Degree k + |alpha| - |beta| of the projected product; negative means annihilated."""
    if k < 0:
        raise DomainError(f"Degree must be nonnegative, got {k}")
    return k + alpha[0] + alpha[1] - beta[0] - beta[1]


def certify_homogeneity(p: FPolynomial) -> HomogeneityCertificate:
    """Homogeneous of degree k iff every term has b = 0 and |a| = k."""
    if p.is_zero() or not p.is_holomorphic():
        return HomogeneityCertificate(None)
    degrees = p.holomorphic_degrees()
    return HomogeneityCertificate(degrees[0] if len(degrees) == 1 else None)


# ----------------------------------------------------------------------
# Exact inner product
# ----------------------------------------------------------------------


def inner_product(p: FPolynomial, q: FPolynomial, covering: CoveringMap) -> complex:
    """Exact integral over dM of p conj(q) d sigma_M.

    A pair of terms contributes only when a_p - b_p == a_q - b_q; its monomial
    integral has exponent gamma = a_p + b_q.
    """
    if p.is_zero() or q.is_zero():
        return 0j

    shift_p = p.exponents[:, :2] - p.exponents[:, 2:]
    shift_q = q.exponents[:, :2] - q.exponents[:, 2:]
    offset = int(max(np.abs(shift_p).max(), np.abs(shift_q).max()))
    base = 2 * offset + 1
    key_p = (shift_p[:, 0] + offset) * base + (shift_p[:, 1] + offset)
    key_q = (shift_q[:, 0] + offset) * base + (shift_q[:, 1] + offset)

    order_q = np.argsort(key_q, kind="stable")
    sorted_q = key_q[order_q]
    left = np.searchsorted(sorted_q, key_p, side="left")
    right = np.searchsorted(sorted_q, key_p, side="right")
    counts = right - left
    if counts.sum() == 0:
        return 0j

    index_p = np.repeat(np.arange(len(p)), counts)
    starts = np.repeat(left - np.cumsum(counts) + counts, counts)
    index_q = order_q[starts + np.arange(int(counts.sum()))]

    gamma = p.exponents[index_p, :2] + q.exponents[index_q, 2:]
    c_p = p.coefficients[index_p]
    c_q = q.coefficients[index_q]
    log_magnitude = (
        np.log(np.abs(c_p)) + np.log(np.abs(c_q)) + log_monomial_weight(gamma[:, 0], gamma[:, 1])
    )
    phase = np.angle(c_p) - np.angle(c_q)
    total = np.sum(np.exp(log_magnitude + 1j * phase))
    return complex(covering.sheet_count * total)


def norm_squared(p: FPolynomial, covering: CoveringMap) -> float:
    return float(inner_product(p, p, covering).real)


# ----------------------------------------------------------------------
# Evaluation
# ----------------------------------------------------------------------


def evaluate_images(
    p: FPolynomial, images: PointArray, chunk_size: int = DEFAULT_CHUNK_SIZE
) -> np.ndarray:
    """Evaluate p at ball images u = f(z) (any points of C^2, no boundary check).

    Returns:
        Complex array with one value per row of images
    """
    images = np.asarray(images, dtype=complex).reshape(-1, 2)
    out = np.zeros(images.shape[0], dtype=complex)
    if p.is_zero():
        return out

    e = p.exponents
    power_1 = (e[:, 0] + e[:, 2]).astype(float)
    power_2 = (e[:, 1] + e[:, 3]).astype(float)
    turn_1 = (e[:, 0] - e[:, 2]).astype(float)
    turn_2 = (e[:, 1] - e[:, 3]).astype(float)
    log_c = np.log(np.abs(p.coefficients))
    arg_c = np.angle(p.coefficients)

    log_u = np.log(np.maximum(np.abs(images), _TINY))
    arg_u = np.angle(images)

    for start in range(0, images.shape[0], chunk_size):
        lu = log_u[start : start + chunk_size]
        au = arg_u[start : start + chunk_size]
        acc = np.zeros(lu.shape[0], dtype=complex)
        for t in range(0, len(p), _TERM_CHUNK):
            sl = slice(t, t + _TERM_CHUNK)
            magnitude = lu[:, :1] * power_1[sl] + lu[:, 1:] * power_2[sl] + log_c[sl]
            phase = au[:, :1] * turn_1[sl] + au[:, 1:] * turn_2[sl] + arg_c[sl]
            acc += np.sum(np.exp(magnitude + 1j * phase), axis=1)
        out[start : start + chunk_size] = acc
    return out


def evaluate(p: FPolynomial, point: Any, covering: CoveringMap) -> complex:
    """Evaluate p at a boundary point of M_q.

    Raises:
        BoundaryError: If the point is off the boundary
    """
    array = covering.require_boundary(point)
    return complex(evaluate_images(p, covering.images(array))[0])


# ----------------------------------------------------------------------
# Least-squares symbols
# ----------------------------------------------------------------------


def symbol_basis(degree: int) -> np.ndarray:
    """Exponents (a1, a2, b1, b2) with |a| + |b| <= degree and min(a1, b1) == 0.

    On the sphere |f1|^2 = 1 - |f2|^2, so these monomials span every polynomial
    of the given degree without redundancy.
    """
    rows = [
        (a1, a2, b1, b2)
        for total in range(degree + 1)
        for a1 in range(total + 1)
        for a2 in range(total + 1 - a1)
        for b1 in range(total + 1 - a1 - a2)
        for b2 in [total - a1 - a2 - b1]
        if min(a1, b1) == 0
    ]
    return np.array(rows, dtype=np.int64).reshape(-1, 4)


def fit_symbol(values: np.ndarray, images: PointArray, degree: int) -> FPolynomial:
    """Real-valued least-squares surrogate of sampled values in mixed monomials.

    Args:
        values: Real samples of the target at the given images
        images: Ball images (n, 2) of the sample points
        degree: Maximal symbol degree |a| + |b|

    Returns:
        Hermitian FPolynomial (real on the sphere)
    """
    values = np.asarray(values, dtype=float)
    if values.size == 0:
        raise DomainError("Cannot fit a symbol to zero samples")
    if np.ptp(values) == 0:
        return FPolynomial.constant(float(values[0]))

    basis = symbol_basis(degree)
    keys = [tuple(row) for row in basis]
    index = {key: i for i, key in enumerate(keys)}
    representatives = [
        i for i, (a1, a2, b1, b2) in enumerate(keys) if (a1, a2, b1, b2) <= (b1, b2, a1, a2)
    ]

    conj_images = np.conj(images)
    columns = []
    layout = []
    for i in representatives:
        a1, a2, b1, b2 = keys[i]
        monomial = images[:, 0] ** a1 * images[:, 1] ** a2
        monomial = monomial * conj_images[:, 0] ** b1 * conj_images[:, 1] ** b2
        if (a1, a2) == (b1, b2):
            columns.append(monomial.real)
            layout.append((i, None))
        else:
            columns.append(monomial.real)
            columns.append(monomial.imag)
            layout.append((i, index[(b1, b2, a1, a2)]))

    design = np.column_stack(columns)
    solution = np.linalg.lstsq(design, values, rcond=None)[0]

    exponents = []
    coefficients = []
    cursor = 0
    for i, partner in layout:
        if partner is None:
            exponents.append(keys[i])
            coefficients.append(complex(solution[cursor]))
            cursor += 1
        else:
            x, y = solution[cursor], solution[cursor + 1]
            exponents.extend([keys[i], keys[partner]])
            coefficients.extend([complex(x, -y) / 2, complex(x, y) / 2])
            cursor += 2
    fitted = FPolynomial.from_arrays(np.array(exponents), np.array(coefficients))
    logger.debug(f"Fitted symbol of degree {degree} with {len(fitted)} terms")
    return fitted
