"""Random-sign homogeneous polynomials Q = sum_j s_j <f(z), f(w_j)>^k over a packing.

With r = 1/sqrt(k) the shell estimate bounds |Q| by Sigma = sum_m (m+2)^2 exp(-m^2/2),
so W = Q / Sigma has modulus at most 1, while the best sign vector keeps
int |Q|^2 d sigma_M at or above the sign average K N / (1 + k).
"""

import logging
import math
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from src.core.config import DEFAULT_PROBE_COUNT, DEFAULT_SIGN_TRIALS, SHELL_TAIL_CUTOFF
from src.core.covering_domain import CoveringMap, PointArray, image_inner
from src.core.errors import DegreeError, DomainError
from src.core.f_polynomials import FPolynomial, log_factorials
from src.core.metric_packing import PackingResult
from src.core.reports import IDENTITY_ANCHORS
from src.core.sphere_measure import (
    BoundarySampleSet,
    IntegralEstimate,
    integrate_values,
    sample_boundary,
)

logger = logging.getLogger(__name__)

MAX_RW_DEGREE = 2000
"""Largest supported RW degree (coefficients stay below the float range)."""

SUP_TOLERANCE = 1e-9
"""Sampled sup |W| may exceed 1 by at most this much."""

_KERNEL_BUDGET = 2_000_000


@dataclass(frozen=True)
class SignVector:
    """A Rademacher sign pattern over the K packing centers."""

    signs: tuple[int, ...]
    trial_index: int

    def as_array(self) -> np.ndarray:
        return np.array(self.signs, dtype=float)

    def flipped(self) -> "SignVector":
        return SignVector(tuple(-s for s in self.signs), self.trial_index)

    def __len__(self) -> int:
        return len(self.signs)


@dataclass(frozen=True, eq=False)
class RWCertificate:
    """A chosen sign vector and degree with the bounds measured for it.

    Attributes:
        k: Degree of Q
        radius: Packing radius (1/sqrt(k) for the bound chain)
        K: Number of centers
        q: Covering exponent (N = q)
        signs: Selected sign vector
        sigma: Normalizer Sigma
        l2_mass: Exact int |Q|^2 d sigma_M (std_error 0)
        mean_l2: Sign average K N / (1 + k)
        c5_floor: N^2 k / (4 (1 + k)), the packing-implied floor of the average
        sup_bound_check: Max of |W| over the probe set (an under-estimate of the sup)
        probe_count: Number of probes behind sup_bound_check
        center_images: Rotated center images U f(w_j)
        trial_count: Sign vectors evaluated
        trial_summary: min / mean / max of the trial values
        rotation: Chosen 2x2 unitary, when adapted to a measure
        measure_mass: int |W|^2 d mu for the adapted rotation
        measure_ratio: measure_mass / mu(boundary)
        rotation_ratios: Ratio achieved by every rotation trial (trial 0 is the identity)
    """

    k: int
    radius: float
    K: int
    q: int
    signs: SignVector
    sigma: float
    l2_mass: IntegralEstimate
    mean_l2: float
    c5_floor: float
    sup_bound_check: float
    probe_count: int
    center_images: PointArray
    trial_count: int
    trial_summary: dict = field(default_factory=dict)
    rotation: Optional[np.ndarray] = None
    measure_mass: Optional[IntegralEstimate] = None
    measure_ratio: Optional[float] = None
    rotation_ratios: list[float] = field(default_factory=list)

    @property
    def measured_c(self) -> float:
        """Measured lower-bound constant int |W|^2 d sigma_M = l2 / Sigma^2."""
        return float(self.l2_mass.value) / self.sigma**2

    @property
    def meets_mean_floor(self) -> bool:
        return float(self.l2_mass.value) >= self.mean_l2 * (1.0 - 1e-12)

    @property
    def sup_within_bound(self) -> bool:
        return self.sup_bound_check <= 1.0 + SUP_TOLERANCE

    def to_dict(self) -> dict:
        data = {
            "K": self.K,
            "anchors": {
                "mean_l2": IDENTITY_ANCHORS["mean_floor"],
                "sup_bound_check": IDENTITY_ANCHORS["sup_bound"],
            },
            "c5_floor": self.c5_floor,
            "k": self.k,
            "l2_mass": self.l2_mass.to_dict(),
            "mean_l2": self.mean_l2,
            "meets_mean_floor": self.meets_mean_floor,
            "measured_c": self.measured_c,
            "q": self.q,
            "r": self.radius,
            "sigma": self.sigma,
            "signs": list(self.signs.signs),
            "sign_trial_index": self.signs.trial_index,
            "sup_bound_check": {
                "value": self.sup_bound_check,
                "probe_count": self.probe_count,
                "note": "maximum over a finite probe set; under-estimates the true sup",
                "tolerance": f"value <= 1 + {SUP_TOLERANCE:g}",
                "within_bound": self.sup_within_bound,
            },
            "trial_count": self.trial_count,
            "trial_summary": self.trial_summary,
        }
        if self.rotation is not None:
            data["rotation"] = [
                [[float(v.real), float(v.imag)] for v in row] for row in self.rotation
            ]
            data["measure_mass"] = self.measure_mass.to_dict() if self.measure_mass else None
            data["measure_ratio"] = self.measure_ratio
            data["rotation_ratios"] = self.rotation_ratios
            data["anchors"]["measure_ratio"] = IDENTITY_ANCHORS["measure_adaptation"]
        return data


def shell_sigma_constant(cutoff: float = SHELL_TAIL_CUTOFF) -> float:
    """Sigma = sum_{m >= 0} (m + 2)^2 exp(-m^2 / 2), summed until the next term < cutoff."""
    terms = []
    m = 0
    term = 4.0
    while term >= cutoff:
        terms.append(term)
        m += 1
        term = (m + 2) ** 2 * math.exp(-(m**2) / 2.0)
    return math.fsum(terms)


def _center_images(
    packing: PackingResult, covering: CoveringMap, rotation: Optional[np.ndarray]
) -> PointArray:
    images = covering.images(packing.centers)
    if rotation is not None:
        images = images @ np.asarray(rotation).T
    return images


def _check_degree(k: int) -> None:
    if k < 1:
        raise DegreeError(f"RW degree must be at least 1, got {k}")
    if k > MAX_RW_DEGREE:
        raise DegreeError(f"RW degree {k} exceeds the supported maximum {MAX_RW_DEGREE}")


def kernel_gram(center_images: PointArray, k: int) -> np.ndarray:
    """Matrix G[j, l] = <v_j, v_l>^k of the degree-k reproducing kernel at the centers."""
    return image_inner(center_images, center_images) ** k


def kernel_sum(
    images: PointArray, center_images: PointArray, weights: np.ndarray, k: int
) -> np.ndarray:
    """sum_j weights_j <u, v_j>^k for every row u of images."""
    images = np.asarray(images, dtype=complex).reshape(-1, 2)
    out = np.zeros(images.shape[0], dtype=complex)
    rows = max(1, _KERNEL_BUDGET // max(center_images.shape[0], 1))
    for start in range(0, images.shape[0], rows):
        kernel = image_inner(images[start : start + rows], center_images) ** k
        out[start : start + rows] = kernel @ weights
    return out


def build_Q(
    packing: PackingResult,
    signs: SignVector,
    k: int,
    covering: CoveringMap,
    rotation: Optional[np.ndarray] = None,
) -> FPolynomial:
    """Expand Q = sum_j s_j <f(z), v_j>^k into the monomials f^(i, k - i).

    Coefficient of f1^i f2^(k-i): C(k, i) sum_j s_j conj(v_j1)^i conj(v_j2)^(k-i),
    evaluated in log space.

    Raises:
        DegreeError: If k < 1 or above MAX_RW_DEGREE
        DomainError: If the sign vector length differs from K
    """
    _check_degree(k)
    if len(signs) != packing.K:
        raise DomainError(f"Sign vector has {len(signs)} entries for {packing.K} centers")

    v = _center_images(packing, covering, rotation)
    table = log_factorials(k)
    i = np.arange(k + 1)
    log_binomial = table[k] - table[i] - table[k - i]
    log_v = np.log(np.maximum(np.abs(v), np.finfo(float).tiny))
    arg_v = np.angle(v)

    magnitude = (
        log_binomial[:, np.newaxis] + np.outer(i, log_v[:, 0]) + np.outer(k - i, log_v[:, 1])
    )
    phase = -(np.outer(i, arg_v[:, 0]) + np.outer(k - i, arg_v[:, 1]))
    coefficients = np.exp(magnitude + 1j * phase) @ signs.as_array()

    exponents = np.zeros((k + 1, 4), dtype=np.int64)
    exponents[:, 0] = i
    exponents[:, 1] = k - i
    return FPolynomial.from_arrays(exponents, coefficients)


def exact_l2_values(gram: np.ndarray, sign_matrix: np.ndarray, k: int, sheets: int) -> np.ndarray:
    """Exact int |Q_s|^2 d sigma_M = N / (k + 1) s^T G s for each row s."""
    quadratic = np.einsum("tj,jl,tl->t", sign_matrix, gram, sign_matrix).real
    return sheets / (k + 1.0) * quadratic


def evaluate_rw(certificate: RWCertificate, images: PointArray) -> np.ndarray:
    """Evaluate W = Q / Sigma at ball images through the kernel sum."""
    weights = certificate.signs.as_array().astype(complex)
    return kernel_sum(images, certificate.center_images, weights, certificate.k) / certificate.sigma


def _default_probes(covering: CoveringMap, seed: int) -> PointArray:
    probes = sample_boundary(covering, seed, DEFAULT_PROBE_COUNT)
    return probes.points


def search_signs(
    packing: PackingResult,
    k: int,
    seed: int,
    trials: int = DEFAULT_SIGN_TRIALS,
    covering: Optional[CoveringMap] = None,
    probes: Optional[PointArray] = None,
) -> RWCertificate:
    """Pick the sign vector with the largest exact int |Q|^2 d sigma_M.

    Candidates are the all-plus vector (trial 0) and `trials` seeded random
    vectors; ties resolve to the lowest trial index.

    Args:
        packing: Centers w_j (built with r = 1/sqrt(k) for the sup bound)
        k: Degree
        seed: Seed of the random sign vectors
        trials: Number of random sign vectors
        covering: Covering map (defaults to the packing's exponent)
        probes: Boundary points for the sampled sup of |W|

    Returns:
        RWCertificate without rotation
    """
    _check_degree(k)
    if trials < 1:
        raise DomainError("search_signs needs at least one trial")
    covering = covering or CoveringMap(packing.q)
    if abs(packing.radius - k**-0.5) > 1e-12:
        logger.warning(
            f"Packing radius {packing.radius:.6g} differs from 1/sqrt(k)={k**-0.5:.6g}; "
            "the sup bound is not guaranteed"
        )

    rng = np.random.default_rng(seed)
    sign_matrix = np.vstack(
        (np.ones((1, packing.K)), rng.integers(0, 2, size=(trials, packing.K)) * 2.0 - 1.0)
    )
    v = _center_images(packing, covering, None)
    values = exact_l2_values(kernel_gram(v, k), sign_matrix, k, covering.sheet_count)
    best = int(np.argmax(values))

    sigma = shell_sigma_constant()
    signs = SignVector(tuple(int(s) for s in sign_matrix[best]), best)
    n = covering.sheet_count
    if probes is None:
        probes = _default_probes(covering, seed)
    sup = float(np.max(np.abs(kernel_sum(covering.images(probes), v, sign_matrix[best], k))))

    certificate = RWCertificate(
        k=k,
        radius=packing.radius,
        K=packing.K,
        q=covering.q,
        signs=signs,
        sigma=sigma,
        l2_mass=IntegralEstimate(float(values[best]), 0.0, 0),
        mean_l2=packing.K * n / (1.0 + k),
        c5_floor=n**2 * k / (4.0 * (1.0 + k)),
        sup_bound_check=sup / sigma,
        probe_count=int(probes.shape[0]),
        center_images=v,
        trial_count=int(values.shape[0]),
        trial_summary={
            "max": float(values.max()),
            "mean": float(values.mean()),
            "min": float(values.min()),
        },
    )
    logger.info(
        f"RW search k={k} K={packing.K}: best trial {best} l2={values[best]:.6g} "
        f"(mean floor {certificate.mean_l2:.6g}), sampled sup |W|={certificate.sup_bound_check:.4f}"
    )
    return certificate


def normalize_to_W(certificate: RWCertificate, q_poly: FPolynomial) -> FPolynomial:
    """W = Q / Sigma."""
    if certificate.sigma <= 0:
        raise DomainError("Certificate normalizer must be positive")
    return q_poly.scale(1.0 / certificate.sigma)


def haar_unitary(rng: np.random.Generator) -> np.ndarray:
    """Haar-random 2x2 unitary: QR of a complex Gaussian matrix with phase-fixed R."""
    gaussian = (rng.standard_normal((2, 2)) + 1j * rng.standard_normal((2, 2))) / math.sqrt(2.0)
    unitary, upper = np.linalg.qr(gaussian)
    diagonal = np.diag(upper)
    return unitary * (diagonal / np.abs(diagonal))[np.newaxis, :]


def adapt_to_measure(
    packing: PackingResult,
    k: int,
    mu: BoundarySampleSet,
    seed: int,
    rotation_trials: int,
    covering: Optional[CoveringMap] = None,
    certificate: Optional[RWCertificate] = None,
    probes: Optional[PointArray] = None,
) -> RWCertificate:
    """Rotate the centers by the unitary maximizing int |W|^2 d mu.

    Trial 0 is the identity; trials 1..rotation_trials are seeded Haar draws.

    Args:
        packing: Centers of the RW polynomial
        k: Degree
        mu: Positive measure as a weighted sample set
        seed: Seed of the rotation draws
        rotation_trials: Number of Haar draws
        covering: Covering map (defaults to the packing's exponent)
        certificate: Sign choice to rotate; searched with DEFAULT_SIGN_TRIALS if omitted
        probes: Boundary points for the sampled sup of the rotated W (seeded default if omitted)

    Returns:
        RWCertificate carrying the chosen rotation and the achieved ratio
    """
    if mu.total_mass <= 0:
        raise DomainError("Measure must have positive total mass")
    covering = covering or CoveringMap(packing.q)
    if certificate is None:
        certificate = search_signs(packing, k, seed, covering=covering, probes=probes)

    rng = np.random.default_rng([seed, 1])
    base = _center_images(packing, covering, None)
    mu_images = covering.images(mu.points)
    weights = certificate.signs.as_array().astype(complex)

    rotations = [np.eye(2, dtype=complex)] + [haar_unitary(rng) for _ in range(rotation_trials)]
    estimates: list[IntegralEstimate] = []
    for rotation in rotations:
        rotated = base @ rotation.T
        values = kernel_sum(mu_images, rotated, weights, k) / certificate.sigma
        estimates.append(integrate_values(np.abs(values) ** 2, mu))

    ratios = [float(e.value) / mu.total_mass for e in estimates]
    best = int(np.argmax(ratios))
    chosen = rotations[best]
    rotated = base @ chosen.T

    if probes is None:
        probes = _default_probes(covering, seed)
    sup = float(np.max(np.abs(kernel_sum(covering.images(probes), rotated, weights, k))))
    sup /= certificate.sigma

    logger.info(
        f"Measure adaptation k={k}: rotation {best} of {len(rotations)} gives ratio "
        f"{ratios[best]:.6g} (identity {ratios[0]:.6g})"
    )
    return replace(
        certificate,
        center_images=rotated,
        rotation=chosen,
        measure_mass=estimates[best],
        measure_ratio=ratios[best],
        rotation_ratios=ratios,
        sup_bound_check=sup,
        probe_count=int(probes.shape[0]),
    )
