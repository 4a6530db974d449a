"""Identity suite behind the verify-integrals command.

Every check compares a Monte Carlo estimate or an exact computation against a
closed form and records the tolerance rule it was judged by. Statistical
checks use the standard error the identity itself predicts (the exact
variance of the integrand), so tiny sample counts widen the acceptance band
instead of producing spurious failures.
"""

import itertools
import logging
import math
from dataclasses import dataclass, field
from typing import Any, Optional, Union

import numpy as np

from src.core.config import RunConfig
from src.core.covering_domain import (
    CoveringMap,
    image_distance,
    measure_quasi_triangle,
    ramification_tube_mass,
)
from src.core.f_polynomials import FPolynomial, norm_squared
from src.core.metric_packing import PackingResult
from src.core.reports import IDENTITY_ANCHORS
from src.core.rw_sequence import SignVector, build_Q, exact_l2_values, kernel_gram
from src.core.sphere_measure import (
    BoundarySampleSet,
    cap_measure,
    derive_seed,
    estimate_cap_measure,
    integrate_values,
    monomial_integral,
    pulled_back_monomial_integral,
    sample_boundary,
    sample_sphere,
)

logger = logging.getLogger(__name__)

EXACT_TOLERANCE = 1e-10
CAP_DELTAS = (0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9)
TUBE_FRACTIONS = (0.25, 0.05, 0.01)
KERNEL_DEGREES = tuple(range(1, 11))
KERNEL_POINTS = 20
SIGN_CENTERS = 8


@dataclass
class IdentityCheck:
    """One identity, the value it produced and whether it held.

    Attributes:
        name: Check family (e.g. "monomial", "cap_law")
        identity: Plain-text formula being checked
        estimate: Measured or computed value
        target: Closed-form value
        std_error: Standard error the tolerance is built from (0 for exact checks)
        tolerance: Human-readable tolerance rule
        passed: Whether the estimate fell inside the tolerance
        parameters: Indices, radii or degrees the check ran with
    """

    name: str
    identity: str
    estimate: Union[float, complex]
    target: float
    std_error: float
    tolerance: str
    passed: bool
    parameters: dict[str, Any] = field(default_factory=dict)

    @property
    def anchor(self) -> str:
        return IDENTITY_ANCHORS[self.name]

    def to_dict(self) -> dict[str, Any]:
        estimate = complex(self.estimate)
        return {
            "anchor": self.anchor,
            "estimate": estimate.real if estimate.imag == 0 else [estimate.real, estimate.imag],
            "identity": self.identity,
            "name": self.name,
            "parameters": self.parameters,
            "passed": self.passed,
            "std_error": self.std_error,
            "target": self.target,
            "tolerance": self.tolerance,
        }


@dataclass
class VerificationReport:
    """Collected identity checks of one suite run."""

    q: int
    seed: int
    sample_count: int
    checks: list[IdentityCheck] = field(default_factory=list)
    errors: list[str] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return not self.errors and all(check.passed for check in self.checks)

    @property
    def failures(self) -> list[IdentityCheck]:
        return [check for check in self.checks if not check.passed]

    def add(self, check: IdentityCheck) -> None:
        self.checks.append(check)
        if not check.passed:
            logger.warning(f"Identity failed: {check.identity} {check.parameters}")

    def extend(self, checks: list[IdentityCheck]) -> None:
        for check in checks:
            self.add(check)

    def summary(self) -> dict[str, dict[str, int]]:
        families: dict[str, dict[str, int]] = {}
        for check in self.checks:
            counts = families.setdefault(check.name, {"passed": 0, "failed": 0})
            counts["passed" if check.passed else "failed"] += 1
        return families

    def to_dict(self) -> dict[str, Any]:
        return {
            "checks": [check.to_dict() for check in self.checks],
            "errors": self.errors,
            "passed": self.passed,
            "q": self.q,
            "sample_count": self.sample_count,
            "seed": self.seed,
            "summary": self.summary(),
        }


def _statistical(
    name: str,
    identity: str,
    estimate: Union[float, complex],
    target: float,
    std_error: float,
    sigmas: float,
    parameters: dict[str, Any],
) -> IdentityCheck:
    passed = bool(abs(estimate - target) <= sigmas * std_error + 1e-12)
    return IdentityCheck(
        name=name,
        identity=identity,
        estimate=estimate,
        target=target,
        std_error=std_error,
        tolerance=f"|estimate - target| <= {sigmas:g} * std_error",
        passed=passed,
        parameters=parameters,
    )


def _exact(
    name: str, identity: str, value: float, target: float, parameters: dict[str, Any]
) -> IdentityCheck:
    scale = max(1.0, abs(target))
    return IdentityCheck(
        name=name,
        identity=identity,
        estimate=value,
        target=target,
        std_error=0.0,
        tolerance=f"|value - target| <= {EXACT_TOLERANCE:g} * max(1, |target|)",
        passed=bool(abs(value - target) <= EXACT_TOLERANCE * scale),
        parameters=parameters,
    )


def _bernoulli_error(p: float, n: int, scale: float) -> float:
    return scale * math.sqrt(p * (1.0 - p) / n)


def _multi_indices(max_degree: int) -> list[tuple[int, int]]:
    return [(a1, d - a1) for d in range(max_degree + 1) for a1 in range(d, -1, -1)]


# ----------------------------------------------------------------------
# Statistical identities
# ----------------------------------------------------------------------


def check_monomial_identities(
    covering: CoveringMap,
    samples: BoundarySampleSet,
    max_degree: int = 4,
    sigmas: float = 3.0,
    chunk_size: int = 8192,
) -> list[IdentityCheck]:
    """int f^alpha conj(f)^beta d sigma_M = N delta_{alpha beta} alpha!/(|alpha|+1)!."""
    images = covering.images(samples.points)
    powers = [[images[:, axis] ** e for e in range(max_degree + 1)] for axis in range(2)]
    n = covering.sheet_count
    checks = []
    indices = _multi_indices(max_degree)
    for alpha in indices:
        holomorphic = powers[0][alpha[0]] * powers[1][alpha[1]]
        for beta in indices:
            values = holomorphic * np.conj(powers[0][beta[0]] * powers[1][beta[1]])
            estimate = integrate_values(values, samples, chunk_size)
            target = float(pulled_back_monomial_integral(covering, alpha, beta))
            # null variance: E|f^alpha f^beta|^2 on the sphere minus |mean|^2
            second = float(monomial_integral((alpha[0] + beta[0], alpha[1] + beta[1])))
            variance = second - (target / n) ** 2
            std_error = n * math.sqrt(max(variance, 0.0) / samples.count)
            checks.append(
                _statistical(
                    "monomial",
                    "int f^a conj(f)^b d sigma_M = N delta_ab a!/(|a|+1)!",
                    estimate.value,
                    target,
                    std_error,
                    sigmas,
                    {"alpha": list(alpha), "beta": list(beta)},
                )
            )
    return checks


def check_cap_law(
    spheres: np.ndarray, center: np.ndarray, sigmas: float = 3.0
) -> list[IdentityCheck]:
    """sigma(E(eta, delta)) = delta^2 by counting sphere points."""
    checks = []
    for delta in CAP_DELTAS:
        estimate = estimate_cap_measure(center, delta, spheres)
        target = cap_measure(delta)
        std_error = _bernoulli_error(target, spheres.shape[0], 1.0)
        checks.append(
            _statistical(
                "cap_law",
                "sigma(E(eta, delta)) = delta^2",
                estimate.value,
                target,
                std_error,
                sigmas,
                {"delta": delta},
            )
        )
    return checks


def check_pushforward_balls(
    covering: CoveringMap,
    samples: BoundarySampleSet,
    center: np.ndarray,
    sigmas: float = 3.0,
) -> list[IdentityCheck]:
    """sigma_M(B_M(z, delta)) = N delta^2: d_M balls are pulled-back caps."""
    distances = image_distance(covering.images(samples.points), covering.images(center))[:, 0]
    n = covering.sheet_count
    checks = []
    for delta in CAP_DELTAS:
        hits = (distances < delta).astype(float)
        estimate = integrate_values(hits, samples)
        checks.append(
            _statistical(
                "pushforward",
                "sigma_M(B_M(z, delta)) = N delta^2",
                estimate.value,
                n * delta**2,
                _bernoulli_error(delta**2, samples.count, n),
                sigmas,
                {"delta": delta},
            )
        )
    return checks


def check_tube_mass(
    covering: CoveringMap, samples: BoundarySampleSet, sigmas: float = 3.0
) -> list[IdentityCheck]:
    """sigma_M{|z2| < w} = N w^(2q): the tube around Z1 shrinks to measure zero."""
    n, q = covering.sheet_count, covering.q
    checks = []
    for fraction in TUBE_FRACTIONS:
        width = fraction ** (1.0 / (2 * q))
        mass = ramification_tube_mass(samples.points, samples.weights, width)
        checks.append(
            _statistical(
                "tube_mass",
                "sigma_M{|z2| < w} = N w^(2q)",
                mass,
                n * fraction,
                _bernoulli_error(fraction, samples.count, n),
                sigmas,
                {"width": width},
            )
        )
    return checks


# ----------------------------------------------------------------------
# Exact identities
# ----------------------------------------------------------------------


def check_norm_identity(covering: CoveringMap, max_degree: int = 4) -> list[IdentityCheck]:
    """Exact ||f^alpha||^2 = N alpha!/(|alpha|+1)! from the monomial inner product."""
    checks = []
    for alpha in _multi_indices(max_degree):
        value = norm_squared(FPolynomial.monomial(alpha), covering)
        target = float(pulled_back_monomial_integral(covering, alpha, alpha))
        checks.append(
            _exact("norm", "||f^a||^2 = N a!/(|a|+1)!", value, target, {"alpha": list(alpha)})
        )
    return checks


def _single_center(covering: CoveringMap, point: np.ndarray) -> PackingResult:
    return PackingResult(
        centers=np.asarray(point, dtype=complex).reshape(1, 2),
        radius=1.0,
        candidate_count=1,
        seed=None,
        q=covering.q,
    )


def check_kernel_power(
    covering: CoveringMap, seed: int, degrees: tuple[int, ...] = KERNEL_DEGREES
) -> list[IdentityCheck]:
    """int |<f(zeta), f(omega)>|^(2k) d sigma_M = N/(1+k), exactly."""
    omegas = sample_boundary(covering, derive_seed(seed, "kernel"), KERNEL_POINTS).points
    plus = SignVector((1,), 0)
    checks = []
    for k in degrees:
        values = [
            norm_squared(build_Q(_single_center(covering, omega), plus, k, covering), covering)
            for omega in omegas
        ]
        worst = max(values, key=lambda v: abs(v - covering.sheet_count / (1.0 + k)))
        checks.append(
            _exact(
                "kernel_power",
                "int |<f(zeta), f(omega)>|^(2k) d sigma_M = N/(1+k)",
                worst,
                covering.sheet_count / (1.0 + k),
                {"k": k, "points": KERNEL_POINTS},
            )
        )
    return checks


def check_sign_average(
    covering: CoveringMap, seed: int, k: int, center_count: int = SIGN_CENTERS
) -> IdentityCheck:
    """Average over all 2^K sign vectors of int |Q_s|^2 d sigma_M equals K N/(1+k)."""
    centers = sample_boundary(covering, derive_seed(seed, "sign-average"), center_count).points
    gram = kernel_gram(covering.images(centers), k)
    sign_matrix = np.array(list(itertools.product((1.0, -1.0), repeat=center_count)))
    values = exact_l2_values(gram, sign_matrix, k, covering.sheet_count)
    return _exact(
        "sign_average",
        "2^-K sum_s int |Q_s|^2 d sigma_M = K N/(1+k)",
        float(np.mean(values)),
        center_count * covering.sheet_count / (1.0 + k),
        {"K": center_count, "k": k},
    )


def check_quasi_triangle(covering: CoveringMap, samples: BoundarySampleSet) -> IdentityCheck:
    """Measured quasi-triangle constant of d_M stays at or below 1."""
    third = samples.count // 3
    if third == 0:
        return IdentityCheck(
            name="quasi_triangle",
            identity="d_M(z, w) <= C1 (d_M(z, u) + d_M(u, w)), C1 <= 1",
            estimate=0.0,
            target=1.0,
            std_error=0.0,
            tolerance="skipped: fewer than three samples",
            passed=True,
        )
    points = samples.points
    constant = measure_quasi_triangle(
        covering, points[:third], points[third : 2 * third], points[2 * third : 3 * third]
    )
    return IdentityCheck(
        name="quasi_triangle",
        identity="d_M(z, w) <= C1 (d_M(z, u) + d_M(u, w)), C1 <= 1",
        estimate=constant,
        target=1.0,
        std_error=0.0,
        tolerance=f"C1 <= 1 + {EXACT_TOLERANCE:g}",
        passed=constant <= 1.0 + EXACT_TOLERANCE,
        parameters={"triples": third},
    )


def run_integral_suite(
    config: RunConfig, covering: Optional[CoveringMap] = None
) -> VerificationReport:
    """Run every sphere-measure identity for one configuration.

    Args:
        config: Validated run configuration (q, seed, sample_count, k, sigma_threshold)
        covering: Covering map; built from the config when omitted

    Returns:
        VerificationReport with one record per identity instance
    """
    if covering is None:
        covering = CoveringMap(
            config.q,
            boundary_tolerance=config.boundary_tolerance,
            ramification_guard=config.ramification_guard,
        )
    samples = sample_boundary(covering, derive_seed(config.seed, "samples"), config.sample_count)
    spheres = sample_sphere(derive_seed(config.seed, "spheres"), config.sample_count)
    center = sample_boundary(covering, derive_seed(config.seed, "center"), 1).points[0]
    sigmas = config.sigma_threshold

    report = VerificationReport(q=config.q, seed=config.seed, sample_count=config.sample_count)
    logger.info(f"Monomial identities up to degree {config.monomial_degree}")
    report.extend(
        check_monomial_identities(
            covering, samples, config.monomial_degree, sigmas, config.chunk_size
        )
    )
    logger.info("Cap law, pushforward and ramification tube")
    report.extend(check_cap_law(spheres, covering.images(center)[0], sigmas))
    report.extend(check_pushforward_balls(covering, samples, center, sigmas))
    report.extend(check_tube_mass(covering, samples, sigmas))
    logger.info("Exact norm, kernel-power and sign-average identities")
    report.extend(check_norm_identity(covering, config.monomial_degree))
    report.extend(check_kernel_power(covering, config.seed))
    report.add(check_sign_average(covering, config.seed, config.k))
    report.add(check_quasi_triangle(covering, samples))

    failed = len(report.failures)
    logger.info(f"{len(report.checks) - failed}/{len(report.checks)} identities passed")
    return report
