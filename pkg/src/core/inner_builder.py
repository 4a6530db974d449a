"""Iterative orthogonal series Q_N = P_1 + ... + P_N with |Q_N| < phi on the probes.

Each step projects W * psi onto holomorphic polynomials, where psi = phi - |Q_N|
is the residual modulus and W a measure-adapted RW polynomial whose degree is
placed inside a fresh block of the LI-set. Pieces with disjoint degree blocks are
orthogonal, so ||Q_N||^2 = sum ||P_i||^2 exactly.
"""

import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Iterable, Optional

import numpy as np

from src.core.config import RunConfig
from src.core.covering_domain import CoveringMap, PointArray
from src.core.errors import (
    ApproximationError,
    DomainError,
    InnerFunctionError,
    InvariantViolation,
    NonFiniteError,
    StagnationError,
    TargetError,
)
from src.core.f_polynomials import (
    FPolynomial,
    evaluate_images,
    fit_symbol,
    norm_squared,
    project_product,
)
from src.core.metric_packing import greedy_packing
from src.core.reports import IDENTITY_ANCHORS
from src.core.rw_sequence import (
    adapt_to_measure,
    build_Q,
    evaluate_rw,
    normalize_to_W,
    search_signs,
)
from src.core.sphere_measure import (
    BoundarySampleSet,
    IntegralEstimate,
    derive_seed,
    integrate_values,
    sample_boundary,
)

logger = logging.getLogger(__name__)

CEILING_FACTOR = 4.0 / 5.0
"""P = CEILING_FACTOR * F keeps |P| below psi once |F - W psi| < psi / 4."""

FIT_SLACK = 0.25
"""Allowed sup of |F - W psi| / psi on the probes."""

NOMINAL_ENERGY_RATIO = 8.0 / 25.0
"""Energy ratio of the idealized step (RW constant 1), reported next to the measured one."""

PARSEVAL_TOLERANCE = 1e-10
"""Relative tolerance of the exact Parseval ledger."""

SYMBOL_DEGREE_STEP = 3
"""Increment of the surrogate degree between fit attempts."""

HISTOGRAM_BINS = 20


# ----------------------------------------------------------------------
# LI-sets and targets
# ----------------------------------------------------------------------


@dataclass
class LISet:
    """Degree set E with arbitrarily long runs of consecutive integers.

    With no modulus E is every nonnegative integer; with (modulus, width) it is
    {n : n mod modulus < width}, supplying runs up to `width` long.

    Attributes:
        modulus: Period of the residue window, or None
        width: Window width, or None
        excluded: Consumed (or otherwise removed) degrees
    """

    modulus: Optional[int] = None
    width: Optional[int] = None
    excluded: set[int] = field(default_factory=set)

    def __post_init__(self) -> None:
        if (self.modulus is None) != (self.width is None):
            raise DomainError("modulus and width must be given together")
        if self.modulus is not None and not 0 < self.width < self.modulus:
            raise DomainError(f"Window width must lie in (0, {self.modulus}), got {self.width}")

    @classmethod
    def all_integers(cls, excluded: Iterable[int] = ()) -> "LISet":
        return cls(excluded=set(excluded))

    @classmethod
    def residue_window(cls, modulus: int, width: int, excluded: Iterable[int] = ()) -> "LISet":
        return cls(modulus=modulus, width=width, excluded=set(excluded))

    @classmethod
    def from_config(cls, config: RunConfig) -> "LISet":
        if config.li_modulus is None:
            return cls.all_integers()
        return cls.residue_window(config.li_modulus, config.li_width)

    def contains(self, n: int) -> bool:
        if n < 0:
            return False
        return self.modulus is None or n % self.modulus < self.width

    def next_block(self, length: int) -> list[int]:
        """First run of `length` consecutive unconsumed members; marks it consumed.

        Raises:
            DomainError: If length < 1 or longer than the residue window
        """
        if length < 1:
            raise DomainError(f"Block length must be positive, got {length}")
        if self.width is not None and length > self.width:
            raise DomainError(f"Residue window of width {self.width} has no run of {length}")

        start = 0
        while True:
            run = range(start, start + length)
            blocked = [n for n in run if not self.contains(n) or n in self.excluded]
            if not blocked:
                self.excluded.update(run)
                return list(run)
            start = blocked[-1] + 1


@dataclass(frozen=True)
class TargetModulus:
    """Continuous target phi on ball images; must be positive on the probes."""

    evaluator: Callable[[PointArray], np.ndarray]
    description: str

    @classmethod
    def constant(cls, value: float = 1.0) -> "TargetModulus":
        return cls(lambda images: np.full(images.shape[0], float(value)), f"phi = {value:g}")

    @classmethod
    def radial(cls, constant: float, slope: float) -> "TargetModulus":
        if slope == 0:
            return cls.constant(constant)
        return cls(
            lambda images: constant + slope * np.abs(images[:, 0]) ** 2,
            f"phi = {constant:g} + {slope:g} |eta_1|^2",
        )

    @classmethod
    def from_config(cls, config: RunConfig) -> "TargetModulus":
        return cls.radial(config.target_constant, config.target_slope)

    def __call__(self, images: PointArray) -> np.ndarray:
        values = np.asarray(self.evaluator(images), dtype=float).reshape(-1)
        if not np.all(np.isfinite(values)):
            raise NonFiniteError(f"Target {self.description} is non-finite")
        return values

    def require_positive(self, images: PointArray) -> np.ndarray:
        """Evaluate phi, raising TargetError unless it is strictly positive everywhere."""
        values = self(images)
        worst = int(np.argmin(values))
        if values[worst] <= 0:
            raise TargetError(
                f"Target modulus must be strictly positive: {self.description} "
                f"is {values[worst]:.6g} at probe {worst}"
            )
        return values


# ----------------------------------------------------------------------
# Run context and series state
# ----------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class SeriesContext:
    """Seeded point sets shared by every step of a run."""

    config: RunConfig
    covering: CoveringMap
    samples: BoundarySampleSet
    probes: BoundarySampleSet
    candidates: BoundarySampleSet
    sample_images: PointArray
    probe_images: PointArray

    @classmethod
    def prepare(cls, config: RunConfig) -> "SeriesContext":
        """Draw samples, probes and the packing candidate cloud from the master seed."""
        covering = CoveringMap(config.q, config.boundary_tolerance, config.ramification_guard)
        samples = sample_boundary(
            covering, derive_seed(config.seed, "samples"), config.sample_count
        )
        probes = sample_boundary(covering, derive_seed(config.seed, "probes"), config.probe_count)
        candidates = sample_boundary(
            covering, derive_seed(config.seed, "candidates"), config.candidate_count
        )
        logger.info(
            f"Prepared q={config.q}: {samples.count} samples, {probes.count} probes, "
            f"{candidates.count} packing candidates"
        )
        return cls(
            config=config,
            covering=covering,
            samples=samples,
            probes=probes,
            candidates=candidates,
            sample_images=covering.images(samples.points),
            probe_images=covering.images(probes.points),
        )


@dataclass
class StepRecord:
    """Measurements of one accepted series step."""

    step: int
    k: int
    block: list[int]
    degrees: list[int]
    centers: int
    symbol_degree: int
    fit_ratio: float
    w_damping: int
    p_damping: int
    phase_index: int
    phase: float
    energy: float
    residual_energy: float
    energy_ratio: float
    defect: float
    defect_std_error: float
    min_margin: float
    term_count: int
    certificate: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "block": [self.block[0], self.block[-1]],
            "centers": self.centers,
            "certificate": self.certificate,
            "defect": self.defect,
            "defect_std_error": self.defect_std_error,
            "degrees": [self.degrees[0], self.degrees[-1]] if self.degrees else [],
            "energy": self.energy,
            "energy_ratio": self.energy_ratio,
            "fit_ratio": self.fit_ratio,
            "k": self.k,
            "min_margin": self.min_margin,
            "nominal_energy_ratio": NOMINAL_ENERGY_RATIO,
            "p_damping": self.p_damping,
            "phase": self.phase,
            "phase_index": self.phase_index,
            "residual_energy": self.residual_energy,
            "step": self.step,
            "symbol_degree": self.symbol_degree,
            "term_count": self.term_count,
            "w_damping": self.w_damping,
        }

    def csv_row(self) -> list:
        return [
            self.step,
            self.k,
            f"{self.block[0]}-{self.block[-1]}",
            f"{self.degrees[0]}-{self.degrees[-1]}" if self.degrees else "",
            repr(self.energy),
            repr(self.defect),
            repr(self.min_margin),
            repr(self.energy_ratio),
        ]


STEP_CSV_HEADER = [
    "N",
    "k",
    "block",
    "degrees",
    "norm_P_squared",
    "defect",
    "min_margin",
    "energy_ratio",
]


@dataclass(eq=False)
class SeriesState:
    """Running partial sums of the series and their histories.

    Attributes:
        partials: P_0 = 0, P_1, ..., P_N (holomorphic-only)
        q_sum: Q_N = sum of the partials
        used_degrees: Union of the consumed degree blocks
        defect_history: D_0, ..., D_N
        defect_errors: Standard errors of the defect estimates
        sup_margin_history: min over probes of phi - |Q_N|
        energies: ||P_i||^2 for i >= 1
        records: Per-step measurements
        q_on_samples / q_on_probes: Cached values of Q_N
        phi_on_samples / phi_on_probes: Cached target values
        target_energy: int phi^2 d sigma_M
    """

    partials: list[FPolynomial]
    q_sum: FPolynomial
    used_degrees: set[int]
    defect_history: list[float]
    defect_errors: list[float]
    sup_margin_history: list[float]
    energies: list[float]
    records: list[StepRecord]
    q_on_samples: np.ndarray
    q_on_probes: np.ndarray
    phi_on_samples: np.ndarray
    phi_on_probes: np.ndarray
    target_energy: IntegralEstimate

    @classmethod
    def initial(cls, context: SeriesContext, phi: TargetModulus) -> "SeriesState":
        """Empty series Q_0 = P_0 = 0 with D_0 = int phi^2.

        Raises:
            TargetError: If phi is not strictly positive on the probes
        """
        phi_probes = phi.require_positive(context.probe_images)
        phi_samples = phi(context.sample_images)
        chunk = context.config.chunk_size
        target_energy = integrate_values(phi_samples**2, context.samples, chunk)
        return cls(
            partials=[FPolynomial.zero()],
            q_sum=FPolynomial.zero(),
            used_degrees=set(),
            defect_history=[float(target_energy.value)],
            defect_errors=[target_energy.std_error],
            sup_margin_history=[float(phi_probes.min())],
            energies=[],
            records=[],
            q_on_samples=np.zeros(context.samples.count, dtype=complex),
            q_on_probes=np.zeros(context.probes.count, dtype=complex),
            phi_on_samples=phi_samples,
            phi_on_probes=phi_probes,
            target_energy=target_energy,
        )

    @property
    def step_count(self) -> int:
        return len(self.partials) - 1

    @property
    def current_defect(self) -> float:
        return self.defect_history[-1]

    def defect_is_monotone(self) -> bool:
        history = self.defect_history
        return all(later < earlier for earlier, later in zip(history, history[1:]))

    def parseval_ledger(self, covering: CoveringMap) -> dict:
        """Exact ||Q_N||^2 against sum ||P_i||^2."""
        q_norm = norm_squared(self.q_sum, covering)
        partial_sum = math.fsum(self.energies)
        difference = abs(q_norm - partial_sum)
        return {
            "anchor": IDENTITY_ANCHORS["parseval"],
            "holds": difference <= PARSEVAL_TOLERANCE * max(1.0, partial_sum),
            "identity": "||Q_N||^2 = sum_i ||P_i||^2 (disjoint degree blocks are orthogonal)",
            "q_norm_squared": q_norm,
            "relative_tolerance": PARSEVAL_TOLERANCE,
            "sum_partial_energy": partial_sum,
            "abs_difference": difference,
        }

    def energy_ledger(self, sigmas: float) -> dict:
        """sum ||P_i||^2 against int phi^2 d sigma_M (plus sigmas standard errors)."""
        partial_sum = math.fsum(self.energies)
        ceiling = float(self.target_energy.value) + sigmas * self.target_energy.std_error
        return {
            "anchor": IDENTITY_ANCHORS["energy"],
            "holds": partial_sum <= ceiling,
            "identity": "sum_i ||P_i||^2 <= int phi^2 d sigma_M",
            "sum_partial_energy": partial_sum,
            "target_energy": self.target_energy.to_dict(),
            "tolerance": f"{sigmas:g} standard errors",
        }

    def modulus_histogram(self, bins: int = HISTOGRAM_BINS) -> dict:
        """Histogram of |Q_N| over the samples on [0, max phi]."""
        top = max(float(self.phi_on_samples.max()), float(np.abs(self.q_on_samples).max()), 1e-12)
        counts, edges = np.histogram(np.abs(self.q_on_samples), bins=bins, range=(0.0, top))
        return {"counts": [int(c) for c in counts], "edges": [float(e) for e in edges]}


@dataclass(eq=False)
class StepOutcome:
    """A generated piece P_{N+1} with its cached values and measurements."""

    polynomial: FPolynomial
    on_samples: np.ndarray
    on_probes: np.ndarray
    block: list[int]
    defect: IntegralEstimate
    record: StepRecord


@dataclass(eq=False)
class SeriesRun:
    """Outcome of build_series: the (possibly partial) state and why it stopped."""

    state: SeriesState
    stop_reason: str
    error: Optional[InnerFunctionError] = None


# ----------------------------------------------------------------------
# Steps
# ----------------------------------------------------------------------


def symbol_degrees(start: int, stop: int) -> list[int]:
    """Surrogate degrees tried in order: start, start + 3, ..., stop."""
    degrees = list(range(start, stop + 1, SYMBOL_DEGREE_STEP))
    if degrees[-1] != stop:
        degrees.append(stop)
    return degrees


def _defect_values(phi: np.ndarray, q_values: np.ndarray) -> np.ndarray:
    return (phi - np.abs(q_values)) ** 2


def defect(
    state: SeriesState, phi: TargetModulus, samples: BoundarySampleSet, covering: CoveringMap
) -> IntegralEstimate:
    """Monte Carlo estimate of int (phi - |Q_N|)^2 d sigma_M over the given samples."""
    images = covering.images(samples.points)
    q_values = evaluate_images(state.q_sum, images)
    return integrate_values(_defect_values(phi(images), q_values), samples)


def generating_step(
    state: SeriesState, phi: TargetModulus, li_set: LISet, context: SeriesContext
) -> StepOutcome:
    """Produce P_{N+1} with |P| < psi on the probes and a strictly smaller defect.

    Raises:
        InvariantViolation: If psi is not positive on the probes or a ceiling check fails
        ApproximationError: If |F - W psi| < psi / 4 fails at every degree and damping
        StagnationError: If the defect cannot be decreased or the energy ratio is too small
    """
    config = context.config
    covering = context.covering
    chunk = config.chunk_size
    step = state.step_count + 1

    psi_probes = state.phi_on_probes - np.abs(state.q_on_probes)
    if psi_probes.min() <= 0:
        raise InvariantViolation(f"Residual psi is not positive on the probes before step {step}")
    psi_samples = state.phi_on_samples - np.abs(state.q_on_samples)

    block = li_set.next_block(2 * config.d_psi_max + 1)
    k = block[-1] - config.d_psi_max
    packing = greedy_packing(context.candidates, k**-0.5, covering)
    certificate = search_signs(
        packing,
        k,
        derive_seed(config.seed, step, "signs"),
        trials=config.sign_trials,
        covering=covering,
        probes=context.probes.points,
    )
    measure = context.probes.reweighted(psi_probes**2, label="psi_squared")
    certificate = adapt_to_measure(
        packing,
        k,
        measure,
        derive_seed(config.seed, step, "rotation"),
        config.rotation_trials,
        covering=covering,
        certificate=certificate,
        probes=context.probes.points,
    )
    w_poly = normalize_to_W(
        certificate, build_Q(packing, certificate.signs, k, covering, certificate.rotation)
    )
    target_probes = evaluate_rw(certificate, context.probe_images) * psi_probes

    best: Optional[tuple[float, int, FPolynomial, np.ndarray]] = None
    for degree in symbol_degrees(config.d_psi, config.d_psi_max):
        symbol = fit_symbol(psi_probes, context.probe_images, degree)
        f_poly = project_product(w_poly, symbol, covering, config.term_cap)
        f_probes = evaluate_images(f_poly, context.probe_images, chunk)
        ratio = float(np.max(np.abs(f_probes - target_probes) / psi_probes))
        logger.debug(f"Step {step}: symbol degree {degree} fit ratio {ratio:.4f}")
        if best is None or ratio < best[0]:
            best = (ratio, degree, f_poly, f_probes)
        if ratio < FIT_SLACK:
            break

    fit_ratio, symbol_degree, f_poly, f_probes = best
    w_damping = 0
    while fit_ratio * 0.5**w_damping >= FIT_SLACK:
        w_damping += 1
        if w_damping > config.max_damping:
            raise ApproximationError(
                f"Step {step}: |F - W psi| / psi reaches {fit_ratio:.4f} at symbol degree "
                f"{symbol_degree} and stays >= {FIT_SLACK} after {config.max_damping} dampings"
            )
    scale = CEILING_FACTOR * 0.5**w_damping
    base_poly = f_poly.scale(scale)
    base_probes = f_probes * scale
    if np.any(np.abs(base_probes) >= psi_probes):
        raise InvariantViolation(f"Step {step}: |P| reaches psi on the probes")
    base_samples = evaluate_images(base_poly, context.sample_images, chunk)

    phases = np.exp(2j * np.pi * np.arange(config.phase_grid) / config.phase_grid)
    current = state.current_defect
    chosen: Optional[tuple[IntegralEstimate, int, int]] = None
    for p_damping in range(config.max_damping + 1):
        factor = 0.5**p_damping
        best_phase: Optional[tuple[IntegralEstimate, int]] = None
        for index, phase in enumerate(phases):
            candidate = state.q_on_samples + factor * phase * base_samples
            estimate = integrate_values(
                _defect_values(state.phi_on_samples, candidate), context.samples, chunk
            )
            if best_phase is None or estimate.value < best_phase[0].value:
                best_phase = (estimate, index)
        if best_phase[0].value < current:
            chosen = (best_phase[0], best_phase[1], p_damping)
            break

    if chosen is None:
        raise StagnationError(
            f"Step {step}: defect {current:.6g} does not decrease at any phase or damping"
        )
    new_defect, phase_index, p_damping = chosen
    rotation = phases[phase_index] * 0.5**p_damping

    polynomial = base_poly.scale(rotation)
    on_samples = base_samples * rotation
    on_probes = base_probes * rotation

    energy = norm_squared(polynomial, covering)
    residual = integrate_values(psi_samples**2, context.samples, chunk)
    energy_ratio = energy / float(residual.value)
    if energy_ratio < config.epsilon_energy:
        raise StagnationError(
            f"Step {step}: energy ratio {energy_ratio:.3e} below floor {config.epsilon_energy:.1e}",
            energy_ratio=energy_ratio,
        )

    degrees = polynomial.holomorphic_degrees()
    margin = float(np.min(state.phi_on_probes - np.abs(state.q_on_probes + on_probes)))
    record = StepRecord(
        step=step,
        k=k,
        block=block,
        degrees=degrees,
        centers=packing.K,
        symbol_degree=symbol_degree,
        fit_ratio=fit_ratio * 0.5**w_damping,
        w_damping=w_damping,
        p_damping=p_damping,
        phase_index=phase_index,
        phase=2.0 * math.pi * phase_index / config.phase_grid,
        energy=energy,
        residual_energy=float(residual.value),
        energy_ratio=energy_ratio,
        defect=float(new_defect.value),
        defect_std_error=new_defect.std_error,
        min_margin=margin,
        term_count=len(polynomial),
        certificate={
            "K": certificate.K,
            "l2_mass": float(certificate.l2_mass.value),
            "measure_ratio": certificate.measure_ratio,
            "measured_c": certificate.measured_c,
            "sup_bound_check": certificate.sup_bound_check,
        },
    )
    logger.info(
        f"Step {step}: k={k} K={packing.K} energy ratio {energy_ratio:.4g} "
        f"defect {current:.6g} -> {new_defect.value:.6g} margin {margin:.4g}"
    )
    return StepOutcome(polynomial, on_samples, on_probes, block, new_defect, record)


def accept_step(state: SeriesState, outcome: StepOutcome, covering: CoveringMap) -> None:
    """Append P_{N+1} to the series and re-check the structural invariants.

    Raises:
        InvariantViolation: On overlapping degree support, a ceiling miss, a
            non-decreasing defect or a broken Parseval ledger
    """
    degrees = set(outcome.polynomial.holomorphic_degrees())
    if not degrees <= set(outcome.block) or degrees & state.used_degrees:
        raise InvariantViolation("New piece leaves its degree block or overlaps earlier pieces")
    if outcome.record.min_margin <= 0:
        raise InvariantViolation("Sampled |Q_N| reaches phi on the probes")
    if not outcome.defect.value < state.current_defect:
        raise InvariantViolation("Defect did not decrease")

    state.partials.append(outcome.polynomial)
    state.q_sum = state.q_sum + outcome.polynomial
    state.used_degrees.update(outcome.block)
    state.q_on_samples = state.q_on_samples + outcome.on_samples
    state.q_on_probes = state.q_on_probes + outcome.on_probes
    state.energies.append(outcome.record.energy)
    state.defect_history.append(float(outcome.defect.value))
    state.defect_errors.append(outcome.defect.std_error)
    state.sup_margin_history.append(outcome.record.min_margin)
    state.records.append(outcome.record)

    ledger = state.parseval_ledger(covering)
    if not ledger["holds"]:
        raise InvariantViolation(
            f"Parseval ledger broken: ||Q_N||^2={ledger['q_norm_squared']:.12g} "
            f"vs sum={ledger['sum_partial_energy']:.12g}"
        )


def build_series(
    phi: TargetModulus, li_set: LISet, budget: int, context: SeriesContext
) -> SeriesRun:
    """Run generating steps until the budget, the defect target or an error.

    The partial state is returned together with any error raised by a step.
    """
    if budget < 1:
        raise DomainError(f"Budget must be at least 1, got {budget}")
    from src.core.subgraphs.series import run_series_loop

    return run_series_loop(phi, li_set, budget, context)


def series_report(run: SeriesRun, context: SeriesContext, phi: TargetModulus) -> dict:
    """Self-describing JSON report of a (possibly partial) series run."""
    state = run.state
    config = context.config
    margins = state.sup_margin_history
    return {
        "ceiling": {
            "anchor": IDENTITY_ANCHORS["ceiling"],
            "holds": all(m > 0 for m in margins),
            "identity": "|Q_N| < phi at every probe after every step",
            "min_margin_history": margins,
            "probe_count": context.probes.count,
            "tolerance": "min over probes of phi - |Q_N| strictly positive",
        },
        "defect_curve": {
            "anchor": IDENTITY_ANCHORS["defect"],
            "identity": "D_N = int (phi - |Q_N|)^2 d sigma_M, Monte Carlo on the sample set",
            "std_errors": state.defect_errors,
            "strictly_decreasing": state.defect_is_monotone(),
            "target": config.resolved_defect_target,
            "tolerance": "each value strictly below the previous one",
            "values": state.defect_history,
        },
        "energy_ledger": state.energy_ledger(config.sigma_threshold),
        "error": (
            None
            if run.error is None
            else {"message": str(run.error), "type": type(run.error).__name__}
        ),
        "modulus_histogram": state.modulus_histogram(),
        "note": (
            "Finite partial sums only: the series is truncated after the reported steps and "
            "|Q_N| approaches phi in L2 only in the limit."
        ),
        "parseval": state.parseval_ledger(context.covering),
        "q": config.q,
        "sample_count": context.samples.count,
        "seed": config.seed,
        "steps": [record.to_dict() for record in state.records],
        "stop_reason": run.stop_reason,
        "target": phi.description,
        "used_degrees": sorted(state.used_degrees),
    }
