"""CLI commands for the covering-domain inner function toolkit.

Typer-based CLI. Every command reads a flat JSON config (--config) overlaid by
explicit flags, writes deterministic artifacts under output_dir and exits with
0 (pass), 1 (configuration error), 2 (invariant failure) or 3 (stagnation).
"""

import logging
from pathlib import Path
from typing import Any, Optional

import numpy as np
import typer
from dotenv import load_dotenv
from rich.console import Console
from rich.logging import RichHandler
from rich.table import Table

from src.core.config import RunConfig, get_settings, load_run_config
from src.core.covering_domain import CoveringMap
from src.core.errors import ConfigurationError, ExitCode, InnerFunctionError, classify_error

# Load .env file into os.environ at module import so Settings sees INNER_* values
env_path = Path(__file__).parent.parent.parent / ".env"
if env_path.exists():
    load_dotenv(env_path, override=False)

app = typer.Typer(
    name="covering-inner",
    help="Inner functions on domains covering the unit ball of C^2",
    add_completion=False,
)
console = Console()

__version__ = "0.1.0"

DOUBLING_RADII = (0.1, 0.2, 0.3, 0.4)
SHELL_PROBES = 100


def setup_logging(log_level: Optional[str] = None):
    """Setup logging with rich handler."""
    level = (log_level or get_settings().log_level).upper()
    logging.basicConfig(
        level=level,
        format="%(message)s",
        datefmt="[%X]",
        handlers=[RichHandler(console=console, rich_tracebacks=True)],
        force=True,
    )


def _load_config(config_path: Optional[Path], **overrides: Any) -> RunConfig:
    """Build the RunConfig or exit with code 1, naming the offending field."""
    try:
        return load_run_config(config_path, overrides, get_settings().run_defaults())
    except ConfigurationError as e:
        console.print(f"[bold red]Configuration error:[/bold red] {e}")
        raise typer.Exit(code=int(ExitCode.CONFIG_ERROR))


def _covering(config: RunConfig) -> CoveringMap:
    return CoveringMap(config.q, config.boundary_tolerance, config.ramification_guard)


def _fail(error: Exception) -> typer.Exit:
    """Print a domain error and build the Exit carrying its classified code."""
    code = classify_error(error)
    console.print(f"[bold red]{type(error).__name__}:[/bold red] {error}")
    return typer.Exit(code=int(code))


def _finish(passed: bool, output_dir: Path) -> None:
    if passed:
        console.print(f"[bold green]PASS[/bold green] [dim]{output_dir}[/dim]")
        return
    console.print(f"[bold red]FAIL[/bold red] [dim]{output_dir}[/dim]")
    raise typer.Exit(code=int(ExitCode.INVARIANT_FAILURE))


# Shared options

CONFIG_OPTION = typer.Option(None, "--config", "-c", help="Flat JSON run document")
SEED_OPTION = typer.Option(..., "--seed", "-s", help="Master seed (64-bit, required)")
Q_OPTION = typer.Option(None, "--q", help="Covering exponent q >= 1 (N = q sheets)")
K_OPTION = typer.Option(None, "--k", help="RW degree; packing radius 1/sqrt(k)")
SAMPLES_OPTION = typer.Option(None, "--sample-count", help="Boundary Monte Carlo samples")
PROBES_OPTION = typer.Option(None, "--probe-count", help="Probe points for sup checks")
CANDIDATES_OPTION = typer.Option(None, "--candidate-count", help="Packing candidate cloud size")
OUTPUT_OPTION = typer.Option(None, "--output-dir", "-o", help="Directory for reports")
LOG_OPTION = typer.Option(None, "--log-level", "-l", help="Logging level")


@app.command("verify-integrals")
def verify_integrals(
    seed: int = SEED_OPTION,
    config_path: Optional[Path] = CONFIG_OPTION,
    q: Optional[int] = Q_OPTION,
    k: Optional[int] = K_OPTION,
    sample_count: Optional[int] = SAMPLES_OPTION,
    monomial_degree: Optional[int] = typer.Option(
        None, "--monomial-degree", help="Largest |alpha|, |beta| checked"
    ),
    sigma_threshold: Optional[float] = typer.Option(
        None, "--sigma-threshold", help="Statistical acceptance in standard errors"
    ),
    output_dir: Optional[Path] = OUTPUT_OPTION,
    log_level: Optional[str] = LOG_OPTION,
):
    """Run the sphere-measure identity suite and write integral_report.json.

    Examples:
        covering-inner verify-integrals --seed 7
        covering-inner verify-integrals --seed 7 --q 3 --sample-count 20000
    """
    setup_logging(log_level)
    config = _load_config(
        config_path,
        seed=seed,
        q=q,
        k=k,
        sample_count=sample_count,
        monomial_degree=monomial_degree,
        sigma_threshold=sigma_threshold,
        output_dir=output_dir,
    )

    from src.core.reports import write_json, write_manifest
    from src.core.verification import run_integral_suite

    console.print(f"\n[bold cyan]verify-integrals[/bold cyan] q={config.q} seed={config.seed}")
    try:
        report = run_integral_suite(config, _covering(config))
    except InnerFunctionError as e:
        raise _fail(e)

    target = Path(config.output_dir) / "verify_integrals"
    files = [write_json(target / "integral_report.json", report.to_dict())]
    write_manifest(target, files, "verify-integrals")

    table = Table(title="Identity checks")
    table.add_column("Family")
    table.add_column("Passed", justify="right")
    table.add_column("Failed", justify="right")
    for family, counts in report.summary().items():
        table.add_row(family, str(counts["passed"]), str(counts["failed"]))
    console.print(table)
    _finish(report.passed, target)


@app.command()
def pack(
    seed: int = SEED_OPTION,
    config_path: Optional[Path] = CONFIG_OPTION,
    q: Optional[int] = Q_OPTION,
    k: Optional[int] = K_OPTION,
    candidate_count: Optional[int] = CANDIDATES_OPTION,
    sample_count: Optional[int] = SAMPLES_OPTION,
    packing_slack: Optional[float] = typer.Option(
        None, "--packing-slack", help="Relative slack on the K >= N/(4r^2) bound"
    ),
    output_dir: Optional[Path] = OUTPUT_OPTION,
    log_level: Optional[str] = LOG_OPTION,
):
    """Greedy maximal packing at r = 1/sqrt(k) with cover, shell and doubling checks.

    Examples:
        covering-inner pack --seed 7 --q 2 --k 8
    """
    setup_logging(log_level)
    config = _load_config(
        config_path,
        seed=seed,
        q=q,
        k=k,
        candidate_count=candidate_count,
        sample_count=sample_count,
        packing_slack=packing_slack,
        output_dir=output_dir,
    )

    from src.core.metric_packing import (
        SEPARATION_TOLERANCE,
        greedy_packing,
        kernel_decay_holds,
        measure_doubling,
        minimum_separation,
        packing_lower_bound,
        shell_histogram,
        verify_cover,
    )
    from src.core.reports import IDENTITY_ANCHORS, write_json, write_manifest
    from src.core.sphere_measure import derive_seed, sample_boundary

    covering = _covering(config)
    r = config.radius
    console.print(f"\n[bold cyan]pack[/bold cyan] q={config.q} k={config.k} r={r:.6f}")
    try:
        candidates = sample_boundary(
            covering, derive_seed(config.seed, "candidates"), config.candidate_count
        )
        packing = greedy_packing(candidates, r, covering)
        cover = verify_cover(packing, candidates, covering)
        separation = minimum_separation(packing.centers, covering)
        bound, bound_holds = packing_lower_bound(
            packing, covering.sheet_count, config.packing_slack
        )

        probes = sample_boundary(covering, derive_seed(config.seed, "shell-probes"), SHELL_PROBES)
        histograms = [
            shell_histogram(packing.centers, probe, r, covering) for probe in probes.points
        ]
        decay = all(kernel_decay_holds(packing.centers, p, r, covering) for p in probes.points)

        samples = sample_boundary(
            covering, derive_seed(config.seed, "samples"), config.sample_count
        )
        doubling = measure_doubling(
            covering, samples, DOUBLING_RADII, derive_seed(config.seed, "doubling")
        )
    except InnerFunctionError as e:
        raise _fail(e)

    violations = sum(len(h.violations) for h in histograms)
    if violations:
        logging.getLogger(__name__).error(
            f"{violations} shell counts exceed (m+2)^2 over {SHELL_PROBES} probes"
        )
    longest = max(len(h.counts) for h in histograms)
    shell_max = [
        max(h.counts[m] if m < len(h.counts) else 0 for h in histograms) for m in range(longest)
    ]
    separated = separation >= r - SEPARATION_TOLERANCE

    report = {
        "cover": {**cover.to_dict(), "anchor": IDENTITY_ANCHORS["cover"]},
        "doubling": {**doubling.to_dict(), "anchor": IDENTITY_ANCHORS["doubling"]},
        "kernel_decay": {
            "anchor": IDENTITY_ANCHORS["kernel_decay"],
            "holds": decay,
            "probe_count": SHELL_PROBES,
            "tolerance": "pointwise, absolute 1e-12",
        },
        "lower_bound": {
            "anchor": IDENTITY_ANCHORS["packing_bound"],
            "holds": bound_holds,
            "identity": "K >= N / (4 r^2), up to the relative slack",
            "slack": config.packing_slack,
            "value": bound,
        },
        "packing": packing.to_dict(),
        "separation": {
            "anchor": IDENTITY_ANCHORS["separation"],
            "holds": separated,
            "min_distance": separation,
            "r": r,
            "tolerance": SEPARATION_TOLERANCE,
        },
        "shells": {
            "anchor": IDENTITY_ANCHORS["shells"],
            "bound": [(m + 2) ** 2 for m in range(longest)],
            "holds": violations == 0,
            "max_counts": shell_max,
            "probe_count": SHELL_PROBES,
            "tolerance": "exact integer counts",
            "violations": violations,
        },
    }
    target = Path(config.output_dir) / "pack"
    files = [write_json(target / "packing.json", report)]
    write_manifest(target, files, "pack")

    console.print(
        f"K={packing.K} (bound {bound:.3f}), cover worst {cover.worst_distance:.4f} <= 2r, "
        f"C2={doubling.c2:.3f}"
    )
    _finish(bound_holds and cover.covered and separated and decay and violations == 0, target)


@app.command("rw-search")
def rw_search(
    seed: int = SEED_OPTION,
    config_path: Optional[Path] = CONFIG_OPTION,
    q: Optional[int] = Q_OPTION,
    k: Optional[int] = K_OPTION,
    candidate_count: Optional[int] = CANDIDATES_OPTION,
    sample_count: Optional[int] = SAMPLES_OPTION,
    probe_count: Optional[int] = PROBES_OPTION,
    sign_trials: Optional[int] = typer.Option(None, "--sign-trials", help="Random sign vectors"),
    rotation_trials: Optional[int] = typer.Option(
        None, "--rotation-trials", help="Haar rotations tried against sigma_M"
    ),
    output_dir: Optional[Path] = OUTPUT_OPTION,
    log_level: Optional[str] = LOG_OPTION,
):
    """Search signs for the RW polynomial of degree k and adapt it to sigma_M.

    Examples:
        covering-inner rw-search --seed 7 --k 8 --sign-trials 64
    """
    setup_logging(log_level)
    config = _load_config(
        config_path,
        seed=seed,
        q=q,
        k=k,
        candidate_count=candidate_count,
        sample_count=sample_count,
        probe_count=probe_count,
        sign_trials=sign_trials,
        rotation_trials=rotation_trials,
        output_dir=output_dir,
    )

    from src.core.metric_packing import greedy_packing
    from src.core.reports import write_json, write_manifest
    from src.core.rw_sequence import adapt_to_measure, search_signs
    from src.core.sphere_measure import derive_seed, sample_boundary

    covering = _covering(config)
    console.print(f"\n[bold cyan]rw-search[/bold cyan] q={config.q} k={config.k}")
    try:
        candidates = sample_boundary(
            covering, derive_seed(config.seed, "candidates"), config.candidate_count
        )
        probes = sample_boundary(covering, derive_seed(config.seed, "probes"), config.probe_count)
        samples = sample_boundary(
            covering, derive_seed(config.seed, "samples"), config.sample_count
        )
        packing = greedy_packing(candidates, config.radius, covering)
        certificate = search_signs(
            packing,
            config.k,
            derive_seed(config.seed, "signs"),
            config.sign_trials,
            covering=covering,
            probes=probes.points,
        )
        adapted = adapt_to_measure(
            packing,
            config.k,
            samples,
            derive_seed(config.seed, "rotation"),
            config.rotation_trials,
            covering=covering,
            certificate=certificate,
            probes=probes.points,
        )
    except InnerFunctionError as e:
        raise _fail(e)

    target = Path(config.output_dir) / "rw_search"
    files = [
        write_json(
            target / "rw_certificate.json",
            {"adapted": adapted.to_dict(), "certificate": certificate.to_dict()},
        )
    ]
    write_manifest(target, files, "rw-search")

    console.print(
        f"K={certificate.K} l2={certificate.l2_mass.value:.6g} "
        f"(floor {certificate.mean_l2:.6g}), sup |W|={certificate.sup_bound_check:.4f}"
    )
    passed = (
        certificate.meets_mean_floor and certificate.sup_within_bound and adapted.sup_within_bound
    )
    _finish(passed, target)


@app.command("build-inner")
def build_inner(
    seed: int = SEED_OPTION,
    config_path: Optional[Path] = CONFIG_OPTION,
    q: Optional[int] = Q_OPTION,
    k: Optional[int] = K_OPTION,
    sample_count: Optional[int] = SAMPLES_OPTION,
    probe_count: Optional[int] = PROBES_OPTION,
    candidate_count: Optional[int] = CANDIDATES_OPTION,
    sign_trials: Optional[int] = typer.Option(None, "--sign-trials", help="Random sign vectors"),
    rotation_trials: Optional[int] = typer.Option(
        None, "--rotation-trials", help="Haar rotations per step"
    ),
    budget: Optional[int] = typer.Option(None, "--budget", "-b", help="Maximum series steps"),
    defect_target: Optional[float] = typer.Option(
        None, "--defect-target", help="Stop once the defect drops below (default 0.05*N)"
    ),
    d_psi: Optional[int] = typer.Option(None, "--d-psi", help="Starting surrogate degree"),
    d_psi_max: Optional[int] = typer.Option(None, "--d-psi-max", help="Largest surrogate degree"),
    epsilon_energy: Optional[float] = typer.Option(
        None, "--epsilon-energy", help="Minimum per-step energy ratio"
    ),
    output_dir: Optional[Path] = OUTPUT_OPTION,
    log_level: Optional[str] = LOG_OPTION,
):
    """Run sample -> pack -> RW search -> series build and write the series report.

    Examples:
        covering-inner build-inner --seed 7 --budget 10
        covering-inner build-inner --seed 7 --q 2 --config run.json
    """
    setup_logging(log_level)
    config = _load_config(
        config_path,
        seed=seed,
        q=q,
        k=k,
        sample_count=sample_count,
        probe_count=probe_count,
        candidate_count=candidate_count,
        sign_trials=sign_trials,
        rotation_trials=rotation_trials,
        budget=budget,
        defect_target=defect_target,
        d_psi=d_psi,
        d_psi_max=d_psi_max,
        epsilon_energy=epsilon_energy,
        output_dir=output_dir,
    )

    from src.inner_graph import create_inner_graph

    console.print(
        f"\n[bold cyan]build-inner[/bold cyan] q={config.q} seed={config.seed} "
        f"budget={config.budget}"
    )
    graph = create_inner_graph({"configurable": {}})
    result = graph.invoke({"config": config})

    report = result.get("report", {})
    defects = report.get("defect_curve", {}).get("values", [])
    if defects:
        console.print(
            f"steps={len(defects) - 1} D_0={defects[0]:.6g} D_N={defects[-1]:.6g} "
            f"stop={report.get('stop_reason')}"
        )
    exit_code = result.get("exit_code", int(ExitCode.INVARIANT_FAILURE))
    if exit_code != ExitCode.OK:
        error = result.get("error")
        message = f"{type(error).__name__}: {error}" if error is not None else "defect not monotone"
        console.print(f"[bold red]FAIL[/bold red] {message}")
        raise typer.Exit(code=exit_code)
    console.print(f"[bold green]PASS[/bold green] [dim]{config.output_dir}[/dim]")


@app.command("oracle-1d")
def oracle_1d(
    spec_path: Optional[Path] = typer.Option(
        None, "--spec", help="JSON document with blaschke/singular specs"
    ),
    output_dir: Optional[Path] = OUTPUT_OPTION,
    log_level: Optional[str] = LOG_OPTION,
):
    """Check one-variable Blaschke and singular inner functions on the circle.

    Examples:
        covering-inner oracle-1d
        covering-inner oracle-1d --spec oracle.json
    """
    setup_logging(log_level)

    from src.core.oracle_1d import load_oracle_spec, run_oracle_suite
    from src.core.reports import write_json, write_manifest

    try:
        spec = load_oracle_spec(spec_path)
        checks = run_oracle_suite(spec)
    except InnerFunctionError as e:
        raise _fail(e)

    target = Path(output_dir or get_settings().output_dir) / "oracle_1d"
    report = {
        "checks": [check.to_dict() for check in checks],
        "passed": all(check.passed for check in checks),
        "spec": spec.model_dump(mode="json"),
    }
    files = [write_json(target / "oracle_report.json", report)]
    write_manifest(target, files, "oracle-1d")

    for check in checks:
        status = "[green]ok[/green]" if check.passed else "[red]failed[/red]"
        console.print(f"{check.name}: deviation {check.max_deviation:.3e} {status}")
    _finish(report["passed"], target)


@app.command()
def version():
    """Show toolkit version."""
    console.print(f"[bold cyan]covering-inner[/bold cyan] v{__version__}")
    console.print(f"[dim]numpy {np.__version__}[/dim]")
