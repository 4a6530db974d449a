"""State schemas for the pipeline graph and the series loop subgraph.

All TypedDict state definitions in one place. Values are plain Python objects;
graphs are compiled without a checkpointer, so nothing here needs to serialize.
"""

from typing import Any, Optional

from typing_extensions import TypedDict

from src.core.config import RunConfig
from src.core.inner_builder import LISet, SeriesContext, SeriesState, TargetModulus


class SeriesLoopState(TypedDict, total=False):
    """State of the series loop subgraph.

    Attributes:
        context: Seeded samples, probes and candidates of the run
        phi: Target modulus
        li_set: Degree supply; consumed blocks are recorded in it
        budget: Maximum number of steps
        defect_target: Stop once the defect drops to or below this value
        series: Running series state (partials, caches, histories)
        stop_reason: "budget", "defect_target" or "error"
        error: Exception raised by the failing step, if any
    """

    context: SeriesContext
    phi: TargetModulus
    li_set: LISet
    budget: int
    defect_target: float
    series: Optional[SeriesState]
    stop_reason: Optional[str]
    error: Optional[Exception]


class InnerPipelineState(TypedDict, total=False):
    """State of the build-inner pipeline graph.

    Attributes:
        config: Validated run configuration
        context: Seeded point sets, once prepared
        phi: Target modulus
        preamble: Packing and RW certificate at the configured degree
        series_run: Outcome of the series loop
        report: Assembled JSON report
        written: Paths of the emitted files
        error: First exception raised by a node
        exit_code: Process exit code for the CLI
    """

    config: RunConfig
    context: Optional[SeriesContext]
    phi: Optional[TargetModulus]
    preamble: dict[str, Any]
    series_run: Any
    report: dict[str, Any]
    written: list[str]
    error: Optional[Exception]
    exit_code: int
