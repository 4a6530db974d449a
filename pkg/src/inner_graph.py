"""Build-inner pipeline graph.

prepare_samples -> pack_and_search -> run_series -> write_report

Domain errors never escape a node: the first error is stored in state and the
graph routes straight to write_report, which always emits a (partial) report.
"""

import logging
from pathlib import Path
from typing import Literal

from langchain_core.runnables import RunnableConfig
from langgraph.graph import END, START, StateGraph

from src.core.errors import ExitCode, InnerFunctionError, InvariantViolation, classify_error
from src.core.inner_builder import (
    STEP_CSV_HEADER,
    LISet,
    SeriesContext,
    TargetModulus,
    build_series,
    series_report,
)
from src.core.metric_packing import greedy_packing, packing_lower_bound
from src.core.reports import write_csv, write_json, write_manifest
from src.core.rw_sequence import search_signs
from src.core.sphere_measure import derive_seed
from src.core.state_schemas import InnerPipelineState

logger = logging.getLogger(__name__)

REPORT_NAME = "series_report.json"
STEPS_NAME = "series_steps.csv"


def _failed(stage: str, error: Exception) -> InnerPipelineState:
    logger.error(f"{stage} failed: {type(error).__name__}: {error}")
    return {"error": error}


def prepare_samples(state: InnerPipelineState) -> InnerPipelineState:
    """Draw the seeded point sets and check the target modulus."""
    config = state["config"]
    try:
        context = SeriesContext.prepare(config)
        phi = TargetModulus.from_config(config)
        phi.require_positive(context.probe_images)
    except InnerFunctionError as e:
        return _failed("prepare_samples", e)
    return {"context": context, "phi": phi}


def pack_and_search(state: InnerPipelineState) -> InnerPipelineState:
    """Greedy packing at r = 1/sqrt(k) and the RW sign search at the configured degree."""
    config = state["config"]
    context = state["context"]
    try:
        packing = greedy_packing(context.candidates, config.radius, context.covering)
        mass = context.covering.sheet_count
        bound, holds = packing_lower_bound(packing, mass, config.packing_slack)
        if not holds:
            raise InvariantViolation(
                f"Packing has K={packing.K} centers, bound requires {bound:.4g}"
            )
        certificate = search_signs(
            packing,
            config.k,
            derive_seed(config.seed, "signs"),
            config.sign_trials,
            covering=context.covering,
            probes=context.probes.points,
        )
    except InnerFunctionError as e:
        return _failed("pack_and_search", e)

    preamble = {
        "certificate": certificate.to_dict(),
        "packing": {**packing.to_dict(), "lower_bound": bound},
    }
    return {"preamble": preamble}


def run_series(state: InnerPipelineState) -> InnerPipelineState:
    """Run the series loop subgraph."""
    config = state["config"]
    try:
        run = build_series(
            state["phi"], LISet.from_config(config), config.budget, state["context"]
        )
    except InnerFunctionError as e:
        return _failed("run_series", e)

    update: InnerPipelineState = {"series_run": run}
    if run.error is not None:
        update["error"] = run.error
    return update


def write_report(state: InnerPipelineState) -> InnerPipelineState:
    """Write the JSON report, the per-step CSV and the manifest; set the exit code."""
    config = state["config"]
    output_dir = Path(config.output_dir) / "build_inner"
    error = state.get("error")
    run = state.get("series_run")
    context = state.get("context")

    if run is not None and context is not None:
        report = series_report(run, context, state["phi"])
    else:
        report = {
            "error": (
                None
                if error is None
                else {"message": str(error), "type": type(error).__name__}
            ),
            "q": config.q,
            "seed": config.seed,
            "steps": [],
            "stop_reason": "error",
        }
    report["preamble"] = state.get("preamble", {})

    if error is not None:
        exit_code = classify_error(error)
    elif run is not None and not run.state.defect_is_monotone():
        exit_code = ExitCode.INVARIANT_FAILURE
    else:
        exit_code = ExitCode.OK
    report["exit_code"] = int(exit_code)

    files = [write_json(output_dir / REPORT_NAME, report)]
    rows = [] if run is None else [record.csv_row() for record in run.state.records]
    files.append(write_csv(output_dir / STEPS_NAME, STEP_CSV_HEADER, rows))
    files.append(write_manifest(output_dir, files, "build-inner"))
    logger.info(f"Report written to {output_dir} (exit code {int(exit_code)})")
    return {"report": report, "written": [str(p) for p in files], "exit_code": int(exit_code)}


def route_after_stage(state: InnerPipelineState, next_stage: str) -> str:
    if state.get("error") is not None:
        return "write_report"
    return next_stage


def route_after_prepare(state: InnerPipelineState) -> Literal["pack_and_search", "write_report"]:
    return route_after_stage(state, "pack_and_search")


def route_after_pack(state: InnerPipelineState) -> Literal["run_series", "write_report"]:
    return route_after_stage(state, "run_series")


def create_inner_graph(config: RunnableConfig) -> StateGraph:
    """Create the build-inner pipeline graph.

    Args:
        config: RunnableConfig from the CLI or LangGraph tooling; runs are
                reproducible from the seed, so no checkpointer is attached

    Returns:
        Compiled StateGraph
    """
    workflow = StateGraph(InnerPipelineState)

    workflow.add_node("prepare_samples", prepare_samples)
    workflow.add_node("pack_and_search", pack_and_search)
    workflow.add_node("run_series", run_series)
    workflow.add_node("write_report", write_report)

    workflow.add_edge(START, "prepare_samples")
    workflow.add_conditional_edges(
        "prepare_samples",
        route_after_prepare,
        {"pack_and_search": "pack_and_search", "write_report": "write_report"},
    )
    workflow.add_conditional_edges(
        "pack_and_search",
        route_after_pack,
        {"run_series": "run_series", "write_report": "write_report"},
    )
    workflow.add_edge("run_series", "write_report")
    workflow.add_edge("write_report", END)

    return workflow.compile()
