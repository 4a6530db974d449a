"""Series loop subgraph.

initialize_series -> generate_step -> (generate_step | finalize_series) -> END

A failing step never escapes the graph: the error is stored in state and the
loop routes to finalize_series, so the partial series is always returned.
"""

import logging
from typing import Literal

from langgraph.graph import END, START, StateGraph

from src.core.errors import InnerFunctionError
from src.core.inner_builder import (
    LISet,
    SeriesContext,
    SeriesRun,
    SeriesState,
    TargetModulus,
    accept_step,
    generating_step,
)
from src.core.state_schemas import SeriesLoopState

logger = logging.getLogger(__name__)


def initialize_series(state: SeriesLoopState) -> SeriesLoopState:
    """Create the empty series Q_0 = 0 and check the target's positivity.

    Args:
        state: Loop state with context and phi

    Returns:
        Update with the initial SeriesState, or the positivity error
    """
    try:
        series = SeriesState.initial(state["context"], state["phi"])
    except InnerFunctionError as e:
        logger.error(f"Series initialization failed: {e}")
        return {"series": None, "error": e, "stop_reason": "error"}

    logger.info(f"Series start: D_0 = {series.current_defect:.6g}")
    return {"series": series, "error": None, "stop_reason": None}


def generate_step(state: SeriesLoopState) -> SeriesLoopState:
    """Generate and accept one series piece.

    Args:
        state: Loop state with a live series

    Returns:
        Update carrying the mutated series, or the error of the failing step
    """
    series = state["series"]
    context = state["context"]
    try:
        outcome = generating_step(series, state["phi"], state["li_set"], context)
        accept_step(series, outcome, context.covering)
    except InnerFunctionError as e:
        logger.error(f"Step {series.step_count + 1} failed: {type(e).__name__}: {e}")
        return {"series": series, "error": e, "stop_reason": "error"}
    return {"series": series}


def route_after_step(
    state: SeriesLoopState,
) -> Literal["generate_step", "finalize_series"]:
    """Continue until an error, the step budget or the defect target."""
    if state.get("error") is not None:
        return "finalize_series"
    series = state["series"]
    if series.step_count >= state["budget"]:
        return "finalize_series"
    if series.current_defect <= state["defect_target"]:
        return "finalize_series"
    return "generate_step"


def route_after_init(
    state: SeriesLoopState,
) -> Literal["generate_step", "finalize_series"]:
    if state.get("error") is not None:
        return "finalize_series"
    return "generate_step"


def finalize_series(state: SeriesLoopState) -> SeriesLoopState:
    """Record why the loop stopped."""
    if state.get("error") is not None:
        reason = "error"
    elif state["series"].current_defect <= state["defect_target"]:
        reason = "defect_target"
    else:
        reason = "budget"

    series = state.get("series")
    if series is not None:
        logger.info(
            f"Series stopped ({reason}) after {series.step_count} steps, "
            f"D_N = {series.current_defect:.6g}"
        )
    return {"stop_reason": reason}


def create_series_subgraph() -> StateGraph:
    """Create the series loop subgraph.

    Returns:
        Compiled StateGraph
    """
    workflow = StateGraph(SeriesLoopState)

    workflow.add_node("initialize_series", initialize_series)
    workflow.add_node("generate_step", generate_step)
    workflow.add_node("finalize_series", finalize_series)

    workflow.add_edge(START, "initialize_series")
    workflow.add_conditional_edges(
        "initialize_series",
        route_after_init,
        {"generate_step": "generate_step", "finalize_series": "finalize_series"},
    )
    workflow.add_conditional_edges(
        "generate_step",
        route_after_step,
        {"generate_step": "generate_step", "finalize_series": "finalize_series"},
    )
    workflow.add_edge("finalize_series", END)

    return workflow.compile()


def run_series_loop(
    phi: TargetModulus, li_set: LISet, budget: int, context: SeriesContext
) -> SeriesRun:
    """Run the series loop subgraph to completion.

    Raises:
        InnerFunctionError: If the target fails its positivity check (no series exists)
    """
    graph = create_series_subgraph()
    result = graph.invoke(
        {
            "context": context,
            "phi": phi,
            "li_set": li_set,
            "budget": budget,
            "defect_target": context.config.resolved_defect_target,
        },
        config={"recursion_limit": 2 * budget + 10},
    )
    if result.get("series") is None:
        raise result["error"]
    return SeriesRun(
        state=result["series"],
        stop_reason=result["stop_reason"],
        error=result.get("error"),
    )
