"""Integration tests for the series steps and the series loop subgraph."""

import numpy as np
import pytest

from src.core.errors import TargetError
from src.core.f_polynomials import evaluate_images
from src.core.inner_builder import (
    LISet,
    SeriesContext,
    SeriesState,
    TargetModulus,
    accept_step,
    build_series,
    defect,
    generating_step,
    series_report,
)


class TestFirstStep:
    """Tests for the first step, where psi = phi = 1."""

    def test_initial_state(self, series_context):
        state = SeriesState.initial(series_context, TargetModulus.constant())
        assert state.step_count == 0
        assert state.current_defect == pytest.approx(1.0)
        assert state.sup_margin_history == [1.0]
        assert state.q_sum.is_zero()

    def test_negative_target_rejected(self, series_context):
        with pytest.raises(TargetError):
            SeriesState.initial(series_context, TargetModulus.constant(-1.0))

    def test_first_piece_is_scaled_rw_polynomial(self, series_context):
        """Test F = W (constant symbol), P = 4/5 W, no damping, first phase."""
        phi = TargetModulus.constant()
        state = SeriesState.initial(series_context, phi)
        outcome = generating_step(state, phi, LISet.all_integers(), series_context)
        record = outcome.record

        assert record.k == 12
        assert outcome.block == list(range(25))
        assert record.degrees == [12]
        assert record.symbol_degree == 6
        assert record.fit_ratio < 1e-8
        assert (record.w_damping, record.p_damping, record.phase_index) == (0, 0, 0)
        assert outcome.defect.value < state.current_defect
        assert record.min_margin > 0
        assert record.energy_ratio >= series_context.config.epsilon_energy

        direct = evaluate_images(outcome.polynomial, series_context.probe_images)
        assert np.allclose(direct, outcome.on_probes)
        sampled_sup = np.abs(outcome.on_probes).max()
        assert sampled_sup == pytest.approx(0.8 * record.certificate["sup_bound_check"], rel=1e-8)

    def test_accept_updates_ledgers(self, series_context):
        phi = TargetModulus.constant()
        state = SeriesState.initial(series_context, phi)
        outcome = generating_step(state, phi, LISet.all_integers(), series_context)
        accept_step(state, outcome, series_context.covering)

        assert state.step_count == 1
        assert state.used_degrees == set(range(25))
        assert state.defect_is_monotone()
        assert state.parseval_ledger(series_context.covering)["holds"]
        assert state.energy_ledger(4.0)["holds"]
        recomputed = defect(state, phi, series_context.samples, series_context.covering)
        assert recomputed.value == pytest.approx(state.current_defect, rel=1e-10)

    def test_residue_window_gives_same_first_block(self, series_context):
        phi = TargetModulus.constant()
        state = SeriesState.initial(series_context, phi)
        li_set = LISet.residue_window(40, 30)
        outcome = generating_step(state, phi, li_set, series_context)
        assert outcome.block == list(range(25))
        assert li_set.next_block(25) == list(range(40, 65))


class TestSeriesLoop:
    """Tests for build_series and the report it feeds."""

    def test_budget_of_one(self, series_context):
        run = build_series(TargetModulus.constant(), LISet.all_integers(), 1, series_context)
        assert run.stop_reason == "budget"
        assert run.error is None
        assert run.state.step_count == 1

    @pytest.mark.slow
    def test_several_steps_keep_invariants(self, series_context):
        """Test that every accepted step lowers the defect and keeps Parseval exact."""
        run = build_series(TargetModulus.constant(), LISet.all_integers(), 3, series_context)
        state = run.state
        assert run.error is None
        assert run.stop_reason in {"budget", "defect_target"}
        assert state.step_count >= 1
        assert state.defect_is_monotone()
        assert all(margin > 0 for margin in state.sup_margin_history)
        assert state.parseval_ledger(series_context.covering)["holds"]
        blocks = [record.block for record in state.records]
        assert all(a[-1] < b[0] for a, b in zip(blocks, blocks[1:]))

    @pytest.mark.slow
    @pytest.mark.parametrize("q", [1, 2])
    def test_ten_steps_without_error(self, small_config, q):
        """Test a budget of ten steps: no error, strict defect decrease, energy above the floor."""
        config = small_config.model_copy(
            update={"q": q, "budget": 10, "sample_count": 4000, "probe_count": 1000}
        )
        context = SeriesContext.prepare(config)
        run = build_series(TargetModulus.constant(), LISet.all_integers(), 10, context)
        state = run.state

        assert run.error is None
        assert run.stop_reason in {"budget", "defect_target"}
        assert state.step_count >= 1
        defects = state.defect_history
        assert all(later < earlier for earlier, later in zip(defects, defects[1:]))
        assert all(r.energy_ratio >= config.epsilon_energy for r in state.records)
        assert all(margin > 0 for margin in state.sup_margin_history)

    def test_target_error_escapes(self, series_context):
        with pytest.raises(TargetError):
            build_series(TargetModulus.constant(0.0), LISet.all_integers(), 2, series_context)

    def test_report(self, series_context):
        phi = TargetModulus.radial(1.0, 0.5)
        run = build_series(phi, LISet.all_integers(), 1, series_context)
        report = series_report(run, series_context, phi)
        assert report["stop_reason"] == run.stop_reason
        assert report["ceiling"]["holds"]
        assert report["defect_curve"]["strictly_decreasing"]
        assert len(report["defect_curve"]["values"]) == run.state.step_count + 1
        assert report["parseval"]["holds"]
        assert sum(report["modulus_histogram"]["counts"]) == series_context.samples.count
        assert report["target"] == phi.description
        for section in ("ceiling", "defect_curve", "energy_ledger", "parseval"):
            assert report[section]["anchor"]
        assert report["ceiling"]["tolerance"]
