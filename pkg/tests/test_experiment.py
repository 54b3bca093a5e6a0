import json

import numpy as np
import pytest

from v2x_loadcast.calls import ScenarioConfig
from v2x_loadcast.errors import DegenerateFeature, EmptyBatch
from v2x_loadcast.experiment import (
    ExperimentSpec,
    RunReport,
    comparison_table,
    grid_specs,
    naive_baseline,
    prepare_windows,
    run_experiment,
    run_scenario_grid,
    table_scenarios,
)
from v2x_loadcast.features import WindowSet, fit_normalizer, FEATURE_NAMES
from v2x_loadcast.road import synthesize_road_series
from v2x_loadcast.training import TrainingConfig

TINY = TrainingConfig(hidden_size=6, max_epochs=2, patience=2)


@pytest.fixture(scope="module")
def road6():
    return synthesize_road_series(6, 97)


def small_spec(scenario=None, mode="net_road", seed=1, training=TINY):
    scenario = scenario or ScenarioConfig(lam=0.2, handover_prob=0.5, cell_range_miles=1.5)
    return ExperimentSpec(scenario, mode, training=training, seed=seed)


class TestRunExperiment:
    def test_deterministic_given_seed(self, road6):
        a = run_experiment(small_spec(), road6).to_dict()
        b = run_experiment(small_spec(), road6).to_dict()
        a.pop("wall_ms"), b.pop("wall_ms")
        assert a == b

    def test_different_seeds_differ(self, road6):
        a = run_experiment(small_spec(seed=1), road6)
        b = run_experiment(small_spec(seed=2), road6)
        assert a.test_mae != b.test_mae

    def test_all_zero_calls_degenerate(self, road6):
        scenario = ScenarioConfig(lam=0.0, handover_prob=0.0, cell_range_miles=1.5)
        with pytest.raises(DegenerateFeature):
            run_experiment(small_spec(scenario), road6)

    def test_report_round_trips_losslessly(self, road6):
        report = run_experiment(small_spec(), road6)
        payload = json.loads(json.dumps(report.to_dict()))
        assert RunReport.from_dict(payload) == report

    def test_modes_share_the_pipeline(self, road6):
        net = run_experiment(small_spec(mode="net"), road6)
        fused = run_experiment(small_spec(mode="net_road"), road6)
        assert net.mode == "net" and fused.mode == "net_road"
        assert net.scenario_id == fused.scenario_id

    def test_raw_mae_is_std_scaled(self, road6):
        report = run_experiment(small_spec(), road6)
        spec = small_spec()
        _, stats, calls_std = prepare_windows(spec, road6)
        assert report.test_mae_raw == pytest.approx(report.test_mae * calls_std)
        assert report.norm_checksum == stats.checksum()


class TestLeakage:
    def test_normalizer_fitted_on_train_rows_only(self, road6):
        spec = small_spec()
        _, stats, _ = prepare_windows(spec, road6)
        from v2x_loadcast.calls import simulate_calls
        from v2x_loadcast.experiment import derive_scenario
        from v2x_loadcast.features import build_feature_matrix

        calls = simulate_calls(road6, derive_scenario(spec))
        raw = build_feature_matrix(road6, calls)
        train_rows = 4 * 288  # 6 days split 3:1:1 -> 4/1/1
        refit = fit_normalizer(raw[:train_rows], FEATURE_NAMES)
        assert refit.checksum() == stats.checksum()
        val_fit = fit_normalizer(raw[train_rows : 5 * 288], FEATURE_NAMES)
        assert val_fit.checksum() != stats.checksum()


class TestBaseline:
    def test_constant_series_gives_zero_mae(self):
        inputs = np.full((7, 4, 1), 3.3)
        targets = np.full((7, 1), 3.3)
        assert naive_baseline(WindowSet(inputs, targets)) == 0.0

    def test_alternating_series_error_is_step_size(self):
        # Series 0,1,0,1,...; persistence is wrong by exactly 1 at every step.
        series = np.array([0.0, 1.0] * 8)
        inputs = np.stack([series[i : i + 4] for i in range(10)])[:, :, None]
        targets = series[4:14, None]
        assert naive_baseline(WindowSet(inputs, targets)) == 1.0

    def test_empty_rejected(self):
        with pytest.raises(EmptyBatch):
            naive_baseline(WindowSet(np.zeros((0, 3, 1)), np.zeros((0, 1))))

    def test_trained_model_beats_persistence(self, road6):
        config = TrainingConfig(hidden_size=16, max_epochs=10, patience=4)
        report = run_experiment(small_spec(training=config), road6)
        assert report.test_mae < report.baseline_mae


class TestGrid:
    def test_table_has_seven_scenarios(self):
        scenarios = table_scenarios()
        assert len(scenarios) == 7
        assert {s.lam for s in scenarios} == {0.2, 0.6}
        assert {s.handover_prob for s in scenarios} == {1.0, 0.8, 0.5, 0.2, 0.0}
        assert {s.cell_range_miles for s in scenarios} == {1.5, 6.0}

    def test_grid_runs_every_cell(self, road6):
        specs = grid_specs(table_scenarios(), seeds=[1], training=TINY)
        rows = run_scenario_grid(specs, road6)
        assert len(rows) == 14  # seven scenarios x two modes
        assert all(row.report is not None for row in rows)
        table = comparison_table(rows)
        assert "Net&Road" in table and len(table.splitlines()) == 8

    def test_empty_grid_rejected(self, road6):
        with pytest.raises(ValueError):
            run_scenario_grid([], road6)

    def test_grid_deterministic_and_order_independent(self, road6):
        specs = grid_specs(table_scenarios()[:2], seeds=[1], training=TINY)
        serial = run_scenario_grid(specs, road6, max_workers=1)
        threaded = run_scenario_grid(specs, road6, max_workers=4)
        for a, b in zip(serial, threaded):
            da, db = a.report.to_dict(), b.report.to_dict()
            da.pop("wall_ms"), db.pop("wall_ms")
            assert da == db

    def test_failing_row_recorded_grid_continues(self, road6):
        dead = ScenarioConfig(lam=0.0, handover_prob=0.0, cell_range_miles=1.5)
        live = ScenarioConfig(lam=0.2, handover_prob=0.5, cell_range_miles=1.5)
        specs = grid_specs([dead, live], seeds=[1], modes=("net_road",), training=TINY)
        rows = run_scenario_grid(specs, road6)
        assert rows[0].report is None and "DegenerateFeature" in rows[0].error
        assert rows[1].report is not None


class TestSpecValidation:
    def test_bad_mode_rejected(self):
        with pytest.raises(ValueError):
            small_spec(mode="road_only")

    def test_bad_split_rejected(self):
        scenario = ScenarioConfig(lam=0.2, handover_prob=0.5, cell_range_miles=1.5)
        with pytest.raises(ValueError):
            ExperimentSpec(scenario, split=(3, 0, 1))

    def test_scenario_id_format(self):
        spec = small_spec()
        assert spec.scenario_id == "r1.5_l0.2_h0.5"
