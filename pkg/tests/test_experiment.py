import json
from dataclasses import replace

import numpy as np
import pandas as pd
import pytest

from clustering.fcm import FcmConfig, fcm_fit
from core.errors import DimensionError, ParameterError, ReportError
from data.dataset import SyntheticSpec, gen_synthetic, normalize_zscore
from experiment.cell_result import CellResult
from experiment.plot_data import emit_plot_data, plot_frame
from experiment.report import ReportTable, aggregate, emit_report, render_report, total_error
from experiment.runner import ExperimentConfig, SweepRunner, default_m_values, load_results, run_experiment
from optim.pso import PsoConfig
from pipeline.refine import fit_baseline, train_refined


def cell(method="baseline", c=2, m_index=0, m0=2.1, fold=0, repeat=0, train=0.01, test=0.02,
         n_train=8, n_test=2, dataset_id="toy", m_star=None, status="success"):
    return CellResult(
        dataset_id=dataset_id, c=c, m0=m0, m_index=m_index, fold=fold, repeat=repeat,
        method=method, status=status, train_error=train, test_error=test,
        n_train=n_train, n_test=n_test, m_star=m_star,
    )


@pytest.fixture
def tiny_config(small_synthetic):
    return ExperimentConfig(
        dataset="synthetic",
        synthetic=small_synthetic,
        c_values=[2],
        m_values=[2.1],
        folds=2,
        repeats=1,
        pso=PsoConfig(particles=6, max_iter=5),
        master_seed=11,
    )


class TestCellResult:
    def test_validation(self):
        with pytest.raises(ParameterError):
            cell(method="kmeans")
        with pytest.raises(ParameterError):
            cell(train=float("nan"))

    def test_failure_record(self):
        r = CellResult.failure("DeadClusterError: cluster 1", dataset_id="toy", c=2, m0=2.1,
                               m_index=0, fold=0, repeat=0, method="proposed")
        assert not r.ok
        assert CellResult.from_dict(r.to_dict()).error == r.error


class TestRunner:
    def test_default_grid(self):
        assert default_m_values() == [1.1, 1.6, 2.1, 2.6, 3.1, 3.6, 4.1, 4.6, 5.1]
        cfg = ExperimentConfig()
        assert cfg.cell_count == 5 * 9 * 5 * 10 * 2

    def test_cell_cardinality(self, tiny_config):
        results = run_experiment(tiny_config)
        assert len(results) == 4
        assert {(r.fold, r.method) for r in results} == {
            (0, "baseline"), (0, "proposed"), (1, "baseline"), (1, "proposed")}
        assert all(r.ok for r in results)
        assert all(r.n_train + r.n_test == 20 for r in results)

    def test_proposed_never_worse_on_train(self, tiny_config):
        results = {(r.fold, r.method): r for r in run_experiment(tiny_config)}
        for fold in range(2):
            assert results[(fold, "proposed")].train_error <= results[(fold, "baseline")].train_error

    def test_deterministic(self, tiny_config):
        a = [r.to_dict() for r in run_experiment(tiny_config)]
        b = [r.to_dict() for r in run_experiment(tiny_config)]
        assert a == b

    def test_parallel_matches_serial(self, tiny_config):
        serial = [r.to_dict() for r in run_experiment(tiny_config, jobs=1)]
        parallel = [r.to_dict() for r in run_experiment(tiny_config, jobs=3)]
        assert serial == parallel

    def test_log_and_resume(self, tiny_config, tmp_path):
        log = str(tmp_path / "results.ndjson")
        first = run_experiment(tiny_config, log)
        with open(log, encoding="utf-8") as f:
            assert len(f.readlines()) == 4
        second = run_experiment(tiny_config, log)
        with open(log, encoding="utf-8") as f:
            assert len(f.readlines()) == 4
        assert [r.to_dict() for r in second] == [r.to_dict() for r in first]
        assert [r.to_dict() for r in load_results(log)] == [r.to_dict() for r in first]

    def test_resume_ignores_another_config(self, tiny_config, tmp_path):
        log = str(tmp_path / "results.ndjson")
        run_experiment(tiny_config, log)
        other = replace(tiny_config, m_values=[3.1], master_seed=99)
        resumed = run_experiment(other, log)
        assert all(r.m0 == 3.1 for r in resumed)
        assert [r.to_dict() for r in resumed] == [r.to_dict() for r in run_experiment(other)]
        assert len(load_results(log)) == 8
        with pytest.raises(ReportError):
            aggregate(load_results(log))

    def test_config_id(self, tiny_config):
        assert all(r.config_id == tiny_config.config_id for r in run_experiment(tiny_config))
        same = replace(tiny_config, record_timing=True, pso=replace(tiny_config.pso, workers=4))
        assert same.config_id == tiny_config.config_id
        assert replace(tiny_config, master_seed=12).config_id != tiny_config.config_id
        assert replace(tiny_config, m_values=[2.6]).config_id != tiny_config.config_id

    def test_other_repeats_unchanged(self, tiny_config):
        def cells(cfg):
            return {r.key[2:]: {k: v for k, v in r.to_dict().items() if k != "config_id"}
                    for r in run_experiment(cfg)}

        one = cells(tiny_config)
        two = cells(replace(tiny_config, repeats=2))
        assert len(two) == 2 * len(one)
        for key, record in one.items():
            assert two[key] == record

    def test_worker_error_becomes_failed_cells(self, tiny_config, tmp_path, monkeypatch):
        run_cell = SweepRunner.run_cell

        def broken_second_fold(self, task):
            if task.fold == 1:
                raise RuntimeError("disk full")
            return run_cell(self, task)

        monkeypatch.setattr(SweepRunner, "run_cell", broken_second_fold)
        log = str(tmp_path / "results.ndjson")
        results = run_experiment(tiny_config, log)
        assert len(results) == 4
        failed = [r for r in results if not r.ok]
        assert {(r.fold, r.method) for r in failed} == {(1, "baseline"), (1, "proposed")}
        assert all(r.error == "RuntimeError: disk full" for r in failed)
        assert len(load_results(log)) == 4
        assert aggregate(results).failed_cells == 2

    def test_torn_line_is_skipped(self, tiny_config, tmp_path):
        log = tmp_path / "results.ndjson"
        run_experiment(tiny_config, str(log))
        with open(log, "a", encoding="utf-8") as f:
            f.write('{"dataset_id": "synth')
        assert len(load_results(str(log))) == 4

    def test_config_from_json(self, tiny_config):
        cfg = ExperimentConfig.from_dict(json.loads(json.dumps(tiny_config.to_dict())))
        assert cfg.to_dict() == tiny_config.to_dict()

    @pytest.mark.parametrize("kwargs", [
        {"folds": 1}, {"m_values": [1.0]}, {"c_values": []}, {"pso": PsoConfig(bounds_low=1.0)},
    ])
    def test_invalid_config(self, kwargs):
        with pytest.raises(ParameterError):
            ExperimentConfig(**kwargs)


class TestReport:
    def test_total_weighting(self):
        assert total_error(0.0188, 0.0410, 4, 1) == pytest.approx(0.02324, abs=1e-12)

    def test_best_m_by_mean_train_error(self):
        results = [
            cell(m_index=0, m0=1.1, train=0.03, fold=0), cell(m_index=0, m0=1.1, train=0.05, fold=1),
            cell(m_index=1, m0=1.6, train=0.02, fold=0), cell(m_index=1, m0=1.6, train=0.04, fold=1),
        ]
        row = aggregate(results).row("toy", "baseline", 2)
        assert row.m0 == 1.6
        assert row.train_mean == pytest.approx(0.03)
        assert row.train_std == pytest.approx(0.01)
        assert row.cells == 2

    def test_duplicates_leave_statistics_unchanged(self):
        results = [cell(fold=f, train=0.01 * (f + 1), test=0.02 * (f + 1)) for f in range(3)]
        once = aggregate(results).rows[0]
        twice = aggregate(results + results).rows[0]
        assert twice.train_mean == pytest.approx(once.train_mean)
        assert twice.train_std == pytest.approx(once.train_std)
        assert twice.test_std == pytest.approx(once.test_std)

    def test_grand_mean_and_m_star(self):
        results = [
            cell(method="proposed", c=2, train=0.01, test=0.02, m_star=[2.0, 3.0], fold=0),
            cell(method="proposed", c=2, train=0.01, test=0.02, m_star=[4.0, 5.0], fold=1),
            cell(method="proposed", c=3, train=0.03, test=0.04, m_star=[2.0, 2.0, 2.0]),
        ]
        table = aggregate(results)
        assert table.row("toy", "proposed", 2).m_star == [3.0, 4.0]
        t2 = total_error(0.01, 0.02, 8, 2)
        t3 = total_error(0.03, 0.04, 8, 2)
        assert table.grand_means["toy"]["proposed"] == pytest.approx((t2 + t3) / 2)

    def test_failed_cells_are_excluded_and_counted(self):
        results = [cell(), cell(fold=1, status="failed", train=0.0, test=0.0)]
        table = aggregate(results)
        assert table.failed_cells == 1
        assert table.rows[0].cells == 1
        assert render_report(table, "markdown").rstrip().endswith("Failed cells: 1")

    def test_empty_input(self):
        with pytest.raises(ReportError):
            aggregate([])

    def test_all_failed_gives_header_only(self):
        table = aggregate([cell(status="failed", train=0.0, test=0.0)])
        csv_text = render_report(table, "csv")
        assert csv_text.strip().count("\n") == 0
        assert csv_text.startswith("dataset_id,method,c,m0")

    def test_formats(self, tmp_path):
        table = aggregate([cell(), cell(method="proposed", m_star=[2.0, 2.5])])
        markdown = render_report(table, "markdown")
        assert "| C | Methods | FCM | Proposed method |" in markdown
        assert "0.0100 ± 0.0000" in markdown
        frame = pd.read_csv(emit_report(table, "csv", str(tmp_path / "r.csv")))
        assert list(frame["method"]) == ["baseline", "proposed"]
        data = json.loads(render_report(table, "json"))
        assert data["failed_cells"] == 0
        assert ReportTable.from_dict(data) == table
        with pytest.raises(ReportError):
            render_report(table, "html")


class TestPlotData:
    @pytest.fixture
    def refined(self, two_blobs):
        return train_refined(two_blobs, 2, 2.0, FcmConfig(seed=0), PsoConfig(particles=8, max_iter=10, seed=1))

    def test_pso_history(self, refined, tmp_path):
        path = emit_plot_data(refined, "pso_history", str(tmp_path / "h.tsv"))
        frame = pd.read_csv(path, sep="\t")
        assert list(frame.columns) == ["iteration", "g_best", "reconstruction_error"]
        assert np.all(np.diff(frame["g_best"]) <= 0)
        assert frame["reconstruction_error"].iloc[-1] == pytest.approx(refined.train_error)

    def test_pso_history_without_iterations(self, two_blobs, tmp_path):
        model = train_refined(two_blobs, 2, 2.0, FcmConfig(seed=0), PsoConfig(max_iter=0, seed=1))
        frame = pd.read_csv(emit_plot_data(model, "pso_history", str(tmp_path / "h.tsv")), sep="\t")
        assert len(frame) == 1
        assert frame["reconstruction_error"].iloc[0] == pytest.approx(model.train_error)

    def test_fuzzifier_trace(self, refined):
        frame = plot_frame(refined, "fuzzifier_trace")
        assert list(frame.columns) == ["iteration", "m_1", "m_2"]
        assert frame[["m_1", "m_2"]].iloc[-1].tolist() == refined.fuzzifiers.to_list()

    def test_membership_grid(self, refined, two_blobs):
        frame = plot_frame(refined, "membership_grid", data=two_blobs, grid_size=10)
        assert len(frame) == 100
        assert list(frame.columns) == ["x1", "x2", "mu_1", "mu_2"]
        assert frame["x1"].min() < two_blobs[:, 0].min()

    def test_membership_grid_on_synthetic_set(self):
        X, _ = normalize_zscore(gen_synthetic(SyntheticSpec()))
        model = fit_baseline(X, 9, 2.0, FcmConfig(seed=0))
        frame = plot_frame(model, "membership_grid", data=X, grid_size=50)
        assert frame.shape == (2500, 2 + 9)

    def test_membership_grid_for_fcm_model(self, two_blobs):
        model = fcm_fit(two_blobs, FcmConfig(c=2, seed=0))
        frame = plot_frame(model, "membership_grid", grid_size=5)
        np.testing.assert_allclose(frame[["mu_1", "mu_2"]].sum(axis=1), 1.0, atol=1e-12)

    def test_membership_grid_needs_two_features(self, rng):
        X = rng.normal(size=(30, 3))
        with pytest.raises(DimensionError):
            plot_frame(fit_baseline(X, 2, 2.0, FcmConfig(seed=0)), "membership_grid")

    def test_error_bars(self):
        results = [cell(), cell(method="proposed", m_star=[2.0, 2.0]), cell(c=3)]
        frame = plot_frame(results, "error_bars")
        assert list(frame.columns) == ["method", "c", "train_mean", "train_std", "test_mean", "test_std"]
        assert len(frame) == 3

    def test_unknown_kind(self, refined):
        with pytest.raises(ParameterError):
            plot_frame(refined, "heatmap")
