import csv

import numpy as np
import pytest

from sensikit.exceptions import DegenerateDataError, UsageError
from sensikit.experiments import (ConvergenceReport, ExperimentConfig, MseReport,
                                  emit_csv, emit_svg, run_convergence,
                                  run_dimension, run_mse, run_variance_compare)
from sensikit.models import ModelSpec, register_model


class TestConfig:
    def test_unknown_study(self):
        with pytest.raises(UsageError):
            ExperimentConfig(study="bogus")

    def test_sizes_must_increase(self):
        with pytest.raises(UsageError):
            ExperimentConfig(study="convergence", sizes=(100, 100))

    def test_replications_positive(self):
        with pytest.raises(UsageError):
            ExperimentConfig(study="mse", replications=0)


def small_convergence_config(seed=0, reps=2):
    return ExperimentConfig(study="convergence", model="gfunction",
                            model_params={"a": (1.0, 2.0)},
                            sizes=(50, 100), replications=reps, seed=seed)


class TestConvergence:
    def test_shape(self):
        rep = run_convergence(small_convergence_config())
        # 2 sizes x 2 methods x 2 indices
        assert len(rep.rows) == 8
        methods = {row[0] for row in rep.rows}
        assert methods == {"rank", "pf"}

    def test_rank_runs_at_budget_parity(self):
        rep = run_convergence(small_convergence_config())
        rank_sizes = {row[2] for row in rep.rows if row[0] == "rank"}
        pf_sizes = {row[2] for row in rep.rows if row[0] == "pf"}
        assert rank_sizes == {150, 300} and pf_sizes == {50, 100}

    def test_deterministic(self):
        r1 = run_convergence(small_convergence_config(seed=3))
        r2 = run_convergence(small_convergence_config(seed=3))
        assert r1.rows == r2.rows

    def test_errors_shrink_at_scale(self):
        cfg = ExperimentConfig(study="convergence", model="gfunction",
                               model_params={"a": (1.0, 2.0)},
                               sizes=(50, 2000), replications=3, seed=1)
        rep = run_convergence(cfg)
        err_small = max(r[5] for r in rep.rows if r[0] == "rank" and r[2] == 150)
        err_large = max(r[5] for r in rep.rows if r[0] == "rank" and r[2] == 6000)
        assert err_large < err_small

    def test_missing_exact_reference_rejected(self):
        register_model("__no_exact", lambda: ModelSpec(
            p=2, func=lambda x: x[0], batch=lambda X: X[:, 0]))
        cfg = ExperimentConfig(study="convergence", model="__no_exact",
                               sizes=(50,), replications=1, seed=0)
        with pytest.raises(UsageError):
            run_convergence(cfg)


class TestMse:
    def test_row_count_and_stats(self):
        cfg = ExperimentConfig(study="mse", model="gfunction",
                               model_params={"a": (1.0, 2.0)},
                               budget=90, replications=100, seed=0)
        rep = run_mse(cfg)
        assert len(rep.rows) == 4  # 2 indices x 2 methods
        for (_m, _i, mean, med, sd) in rep.rows:
            assert mean >= 0.0 and med >= 0.0 and sd >= 0.0

    def test_replications_floor(self):
        cfg = ExperimentConfig(study="mse", model="gfunction",
                               model_params={"a": (1.0, 2.0)},
                               budget=90, replications=10, seed=0)
        with pytest.raises(UsageError):
            run_mse(cfg)

    def test_budget_too_small(self):
        cfg = ExperimentConfig(study="mse", model="gfunction",
                               model_params={"a": (1.0, 2.0)},
                               budget=5, replications=100, seed=0)
        with pytest.raises(UsageError):
            run_mse(cfg)

    def test_constant_model_rejected(self):
        register_model("__const", lambda: ModelSpec(
            p=2, func=lambda x: 1.0, batch=lambda X: np.ones(len(X)),
            exact_sobol=np.zeros(2)))
        cfg = ExperimentConfig(study="mse", model="__const",
                               budget=90, replications=100, seed=0)
        with pytest.raises(DegenerateDataError):
            run_mse(cfg)


class TestDimension:
    def test_small_dimensions_skipped_with_warning(self, capsys):
        cfg = ExperimentConfig(study="dimension", model="gfunction",
                               budget=20, replications=100, seed=0,
                               p_grid=(6, 12))
        reports = run_dimension(cfg)
        err = capsys.readouterr().err
        assert len(reports) == 1
        assert "skipping p=12" in err

    def test_high_dimension_still_computable(self):
        cfg = ExperimentConfig(study="dimension", model="gfunction",
                               budget=200, replications=100, seed=0,
                               p_grid=(50,))
        reports = run_dimension(cfg)
        assert len(reports) == 1
        assert len([r for r in reports[0].rows if r[0] == "pf"]) == 50

    def test_pf_error_degrades_with_dimension(self):
        # fixed budget, growing dimension: the paired design's per-index
        # sample shrinks, so its error should grow on most grid steps
        cfg = ExperimentConfig(study="dimension", model="gfunction", budget=200,
                               replications=100, seed=3,
                               p_grid=(6, 10, 15, 20, 30, 40, 50))
        reports = run_dimension(cfg)
        s1 = [next(m for (meth, i, m, _md, _sd) in r.rows
                   if meth == "pf" and i == 1) for r in reports]
        increases = sum(b > a for a, b in zip(s1, s1[1:]))
        assert increases >= 5


class TestVarianceCompare:
    def test_orderings_and_grid(self):
        cfg = ExperimentConfig(study="variance_compare", model="linear", seed=0,
                               alpha_grid=np.arange(0.1, 4.01, 0.1), p_grid=range(2, 8))
        table = run_variance_compare(cfg)
        assert len(table.rows) == 40 * 6 * 2
        for (_a, _p, _i, pf, rk, ef) in table.rows:
            assert rk <= pf
            assert ef <= rk

    def test_difference_columns_exact(self):
        from sensikit.asymptotics import linear_moments, v_pf, v_rank

        cfg = ExperimentConfig(study="variance_compare", model="linear", seed=0,
                               alpha_grid=(0.5, 1.0, 2.0), p_grid=(2, 3))
        table = run_variance_compare(cfg)
        for (a, p, i, pf, rk, ef) in table.rows:
            assert pf - rk == pytest.approx(v_pf(a, p)[i - 1] - v_rank(a, p)[i - 1],
                                            abs=1e-12)
            m = linear_moments(a, p)
            v = m.vp if i == 1 else m.vpa
            assert rk - ef == pytest.approx(v**2, rel=1e-10)

    def test_linear_only(self):
        cfg = ExperimentConfig(study="variance_compare", model="gfunction", seed=0)
        with pytest.raises(UsageError):
            run_variance_compare(cfg)


class TestEmitCsv:
    def test_round_trip_convergence(self, tmp_path):
        rep = run_convergence(small_convergence_config())
        path = emit_csv(rep, tmp_path / "conv.csv")
        with open(path, newline="", encoding="utf-8") as fh:
            rows = list(csv.DictReader(fh))
        assert len(rows) == len(rep.rows)
        for row, (m, i, n, est, exact, err) in zip(rows, rep.rows):
            assert row["method"] == m and int(row["index"]) == i
            assert float(row["estimate"]) == est  # lossless 17-digit format
            assert float(row["abs_error"]) == err

    def test_empty_report_header_only(self, tmp_path):
        rep = MseReport(model="gfunction", seed=0, budget=70, replications=100, rows=[])
        path = emit_csv(rep, tmp_path / "empty.csv")
        text = path.read_text(encoding="utf-8")
        assert text == ("study,model,method,index,budget,replications,"
                        "mse_mean,mse_median,mse_stdev,seed\n")

    def test_lf_line_endings(self, tmp_path):
        rep = run_convergence(small_convergence_config())
        data = emit_csv(rep, tmp_path / "c.csv").read_bytes()
        assert b"\r" not in data

    def test_variance_table_schema(self, tmp_path):
        cfg = ExperimentConfig(study="variance_compare", model="linear", seed=7,
                               alpha_grid=(1.0,), p_grid=(2,))
        path = emit_csv(run_variance_compare(cfg), tmp_path / "v.csv")
        header = path.read_text(encoding="utf-8").splitlines()[0]
        assert header == "alpha,p,index,v_pf,v_rank,v_eff,seed"


class TestEmitSvg:
    def test_single_series_single_polyline(self, tmp_path):
        rep = ConvergenceReport(model="gfunction", seed=0,
                                rows=[("rank", 1, 100, 0.49, 0.5, 0.01),
                                      ("rank", 1, 200, 0.51, 0.5, 0.01)])
        text = emit_svg(rep, tmp_path / "one.svg").read_text(encoding="utf-8")
        assert text.count("<polyline") == 1
        assert text.startswith('<?xml version="1.0"')
        assert 'width="720"' in text

    def test_log_scale_changes_positions_not_values(self, tmp_path):
        rep = ConvergenceReport(model="gfunction", seed=0,
                                rows=[("rank", 1, 10, 0.4, 0.5, 0.1),
                                      ("rank", 1, 100, 0.45, 0.5, 0.05),
                                      ("rank", 1, 1000, 0.49, 0.5, 0.01)])
        lin = emit_svg(rep, tmp_path / "lin.svg").read_bytes()
        log = emit_svg(rep, tmp_path / "log.svg", log_x=True).read_bytes()
        assert lin != log
        assert rep.rows[0][3] == 0.4  # report untouched

    def test_deterministic_bytes(self, tmp_path):
        rep = run_convergence(small_convergence_config(seed=5))
        b1 = emit_svg(rep, tmp_path / "a.svg").read_bytes()
        b2 = emit_svg(rep, tmp_path / "b.svg").read_bytes()
        assert b1 == b2

    def test_empty_report_rejected(self, tmp_path):
        rep = ConvergenceReport(model="gfunction", seed=0, rows=[])
        with pytest.raises(ValueError):
            emit_svg(rep, tmp_path / "e.svg")

    def test_mse_report_boxplot(self, tmp_path):
        cfg = ExperimentConfig(study="mse", model="gfunction",
                               model_params={"a": (1.0, 2.0)},
                               budget=90, replications=100, seed=0)
        rep = run_mse(cfg)
        text = emit_svg(rep, tmp_path / "box.svg").read_text(encoding="utf-8")
        assert text.count("<rect") >= 5  # one box per method-index plus frame


class TestBudgetAccounting:
    def test_mse_study_total_model_calls(self):
        from sensikit.models import CountingModel, make_gfunction

        counted = CountingModel(make_gfunction((1.0, 2.0)))
        register_model("__counted_mse", lambda: counted)
        budget, reps, p = 90, 100, 2
        cfg = ExperimentConfig(study="mse", model="__counted_mse",
                               budget=budget, replications=reps, seed=0)
        run_mse(cfg)
        n_pf = budget // (p + 1)
        assert counted.count == reps * (budget + (p + 1) * n_pf)

    def test_convergence_study_total_model_calls(self):
        from sensikit.models import CountingModel, make_gfunction

        counted = CountingModel(make_gfunction((1.0, 2.0)))
        register_model("__counted_conv", lambda: counted)
        cfg = ExperimentConfig(study="convergence", model="__counted_conv",
                               sizes=(50,), replications=2, seed=0)
        run_convergence(cfg)
        p = 2
        per_rep = (p + 1) * 50 + (p + 1) * 50  # rank sample + pick-freeze panel
        assert counted.count == 2 * per_rep


class TestThreading:
    def test_thread_count_does_not_change_results(self, monkeypatch):
        cfg = small_convergence_config(seed=9, reps=4)
        monkeypatch.setenv("SENSIKIT_THREADS", "1")
        serial = run_convergence(cfg)
        monkeypatch.setenv("SENSIKIT_THREADS", "4")
        threaded = run_convergence(cfg)
        assert serial.rows == threaded.rows
