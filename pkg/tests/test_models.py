"""
Tests for the domain models: datasets, step functions, Cox models, reports.
"""
import math

import numpy as np
import pytest


class TestSurvivalDataset:
    """Dataset invariants are enforced at construction."""

    def test_basic_properties(self):
        from fairsurv.models.dataset import SurvivalDataset
        data = SurvivalDataset(X=[[0.0], [1.0], [2.0]], time=[1.0, 2.0, 3.0], event=[1, 0, 1])
        assert data.n == 3 and data.p == 1
        assert data.n_events == 2
        assert data.censor_rate == pytest.approx(1 / 3)
        assert data.feature_names == ("x0",)

    def test_arrays_read_only(self):
        from fairsurv.models.dataset import SurvivalDataset
        data = SurvivalDataset(X=[[0.0], [1.0]], time=[1.0, 2.0], event=[1, 1])
        with pytest.raises(ValueError):
            data.time[0] = 5.0

    @pytest.mark.parametrize("kwargs", [
        {"X": [[0.0]], "time": [1.0], "event": [1]},
        {"X": [[0.0], [1.0]], "time": [1.0, 2.0], "event": [0, 0]},
        {"X": [[0.0], [1.0]], "time": [1.0, 0.0], "event": [1, 1]},
        {"X": [[0.0], [np.nan]], "time": [1.0, 2.0], "event": [1, 1]},
        {"X": [[0.0], [1.0]], "time": [1.0, 2.0, 3.0], "event": [1, 1]},
    ])
    def test_invalid(self, kwargs):
        from fairsurv.core.errors import DataValidationError
        from fairsurv.models.dataset import SurvivalDataset
        with pytest.raises(DataValidationError):
            SurvivalDataset(**kwargs)

    def test_row_reported(self):
        from fairsurv.core.errors import DataValidationError
        from fairsurv.models.dataset import SurvivalDataset
        with pytest.raises(DataValidationError) as exc:
            SurvivalDataset(X=[[0.0], [1.0], [2.0]], time=[1.0, 2.0, -1.0], event=[1, 1, 1])
        assert exc.value.row == 2

    def test_records_roundtrip(self):
        from fairsurv.models.dataset import SurvivalDataset
        data = SurvivalDataset(X=[[0.5, 1.0], [1.5, 2.0]], time=[1.0, 2.0], event=[0, 1])
        rebuilt = SurvivalDataset.from_records(data.records)
        np.testing.assert_array_equal(rebuilt.X, data.X)
        np.testing.assert_array_equal(rebuilt.event, data.event)

    def test_subset_and_dimension_check(self):
        from fairsurv.core.errors import DimensionMismatchError
        from fairsurv.models.dataset import SurvivalDataset
        data = SurvivalDataset(X=[[0.0], [1.0], [2.0]], time=[1.0, 2.0, 3.0], event=[1, 1, 0])
        sub = data.subset([2, 0])
        np.testing.assert_array_equal(sub.time, [3.0, 1.0])
        with pytest.raises(DimensionMismatchError):
            data.check_dimension(2)

    def test_summary(self):
        from fairsurv.models.dataset import SurvivalDataset, dataset_summary
        data = SurvivalDataset(X=np.zeros((4, 3)), time=[1, 2, 3, 4], event=[1, 0, 0, 1])
        summary = dataset_summary(data, "toy")
        assert summary == {"dataset": "toy", "samples": 4, "censored": 2, "censored_rate": 0.5, "features": 3}


class TestFeatureScaler:
    def test_transform_inverse(self):
        from fairsurv.models.dataset import FeatureScaler
        scaler = FeatureScaler(center=[1.0, -2.0], scale=[2.0, 0.5])
        X = np.array([[3.0, -1.0], [1.0, -2.0]])
        np.testing.assert_allclose(scaler.transform(X), [[1.0, 2.0], [0.0, 0.0]])
        np.testing.assert_allclose(scaler.inverse_transform(scaler.transform(X)), X)

    def test_rejects_zero_scale(self):
        from fairsurv.core.errors import DataValidationError
        from fairsurv.models.dataset import FeatureScaler
        with pytest.raises(DataValidationError):
            FeatureScaler(center=[0.0], scale=[0.0])

    def test_dimension_mismatch(self):
        from fairsurv.core.errors import DimensionMismatchError
        from fairsurv.models.dataset import FeatureScaler
        with pytest.raises(DimensionMismatchError):
            FeatureScaler(center=[0.0], scale=[1.0]).transform(np.zeros((2, 3)))


class TestStepFunction:
    """Right-continuous step functions with an initial value."""

    def test_evaluation(self):
        from fairsurv.models.cox import StepFunction
        f = StepFunction(times=[1.0, 2.0, 4.0], values=[0.1, 0.3, 0.6])
        assert f(0.5) == 0.0
        assert f(1.0) == 0.1
        assert f(3.9) == 0.3
        assert f(100.0) == 0.6
        np.testing.assert_allclose(f([0.5, 2.0, 4.0]), [0.0, 0.3, 0.6])

    def test_left_limit(self):
        from fairsurv.models.cox import StepFunction
        f = StepFunction(times=[1.0, 2.0], values=[0.8, 0.5], initial=1.0)
        assert f.left_limit(1.0) == 1.0
        assert f.left_limit(2.0) == 0.8
        assert f.left_limit(2.5) == 0.5

    def test_empty(self):
        from fairsurv.models.cox import StepFunction
        f = StepFunction(times=[], values=[], initial=1.0)
        assert f(3.0) == 1.0

    def test_unsorted_rejected(self):
        from fairsurv.core.errors import DataValidationError
        from fairsurv.models.cox import StepFunction
        with pytest.raises(DataValidationError):
            StepFunction(times=[2.0, 1.0], values=[0.1, 0.2])


class TestCoxModel:
    def _model(self):
        from fairsurv.models.cox import CoxModel, StepFunction
        from fairsurv.models.dataset import FeatureScaler
        return CoxModel(
            beta=[0.5, -1.0],
            baseline_hazard=StepFunction([1.0, 2.0, 3.0], [0.1, 0.4, 0.9]),
            scaler=FeatureScaler(center=[0.0, 1.0], scale=[1.0, 2.0]),
            feature_names=("a", "b"),
        )

    def test_predict_survival(self):
        model = self._model()
        X = np.array([[0.0, 0.0], [1.0, 1.0]])
        surv = model.predict_survival(X, [0.5, 2.0])
        assert surv.shape == (2, 2)
        np.testing.assert_allclose(surv[:, 0], [1.0, 1.0])
        np.testing.assert_allclose(surv[1, 1], math.exp(-0.4 * math.exp(-0.5)))

    def test_json_roundtrip_preserves_predictions(self):
        from fairsurv.models.cox import CoxModel
        model = self._model()
        loaded = CoxModel.from_json(model.to_json())
        X = np.random.default_rng(0).standard_normal((5, 2))
        np.testing.assert_array_equal(loaded.predict_survival(X, [0.5, 1.5, 5.0]), model.predict_survival(X, [0.5, 1.5, 5.0]))
        assert loaded.feature_names == ("a", "b")
        np.testing.assert_array_equal(loaded.scaler.scale, [1.0, 2.0])

    def test_decreasing_baseline_rejected(self):
        from fairsurv.core.errors import DataValidationError
        from fairsurv.models.cox import CoxModel, StepFunction
        with pytest.raises(DataValidationError):
            CoxModel(beta=[1.0], baseline_hazard=StepFunction([1.0, 2.0], [0.5, 0.2]))

    def test_risk_scores_positive(self):
        from fairsurv.core.errors import DataValidationError
        from fairsurv.models.cox import RiskScores
        with pytest.raises(DataValidationError):
            RiskScores([1.0, 0.0])


class TestSimilarityModels:
    def test_similarity_range(self):
        from fairsurv.core.errors import DataValidationError
        from fairsurv.models.similarity import SimilarityKind, SimilarityMatrix
        with pytest.raises(DataValidationError):
            SimilarityMatrix(np.array([[1.0, 1.5], [1.5, 1.0]]), SimilarityKind.INPUT)
        with pytest.raises(DataValidationError):
            SimilarityMatrix(np.ones((2, 3)), SimilarityKind.INPUT)

    def test_kind_from_string(self):
        from fairsurv.models.similarity import SimilarityKind, SimilarityMatrix
        assert SimilarityMatrix(np.eye(2), "output").kind is SimilarityKind.OUTPUT


class TestReports:
    """Trace and report containers and their CSV renderings."""

    def test_csv_float_format(self):
        from fairsurv.models.report import CSVSheet
        sheet = CSVSheet(name="t", headers=["a", "b", "c"], rows=[[0.1, np.int64(3), True]])
        assert sheet.to_csv_string() == "a,b,c\n0.1,3,1\n"

    def test_trace_sheet(self):
        from fairsurv.models.report import EpochRecord, TrainTrace
        trace = TrainTrace()
        trace.append(EpochRecord(epoch=1, utility=2.0, surrogate=0.5, fndcg=0.7, grad_norm=0.1))
        trace.append(EpochRecord(epoch=2, utility=1.5, surrogate=0.6, fndcg=0.8, grad_norm=0.05))
        assert len(trace) == 2
        np.testing.assert_array_equal(trace.column("utility"), [2.0, 1.5])
        lines = trace.to_csv().splitlines()
        assert lines[0] == "epoch,utility,surrogate,fndcg,grad_norm"
        assert len(lines) == 3

    def test_aggregate_skips_skipped_and_nan(self):
        from fairsurv.models.report import FoldMetrics, aggregate_folds
        folds = [
            FoldMetrics(fold=0, fndcg_at_k=80.0, c_index=60.0, brier=20.0, time_dependent_auc=math.nan),
            FoldMetrics(fold=1, fndcg_at_k=90.0, c_index=70.0, brier=10.0, time_dependent_auc=math.nan),
            FoldMetrics(fold=2, skipped=True),
        ]
        report = aggregate_folds(folds, {"k": 10})
        assert report.fndcg_at_k == pytest.approx(85.0)
        assert report.std["c_index"] == pytest.approx(5.0)
        assert math.isnan(report.time_dependent_auc)
        assert report.failed == ["time_dependent_auc"]
        assert report.to_csv_row()[:3] == pytest.approx([85.0, 65.0, 15.0])

    def test_report_json_roundtrip(self):
        from fairsurv.models.report import EvalReport, FoldMetrics, aggregate_folds
        report = aggregate_folds([FoldMetrics(fold=0, fndcg_at_k=50.0, c_index=50.0, brier=5.0, time_dependent_auc=55.0)], {"k": 4})
        loaded = EvalReport.from_json(report.to_json())
        assert loaded.folds[0].brier == 5.0
        assert loaded.config == {"k": 4}

    def test_report_sheet(self):
        from fairsurv.models.report import FoldMetrics, aggregate_folds
        report = aggregate_folds([FoldMetrics(fold=0, fndcg_at_k=50.0, c_index=50.0, brier=5.0, time_dependent_auc=55.0, n_test=10)], {"k": 4})
        sheet = report.to_sheet()
        assert sheet.headers[1] == "FNDCG@4%"
        assert [row[0] for row in sheet.rows] == [0, "mean", "std"]

    def test_range_check(self):
        from fairsurv.models.report import EvalReport
        with pytest.raises(ValueError):
            EvalReport(fndcg_at_k=101.0, c_index=50.0, brier=1.0, time_dependent_auc=50.0).check_ranges()

    def test_grid_table_ordering(self):
        from fairsurv.models.report import FoldMetrics, GridCell, GridTable
        cells = [
            GridCell(gamma=g, k=k, fold=f, metrics=FoldMetrics(fold=f, fndcg_at_k=g, c_index=50.0, brier=1.0, time_dependent_auc=50.0))
            for g in (2.0, 0.5) for k in (10, 4) for f in (1, 0)
        ]
        table = GridTable.from_cells(cells, "fair")
        assert [(r.gamma, r.k) for r in table.rows] == [(0.5, 4), (0.5, 10), (2.0, 4), (2.0, 10)]
        assert len(table.long_sheet().rows) == 8 * 4
        assert table.summary_sheet().rows[0][:3] == ["fair", 0.5, 4]
        assert table.failed_cells == []
