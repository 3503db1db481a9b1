import numpy as np
import pytest

from ttad.evaluation import (
    METHODS,
    EvalReport,
    read_report_csv,
    resolve_method,
    results_markdown,
    roc_auc,
    run_cv,
    summarize_rows,
    sweep,
    sweep_markdown,
    write_report_csv,
    write_sweep_csv,
    write_timings_csv,
)
from ttad.pipeline import TtadConfig

FAST_PARAMS = dict(
    detector_params={"epochs": 10},
    iforest_params={"n_trees": 30},
    siamese_params={"epochs": 2, "n_pairs": 200},
)


def pairwise_auc_oracle(labels, scores):
    """Exhaustive pairwise count: wins plus half-ties over all pairs."""
    pos = [s for y, s in zip(labels, scores) if y == 1]
    neg = [s for y, s in zip(labels, scores) if y == 0]
    wins = 0.0
    for p in pos:
        for n in neg:
            if p > n:
                wins += 1.0
            elif p == n:
                wins += 0.5
    return wins / (len(pos) * len(neg))


class TestRocAuc:
    def test_perfect_separation(self):
        labels = np.array([0, 0, 0, 1, 1])
        scores = np.array([0.1, 0.2, 0.3, 0.9, 0.8])
        assert roc_auc(labels, scores) == 1.0

    def test_all_ties(self):
        labels = np.array([0, 1, 0, 1])
        scores = np.ones(4)
        assert roc_auc(labels, scores) == 0.5

    def test_worked_example(self):
        labels = np.array([0, 0, 1, 1])
        scores = np.array([0.1, 0.4, 0.35, 0.8])
        assert roc_auc(labels, scores) == 0.75
        assert pairwise_auc_oracle(labels, scores) == 0.75

    def test_matches_pairwise_oracle(self):
        rng = np.random.default_rng(0)
        for _ in range(300):
            n = int(rng.integers(2, 51))
            labels = rng.integers(0, 2, size=n)
            if labels.sum() in (0, n):
                labels[0] = 0
                labels[-1] = 1
            # few distinct values to force ties
            scores = rng.integers(0, 5, size=n).astype(float) / 4
            assert roc_auc(labels, scores) == pairwise_auc_oracle(labels, scores)

    def test_invariant_under_increasing_transform(self):
        rng = np.random.default_rng(1)
        labels = rng.integers(0, 2, size=40)
        labels[:2] = [0, 1]
        scores = rng.normal(size=40)
        base = roc_auc(labels, scores)
        assert roc_auc(labels, np.exp(scores)) == base
        assert roc_auc(labels, 3.0 * scores + 7.0) == base

    def test_negation_complements_when_no_ties(self):
        rng = np.random.default_rng(2)
        labels = rng.integers(0, 2, size=30)
        labels[:2] = [0, 1]
        scores = rng.permutation(30).astype(float)  # all distinct
        assert roc_auc(labels, scores) + roc_auc(labels, -scores) == 1.0

    def test_single_class_rejected(self):
        with pytest.raises(ValueError):
            roc_auc(np.zeros(5, dtype=int), np.arange(5.0))

    def test_length_mismatch(self):
        with pytest.raises(ValueError):
            roc_auc(np.array([0, 1]), np.arange(3.0))


class TestMethodMapping:
    def test_all_tags(self):
        expected = {
            "wo-tta": ("euclidean", "none"),
            "gn-tta": ("euclidean", "gaussian"),
            "ttad-es": ("euclidean", "smote"),
            "ttad-ss": ("learned", "smote"),
            "ttad-ekm": ("euclidean", "kmeans"),
            "ttad-skm": ("learned", "kmeans"),
        }
        assert METHODS == expected

    def test_resolve_overrides_config(self):
        cfg = resolve_method("ttad-skm", TtadConfig())
        assert cfg.metric == "learned"
        assert cfg.producer == "kmeans"

    def test_unknown_tag(self):
        with pytest.raises(ValueError, match="unknown method"):
            resolve_method("ttad-xx", TtadConfig())


class TestRunCv:
    def test_wo_tta_on_synthetic(self, synthetic_dataset):
        report = run_cv(
            synthetic_dataset, "wo-tta", TtadConfig(seed=1),
            detector_params={"epochs": 30},
        )
        assert len(report.fold_aucs) == 10
        assert report.mean > 0.95
        assert all(0.0 <= a <= 1.0 for a in report.fold_aucs)

    def test_deterministic(self, synthetic_dataset):
        a = run_cv(synthetic_dataset, "wo-tta", TtadConfig(seed=3),
                   detector_params={"epochs": 5})
        b = run_cv(synthetic_dataset, "wo-tta", TtadConfig(seed=3),
                   detector_params={"epochs": 5})
        assert a.fold_aucs == b.fold_aucs

    def test_mean_std_recomputable(self, synthetic_dataset):
        report = run_cv(synthetic_dataset, "wo-tta", TtadConfig(seed=5),
                        detector_params={"epochs": 5})
        assert report.mean == pytest.approx(np.mean(report.fold_aucs), abs=1e-12)
        assert report.std == pytest.approx(np.std(report.fold_aucs), abs=1e-12)
        assert len(report.fold_seconds) == 10

    def test_learned_metric_path(self, synthetic_dataset):
        report = run_cv(
            synthetic_dataset, "ttad-skm",
            TtadConfig(seed=2, k=10, n_augments=3), **FAST_PARAMS,
        )
        assert len(report.fold_aucs) == 10
        assert report.config["metric"] == "learned"
        assert report.config["producer"] == "kmeans"

    def test_parallel_folds_match_serial(self, synthetic_dataset):
        serial = run_cv(synthetic_dataset, "gn-tta", TtadConfig(seed=4),
                        detector_params={"epochs": 5})
        parallel = run_cv(synthetic_dataset, "gn-tta", TtadConfig(seed=4),
                          detector_params={"epochs": 5}, n_jobs=4)
        assert serial.fold_aucs == parallel.fold_aucs


class TestSweep:
    def test_grid_counts(self, synthetic_dataset):
        grid = sweep(
            synthetic_dataset, ["ttad-es"], [5, 10], [2, 3],
            TtadConfig(seed=0), detector_params={"epochs": 3},
        )
        assert len(grid.reports) == 4
        assert set(grid.reports) == {
            ("ttad-es", 5, 2), ("ttad-es", 5, 3),
            ("ttad-es", 10, 2), ("ttad-es", 10, 3),
        }

    def test_invalid_cell_rejected_upfront(self, synthetic_dataset):
        with pytest.raises(ValueError, match="n_augments <= k"):
            sweep(synthetic_dataset, ["ttad-ekm"], [4], [7], TtadConfig(seed=0))

    def test_empty_axis_rejected(self, synthetic_dataset):
        with pytest.raises(ValueError, match="nonempty"):
            sweep(synthetic_dataset, ["ttad-es"], [], [7], TtadConfig(seed=0))


def _dummy_report(dataset="ds", method="wo-tta", aucs=(0.9, 0.8), seconds=None):
    return EvalReport.from_folds(
        dataset, method, aucs, {"seed": 0}, seconds or [0.1] * len(aucs)
    )


class TestReportIo:
    def test_round_trip(self, tmp_path):
        path = tmp_path / "report.csv"
        write_report_csv([_dummy_report()], path)
        rows = read_report_csv(path)
        assert rows == [("ds", "wo-tta", 0, 0.9), ("ds", "wo-tta", 1, 0.8)]

    def test_timings_csv(self, tmp_path):
        path = tmp_path / "timings.csv"
        write_timings_csv([_dummy_report(seconds=[1.25, 2.5])], path)
        text = path.read_text()
        assert text.splitlines()[0] == "dataset,method,fold,seconds"
        assert "1.250" in text and "2.500" in text

    def test_bad_header_names_file(self, tmp_path):
        path = tmp_path / "junk.csv"
        path.write_text("a,b\n1,2\n")
        with pytest.raises(ValueError, match="junk.csv"):
            read_report_csv(path)

    def test_malformed_row_names_file(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("dataset,method,fold,auc\nds,wo-tta,0,not-a-number\n")
        with pytest.raises(ValueError, match="bad.csv"):
            read_report_csv(path)

    def test_summary_and_markdown(self, tmp_path):
        reports = [
            _dummy_report("thyroid", "wo-tta", (0.9, 1.0)),
            _dummy_report("thyroid", "ttad-skm", (0.8, 0.9)),
            _dummy_report("cardio", "wo-tta", (0.7, 0.7)),
        ]
        path = tmp_path / "report.csv"
        write_report_csv(reports, path)
        summary = summarize_rows(read_report_csv(path))
        assert summary[("thyroid", "wo-tta")][0] == pytest.approx(0.95)
        table = results_markdown(summary)
        lines = table.splitlines()
        assert lines[0] == "| Method | cardio | thyroid |"
        assert any(line.startswith("| wo-tta |") for line in lines)
        # missing cardio for ttad-skm leaves a blank cell
        skm_line = next(line for line in lines if line.startswith("| ttad-skm |"))
        assert skm_line.split("|")[2].strip() == ""

    def test_sweep_markdown_shape(self, synthetic_dataset, tmp_path):
        grid = sweep(
            synthetic_dataset, ["ttad-es", "ttad-ekm"], [4, 8], [2],
            TtadConfig(seed=0), detector_params={"epochs": 2},
        )
        text = sweep_markdown(grid)
        lines = [l for l in text.splitlines() if l.startswith("|")]
        assert lines[0] == "| Method | k=4 | k=8 |"
        assert len(lines) == 2 + 2  # header, rule, one row per method
        write_sweep_csv(grid, tmp_path / "sweep.csv")
        body = (tmp_path / "sweep.csv").read_text().splitlines()
        assert body[0] == "dataset,method,k,t,fold,auc"
        assert len(body) == 1 + 2 * 2 * 10  # methods x k-values x folds
