import json

import numpy as np
import pytest

from ttad.cli import main
from tests.conftest import make_cluster_outliers

FAST_FLAGS = [
    "--epochs", "5", "--folds", "3", "--jobs", "1",
    "--trees", "20", "--siamese-epochs", "1", "--siamese-pairs", "100",
]


@pytest.fixture(scope="module")
def dataset_csv(tmp_path_factory):
    path = tmp_path_factory.mktemp("data") / "blobs.csv"
    ds = make_cluster_outliers(n_normal=120, n_outliers=12, dims=3, seed=1)
    header = ",".join(f"f{i}" for i in range(ds.n_dims)) + ",label"
    rows = [
        ",".join(str(v) for v in row) + f",{label}"
        for row, label in zip(ds.features, ds.labels)
    ]
    path.write_text(header + "\n" + "\n".join(rows) + "\n", encoding="utf-8")
    return path


class TestRun:
    def test_smoke_writes_all_outputs(self, dataset_csv, tmp_path, capsys):
        out = tmp_path / "out"
        code = main([
            "run", "--dataset", str(dataset_csv), "--method", "wo-tta",
            "--seed", "1", "--outdir", str(out), *FAST_FLAGS,
        ])
        assert code == 0
        for name in ("report.csv", "timings.csv", "report.md", "manifest.json"):
            assert (out / name).exists()
        assert "AUC" in capsys.readouterr().out

    def test_kmeans_validation_error(self, dataset_csv, tmp_path, capsys):
        code = main([
            "run", "--dataset", str(dataset_csv), "--method", "ttad-ekm",
            "--k", "5", "--t", "7", "--outdir", str(tmp_path / "o"), *FAST_FLAGS,
        ])
        assert code == 1
        err = capsys.readouterr().err
        assert err.startswith("error:")
        assert len(err.strip().splitlines()) == 1

    def test_missing_dataset(self, tmp_path, capsys):
        code = main([
            "run", "--dataset", "no-such.csv", "--method", "wo-tta",
            "--outdir", str(tmp_path / "o"),
        ])
        assert code == 1
        assert "dataset not found" in capsys.readouterr().err

    def test_data_dir_env_resolution(self, dataset_csv, tmp_path, monkeypatch):
        monkeypatch.setenv("TTAD_DATA_DIR", str(dataset_csv.parent))
        out = tmp_path / "out"
        code = main([
            "run", "--dataset", "blobs", "--method", "wo-tta",
            "--seed", "1", "--outdir", str(out), *FAST_FLAGS,
        ])
        assert code == 0
        manifest = json.loads((out / "manifest.json").read_text())
        assert manifest["dataset"]["path"].endswith("blobs.csv")

    def test_rerun_from_manifest_byte_identical(self, dataset_csv, tmp_path):
        first = tmp_path / "first"
        code = main([
            "run", "--dataset", str(dataset_csv), "--method", "gn-tta",
            "--seed", "7", "--sigma", "0.05", "--outdir", str(first), *FAST_FLAGS,
        ])
        assert code == 0
        second = tmp_path / "second"
        code = main([
            "run", "--from-manifest", str(first / "manifest.json"),
            "--outdir", str(second),
        ])
        assert code == 0
        assert (first / "report.csv").read_bytes() == (second / "report.csv").read_bytes()

    def test_manifest_contents(self, dataset_csv, tmp_path):
        out = tmp_path / "out"
        main([
            "run", "--dataset", str(dataset_csv), "--method", "wo-tta",
            "--seed", "3", "--outdir", str(out), *FAST_FLAGS,
        ])
        manifest = json.loads((out / "manifest.json").read_text())
        assert manifest["config"]["method"] == "wo-tta"
        assert manifest["config"]["seed"] == 3
        assert manifest["config"]["epochs"] == 5
        assert len(manifest["dataset"]["sha256"]) == 64
        assert "report.csv" in manifest["outputs"]

    def test_config_file_and_flag_precedence(self, dataset_csv, tmp_path):
        config = tmp_path / "config.json"
        config.write_text(json.dumps({"seed": 11, "epochs": 4, "folds": 3}))
        out = tmp_path / "out"
        code = main([
            "run", "--dataset", str(dataset_csv), "--method", "wo-tta",
            "--config", str(config), "--seed", "25", "--outdir", str(out),
            "--jobs", "1",
        ])
        assert code == 0
        manifest = json.loads((out / "manifest.json").read_text())
        assert manifest["config"]["seed"] == 25  # flag beats config file
        assert manifest["config"]["epochs"] == 4  # config file beats default

    def test_unknown_config_key(self, dataset_csv, tmp_path, capsys):
        config = tmp_path / "config.json"
        config.write_text(json.dumps({"epochz": 9}))
        code = main([
            "run", "--dataset", str(dataset_csv), "--method", "wo-tta",
            "--config", str(config), "--outdir", str(tmp_path / "o"),
        ])
        assert code == 1
        assert "unknown keys" in capsys.readouterr().err


class TestSweep:
    def test_grid_report(self, dataset_csv, tmp_path):
        out = tmp_path / "sweepout"
        code = main([
            "sweep", "--dataset", str(dataset_csv), "--methods", "ttad-es,ttad-ekm",
            "--k", "4,8", "--t", "3", "--seed", "2", "--outdir", str(out),
            *FAST_FLAGS,
        ])
        assert code == 0
        body = (out / "sweep.csv").read_text().splitlines()
        assert body[0] == "dataset,method,k,t,fold,auc"
        assert len(body) == 1 + 2 * 2 * 1 * 3  # methods x k x t x folds
        table = (out / "sweep.md").read_text()
        assert "| Method | k=4 | k=8 |" in table

    def test_empty_axis_usage_error(self, dataset_csv, tmp_path, capsys):
        code = main([
            "sweep", "--dataset", str(dataset_csv), "--k", "", "--t", "3",
            "--outdir", str(tmp_path / "o"),
        ])
        assert code == 1
        assert "nonempty" in capsys.readouterr().err

    def test_unknown_method(self, dataset_csv, tmp_path, capsys):
        code = main([
            "sweep", "--dataset", str(dataset_csv), "--methods", "ttad-zz",
            "--k", "4", "--t", "3", "--outdir", str(tmp_path / "o"),
        ])
        assert code == 1
        assert "unknown method" in capsys.readouterr().err


class TestReport:
    def _write_report(self, tmp_path, name, dataset, aucs):
        path = tmp_path / name
        lines = ["dataset,method,fold,auc"]
        lines += [f"{dataset},wo-tta,{i},{a}" for i, a in enumerate(aucs)]
        path.write_text("\n".join(lines) + "\n")
        return path

    def test_merges_datasets_into_columns(self, tmp_path, capsys):
        a = self._write_report(tmp_path, "a.csv", "thyroid", [0.9, 1.0])
        b = self._write_report(tmp_path, "b.csv", "cardio", [0.8, 0.8])
        code = main(["report", str(a), str(b)])
        assert code == 0
        out = capsys.readouterr().out
        assert "| Method | cardio | thyroid |" in out
        assert "0.950" in out and "0.800" in out

    def test_output_file(self, tmp_path):
        a = self._write_report(tmp_path, "a.csv", "thyroid", [0.9])
        target = tmp_path / "merged.md"
        code = main(["report", str(a), "--output", str(target)])
        assert code == 0
        assert target.exists()

    def test_malformed_input_names_file(self, tmp_path, capsys):
        bad = tmp_path / "bad.csv"
        bad.write_text("not,a,report\n")
        code = main(["report", str(bad)])
        assert code == 1
        assert "bad.csv" in capsys.readouterr().err
