"""Command-line entry point: run experiments, sweep hyperparameters, merge
reports.

Flag precedence is flags > config file > defaults. Every run writes a
manifest (resolved config, seed, package version, dataset checksum) next to
its reports; re-running from that manifest reproduces the report CSVs
byte-identically. The default data directory for bare dataset names comes
from the TTAD_DATA_DIR environment variable.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys
from pathlib import Path

from ttad import __version__, evaluation
from ttad.data import load_csv
from ttad.pipeline import TtadConfig

DEFAULTS = {
    "label_column": "label",
    "k": 10,
    "t": 7,
    "seed": 0,
    "folds": 10,
    "contamination": 0.1,
    "sigma": 0.1,
    "smote_form": "signed",
    "metric_fit_on": "train",
    "epochs": 300,
    "batch_size": 32,
    "learning_rate": 1e-3,
    "trees": 200,
    "subsample": 256,
    "siamese_epochs": 10,
    "siamese_batch_size": 64,
    "siamese_learning_rate": 1e-3,
    "siamese_pairs": None,
    "jobs": None,
}

INT_KEYS = {"k", "t", "seed", "folds", "epochs", "batch_size", "trees",
            "subsample", "siamese_epochs", "siamese_batch_size",
            "siamese_pairs", "jobs"}
FLOAT_KEYS = {"contamination", "sigma", "learning_rate", "siamese_learning_rate"}


class CliError(Exception):
    pass


def _add_common_options(parser: argparse.ArgumentParser) -> None:
    # Defaults stay None here so the config-file layer can fill the gaps.
    parser.add_argument("--dataset", help="CSV path, or a name under the data dir")
    parser.add_argument("--label-column", dest="label_column")
    parser.add_argument("--data-dir", dest="data_dir",
                        help="overrides TTAD_DATA_DIR for bare dataset names")
    parser.add_argument("--config", help="JSON file with default option values")
    parser.add_argument("--seed", type=int)
    parser.add_argument("--folds", type=int)
    parser.add_argument("--contamination", type=float)
    parser.add_argument("--sigma", type=float, help="GN-TTA noise level")
    parser.add_argument("--smote-form", dest="smote_form", choices=["signed", "abs"])
    parser.add_argument("--metric-fit-on", dest="metric_fit_on",
                        choices=["train", "pool"])
    parser.add_argument("--epochs", type=int, help="autoencoder epochs")
    parser.add_argument("--batch-size", dest="batch_size", type=int)
    parser.add_argument("--learning-rate", dest="learning_rate", type=float)
    parser.add_argument("--trees", type=int, help="isolation forest size")
    parser.add_argument("--subsample", type=int, help="isolation tree subsample")
    parser.add_argument("--siamese-epochs", dest="siamese_epochs", type=int)
    parser.add_argument("--siamese-batch-size", dest="siamese_batch_size", type=int)
    parser.add_argument("--siamese-learning-rate", dest="siamese_learning_rate",
                        type=float)
    parser.add_argument("--siamese-pairs", dest="siamese_pairs", type=int)
    parser.add_argument("--jobs", type=int,
                        help="parallel fold workers (default: all cores)")
    parser.add_argument("--outdir", default="ttad_out")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ttad",
        description="Test-time augmentation experiments for tabular anomaly detection",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="cross-validated evaluation of one method")
    _add_common_options(run)
    run.add_argument("--method", choices=list(evaluation.METHODS))
    run.add_argument("--k", type=int, help="neighbor count")
    run.add_argument("--t", type=int, help="augmentation count")
    run.add_argument("--from-manifest", dest="from_manifest",
                     help="re-run the configuration stored in a manifest")

    swp = sub.add_parser("sweep", help="grid of methods x k x T")
    _add_common_options(swp)
    swp.add_argument("--methods", default="all-ttad",
                     help="comma-separated tags, or all-ttad / all")
    swp.add_argument("--k", help="comma-separated neighbor counts")
    swp.add_argument("--t", help="comma-separated augmentation counts")

    rep = sub.add_parser("report", help="merge report CSVs into one table")
    rep.add_argument("paths", nargs="+", help="report.csv files to merge")
    rep.add_argument("--output", help="write the table here instead of stdout")
    return parser


def _load_config_file(path) -> dict:
    try:
        with open(path, encoding="utf-8") as fh:
            values = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise CliError(f"cannot read config file {path}: {exc}") from None
    if not isinstance(values, dict):
        raise CliError(f"config file {path} must hold a JSON object")
    unknown = set(values) - set(DEFAULTS) - {"dataset", "method", "methods"}
    if unknown:
        raise CliError(f"config file {path}: unknown keys {sorted(unknown)}")
    return values


def resolve_options(args: argparse.Namespace, extra_keys=(), list_keys=()) -> dict:
    """Layer defaults, then the config file, then explicit flags.

    list_keys hold comma-separated axes and skip scalar coercion.
    """
    resolved = dict(DEFAULTS)
    if getattr(args, "config", None):
        resolved.update(_load_config_file(args.config))
    for key in list(DEFAULTS) + list(extra_keys):
        flag = getattr(args, key, None)
        if flag is not None:
            resolved[key] = flag
        resolved.setdefault(key, None)
    for key in INT_KEYS - set(list_keys):
        if resolved.get(key) is not None:
            resolved[key] = int(resolved[key])
    for key in FLOAT_KEYS:
        if resolved.get(key) is not None:
            resolved[key] = float(resolved[key])
    return resolved


def resolve_dataset_path(name: str | None, data_dir: str | None) -> Path:
    if not name:
        raise CliError("--dataset is required")
    path = Path(name)
    if path.exists():
        return path
    base = data_dir or os.environ.get("TTAD_DATA_DIR")
    if base:
        for candidate in (Path(base) / name, Path(base) / f"{name}.csv"):
            if candidate.exists():
                return candidate
    raise CliError(f"dataset not found: {name}")


def _sha256(path: Path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            digest.update(chunk)
    return digest.hexdigest()


def _split_params(options: dict):
    config = TtadConfig(
        k=options["k"],
        n_augments=options["t"],
        contamination=options["contamination"],
        seed=options["seed"],
        sigma=options["sigma"],
        smote_form=options["smote_form"],
        metric_fit_on=options["metric_fit_on"],
    )
    detector_params = {
        "epochs": options["epochs"],
        "batch_size": options["batch_size"],
        "learning_rate": options["learning_rate"],
    }
    iforest_params = {
        "n_trees": options["trees"],
        "subsample_size": options["subsample"],
    }
    siamese_params = {
        "epochs": options["siamese_epochs"],
        "batch_size": options["siamese_batch_size"],
        "learning_rate": options["siamese_learning_rate"],
        "n_pairs": options["siamese_pairs"],
    }
    return config, detector_params, iforest_params, siamese_params


def _jobs(options: dict) -> int:
    if options.get("jobs"):
        return max(1, options["jobs"])
    return max(1, os.cpu_count() or 1)


def _write_manifest(outdir: Path, argv, options, dataset_path, outputs) -> Path:
    manifest = {
        "command": ["ttad", *argv],
        "version": __version__,
        "config": {k: options.get(k) for k in sorted(options)},
        "seed": options["seed"],
        "dataset": {
            "path": str(dataset_path),
            "sha256": _sha256(dataset_path),
        },
        "outputs": sorted(str(p.name) for p in outputs),
    }
    path = outdir / "manifest.json"
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return path


def cmd_run(args: argparse.Namespace, argv) -> int:
    if getattr(args, "from_manifest", None):
        with open(args.from_manifest, encoding="utf-8") as fh:
            manifest = json.load(fh)
        stored = {k: v for k, v in manifest["config"].items() if v is not None}
        options = dict(DEFAULTS)
        options.update(stored)
        dataset_path = Path(manifest["dataset"]["path"])
    else:
        options = resolve_options(args, extra_keys=("method",))
        options["dataset"] = args.dataset or options.get("dataset")
        dataset_path = resolve_dataset_path(options["dataset"], args.data_dir)
    if not options.get("method"):
        raise CliError("--method is required")
    options["dataset"] = str(dataset_path)

    dataset = load_csv(dataset_path, options["label_column"])
    config, detector_params, iforest_params, siamese_params = _split_params(options)
    report = evaluation.run_cv(
        dataset, options["method"], config, options["folds"],
        detector_params, iforest_params, siamese_params, n_jobs=_jobs(options),
    )

    outdir = Path(args.outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    created = []
    try:
        report_csv = outdir / "report.csv"
        evaluation.write_report_csv([report], report_csv)
        created.append(report_csv)
        timings_csv = outdir / "timings.csv"
        evaluation.write_timings_csv([report], timings_csv)
        created.append(timings_csv)
        report_md = outdir / "report.md"
        summary = evaluation.summarize_rows(evaluation.read_report_csv(report_csv))
        report_md.write_text(evaluation.results_markdown(summary), encoding="utf-8")
        created.append(report_md)
        created.append(_write_manifest(outdir, argv, options, dataset_path, created))
    except BaseException:
        for path in created:
            path.unlink(missing_ok=True)
        raise
    print(f"wrote {', '.join(str(p) for p in created)}")
    print(f"{dataset.name} {options['method']}: "
          f"AUC {report.mean:.3f}±{report.std:.3f}")
    return 0


def _parse_axis(text, name) -> list[int]:
    if not text:
        raise CliError(f"--{name} axis must be nonempty")
    try:
        values = [int(v) for v in str(text).split(",") if v.strip() != ""]
    except ValueError:
        raise CliError(f"--{name} expects comma-separated integers") from None
    if not values:
        raise CliError(f"--{name} axis must be nonempty")
    return values


def _parse_methods(text) -> list[str]:
    if text == "all-ttad":
        return list(evaluation.TTAD_METHODS)
    if text == "all":
        return list(evaluation.METHODS)
    methods = [m for m in str(text).split(",") if m.strip() != ""]
    if not methods:
        raise CliError("--methods must be nonempty")
    for m in methods:
        if m not in evaluation.METHODS:
            raise CliError(f"unknown method {m!r}")
    return methods


def cmd_sweep(args: argparse.Namespace, argv) -> int:
    options = resolve_options(args, extra_keys=("methods",), list_keys=("k", "t"))
    options["dataset"] = args.dataset or options.get("dataset")
    dataset_path = resolve_dataset_path(options["dataset"], args.data_dir)
    options["dataset"] = str(dataset_path)
    k_values = _parse_axis(args.k if args.k is not None else options["k"], "k")
    t_values = _parse_axis(args.t if args.t is not None else options["t"], "t")
    methods = _parse_methods(options.get("methods") or "all-ttad")
    options["methods"] = ",".join(methods)
    options["k"] = ",".join(str(v) for v in k_values)
    options["t"] = ",".join(str(v) for v in t_values)

    dataset = load_csv(dataset_path, options["label_column"])
    base, detector_params, iforest_params, siamese_params = _split_params(options)
    grid = evaluation.sweep(
        dataset, methods, k_values, t_values, base, options["folds"],
        n_jobs=_jobs(options), detector_params=detector_params,
        iforest_params=iforest_params, siamese_params=siamese_params,
    )

    outdir = Path(args.outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    created = []
    try:
        sweep_csv = outdir / "sweep.csv"
        evaluation.write_sweep_csv(grid, sweep_csv)
        created.append(sweep_csv)
        timings_csv = outdir / "timings.csv"
        evaluation.write_timings_csv(list(grid.reports.values()), timings_csv)
        created.append(timings_csv)
        sweep_md = outdir / "sweep.md"
        sweep_md.write_text(evaluation.sweep_markdown(grid), encoding="utf-8")
        created.append(sweep_md)
        created.append(_write_manifest(outdir, argv, options, dataset_path, created))
    except BaseException:
        for path in created:
            path.unlink(missing_ok=True)
        raise
    print(f"wrote {', '.join(str(p) for p in created)}")
    return 0


def cmd_report(args: argparse.Namespace) -> int:
    rows = []
    for path in args.paths:
        rows.extend(evaluation.read_report_csv(path))
    table = evaluation.results_markdown(evaluation.summarize_rows(rows))
    if args.output:
        Path(args.output).write_text(table, encoding="utf-8")
        print(f"wrote {args.output}")
    else:
        print(table, end="")
    return 0


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "run":
            return cmd_run(args, argv)
        if args.command == "sweep":
            return cmd_sweep(args, argv)
        return cmd_report(args)
    except (CliError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
