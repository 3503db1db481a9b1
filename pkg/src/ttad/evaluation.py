"""AUC scoring, the cross-validated experiment runner, and sensitivity sweeps.

AUC is computed as the tie-aware Mann-Whitney statistic (the probability a
random anomaly outscores a random normal, ties counted half), which is
exact rather than a curve integration.

run_cv executes the full per-fold protocol: scale on the training rows,
train the detector on the training normals, optionally learn the Siamese
metric from isolation-forest pseudo-labels, build the pooled neighbor
index, score the test fold with augmentations, and report per-fold AUCs.
"""

from __future__ import annotations

import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace

import numpy as np
from scipy.stats import rankdata

from ttad.data import Dataset, UnitIntervalScaler, stratified_folds
from ttad.detector import AutoencoderDetector
from ttad.isolation_forest import IsolationForest
from ttad.neighbors import NeighborIndex
from ttad.pipeline import TtadConfig, ttad_predict
from ttad.siamese import SiameseMetric

# Method tags, one per results-table row: metric and producer they resolve to.
METHODS = {
    "wo-tta": ("euclidean", "none"),
    "gn-tta": ("euclidean", "gaussian"),
    "ttad-es": ("euclidean", "smote"),
    "ttad-ss": ("learned", "smote"),
    "ttad-ekm": ("euclidean", "kmeans"),
    "ttad-skm": ("learned", "kmeans"),
}
METHOD_ORDER = tuple(METHODS)
TTAD_METHODS = ("ttad-es", "ttad-ss", "ttad-ekm", "ttad-skm")


def roc_auc(labels, scores) -> float:
    """Area under the ROC curve via the rank-sum form of Mann-Whitney U."""
    labels = np.asarray(labels)
    scores = np.asarray(scores, dtype=np.float64)
    if labels.shape != scores.shape or labels.ndim != 1:
        raise ValueError("labels and scores must be equal-length vectors")
    if not np.isin(labels, (0, 1)).all():
        raise ValueError("labels must be 0 or 1")
    pos = labels == 1
    n1 = int(pos.sum())
    n0 = labels.size - n1
    if n1 == 0 or n0 == 0:
        raise ValueError("both classes must be present")
    ranks = rankdata(scores)
    u = ranks[pos].sum() - n1 * (n1 + 1) / 2
    return float(u / (n1 * n0))


@dataclass(frozen=True)
class EvalReport:
    dataset: str
    method: str
    fold_aucs: tuple[float, ...]
    mean: float
    std: float  # population standard deviation over folds
    config: dict
    fold_seconds: tuple[float, ...]

    @classmethod
    def from_folds(cls, dataset, method, fold_aucs, config, fold_seconds):
        aucs = tuple(float(a) for a in fold_aucs)
        return cls(
            dataset=dataset,
            method=method,
            fold_aucs=aucs,
            mean=float(np.mean(aucs)),
            std=float(np.std(aucs)),
            config=dict(config),
            fold_seconds=tuple(float(s) for s in fold_seconds),
        )


def derive_seed(seed: int, *path: int) -> int:
    """Stable sub-seed for one component of one fold."""
    return int(np.random.SeedSequence([seed, *path]).generate_state(1)[0])


def resolve_method(method: str, config: TtadConfig) -> TtadConfig:
    if method not in METHODS:
        raise ValueError(f"unknown method {method!r}; expected one of {list(METHODS)}")
    metric, producer = METHODS[method]
    return replace(config, metric=metric, producer=producer)


def _run_fold(payload) -> tuple[int, float, float]:
    (features, labels, fold_index, train_idx, test_idx, config,
     detector_params, iforest_params, siamese_params) = payload
    started = time.perf_counter()

    scaler = UnitIntervalScaler().fit(features[train_idx])
    x_train = scaler.transform(features[train_idx])
    x_test = scaler.transform(features[test_idx])
    y_train = labels[train_idx]
    y_test = labels[test_idx]

    detector = AutoencoderDetector(
        seed=derive_seed(config.seed, fold_index, 0), **detector_params
    ).fit(x_train[y_train == 0])

    pool = np.vstack([x_train, x_test])
    test_ids = x_train.shape[0] + np.arange(x_test.shape[0])

    index = None
    if config.producer in ("kmeans", "smote"):
        if config.metric == "learned":
            fit_rows = pool if config.metric_fit_on == "pool" else x_train
            forest = IsolationForest(
                seed=derive_seed(config.seed, fold_index, 1), **iforest_params
            ).fit(fit_rows)
            pseudo = forest.pseudo_label(fit_rows, config.contamination)
            metric_model = SiameseMetric(
                seed=derive_seed(config.seed, fold_index, 2), **siamese_params
            ).fit(fit_rows, pseudo)
            index = NeighborIndex("learned", metric_model).fit(pool)
        else:
            index = NeighborIndex("euclidean").fit(pool)

    fold_config = replace(config, seed=derive_seed(config.seed, fold_index, 3))
    scored = ttad_predict(fold_config, detector, index, x_test, test_ids)
    auc = roc_auc(y_test, np.array([s.aggregated for s in scored]))
    return fold_index, auc, time.perf_counter() - started


def run_cv(
    dataset: Dataset,
    method: str,
    config: TtadConfig | None = None,
    n_folds: int = 10,
    detector_params: dict | None = None,
    iforest_params: dict | None = None,
    siamese_params: dict | None = None,
    n_jobs: int = 1,
) -> EvalReport:
    """Cross-validated AUC for one method on one dataset.

    Deterministic for a fixed config seed regardless of n_jobs; folds are
    independent, each with derived sub-seeds per trained component.
    """
    config = resolve_method(method, config or TtadConfig()).validate()
    folds = stratified_folds(dataset.labels, n_folds, config.seed)
    payloads = [
        (
            dataset.features, dataset.labels, fold.fold_index,
            fold.train_indices, fold.test_indices, config,
            dict(detector_params or {}), dict(iforest_params or {}),
            dict(siamese_params or {}),
        )
        for fold in folds
    ]
    if n_jobs > 1:
        with ProcessPoolExecutor(max_workers=n_jobs) as pool:
            results = list(pool.map(_run_fold, payloads))
    else:
        results = [_run_fold(p) for p in payloads]
    results.sort(key=lambda r: r[0])

    record = dict(config.to_dict(), method=method, n_folds=n_folds,
                  detector_params=detector_params or {},
                  iforest_params=iforest_params or {},
                  siamese_params=siamese_params or {})
    return EvalReport.from_folds(
        dataset.name, method,
        [auc for _, auc, _ in results],
        record,
        [seconds for _, _, seconds in results],
    )


@dataclass(frozen=True)
class SweepGrid:
    methods: tuple[str, ...]
    k_values: tuple[int, ...]
    t_values: tuple[int, ...]
    reports: dict  # (method, k, t) -> EvalReport


def sweep(
    dataset: Dataset,
    methods,
    k_values,
    t_values,
    config: TtadConfig | None = None,
    n_folds: int = 10,
    n_jobs: int = 1,
    **estimator_params,
) -> SweepGrid:
    """One run_cv per (method, k, T) cell; invalid cells are rejected upfront."""
    methods = tuple(methods)
    k_values = tuple(int(k) for k in k_values)
    t_values = tuple(int(t) for t in t_values)
    if not methods or not k_values or not t_values:
        raise ValueError("methods, k_values and t_values must be nonempty")
    base = config or TtadConfig()
    for method in methods:
        for k in k_values:
            for t in t_values:
                resolve_method(
                    method, replace(base, k=k, n_augments=t)
                ).validate()
    reports = {}
    for method in methods:
        for k in k_values:
            for t in t_values:
                cell = replace(base, k=k, n_augments=t)
                reports[(method, k, t)] = run_cv(
                    dataset, method, cell, n_folds, n_jobs=n_jobs,
                    **estimator_params,
                )
    return SweepGrid(methods, k_values, t_values, reports)


# ---------------------------------------------------------------------------
# Report emission: per-fold CSV, timing sidecar, and results-table markdown.

REPORT_HEADER = "dataset,method,fold,auc"
TIMINGS_HEADER = "dataset,method,fold,seconds"


def write_report_csv(reports, path) -> None:
    """Per-fold AUC rows. Fully deterministic given data and config."""
    lines = [REPORT_HEADER]
    for report in reports:
        for fold, auc in enumerate(report.fold_aucs):
            lines.append(f"{report.dataset},{report.method},{fold},{auc!r}")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")


def write_timings_csv(reports, path) -> None:
    """Wall-clock sidecar; kept out of the report CSV so reruns are
    byte-identical."""
    lines = [TIMINGS_HEADER]
    for report in reports:
        for fold, seconds in enumerate(report.fold_seconds):
            lines.append(f"{report.dataset},{report.method},{fold},{seconds:.3f}")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")


def read_report_csv(path):
    """Rows of a report CSV as (dataset, method, fold, auc) tuples."""
    with open(path, encoding="utf-8") as fh:
        lines = [line.strip() for line in fh if line.strip()]
    if not lines or lines[0] != REPORT_HEADER:
        raise ValueError(f"{path}: expected header {REPORT_HEADER!r}")
    rows = []
    for line in lines[1:]:
        parts = line.split(",")
        if len(parts) != 4:
            raise ValueError(f"{path}: malformed row {line!r}")
        try:
            rows.append((parts[0], parts[1], int(parts[2]), float(parts[3])))
        except ValueError:
            raise ValueError(f"{path}: malformed row {line!r}") from None
    return rows


def summarize_rows(rows) -> dict:
    """(dataset, method) -> (mean, std) over that pair's fold AUCs."""
    groups: dict = {}
    for dataset, method, _, auc in rows:
        groups.setdefault((dataset, method), []).append(auc)
    return {
        key: (float(np.mean(aucs)), float(np.std(aucs)))
        for key, aucs in groups.items()
    }


def _method_sort_key(method: str):
    return (METHOD_ORDER.index(method), "") if method in METHOD_ORDER else (
        len(METHOD_ORDER), method)


def results_markdown(summary: dict) -> str:
    """Markdown table: one row per method, one column per dataset,
    cells mean±std. Missing combinations stay blank."""
    datasets = sorted({dataset for dataset, _ in summary})
    methods = sorted({method for _, method in summary}, key=_method_sort_key)
    lines = ["| Method | " + " | ".join(datasets) + " |",
             "|---" * (len(datasets) + 1) + "|"]
    for method in methods:
        cells = []
        for dataset in datasets:
            if (dataset, method) in summary:
                mean, std = summary[(dataset, method)]
                cells.append(f"{mean:.3f}±{std:.3f}")
            else:
                cells.append("")
        lines.append(f"| {method} | " + " | ".join(cells) + " |")
    return "\n".join(lines) + "\n"


def sweep_markdown(grid: SweepGrid) -> str:
    """Sensitivity tables: methods as rows; the varying axis as columns."""
    blocks = []
    if len(grid.t_values) == 1 or len(grid.k_values) > 1:
        for t in grid.t_values:
            header = "| Method | " + " | ".join(f"k={k}" for k in grid.k_values) + " |"
            rule = "|---" * (len(grid.k_values) + 1) + "|"
            rows = []
            for method in grid.methods:
                cells = [
                    f"{grid.reports[(method, k, t)].mean:.3f}"
                    f"±{grid.reports[(method, k, t)].std:.3f}"
                    for k in grid.k_values
                ]
                rows.append(f"| {method} | " + " | ".join(cells) + " |")
            blocks.append(f"### T={t}\n" + "\n".join([header, rule] + rows))
    else:
        for k in grid.k_values:
            header = "| Method | " + " | ".join(f"T={t}" for t in grid.t_values) + " |"
            rule = "|---" * (len(grid.t_values) + 1) + "|"
            rows = []
            for method in grid.methods:
                cells = [
                    f"{grid.reports[(method, k, t)].mean:.3f}"
                    f"±{grid.reports[(method, k, t)].std:.3f}"
                    for t in grid.t_values
                ]
                rows.append(f"| {method} | " + " | ".join(cells) + " |")
            blocks.append(f"### k={k}\n" + "\n".join([header, rule] + rows))
    return "\n\n".join(blocks) + "\n"


def write_sweep_csv(grid: SweepGrid, path) -> None:
    lines = ["dataset,method,k,t,fold,auc"]
    for (method, k, t), report in sorted(grid.reports.items()):
        for fold, auc in enumerate(report.fold_aucs):
            lines.append(f"{report.dataset},{method},{k},{t},{fold},{auc!r}")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")
