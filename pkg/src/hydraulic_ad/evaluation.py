"""Split protocol, confusion counts, metrics and the cross-model comparison."""

from __future__ import annotations

import csv
import itertools
import logging
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .autoencoder import DeepAutoencoder
from .base import BaseDetector, ScoreReport, percentile_gamma_threshold
from .classical import LocalOutlierFactor, OneClassSVM, RobustCovariance
from .features import FeatureTable
from .helm import HELM, deviation_ratio, write_ratio_csv
from .isolation_forest import IsolationForest
from .numerics import make_rng

logger = logging.getLogger(__name__)

# reporting order
MODELS = {
    "robust_covariance": ("Robust Covariance", RobustCovariance),
    "lof": ("Local Outlier Factor", LocalOutlierFactor),
    "ocsvm": ("One-class SVM", OneClassSVM),
    "iforest": ("Isolation Forest", IsolationForest),
    "dae": ("Deep Autoencoder", DeepAutoencoder),
    "helm": ("HELM", HELM),
}


@dataclass(frozen=True)
class SplitSpec:
    train_fraction: float = 0.70
    valid_fraction: float = 0.15
    seed: int = 0
    dae_valid_anomalies: int = 20

    def __post_init__(self):
        if self.train_fraction <= 0 or self.valid_fraction <= 0:
            raise ValueError("split fractions must be positive")
        if self.train_fraction + self.valid_fraction > 1:
            raise ValueError("train_fraction + valid_fraction must not exceed 1")
        if self.dae_valid_anomalies < 0:
            raise ValueError("dae_valid_anomalies must be >= 0")


@dataclass
class Split:
    train: FeatureTable
    valid: FeatureTable
    dae_valid: FeatureTable
    test: FeatureTable


def split(table: FeatureTable, spec: SplitSpec = SplitSpec()) -> Split:
    """Partition normals into train/valid/test; anomalies go to test.

    ``dae_valid_anomalies`` anomalies (split evenly between weak and severe
    where possible) are held out of the test set and added to a copy of the
    normal validation set for detectors calibrated with labelled anomalies.
    """
    rng = make_rng(spec.seed)
    normal = np.flatnonzero(table.labels == 0)
    normal = normal[rng.permutation(normal.size)]
    n_train = int(round(spec.train_fraction * normal.size))
    n_valid = int(round(spec.valid_fraction * normal.size))
    if n_train < 1 or n_valid < 1 or n_train + n_valid > normal.size:
        raise ValueError(f"too few normals ({normal.size}) for fractions "
                         f"{spec.train_fraction}/{spec.valid_fraction}")
    train_idx = normal[:n_train]
    valid_idx = normal[n_train:n_train + n_valid]
    test_normal = normal[n_train + n_valid:]

    anomalies = np.flatnonzero(table.labels == 1)
    anomalies = anomalies[rng.permutation(anomalies.size)]
    k = min(spec.dae_valid_anomalies, anomalies.size)
    held = []
    if k:
        by_fault = [anomalies[table.faults[anomalies] == f] for f in (1, 2)]
        want = [k // 2 + k % 2, k // 2]
        # move any shortfall in one fault group to the other
        for a, b in ((0, 1), (1, 0)):
            short = want[a] - min(want[a], by_fault[a].size)
            want[a] -= short
            want[b] += short
        held = np.concatenate([g[:w] for g, w in zip(by_fault, want)])
    held_set = set(np.asarray(held, dtype=int).tolist())
    test_anom = np.array([i for i in anomalies if i not in held_set], dtype=int)
    test_idx = np.concatenate([test_normal, test_anom])
    return Split(
        train=table.take(train_idx),
        valid=table.take(valid_idx),
        dae_valid=table.take(np.concatenate([valid_idx, np.asarray(held, dtype=int)])),
        test=table.take(test_idx),
    )


@dataclass(frozen=True)
class ConfusionCounts:
    tp: int
    fp: int
    fn: int
    tn: int

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.fn + self.tn


def confusion(predictions, truths) -> ConfusionCounts:
    """Counts with anomaly (1) as the positive class."""
    p = np.asarray(predictions, dtype=int)
    t = np.asarray(truths, dtype=int)
    if p.shape != t.shape:
        raise ValueError(f"length mismatch: {p.shape} vs {t.shape}")
    return ConfusionCounts(
        tp=int(((p == 1) & (t == 1)).sum()),
        fp=int(((p == 1) & (t == 0)).sum()),
        fn=int(((p == 0) & (t == 1)).sum()),
        tn=int(((p == 0) & (t == 0)).sum()),
    )


@dataclass(frozen=True)
class MetricRow:
    model: str
    acc: float
    tpr: float
    fpr: float
    precision: float
    f1: float


def metrics(counts: ConfusionCounts, model: str = "") -> MetricRow:
    """ACC, TPR (recall), FPR, precision and F1; empty denominators give 0."""
    c = counts
    if c.total <= 0:
        raise ValueError("confusion counts are empty")
    acc = (c.tp + c.tn) / c.total
    precision = c.tp / (c.tp + c.fp) if c.tp + c.fp else 0.0
    tpr = c.tp / (c.tp + c.fn) if c.tp + c.fn else 0.0
    fpr = c.fp / (c.fp + c.tn) if c.fp + c.tn else 0.0
    f1 = 2 * precision * tpr / (precision + tpr) if precision + tpr else 0.0
    return MetricRow(model, acc, tpr, fpr, precision, f1)


# --------------------------------------------------------------------------
# comparison

def derive_seed(master: int, index: int) -> int:
    return int(np.random.SeedSequence([master, index]).generate_state(1)[0])


def model_seed(master: int, name: str) -> int:
    """Seed of a model, independent of which other models run alongside it."""
    return derive_seed(master, list(MODELS).index(name))


def make_detector(name: str, params: dict | None = None, seed: int = 0) -> BaseDetector:
    if name not in MODELS:
        raise ValueError(f"unknown model {name!r}; choose from {list(MODELS)}")
    kwargs = {"random_state": seed, **(params or {})}
    return MODELS[name][1](**kwargs)


def calibration_set(split_: Split, detector: BaseDetector) -> FeatureTable:
    return split_.dae_valid if detector.threshold_policy == "best_f1" else split_.valid


def run_detector(detector: BaseDetector, split_: Split) -> ScoreReport:
    detector.fit(split_.train.X, split_.train.labels)
    cal = calibration_set(split_, detector)
    detector.calibrate(cal.X, cal.labels)
    return detector.report(split_.test.X, split_.test.labels, split_.test.faults)


@dataclass
class CompareResult:
    rows: list[MetricRow] = field(default_factory=list)
    confusions: dict[str, ConfusionCounts] = field(default_factory=dict)
    reports: dict[str, ScoreReport] = field(default_factory=dict)
    detectors: dict[str, BaseDetector] = field(default_factory=dict)
    errors: dict[str, str] = field(default_factory=dict)
    seconds: dict[str, float] = field(default_factory=dict)
    test_cycles: np.ndarray | None = None

    def row(self, name: str) -> MetricRow:
        label = MODELS[name][0]
        return next(r for r in self.rows if r.model == label)

    def helm_ratios(self) -> np.ndarray:
        det = self.detectors["helm"]
        rep = self.reports["helm"]
        return deviation_ratio(rep.score, det.threshold_)


def compare(table: FeatureTable, configs: dict | None = None, spec: SplitSpec = SplitSpec(),
            models=None, seed: int = 0) -> CompareResult:
    """Fit, calibrate and test every requested detector on one shared split.

    A failing detector is recorded in ``errors`` and the rest still run.
    """
    configs = configs or {}
    names = list(MODELS) if models is None else [m for m in MODELS if m in set(models)]
    unknown = set(models or ()) - set(MODELS)
    if unknown:
        raise ValueError(f"unknown models {sorted(unknown)}")
    sp = split(table, spec)
    result = CompareResult(test_cycles=sp.test.cycles)
    for name in names:
        t0 = time.perf_counter()
        try:
            det = make_detector(name, configs.get(name), model_seed(seed, name))
            rep = run_detector(det, sp)
        except Exception as exc:  # noqa: BLE001 - reported per model
            logger.exception("%s failed", name)
            result.errors[name] = f"{type(exc).__name__}: {exc}"
            continue
        counts = confusion(rep.predicted, rep.truth)
        result.rows.append(metrics(counts, MODELS[name][0]))
        result.confusions[name] = counts
        result.reports[name] = rep
        result.detectors[name] = det
        result.seconds[name] = time.perf_counter() - t0
        logger.info("%s done in %.1fs", name, result.seconds[name])
    return result


def compare_seeds(table: FeatureTable, seeds, configs=None, spec: SplitSpec = SplitSpec(),
                  models=None) -> dict[str, tuple[np.ndarray, np.ndarray]]:
    """Mean and standard deviation of (acc, tpr, fpr, precision, f1) over seeds.

    Both the split and the detectors are reseeded for every run.
    """
    acc: dict[str, list] = {}
    for s in seeds:
        sp = SplitSpec(spec.train_fraction, spec.valid_fraction, s, spec.dae_valid_anomalies)
        res = compare(table, configs, sp, models, seed=s)
        for r in res.rows:
            acc.setdefault(r.model, []).append([r.acc, r.tpr, r.fpr, r.precision, r.f1])
    return {m: (np.mean(v, axis=0), np.std(v, axis=0)) for m, v in acc.items()}


def tune_helm(split_: Split, grid: dict | None = None, base: dict | None = None,
              seed: int = 0) -> tuple[dict, float]:
    """Validation sweep over HELM hyperparameters.

    Each candidate is fitted on the training normals and thresholded on the
    normal-only validation set; candidates are ranked by F1 on the labelled
    validation set (validation normals plus the held-out anomalies), then
    by lower false-positive rate. The test set is never touched.

    Returns ``(best_params, best_f1)``.
    """
    grid = grid or {
        "hidden_sizes": [(64, 64), (128, 128)],
        "classifier_size": [256, 512],
        "percentile": [95.0, 99.0, 100.0],
        "gamma": [1.0, 1.2, 1.5, 2.0],
    }
    base = dict(base or {})
    keys = list(grid)
    structural = [k for k in keys if k not in ("percentile", "gamma")]
    thresholding = [k for k in keys if k in ("percentile", "gamma")]
    tune = split_.dae_valid
    if not tune.labels.any():
        raise ValueError("tuning needs labelled anomalies in the validation split")
    best, best_key = None, None
    for values in itertools.product(*(grid[k] for k in structural)):
        params = {**base, **dict(zip(structural, values)), "random_state": seed}
        det = HELM(**params).fit(split_.train.X)
        valid_scores = det.anomaly_score(split_.valid.X)
        tune_scores = det.anomaly_score(tune.X)
        for tvalues in itertools.product(*(grid[k] for k in thresholding)):
            tp = dict(zip(thresholding, tvalues))
            p = tp.get("percentile", det.percentile)
            g = tp.get("gamma", det.gamma)
            thr = percentile_gamma_threshold(valid_scores, p, g)
            row = metrics(confusion((tune_scores > thr).astype(int), tune.labels))
            key = (row.f1, -row.fpr)
            if best_key is None or key > best_key:
                best_key = key
                best = {**params, **tp}
    best.pop("random_state", None)
    return best, best_key[0]


# --------------------------------------------------------------------------
# output

def format_table(rows: list[MetricRow]) -> str:
    head = f"{'Model':<22}{'ACC':>8}{'TPR':>8}{'FPR':>8}{'Prec':>8}{'F1':>8}"
    lines = [head, "-" * len(head)]
    for r in rows:
        lines.append(f"{r.model:<22}{r.acc:>8.3f}{r.tpr:>8.3f}{r.fpr:>8.3f}{r.precision:>8.3f}{r.f1:>8.3f}")
    return "\n".join(lines)


def write_metrics_csv(rows: list[MetricRow], path, header_comment: str | None = None) -> None:
    with open(path, "w", newline="") as fh:
        if header_comment:
            for line in header_comment.splitlines():
                fh.write(f"# {line}\n")
        w = csv.writer(fh)
        w.writerow(["model", "acc", "tpr", "fpr", "precision", "f1"])
        for r in rows:
            w.writerow([r.model, repr(r.acc), repr(r.tpr), repr(r.fpr), repr(r.precision), repr(r.f1)])


def write_confusion_csv(confusions: dict[str, ConfusionCounts], path,
                        header_comment: str | None = None) -> None:
    with open(path, "w", newline="") as fh:
        if header_comment:
            for line in header_comment.splitlines():
                fh.write(f"# {line}\n")
        w = csv.writer(fh)
        w.writerow(["model", "tp", "fp", "fn", "tn"])
        for name, c in confusions.items():
            w.writerow([MODELS[name][0], c.tp, c.fp, c.fn, c.tn])


def write_compare_outputs(result: CompareResult, out_dir, header_comment: str | None = None) -> list[Path]:
    """Write metrics, confusion counts and (when HELM ran) per-fault ratio files."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = [out / "metrics.csv", out / "confusion.csv"]
    write_metrics_csv(result.rows, written[0], header_comment)
    write_confusion_csv(result.confusions, written[1], header_comment)
    (out / "metrics.txt").write_text(format_table(result.rows) + "\n")
    written.append(out / "metrics.txt")
    if "helm" in result.reports:
        rep = result.reports["helm"]
        ratios = result.helm_ratios()
        path = out / "helm_ratios.csv"
        write_ratio_csv(path, result.test_cycles, rep.fault, ratios)
        written.append(path)
        for f, fname in enumerate(("none", "weak", "severe")):
            m = rep.fault == f
            path = out / f"helm_ratios_{fname}.csv"
            write_ratio_csv(path, result.test_cycles[m], rep.fault[m], ratios[m])
            written.append(path)
    return written
