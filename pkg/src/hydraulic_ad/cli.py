"""Command-line front end: ``hydraulic-ad <command> [options]``.

Commands
--------
inspect   summarise a dataset directory (or the configured data source)
synth     write a synthetic dataset in the on-disk sensor-file layout
features  write the feature table, per-feature histograms and correlations
train     fit and calibrate one detector on the configured split, save it
score     score a feature file with a saved detector
compare   run every detector on one split and write the comparison tables

A run is described by a JSON config file (``--config``); flags override it.
Schema, version 1::

    {
      "version": 1,
      "seed": 0,
      "data": {"path": "/data/hydraulic"}
          or {"synthetic": {"n_normal": 500, "n_weak": 120, "n_severe": 120, "seed": 0}},
      "split": {"train_fraction": 0.7, "valid_fraction": 0.15, "dae_valid_anomalies": 20},
      "models": {"helm": {"gamma": 1.2}, "lof": {"n_neighbors": 20}},
      "histogram_bins": 30,
      "out": "results"
    }

Exit status is 0 on success, 1 when a detector fails during evaluation and
2 on input or format errors.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .base import load_detector, save_detector
from .dataset import (CONDITION_NAMES, CONDITION_VALUES, SENSORS, Dataset,
                      generate_synthetic, load_dataset, write_dataset)
from .evaluation import (MODELS, SplitSpec, compare, format_table, make_detector, model_seed,
                         run_detector, split, write_compare_outputs)
from .exceptions import DataError, TrainingError
from .features import (FEATURE_NAMES, correlation_matrix, extract_table, histogram,
                       write_feature_csv)

logger = logging.getLogger(__name__)

CONFIG_VERSION = 1
EXIT_OK, EXIT_EVAL, EXIT_INPUT = 0, 1, 2
DEFAULT_SYNTHETIC = {"n_normal": 500, "n_weak": 120, "n_severe": 120, "seed": 0}
_RESERVED = ("cycle", "label", "fault")


class InputError(Exception):
    """Bad command-line input; reported with exit status 2."""


@dataclass
class RunConfig:
    seed: int
    dataset: str | None = None
    synthetic: dict | None = None
    split: dict = field(default_factory=dict)
    models: dict = field(default_factory=dict)
    histogram_bins: int = 30
    out: str = "results"

    def __post_init__(self):
        if (self.dataset is None) == (self.synthetic is None):
            raise InputError("config needs exactly one data source: data.path or data.synthetic")
        if not isinstance(self.seed, int) or isinstance(self.seed, bool):
            raise InputError(f"seed must be an integer, got {self.seed!r}")
        unknown = set(self.models) - set(MODELS)
        if unknown:
            raise InputError(f"unknown models in config: {sorted(unknown)}")
        if self.synthetic is not None:
            self.synthetic = {**DEFAULT_SYNTHETIC, **self.synthetic}

    @classmethod
    def default(cls) -> "RunConfig":
        return cls(seed=0, synthetic=dict(DEFAULT_SYNTHETIC))

    @classmethod
    def from_dict(cls, d: dict) -> "RunConfig":
        if d.get("version") != CONFIG_VERSION:
            raise InputError(f"config version {d.get('version')!r} is not supported "
                             f"(expected {CONFIG_VERSION})")
        if "seed" not in d:
            raise InputError("config must set 'seed'")
        extra = set(d) - {"version", "seed", "data", "split", "models", "histogram_bins", "out"}
        if extra:
            raise InputError(f"unknown config keys: {sorted(extra)}")
        data = d.get("data") or {}
        if set(data) - {"path", "synthetic"}:
            raise InputError(f"unknown data keys: {sorted(set(data) - {'path', 'synthetic'})}")
        return cls(seed=d["seed"], dataset=data.get("path"), synthetic=data.get("synthetic"),
                   split=dict(d.get("split") or {}), models=dict(d.get("models") or {}),
                   histogram_bins=int(d.get("histogram_bins", 30)), out=d.get("out", "results"))

    @classmethod
    def load(cls, path) -> "RunConfig":
        try:
            return cls.from_dict(json.loads(Path(path).read_text()))
        except json.JSONDecodeError as exc:
            raise InputError(f"{path}: invalid JSON ({exc})") from None

    def to_dict(self) -> dict:
        data = {"path": self.dataset} if self.dataset is not None else {"synthetic": self.synthetic}
        d = asdict(self)
        del d["dataset"], d["synthetic"]
        return {"version": CONFIG_VERSION, "data": data, **d}

    def header(self) -> str:
        return f"hydraulic-ad {__version__}\nconfig: " + json.dumps(self.to_dict(), sort_keys=True)

    def split_spec(self) -> SplitSpec:
        try:
            return SplitSpec(**{"seed": self.seed, **self.split})
        except TypeError as exc:
            raise InputError(f"bad split config: {exc}") from None

    def load_data(self) -> Dataset:
        if self.dataset is not None:
            return load_dataset(self.dataset)
        return generate_synthetic(**self.synthetic)


# --------------------------------------------------------------------------
# commands

def _resolve_config(args) -> RunConfig:
    cfg = RunConfig.load(args.config) if getattr(args, "config", None) else RunConfig.default()
    if getattr(args, "seed", None) is not None:
        cfg.seed = args.seed
        if cfg.synthetic is not None and not getattr(args, "config", None):
            cfg.synthetic["seed"] = args.seed
    if getattr(args, "data", None):
        cfg.dataset, cfg.synthetic = args.data, None
    if getattr(args, "out", None):
        cfg.out = args.out
    return cfg


def _parse_models(text: str | None) -> list[str] | None:
    if not text:
        return None
    names = [m.strip() for m in text.split(",") if m.strip()]
    unknown = [m for m in names if m not in MODELS]
    if unknown:
        raise InputError(f"unknown models {unknown}; choose from {list(MODELS)}")
    return names


def cmd_inspect(args) -> int:
    cfg = _resolve_config(args) if not args.path else None
    ds = load_dataset(args.path) if args.path else cfg.load_data()
    print(f"cycles: {len(ds)}")
    print("sensor samples per cycle:")
    for spec in SENSORS:
        print(f"  {spec.id:<5}{ds.channels[spec.id].shape[1]:>6}  ({spec.rate} Hz, {spec.unit})")
    print("conditions:")
    for j, name in enumerate(CONDITION_NAMES):
        tally = ", ".join(f"{v}: {int((ds.profile[:, j] == v).sum())}" for v in CONDITION_VALUES[name])
        print(f"  {name}: {tally}")
    labels = ds.labels()
    pump = ds.pump
    print(f"labels: normal {int((labels == 0).sum())}, anomaly {int(labels.sum())} "
          f"(weak {int((pump == 1).sum())}, severe {int((pump == 2).sum())})")
    return EXIT_OK


def cmd_synth(args) -> int:
    cfg = _resolve_config(args)
    if cfg.synthetic is None:
        raise InputError("synth needs a synthetic data source in the config")
    out = Path(cfg.out)
    write_dataset(generate_synthetic(**cfg.synthetic), out)
    print(f"wrote synthetic dataset to {out}")
    return EXIT_OK


def cmd_features(args) -> int:
    cfg = _resolve_config(args)
    table = extract_table(cfg.load_data())
    out = Path(cfg.out)
    hist_dir = out / "histograms"
    hist_dir.mkdir(parents=True, exist_ok=True)
    header = cfg.header()
    write_feature_csv(table, out / "features.csv", header)
    normal, anomal = table.labels == 0, table.labels == 1
    for k, name in enumerate(FEATURE_NAMES):
        edges, _ = histogram(table.X, k, cfg.histogram_bins)
        n_counts = np.histogram(table.X[normal, k], bins=edges)[0]
        a_counts = np.histogram(table.X[anomal, k], bins=edges)[0]
        with open(hist_dir / f"{name}.csv", "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["bin_low", "bin_high", "normal", "anomaly"])
            for i in range(len(edges) - 1):
                w.writerow([repr(float(edges[i])), repr(float(edges[i + 1])),
                            int(n_counts[i]), int(a_counts[i])])
    R = correlation_matrix(table.X)
    with open(out / "correlation.csv", "w", newline="") as fh:
        for line in header.splitlines():
            fh.write(f"# {line}\n")
        w = csv.writer(fh)
        w.writerow(["feature", *FEATURE_NAMES])
        for name, row in zip(FEATURE_NAMES, R):
            w.writerow([name, *(repr(float(v)) for v in row)])
    print(f"wrote {len(table)} rows x {len(FEATURE_NAMES)} features to {out}")
    return EXIT_OK


def cmd_train(args) -> int:
    cfg = _resolve_config(args)
    names = _parse_models(args.models) or ["helm"]
    if len(names) != 1:
        raise InputError("train takes exactly one model")
    name = names[0]
    sp = split(extract_table(cfg.load_data()), cfg.split_spec())
    det = make_detector(name, cfg.models.get(name), model_seed(cfg.seed, name))
    rep = run_detector(det, sp)
    path = Path(args.model) if args.model else Path(cfg.out) / f"{name}.npz"
    path.parent.mkdir(parents=True, exist_ok=True)
    save_detector(det, path)
    print(f"saved {MODELS[name][0]} to {path} (threshold {det.threshold_:.6g}, "
          f"{int(rep.predicted.sum())}/{len(rep)} test cycles flagged)")
    return EXIT_OK


def read_score_input(path) -> tuple[np.ndarray, np.ndarray]:
    """Cycle indices and feature matrix of a feature CSV.

    Columns named ``cycle``, ``label`` or ``fault`` are metadata; every
    other column is a feature. Without a ``cycle`` column rows are numbered
    from 0. Lines starting with ``#`` are ignored.
    """
    with open(path, newline="") as fh:
        rows = list(csv.reader(line for line in fh if not line.startswith("#")))
    if not rows:
        raise InputError(f"{path}: missing header row")
    header, body = rows[0], [r for r in rows[1:] if r]
    feat_cols = [i for i, h in enumerate(header) if h not in _RESERVED]
    try:
        X = np.array([[float(r[i]) for i in feat_cols] for r in body], dtype=float)
    except (ValueError, IndexError) as exc:
        raise InputError(f"{path}: unreadable feature row ({exc})") from None
    X = X.reshape(len(body), len(feat_cols))
    if "cycle" in header:
        c = header.index("cycle")
        cycles = np.array([int(r[c]) for r in body], dtype=int)
    else:
        cycles = np.arange(len(body))
    return cycles, X


def cmd_score(args) -> int:
    det = load_detector(args.model)
    cycles, X = read_score_input(args.input)
    if X.shape[1] != det.n_features_in_:
        raise InputError(f"{args.input}: model expects {det.n_features_in_} features, "
                         f"input has {X.shape[1]}")
    if len(X):
        scores, labels = det.anomaly_score(X), det.predict(X)
    else:
        scores, labels = np.empty(0), np.empty(0, dtype=int)
    out = Path(args.out) if args.out else Path(args.input).with_suffix(".scores.csv")
    out.parent.mkdir(parents=True, exist_ok=True)
    with open(out, "w", newline="") as fh:
        fh.write(f"# hydraulic-ad {__version__}\n# model: {args.model}\n")
        w = csv.writer(fh)
        w.writerow(["cycle", "score", "label"])
        for c, s, y in zip(cycles, scores, labels):
            w.writerow([int(c), repr(float(s)), int(y)])
    print(f"scored {len(X)} cycles -> {out}")
    return EXIT_OK


def cmd_compare(args) -> int:
    cfg = _resolve_config(args)
    models = _parse_models(args.models)
    table = extract_table(cfg.load_data())
    result = compare(table, cfg.models, cfg.split_spec(), models, seed=cfg.seed)
    write_compare_outputs(result, cfg.out, cfg.header())
    print(format_table(result.rows))
    for name, err in result.errors.items():
        print(f"FAILED {MODELS[name][0]}: {err}", file=sys.stderr)
    return EXIT_EVAL if result.errors else EXIT_OK


# --------------------------------------------------------------------------
# entry point

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="hydraulic-ad", description=__doc__.split("\n")[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, models=False):
        p.add_argument("--config", help="JSON run config")
        p.add_argument("--data", help="dataset directory (overrides the config data source)")
        p.add_argument("--out", help="output directory")
        p.add_argument("--seed", type=int, help="master seed")
        if models:
            p.add_argument("--models", help=f"comma-separated subset of {','.join(MODELS)}")

    p = sub.add_parser("inspect", help="summarise a dataset")
    p.add_argument("path", nargs="?", help="dataset directory")
    common(p)
    p.set_defaults(func=cmd_inspect)

    p = sub.add_parser("synth", help="write a synthetic dataset")
    common(p)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("features", help="write feature, histogram and correlation files")
    common(p)
    p.set_defaults(func=cmd_features)

    p = sub.add_parser("train", help="fit, calibrate and save one detector")
    common(p, models=True)
    p.add_argument("--model", help="output model path (default <out>/<name>.npz)")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("score", help="score a feature file with a saved detector")
    p.add_argument("--model", required=True, help="saved detector (.npz)")
    p.add_argument("--input", required=True, help="feature CSV")
    p.add_argument("--out", help="output CSV (default <input>.scores.csv)")
    p.set_defaults(func=cmd_score)

    p = sub.add_parser("compare", help="compare detectors on one split")
    common(p, models=True)
    p.set_defaults(func=cmd_compare)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except TrainingError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_EVAL
    except (InputError, DataError, FileNotFoundError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
