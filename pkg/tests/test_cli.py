import csv
import json

import numpy as np
import pytest

from hydraulic_ad.cli import RunConfig, main
from hydraulic_ad.dataset import generate_synthetic, write_dataset
from hydraulic_ad.evaluation import MODELS


def _config(tmp_path, **extra):
    cfg = {
        "version": 1,
        "seed": 3,
        "data": {"synthetic": {"n_normal": 150, "n_weak": 30, "n_severe": 30, "seed": 2}},
        "split": {"dae_valid_anomalies": 10},
        "models": {"robust_covariance": {"n_restarts": 3}, "iforest": {"n_estimators": 30},
                   "dae": {"epochs": 5}, "helm": {"hidden_sizes": [16], "classifier_size": 64}},
        "histogram_bins": 10,
        **extra,
    }
    path = tmp_path / "run.json"
    path.write_text(json.dumps(cfg))
    return str(path)


def _rows(path):
    with open(path) as fh:
        return list(csv.reader(line for line in fh if not line.startswith("#")))


def test_inspect_synthetic_and_directory(tmp_path, capsys):
    assert main(["inspect", "--config", _config(tmp_path)]) == 0
    out = capsys.readouterr().out
    assert "cycles: 210" in out and "normal 150, anomaly 60 (weak 30, severe 30)" in out
    write_dataset(generate_synthetic(3, 1, 1, seed=0), tmp_path / "ds")
    assert main(["inspect", str(tmp_path / "ds")]) == 0
    assert "PS1    6000" in capsys.readouterr().out


def test_inspect_missing_sensor_exit_2(tmp_path, capsys):
    write_dataset(generate_synthetic(3, 1, 1, seed=0), tmp_path / "ds")
    (tmp_path / "ds" / "FS2.txt").unlink()
    assert main(["inspect", str(tmp_path / "ds")]) == 2
    assert "FS2" in capsys.readouterr().err


def test_features_outputs_and_determinism(tmp_path):
    cfg = _config(tmp_path)
    assert main(["features", "--config", cfg, "--out", str(tmp_path / "a")]) == 0
    assert main(["features", "--config", cfg, "--out", str(tmp_path / "b")]) == 0
    rows = _rows(tmp_path / "a" / "features.csv")
    assert len(rows[0]) == 3 + 68 and len(rows) == 211
    corr = _rows(tmp_path / "a" / "correlation.csv")
    assert all(float(corr[i + 1][i + 1]) == 1.0 for i in range(68))
    assert len(list((tmp_path / "a" / "histograms").glob("*.csv"))) == 68
    for name in ("features.csv", "correlation.csv", "histograms/PS1_mean.csv"):
        a = (tmp_path / "a" / name).read_bytes().replace(b"/a", b"")
        b = (tmp_path / "b" / name).read_bytes().replace(b"/b", b"")
        assert a == b
    assert (tmp_path / "a" / "features.csv").read_text().startswith("# hydraulic-ad")


def test_compare_and_models_flag(tmp_path, capsys):
    cfg = _config(tmp_path)
    assert main(["compare", "--config", cfg, "--out", str(tmp_path / "all")]) == 0
    rows = _rows(tmp_path / "all" / "metrics.csv")
    assert [r[0] for r in rows[1:]] == [v[0] for v in MODELS.values()]
    assert main(["compare", "--config", cfg, "--out", str(tmp_path / "two"), "--models", "helm,iforest"]) == 0
    assert len(_rows(tmp_path / "two" / "metrics.csv")) == 3
    head = (tmp_path / "two" / "metrics.csv").read_text().splitlines()[1]
    assert head.startswith("# config: ") and '"seed": 3' in head


def test_compare_detector_failure_exit_1(tmp_path):
    cfg = _config(tmp_path, models={"lof": {"n_neighbors": 100000}})
    assert main(["compare", "--config", cfg, "--out", str(tmp_path / "o"), "--models", "lof"]) == 1


@pytest.mark.parametrize("model", ["helm", "ocsvm", "dae"])
def test_train_score_round_trip_bit_exact(tmp_path, model):
    cfg = _config(tmp_path)
    out = tmp_path / "o"
    assert main(["compare", "--config", cfg, "--out", str(out), "--models", model]) == 0
    assert main(["features", "--config", cfg, "--out", str(out)]) == 0
    assert main(["train", "--config", cfg, "--out", str(out), "--models", model]) == 0
    assert main(["score", "--model", str(out / f"{model}.npz"), "--input", str(out / "features.csv"),
                 "--out", str(out / "scores.csv")]) == 0
    scored = {int(r[0]): (r[1], int(r[2])) for r in _rows(out / "scores.csv")[1:]}
    # reproduce the compare run in-process to get its per-cycle test predictions
    from hydraulic_ad.evaluation import compare
    from hydraulic_ad.features import extract_table

    rc = RunConfig.load(cfg)
    res = compare(extract_table(rc.load_data()), rc.models, rc.split_spec(), [model], seed=rc.seed)
    rep = res.reports[model]
    assert _rows(out / "confusion.csv")[1][1:] == [str(v) for v in
                                                  (res.confusions[model].tp, res.confusions[model].fp,
                                                   res.confusions[model].fn, res.confusions[model].tn)]
    for cyc, s, p in zip(res.test_cycles, rep.score, rep.predicted):
        assert scored[int(cyc)] == (repr(float(s)), int(p))


def test_score_wrong_width_and_empty(tmp_path, capsys):
    cfg = _config(tmp_path)
    out = tmp_path / "o"
    assert main(["train", "--config", cfg, "--out", str(out), "--models", "iforest"]) == 0
    bad = tmp_path / "bad.csv"
    bad.write_text("cycle,a,b\n0,1.0,2.0\n")
    assert main(["score", "--model", str(out / "iforest.npz"), "--input", str(bad)]) == 2
    assert "expects 68 features" in capsys.readouterr().err
    empty = tmp_path / "empty.csv"
    empty.write_text("cycle," + ",".join(f"f{i}" for i in range(68)) + "\n")
    assert main(["score", "--model", str(out / "iforest.npz"), "--input", str(empty),
                 "--out", str(tmp_path / "s.csv")]) == 0
    assert _rows(tmp_path / "s.csv") == [["cycle", "score", "label"]]


def test_synth_writes_loadable_dataset(tmp_path, capsys):
    cfg = _config(tmp_path)
    assert main(["synth", "--config", cfg, "--out", str(tmp_path / "ds")]) == 0
    assert main(["inspect", str(tmp_path / "ds")]) == 0
    assert "cycles: 210" in capsys.readouterr().out


@pytest.mark.parametrize("payload, message", [
    ({"version": 2, "seed": 0, "data": {"synthetic": {}}}, "version"),
    ({"version": 1, "data": {"synthetic": {}}}, "seed"),
    ({"version": 1, "seed": 0, "data": {}}, "exactly one"),
    ({"version": 1, "seed": 0, "data": {"path": "x", "synthetic": {}}}, "exactly one"),
    ({"version": 1, "seed": 0, "data": {"synthetic": {}}, "models": {"svm": {}}}, "unknown models"),
])
def test_bad_configs_exit_2(tmp_path, capsys, payload, message):
    path = tmp_path / "c.json"
    path.write_text(json.dumps(payload))
    assert main(["compare", "--config", str(path)]) == 2
    assert message in capsys.readouterr().err


def test_unknown_model_flag(tmp_path, capsys):
    assert main(["compare", "--config", _config(tmp_path), "--models", "svm"]) == 2
