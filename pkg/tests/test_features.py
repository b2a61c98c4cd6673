import numpy as np
import pytest

from hydraulic_ad.dataset import CONDITION_NAMES, SENSORS, Cycle, generate_synthetic
from hydraulic_ad.features import (FEATURE_NAMES, N_FEATURES, FeatureTable, Scaler, apply_scaler,
                                   correlation_matrix, extract_features, extract_table, fit_scaler,
                                   histogram, read_feature_csv, write_feature_csv)


def _cycle(overrides=None):
    rng = np.random.default_rng(0)
    ch = {s.id: rng.normal(size=s.samples_per_cycle) for s in SENSORS}
    ch.update(overrides or {})
    return Cycle(0, ch, dict.fromkeys(CONDITION_NAMES, 0))


def test_feature_layout():
    assert N_FEATURES == 68
    assert FEATURE_NAMES[:4] == ("PS1_mean", "PS1_var", "PS1_skew", "PS1_kurt")
    assert FEATURE_NAMES[-1] == "SE_kurt"


def test_extract_examples():
    v = extract_features(_cycle({"TS1": np.full(60, 40.0), "PS1": np.tile([0.0, 1.0], 3000)}))
    assert v.shape == (68,)
    i = FEATURE_NAMES.index("TS1_mean")
    assert v[i:i + 4].tolist() == [40.0, 0.0, 0.0, 0.0]
    assert v[0:4] == pytest.approx([0.5, 0.25, 0.0, 1.0], abs=1e-12)


def test_table_matches_per_cycle():
    ds = generate_synthetic(3, 1, 1, seed=2)
    t = extract_table(ds)
    for i, c in enumerate(ds):
        assert np.allclose(t.X[i], extract_features(c), rtol=1e-12, atol=1e-12)
    assert t.labels.tolist() == ds.labels().tolist()


def test_scaler_examples():
    s = fit_scaler([[2.0], [4.0]])
    assert s.mean_[0] == 3 and s.scale_[0] == 1
    assert apply_scaler(s, [2.0])[0] == -1
    c = Scaler().fit(np.array([[1.0, 5.0], [2.0, 5.0]]))
    assert np.all(c.transform([[7.0, 5.0]])[:, 1] == 0)
    X = np.random.default_rng(0).normal(size=(20, 3))
    assert np.allclose(apply_scaler(fit_scaler(X), X.mean(axis=0)), 0, atol=1e-12)
    with pytest.raises(ValueError):
        fit_scaler(np.empty((0, 2)))
    with pytest.raises(ValueError):
        s.transform([[1.0, 2.0]])


def test_correlation_examples():
    R = correlation_matrix([[1, 2], [2, 4], [3, 6]])
    assert R == pytest.approx(np.ones((2, 2)), abs=1e-12)
    x = np.random.default_rng(1).normal(size=30)
    R = correlation_matrix(np.column_stack([x, -x, np.full(30, 2.0)]))
    assert R[0, 1] == pytest.approx(-1.0, abs=1e-12)
    assert R[2].tolist() == [0.0, 0.0, 1.0]
    with pytest.raises(ValueError):
        correlation_matrix([[1.0, 2.0]])


def test_correlation_oracle():
    X = np.random.default_rng(4).normal(size=(40, 6))
    assert np.allclose(correlation_matrix(X), np.corrcoef(X, rowvar=False), atol=1e-12)


def test_histogram_examples():
    _, c = histogram(np.full(4, 3.0), 0, 2)
    assert sorted(c.tolist()) == [0, 4]
    edges, c = histogram(np.array([0.0, 1, 2, 3]), 0, 2)
    assert c.tolist() == [2, 2] and edges[1] == 1.5
    X = np.random.default_rng(2).normal(size=(57, 3))
    assert histogram(X, 1, 7)[1].sum() == 57
    with pytest.raises(ValueError):
        histogram(np.empty(0), 0, 3)


def test_csv_round_trip(tmp_path):
    t = extract_table(generate_synthetic(3, 1, 1, seed=0))
    write_feature_csv(t, tmp_path / "f.csv", header_comment="provenance")
    back = read_feature_csv(tmp_path / "f.csv")
    assert np.array_equal(back.X, t.X)
    assert np.array_equal(back.labels, t.labels) and np.array_equal(back.faults, t.faults)


def test_table_concat_take():
    t = extract_table(generate_synthetic(3, 1, 1, seed=0))
    both = FeatureTable.concat([t.take([0, 1]), t.take([4])])
    assert both.cycles.tolist() == [0, 1, 4]
    with pytest.raises(ValueError):
        FeatureTable(np.zeros((2, 68)), [0], [0, 0], [0, 1])
