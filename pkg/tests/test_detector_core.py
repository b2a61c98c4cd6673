import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hydraulic_ad import (HELM, DeepAutoencoder, IsolationForest, LocalOutlierFactor, OneClassSVM,
                          RobustCovariance, load_detector, save_detector)
from hydraulic_ad.base import best_f1_threshold, percentile_gamma_threshold
from hydraulic_ad.exceptions import FormatError

FAST = {
    RobustCovariance: dict(n_restarts=3),
    LocalOutlierFactor: dict(n_neighbors=5),
    OneClassSVM: dict(nu=0.1),
    IsolationForest: dict(n_estimators=20),
    DeepAutoencoder: dict(hidden_layer_sizes=(6, 3, 6), epochs=3, threshold_policy="percentile"),
    HELM: dict(hidden_sizes=(16,), classifier_size=32),
}


@pytest.fixture(scope="module")
def data():
    rng = np.random.default_rng(0)
    return rng.normal(size=(80, 8)), rng.normal(size=(30, 8)), rng.normal(3.0, 1.0, size=(10, 8))


def test_percentile_gamma_examples():
    assert percentile_gamma_threshold([0, 0.1, 0.1, 0.5], 75, 2) == pytest.approx(0.2, abs=1e-12)
    assert percentile_gamma_threshold([0.0, 0.0], 99, 1.2) == 0.0
    assert percentile_gamma_threshold([3.0, 4.0], 50, 0.0) == 0.0
    with pytest.raises(ValueError):
        percentile_gamma_threshold([1.0], 50, -1)


def test_best_f1_separated():
    s = np.array([0.1, 0.2, 0.3, 0.9, 1.1])
    y = np.array([0, 0, 0, 1, 1])
    thr = best_f1_threshold(s, y)
    assert thr == pytest.approx(0.6)
    assert ((s > thr) == y).all()


def test_best_f1_tie_goes_low():
    # flagging all four and flagging only 0.4 both give F1 = 2/3
    s = np.array([0.1, 0.2, 0.3, 0.4])
    y = np.array([1, 0, 0, 1])
    assert best_f1_threshold(s, y) == pytest.approx(0.05)
    assert best_f1_threshold(np.full(3, 0.7), [0, 1, 0]) < 0.7


@settings(max_examples=50, deadline=None)
@given(st.lists(st.tuples(st.floats(0, 10), st.booleans()), min_size=2, max_size=30))
def test_best_f1_is_optimal(pairs):
    s = np.array([p[0] for p in pairs])
    y = np.array([int(p[1]) for p in pairs])
    if not y.any():
        return
    def f1(t):
        pred = s > t
        tp = (pred & (y == 1)).sum()
        return 2 * tp / (pred.sum() + y.sum())
    thr = best_f1_threshold(s, y)
    cands = list(np.unique(s) - 1e-9) + list(np.unique(s))
    assert f1(thr) >= max(f1(c) for c in cands) - 1e-12


@pytest.mark.parametrize("cls", list(FAST))
class TestLifecycle:
    def test_fit_rejects_anomalies(self, cls, data):
        X, _, _ = data
        y = np.zeros(len(X))
        y[3] = 1
        with pytest.raises(ValueError, match="normal"):
            cls(**FAST[cls]).fit(X, y)

    def test_deterministic_and_finite(self, cls, data):
        X, V, A = data
        a = cls(**FAST[cls]).fit(X).anomaly_score(A)
        b = cls(**FAST[cls]).fit(X).anomaly_score(A)
        assert np.array_equal(a, b)
        assert np.all(np.isfinite(cls(**FAST[cls]).fit(X).anomaly_score(X)))

    def test_threshold_strict_and_predict(self, cls, data):
        X, V, A = data
        det = cls(**FAST[cls]).fit(X).calibrate(V)
        s = det.anomaly_score(V)
        det.threshold_ = float(s[0])
        assert det.predict(V[:1])[0] == 0
        assert np.array_equal(det.predict(V), (s > s[0]).astype(int))
        assert np.allclose(det.decision_function(V), s[0] - s)
        rep = det.report(np.empty((0, 8)), [])
        assert len(rep) == 0

    def test_uncalibrated_and_width(self, cls, data):
        X, V, _ = data
        det = cls(**FAST[cls]).fit(X)
        with pytest.raises(ValueError, match="calibrat"):
            det.predict(V)
        with pytest.raises(ValueError, match="features"):
            det.anomaly_score(V[:, :5])

    def test_save_load_bit_exact(self, cls, data, tmp_path):
        X, V, A = data
        det = cls(**FAST[cls]).fit(X).calibrate(V)
        save_detector(det, tmp_path / "m.npz")
        back = load_detector(tmp_path / "m.npz")
        assert type(back) is cls
        assert back.get_params() == det.get_params()
        Z = np.vstack([V, A])
        assert np.array_equal(back.anomaly_score(Z), det.anomaly_score(Z))
        assert np.array_equal(back.predict(Z), det.predict(Z))


def test_percentile_policy_needs_normals(data):
    X, V, _ = data
    with pytest.raises(ValueError):
        RobustCovariance(n_restarts=2).fit(X).calibrate(V, np.r_[1, np.zeros(len(V) - 1)])
    with pytest.raises(ValueError):
        RobustCovariance(n_restarts=2, threshold_policy="best_f1").fit(X).calibrate(V)
    with pytest.raises(ValueError):
        RobustCovariance(threshold_policy="bogus").fit(X)


def test_zero_threshold_flags_nonzero(data):
    X, V, _ = data
    det = IsolationForest(n_estimators=5).fit(X)
    det.threshold_ = 0.0
    assert det.predict(V).all()


def test_version_mismatch(tmp_path, data):
    X, V, _ = data
    save_detector(LocalOutlierFactor(n_neighbors=3).fit(X).calibrate(V), tmp_path / "m.npz")
    with np.load(tmp_path / "m.npz") as z:
        arrays = {k: z[k] for k in z.files}
    meta = json.loads(bytes(arrays["__meta__"]).decode())
    meta["format_version"] = 99
    arrays["__meta__"] = np.frombuffer(json.dumps(meta).encode(), dtype=np.uint8)
    np.savez(tmp_path / "bad.npz", **arrays)
    with pytest.raises(FormatError, match="99"):
        load_detector(tmp_path / "bad.npz")
