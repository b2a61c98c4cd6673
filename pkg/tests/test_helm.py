import numpy as np
import pytest

from hydraulic_ad.helm import (HELM, ElmLayer, deviation_ratio, elm_forward, encode,
                               fit_elm_autoencoder, fit_oneclass_elm, helm_threshold,
                               oneclass_output, random_layer, write_ratio_csv)
from hydraulic_ad.numerics import make_rng


def test_elm_forward_examples():
    zero = ElmLayer(np.zeros((3, 2)), np.zeros(3), np.zeros((3, 0)))
    assert np.all(elm_forward(zero, np.random.default_rng(0).normal(size=(4, 2))) == 0.5)
    one = ElmLayer(np.array([[1.0, 0.0]]), np.zeros(1), np.zeros((1, 0)))
    assert elm_forward(one, [[2.0, 7.0]])[0, 0] == pytest.approx(0.8807970779778823, abs=1e-12)
    with pytest.raises(ValueError):
        elm_forward(one, [[1.0, 2.0, 3.0]])


def test_random_layer_seeded_unit_rows():
    a, b = random_layer(5, 7, make_rng(1)), random_layer(5, 7, make_rng(1))
    assert np.array_equal(a.W, b.W) and np.array_equal(a.b, b.b)
    assert np.allclose(np.linalg.norm(a.W, axis=1), 1.0)
    assert np.all(np.abs(a.b) <= 1.0)


@pytest.mark.parametrize("seed", range(5))
def test_interpolation_regime(seed):
    rng = np.random.default_rng(seed)
    N, d = 20, 6
    X = rng.normal(size=(N, d))
    layer, _, err = fit_elm_autoencoder(X, 40, 1e12, make_rng(seed))
    H = elm_forward(layer, X)
    assert np.linalg.norm(H @ layer.beta - X) < 1e-6
    assert err < 1e-6
    oc = fit_oneclass_elm(X, 40, 1e12, make_rng(seed))
    assert np.abs(oneclass_output(oc, X) - 1.0).max() < 1e-6


def test_stacked_features_in_unit_interval(small_table):
    X = small_table.X[small_table.labels == 0]
    det = HELM(hidden_sizes=(32, 32), classifier_size=64).fit(X)
    F = det.features(det._transform(X))
    assert F.shape == (len(X), 32)
    assert np.all(np.isfinite(F)) and np.all((F > 0) & (F < 1))


def test_oneclass_train_output_near_one(small_table):
    X = small_table.X[small_table.labels == 0]
    det = HELM(classifier_size=256, C_classifier=100.0).fit(X)
    assert abs(det.output(X).mean() - 1.0) < 0.1


def test_activation_scale_peak():
    X = np.random.default_rng(3).normal(size=(50, 5))
    layer, F, _ = fit_elm_autoencoder(X, 10, 1e2, make_rng(0), activation_scale=2.0)
    assert np.abs(layer.scale * (X @ layer.beta.T)).max() == pytest.approx(2.0)
    assert np.array_equal(F, encode(layer, X))


def test_threshold_examples():
    assert helm_threshold(np.zeros(5), 99, 1.2) == 0.0
    assert helm_threshold([0, 0.1, 0.1, 0.5], 75, 2) == pytest.approx(0.2, abs=1e-12)
    assert helm_threshold([0.3, 0.9], 99, 0.0) == 0.0
    with pytest.raises(ValueError):
        helm_threshold([], 99, 1.2)


def test_ratio_examples():
    assert deviation_ratio(abs(1 - 0.7), 0.2) == pytest.approx(1.5)
    assert deviation_ratio(abs(1 - 1.0), 0.2) == 0.0
    assert deviation_ratio(np.array([0.0, 0.3]), 0.0).tolist() == [0.0, np.inf]


def test_predict_rule_and_ratios(small_table):
    t = small_table
    normal = t.X[t.labels == 0]
    det = HELM(hidden_sizes=(16,), classifier_size=64).fit(normal[:80]).calibrate(normal[80:])
    r = det.ratios(t.X)
    assert np.array_equal(det.predict(t.X), (r > 1).astype(int))


def test_write_ratio_csv(tmp_path):
    write_ratio_csv(tmp_path / "r.csv", [3, 4], [0, 2], [0.5, 2.0])
    assert (tmp_path / "r.csv").read_text().splitlines() == ["cycle,fault,ratio", "3,none,0.5", "4,severe,2.0"]


def test_needs_feature_layer():
    with pytest.raises(ValueError):
        HELM(hidden_sizes=()).fit(np.zeros((5, 3)))
