import numpy as np
import pytest

from aimlab.core import FEATURE_DIM, FeatureSet
from aimlab.detector import DetectorConfig, l2_penalty, load_detector, save_detector, train_detector
from aimlab.metrics import eer
from aimlab.nn import Mlp

TINY = DetectorConfig(hidden=32, epochs=8)


def feature_set(rng, n=400, shift=1.0, cheat_fraction=0.3):
    label = (rng.random(n) < cheat_fraction).astype(np.int64)
    x = rng.normal(size=(n, FEATURE_DIM))
    x[:, :5] += shift * label[:, None]
    gid = np.array([f"g{i % 20}" for i in range(n)], dtype=object)
    return FeatureSet(x, rng.integers(0, 2, n), label, gid)


def test_l2_penalty_form():
    net = Mlp.build([3, 2], ["linear"], np.random.default_rng(0))
    net.layers[0].weight[:] = [[1.0, 2.0], [0.0, -1.0], [0.5, 0.5]]
    loss, grads = l2_penalty(net, 0.1)
    assert loss == pytest.approx(0.05 * (1 + 4 + 1 + 0.25 + 0.25))
    np.testing.assert_allclose(grads[0], 0.1 * net.layers[0].weight)
    assert np.all(grads[1] == 0.0)


def test_learns_separable_features():
    rng = np.random.default_rng(1)
    model, log = train_detector(feature_set(rng, n=1000, shift=2.0), TINY, seed=0)
    test = feature_set(rng, shift=2.0)
    assert eer(model.score(test), test.label) < 0.1
    assert log["class_weights"][1] > log["class_weights"][0]
    assert log["final_val_loss"] is not None


def test_score_is_logit_difference():
    rng = np.random.default_rng(2)
    model, _ = train_detector(feature_set(rng), TINY, seed=0)
    fs = feature_set(rng, n=10)
    out = model.logits(fs)
    np.testing.assert_allclose(model.score(fs), out[:, 1] - out[:, 0])
    np.testing.assert_array_equal(model.predict(fs), (out[:, 1] > out[:, 0]).astype(int))


def test_training_is_deterministic_and_round_trips(tmp_path):
    data = feature_set(np.random.default_rng(3))
    a, la = train_detector(data, TINY, seed=5)
    b, lb = train_detector(data, TINY, seed=5)
    assert la == lb
    save_detector(a, tmp_path / "a", TINY, la)
    save_detector(b, tmp_path / "b", TINY, lb)
    for suffix in (".ckpt", ".json"):
        assert (tmp_path / f"a{suffix}").read_bytes() == (tmp_path / f"b{suffix}").read_bytes()
    back = load_detector(tmp_path / "a")
    np.testing.assert_array_equal(back.score(data), a.score(data))


def test_single_class_rejected():
    data = feature_set(np.random.default_rng(4), cheat_fraction=0.0)
    with pytest.raises(ValueError):
        train_detector(data, TINY)
