import json

import numpy as np
import pytest

from surfbench.errors import IncompatibleModel
from surfbench.gru import gru_forward
from surfbench.model import (classify_batch, classify_window, from_dict, load_model, predict,
                             save_model, to_dict)
from surfbench.training import features

from conftest import tiny_model


def numpy_reference(model, X):
    Z = features(model, X)
    hf = gru_forward(model.gru_fwd, Z)[0]
    hb = gru_forward(model.gru_bwd, Z, reverse=True)[0]
    logits = np.hstack((hf, hb)) @ model.head_w.T + model.head_b
    e = np.exp(logits - logits.max(1, keepdims=True))
    return e / e.sum(1, keepdims=True)


def test_kernel_matches_numpy_reference(rng):
    model = tiny_model()
    X = rng.normal(size=(5, 20, 6))
    np.testing.assert_allclose(classify_batch(model, X), numpy_reference(model, X),
                               rtol=0, atol=1e-13)


def test_zero_head_gives_uniform_probabilities(rng):
    model = tiny_model(classes=4)
    model = model.with_weights(model.gru_fwd, model.gru_bwd, np.zeros_like(model.head_w),
                               np.zeros(4))
    np.testing.assert_array_equal(classify_window(model, rng.normal(size=(20, 6))), 0.25)


def test_probabilities_sum_to_one(rng):
    P = classify_batch(tiny_model(), 50 * rng.normal(size=(8, 20, 6)))
    np.testing.assert_allclose(P.sum(1), 1.0, atol=1e-14)
    assert np.all(P >= 0)


def test_affine_rescale_absorbed_by_scaler(rng):
    model = tiny_model()
    X = rng.normal(size=(4, 20, 6))
    gain = np.array([2.0, 0.5, 1.0, 4.0, 0.25, 3.0])
    shift = np.array([1.0, -2.0, 0.5, 3.0, 0.0, -1.0])
    moved = type(model)(gain * model.scaler_mean + shift, gain * model.scaler_std, model.pca_mean,
                        model.pca_components, model.gru_fwd, model.gru_bwd, model.head_w,
                        model.head_b, model.class_names, model.window)
    np.testing.assert_allclose(classify_batch(moved, gain * X + shift), classify_batch(model, X),
                               atol=1e-12)


def test_time_reversal_swaps_directions(rng):
    model = tiny_model(hidden=5)
    H = 5
    swapped_head = np.hstack((model.head_w[:, H:], model.head_w[:, :H]))
    mirror = model.with_weights(model.gru_bwd, model.gru_fwd, swapped_head, model.head_b)
    X = rng.normal(size=(3, 20, 6))
    np.testing.assert_allclose(classify_batch(mirror, X[:, ::-1]), classify_batch(model, X),
                               atol=1e-14)


def test_batch_equals_single_window_bitwise(rng):
    model = tiny_model()
    X = rng.normal(size=(6, 20, 6))
    P = classify_batch(model, X)
    for i in range(6):
        assert np.array_equal(classify_window(model, X[i]), P[i])


def test_json_roundtrip_is_bit_exact(tmp_path, rng):
    model = tiny_model(seed=3)
    path = save_model(model, tmp_path / "m.json")
    back = load_model(path)
    for name in ("scaler_mean", "scaler_std", "pca_mean", "pca_components", "head_w", "head_b"):
        assert np.array_equal(getattr(model, name), getattr(back, name))
    for a, b in ((model.gru_fwd, back.gru_fwd), (model.gru_bwd, back.gru_bwd)):
        for name, arr in a.arrays().items():
            assert np.array_equal(arr, b.arrays()[name])
    X = rng.normal(size=(4, 20, 6))
    assert np.array_equal(classify_batch(model, X), classify_batch(back, X))
    assert back.class_names == model.class_names and back.config == model.config
    assert json.loads(path.read_text())["config"]["hidden"] == 4


def test_incompatible_inputs(tmp_path, rng):
    model = tiny_model()
    with pytest.raises(IncompatibleModel):
        classify_batch(model, rng.normal(size=(2, 21, 6)))
    with pytest.raises(IncompatibleModel):
        predict(model, rng.normal(size=(2, 20, 5)))
    doc = to_dict(model)
    with pytest.raises(IncompatibleModel):
        from_dict({**doc, "version": 99})
    with pytest.raises(IncompatibleModel):
        from_dict({**doc, "format": "other"})
    broken = json.loads(json.dumps(doc))
    del broken["arrays"]["head_b"]
    with pytest.raises(IncompatibleModel):
        from_dict(broken)
    broken = json.loads(json.dumps(doc))
    broken["arrays"]["head_w"]["data"].pop()
    with pytest.raises(IncompatibleModel):
        from_dict(broken)
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    with pytest.raises(IncompatibleModel):
        load_model(bad)


def test_validation_catches_bad_preprocessing():
    model = tiny_model()
    comps = model.pca_components.copy()
    comps[0] *= 2
    with pytest.raises(IncompatibleModel):
        type(model)(model.scaler_mean, model.scaler_std, model.pca_mean, comps, model.gru_fwd,
                    model.gru_bwd, model.head_w, model.head_b, model.class_names)
    with pytest.raises(IncompatibleModel):
        type(model)(model.scaler_mean, -model.scaler_std, model.pca_mean,
                    model.pca_components, model.gru_fwd, model.gru_bwd, model.head_w,
                    model.head_b, model.class_names)


def test_summary_mentions_shape():
    assert "W=20 p=4 H=4 K=3" in tiny_model().summary()
