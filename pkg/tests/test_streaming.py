import numpy as np
import pytest

from surfbench.errors import NonMonotonicTime
from surfbench.imu import ImuTrace
from surfbench.model import classify_batch
from surfbench.streaming import StreamClassifier, stream_classify

from conftest import tiny_model


def rows(n, seed=0):
    rng = np.random.default_rng(seed)
    return np.column_stack((np.arange(n) / 200.0, rng.normal(size=(n, 6))))


@pytest.mark.parametrize("n, expected", [(19, 0), (20, 1), (70, 51)])
def test_prediction_count(n, expected):
    assert len(list(stream_classify(tiny_model(window=20), rows(n)))) == expected


def test_window_100_counts():
    model = tiny_model(window=100)
    assert len(list(stream_classify(model, rows(99)))) == 0
    assert len(list(stream_classify(model, rows(150)))) == 51


def test_stream_equals_batch_stride_one():
    model = tiny_model(window=20)
    data = rows(80)
    preds = list(stream_classify(model, data))
    windows = np.lib.stride_tricks.sliding_window_view(data[:, 1:], 20, axis=0)
    P = classify_batch(model, windows.transpose(0, 2, 1))
    assert len(preds) == len(P)
    for i, pr in enumerate(preds):
        assert np.array_equal(pr.probabilities, P[i])
        assert pr.label == int(np.argmax(P[i]))
        assert pr.t == data[i + 19, 0]


def test_accepts_traces_and_samples():
    model = tiny_model(window=20)
    data = rows(30)
    trace = ImuTrace.from_array(data[:, 0], data[:, 1:])
    a = [p.probabilities for p in stream_classify(model, trace)]
    b = [p.probabilities for p in stream_classify(model, list(trace))]
    c = [p.probabilities for p in stream_classify(model, data)]
    assert all(np.array_equal(x, y) and np.array_equal(x, z) for x, y, z in zip(a, b, c))


def test_time_going_backwards_is_rejected():
    clf = StreamClassifier(tiny_model(window=20))
    clf.push(1.0, np.zeros(6))
    with pytest.raises(NonMonotonicTime):
        clf.push(0.5, np.zeros(6))
    clf.reset()
    assert clf.push(0.5, np.zeros(6)) is None


def test_wrong_channel_count():
    clf = StreamClassifier(tiny_model(window=20))
    with pytest.raises(ValueError):
        clf.push(0.0, np.zeros(5))
