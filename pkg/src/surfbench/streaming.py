"""Sample-by-sample classification over a sliding FIFO of the last W samples."""
from __future__ import annotations

from collections import deque
from dataclasses import dataclass

import numpy as np

from .errors import NonMonotonicTime
from .imu import ImuSample
from .model import classify_window


@dataclass(frozen=True)
class Prediction:
    t: float
    label: int
    probabilities: np.ndarray


class StreamClassifier:
    """Stateful single-consumer classifier; feed samples with :meth:`push`."""

    def __init__(self, model):
        self.model = model
        self.queue = deque(maxlen=model.window)
        self.last_t = None

    def push(self, t, values):
        """Add one sample; returns a :class:`Prediction` once the queue is full."""
        t = float(t)
        if self.last_t is not None and t < self.last_t:
            raise NonMonotonicTime(f"sample at t={t!r} arrived after t={self.last_t!r}")
        self.last_t = t
        row = np.asarray(values, dtype=float).reshape(-1)
        if row.shape != (self.model.n_channels,):
            raise ValueError(f"expected {self.model.n_channels} channel values, got {row.shape}")
        self.queue.append(row)
        if len(self.queue) < self.model.window:
            return None
        probs = classify_window(self.model, np.array(self.queue))
        return Prediction(t, int(np.argmax(probs)), probs)

    def reset(self):
        self.queue.clear()
        self.last_t = None


def _as_rows(samples):
    for s in samples:
        if isinstance(s, ImuSample):
            yield s.t, np.concatenate((s.acc, s.gyr))
        else:
            s = np.asarray(s, dtype=float)
            yield s[0], s[1:]


def stream_classify(model, samples):
    """Yield a :class:`Prediction` for every sample after the first W - 1.

    ``samples`` may be :class:`~surfbench.imu.ImuSample` objects, an
    :class:`~surfbench.imu.ImuTrace`, or rows ``(t, ax, ay, az, gx, gy, gz)``.
    """
    clf = StreamClassifier(model)
    for t, values in _as_rows(samples):
        out = clf.push(t, values)
        if out is not None:
            yield out
