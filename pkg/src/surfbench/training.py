"""Cross-entropy training of the GRU and head with BPTT and Adam.

The scaler and PCA stay fixed; windows are projected once up front and
only the recurrent weights and the softmax head are learned.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import NonFiniteLoss
from .gru import NAMES, GruWeights, gru_backward, gru_forward
from .model import predict
from .preprocessing import project, scale
from .seeding import substream


@dataclass(frozen=True)
class TrainConfig:
    lr: float = 3e-3
    batch: int = 64
    epochs: int = 10
    seed: int = 0
    clip_norm: float = 5.0
    lr_decay: float = 0.85   # multiplicative, per epoch

    def __post_init__(self):
        if not self.lr > 0:
            raise ValueError("lr must be > 0")
        if self.batch < 1 or self.epochs < 1:
            raise ValueError("batch and epochs must be >= 1")
        if not 0 < self.lr_decay <= 1:
            raise ValueError("lr_decay must be in (0, 1]")


@dataclass
class History:
    train_loss: list = field(default_factory=list)
    val_accuracy: list = field(default_factory=list)

    def rows(self):
        return [(i + 1, loss, acc) for i, (loss, acc)
                in enumerate(zip(self.train_loss, self.val_accuracy))]


def features(model, X):
    """Scale and project raw windows (n, W, c) to (n, W, p)."""
    return project(scale(X, model.scaler_mean, model.scaler_std),
                   model.pca_mean, model.pca_components)


def param_list(model):
    """Trainable arrays of ``model`` in a fixed order."""
    return ([model.gru_fwd.arrays()[n] for n in NAMES]
            + [model.gru_bwd.arrays()[n] for n in NAMES]
            + [model.head_w, model.head_b])


def _rebuild(model, params):
    n = len(NAMES)
    fwd = GruWeights(**dict(zip(NAMES, params[:n])))
    bwd = GruWeights(**dict(zip(NAMES, params[n:2 * n])))
    return model.with_weights(fwd, bwd, params[2 * n], params[2 * n + 1])


def loss_and_grads(model, Z, y):
    """Mean cross-entropy over a batch and its gradient per trainable array.

    ``Z`` holds projected windows (B, W, p). Gradients come back in
    :func:`param_list` order, or as ``None`` when the loss is not finite.
    """
    y = np.asarray(y, dtype=int)
    B = len(y)
    hf, cache_f = gru_forward(model.gru_fwd, Z)
    hb, cache_b = gru_forward(model.gru_bwd, Z, reverse=True)
    feat = np.hstack((hf, hb))
    logits = feat @ model.head_w.T + model.head_b
    logits -= logits.max(axis=1, keepdims=True)
    logp = logits - np.log(np.exp(logits).sum(axis=1, keepdims=True))
    loss = -logp[np.arange(B), y].mean()
    if not math.isfinite(loss):
        return float(loss), None

    d_logits = np.exp(logp)
    d_logits[np.arange(B), y] -= 1.0
    d_logits /= B
    d_head_w = d_logits.T @ feat
    d_head_b = d_logits.sum(axis=0)
    d_feat = d_logits @ model.head_w
    H = hf.shape[1]
    gf = gru_backward(model.gru_fwd, cache_f, d_feat[:, :H])
    gb = gru_backward(model.gru_bwd, cache_b, d_feat[:, H:])
    grads = ([gf.arrays()[n] for n in NAMES] + [gb.arrays()[n] for n in NAMES]
             + [d_head_w, d_head_b])
    return float(loss), grads


class Adam:
    def __init__(self, params, lr, beta1=0.9, beta2=0.999, eps=1e-8):
        self.lr, self.beta1, self.beta2, self.eps = lr, beta1, beta2, eps
        self.m = [np.zeros_like(p) for p in params]
        self.v = [np.zeros_like(p) for p in params]
        self.t = 0

    def step(self, params, grads):
        self.t += 1
        c1 = 1.0 - self.beta1 ** self.t
        c2 = 1.0 - self.beta2 ** self.t
        for p, g, m, v in zip(params, grads, self.m, self.v):
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * g * g
            p -= self.lr * (m / c1) / (np.sqrt(v / c2) + self.eps)


def train(model, train_windows, val_windows=None, config=TrainConfig(), log=None):
    """Fit the recurrent weights and head; returns ``(model, history)``.

    ``train_windows`` / ``val_windows`` are :class:`~surfbench.dataset.Windows`
    (or anything with ``X`` and ``y``). The preprocessing inside ``model``
    must already be fitted on the training set. Batches are drawn from a
    seeded shuffle, so a fixed ``config.seed`` gives identical weights.
    """
    K = len(model.class_names)
    y = np.asarray(train_windows.y, dtype=int)
    if len(y) == 0:
        raise ValueError("empty training set")
    if y.min() < 0 or y.max() >= K:
        raise ValueError(f"training labels must lie in [0, {K})")
    Z = features(model, train_windows.X)
    params = [p.copy() for p in param_list(model)]
    opt = Adam(params, config.lr)
    rng = substream(config.seed, "train-shuffle")
    history = History()
    for epoch in range(config.epochs):
        order = rng.permutation(len(y))
        total, seen = 0.0, 0
        for b, start in enumerate(range(0, len(y), config.batch)):
            idx = order[start:start + config.batch]
            loss, grads = loss_and_grads(_rebuild(model, params), Z[idx], y[idx])
            if not math.isfinite(loss):
                raise NonFiniteLoss(epoch + 1, b, loss)
            norm = math.sqrt(sum(float(np.sum(g * g)) for g in grads))
            if not math.isfinite(norm):
                raise NonFiniteLoss(epoch + 1, b, loss)
            if norm > config.clip_norm:
                grads = [g * (config.clip_norm / norm) for g in grads]
            opt.step(params, grads)
            total += loss * len(idx)
            seen += len(idx)
        opt.lr *= config.lr_decay
        current = _rebuild(model, params)
        history.train_loss.append(total / seen)
        if val_windows is not None and len(val_windows.y):
            acc = float(np.mean(predict(current, val_windows.X) == val_windows.y))
        else:
            acc = float("nan")
        history.val_accuracy.append(acc)
        if log:
            log(f"epoch {epoch + 1:3d}  loss {total / seen:.4f}  val_acc {acc:.4f}")
    return _rebuild(model, params), history
