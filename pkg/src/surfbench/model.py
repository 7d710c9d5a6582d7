"""The trained classifier: scaler, PCA, bidirectional GRU and softmax head.

Inference runs in one compiled kernel that handles a window at a time with
a fixed operation order. Batch and streaming classification therefore
produce bit-identical probabilities for the same window.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numba
import numpy as np

from .errors import IncompatibleModel
from .gru import NAMES, GruWeights, init_gru
from .imu import CHANNELS

FORMAT = "surfbench-pipeline"
VERSION = 1


@dataclass
class PipelineModel:
    scaler_mean: np.ndarray
    scaler_std: np.ndarray
    pca_mean: np.ndarray
    pca_components: np.ndarray
    gru_fwd: GruWeights
    gru_bwd: GruWeights
    head_w: np.ndarray
    head_b: np.ndarray
    class_names: tuple
    window: int = 100

    def __post_init__(self):
        for name in ("scaler_mean", "scaler_std", "pca_mean", "pca_components",
                     "head_w", "head_b"):
            setattr(self, name, np.ascontiguousarray(getattr(self, name), dtype=float))
        self.class_names = tuple(self.class_names)
        self.validate()

    @property
    def config(self):
        """(W, p, H, K)."""
        return (self.window, self.pca_components.shape[0], self.gru_fwd.hidden,
                len(self.class_names))

    @property
    def n_channels(self):
        return self.scaler_mean.shape[0]

    def validate(self):
        W, p, H, K = self.config
        c = self.n_channels
        if W < 2:
            raise IncompatibleModel(f"window length {W} < 2")
        for name, shape in (("scaler_std", (c,)), ("pca_mean", (c,)),
                            ("pca_components", (p, c)), ("head_w", (K, 2 * H)),
                            ("head_b", (K,))):
            if getattr(self, name).shape != shape:
                raise IncompatibleModel(f"{name} has shape {getattr(self, name).shape}, "
                                        f"expected {shape}")
        for gw in (self.gru_fwd, self.gru_bwd):
            if (gw.hidden, gw.inputs) != (H, p):
                raise IncompatibleModel(f"GRU is {gw.hidden}x{gw.inputs}, expected {H}x{p}")
        if not np.all(self.scaler_std > 0):
            raise IncompatibleModel("scaler_std must be strictly positive")
        gram = self.pca_components @ self.pca_components.T
        if not np.allclose(gram, np.eye(p), rtol=0, atol=1e-8):
            raise IncompatibleModel("pca_components rows are not orthonormal")
        if K < 2:
            raise IncompatibleModel("need at least 2 classes")

    def with_weights(self, gru_fwd, gru_bwd, head_w, head_b):
        return PipelineModel(self.scaler_mean, self.scaler_std, self.pca_mean,
                             self.pca_components, gru_fwd, gru_bwd, head_w, head_b,
                             self.class_names, self.window)

    def summary(self):
        W, p, H, K = self.config
        n_params = 2 * sum(a.size for a in self.gru_fwd.arrays().values())
        n_params += self.head_w.size + self.head_b.size
        return (f"PipelineModel W={W} p={p} H={H} K={K} params={n_params} "
                f"classes={list(self.class_names)}")


def init_model(scaler, pca, class_names, hidden=32, window=100, seed=0, rng=None):
    """Fresh model around fitted preprocessing; ``pca`` is ``(mean, components)``."""
    rng = rng if rng is not None else np.random.default_rng(seed)
    mean, std = scaler
    pca_mean, comps = pca[0], pca[1]
    p = comps.shape[0]
    K = len(class_names)
    fwd = init_gru(hidden, p, rng)
    bwd = init_gru(hidden, p, rng)
    k = math.sqrt(1.0 / (2 * hidden))
    head_w = rng.uniform(-k, k, size=(K, 2 * hidden))
    head_b = rng.uniform(-k, k, size=K)
    return PipelineModel(mean, std, pca_mean, comps, fwd, bwd, head_w, head_b,
                         class_names, window)


# --- inference ---------------------------------------------------------------

@numba.njit(cache=True)
def _sigmoid(a):
    if a >= 0.0:
        return 1.0 / (1.0 + math.exp(-a))
    e = math.exp(a)
    return e / (1.0 + e)


@numba.njit(cache=True)
def _run_gru(Z, Wg, Ug, Bg, reverse, h):
    T, p = Z.shape
    H = h.shape[0]
    z = np.empty(H)
    r = np.empty(H)
    rh = np.empty(H)
    for i in range(H):
        h[i] = 0.0
    for s in range(T):
        t = T - 1 - s if reverse else s
        for i in range(H):
            az = Bg[0, i]
            ar = Bg[1, i]
            for j in range(p):
                az += Wg[0, i, j] * Z[t, j]
                ar += Wg[1, i, j] * Z[t, j]
            for j in range(H):
                az += Ug[0, i, j] * h[j]
                ar += Ug[1, i, j] * h[j]
            z[i] = _sigmoid(az)
            r[i] = _sigmoid(ar)
        for j in range(H):
            rh[j] = r[j] * h[j]
        for i in range(H):
            an = Bg[2, i]
            for j in range(p):
                an += Wg[2, i, j] * Z[t, j]
            for j in range(H):
                an += Ug[2, i, j] * rh[j]
            # h is still needed by later rows, so stash the new state in z
            z[i] = (1.0 - z[i]) * h[i] + z[i] * math.tanh(an)
        for i in range(H):
            h[i] = z[i]


@numba.njit(cache=True)
def _infer(X, s_mean, s_std, p_mean, comps, Wf, Uf, Bf, Wb, Ub, Bb, head_w, head_b, out):
    N, T, C = X.shape
    p = comps.shape[0]
    H = Uf.shape[1]
    K = head_w.shape[0]
    Z = np.empty((T, p))
    feat = np.empty(2 * H)
    hf = np.empty(H)
    hb = np.empty(H)
    logits = np.empty(K)
    for n in range(N):
        for t in range(T):
            for k in range(p):
                acc = 0.0
                for c in range(C):
                    acc += ((X[n, t, c] - s_mean[c]) / s_std[c] - p_mean[c]) * comps[k, c]
                Z[t, k] = acc
        _run_gru(Z, Wf, Uf, Bf, False, hf)
        _run_gru(Z, Wb, Ub, Bb, True, hb)
        for i in range(H):
            feat[i] = hf[i]
            feat[H + i] = hb[i]
        top = -np.inf
        for k in range(K):
            a = head_b[k]
            for i in range(2 * H):
                a += head_w[k, i] * feat[i]
            logits[k] = a
            if a > top:
                top = a
        total = 0.0
        for k in range(K):
            logits[k] = math.exp(logits[k] - top)
            total += logits[k]
        for k in range(K):
            out[n, k] = logits[k] / total


def _kernel_args(model):
    return (model.scaler_mean, model.scaler_std, model.pca_mean, model.pca_components,
            *model.gru_fwd.stacked(), *model.gru_bwd.stacked(), model.head_w, model.head_b)


def classify_batch(model, windows):
    """Class probabilities (n, K) for windows shaped (n, W, channels)."""
    X = np.ascontiguousarray(windows, dtype=float)
    if X.ndim != 3 or X.shape[1:] != (model.window, model.n_channels):
        raise IncompatibleModel(f"windows of shape {X.shape[1:]} do not match the model's "
                                f"{(model.window, model.n_channels)}")
    out = np.empty((X.shape[0], len(model.class_names)))
    _infer(X, *_kernel_args(model), out)
    return out


def classify_window(model, window):
    """Class probabilities (K,) for one (W, channels) window."""
    return classify_batch(model, np.asarray(window, dtype=float)[None])[0]


def predict(model, windows):
    return np.argmax(classify_batch(model, windows), axis=1)


# --- serialization -----------------------------------------------------------

def _pack(a):
    a = np.asarray(a, dtype=float)
    return {"shape": list(a.shape), "data": a.reshape(-1).tolist()}


def _unpack(entry, name):
    try:
        shape = tuple(int(s) for s in entry["shape"])
        data = np.array(entry["data"], dtype=float)
    except (KeyError, TypeError, ValueError) as exc:
        raise IncompatibleModel(f"array {name!r} is malformed: {exc}") from None
    if data.size != math.prod(shape):
        raise IncompatibleModel(f"array {name!r} has {data.size} values for shape {shape}")
    return data.reshape(shape)


def to_dict(model):
    W, p, H, K = model.config
    arrays = {name: _pack(getattr(model, name))
              for name in ("scaler_mean", "scaler_std", "pca_mean", "pca_components",
                           "head_w", "head_b")}
    for prefix, gw in (("gru_fwd", model.gru_fwd), ("gru_bwd", model.gru_bwd)):
        for name, a in gw.arrays().items():
            arrays[f"{prefix}.{name}"] = _pack(a)
    return {
        "format": FORMAT,
        "version": VERSION,
        "config": {"window": W, "components": p, "hidden": H, "classes": K,
                   "channels": list(CHANNELS[:model.n_channels])},
        "class_names": list(model.class_names),
        "arrays": arrays,
    }


def from_dict(doc):
    if doc.get("format") != FORMAT:
        raise IncompatibleModel(f"not a {FORMAT} document (format={doc.get('format')!r})")
    if doc.get("version") != VERSION:
        raise IncompatibleModel(f"unsupported model version {doc.get('version')!r}")
    arrays = doc.get("arrays", {})

    def get(name):
        if name not in arrays:
            raise IncompatibleModel(f"model file lacks array {name!r}")
        return _unpack(arrays[name], name)

    try:
        fwd = GruWeights(**{n: get(f"gru_fwd.{n}") for n in NAMES})
        bwd = GruWeights(**{n: get(f"gru_bwd.{n}") for n in NAMES})
    except ValueError as exc:
        raise IncompatibleModel(str(exc)) from None
    cfg = doc.get("config", {})
    model = PipelineModel(get("scaler_mean"), get("scaler_std"), get("pca_mean"),
                          get("pca_components"), fwd, bwd, get("head_w"), get("head_b"),
                          doc.get("class_names", ()), int(cfg.get("window", 100)))
    W, p, H, K = model.config
    if (cfg.get("components"), cfg.get("hidden"), cfg.get("classes")) != (p, H, K):
        raise IncompatibleModel("config block disagrees with the array shapes")
    return model


def save_model(model, path):
    # json writes floats with repr, so every weight survives a reload bit for bit
    with open(path, "w") as f:
        json.dump(to_dict(model), f)
        f.write("\n")
    return path


def load_model(path):
    with open(path) as f:
        try:
            doc = json.load(f)
        except json.JSONDecodeError as exc:
            raise IncompatibleModel(f"{path} is not valid JSON: {exc}") from None
    return from_dict(doc)
