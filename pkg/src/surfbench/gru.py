"""Gated recurrent unit: single-step cell, batched forward pass and BPTT.

Gate convention (fixed throughout the package)::

    z  = sigmoid(w_z x + u_z h_prev + b_z)
    r  = sigmoid(w_r x + u_r h_prev + b_r)
    h~ = tanh(w_h x + u_h (r * h_prev) + b_h)
    h  = (1 - z) * h_prev + z * h~

so ``z -> 0`` keeps the previous state.
"""
from __future__ import annotations

from dataclasses import dataclass, fields

import numpy as np

NAMES = ("w_z", "w_r", "w_h", "u_z", "u_r", "u_h", "b_z", "b_r", "b_h")


def sigmoid(a):
    # split by sign so exp never overflows
    out = np.empty_like(a)
    pos = a >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-a[pos]))
    e = np.exp(a[~pos])
    out[~pos] = e / (1.0 + e)
    return out


@dataclass
class GruWeights:
    w_z: np.ndarray
    w_r: np.ndarray
    w_h: np.ndarray
    u_z: np.ndarray
    u_r: np.ndarray
    u_h: np.ndarray
    b_z: np.ndarray
    b_r: np.ndarray
    b_h: np.ndarray

    def __post_init__(self):
        for f in fields(self):
            setattr(self, f.name, np.ascontiguousarray(getattr(self, f.name), dtype=float))
        H, p = self.w_z.shape
        for name in NAMES:
            a = getattr(self, name)
            want = (H, p) if name[0] == "w" else (H, H) if name[0] == "u" else (H,)
            if a.shape != want:
                raise ValueError(f"{name} has shape {a.shape}, expected {want}")
            if not np.all(np.isfinite(a)):
                raise ValueError(f"{name} contains non-finite entries")

    @property
    def hidden(self):
        return self.w_z.shape[0]

    @property
    def inputs(self):
        return self.w_z.shape[1]

    def arrays(self):
        return {name: getattr(self, name) for name in NAMES}

    @classmethod
    def zeros(cls, H, p):
        return cls(*(np.zeros((H, p) if n[0] == "w" else (H, H) if n[0] == "u" else H)
                     for n in NAMES))

    def stacked(self):
        """(3, H, p), (3, H, H), (3, H) arrays in z, r, h order."""
        return (np.stack([self.w_z, self.w_r, self.w_h]),
                np.stack([self.u_z, self.u_r, self.u_h]),
                np.stack([self.b_z, self.b_r, self.b_h]))


def init_gru(H, p, rng):
    """Uniform init in ``+-sqrt(1 / fan_in)``; fan_in is p for w_*, H otherwise."""
    kw, ku = np.sqrt(1.0 / p), np.sqrt(1.0 / H)
    arrays = {}
    for name in NAMES:
        shape = (H, p) if name[0] == "w" else (H, H) if name[0] == "u" else (H,)
        k = kw if name[0] == "w" else ku
        arrays[name] = rng.uniform(-k, k, size=shape)
    return GruWeights(**arrays)


def gru_cell(weights, x, h_prev):
    """One GRU step for a single input vector (or a batch along axis 0)."""
    w = weights
    x = np.asarray(x, dtype=float)
    h_prev = np.asarray(h_prev, dtype=float)
    z = sigmoid(x @ w.w_z.T + h_prev @ w.u_z.T + w.b_z)
    r = sigmoid(x @ w.w_r.T + h_prev @ w.u_r.T + w.b_r)
    h_tilde = np.tanh(x @ w.w_h.T + (r * h_prev) @ w.u_h.T + w.b_h)
    return (1.0 - z) * h_prev + z * h_tilde


def gru_forward(weights, X, reverse=False):
    """Run a batch of sequences ``X`` (B, T, p) from a zero state.

    Returns the final hidden state (B, H) and a cache for
    :func:`gru_backward`. With ``reverse`` the sequence is read from the
    last step to the first.
    """
    w = weights
    X = np.asarray(X, dtype=float)
    if reverse:
        X = X[:, ::-1]
    B, T, _ = X.shape
    H = w.hidden
    xz = X @ w.w_z.T + w.b_z
    xr = X @ w.w_r.T + w.b_r
    xh = X @ w.w_h.T + w.b_h
    hs = np.zeros((B, T + 1, H))
    zs = np.empty((B, T, H))
    rs = np.empty((B, T, H))
    ns = np.empty((B, T, H))
    h = hs[:, 0]
    for t in range(T):
        z = sigmoid(xz[:, t] + h @ w.u_z.T)
        r = sigmoid(xr[:, t] + h @ w.u_r.T)
        n = np.tanh(xh[:, t] + (r * h) @ w.u_h.T)
        h = (1.0 - z) * h + z * n
        zs[:, t], rs[:, t], ns[:, t], hs[:, t + 1] = z, r, n, h
    return h, (X, hs, zs, rs, ns)


def gru_backward(weights, cache, dh):
    """Gradients of a scalar loss w.r.t. the weights, given dL/dh_final."""
    w = weights
    X, hs, zs, rs, ns = cache
    B, T, _ = X.shape
    H = w.hidden
    da_z = np.empty((B, T, H))
    da_r = np.empty((B, T, H))
    da_h = np.empty((B, T, H))
    dh = np.array(dh, dtype=float)
    for t in range(T - 1, -1, -1):
        h_prev, z, r, n = hs[:, t], zs[:, t], rs[:, t], ns[:, t]
        dn = dh * z
        dz = dh * (n - h_prev)
        dh = dh * (1.0 - z)
        a_h = dn * (1.0 - n * n)
        drh = a_h @ w.u_h
        a_z = dz * z * (1.0 - z)
        a_r = drh * h_prev * r * (1.0 - r)
        dh += drh * r + a_z @ w.u_z + a_r @ w.u_r
        da_z[:, t], da_r[:, t], da_h[:, t] = a_z, a_r, a_h
    Xf = X.reshape(B * T, -1)
    Hp = hs[:, :T].reshape(B * T, H)
    RH = (rs * hs[:, :T]).reshape(B * T, H)
    flat = {k: v.reshape(B * T, H) for k, v in (("z", da_z), ("r", da_r), ("h", da_h))}
    return GruWeights(
        w_z=flat["z"].T @ Xf, w_r=flat["r"].T @ Xf, w_h=flat["h"].T @ Xf,
        u_z=flat["z"].T @ Hp, u_r=flat["r"].T @ Hp, u_h=flat["h"].T @ RH,
        b_z=flat["z"].sum(0), b_r=flat["r"].sum(0), b_h=flat["h"].sum(0),
    )
