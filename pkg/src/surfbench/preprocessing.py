"""Standard scaling and PCA fitted on training windows."""
import numpy as np

from .errors import DegenerateChannel


def _rows(data):
    """Stack windows (n, w, c), a matrix (n, c) or a list of either into rows."""
    if isinstance(data, (list, tuple)):
        data = np.concatenate([np.asarray(d, dtype=float).reshape(-1, np.shape(d)[-1])
                               for d in data])
    data = np.asarray(data, dtype=float)
    return data.reshape(-1, data.shape[-1])


def fit_scaler(data):
    """Per-channel mean and population standard deviation over all rows."""
    X = _rows(data)
    if len(X) < 2:
        raise ValueError("need at least 2 samples to fit a scaler")
    mean = X.mean(axis=0)
    std = X.std(axis=0)
    flat = np.flatnonzero(~(std > 0))
    if len(flat):
        raise DegenerateChannel(flat.tolist())
    return mean, std


def scale(data, mean, std):
    return (np.asarray(data, dtype=float) - mean) / std


def fit_pca(data, p=0.99):
    """Principal axes of the channel covariance, largest variance first.

    ``p`` is either a component count or, if a float in (0, 1], the
    variance fraction to keep (the smallest count reaching it). Returns
    ``(mean, components, eigenvalues)`` where ``components`` is (p, c) with
    orthonormal rows and ``eigenvalues`` is the full descending spectrum of
    the population covariance.

    Each axis is signed so its largest-magnitude entry is positive, which
    keeps the projection stable when the same data is refitted.
    """
    X = _rows(data)
    n, c = X.shape
    if n <= c:
        raise ValueError(f"need more than {c} rows to fit PCA, got {n}")
    mean = X.mean(axis=0)
    Xc = X - mean
    cov = Xc.T @ Xc / n
    vals, vecs = np.linalg.eigh(cov)
    order = np.argsort(vals)[::-1]
    vals = np.clip(vals[order], 0.0, None)
    vecs = vecs[:, order].T
    pivot = np.argmax(np.abs(vecs), axis=1)
    vecs *= np.sign(vecs[np.arange(c), pivot])[:, None]
    k = n_components(vals, p)
    return mean, np.ascontiguousarray(vecs[:k]), vals


def n_components(eigenvalues, p):
    """Resolve ``p`` (count or variance fraction) against a spectrum."""
    vals = np.asarray(eigenvalues, dtype=float)
    if isinstance(p, (int, np.integer)) and not isinstance(p, bool):
        if not 1 <= p <= len(vals):
            raise ValueError(f"component count must be in [1, {len(vals)}], got {p}")
        return int(p)
    f = float(p)
    if not 0 < f <= 1:
        raise ValueError(f"variance fraction must be in (0, 1], got {p}")
    ratio = np.cumsum(vals) / vals.sum()
    # guard against the last cumulative ratio landing a hair below 1.0
    return int(min(np.searchsorted(ratio, f - 1e-12) + 1, len(vals)))


def project(data, mean, components):
    return (np.asarray(data, dtype=float) - mean) @ components.T


def explained_variance_ratio(eigenvalues):
    vals = np.asarray(eigenvalues, dtype=float)
    return vals / vals.sum()
