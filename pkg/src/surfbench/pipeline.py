"""End-to-end fitting: windows -> scaler -> PCA -> bidirectional GRU."""
from __future__ import annotations

from dataclasses import dataclass, field

from .dataset import STRIDE, WINDOW, split, window_dataset
from .model import init_model
from .preprocessing import fit_pca, fit_scaler
from .seeding import derive_seed, substream
from .training import TrainConfig, train


@dataclass(frozen=True)
class PipelineConfig:
    window: int = WINDOW
    stride: int = STRIDE
    hidden: int = 32
    pca: float = 0.99          # variance fraction, or an int component count
    val_fraction: float = 0.2  # share of training episodes held out for validation
    train: TrainConfig = field(default_factory=TrainConfig)


def fit_pipeline(train_ds, config=PipelineConfig(), seed=0, val_ds=None, log=None):
    """Fit preprocessing on ``train_ds`` and train the classifier.

    When ``val_ds`` is not given, ``config.val_fraction`` of the training
    episodes (per class) are set aside for the per-epoch validation score.
    Returns ``(model, history)``.
    """
    if val_ds is None and config.val_fraction > 0:
        train_ds, val_ds = split(train_ds, config.val_fraction, derive_seed(seed, "val-split"))
    tw = window_dataset(train_ds, config.window, config.stride)
    if len(tw) == 0:
        raise ValueError(f"no training episode is at least {config.window} samples long")
    vw = window_dataset(val_ds, config.window, config.stride) if val_ds is not None else None
    scaler = fit_scaler(tw.X)
    Xs = (tw.X - scaler[0]) / scaler[1]
    pca = fit_pca(Xs, config.pca)
    model = init_model(scaler, pca, train_ds.class_names, config.hidden, config.window,
                       rng=substream(seed, "init"))
    hyper = TrainConfig(**{**config.train.__dict__, "seed": derive_seed(seed, "train")})
    if log:
        log(f"{len(tw)} training windows, {len(vw) if vw else 0} validation windows, "
            f"p={pca[1].shape[0]} components")
    return train(model, tw, vw, hyper, log=log)
