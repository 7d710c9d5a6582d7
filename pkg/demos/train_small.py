"""Train a small classifier on a reduced corpus and stream one test episode.

Uses 10 episodes per surface so it finishes in about a minute;
the full experiment uses 40 episodes and the default settings.

Run: python demos/train_small.py
"""
import numpy as np

from surfbench.dataset import generate_corpus, split, window_dataset
from surfbench.dynamics import PRESETS
from surfbench.evaluation import evaluate
from surfbench.pipeline import PipelineConfig, fit_pipeline
from surfbench.streaming import stream_classify
from surfbench.training import TrainConfig

ds = generate_corpus(PRESETS, episodes_per_class=10, duration=8.0, seed=1)
train_ds, test_ds = split(ds, 0.25, seed=1)
config = PipelineConfig(train=TrainConfig(epochs=12))
model, history = fit_pipeline(train_ds, config, seed=1, log=print)
print(model.summary())

report = evaluate(model, window_dataset(test_ds, config.window, config.stride))
print(report.matrix())
print(report.table())

# online use: one prediction per sample once 100 samples are buffered
episode = test_ds.episodes[0]
labels = np.array([p.label for p in stream_classify(model, episode.trace)])
print(f"streamed {len(labels)} predictions for a {ds.class_names[episode.label]} episode; "
      f"{np.mean(labels == episode.label):.1%} correct")
