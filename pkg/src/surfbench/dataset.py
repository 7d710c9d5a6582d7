"""Episodes, datasets, CSV persistence, windowing and splitting."""
from __future__ import annotations

import csv
import json
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import InsufficientEpisodes, NonMonotonicTime, ParseError
from .imu import CHANNELS, ImuTrace, NoiseSpec
from .kinematics import JumpCycle, LegModel
from .seeding import substream
from .simulation import IMU_RATE, simulate_episode

WINDOW = 100
STRIDE = 10
PERIOD_RANGE = (0.8, 2.0)
MANIFEST_VERSION = 1
SOURCES = ("simulated", "imported")


@dataclass
class Episode:
    """One continuous recording on a single surface."""

    trace: ImuTrace
    label: int
    source: str = "simulated"
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.source not in SOURCES:
            raise ValueError(f"source must be one of {SOURCES}, got {self.source!r}")
        if int(self.label) != self.label or self.label < 0:
            raise ValueError(f"label must be a non-negative integer, got {self.label!r}")
        self.label = int(self.label)
        check_monotonic(self.trace.t)

    def __len__(self):
        return len(self.trace)


@dataclass
class Dataset:
    episodes: list
    class_names: tuple

    def __post_init__(self):
        self.episodes = list(self.episodes)
        self.class_names = tuple(self.class_names)
        K = len(self.class_names)
        for i, ep in enumerate(self.episodes):
            if not ep.label < K:
                raise ValueError(f"episode {i} has label {ep.label} but only {K} classes exist")

    @property
    def n_classes(self):
        return len(self.class_names)

    @property
    def labels(self):
        return np.array([ep.label for ep in self.episodes], dtype=int)

    def n_samples(self):
        return sum(len(ep) for ep in self.episodes)

    def class_counts(self):
        """Episodes and samples per class, as two K-vectors."""
        K = self.n_classes
        episodes = np.bincount(self.labels, minlength=K) if self.episodes else np.zeros(K, int)
        samples = np.zeros(K, dtype=int)
        for ep in self.episodes:
            samples[ep.label] += len(ep)
        return episodes, samples

    def subset(self, indices):
        return Dataset([self.episodes[i] for i in indices], self.class_names)


@dataclass
class Windows:
    """Labeled fixed-length windows with provenance.

    ``X`` is (n, w, 6); ``episode`` and ``start`` say where each window came
    from so no window can silently straddle two recordings.
    """

    X: np.ndarray
    y: np.ndarray
    episode: np.ndarray
    start: np.ndarray

    def __len__(self):
        return len(self.y)

    @property
    def width(self):
        return self.X.shape[1]

    def subset(self, mask):
        return Windows(self.X[mask], self.y[mask], self.episode[mask], self.start[mask])


def check_monotonic(t):
    t = np.asarray(t, dtype=float)
    bad = np.flatnonzero(np.diff(t) <= 0)
    if len(bad):
        i = int(bad[0])
        raise NonMonotonicTime(
            f"timestamps must be strictly increasing: t[{i}]={t[i]!r} then t[{i + 1}]={t[i + 1]!r}")


# --- CSV ---------------------------------------------------------------------

def save_csv(episode, path):
    """Write an episode (or a bare trace) as ``t,ax,ay,az,gx,gy,gz[,label]``.

    Floats use Python's shortest round-tripping repr, so a reload is exact.
    """
    if isinstance(episode, ImuTrace):
        trace, label = episode, episode.label
    else:
        trace, label = episode.trace, episode.label
    header = ("t",) + CHANNELS + (("label",) if label is not None else ())
    data = np.column_stack((trace.t, trace.data))
    suffix = f",{int(label)}\n" if label is not None else "\n"
    with open(path, "w", newline="") as f:
        f.write(",".join(header) + "\n")
        for row in data.tolist():
            f.write(",".join(map(repr, row)) + suffix)
    return path


def _parse_csv(path, columns=None):
    """Rows of ``t`` + 6 channels and the file's label (None if no column)."""
    names = {c: c for c in ("t",) + CHANNELS + ("label",)}
    if columns:
        unknown = set(columns) - set(names)
        if unknown:
            raise ValueError(f"unknown canonical column(s) {sorted(unknown)}")
        names.update(columns)
    with open(path, newline="") as f:
        reader = csv.reader(f)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise ParseError(1, "empty file, expected a header row") from None
        for key in ("t",) + CHANNELS:
            if names[key] not in header:
                raise ParseError(1, f"missing column {names[key]!r}")
        wanted = [header.index(names[k]) for k in ("t",) + CHANNELS]
        label_col = header.index(names["label"]) if names["label"] in header else None
        rows, labels = [], set()
        for row in reader:
            line = reader.line_num
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != len(header):
                raise ParseError(line, f"expected {len(header)} fields, got {len(row)}")
            try:
                values = [float(row[i]) for i in wanted]
            except ValueError as exc:
                raise ParseError(line, str(exc)) from None
            if not all(math.isfinite(v) for v in values):
                raise ParseError(line, "non-finite value")
            if label_col is not None:
                try:
                    labels.add(int(row[label_col]))
                except ValueError:
                    raise ParseError(line, f"label {row[label_col]!r} is not an integer") from None
            rows.append(values)
    if not rows:
        raise ParseError(2, "no data rows after the header")
    if len(labels) > 1:
        raise ParseError(2, f"more than one label in a single episode: {sorted(labels)}")
    data = np.array(rows)
    check_monotonic(data[:, 0])
    return data, (labels.pop() if labels else None)


def load_csv(path, label=None, columns=None, source="imported", meta=None):
    """Parse an IMU CSV into an :class:`Episode`.

    ``columns`` maps canonical names (``t``, ``ax`` ... ``gz``, ``label``) to
    the headers used in the file, for logs from other tools. The label comes
    from the ``label`` column when present, otherwise from ``label``; when
    both are given they must agree.
    """
    data, found = _parse_csv(path, columns)
    if found is not None:
        if label is not None and label != found:
            raise ValueError(f"label argument {label} disagrees with the file's label {found}")
        label = found
    if label is None:
        raise ValueError(f"{path}: no label column and no label argument")
    trace = ImuTrace.from_array(data[:, 0], data[:, 1:], label=label)
    return Episode(trace, label, source, dict(meta or {}, origin=str(path)))


def load_trace(path, columns=None):
    """Parse an IMU CSV whose label column, if any, is optional."""
    data, found = _parse_csv(path, columns)
    return ImuTrace.from_array(data[:, 0], data[:, 1:], label=found)


# --- windows and splits ------------------------------------------------------

def window_dataset(ds, w=WINDOW, stride=STRIDE):
    """Cut every episode into windows ``[i, i + w)`` with ``i = 0, stride, ...``."""
    if w < 2:
        raise ValueError("window length must be >= 2")
    if stride < 1:
        raise ValueError("stride must be >= 1")
    X, y, ep_idx, starts = [], [], [], []
    for k, ep in enumerate(ds.episodes):
        n = len(ep)
        if n < w:
            continue
        start = np.arange(0, n - w + 1, stride)
        view = np.lib.stride_tricks.sliding_window_view(ep.trace.data, w, axis=0)
        X.append(view[start].transpose(0, 2, 1))
        y.append(np.full(len(start), ep.label))
        ep_idx.append(np.full(len(start), k))
        starts.append(start)
    if not X:
        return Windows(np.empty((0, w, len(CHANNELS))), np.empty(0, int),
                       np.empty(0, int), np.empty(0, int))
    return Windows(np.ascontiguousarray(np.concatenate(X)), np.concatenate(y),
                   np.concatenate(ep_idx), np.concatenate(starts))


def split(ds, test_fraction=0.25, seed=0):
    """Stratified episode-level split; returns ``(train, test)``.

    Each class contributes ``round(test_fraction * n)`` episodes to the test
    side, clipped so both sides keep at least one.
    """
    if not 0 < test_fraction < 1:
        raise ValueError("test_fraction must be in (0, 1)")
    rng = substream(seed, "split")
    labels = ds.labels
    test = []
    for k in range(ds.n_classes):
        members = np.flatnonzero(labels == k)
        if len(members) < 2:
            raise InsufficientEpisodes(
                f"class {ds.class_names[k]!r} has {len(members)} episode(s); need >= 2 to split")
        n_test = min(max(int(round(test_fraction * len(members))), 1), len(members) - 1)
        test.extend(rng.permutation(members)[:n_test].tolist())
    test = sorted(test)
    train = sorted(set(range(len(ds.episodes))) - set(test))
    return ds.subset(train), ds.subset(test)


# --- synthetic corpus --------------------------------------------------------

def _simulate_job(job):
    model, surface, cycle, duration, imu_rate, noise, seed = job
    return simulate_episode(model, surface, cycle, duration, imu_rate, noise, seed)


def corpus_plan(presets, episodes_per_class=40, period_range=PERIOD_RANGE, seed=42):
    """Per-episode ``(label, period, noise seed)`` in (preset, index) order.

    Periods are uniform on ``period_range``; everything comes from one
    seeded stream, so the plan is cheap to inspect without simulating.
    """
    if episodes_per_class < 1:
        raise ValueError("episodes_per_class must be >= 1")
    lo, hi = period_range
    if not 0 < lo <= hi:
        raise ValueError(f"invalid period range {period_range}")
    rng = substream(seed, "corpus")
    plan = []
    for label in range(len(presets)):
        for _ in range(episodes_per_class):
            period = float(rng.uniform(lo, hi))
            plan.append((label, period, int(rng.integers(0, 2 ** 31 - 1))))
    return plan


def generate_corpus(presets, episodes_per_class=40, duration=10.0, period_range=PERIOD_RANGE,
                    seed=42, model=None, cycle=None, noise=None, imu_rate=IMU_RATE, workers=1):
    """Simulate a labeled corpus, one class per surface preset.

    Cycle periods follow :func:`corpus_plan`; all other cycle fields come
    from ``cycle``. Results are assembled in (preset, index) order whatever
    ``workers`` is.
    """
    presets = list(presets)
    if not presets:
        raise ValueError("need at least one surface preset")
    model = model or LegModel()
    cycle = cycle or JumpCycle()
    noise = noise or NoiseSpec()
    plan = corpus_plan(presets, episodes_per_class, period_range, seed)
    jobs = [(model, presets[label], replace(cycle, period=period), duration, imu_rate, noise,
             ep_seed) for label, period, ep_seed in plan]
    if workers > 1:
        with ProcessPoolExecutor(workers) as pool:
            traces = list(pool.map(_simulate_job, jobs, chunksize=4))
    else:
        traces = [_simulate_job(j) for j in jobs]
    episodes = []
    for i, ((label, period, ep_seed), trace) in enumerate(zip(plan, traces)):
        trace.label = label
        meta = {"surface": presets[label].name, "period": period, "seed": ep_seed,
                "index": i % episodes_per_class}
        episodes.append(Episode(trace, label, "simulated", meta))
    return Dataset(episodes, [s.name for s in presets])


# --- manifest ----------------------------------------------------------------

def save_dataset(ds, out_dir, generation=None):
    """Write one CSV per episode plus ``manifest.json``; returns the manifest path."""
    os.makedirs(out_dir, exist_ok=True)
    entries = []
    for k, ep in enumerate(ds.episodes):
        name = f"episode_{k:04d}.csv"
        save_csv(ep, os.path.join(out_dir, name))
        entries.append({"file": name, "label": ep.label, "source": ep.source,
                        "samples": len(ep), "meta": ep.meta})
    manifest = {
        "version": MANIFEST_VERSION,
        "class_names": list(ds.class_names),
        "episodes": entries,
        "generation": generation or {},
    }
    path = os.path.join(out_dir, "manifest.json")
    with open(path, "w") as f:
        json.dump(manifest, f, indent=1)
        f.write("\n")
    return path


def read_manifest(path):
    with open(path) as f:
        try:
            manifest = json.load(f)
        except json.JSONDecodeError as exc:
            raise ParseError(exc.lineno, f"manifest is not valid JSON: {exc.msg}") from None
    if manifest.get("version") != MANIFEST_VERSION:
        raise ValueError(f"unsupported manifest version {manifest.get('version')!r}")
    for key in ("class_names", "episodes"):
        if key not in manifest:
            raise ValueError(f"manifest lacks {key!r}")
    return manifest


def load_dataset(path):
    """Load every episode listed in a manifest written by :func:`save_dataset`."""
    manifest = read_manifest(path)
    root = os.path.dirname(os.path.abspath(path))
    episodes = []
    for entry in manifest["episodes"]:
        ep = load_csv(os.path.join(root, entry["file"]), label=entry["label"],
                      source=entry.get("source", "imported"), meta=entry.get("meta"))
        if ep.source == "simulated":
            ep.meta.pop("origin", None)
        episodes.append(ep)
    return Dataset(episodes, manifest["class_names"])


