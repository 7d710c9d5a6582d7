"""Plain-text run configuration (INI-style ``key = value`` sections).

Every section and key is optional; anything missing takes the library
default. Example::

    [corpus]
    episodes_per_class = 40
    seed = 42

    [surface Carpet]
    mu = 0.8
    k_n = 3000
    c_n = 200

When any ``[surface NAME]`` section is present, those sections replace
the built-in presets, in file order, and their order fixes the class ids.
"""
from __future__ import annotations

import configparser
import math
import warnings
from dataclasses import dataclass, field, fields

from .dynamics import PRESETS, SurfaceParams
from .errors import ConfigError, InvalidCycle
from .imu import CHANNELS, NoiseSpec
from .kinematics import JumpCycle, LegModel
from .pipeline import PipelineConfig
from .training import TrainConfig

SURFACE_PREFIX = "surface "


@dataclass(frozen=True)
class CorpusConfig:
    episodes_per_class: int = 40
    duration: float = 10.0
    period_min: float = 0.8
    period_max: float = 2.0
    imu_rate: float = 200.0
    workers: int = 1


@dataclass(frozen=True)
class CalibrationConfig:
    init: str = ""                    # preset name; blank means the first surface
    init_scale: float = 1.0           # multiplies every init parameter
    budget: int = 300
    mu_bounds: tuple = (0.02, 3.0)
    k_n_bounds: tuple = (1.0e3, 5.0e5)
    c_n_bounds: tuple = (1.0, 400.0)
    channels: str = "gyr"

    @property
    def bounds(self):
        return {"mu": self.mu_bounds, "k_n": self.k_n_bounds, "c_n": self.c_n_bounds}


@dataclass(frozen=True)
class RunConfig:
    seed: int = 42
    leg: LegModel = field(default_factory=LegModel)
    cycle: JumpCycle = field(default_factory=JumpCycle)
    noise: NoiseSpec = field(default_factory=NoiseSpec)
    surfaces: tuple = PRESETS
    corpus: CorpusConfig = field(default_factory=CorpusConfig)
    pipeline: PipelineConfig = field(default_factory=PipelineConfig)
    test_fraction: float = 0.25
    calibration: CalibrationConfig = field(default_factory=CalibrationConfig)
    columns: dict = field(default_factory=dict)

    @property
    def class_names(self):
        return tuple(s.name for s in self.surfaces)

    def surface(self, name):
        for s in self.surfaces:
            if s.name.lower() == name.lower():
                return s
        raise ConfigError(f"no surface named {name!r}; known: {list(self.class_names)}")

    def validate(self):
        """Range checks that the dataclass constructors do not cover."""
        c = self.corpus
        if c.episodes_per_class < 1:
            raise ConfigError("corpus.episodes_per_class must be >= 1")
        if not c.duration > self.cycle.period:
            raise ConfigError("corpus.duration must exceed cycle.period")
        if not 0 < c.period_min <= c.period_max:
            raise ConfigError("need 0 < corpus.period_min <= corpus.period_max")
        if not c.imu_rate > 0:
            raise ConfigError("corpus.imu_rate must be > 0")
        if c.workers < 1:
            raise ConfigError("corpus.workers must be >= 1")
        p = self.pipeline
        if p.window < 2 or p.stride < 1 or p.hidden < 1:
            raise ConfigError("pipeline window >= 2, stride >= 1 and hidden >= 1 are required")
        if not 0 <= p.val_fraction < 1:
            raise ConfigError("pipeline.val_fraction must be in [0, 1)")
        if not 0 < self.test_fraction < 1:
            raise ConfigError("pipeline.test_fraction must be in (0, 1)")
        if len(self.surfaces) < 2:
            raise ConfigError("need at least two surfaces")
        if len(set(n.lower() for n in self.class_names)) != len(self.surfaces):
            raise ConfigError("surface names must be unique")
        cal = self.calibration
        if cal.budget < 20:
            raise ConfigError("calibration.budget must be >= 20")
        if not cal.init_scale > 0:
            raise ConfigError("calibration.init_scale must be > 0")
        for name, (lo, hi) in cal.bounds.items():
            if not 0 < lo < hi:
                raise ConfigError(f"calibration.{name}_bounds must satisfy 0 < lo < hi")
        if cal.channels not in ("gyr", "acc", "both"):
            raise ConfigError("calibration.channels must be gyr, acc or both")
        if cal.init:
            self.surface(cal.init)
        unknown = set(self.columns) - set(("t",) + CHANNELS + ("label",))
        if unknown:
            raise ConfigError(f"unknown [columns] keys {sorted(unknown)}")
        return self

    def calibration_init(self):
        cal = self.calibration
        base = self.surface(cal.init) if cal.init else self.surfaces[0]
        s = cal.init_scale
        return SurfaceParams(base.mu * s, base.k_n * s, base.c_n * s, base.name)


# --- parsing -----------------------------------------------------------------

def _convert(value, default, where):
    text = value.strip()
    try:
        if isinstance(default, bool):
            low = text.lower()
            if low in ("1", "true", "yes", "on"):
                return True
            if low in ("0", "false", "no", "off"):
                return False
            raise ValueError(text)
        if isinstance(default, int):
            return int(text)
        if isinstance(default, float):
            x = float(text)
            if not math.isfinite(x):
                raise ValueError(text)
            return x
        if isinstance(default, tuple):
            if default and isinstance(default[0], tuple):
                nums = [float(v) for v in text.replace(";", ",").split(",")]
                if len(nums) % 2:
                    raise ValueError(text)
                return tuple(zip(nums[::2], nums[1::2]))
            return tuple(float(v) for v in text.split(","))
    except ValueError:
        raise ConfigError(f"{where}: cannot parse {text!r} as {type(default).__name__}") from None
    return text


def _section(parser, name, cls, base=None, rename=None):
    """Build ``cls`` from ``base`` with keys from section ``name`` overriding."""
    base = base if base is not None else cls()
    if not parser.has_section(name):
        return base
    known = {f.name for f in fields(cls)}
    rename = rename or {}
    changes = {}
    for key, value in parser.items(name):
        attr = rename.get(key, key)
        if attr not in known:
            raise ConfigError(f"[{name}] unknown key {key!r}")
        changes[attr] = _convert(value, getattr(base, attr), f"[{name}] {key}")
    try:
        return cls(**{**{f.name: getattr(base, f.name) for f in fields(cls)}, **changes})
    except (ValueError, InvalidCycle) as exc:
        raise ConfigError(f"[{name}] {exc}") from None


def parse_config(text, source="<config>"):
    parser = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";"))
    parser.optionxform = str
    try:
        parser.read_string(text, source=source)
    except configparser.Error as exc:
        raise ConfigError(f"{source}: {exc}") from None
    allowed = {"run", "leg", "cycle", "noise", "corpus", "pipeline", "train", "calibration",
               "columns"}
    for sec in parser.sections():
        if sec not in allowed and not sec.startswith(SURFACE_PREFIX):
            raise ConfigError(f"{source}: unknown section [{sec}]")

    seed = RunConfig.seed
    if parser.has_section("run"):
        for key, value in parser.items("run"):
            if key != "seed":
                raise ConfigError(f"[run] unknown key {key!r}")
            seed = _convert(value, 0, "[run] seed")
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        cycle = _section(parser, "cycle", JumpCycle)
    leg = _section(parser, "leg", LegModel)
    noise = _section(parser, "noise", NoiseSpec)
    corpus = _section(parser, "corpus", CorpusConfig)
    train = _section(parser, "train", TrainConfig)

    pipe_keys = dict(parser.items("pipeline")) if parser.has_section("pipeline") else {}
    test_fraction = RunConfig.test_fraction
    if "test_fraction" in pipe_keys:
        test_fraction = _convert(pipe_keys.pop("test_fraction"), 0.0, "[pipeline] test_fraction")
    pca_text = pipe_keys.pop("pca", None)
    tmp = configparser.ConfigParser(interpolation=None)
    tmp.optionxform = str
    tmp.read_dict({"pipeline": pipe_keys})
    pipeline = _section(tmp, "pipeline", PipelineConfig)
    if pca_text is not None:
        text = pca_text.strip()
        pca = int(text) if text.isdigit() else _convert(text, 0.0, "[pipeline] pca")
        pipeline = PipelineConfig(**{**pipeline.__dict__, "pca": pca})
    pipeline = PipelineConfig(**{**pipeline.__dict__, "train": train})

    calibration = _section(parser, "calibration", CalibrationConfig)

    surfaces = []
    for sec in parser.sections():
        if sec.startswith(SURFACE_PREFIX):
            name = sec[len(SURFACE_PREFIX):].strip()
            vals = dict(parser.items(sec))
            missing = {"mu", "k_n", "c_n"} - set(vals)
            extra = set(vals) - {"mu", "k_n", "c_n"}
            if missing or extra:
                raise ConfigError(f"[{sec}] needs exactly mu, k_n, c_n "
                                  f"(missing {sorted(missing)}, unknown {sorted(extra)})")
            try:
                surfaces.append(SurfaceParams(
                    **{k: _convert(v, 0.0, f"[{sec}] {k}") for k, v in vals.items()}, name=name))
            except ValueError as exc:
                raise ConfigError(str(exc)) from None
    columns = dict(parser.items("columns")) if parser.has_section("columns") else {}

    cfg = RunConfig(seed=seed, leg=leg, cycle=cycle, noise=noise,
                    surfaces=tuple(surfaces) or PRESETS, corpus=corpus, pipeline=pipeline,
                    test_fraction=test_fraction, calibration=calibration, columns=columns)
    return cfg.validate()


def load_config(path=None):
    """Read a config file; ``None`` gives the validated defaults."""
    if path is None:
        return RunConfig().validate()
    try:
        with open(path) as f:
            text = f.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
    return parse_config(text, str(path))


def _fmt(v):
    if isinstance(v, tuple):
        if v and isinstance(v[0], tuple):
            return ", ".join(f"{a!r}, {b!r}" for a, b in v)
        return ", ".join(repr(x) for x in v)
    return repr(v) if isinstance(v, float) else str(v)


def dump_config(cfg):
    """Render ``cfg`` back to the text format (round-trips through parse)."""
    out = [f"[run]\nseed = {cfg.seed}\n"]
    for name, obj in (("leg", cfg.leg), ("cycle", cfg.cycle), ("noise", cfg.noise),
                      ("corpus", cfg.corpus)):
        out.append(f"[{name}]")
        out += [f"{f.name} = {_fmt(getattr(obj, f.name))}" for f in fields(obj)]
        out.append("")
    p = cfg.pipeline
    out.append("[pipeline]")
    out += [f"{k} = {_fmt(getattr(p, k))}" for k in ("window", "stride", "hidden", "pca",
                                                     "val_fraction")]
    out.append(f"test_fraction = {cfg.test_fraction!r}\n")
    out.append("[train]")
    out += [f"{f.name} = {_fmt(getattr(p.train, f.name))}" for f in fields(p.train)]
    out.append("")
    out.append("[calibration]")
    out += [f"{f.name} = {_fmt(getattr(cfg.calibration, f.name))}"
            for f in fields(cfg.calibration)]
    out.append("")
    for s in cfg.surfaces:
        out.append(f"[{SURFACE_PREFIX}{s.name}]\nmu = {s.mu!r}\nk_n = {s.k_n!r}\nc_n = {s.c_n!r}\n")
    if cfg.columns:
        out.append("[columns]")
        out += [f"{k} = {v}" for k, v in cfg.columns.items()]
        out.append("")
    return "\n".join(out)
