"""Experiment configuration: strict YAML to nested dataclasses and back.

A config file is a mapping with the keys ``kind``, ``seed``, ``out``,
``model``, ``lif``, ``waveform`` and ``experiment``. ``model``, ``lif`` and
``waveform`` override fields of ModelParams, LIFParams and WaveformParams;
``experiment`` holds the settings of the chosen kind. Unknown keys anywhere
are rejected.
"""
from __future__ import annotations

import dataclasses
import hashlib
import json
import types
import typing
from dataclasses import dataclass, field
from pathlib import Path

import yaml

from .device import ModelParams
from .neuron import LIFParams
from .supervised import SequenceConfig, SupervisedConfig
from .unsupervised import MNISTConfig
from .waveform import WaveformParams

KINDS = ("stdp-curve", "energy", "supervised", "sequence", "mnist", "fit")


class ConfigError(ValueError):
    pass


# ----------------------------------------------------- per-kind settings ---

@dataclass
class StdpCurveSettings:
    n_draws: int = 400
    g_initial: float = 1e-6            # S; raised to Gmin when below it
    dt_max: float = 40.0               # draws uniform in [-dt_max, dt_max] ms
    band_edges: tuple = (0.05, 0.16)   # in G0; three bands below, between, above
    near_dt: float = 10.0              # |dt| limit for the band asymmetry summary


@dataclass
class EnergySettings:
    dt_max: float = 40.0
    dt_step: float = 1.0
    conductances: tuple = (0.1,)       # in G0


@dataclass
class SupervisedSettings:
    n_inputs: int = 1000
    duration: float = 1000.0
    input_rate: float = 5.0
    n_desired: int = 5
    min_gap: float = 50.0
    epochs: int = 50
    match_tolerance: float = 10.0
    stop_when_solved: bool = True
    network: SupervisedConfig = field(default_factory=SupervisedConfig)


@dataclass
class SequenceSettings:
    sequence: SequenceConfig = field(default_factory=SequenceConfig)
    snapshot_every: int = 10           # epochs; the final epoch is always saved


@dataclass
class MNISTSettings:
    data_dir: str = "data/mnist"
    train_images: str = "train-images-idx3-ubyte.gz"
    train_labels: str = "train-labels-idx1-ubyte.gz"
    test_images: str = "t10k-images-idx3-ubyte.gz"
    test_labels: str = "t10k-labels-idx1-ubyte.gz"
    mnist: MNISTConfig = field(default_factory=MNISTConfig)


@dataclass
class FitSettings:
    records_csv: str | None = None     # measured records; None synthesizes them
    levels: tuple = (0.03, 0.06, 0.1, 0.2, 0.35)   # synthesis conductances, in G0
    range_halfwidth: float = 0.01      # relative half-width of each binning range
    dt_max: float = 40.0
    dt_step: float = 1.0
    repeats: int = 1                   # synthesized records per (level, dt)
    sigma_fraction: float = 0.0
    smooth_window: int = 3


SETTINGS = {
    "stdp-curve": StdpCurveSettings,
    "energy": EnergySettings,
    "supervised": SupervisedSettings,
    "sequence": SequenceSettings,
    "mnist": MNISTSettings,
    "fit": FitSettings,
}


@dataclass
class ExperimentConfig:
    kind: str
    seed: int = 0
    out: str = "results"
    model: ModelParams = field(default_factory=ModelParams)
    lif: LIFParams = field(default_factory=LIFParams)
    waveform: WaveformParams = field(default_factory=WaveformParams)
    experiment: typing.Any = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ConfigError(f"unknown experiment kind {self.kind!r}; choose from {KINDS}")
        if self.experiment is None:
            self.experiment = SETTINGS[self.kind]()
        elif not isinstance(self.experiment, SETTINGS[self.kind]):
            raise ConfigError(f"experiment settings do not match kind {self.kind!r}")

    def to_dict(self):
        return to_plain(self)

    def digest(self):
        """Stable hash of the configuration (used in snapshot headers)."""
        text = json.dumps(self.to_dict(), sort_keys=True)
        return hashlib.sha256(text.encode()).hexdigest()[:16]


# ------------------------------------------------------------ conversion ---

def to_plain(obj):
    """Dataclasses, tuples and paths to YAML/JSON-friendly builtins."""
    if dataclasses.is_dataclass(obj):
        return {f.name: to_plain(getattr(obj, f.name)) for f in dataclasses.fields(obj)}
    if isinstance(obj, (list, tuple)):
        return [to_plain(v) for v in obj]
    if isinstance(obj, dict):
        return {k: to_plain(v) for k, v in obj.items()}
    if isinstance(obj, Path):
        return str(obj)
    return obj


def _convert(tp, value, where):
    origin = typing.get_origin(tp)
    if origin in (typing.Union, types.UnionType):
        args = typing.get_args(tp)
        if value is None and type(None) in args:
            return None
        tp = next(a for a in args if a is not type(None))
        origin = typing.get_origin(tp)
    if dataclasses.is_dataclass(tp):
        return from_plain(tp, value, where)
    if tp is tuple or origin is tuple:
        if not isinstance(value, (list, tuple)):
            raise ConfigError(f"{where}: expected a list")
        return tuple(value)
    if tp is bool:
        if not isinstance(value, bool):
            raise ConfigError(f"{where}: expected true or false")
        return value
    if tp is int:
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(f"{where}: expected an integer")
        return value
    if tp is float:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"{where}: expected a number")
        return float(value)
    if tp is str:
        if not isinstance(value, str):
            raise ConfigError(f"{where}: expected a string")
        return value
    return value


def from_plain(cls, data, where="config"):
    """Build dataclass ``cls`` from a mapping, rejecting unknown keys."""
    if data is None:
        data = {}
    if not isinstance(data, dict):
        raise ConfigError(f"{where}: expected a mapping")
    hints = typing.get_type_hints(cls)
    names = {f.name for f in dataclasses.fields(cls)}
    unknown = set(data) - names
    if unknown:
        raise ConfigError(f"{where}: unknown key(s) {sorted(unknown)}")
    kwargs = {k: _convert(hints[k], v, f"{where}.{k}") for k, v in data.items()}
    try:
        return cls(**kwargs)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{where}: {exc}") from exc


def parse_config(data) -> ExperimentConfig:
    if not isinstance(data, dict):
        raise ConfigError("config must be a mapping")
    data = dict(data)
    kind = data.get("kind")
    if kind not in KINDS:
        raise ConfigError(f"unknown experiment kind {kind!r}; choose from {KINDS}")
    experiment = from_plain(SETTINGS[kind], data.pop("experiment", None), "experiment")
    cfg = from_plain(ExperimentConfig, data)
    cfg.experiment = experiment
    return cfg


def loads(text) -> ExperimentConfig:
    return parse_config(yaml.safe_load(text))


def dumps(cfg: ExperimentConfig) -> str:
    return yaml.safe_dump(cfg.to_dict(), sort_keys=False)


def load(path) -> ExperimentConfig:
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"config file not found: {path}")
    return loads(path.read_text())


def default_config(kind, seed=0, out="results") -> ExperimentConfig:
    return ExperimentConfig(kind=kind, seed=seed, out=out)
