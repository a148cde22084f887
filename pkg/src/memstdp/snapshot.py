"""Weight snapshots: a versioned JSON header plus dense arrays in one .npz."""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .device import ModelParams, SynapseArray

FORMAT = "memstdp-snapshot"
VERSION = 1


@dataclass
class WeightSnapshot:
    conductance: np.ndarray          # (n_post, n_pre, n_dev) siemens
    pointer: np.ndarray              # (n_post, n_pre) round-robin positions
    metadata: dict = field(default_factory=dict)

    @property
    def shape(self):
        return self.conductance.shape

    @classmethod
    def from_synapses(cls, synapses: SynapseArray, **metadata):
        return cls(synapses.G.copy(), synapses.pointer.copy(), dict(metadata))

    def to_synapses(self, params: ModelParams = ModelParams()) -> SynapseArray:
        return SynapseArray(self.conductance, self.pointer, params)


def save_snapshot(path, snap: WeightSnapshot):
    header = {"format": FORMAT, "version": VERSION, "shape": list(snap.shape),
              "units": "siemens", "metadata": snap.metadata}
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "wb") as fh:
        np.savez_compressed(fh, header=np.array(json.dumps(header, sort_keys=True)),
                            conductance=snap.conductance, pointer=snap.pointer)
    return path


def load_snapshot(path) -> WeightSnapshot:
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"snapshot not found: {path}")
    with np.load(path, allow_pickle=False) as data:
        header = json.loads(str(data["header"]))
        if header.get("format") != FORMAT:
            raise ValueError(f"{path}: not a weight snapshot")
        if header.get("version") != VERSION:
            raise ValueError(f"{path}: unsupported snapshot version {header.get('version')}")
        G = data["conductance"]
        pointer = data["pointer"]
    if list(G.shape) != header["shape"]:
        raise ValueError(f"{path}: header shape {header['shape']} does not match data {G.shape}")
    return WeightSnapshot(G, pointer, header["metadata"])
