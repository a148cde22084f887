import json

import numpy as np
import pytest

from memstdp.device import ModelParams, SynapseArray
from memstdp.snapshot import FORMAT, WeightSnapshot, load_snapshot, save_snapshot
from memstdp.supervised import SupervisedNetwork, make_timing_task, train

P = ModelParams()


def test_round_trip(tmp_path, rng):
    syn = SynapseArray(rng.uniform(P.Gmin, P.Gmax, (3, 4, 2)))
    syn.update_row(1, 5.0)
    path = save_snapshot(tmp_path / "a" / "s.npz",
                         WeightSnapshot.from_synapses(syn, epoch=7, seed=1))
    snap = load_snapshot(path)
    np.testing.assert_array_equal(snap.conductance, syn.G)
    np.testing.assert_array_equal(snap.pointer, syn.pointer)
    assert snap.metadata == {"epoch": 7, "seed": 1}
    back = snap.to_synapses()
    np.testing.assert_array_equal(back.G, syn.G)


def test_header_validation(tmp_path):
    path = tmp_path / "s.npz"
    snap = WeightSnapshot(np.full((1, 2, 1), P.Gmin), np.zeros((1, 2), np.int64))
    save_snapshot(path, snap)
    with np.load(path) as d:
        header = json.loads(str(d["header"]))
    assert header["format"] == FORMAT and header["units"] == "siemens"

    def rewrite(**changes):
        h = dict(header, **changes)
        np.savez(path, header=np.array(json.dumps(h)), conductance=snap.conductance,
                 pointer=snap.pointer)

    rewrite(version=99)
    with pytest.raises(ValueError, match="version"):
        load_snapshot(path)
    rewrite(format="other")
    with pytest.raises(ValueError, match="not a weight snapshot"):
        load_snapshot(path)
    rewrite(shape=[2, 2, 1])
    with pytest.raises(ValueError, match="shape"):
        load_snapshot(path)
    with pytest.raises(FileNotFoundError):
        load_snapshot(tmp_path / "none.npz")


def test_snapshot_reproduces_forward_simulation(tmp_path):
    rng = np.random.default_rng(11)
    task = make_timing_task(300, 400.0, 10.0, 3, 50.0, rng, epochs=3)
    net = SupervisedNetwork(300, 1, rng)
    net.synapses.G[...] = 0.35 * P.G0
    train(net, task, rng, stop_when_solved=False)
    save_snapshot(tmp_path / "s.npz", WeightSnapshot.from_synapses(net.synapses))
    before, _ = net.simulate(task.inputs, task.duration)

    clone = SupervisedNetwork(300, 1, np.random.default_rng(0))
    clone.synapses = load_snapshot(tmp_path / "s.npz").to_synapses()
    after, _ = clone.simulate(task.inputs, task.duration)
    assert len(before[0]) > 0
    np.testing.assert_array_equal(before[0].times, after[0].times)
