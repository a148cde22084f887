"""Supervised spike-timing training with memristive synapses.

Teacher spikes potentiate and observed output spikes depress every synapse
that has received an input spike, by the device model evaluated at the time
elapsed since that synapse's most recent input spike. Teacher/output spike
pairs that coincide cancel (no update for either). Synapses are single
devices read against a reference conductance ``G_ref = sqrt(Gmin Gmax)`` so
that ``W = weight_scale * (G - G_ref)`` can be excitatory or inhibitory.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np

from .device import ModelParams, SynapseArray
from .mnist import read_pgm
from .neuron import LIFParams, SpikeTrain, poisson_train, poisson_trains, simulate_layer


@dataclass
class SupervisedTask:
    inputs: list
    desired: list
    duration: float = 1000.0
    epochs: int = 50
    match_tolerance: float = 10.0

    def __post_init__(self):
        if len(self.inputs) < 1 or len(self.desired) < 1:
            raise ValueError("need at least one input and one output")
        if not self.match_tolerance > 0:
            raise ValueError("match_tolerance must be positive")


@dataclass
class SupervisedConfig:
    weight_scale: float = 1.2e-5   # volts; W = weight_scale * (G - G_ref)
    init_spread: float = 0.1       # lognormal sigma of the initial conductances
    coincidence_window: float = 2.5
    sigma_fraction: float = 0.0
    learn: bool = True


@dataclass
class EpochStats:
    epoch: int
    hits: int
    misses: int
    spurious: int
    n_updates: int
    mean_abs_dG: float

    @property
    def solved(self):
        return self.misses == 0 and self.spurious == 0


def g_ref(params: ModelParams = ModelParams()):
    return float(np.sqrt(params.Gmin * params.Gmax))


class SupervisedNetwork:
    """Fully connected ``n_in x n_out`` layer of single-device synapses."""

    def __init__(self, n_in, n_out, rng, params: ModelParams = ModelParams(),
                 lif: LIFParams = LIFParams(), cfg: SupervisedConfig = SupervisedConfig(),
                 backend=None):
        self.params, self.lif, self.cfg, self.backend = params, lif, cfg, backend
        self.G_ref = g_ref(params)
        G = self.G_ref * np.exp(cfg.init_spread * rng.standard_normal((n_out, n_in)))
        self.synapses = SynapseArray(np.clip(G, params.Gmin, params.Gmax), params=params)

    @property
    def conductance(self):
        """``(n_out, n_in)`` device conductances in siemens."""
        return self.synapses.G[:, :, 0]

    def weights(self):
        """``(n_in, n_out)`` synaptic weights in amperes."""
        return (self.cfg.weight_scale * (self.conductance - self.G_ref)).T

    def simulate(self, inputs, duration, record=False):
        return simulate_layer(inputs, self.weights(), self.lif, duration, record=record,
                              backend=self.backend)


def evaluate_timing(observed, desired, tol):
    """Greedy one-to-one matching in time order.

    Returns ``(hits, misses, spurious)``; a desired spike is a hit when an
    unmatched observed spike lies within ``tol`` ms of it.
    """
    if not tol > 0:
        raise ValueError("tol must be positive")
    pairs = _match(np.asarray(observed.times if isinstance(observed, SpikeTrain) else observed),
                   np.asarray(desired.times if isinstance(desired, SpikeTrain) else desired), tol)
    hits = len(pairs)
    return hits, len(desired) - hits, len(observed) - hits


def _match(observed, desired, tol):
    """Index pairs ``(i_desired, i_observed)`` of the greedy matching."""
    used = np.zeros(len(observed), dtype=bool)
    pairs = []
    for i, t in enumerate(desired):
        cand = np.nonzero(~used & (np.abs(observed - t) <= tol))[0]
        if cand.size:
            used[cand[0]] = True
            pairs.append((i, cand[0]))
    return pairs


def learning_events(observed, desired, window):
    """Time-ordered ``(time, sign)`` updates for one output after cancelling
    coincident teacher/output pairs (sign +1 potentiates, -1 depresses)."""
    observed = np.asarray(observed, dtype=float)
    desired = np.asarray(desired, dtype=float)
    pairs = _match(observed, desired, window)
    keep_d = np.ones(len(desired), dtype=bool)
    keep_o = np.ones(len(observed), dtype=bool)
    for i, j in pairs:
        keep_d[i] = keep_o[j] = False
    events = [(t, 1) for t in desired[keep_d]] + [(t, -1) for t in observed[keep_o]]
    events.sort(key=lambda e: (e[0], -e[1]))
    return events


def train_epoch(net: SupervisedNetwork, task: SupervisedTask, rng=None, epoch=0,
                log=None):
    """Simulate one presentation and replay the learning events in time order.

    ``log``, when given, is called as ``log(time, post, pre_idx, dG)`` for each
    programming event.
    """
    observed, _ = net.simulate(task.inputs, task.duration)
    hits = misses = spurious = 0
    for m, (obs, des) in enumerate(zip(observed, task.desired)):
        h, mi, sp = evaluate_timing(obs, des, task.match_tolerance)
        hits, misses, spurious = hits + h, misses + mi, spurious + sp

    n_updates, total_dG = 0, 0.0
    if net.cfg.learn:
        events = []
        for m, (obs, des) in enumerate(zip(observed, task.desired)):
            events += [(t, s, m) for t, s in learning_events(obs.times, des.times,
                                                             net.cfg.coincidence_window)]
        events.sort(key=lambda e: (e[0], -e[1], e[2]))
        n_updates, total_dG = _replay(net, task.inputs, events, rng, log)

    mean = total_dG / n_updates if n_updates else 0.0
    return observed, EpochStats(epoch, hits, misses, spurious, n_updates, mean)


def _replay(net, inputs, events, rng, log):
    times = np.concatenate([tr.times for tr in inputs]) if inputs else np.zeros(0)
    owner = np.concatenate([np.full(len(tr), i) for i, tr in enumerate(inputs)]).astype(int)
    order = np.argsort(times, kind="stable")
    times, owner = times[order], owner[order]
    last = np.full(len(inputs), np.nan)
    cursor = 0
    n_updates, total = 0, 0.0
    for t, sign, m in events:
        while cursor < len(times) and times[cursor] <= t:
            last[owner[cursor]] = times[cursor]
            cursor += 1
        pre = np.nonzero(~np.isnan(last))[0]
        if pre.size == 0:
            continue
        dt = sign * (t - last[pre])
        dG = net.synapses.update_row(m, dt, net.cfg.sigma_fraction, rng, pre=pre)
        if log is not None:
            log(t, m, pre, dG)
        n_updates += pre.size
        total += float(np.abs(dG).sum())
    return n_updates, total


def make_timing_task(n_inputs=1000, duration=1000.0, input_rate=5.0, n_desired=5,
                     min_gap=50.0, rng=None, epochs=50, match_tolerance=10.0):
    """Poisson inputs and a handful of teacher spikes for an ``N x 1`` task.

    Teacher spikes are uniform in ``[min_gap, duration - min_gap]`` with at
    least ``min_gap`` ms between them.
    """
    inputs = [poisson_train(input_rate, duration, rng) for _ in range(n_inputs)]
    while True:
        t = np.sort(rng.uniform(min_gap, duration - min_gap, n_desired))
        if n_desired < 2 or np.diff(t).min() >= min_gap:
            break
    desired = SpikeTrain(np.round(t, 1))
    return SupervisedTask(inputs, [desired], duration, epochs, match_tolerance)


def train(net, task, rng=None, stop_when_solved=True, csv_path=None, on_epoch=None):
    """Run up to ``task.epochs`` epochs; returns the list of EpochStats."""
    history = []
    writer = None
    fh = None
    if csv_path is not None:
        fh = open(csv_path, "w", newline="")
        writer = csv.writer(fh)
        writer.writerow(["epoch", "hits", "misses", "spurious", "n_updates", "mean_abs_dG_S"])
    try:
        for epoch in range(task.epochs):
            _, stats = train_epoch(net, task, rng, epoch)
            history.append(stats)
            if writer:
                writer.writerow([epoch, stats.hits, stats.misses, stats.spurious,
                                 stats.n_updates, f"{stats.mean_abs_dG:.6e}"])
            if on_epoch:
                on_epoch(stats)
            if stop_when_solved and stats.solved:
                break
    finally:
        if fh:
            fh.close()
    return history


# ------------------------------------------------------- sequence predictor ---

LETTERS = ("N", "J", "I", "T")
LETTER_SHAPE = (30, 30)


def load_letter(name, directory=None):
    """30x30 grayscale letter in [0, 1], from ``directory`` or the bundled set."""
    if directory is None:
        ref = resources.files("memstdp") / "assets" / "letters" / f"{name}.pgm"
        with resources.as_file(ref) as path:
            img = read_pgm(path)
    else:
        img = read_pgm(Path(directory) / f"{name}.pgm")
    if img.shape != LETTER_SHAPE:
        raise ValueError(f"letter {name!r} must be 30x30, got {img.shape}")
    return img


@dataclass
class SequenceConfig:
    letters: tuple = LETTERS
    max_rate: float = 50.0        # Hz for a full-intensity pixel
    duration: float = 400.0       # ms per presentation
    epochs: int = 40
    on_threshold: float = 0.5     # intensity above which a target pixel is "on"
    test_presentations: int = 5   # fresh presentations per letter at each evaluation
    eval_epochs: int = 2          # rate maps average evaluations after this many final epochs
    shuffle_pairs: bool = True    # present the pairs in a random order each epoch
    image_dir: str | None = None
    network: SupervisedConfig = field(default_factory=SupervisedConfig)

    def __post_init__(self):
        if len(self.letters) < 2:
            raise ValueError("a sequence needs at least two letters")
        if not (self.max_rate >= 0 and self.duration > 0 and self.epochs >= 0):
            raise ValueError("max_rate, duration and epochs must be non-negative")
        if self.eval_epochs < 1 or self.test_presentations < 1:
            raise ValueError("eval_epochs and test_presentations must be at least 1")


def letter_trains(image, max_rate, duration, rng, on_threshold=None):
    """Poisson trains at ``intensity * max_rate``; with ``on_threshold`` set,
    pixels below it stay silent (used for the teacher signal)."""
    rates = max_rate * np.asarray(image, dtype=float).ravel()
    if on_threshold is not None:
        rates = np.where(np.asarray(image).ravel() >= on_threshold, rates, 0.0)
    return poisson_trains(rates, duration, rng)


def rate_map(trains, duration, shape=LETTER_SHAPE):
    """Spike counts converted to Hz and reshaped to the image grid."""
    return (np.array([len(t) for t in trains], dtype=float) * 1e3 / duration).reshape(shape)


def top_set_jaccard(rates, target, on_threshold=0.5):
    """Jaccard overlap between the target's on-pixels and the same number of
    highest-rate output pixels (ties broken by index)."""
    on = np.asarray(target).ravel() >= on_threshold
    k = int(on.sum())
    if k == 0:
        return float("nan")
    top = np.zeros(on.size, dtype=bool)
    top[np.argsort(-np.asarray(rates).ravel(), kind="stable")[:k]] = True
    return float((top & on).sum() / (top | on).sum())


@dataclass
class SequenceResult:
    net: SupervisedNetwork
    images: dict
    history: list
    input_maps: dict
    output_maps: dict
    jaccard: dict


def sequence_predictor_experiment(cfg: SequenceConfig, rng, lif: LIFParams = LIFParams(),
                                  params: ModelParams = ModelParams(), backend=None,
                                  on_epoch=None, on_epoch_end=None):
    """Train a 900x900 layer to answer each letter with the next one.

    Every epoch presents the consecutive pairs once, each with fresh Poisson
    input and teacher trains. After each of the last ``eval_epochs`` epochs
    (or once, untrained, when ``epochs`` is 0) every letter that has a
    successor is presented ``test_presentations`` times without learning.
    The rate maps average all of these, because the trained weights keep
    cycling: a silent output is fully potentiated by its teacher, and the
    resulting non-coincident output spikes then depress it again.

    ``on_epoch(epoch, src, dst, stats)`` is called after every presentation
    and ``on_epoch_end(epoch, net)`` after every epoch.
    """
    images = {name: load_letter(name, cfg.image_dir) for name in cfg.letters}
    n = LETTER_SHAPE[0] * LETTER_SHAPE[1]
    net = SupervisedNetwork(n, n, rng, params, lif, cfg.network, backend)
    pairs = list(zip(cfg.letters[:-1], cfg.letters[1:]))
    input_maps = {src: np.zeros(LETTER_SHAPE) for src, _ in pairs}
    output_maps = {src: np.zeros(LETTER_SHAPE) for src, _ in pairs}
    n_evals = min(cfg.eval_epochs, cfg.epochs) or 1
    reps = n_evals * cfg.test_presentations

    def evaluate():
        for src, _ in pairs:
            for _ in range(cfg.test_presentations):
                inputs = letter_trains(images[src], cfg.max_rate, cfg.duration, rng)
                out, _ = net.simulate(inputs, cfg.duration)
                input_maps[src] += rate_map(inputs, cfg.duration) / reps
                output_maps[src] += rate_map(out, cfg.duration) / reps

    history = []
    for epoch in range(cfg.epochs):
        order = rng.permutation(len(pairs)) if cfg.shuffle_pairs else range(len(pairs))
        for src, dst in (pairs[i] for i in order):
            task = SupervisedTask(
                letter_trains(images[src], cfg.max_rate, cfg.duration, rng),
                letter_trains(images[dst], cfg.max_rate, cfg.duration, rng, cfg.on_threshold),
                cfg.duration, 1)
            _, stats = train_epoch(net, task, rng, epoch)
            history.append((epoch, src, dst, stats))
            if on_epoch is not None:
                on_epoch(epoch, src, dst, stats)
        if epoch >= cfg.epochs - n_evals:
            evaluate()
        if on_epoch_end is not None:
            on_epoch_end(epoch, net)
    if cfg.epochs == 0:
        evaluate()
    jaccard = {src: top_set_jaccard(output_maps[src], images[dst], cfg.on_threshold)
               for src, dst in pairs}
    return SequenceResult(net, images, history, input_maps, output_maps, jaccard)
