"""Unsupervised MNIST learning with a winner-take-all LIF output layer.

Binarized pixels fire one spike each at ``spike_time``. When an output neuron
fires, every other output is reset and blocked for ``wta_block`` ms, and each
synapse of the winner gets exactly one programming event: potentiation by
the device model at ``t_post - t_pre`` if its input fired within
``potentiation_window`` ms before, otherwise depression at the fixed
``depression_dt``. Each event goes to one device of the synapse, chosen
round-robin. Output thresholds are periodically nudged so that all outputs
fire at similar rates.
"""
from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from . import kernels
from .device import ModelParams, SynapseArray
from .neuron import LIFParams, SpikeTrain, SynapticKernel, WTALayer
from .waveform import WaveformParams

N_PIXELS = 784
INPUT_KERNELS = ("double_exp", "vpre")
UNASSIGNED = -1


@dataclass
class MNISTConfig:
    n_outputs: int = 10
    devices_per_synapse: int = 1
    sigma_fraction: float = 0.0
    image_duration: float = 200.0
    spike_time: float = 50.0
    potentiation_window: float = 40.0
    depression_dt: float = -60.0
    wta_block: float = 3.0
    homeostasis_period: int = 100
    homeostasis_gain: float = 1e-3      # volts per unit relative rate deviation
    target_rate: float | None = 1.0     # output spikes per image (whole layer); None: equalize only
    binarize_threshold: int = 128
    weight_scale: float = 1.13e-5       # volts; W = weight_scale / n * sum_j (G_j - Gmin)
    init_low: float = 0.016             # initial conductances uniform in [low, high] * G0
    init_high: float = 0.5
    epochs: int = 2
    train_subset: int = 5000
    test_subset: int = 2000
    label_window: int | None = None     # None: last 1/6 of the training subset
    input_kernel: str = "double_exp"    # "double_exp" or "vpre" (negated presynaptic pulse)

    def __post_init__(self):
        if not self.spike_time < self.image_duration:
            raise ValueError("spike_time must lie inside the image window")
        if not self.potentiation_window > 0:
            raise ValueError("potentiation_window must be positive")
        if self.n_outputs < 1 or self.devices_per_synapse < 1:
            raise ValueError("need at least one output and one device per synapse")
        if self.sigma_fraction < 0:
            raise ValueError("sigma_fraction must be non-negative")
        if self.input_kernel not in INPUT_KERNELS:
            raise ValueError(f"input_kernel must be one of {sorted(INPUT_KERNELS)}")

    def kernel(self, lif: LIFParams):
        if self.input_kernel == "vpre":
            return SynapticKernel.from_waveform(WaveformParams())
        return lif.kernel

    def labels_from(self):
        if self.label_window is not None:
            return min(self.label_window, self.train_subset)
        return max(1, int(round(self.train_subset * 10000 / 60000)))

    def to_dict(self):
        return asdict(self)


def encode_image(pixels, cfg: MNISTConfig = MNISTConfig()):
    """One spike at ``spike_time`` per on-pixel; off-pixels stay silent."""
    pixels = np.asarray(pixels)
    if pixels.size != N_PIXELS:
        raise ValueError(f"expected 784 pixels, got shape {pixels.shape}")
    on = pixels.ravel() >= cfg.binarize_threshold
    return [SpikeTrain([cfg.spike_time]) if v else SpikeTrain() for v in on]


class HomeostasisState:
    def __init__(self, n_out, theta0, lif: LIFParams):
        self.counts = np.zeros(n_out, dtype=np.int64)
        self.theta = np.full(n_out, float(theta0))
        self.lo = lif.EL + 5e-3
        self.hi = lif.EL + 200e-3


def homeostasis_step(state: HomeostasisState, cfg: MNISTConfig):
    """Raise thresholds of over-active outputs, lower those of quiet ones.

    Each output's spike count over the last period is compared with a
    reference: the layer mean, or the count implied by ``target_rate`` when
    set. The latter also pins the overall activity near ``target_rate``
    spikes per image, which keeps the winner's drive just above threshold.
    """
    if cfg.target_rate is not None:
        ref = cfg.target_rate * cfg.homeostasis_period / len(state.counts)
    else:
        ref = state.counts.mean()
    if ref > 0:
        state.theta += cfg.homeostasis_gain * (state.counts - ref) / ref
        np.clip(state.theta, state.lo, state.hi, out=state.theta)
    state.counts[:] = 0
    return state.theta


class UnsupervisedNetwork:
    def __init__(self, cfg: MNISTConfig, rng, params: ModelParams = ModelParams(),
                 lif: LIFParams = LIFParams(), backend=None):
        self.cfg, self.params, self.lif, self.backend = cfg, params, lif, backend
        shape = (cfg.n_outputs, N_PIXELS, cfg.devices_per_synapse)
        lo = max(cfg.init_low * params.G0, params.Gmin)
        hi = min(cfg.init_high * params.G0, params.Gmax)
        self.synapses = SynapseArray(rng.uniform(lo, hi, shape), params=params)
        self.homeostasis = HomeostasisState(cfg.n_outputs, lif.theta, lif)
        self.layer = WTALayer(cfg.n_outputs, lif, cfg.wta_block, backend, cfg.kernel(lif))
        self.nsteps = lif.nsteps(cfg.image_duration)
        self.spike_step = int(round(cfg.spike_time / lif.dt))

    @property
    def theta(self):
        return self.homeostasis.theta

    def weights(self):
        """``(784, n_out)`` synaptic weights in amperes."""
        scale = self.cfg.weight_scale / self.cfg.devices_per_synapse
        return np.ascontiguousarray((scale * self.synapses.effective()).T)

    def present(self, pixels, rng=None, learn=True):
        """Present one image; returns the list of ``(time_ms, neuron)`` spikes."""
        cfg, lif = self.cfg, self.lif
        pixels = np.asarray(pixels)
        if pixels.size != N_PIXELS:
            raise ValueError(f"expected 784 pixels, got shape {pixels.shape}")
        on = np.flatnonzero(pixels.ravel() >= cfg.binarize_threshold)
        ptr = np.zeros(self.nsteps + 1, dtype=np.int64)
        ptr[self.spike_step + 1:] = len(on)
        W = self.weights()
        scale = cfg.weight_scale / cfg.devices_per_synapse
        spikes = []

        def on_spike(step, j):
            t_post = step * lif.dt
            spikes.append((t_post, j))
            if learn:
                self._learn(j, t_post, on, rng)
                W[:, j] = scale * (self.synapses.G[j] - self.params.Gmin).sum(axis=1)

        self.layer.run(ptr, on.astype(np.int64), W, self.theta, on_spike)
        return spikes

    def _learn(self, j, t_post, on, rng):
        cfg = self.cfg
        dt = np.full(N_PIXELS, cfg.depression_dt)
        lag = t_post - cfg.spike_time
        if 0 < lag <= cfg.potentiation_window:
            dt[on] = lag
        self.synapses.update_row(j, dt, cfg.sigma_fraction, rng)


def assign_labels(counts):
    """Label each output with the digit it fired most for.

    ``counts`` is ``(n_out, 10)``. Ties go to the lower digit; silent outputs
    get ``UNASSIGNED``.
    """
    counts = np.asarray(counts)
    labels = np.argmax(counts, axis=1)
    labels[counts.sum(axis=1) == 0] = UNASSIGNED
    return labels


def predict(spike_counts, labels):
    """Digit predicted from per-output spike counts, or UNASSIGNED.

    Unassigned outputs never win; ties go to the lowest output index.
    """
    counts = np.where(np.asarray(labels) == UNASSIGNED, -1, spike_counts)
    j = int(np.argmax(counts))
    if counts[j] <= 0:
        return UNASSIGNED
    return int(labels[j])


def evaluate(net: UnsupervisedNetwork, labels, images, targets):
    """Test accuracy with learning and homeostasis frozen."""
    if len(targets) == 0:
        return float("nan")
    correct = 0
    for img, y in zip(images, targets):
        counts = np.bincount([j for _, j in net.present(img, learn=False)],
                             minlength=net.cfg.n_outputs)
        correct += predict(counts, labels) == int(y)
    return correct / len(targets)


def train_epoch(net: UnsupervisedNetwork, images, targets, rng):
    """One pass over ``images`` in a shuffled order.

    Returns ``(labels, counts, n_output_spikes)`` where ``counts`` holds the
    per-output, per-digit spike counts over the labelling tail of the epoch.
    """
    cfg = net.cfg
    order = rng.permutation(len(images))
    tail_start = len(order) - min(cfg.labels_from(), len(order))
    counts = np.zeros((cfg.n_outputs, 10), dtype=np.int64)
    total = 0
    for n, i in enumerate(order):
        spikes = net.present(images[i], rng, learn=True)
        for _, j in spikes:
            net.homeostasis.counts[j] += 1
            if n >= tail_start:
                counts[j, targets[i]] += 1
        total += len(spikes)
        if (n + 1) % cfg.homeostasis_period == 0:
            homeostasis_step(net.homeostasis, cfg)
    return assign_labels(counts), counts, total


def digit_prototype_agreement(net: UnsupervisedNetwork, labels, images, targets):
    """Fraction of labelled outputs whose weight vector is most cosine-similar
    to the mean binarized training image of their own label."""
    on = (np.asarray(images).reshape(len(images), -1) >= net.cfg.binarize_threshold)
    protos = np.stack([on[np.asarray(targets) == d].mean(axis=0) if np.any(targets == d)
                       else np.zeros(N_PIXELS) for d in range(10)])
    w = net.synapses.effective()
    wn = w / np.maximum(np.linalg.norm(w, axis=1, keepdims=True), 1e-30)
    pn = protos / np.maximum(np.linalg.norm(protos, axis=1, keepdims=True), 1e-30)
    sim = wn @ pn.T
    assigned = np.flatnonzero(np.asarray(labels) != UNASSIGNED)
    if assigned.size == 0:
        return 0.0
    return float(np.mean(np.argmax(sim[assigned], axis=1) == np.asarray(labels)[assigned]))
