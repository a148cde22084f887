"""Leaky integrate-and-fire neurons, synaptic current kernel, Poisson inputs."""
from __future__ import annotations

import csv
from dataclasses import dataclass, fields

import numpy as np

from . import kernels
from .device import DomainError


@dataclass(frozen=True)
class LIFParams:
    """Membrane constants. Voltages in volts, conductance in S, times in ms.

    ``theta`` is the absolute firing threshold (+20 mV, i.e. 90 mV above rest).
    """

    Cm: float = 300e-12
    gL: float = 30e-9
    theta: float = 20e-3
    EL: float = -70e-3
    t_refrac: float = 5.0
    dt: float = 0.1
    tau1: float = 5.0
    tau2: float = 1.25

    def __post_init__(self):
        if not (self.Cm > 0 and self.gL > 0):
            raise DomainError("Cm and gL must be positive")
        if not self.tau1 > self.tau2 > 0:
            raise DomainError("need tau1 > tau2 > 0")
        if not self.dt > 0:
            raise DomainError("dt must be positive")
        if not self.theta > self.EL:
            raise DomainError("threshold must lie above the resting potential")

    @property
    def tau_m(self):
        """Membrane time constant in ms."""
        return 1e3 * self.Cm / self.gL

    @property
    def ref_steps(self):
        return int(round(self.t_refrac / self.dt))

    @property
    def kernel(self):
        """Default double-exponential synaptic current kernel."""
        return SynapticKernel.double_exponential(self.tau1, self.tau2)

    def nsteps(self, duration):
        return int(round(duration / self.dt)) + 1

    def to_dict(self):
        return {f.name: getattr(self, f.name) for f in fields(self)}


@dataclass(frozen=True)
class SynapticKernel:
    """Unit-weight synaptic current as a sum of delayed exponentials.

    Component ``c`` contributes ``amps[c] * exp(-(t - delays[c]) / taus[c])``
    for ``t >= delays[c]``; times in ms.
    """

    amps: tuple
    taus: tuple
    delays: tuple

    def __post_init__(self):
        if not len(self.amps) == len(self.taus) == len(self.delays) >= 1:
            raise DomainError("kernel needs matching, non-empty amps, taus and delays")
        if min(self.taus) <= 0 or min(self.delays) < 0:
            raise DomainError("kernel time constants must be positive and delays non-negative")

    @classmethod
    def double_exponential(cls, tau1=5.0, tau2=1.25):
        return cls((1.0, -1.0), (float(tau1), float(tau2)), (0.0, 0.0))

    @classmethod
    def from_waveform(cls, wp):
        """Negated presynaptic programming pulse, scaled to a unit slow lobe.

        The fast lobe is inhibitory with relative size ``A1 / A2``; the slow
        excitatory lobe starts ``3 tau_m`` after the spike.
        """
        return cls((-wp.A1 / wp.A2, 1.0), (wp.tau_m, wp.tau_s), (0.0, 3.0 * wp.tau_m))

    def arrays(self, dt):
        """``(amps, per-step decays, delays in steps)`` for step size ``dt`` ms."""
        return (np.asarray(self.amps, dtype=float), np.exp(-dt / np.asarray(self.taus, dtype=float)),
                np.rint(np.asarray(self.delays, dtype=float) / dt).astype(np.int64))

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        out = np.zeros_like(t)
        for a, tau, d in zip(self.amps, self.taus, self.delays):
            out = out + np.where(t >= d, a * np.exp(-np.maximum(t - d, 0) / tau), 0.0)
        return out[()] if out.ndim == 0 else out


class SpikeTrain:
    """Strictly increasing, non-negative spike times in ms."""

    __slots__ = ("times",)

    def __init__(self, times=()):
        t = np.asarray(times, dtype=float).ravel()
        if t.size and (t[0] < 0 or np.any(np.diff(t) <= 0) or not np.all(np.isfinite(t))):
            raise DomainError("spike times must be finite, non-negative and strictly increasing")
        self.times = t

    def __len__(self):
        return len(self.times)

    def __iter__(self):
        return iter(self.times)

    def __eq__(self, other):
        return isinstance(other, SpikeTrain) and np.array_equal(self.times, other.times)

    def __repr__(self):
        return f"SpikeTrain({np.array2string(self.times, precision=2, threshold=8)})"


def poisson_train(rate, duration, rng) -> SpikeTrain:
    """Homogeneous Poisson process at ``rate`` Hz over ``[0, duration)`` ms."""
    if rate < 0:
        raise DomainError(f"rate must be non-negative, got {rate}")
    n = rng.poisson(rate * duration * 1e-3)
    times = np.sort(rng.uniform(0.0, duration, n))
    # a tie has probability zero but would break strict ordering
    return SpikeTrain(np.unique(times))


def poisson_trains(rates, duration, rng):
    return [poisson_train(r, duration, rng) for r in np.asarray(rates, dtype=float).ravel()]


def syn_current(W, t_since_spike, p: LIFParams = LIFParams(), kernel=None):
    """Synaptic current of weight ``W`` (amperes); double-exponential by default."""
    return W * (p.kernel if kernel is None else kernel)(t_since_spike)


def trains_to_events(trains, p: LIFParams, nsteps):
    """Grid-align spike trains (rounded to the nearest step) into a CSR table."""
    steps, idx = [], []
    for i, tr in enumerate(trains):
        s = np.rint(np.asarray(tr.times if isinstance(tr, SpikeTrain) else tr) / p.dt)
        steps.append(s.astype(np.int64))
        idx.append(np.full(len(s), i, dtype=np.int64))
    if not steps:
        return np.zeros(nsteps + 1, dtype=np.int64), np.zeros(0, dtype=np.int64)
    return kernels.events_csr(np.concatenate(steps), np.concatenate(idx), nsteps)


def simulate_layer(trains, weights, p: LIFParams, duration, theta=None, current=None,
                   record=False, backend=None, kernel=None):
    """Integrate ``n_out`` independent LIF neurons.

    ``weights`` has shape ``(n_in, n_out)`` in amperes. ``current`` is an
    optional injected current, scalar or ``(nsteps, n_out)``. Returns
    ``(list of SpikeTrain per neuron, trace or None)``.
    """
    W = np.atleast_2d(np.asarray(weights, dtype=float))
    if W.shape[0] != len(trains):
        raise ValueError(f"{len(trains)} input trains but weights have {W.shape[0]} rows")
    n_out = W.shape[1]
    nsteps = p.nsteps(duration)
    ptr, idx = trains_to_events(trains, p, nsteps)
    if current is None:
        ext = np.zeros((0, n_out))
    else:
        ext = np.broadcast_to(np.asarray(current, dtype=float), (nsteps, n_out))
    theta = np.full(n_out, p.theta) if theta is None else np.broadcast_to(theta, (n_out,))
    amps, decays, delays = (p.kernel if kernel is None else kernel).arrays(p.dt)
    raster, trace = kernels.lif_network(ext, ptr, idx, W, amps, decays, delays, theta,
                                        np.full(n_out, p.EL), p.dt * 1e-3, p.Cm, p.gL, p.EL,
                                        p.ref_steps, record, backend)
    out = []
    for j in range(n_out):
        k = np.flatnonzero(raster[:, j])
        out.append(SpikeTrain(p.dt * (k - 1 + raster[k, j].astype(float))))
    return out, (trace if record else None)


def lif_run(inputs, p: LIFParams = LIFParams(), duration=1000.0, current=None, record=True,
            backend=None):
    """Single LIF neuron driven by ``(SpikeTrain, weight)`` pairs.

    Returns ``(SpikeTrain, trace)`` where ``trace`` is an ``(nsteps, 2)``
    array of (time_ms, volts), or ``None`` when ``record`` is false.
    """
    if duration <= 0:
        raise DomainError("duration must be positive")
    trains = [tr for tr, _ in inputs]
    W = np.array([[w] for _, w in inputs], dtype=float).reshape(len(inputs), 1)
    cur = None if current is None else np.asarray(current, dtype=float).reshape(-1, 1)
    spikes, trace = simulate_layer(trains, W, p, duration, current=cur, record=record,
                                   backend=backend)
    if trace is not None:
        trace = np.column_stack([p.dt * np.arange(len(trace)), trace[:, 0]])
    return spikes[0], trace


def write_trace_csv(path, trace):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["time_ms", "volts"])
        w.writerows((f"{t:.4f}", f"{v:.9g}") for t, v in trace)


class WTALayer:
    """Winner-take-all LIF layer advanced spike by spike.

    ``run`` steps the layer through an input window and calls
    ``on_spike(step, winner)`` at each output spike, at the step boundary and
    before the next step is integrated. The callback may change the weight
    matrix or thresholds in place; the lateral reset (all membranes to EL,
    winner refractory, others blocked) is applied by the layer.
    """

    def __init__(self, n_out, p: LIFParams = LIFParams(), block=3.0, backend=None,
                 kernel=None):
        self.p = p
        self.kernel = p.kernel if kernel is None else kernel
        self.n_out = n_out
        self.block_steps = int(round(block / p.dt))
        self.backend = backend

    def run(self, ptr, idx, W, theta, on_spike=None):
        p = self.p
        amps, decays, delays = self.kernel.arrays(p.dt)
        V = np.full(self.n_out, p.EL)
        tr = np.zeros((len(amps), self.n_out))
        if ptr[1] > ptr[0]:
            tr[delays == 0] = np.outer(amps[delays == 0], W[idx[ptr[0]:ptr[1]]].sum(axis=0))
        hold = np.zeros(self.n_out, dtype=np.int64)
        k = 0
        spikes = []
        while True:
            k, j = kernels.wta_advance(k, ptr, idx, W, amps, decays, delays, V, tr, hold, theta,
                                       p.dt * 1e-3, p.Cm, p.gL, p.EL, self.backend)
            if k < 0:
                return spikes
            spikes.append((k, j))
            V[:] = p.EL
            hold[:] = self.block_steps
            hold[j] = p.ref_steps
            if on_spike is not None:
                on_spike(k, j)
