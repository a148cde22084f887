"""Bio-mimetic programming waveforms and device energy bookkeeping.

Each spike launches a two-exponential voltage pulse: a fast depolarizing
lobe of decay ``tau_m`` followed, after ``3 tau_m``, by a slow opposite-sign
lobe of decay ``tau_s``. The device sees ``V_post - V_pre``. Times are in ms,
voltages in volts.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .device import DomainError


@dataclass(frozen=True)
class WaveformParams:
    A1: float = 0.1
    A2: float = 0.25
    tau_m: float = 3.0
    tau_s: float = 30.0
    sample_dt: float = 0.5
    duration: float = 250.0
    read_amplitude: float = 0.05
    read_duration: float = 5.0

    def __post_init__(self):
        if not (self.A1 > 0 and self.A2 > 0):
            raise DomainError("waveform amplitudes must be positive")
        if not self.tau_m < self.tau_s:
            raise DomainError("need tau_m < tau_s")
        if not self.sample_dt > 0:
            raise DomainError("sample_dt must be positive")


@dataclass
class SampledWaveform:
    start_time: float
    samples: np.ndarray
    sample_dt: float

    @property
    def times(self):
        return self.start_time + self.sample_dt * np.arange(len(self.samples))

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["time_ms", "volts"])
            for t, v in zip(self.times, self.samples):
                w.writerow([f"{t:.6g}", f"{v:.9g}"])

    def __add__(self, other):
        """Concatenate in time (``other`` follows ``self``)."""
        if other.sample_dt != self.sample_dt:
            raise ValueError("cannot join waveforms with different sample spacing")
        return SampledWaveform(self.start_time, np.concatenate([self.samples, other.samples]),
                               self.sample_dt)


def _pulse(t, lead, trail, p):
    t = np.asarray(t, dtype=float)
    onset = 3.0 * p.tau_m
    with np.errstate(over="ignore"):
        fast = np.where(t >= 0, lead * np.exp(-np.maximum(t, 0) / p.tau_m), 0.0)
        slow = np.where(t >= onset, trail * np.exp(-np.maximum(t - onset, 0) / p.tau_s), 0.0)
    v = fast - slow
    return v[()] if v.ndim == 0 else v


def v_pre(t, p: WaveformParams = WaveformParams()):
    return _pulse(t, p.A1, p.A2, p)


def v_post(t, p: WaveformParams = WaveformParams()):
    return _pulse(t, p.A2, p.A1, p)


def spike_times_for(delta_t, p: WaveformParams = WaveformParams()):
    """Grid-aligned ``(t_pre, t_post)`` with the earlier spike at t = 0."""
    dt = round(delta_t / p.sample_dt) * p.sample_dt
    t_pre = max(0.0, -dt)
    return t_pre, t_pre + dt


def difference_waveform(delta_t, p: WaveformParams = WaveformParams()) -> SampledWaveform:
    """``V_post(t - t_post) - V_pre(t - t_pre)`` with ``t_post - t_pre = delta_t``.

    ``delta_t`` is rounded to the sampling grid; the earlier spike sits at
    the window start.
    """
    if abs(delta_t) > p.duration / 2:
        raise DomainError(f"|delta_t| = {abs(delta_t)} ms exceeds half the {p.duration} ms window")
    t_pre, t_post = spike_times_for(delta_t, p)
    t = p.sample_dt * np.arange(int(round(p.duration / p.sample_dt)))
    return SampledWaveform(0.0, v_post(t - t_post, p) - v_pre(t - t_pre, p), p.sample_dt)


def single_spike_waveform(kind="pre", p: WaveformParams = WaveformParams()) -> SampledWaveform:
    t = p.sample_dt * np.arange(int(round(p.duration / p.sample_dt)))
    fn = {"pre": v_pre, "post": v_post}[kind]
    return SampledWaveform(0.0, fn(t, p), p.sample_dt)


def read_pulse(p: WaveformParams = WaveformParams()) -> SampledWaveform:
    """Non-disruptive read pulse; carries energy but never programs the device."""
    n = int(round(p.read_duration / p.sample_dt))
    return SampledWaveform(0.0, np.full(n, p.read_amplitude), p.sample_dt)


def energy(w: SampledWaveform, g) -> float:
    """Joules dissipated by a constant conductance ``g`` (S) under ``w``."""
    if g < 0:
        raise DomainError("conductance must be non-negative")
    if len(w.samples) < 2:
        return 0.0
    dt_s = w.sample_dt * 1e-3
    return float(g * np.trapezoid(np.square(w.samples), dx=dt_s))


def energy_between(w: SampledWaveform, g_initial, g_final) -> float:
    """Energy with the conductance taken as the mean of its start and end values."""
    return energy(w, 0.5 * (g_initial + g_final))
