"""State-dependent STDP conductance-update model of a Cu/SiO2/W memristor.

The normalized conductance change for a spike-time difference ``dt`` (ms,
post minus pre) and initial conductance ``G`` is a difference of two decaying
exponentials whose time constants are linear in ``g = log10(G / G0)``::

    dt > 0:   dGn =  A exp(-dt / tau_ap(g)) - A exp(-dt / tau_bp(g))
    dt <= 0:  dGn = -A exp( dt / tau_an(g)) + A exp( dt / tau_bn(g))

    tau_xy(g) = alpha_xy + g * beta_xy

``dGn = (Gf - Gi) / min(Gi, Gf)``, so a positive change maps back to
``Gf = Gi (1 + dGn)`` and a negative one to ``Gf = Gi / (1 - dGn)``.
Conductances are stored in siemens, times in milliseconds.
"""
from __future__ import annotations

from dataclasses import dataclass, field, fields, replace

import numpy as np

G0 = 7.748091729e-5  # 2 e^2 / h, siemens


class DomainError(ValueError):
    """An argument lies outside the domain where the model is defined."""


@dataclass(frozen=True)
class ModelParams:
    A: float = 9.0
    alpha_ap: float = 5.2
    beta_ap: float = -3.8
    alpha_bp: float = 6.9
    beta_bp: float = 1.9
    alpha_an: float = 9.1
    beta_an: float = -1.9
    alpha_bn: float = 2.3
    beta_bn: float = -5.7
    G0: float = G0
    Gmin: float = 0.016 * G0
    Gmax: float = 0.5 * G0

    def __post_init__(self):
        if not self.A > 0:
            raise DomainError(f"A must be positive, got {self.A}")
        if not 0 < self.Gmin < self.Gmax:
            raise DomainError(f"need 0 < Gmin < Gmax, got {self.Gmin}, {self.Gmax}")
        for name, tau in self.taus(np.array([self.Gmin, self.Gmax])).items():
            if np.any(tau <= 0):
                raise DomainError(f"time constant {name} is not positive over [Gmin, Gmax]")

    def taus(self, G):
        """Time constants (ms) at conductance(s) ``G``."""
        g = np.log10(np.asarray(G, dtype=float) / self.G0)
        return {
            "ap": self.alpha_ap + g * self.beta_ap,
            "bp": self.alpha_bp + g * self.beta_bp,
            "an": self.alpha_an + g * self.beta_an,
            "bn": self.alpha_bn + g * self.beta_bn,
        }

    def as_array(self):
        """Packed float64 vector consumed by the compiled kernels."""
        return np.array([self.A, self.alpha_ap, self.beta_ap, self.alpha_bp, self.beta_bp,
                         self.alpha_an, self.beta_an, self.alpha_bn, self.beta_bn,
                         self.G0, self.Gmin, self.Gmax])

    def to_dict(self):
        return {f.name: getattr(self, f.name) for f in fields(self)}

    @classmethod
    def from_dict(cls, data):
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise KeyError(f"unknown model parameter(s): {sorted(unknown)}")
        return cls(**data)

    def with_overrides(self, **kw):
        return replace(self, **kw)


@dataclass(frozen=True)
class DeviceState:
    conductance: float
    params: ModelParams = field(default_factory=ModelParams, repr=False, compare=False)

    def __post_init__(self):
        _check_range(self.conductance, self.params)


@dataclass(frozen=True)
class NoiseConfig:
    sigma_fraction: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if not 0.0 <= self.sigma_fraction:
            raise DomainError(f"sigma_fraction must be >= 0, got {self.sigma_fraction}")


def _check_range(G, params):
    G = np.asarray(G, dtype=float)
    # tolerate representation error at the clamp limits only
    lo = params.Gmin * (1 - 1e-12)
    hi = params.Gmax * (1 + 1e-12)
    if np.any(~np.isfinite(G)) or np.any(G < lo) or np.any(G > hi):
        raise DomainError(f"conductance outside [{params.Gmin:.4g}, {params.Gmax:.4g}] S: {G}")


def delta_g_norm(dt, g_i, params: ModelParams = ModelParams()):
    """Normalized conductance change for spike-time difference(s) ``dt``.

    Works on scalars and broadcasts over arrays. Raises DomainError if any
    ``g_i`` lies outside ``[Gmin, Gmax]``.
    """
    _check_range(g_i, params)
    return _delta_g_norm(np.asarray(dt, dtype=float), np.asarray(g_i, dtype=float), params)


def _delta_g_norm(dt, G, p):
    g = np.log10(G / p.G0)
    with np.errstate(over="ignore"):
        pot = p.A * (np.exp(-dt / (p.alpha_ap + g * p.beta_ap))
                     - np.exp(-dt / (p.alpha_bp + g * p.beta_bp)))
        dep = -p.A * (np.exp(dt / (p.alpha_an + g * p.beta_an))
                      - np.exp(dt / (p.alpha_bn + g * p.beta_bn)))
    out = np.where(dt > 0, pot, dep)
    return out[()] if out.ndim == 0 else out


def apply_normalized(G, dgn, params: ModelParams = ModelParams()):
    """Convert normalized change(s) to new conductance(s), clamped to range."""
    G = np.asarray(G, dtype=float)
    dgn = np.asarray(dgn, dtype=float)
    with np.errstate(divide="ignore"):
        Gf = np.where(dgn >= 0, G * (1.0 + dgn), G / (1.0 - dgn))
    out = np.clip(Gf, params.Gmin, params.Gmax)
    return out[()] if out.ndim == 0 else out


def sample_change(mu, sigma_fraction, rng):
    """Draw programming-noise-perturbed normalized changes ~ N(mu, s |mu|)."""
    mu = np.asarray(mu, dtype=float)
    if sigma_fraction == 0 or rng is None:
        return mu
    return mu + sigma_fraction * np.abs(mu) * rng.standard_normal(mu.shape)


def update_conductance(G, dt, params: ModelParams = ModelParams(), sigma_fraction=0.0, rng=None):
    """Vectorized single-device update; returns new conductance array."""
    mu = delta_g_norm(dt, G, params)
    return apply_normalized(G, sample_change(mu, sigma_fraction, rng), params)


def apply_update(state: DeviceState, dt, params: ModelParams | None = None,
                 noise: NoiseConfig | None = None, rng=None) -> DeviceState:
    params = params or state.params
    sigma = 0.0 if noise is None else noise.sigma_fraction
    if sigma and rng is None:
        rng = np.random.default_rng(noise.seed)
    G = update_conductance(state.conductance, dt, params, sigma, rng)
    return DeviceState(float(G), params)


def solve_boundaries(params: ModelParams = ModelParams()):
    """Conductances where the paired time-constant lines intersect.

    Returns ``(lower, upper)`` in siemens: ``lower`` from the depression pair
    (an/bn), ``upper`` from the potentiation pair (ap/bp).
    """
    if params.beta_ap == params.beta_bp:
        raise DomainError("potentiation time-constant lines are parallel; no intersection")
    if params.beta_an == params.beta_bn:
        raise DomainError("depression time-constant lines are parallel; no intersection")
    g_up = (params.alpha_bp - params.alpha_ap) / (params.beta_ap - params.beta_bp)
    g_lo = (params.alpha_bn - params.alpha_an) / (params.beta_an - params.beta_bn)
    return params.G0 * 10.0 ** g_lo, params.G0 * 10.0 ** g_up


@dataclass
class MultiDeviceSynapse:
    """One logical synapse made of ``n`` devices updated round-robin."""

    devices: np.ndarray
    next_index: int = 0

    def __post_init__(self):
        self.devices = np.atleast_1d(np.asarray(self.devices, dtype=float)).copy()
        if self.devices.ndim != 1 or len(self.devices) < 1:
            raise DomainError("a synapse needs at least one device")
        self.next_index %= len(self.devices)

    @classmethod
    def uniform(cls, n, G, params: ModelParams = ModelParams()):
        _check_range(G, params)
        return cls(np.full(n, float(G)))

    @property
    def n(self):
        return len(self.devices)


def synapse_update(syn: MultiDeviceSynapse, dt, params: ModelParams = ModelParams(),
                   noise: NoiseConfig | None = None, rng=None) -> MultiDeviceSynapse:
    """Update only the device under the round-robin pointer, then advance it."""
    devices = syn.devices.copy()
    i = syn.next_index
    state = apply_update(DeviceState(devices[i], params), dt, params, noise, rng)
    devices[i] = state.conductance
    return MultiDeviceSynapse(devices, (i + 1) % syn.n)


def effective_conductance(syn: MultiDeviceSynapse, params: ModelParams = ModelParams()):
    return float(np.sum(syn.devices - params.Gmin))


class SynapseArray:
    """Dense bank of multi-device synapses, shape ``(n_post, n_pre, n_dev)``.

    Each (post, pre) synapse keeps its own round-robin pointer.
    """

    def __init__(self, conductance, pointer=None, params: ModelParams = ModelParams()):
        conductance = np.asarray(conductance, dtype=float)
        if conductance.ndim == 2:
            conductance = conductance[:, :, None]
        if conductance.ndim != 3:
            raise DomainError("conductance must have shape (n_post, n_pre[, n_dev])")
        _check_range(conductance, params)
        self.G = conductance.copy()
        self.pointer = (np.zeros(self.G.shape[:2], dtype=np.int64) if pointer is None
                        else np.asarray(pointer, dtype=np.int64).copy())
        self.params = params

    @property
    def shape(self):
        return self.G.shape

    def effective(self):
        """Sum over devices of ``G - Gmin``, shape ``(n_post, n_pre)``."""
        return (self.G - self.params.Gmin).sum(axis=2)

    def update_row(self, post, dt, sigma_fraction=0.0, rng=None, pre=None):
        """Apply one update per synapse of output ``post`` (all or ``pre`` subset).

        ``dt`` broadcasts against the selected synapses. Returns the change in
        conductance of the programmed devices.
        """
        pre = np.arange(self.G.shape[1]) if pre is None else np.asarray(pre)
        idx = self.pointer[post, pre]
        G_old = self.G[post, pre, idx]
        G_new = update_conductance(G_old, np.broadcast_to(dt, G_old.shape),
                                   self.params, sigma_fraction, rng)
        self.G[post, pre, idx] = G_new
        self.pointer[post, pre] = (idx + 1) % self.G.shape[2]
        return G_new - G_old
