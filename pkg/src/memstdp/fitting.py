"""Extract device-model parameters from STDP measurements.

Pipeline: average measured normalized changes per conductance range and per
spike-time difference, smooth each averaged curve, fit a difference of
exponentials ``A (exp(-x / tau_a) - exp(-x / tau_b))`` to each lobe, then
regress the fitted time constants against ``log10(G / G0)``.

For the depression lobe ``x = |dt|``; with ``A > 0`` the fitted ``tau_a`` is
the model's ``tau_bn`` and ``tau_b`` is ``tau_an``.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from .device import G0, DomainError, ModelParams, delta_g_norm, solve_boundaries


@dataclass(frozen=True)
class StdpRecord:
    delta_t: float      # ms
    g_initial: float    # S
    g_final: float      # S

    def __post_init__(self):
        if not (self.g_initial > 0 and self.g_final > 0):
            raise DomainError("conductances must be positive")

    @property
    def delta_g_norm(self):
        return (self.g_final - self.g_initial) / min(self.g_initial, self.g_final)


def write_records_csv(path, records):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["delta_t_ms", "g_initial_S", "g_final_S"])
        for r in records:
            w.writerow([f"{r.delta_t:.6g}", f"{r.g_initial:.9e}", f"{r.g_final:.9e}"])


def read_records_csv(path):
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    try:
        return [StdpRecord(float(r["delta_t_ms"]), float(r["g_initial_S"]),
                           float(r["g_final_S"])) for r in rows]
    except KeyError as exc:
        raise ValueError(f"{path}: missing column {exc}") from None


def synthesize_records(conductances, delta_ts, params: ModelParams = ModelParams(),
                       sigma_fraction=0.0, rng=None):
    """Records produced by the model itself at every (G, dt) combination.

    With ``sigma_fraction > 0`` each normalized change is perturbed by
    Gaussian noise of standard deviation ``sigma_fraction * |mean|``.
    """
    G, dt = np.meshgrid(np.asarray(conductances, float), np.asarray(delta_ts, float),
                        indexing="ij")
    G, dt = G.ravel(), dt.ravel()
    mu = delta_g_norm(dt, G, params)
    if sigma_fraction:
        mu = mu + sigma_fraction * np.abs(mu) * rng.standard_normal(mu.shape)
    # no clamping: the measurement is the raw change
    with np.errstate(divide="ignore"):
        Gf = np.where(mu >= 0, G * (1 + mu), G / (1 - mu))
    return [StdpRecord(float(a), float(b), float(c)) for a, b, c in zip(dt, G, Gf)]


@dataclass
class BinnedCurve:
    g_low: float
    g_high: float
    mean_log_g: float
    delta_t: np.ndarray
    mean: np.ndarray
    count: np.ndarray

    def lobe(self, sign):
        """``(x, y)`` of the potentiation (+1) or depression (-1) lobe, ``x = |dt|``."""
        keep = self.delta_t > 0 if sign > 0 else self.delta_t < 0
        x = np.abs(self.delta_t[keep])
        order = np.argsort(x)
        return x[order], self.mean[keep][order]


def bin_average(records, conductance_ranges, dt_window=(-40.0, 40.0), g0=G0):
    """Average normalized changes per ``[g_low, g_high)`` range and unique dt.

    Records outside ``dt_window`` (inclusive) are discarded; ranges with no
    records are left out of the result.
    """
    if not records:
        raise ValueError("no records to average")
    dt = np.array([r.delta_t for r in records])
    gi = np.array([r.g_initial for r in records])
    val = np.array([r.delta_g_norm for r in records])
    inside = (dt >= dt_window[0]) & (dt <= dt_window[1])
    curves = []
    for lo, hi in conductance_ranges:
        sel = inside & (gi >= lo) & (gi < hi)
        if not sel.any():
            continue
        u, inv = np.unique(dt[sel], return_inverse=True)
        count = np.bincount(inv)
        mean = np.bincount(inv, weights=val[sel]) / count
        curves.append(BinnedCurve(lo, hi, float(np.mean(np.log10(gi[sel] / g0))), u, mean, count))
    return curves


def smoothing_matrix(n, window=3):
    """Centred moving average as an ``(n, n)`` matrix; the window shrinks
    symmetrically at the ends so that the first and last samples are kept."""
    if window < 1 or window % 2 == 0:
        raise ValueError("smoothing window must be a positive odd number")
    S = np.zeros((n, n))
    half = window // 2
    for i in range(n):
        h = min(half, i, n - 1 - i)
        S[i, i - h:i + h + 1] = 1.0 / (2 * h + 1)
    return S


def smooth(y, window=3):
    y = np.asarray(y, dtype=float)
    return smoothing_matrix(len(y), window) @ y


@dataclass
class ExpDiffFit:
    A: float
    tau_a: float
    tau_b: float
    residual: float = np.nan
    converged: bool = False
    iterations: int = 0
    history: list = field(default_factory=list, repr=False)
    stalled: bool = False   # stopped at floating-point resolution before reaching tol

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        return self.A * (np.exp(-x / self.tau_a) - np.exp(-x / self.tau_b))


def _basis(theta, x):
    ta, tb = np.exp(theta)
    ea, eb = np.exp(-x / ta), np.exp(-x / tb)
    return ta, tb, ea, eb


def _best_amplitude(phi, y):
    den = float(phi @ phi)
    return float(phi @ y) / den if den > 0 else 0.0


def _loss_grad(theta, x, y, A_fixed=None, S=None):
    """Loss and gradient in ``(log tau_a, log tau_b)`` with ``A`` at its optimum.

    For fixed time constants the model is linear in ``A``, so ``A`` is
    eliminated in closed form; by the envelope theorem the gradient of the
    reduced loss is the partial gradient at that ``A``.
    """
    ta, tb, ea, eb = _basis(theta, x)
    da, db = ea * x / ta, -eb * x / tb
    phi = ea - eb
    if S is not None:
        phi, da, db = S @ phi, S @ da, S @ db
    A = _best_amplitude(phi, y) if A_fixed is None else A_fixed
    r = A * phi - y
    loss = 0.5 * float(r @ r)
    g = A * np.array([r @ da, r @ db])
    return loss, g


def initial_guess(x, y):
    """Rough ``ExpDiffFit`` from the peak and the decay of the tail.

    The slow constant comes from a log-linear fit to the tail beyond the
    peak, the fast one from the peak position, and ``A`` from the peak value.
    """
    x, y = np.asarray(x, float), np.asarray(y, float)
    sign = 1.0 if y[np.argmax(np.abs(y))] >= 0 else -1.0
    ys = sign * y
    k = int(np.argmax(ys))
    xp = max(x[k], 1e-3)
    tail = (x > x[k]) & (ys > 1e-3 * ys[k])
    tau_slow = 2.0 * xp
    if tail.sum() >= 2:
        slope = np.polyfit(x[tail], np.log(ys[tail]), 1)[0]
        if slope < 0:
            tau_slow = max(-1.0 / slope, 1.01 * xp)

    def peak(tb):
        return np.log(tau_slow / tb) * tau_slow * tb / (tau_slow - tb)

    # peak position increases with the fast constant on (0, tau_slow)
    lo, hi = 1e-6 * tau_slow, tau_slow * (1 - 1e-9)
    if peak(hi) <= xp:
        tau_fast = 0.5 * tau_slow
    else:
        for _ in range(100):
            mid = 0.5 * (lo + hi)
            lo, hi = (mid, hi) if peak(mid) < xp else (lo, mid)
        tau_fast = 0.5 * (lo + hi)
    shape = np.exp(-xp / tau_slow) - np.exp(-xp / tau_fast)
    return ExpDiffFit(sign * ys[k] / shape, tau_slow, tau_fast)


def fit_exp_diff(x, y, init: ExpDiffFit | None = None, tol=1e-9, max_iter=100_000,
                 record_history=False, A_fixed=None, smooth_window=1):
    """Least-squares fit of ``A (exp(-x / tau_a) - exp(-x / tau_b))``.

    Gradient descent on ``(log tau_a, log tau_b)`` with analytic gradients
    and a backtracking (Armijo) line search, so the loss never increases.
    Each line search starts from the Barzilai-Borwein step length.
    ``A`` is solved exactly at every point, which removes the strong
    amplitude/time-constant coupling that stalls descent on all three.
    Pass ``A_fixed`` to hold the amplitude at a known value instead; the
    sign of the data then selects the order of the time constants.
    Stops when the gradient norm drops below ``tol``; otherwise returns the
    best point with ``converged=False`` after ``max_iter`` iterations, or
    earlier with ``stalled=True`` once no step reduces the loss in floating
    point. The result is normalized to ``A > 0`` by swapping the time
    constants.
    """
    x, y = np.asarray(x, float), np.asarray(y, float)
    if x.shape != y.shape or len(x) < 4:
        raise ValueError("need at least 4 points with matching x and y")
    if np.any(x < 0):
        raise ValueError("x must be non-negative (use |dt|)")
    S = smoothing_matrix(len(x), smooth_window) if smooth_window > 1 else None
    if S is not None:
        y = S @ y
    init = initial_guess(x, y) if init is None else init
    if not (init.tau_a > 0 and init.tau_b > 0):
        raise DomainError("initial time constants must be positive")
    theta = np.log([init.tau_a, init.tau_b])
    if theta[0] == theta[1]:
        theta[1] -= 1e-3
    if A_fixed is not None:
        A_fixed = abs(float(A_fixed))
        # with A > 0, negative data needs tau_a < tau_b
        if init.A < 0:
            theta = theta[::-1].copy()
    fg = lambda th: _loss_grad(th, x, y, A_fixed, S)
    loss, g = fg(theta)
    step = 1.0
    history = [loss] if record_history else []
    converged = stalled = False
    it = 0
    for it in range(1, max_iter + 1):
        gn2 = float(g @ g)
        if np.sqrt(gn2) < tol:
            converged = True
            it -= 1
            break
        while True:
            cand = theta - step * g
            c_loss, c_g = fg(cand)
            if np.isfinite(c_loss) and c_loss <= loss - 1e-4 * step * gn2:
                break
            step *= 0.5
            if step < 1e-300:
                break
        if step < 1e-300 or c_loss >= loss:
            # no representable decrease left along the gradient
            stalled = True
            break
        # next trial step from the Barzilai-Borwein secant estimate
        ds, dg = cand - theta, c_g - g
        curv = float(ds @ dg)
        step = float(ds @ ds) / curv if curv > 0 else 2.0 * step
        theta, loss, g = cand, c_loss, c_g
        if record_history:
            history.append(loss)
    ta, tb, ea, eb = _basis(theta, x)
    phi = ea - eb if S is None else S @ (ea - eb)
    A = _best_amplitude(phi, y) if A_fixed is None else A_fixed
    ta, tb = float(ta), float(tb)
    if A < 0:
        A, ta, tb = -A, tb, ta
    return ExpDiffFit(float(A), ta, tb, loss, converged, it, history, stalled)


@dataclass(frozen=True)
class TauLine:
    alpha: float
    beta: float
    residual: float

    def __call__(self, g):
        return self.alpha + self.beta * np.asarray(g, dtype=float)


def fit_tau_line(log_g, tau):
    """Ordinary least squares ``tau = alpha + beta * log_g``."""
    log_g, tau = np.asarray(log_g, float), np.asarray(tau, float)
    if len(np.unique(log_g)) < 2:
        raise DomainError("need at least two distinct conductances to fit a line")
    X = np.column_stack([np.ones_like(log_g), log_g])
    coef, *_ = np.linalg.lstsq(X, tau, rcond=None)
    res = tau - X @ coef
    return TauLine(float(coef[0]), float(coef[1]), float(res @ res))


def fit_tau_lines(log_g, fits_pot, fits_dep):
    """Lines for the four model time constants from per-range lobe fits."""
    return {
        "ap": fit_tau_line(log_g, [f.tau_a for f in fits_pot]),
        "bp": fit_tau_line(log_g, [f.tau_b for f in fits_pot]),
        "an": fit_tau_line(log_g, [f.tau_b for f in fits_dep]),
        "bn": fit_tau_line(log_g, [f.tau_a for f in fits_dep]),
    }


@dataclass
class ExtractionReport:
    params: ModelParams
    lines: dict
    curves: list
    fits_pot: list
    fits_dep: list
    boundaries: tuple

    def to_dict(self):
        return {
            "params": self.params.to_dict(),
            "lines": {k: {"alpha": v.alpha, "beta": v.beta, "residual": v.residual}
                      for k, v in self.lines.items()},
            "ranges": [
                {"g_low_S": c.g_low, "g_high_S": c.g_high, "mean_log_g": c.mean_log_g,
                 "potentiation": _fit_dict(fp), "depression": _fit_dict(fd)}
                for c, fp, fd in zip(self.curves, self.fits_pot, self.fits_dep)],
            "boundaries_S": list(self.boundaries),
            "boundaries_G0": [b / self.params.G0 for b in self.boundaries],
        }


def _shared_amplitude(fits):
    """Median amplitude over the fits whose time constants are well separated.

    When ``tau_a`` and ``tau_b`` nearly coincide only ``A (tau_a - tau_b)`` is
    determined, so such lobes (close to a boundary conductance) are ignored.
    """
    sep = np.array([abs(np.log(f.tau_a / f.tau_b)) for f in fits])
    amps = np.array([f.A for f in fits])
    good = sep >= np.median(sep)
    return float(np.median(amps[good]))


def _fit_dict(f):
    return {"A": f.A, "tau_a": f.tau_a, "tau_b": f.tau_b, "residual": f.residual,
            "converged": f.converged, "stalled": f.stalled, "iterations": f.iterations}


def extract_params(records, conductance_ranges, dt_window=(-40.0, 40.0), smooth_window=3,
                   tol=1e-9, max_iter=100_000, base: ModelParams = ModelParams()):
    """Run the whole pipeline and return an ExtractionReport.

    The model shares one amplitude across all lobes. Each lobe is first fitted
    freely; the shared ``A`` is the median over the best-determined of those
    fits, and every lobe is then refitted with ``A`` held there. ``G0``,
    ``Gmin`` and ``Gmax`` are taken from ``base``.
    """
    curves = bin_average(records, conductance_ranges, dt_window, base.G0)
    if len(curves) < 2:
        raise DomainError("need at least two populated conductance ranges")
    lobes = [[c.lobe(sign) for c in curves] for sign in (1, -1)]
    kw = dict(tol=tol, max_iter=max_iter, smooth_window=smooth_window)
    free = [fit_exp_diff(x, y, **kw) for side in lobes for x, y in side]
    A = _shared_amplitude(free)
    fits_pot, fits_dep = ([fit_exp_diff(x, y, A_fixed=A, **kw) for x, y in side]
                          for side in lobes)
    log_g = [c.mean_log_g for c in curves]
    lines = fit_tau_lines(log_g, fits_pot, fits_dep)
    params = ModelParams(
        A=A,
        alpha_ap=lines["ap"].alpha, beta_ap=lines["ap"].beta,
        alpha_bp=lines["bp"].alpha, beta_bp=lines["bp"].beta,
        alpha_an=lines["an"].alpha, beta_an=lines["an"].beta,
        alpha_bn=lines["bn"].alpha, beta_bn=lines["bn"].beta,
        G0=base.G0, Gmin=base.Gmin, Gmax=base.Gmax)
    return ExtractionReport(params, lines, curves, fits_pot, fits_dep, solve_boundaries(params))
