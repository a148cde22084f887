"""Time-stepping kernels for LIF populations.

Both kernels exist twice: a numba-compiled scalar-loop version and a
numpy version that vectorizes over neurons and loops over time in Python.
They share one state convention and agree to rounding error; see
``benchmarks/bench_backends.py`` for the speed comparison.

Conventions (SI inside the kernels):
  * ``dt`` in seconds; voltages in volts; currents in amperes.
  * Input spikes arrive on the step grid as a CSR table: the inputs firing
    at step ``k`` are ``ev_idx[ev_ptr[k]:ev_ptr[k + 1]]``.
  * The synaptic current kernel is a sum of delayed exponentials. Component
    ``c`` keeps one trace per neuron that decays by ``decays[c]`` each step
    and jumps by ``amps[c] * W[i, j]`` ``delays[c]`` steps after input ``i``
    fires. The current into neuron ``j`` is the sum of its traces, so each
    kernel is sampled exactly at step times, with the weight frozen at
    spike arrival.
  * Membrane update is Heun's method (explicit RK2) using the current at
    both ends of the step.
  * ``lif_network`` locates each threshold crossing inside its step by
    linear interpolation and ends the refractory period at crossing time
    plus ``ref_steps`` steps; the first step after release is integrated
    over its remaining fraction only. This keeps spike times accurate to
    well below ``dt`` over long runs instead of rounding every interval
    up to the grid.
  * ``hold[j] > 0`` clamps neuron ``j`` at ``EL`` for that many more steps
    (refractory period or winner-take-all block).
"""
import numpy as np

from ._backend import njit, resolve


# ----------------------------------------------------------------- numba ---

@njit(cache=True)
def _add_events_nb(k, ev_ptr, ev_idx, W, amps, delays, tr):
    n_out = W.shape[1]
    nsteps = ev_ptr.shape[0] - 1
    for c in range(amps.shape[0]):
        s = k - delays[c]
        if s < 0 or s >= nsteps:
            continue
        a = amps[c]
        for e in range(ev_ptr[s], ev_ptr[s + 1]):
            i = ev_idx[e]
            for j in range(n_out):
                tr[c, j] += a * W[i, j]


@njit(cache=True)
def _decay_nb(tr, decays):
    for c in range(tr.shape[0]):
        d = decays[c]
        for j in range(tr.shape[1]):
            tr[c, j] *= d


@njit(cache=True)
def _lif_network_nb(ext, ev_ptr, ev_idx, W, amps, decays, delays, theta, v0, dt, Cm, gL, EL,
                    ref_steps, record):
    nsteps = ev_ptr.shape[0] - 1
    n_out = W.shape[1]
    n_comp = amps.shape[0]
    has_ext = ext.shape[0] > 0
    raster = np.zeros((nsteps, n_out), dtype=np.float32)
    trace = np.empty((nsteps if record else 0, n_out))
    V = v0.copy()
    tr = np.zeros((n_comp, n_out))
    i0 = np.empty(n_out)
    hold = np.zeros(n_out, dtype=np.int64)
    start = np.zeros(n_out)
    _add_events_nb(0, ev_ptr, ev_idx, W, amps, delays, tr)
    if record:
        trace[0, :] = V
    for k in range(nsteps - 1):
        for j in range(n_out):
            acc = 0.0
            for c in range(n_comp):
                acc += tr[c, j]
            if has_ext:
                acc += ext[k, j]
            i0[j] = acc
        _decay_nb(tr, decays)
        _add_events_nb(k + 1, ev_ptr, ev_idx, W, amps, delays, tr)
        for j in range(n_out):
            if hold[j] > 0:
                V[j] = EL
                hold[j] -= 1
                continue
            i1 = 0.0
            for c in range(n_comp):
                i1 += tr[c, j]
            if has_ext:
                i1 += ext[k + 1, j]
            s = start[j]
            h = 1.0 - s
            ia = i0[j] + s * (i1 - i0[j])
            v_old = V[j]
            s1 = (ia - gL * (v_old - EL)) / Cm
            vp = v_old + h * dt * s1
            s2 = (i1 - gL * (vp - EL)) / Cm
            V[j] = v_old + 0.5 * h * dt * (s1 + s2)
            start[j] = 0.0
            if V[j] >= theta[j]:
                f = s + h * (theta[j] - v_old) / (V[j] - v_old)
                f = min(max(f, 1e-6), 1.0)
                raster[k + 1, j] = f
                V[j] = EL
                if f < 1.0 and ref_steps > 0:
                    hold[j] = ref_steps - 1
                    start[j] = f
                else:
                    hold[j] = ref_steps
        if record:
            trace[k + 1, :] = V
    return raster, trace


@njit(cache=True)
def _wta_advance_nb(k_start, ev_ptr, ev_idx, W, amps, decays, delays, V, tr, hold, theta,
                    dt, Cm, gL, EL):
    nsteps = ev_ptr.shape[0] - 1
    n_out = W.shape[1]
    n_comp = amps.shape[0]
    i0 = np.empty(n_out)
    for k in range(k_start, nsteps - 1):
        for j in range(n_out):
            acc = 0.0
            for c in range(n_comp):
                acc += tr[c, j]
            i0[j] = acc
        _decay_nb(tr, decays)
        _add_events_nb(k + 1, ev_ptr, ev_idx, W, amps, delays, tr)
        winner = -1
        best = 0.0
        for j in range(n_out):
            if hold[j] > 0:
                V[j] = EL
                hold[j] -= 1
                continue
            i1 = 0.0
            for c in range(n_comp):
                i1 += tr[c, j]
            s1 = (i0[j] - gL * (V[j] - EL)) / Cm
            vp = V[j] + dt * s1
            s2 = (i1 - gL * (vp - EL)) / Cm
            V[j] += 0.5 * dt * (s1 + s2)
            if V[j] >= theta[j]:
                over = V[j] - theta[j]
                if winner < 0 or over > best:
                    winner = j
                    best = over
        if winner >= 0:
            return k + 1, winner
    return -1, -1


# ----------------------------------------------------------------- numpy ---

def _add_events_np(k, ev_ptr, ev_idx, W, amps, delays, tr):
    nsteps = ev_ptr.shape[0] - 1
    for c in range(len(amps)):
        s = k - delays[c]
        if 0 <= s < nsteps and ev_ptr[s + 1] > ev_ptr[s]:
            tr[c] += amps[c] * W[ev_idx[ev_ptr[s]:ev_ptr[s + 1]]].sum(axis=0)


def _lif_network_np(ext, ev_ptr, ev_idx, W, amps, decays, delays, theta, v0, dt, Cm, gL, EL,
                    ref_steps, record):
    nsteps = ev_ptr.shape[0] - 1
    n_out = W.shape[1]
    has_ext = ext.shape[0] > 0
    raster = np.zeros((nsteps, n_out), dtype=np.float32)
    trace = np.empty((nsteps if record else 0, n_out))
    V = v0.astype(float).copy()
    tr = np.zeros((len(amps), n_out))
    hold = np.zeros(n_out, dtype=np.int64)
    start = np.zeros(n_out)
    _add_events_np(0, ev_ptr, ev_idx, W, amps, delays, tr)
    col = decays[:, None]
    if record:
        trace[0] = V
    for k in range(nsteps - 1):
        i0 = tr.sum(axis=0)
        if has_ext:
            i0 = i0 + ext[k]
        tr *= col
        _add_events_np(k + 1, ev_ptr, ev_idx, W, amps, delays, tr)
        i1 = tr.sum(axis=0)
        if has_ext:
            i1 = i1 + ext[k + 1]
        h = 1.0 - start
        ia = i0 + start * (i1 - i0)
        s1 = (ia - gL * (V - EL)) / Cm
        vp = V + h * dt * s1
        s2 = (i1 - gL * (vp - EL)) / Cm
        held = hold > 0
        v_new = np.where(held, EL, V + 0.5 * h * dt * (s1 + s2))
        hold = np.where(held, hold - 1, hold)
        fired = (~held) & (v_new >= theta)
        start = np.where(held, start, 0.0)
        if fired.any():
            hf, vf = h[fired], V[fired]
            f = np.clip((1.0 - hf) + hf * (theta[fired] - vf) / (v_new[fired] - vf), 1e-6, 1.0)
            raster[k + 1, fired] = f
            v_new[fired] = EL
            early = (f < 1.0) & (ref_steps > 0)
            hold[fired] = np.where(early, ref_steps - 1, ref_steps)
            start[fired] = np.where(early, f, 0.0)
        V = v_new
        if record:
            trace[k + 1] = V
    return raster, trace


def _wta_advance_np(k_start, ev_ptr, ev_idx, W, amps, decays, delays, V, tr, hold, theta,
                    dt, Cm, gL, EL):
    nsteps = ev_ptr.shape[0] - 1
    col = decays[:, None]
    for k in range(k_start, nsteps - 1):
        i0 = tr.sum(axis=0)
        tr *= col
        _add_events_np(k + 1, ev_ptr, ev_idx, W, amps, delays, tr)
        s1 = (i0 - gL * (V - EL)) / Cm
        vp = V + dt * s1
        s2 = (tr.sum(axis=0) - gL * (vp - EL)) / Cm
        held = hold > 0
        V[:] = np.where(held, EL, V + 0.5 * dt * (s1 + s2))
        hold[held] -= 1
        over = np.where(held, -np.inf, V - theta)
        winner = int(np.argmax(over))
        if over[winner] >= 0:
            return k + 1, winner
    return -1, -1


# ------------------------------------------------------------- dispatch ---

def _kernel_arrays(amps, decays, delays):
    return (np.asarray(amps, dtype=float), np.asarray(decays, dtype=float),
            np.asarray(delays, dtype=np.int64))


def lif_network(ext, ev_ptr, ev_idx, W, amps, decays, delays, theta, v0, dt, Cm, gL, EL,
                ref_steps, record=False, backend=None):
    """Integrate independent LIF neurons driven by weighted input spikes.

    Returns ``(raster[nsteps, n_out] float32, trace[nsteps or 0, n_out])``.
    ``raster[k, j] = f > 0`` marks a spike of neuron ``j`` crossing
    threshold at ``(k - 1 + f) * dt``, i.e. a fraction ``f`` into the step
    that ends at grid point ``k``.
    ``ext`` is an optional ``(nsteps, n_out)`` injected current (pass an
    array with zero rows for none).
    """
    args = (np.ascontiguousarray(ext, dtype=float), np.asarray(ev_ptr, dtype=np.int64),
            np.asarray(ev_idx, dtype=np.int64), np.ascontiguousarray(W, dtype=float),
            *_kernel_arrays(amps, decays, delays), np.asarray(theta, dtype=float),
            np.asarray(v0, dtype=float), float(dt), float(Cm), float(gL), float(EL),
            int(ref_steps), bool(record))
    if resolve(backend) == "numba":
        return _lif_network_nb(*args)
    return _lif_network_np(*args)


def wta_advance(k_start, ev_ptr, ev_idx, W, amps, decays, delays, V, tr, hold, theta, dt, Cm,
                gL, EL, backend=None):
    """Advance a winner-take-all layer until the first output spike.

    ``V``, ``tr`` (kernel traces, ``(n_comp, n_out)``) and ``hold`` describe
    the state at step ``k_start`` and are updated in place. Returns
    ``(step, winner)`` for the first step at which some neuron reaches
    threshold (state left at that step, before any reset), or ``(-1, -1)``
    if the window ends first. Among simultaneous crossings the neuron
    furthest above its threshold wins, ties to the lowest index.
    """
    args = (int(k_start), ev_ptr, ev_idx, W, *_kernel_arrays(amps, decays, delays), V, tr,
            hold, theta, float(dt), float(Cm), float(gL), float(EL))
    if resolve(backend) == "numba":
        k, j = _wta_advance_nb(*args)
    else:
        k, j = _wta_advance_np(*args)
    return int(k), int(j)


def events_csr(steps, inputs, nsteps):
    """Build the CSR event table from parallel arrays of (step, input index)."""
    steps = np.asarray(steps, dtype=np.int64)
    inputs = np.asarray(inputs, dtype=np.int64)
    keep = (steps >= 0) & (steps < nsteps)
    steps, inputs = steps[keep], inputs[keep]
    order = np.lexsort((inputs, steps))
    counts = np.bincount(steps, minlength=nsteps)
    ptr = np.zeros(nsteps + 1, dtype=np.int64)
    np.cumsum(counts, out=ptr[1:])
    return ptr, inputs[order]
