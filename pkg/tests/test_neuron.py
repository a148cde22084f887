import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from memstdp.device import DomainError
from memstdp.neuron import (LIFParams, SpikeTrain, SynapticKernel, WTALayer, lif_run,
                            poisson_train, poisson_trains, simulate_layer, syn_current,
                            trains_to_events, write_trace_csv)
from memstdp.waveform import WaveformParams

P = LIFParams()


def psp_closed_form(t, W, p=P):
    """Membrane deflection (V) for one input spike at t = 0 of weight W (A)."""
    t = np.asarray(t, float) * 1e-3
    tm = p.Cm / p.gL
    v = np.zeros_like(t)
    for sign, tau in ((1.0, p.tau1 * 1e-3), (-1.0, p.tau2 * 1e-3)):
        v += sign * (np.exp(-t / tau) - np.exp(-t / tm)) / (1 / tm - 1 / tau)
    return W / p.Cm * v


def lif_period(I, p=P):
    drive = I / p.gL
    return p.tau_m * math.log(drive / (drive - (p.theta - p.EL))) + p.t_refrac


def test_params_validation():
    assert P.tau_m == pytest.approx(10.0)
    with pytest.raises(DomainError):
        LIFParams(tau1=1.0, tau2=2.0)
    with pytest.raises(DomainError):
        LIFParams(theta=-0.08)
    with pytest.raises(DomainError):
        LIFParams(Cm=0)


def test_spike_train_contract():
    assert len(SpikeTrain()) == 0
    assert SpikeTrain([1, 2]) == SpikeTrain([1.0, 2.0])
    for bad in ([2, 1], [1, 1], [-1], [float("nan")]):
        with pytest.raises(DomainError):
            SpikeTrain(bad)


def test_poisson_zero_rate_and_negative():
    rng = np.random.default_rng(0)
    assert len(poisson_train(0.0, 1000.0, rng)) == 0
    with pytest.raises(DomainError):
        poisson_train(-1.0, 10.0, rng)


def test_poisson_mean_count():
    rng = np.random.default_rng(1)
    counts = np.array([len(poisson_train(20.0, 1000.0, rng)) for _ in range(1000)])
    # sample mean of 1000 Poisson(20) draws has sd sqrt(20 / 1000)
    assert abs(counts.mean() - 20) < 3 * math.sqrt(20 / 1000)
    assert counts.var() == pytest.approx(20, rel=0.15)


def test_poisson_intervals_exponential():
    rng = np.random.default_rng(2)
    t = poisson_train(50.0, 200_000.0, rng).times
    isi = np.sort(np.diff(t))
    n = isi.size
    cdf = 1 - np.exp(-isi * 50.0e-3)
    d = max(np.max(np.arange(1, n + 1) / n - cdf), np.max(cdf - np.arange(n) / n))
    assert d < 1.628 / math.sqrt(n)   # Kolmogorov critical value at the 1% level


def test_poisson_trains_shape():
    trains = poisson_trains(np.zeros((3, 4)), 100.0, np.random.default_rng(0))
    assert len(trains) == 12


def test_kernel_values():
    assert syn_current(1.0, 0.0) == 0.0
    t_star = math.log(5 / 1.25) * 5 * 1.25 / (5 - 1.25)
    assert t_star == pytest.approx(2.31, abs=0.01)
    ts = np.linspace(0, 20, 200001)
    assert ts[np.argmax(syn_current(1.0, ts))] == pytest.approx(t_star, abs=1e-3)
    assert syn_current(1.0, 1000.0) == pytest.approx(0.0, abs=1e-50)
    assert syn_current(2.0, 3.0) == pytest.approx(2 * syn_current(1.0, 3.0))


def test_kernel_from_waveform():
    k = SynapticKernel.from_waveform(WaveformParams())
    assert k(0.0) == pytest.approx(-0.4)
    assert k(8.99) < 0 and k(9.0) > 0
    amps, decays, delays = k.arrays(0.1)
    assert list(delays) == [0, 90]
    assert decays[1] == pytest.approx(math.exp(-0.1 / 30))
    with pytest.raises(DomainError):
        SynapticKernel((1.0,), (0.0,), (0.0,))


def test_rest_without_input():
    spikes, trace = lif_run([], duration=100.0)
    assert len(spikes) == 0
    assert np.all(trace[:, 1] == P.EL)


def test_constant_current_rate_matches_closed_form():
    spikes, _ = lif_run([], duration=2000.0, current=np.full(20001, 5.4e-9), record=False)
    isi = np.diff(spikes.times)
    assert lif_period(5.4e-9) == pytest.approx(11.93, abs=0.01)
    assert isi.mean() == pytest.approx(lif_period(5.4e-9), rel=0.02)
    assert 1000.0 / isi.mean() == pytest.approx(83.8, rel=0.02)


def test_subthreshold_current_never_fires():
    assert P.gL * (P.theta - P.EL) == pytest.approx(2.7e-9)
    spikes, trace = lif_run([], duration=500.0, current=np.full(5001, 2.0e-9))
    assert len(spikes) == 0
    assert trace[:, 1].max() < P.theta


def test_halving_dt_shifts_spikes_less_than_dt():
    fine = LIFParams(dt=0.05)
    a, _ = lif_run([], P, 300.0, current=np.full(P.nsteps(300.0), 4.0e-9), record=False)
    b, _ = lif_run([], fine, 300.0, current=np.full(fine.nsteps(300.0), 4.0e-9), record=False)
    assert len(a) == len(b) > 5
    assert np.max(np.abs(a.times - b.times)) < P.dt


def test_psp_matches_closed_form():
    _, trace = lif_run([(SpikeTrain([10.0]), 1e-9)], duration=80.0)
    t, v = trace[:, 0], trace[:, 1] - P.EL
    expect = np.where(t >= 10.0, psp_closed_form(t - 10.0, 1e-9), 0.0)
    np.testing.assert_allclose(v, expect, atol=2e-3 * expect.max())
    assert v.max() == pytest.approx(expect.max(), rel=5e-3)
    assert v.max() == pytest.approx(6.127e-3, rel=1e-3)
    assert t[np.argmax(v)] == pytest.approx(18.4, abs=0.1)


@given(st.floats(0.1e-9, 1.5e-9))
def test_subthreshold_linearity(w):
    _, t1 = lif_run([(SpikeTrain([5.0]), w)], duration=50.0)
    _, t2 = lif_run([(SpikeTrain([5.0]), 2 * w)], duration=50.0)
    p1, p2 = t1[:, 1].max() - P.EL, t2[:, 1].max() - P.EL
    assert p2 == pytest.approx(2 * p1, rel=5e-3)


def test_refractory_spacing_and_hold():
    spikes, trace = lif_run([], duration=500.0, current=np.full(5001, 50e-9))
    isi = np.diff(spikes.times)
    assert isi.min() >= P.t_refrac
    k = int(np.ceil(spikes.times[0] / P.dt))        # grid point ending the crossing step
    assert np.all(trace[k:k + P.ref_steps, 1] == P.EL)


def test_spike_times_interpolated_inside_step():
    spikes, trace = lif_run([], duration=100.0, current=np.full(1001, 5.4e-9))
    t = spikes.times
    assert t[0] == pytest.approx(lif_period(5.4e-9) - P.t_refrac, abs=0.01)
    np.testing.assert_allclose(np.diff(t), lif_period(5.4e-9), atol=0.01)


def test_simulate_layer_shapes_and_errors():
    trains = [SpikeTrain([1.0, 2.0]), SpikeTrain([3.0])]
    out, trace = simulate_layer(trains, np.full((2, 3), 1e-9), P, 20.0, record=True)
    assert len(out) == 3 and trace.shape == (201, 3)
    with pytest.raises(ValueError):
        simulate_layer(trains, np.ones((3, 1)), P, 10.0)
    with pytest.raises(DomainError):
        lif_run([], duration=0.0)


def test_events_table_rounds_to_grid():
    ptr, idx = trains_to_events([SpikeTrain([0.04, 0.26]), [0.1]], P, 10)
    assert list(ptr[:5]) == [0, 1, 2, 2, 3] and list(idx) == [0, 1, 0]


def test_trace_csv(tmp_path):
    _, trace = lif_run([], duration=1.0)
    write_trace_csv(tmp_path / "v.csv", trace)
    lines = (tmp_path / "v.csv").read_text().splitlines()
    assert lines[0] == "time_ms,volts" and len(lines) == 12


def test_wta_single_winner_and_reset():
    p = LIFParams()
    layer = WTALayer(4, p, block=3.0)
    nsteps = p.nsteps(100.0)
    ptr, idx = trains_to_events([SpikeTrain([10.0])] * 3, p, nsteps)
    W = np.full((3, 4), 6e-9)
    W[:, 2] = 7e-9
    spikes = layer.run(ptr, idx, W, np.full(4, p.theta))
    steps = [k for k, _ in spikes]
    assert len(steps) == len(set(steps))           # one winner per step
    assert spikes[0][1] == 2
    assert all(b - a >= layer.block_steps for a, b in zip(steps, steps[1:]))


def test_wta_callback_sees_spikes_in_order():
    p = LIFParams()
    nsteps = p.nsteps(60.0)
    ptr, idx = trains_to_events([SpikeTrain([5.0])], p, nsteps)
    seen = []
    WTALayer(2, p).run(ptr, idx, np.array([[20e-9, 1e-12]]), np.full(2, p.theta),
                       lambda k, j: seen.append((k, j)))
    assert seen and all(j == 0 for _, j in seen)
    assert [k for k, _ in seen] == sorted(k for k, _ in seen)
