"""Named, reproducible experiments tying the modules together.

Each ``run_*`` takes an ExperimentConfig and an output directory, writes its
CSV/PGM/snapshot files there and returns a JSON-ready summary. Results are a
pure function of the configuration and the input files.
"""
from __future__ import annotations

import csv
import json
from pathlib import Path

import numpy as np

from . import fitting, rng as rngs
from .config import ConfigError, ExperimentConfig, dumps
from .device import apply_normalized, delta_g_norm, solve_boundaries
from .mnist import load_mnist, write_pgm
from .snapshot import WeightSnapshot, save_snapshot
from .supervised import (SequenceConfig, SupervisedNetwork, make_timing_task,
                         sequence_predictor_experiment, train)
from .unsupervised import (UnsupervisedNetwork, digit_prototype_agreement, evaluate,
                           train_epoch)
from .waveform import difference_waveform, energy, read_pulse, single_spike_waveform

PARAM_NAMES = ("A", "alpha_ap", "beta_ap", "alpha_bp", "beta_bp",
               "alpha_an", "beta_an", "alpha_bn", "beta_bn")


def _prepare(cfg: ExperimentConfig, out):
    out = Path(cfg.out if out is None else out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "config.yaml").write_text(dumps(cfg))
    return out


def _write_csv(path, header, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        w.writerows(rows)


def _fmt(x):
    return f"{x:.10g}"


def _finish(out, summary):
    (out / "summary.json").write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")
    return summary


def _snapshot(out, name, synapses, cfg, epoch):
    save_snapshot(out / "snapshots" / name,
                  WeightSnapshot.from_synapses(synapses, epoch=epoch, seed=cfg.seed,
                                               kind=cfg.kind, config_hash=cfg.digest()))


# ------------------------------------------------------------ STDP curve ---

def stdp_band_stats(delta_t, g_initial, dgn, g0, edges=(0.05, 0.16), near_dt=10.0):
    """Per-band mean potentiation and mean |depression| for ``|dt| <= near_dt``."""
    g = np.asarray(g_initial) / g0
    delta_t, dgn = np.asarray(delta_t), np.asarray(dgn)
    bounds = [0.0, *edges, np.inf]
    near = np.abs(delta_t) <= near_dt
    stats = []
    for lo, hi in zip(bounds[:-1], bounds[1:]):
        band = (g >= lo) & (g < hi)
        pot = dgn[band & near & (delta_t > 0)]
        dep = dgn[band & near & (delta_t <= 0)]
        mp = float(pot.mean()) if pot.size else float("nan")
        md = float(-dep.mean()) if dep.size else float("nan")
        stats.append({"g_low_G0": lo, "g_high_G0": None if np.isinf(hi) else hi,
                      "n": int(band.sum()), "n_pot": int(pot.size), "n_dep": int(dep.size),
                      "mean_pot": mp, "mean_abs_dep": md,
                      "ratio": mp / md if md > 0 else float("nan")})
    return stats


def run_stdp_curve(cfg: ExperimentConfig, out=None):
    """Program one device with a sequence of random spike-time differences."""
    s, p, wp = cfg.experiment, cfg.model, cfg.waveform
    out = _prepare(cfg, out)
    rng = rngs.streams(cfg.seed, ["dt"])["dt"]
    G = max(s.g_initial, p.Gmin)
    rows, records = [], []
    dts = rng.uniform(-s.dt_max, s.dt_max, s.n_draws)
    for k, dt in enumerate(dts):
        dgn = float(delta_g_norm(dt, G, p))
        Gf = float(apply_normalized(G, dgn, p))
        e = energy(difference_waveform(dt, wp), 0.5 * (G + Gf))
        rows.append((k, dt, G, Gf, dgn, e))
        records.append(fitting.StdpRecord(dt, G, Gf))
        G = Gf
    _write_csv(out / "stdp_curve.csv",
               ["draw", "delta_t_ms", "g_initial_S", "g_final_S", "delta_g_norm", "pair_energy_J"],
               [(r[0], *(_fmt(v) for v in r[1:])) for r in rows])
    fitting.write_records_csv(out / "records.csv", records)
    arr = np.array([r[1:] for r in rows])
    bands = stdp_band_stats(arr[:, 0], arr[:, 1], arr[:, 3], p.G0, s.band_edges, s.near_dt)
    _write_csv(out / "bands.csv", list(bands[0]), [[_fmt(v) if isinstance(v, float) else v
                                                   for v in b.values()] for b in bands])
    dt, dgn = arr[:, 0], arr[:, 3]
    near, far = np.abs(dt) <= s.near_dt, np.abs(dt) >= 0.875 * s.dt_max
    summary = {
        "kind": cfg.kind, "seed": cfg.seed, "n_draws": s.n_draws,
        "g_start_S": max(s.g_initial, p.Gmin),
        "mean_pot": float(dgn[dt > 0].mean()), "mean_dep": float(dgn[dt <= 0].mean()),
        "mean_abs_near": float(np.abs(dgn[near]).mean()),
        "mean_abs_far": float(np.abs(dgn[far]).mean()),
        "bands": bands,
        "read_energy_J": energy(read_pulse(wp), G),
        "mean_pair_energy_J": float(arr[:, 4].mean()),
    }
    return _finish(out, summary)


# ---------------------------------------------------------------- energy ---

def run_energy(cfg: ExperimentConfig, out=None):
    """Pair energy over a sweep of spike-time differences at fixed conductances."""
    s, p, wp = cfg.experiment, cfg.model, cfg.waveform
    out = _prepare(cfg, out)
    dts = np.arange(-s.dt_max, s.dt_max + s.dt_step / 2, s.dt_step)
    rows, per_g = [], []
    for g_rel in s.conductances:
        G = g_rel * p.G0
        e = np.array([energy(difference_waveform(dt, wp), G) for dt in dts])
        rows += [(_fmt(g_rel), _fmt(dt), _fmt(v)) for dt, v in zip(dts, e)]
        per_g.append({
            "conductance_G0": g_rel,
            "mean_pair_energy_J": float(e.mean()),
            "per_spike_energy_J": float(e.mean() / 2),
            "pre_spike_energy_J": energy(single_spike_waveform("pre", wp), G),
            "post_spike_energy_J": energy(single_spike_waveform("post", wp), G),
            "read_energy_J": energy(read_pulse(wp), G),
            "edge_pair_energy_J": [float(e[0]), float(e[-1])],
        })
    _write_csv(out / "energy.csv", ["conductance_G0", "delta_t_ms", "pair_energy_J"], rows)
    return _finish(out, {"kind": cfg.kind, "seed": cfg.seed, "conductances": per_g})


# ------------------------------------------------------------ supervised ---

def run_supervised(cfg: ExperimentConfig, out=None):
    """N x 1 precise-timing task."""
    s = cfg.experiment
    out = _prepare(cfg, out)
    r = rngs.streams(cfg.seed, ["task", "init", "train"])
    task = make_timing_task(s.n_inputs, s.duration, s.input_rate, s.n_desired, s.min_gap,
                            r["task"], s.epochs, s.match_tolerance)
    net = SupervisedNetwork(s.n_inputs, 1, r["init"], cfg.model, cfg.lif, s.network)

    def on_epoch(stats):
        _snapshot(out, f"epoch_{stats.epoch:03d}.npz", net.synapses, cfg, stats.epoch)

    history = train(net, task, r["train"], s.stop_when_solved, out / "metrics.csv", on_epoch)
    observed, _ = net.simulate(task.inputs, task.duration)
    last = history[-1] if history else None
    summary = {
        "kind": cfg.kind, "seed": cfg.seed,
        "epochs_run": len(history),
        "solved": bool(last and last.solved),
        "first_solved_epoch": next((h.epoch for h in history if h.solved), None),
        "desired_ms": task.desired[0].times.tolist(),
        "observed_ms": observed[0].times.tolist(),
        "final": None if last is None else {"hits": last.hits, "misses": last.misses,
                                            "spurious": last.spurious},
    }
    return _finish(out, summary)


# -------------------------------------------------------------- sequence ---

def run_sequence(cfg: ExperimentConfig, out=None):
    """900 x 900 letter sequence predictor."""
    s = cfg.experiment
    seq: SequenceConfig = s.sequence
    out = _prepare(cfg, out)
    rng = rngs.streams(cfg.seed, ["train"])["train"]
    rows = []

    def on_epoch(epoch, src, dst, st):
        rows.append((epoch, src, dst, st.hits, st.misses, st.spurious, st.n_updates,
                     _fmt(st.mean_abs_dG)))

    def on_epoch_end(epoch, net):
        if (epoch + 1) % max(1, s.snapshot_every) == 0 or epoch == seq.epochs - 1:
            _snapshot(out, f"epoch_{epoch:03d}.npz", net.synapses, cfg, epoch)

    res = sequence_predictor_experiment(seq, rng, cfg.lif, cfg.model,
                                        on_epoch=on_epoch, on_epoch_end=on_epoch_end)
    _write_csv(out / "metrics.csv", ["epoch", "input", "target", "hits", "misses", "spurious",
                                     "n_updates", "mean_abs_dG_S"], rows)
    maps = out / "maps"
    maps.mkdir(exist_ok=True)
    for src in res.output_maps:
        write_pgm(maps / f"input_{src}.pgm", res.input_maps[src])
        write_pgm(maps / f"output_{src}.pgm", res.output_maps[src])
    summary = {
        "kind": cfg.kind, "seed": cfg.seed, "epochs": seq.epochs,
        "jaccard": res.jaccard,
        "mean_output_rate_hz": {k: float(m.mean()) for k, m in res.output_maps.items()},
    }
    return _finish(out, summary)


# ----------------------------------------------------------------- MNIST ---

def load_mnist_split(s, n_train, n_test):
    d = Path(s.data_dir)
    X, Y = load_mnist(d / s.train_images, d / s.train_labels, n_train)
    Xt, Yt = load_mnist(d / s.test_images, d / s.test_labels, n_test)
    if len(X) < n_train or len(Xt) < n_test:
        raise ConfigError(f"{d}: asked for {n_train}/{n_test} images, "
                         f"files hold {len(X)}/{len(Xt)}")
    return X, Y, Xt, Yt


def run_mnist(cfg: ExperimentConfig, out=None, on_epoch=None):
    """Unsupervised winner-take-all training on an MNIST subset."""
    s = cfg.experiment
    m = s.mnist
    out = _prepare(cfg, out)
    summary = {"kind": cfg.kind, "seed": cfg.seed, "n_outputs": m.n_outputs,
               "devices_per_synapse": m.devices_per_synapse,
               "sigma_fraction": m.sigma_fraction, "train_subset": m.train_subset,
               "test_subset": m.test_subset}
    if m.train_subset == 0 or m.epochs == 0:
        summary.update(accuracy=None, accuracy_defined=False, epochs_run=0)
        return _finish(out, summary)
    X, Y, Xt, Yt = load_mnist_split(s, m.train_subset, m.test_subset)
    r = rngs.streams(cfg.seed, ["init", "train"])
    net = UnsupervisedNetwork(m, r["init"], cfg.model, cfg.lif)
    rows = []
    labels = None
    for epoch in range(m.epochs):
        labels, _, n_spikes = train_epoch(net, X, Y, r["train"])
        acc = evaluate(net, labels, Xt, Yt)
        rows.append((epoch, n_spikes, _fmt(n_spikes / len(X)), _fmt(acc)))
        _snapshot(out, f"epoch_{epoch:03d}.npz", net.synapses, cfg, epoch)
        if on_epoch is not None:
            on_epoch(epoch, acc)
    _write_csv(out / "metrics.csv", ["epoch", "output_spikes", "spikes_per_image",
                                     "test_accuracy"], rows)
    maps = out / "weights"
    maps.mkdir(exist_ok=True)
    w = net.synapses.effective()
    for j in range(m.n_outputs):
        write_pgm(maps / f"output_{j:02d}_label_{int(labels[j])}.pgm", w[j].reshape(28, 28))
    acc = float(np.nan) if len(Yt) == 0 else float(rows[-1][3])
    summary.update(
        accuracy=None if np.isnan(acc) else acc, accuracy_defined=not np.isnan(acc),
        epochs_run=m.epochs, labels=[int(v) for v in labels],
        thresholds_V=net.theta.tolist(),
        prototype_agreement=digit_prototype_agreement(net, labels, X, Y))
    return _finish(out, summary)


# ------------------------------------------------------------------- fit ---

def fit_ranges(s, g0):
    return [(lv * g0 * (1 - s.range_halfwidth), lv * g0 * (1 + s.range_halfwidth))
            for lv in s.levels]


def run_fit(cfg: ExperimentConfig, out=None):
    """Extract model parameters from measured or synthesized STDP records."""
    s, p = cfg.experiment, cfg.model
    out = _prepare(cfg, out)
    if s.records_csv is not None:
        records = fitting.read_records_csv(s.records_csv)
    else:
        rng = rngs.streams(cfg.seed, ["noise"])["noise"]
        dts = np.arange(-s.dt_max, s.dt_max + s.dt_step / 2, s.dt_step)
        records = fitting.synthesize_records(np.asarray(s.levels) * p.G0,
                                             np.repeat(dts, s.repeats), p,
                                             s.sigma_fraction, rng)
        fitting.write_records_csv(out / "records.csv", records)
    rep = fitting.extract_params(records, fit_ranges(s, p.G0), (-s.dt_max, s.dt_max),
                                 s.smooth_window, base=p)
    report = rep.to_dict()
    (out / "report.json").write_text(json.dumps(report, indent=2, sort_keys=True) + "\n")
    rows = []
    for c, fp, fd in zip(rep.curves, rep.fits_pot, rep.fits_dep):
        for dt, y in zip(c.delta_t, c.mean):
            fit = fp(dt) if dt > 0 else fd(-dt)
            rows.append((_fmt(c.mean_log_g), _fmt(dt), _fmt(y), _fmt(fit)))
    _write_csv(out / "curves.csv", ["mean_log_g", "delta_t_ms", "mean_delta_g_norm", "fit"], rows)
    fitted, ref = rep.params.to_dict(), p.to_dict()
    rel = {k: abs(fitted[k] / ref[k] - 1) for k in PARAM_NAMES}
    ref_b = solve_boundaries(p)
    summary = {
        "kind": cfg.kind, "seed": cfg.seed, "n_records": len(records),
        "params": {k: fitted[k] for k in PARAM_NAMES},
        "boundaries_G0": report["boundaries_G0"],
        "relative_error": rel,
        "boundary_relative_error": [abs(b / r - 1) for b, r in zip(rep.boundaries, ref_b)],
        "max_relative_error": max(rel.values()),
    }
    return _finish(out, summary)


RUNNERS = {
    "stdp-curve": run_stdp_curve,
    "energy": run_energy,
    "supervised": run_supervised,
    "sequence": run_sequence,
    "mnist": run_mnist,
    "fit": run_fit,
}


def run(cfg: ExperimentConfig, out=None):
    return RUNNERS[cfg.kind](cfg, out)
