"""Time the numba and numpy LIF kernels on experiment-sized problems.

    python benchmarks/bench_backends.py [--repeat 3]

Each case is run once per backend to warm up (numba compiles on first
call), then timed ``--repeat`` times; the best time is reported.
"""
import argparse
import time

import numpy as np

from memstdp import _backend, kernels
from memstdp.neuron import LIFParams, poisson_trains, trains_to_events
from memstdp.unsupervised import MNISTConfig, UnsupervisedNetwork

P = LIFParams()


def network_case(n_in, n_out, duration, rate, seed=0):
    rng = np.random.default_rng(seed)
    nsteps = P.nsteps(duration)
    ptr, idx = trains_to_events(poisson_trains(np.full(n_in, rate), duration, rng), P, nsteps)
    W = rng.normal(2e-10, 4e-10, (n_in, n_out))
    amps, decays, delays = P.kernel.arrays(P.dt)
    theta = np.full(n_out, P.theta)
    v0 = np.full(n_out, P.EL)

    def run(backend):
        kernels.lif_network(np.zeros((0, n_out)), ptr, idx, W, amps, decays, delays, theta,
                            v0, P.dt * 1e-3, P.Cm, P.gL, P.EL, P.ref_steps, False, backend)
    return run


def wta_case(n_images, seed=0):
    rng = np.random.default_rng(seed)
    images = (rng.random((n_images, 28, 28)) < 0.13) * 255

    def run(backend):
        net = UnsupervisedNetwork(MNISTConfig(), np.random.default_rng(seed), backend=backend)
        for img in images:
            net.present(img, rng)
    return run


CASES = {
    "lif_network 1000x1, 1 s (supervised task)": network_case(1000, 1, 1000.0, 5.0),
    "lif_network 900x900, 400 ms (sequence predictor)": network_case(900, 900, 400.0, 10.0),
    "wta_advance, 50 MNIST presentations": wta_case(50),
}


def best_time(fn, backend, repeat):
    fn(backend)
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn(backend)
        times.append(time.perf_counter() - t0)
    return min(times)


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args(argv)
    backends = ["numba", "numpy"] if _backend.HAVE_NUMBA else ["numpy"]
    print(f"{'case':<50} " + " ".join(f"{b:>10}" for b in backends) + "   speedup")
    for name, fn in CASES.items():
        t = {b: best_time(fn, b, args.repeat) for b in backends}
        speed = f"{t['numpy'] / t['numba']:8.1f}x" if "numba" in t else "       -"
        print(f"{name:<50} " + " ".join(f"{t[b]:9.3f}s" for b in backends) + f"  {speed}")


if __name__ == "__main__":
    main()
