"""Time one CMA-ES generation of batch rollouts on each available backend.

    python3 benchmarks/bench_rollout.py [--population 32] [--repeat 3]
"""
import argparse
import time

import numpy as np

from drivefit import kernels, presets
from drivefit.dynamics import BatchParams, initial_arrays, rollout_batch
from drivefit.excitation import ChirpSpec, chirp
from drivefit.model import SimConfig


def bench(backend, model, batch, targets, sim, repeat):
    q0, qd0 = initial_arrays(model, targets)
    best = np.inf
    loss = None
    for _ in range(repeat):
        t0 = time.perf_counter()
        _, _, _, loss, _ = rollout_batch(model, batch, targets, sim, q0, qd0, q_ref=targets.q,
                                         keep_trajectory=False, backend=backend)
        best = min(best, time.perf_counter() - t0)
    return best, loss


def main():
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--population", type=int, default=32)
    ap.add_argument("--duration", type=float, default=20.0, help="chirp length in s")
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--python-population", type=int, default=4,
                    help="candidates for the slow fallback, timings are scaled up to --population")
    args = ap.parse_args()

    model = presets.robot("tytan")
    targets = chirp(ChirpSpec(0.1, 10.0, args.duration, amplitude=0.05), model.n_joints)
    sim = SimConfig()
    rng = np.random.default_rng(0)
    full = BatchParams.from_models([model] * args.population)
    full.inertia *= rng.uniform(0.8, 1.2, full.inertia.shape)
    steps = targets.n_samples * sim.substeps * model.n_joints

    results = {}
    for name in kernels.available_backends():
        P = args.python_population if name == "python" else args.population
        sub = full.subset(np.arange(min(P, args.population)))
        seconds, loss = bench(name, model, sub, targets, sim, args.repeat)
        per_gen = seconds * args.population / sub.size
        results[name] = loss
        rate = steps * sub.size / seconds / 1e6
        print(f"{name:8s} {per_gen:9.3f} s per generation of {args.population}   {rate:8.2f} M joint-substeps/s")
    if len(results) == 2:
        k = min(r.size for r in results.values())
        same = np.array_equal(results["python"][:k], results["cython"][:k])
        print(f"losses bit-identical across backends: {same}")


if __name__ == "__main__":
    main()
