"""Numba vs numpy kernel timings.

    python3 benchmarks/bench_kernels.py [--count 100000] [--repeat 5]

Part one times each guidance kernel from both tables in one process.  Part
two runs the bundled equivariance config end to end in two subprocesses,
one with ``DENSITYLAB_DISABLE_NUMBA=1``, and checks the outputs agree.
"""
import argparse
import filecmp
import os
import subprocess
import sys
import tempfile
import time
from pathlib import Path

import numpy as np

from densitylab import kernels
from densitylab.hilbert import random_density
from densitylab.model import build_lattice_model

ROOT = Path(__file__).resolve().parents[1]


def best_of(fn, repeat):
    fn()  # warm-up, includes jit compilation
    times = []
    for _ in range(repeat):
        start = time.perf_counter()
        fn()
        times.append(time.perf_counter() - start)
    return min(times)


def kernel_table(count, repeat):
    model = build_lattice_model({"particles": [{}, {"mass": 1.7}], "sites": 16, "stencil": "hopping"})
    gen = np.random.default_rng(0)
    w = random_density(model.dim, gen).entries
    ws = np.ascontiguousarray(w)
    nbr = kernels.neighbor_table(model.sites, model.n_particles, model.periodic)
    inv_mass = np.array([1.0, 1 / 1.7])
    dx = float(model.spacing)
    flux, den = kernels.NUMPY["density_fields"](ws, nbr, inv_mass, dx)
    pos = gen.uniform(0, model.sites * dx, size=(count, model.n_particles))
    eps = 1e-300
    cases = {
        "density_fields": lambda k: k["density_fields"](ws, nbr, inv_mass, dx),
        "interpolate_velocity": lambda k: k["interpolate_velocity"](pos, flux, den, model.sites, dx, True, eps),
        "apply_boundary": lambda k: k["apply_boundary"](pos, model.sites * dx, True),
        "cell_index": lambda k: k["cell_index"](pos, model.sites, dx),
    }
    print(f"kernels, N=2 on 16 sites, {count} configurations (best of {repeat})")
    print(f"{'kernel':<22}{'numpy [ms]':>12}{'numba [ms]':>12}{'speed-up':>10}")
    for name, call in cases.items():
        a = best_of(lambda: call(kernels.NUMPY), repeat)
        b = best_of(lambda: call(kernels.NUMBA), repeat)
        print(f"{name:<22}{a * 1e3:>12.2f}{b * 1e3:>12.2f}{a / b:>10.1f}")


def end_to_end():
    config = ROOT / "configs" / "m1_equivariance.json"
    with tempfile.TemporaryDirectory() as tmp:
        outs = {}
        print(f"\nend to end: densitylab bohm --config {config.name}")
        for label, flag in (("numba", "0"), ("numpy", "1")):
            out = Path(tmp) / label
            env = dict(os.environ, DENSITYLAB_DISABLE_NUMBA=flag)
            start = time.perf_counter()
            subprocess.run([sys.executable, "-m", "densitylab", "bohm", "--config", str(config), "--out", str(out)],
                           env=env, check=True)
            print(f"{label:<8}{time.perf_counter() - start:>8.2f} s (includes interpreter start and jit)")
            outs[label] = out
        same = filecmp.cmp(outs["numba"] / "equivariance_report.json", outs["numpy"] / "equivariance_report.json",
                           shallow=False)
        print(f"reports byte-identical: {same}")


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--count", type=int, default=100_000)
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--skip-end-to-end", action="store_true")
    args = ap.parse_args()
    if not kernels.USE_NUMBA:
        sys.exit("numba unavailable or disabled; nothing to compare")
    kernel_table(args.count, args.repeat)
    if not args.skip_end_to_end:
        end_to_end()


if __name__ == "__main__":
    main()
