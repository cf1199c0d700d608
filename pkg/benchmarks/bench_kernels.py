"""Timings of the numba kernels against their numpy fallbacks.

Run with ``python3 benchmarks/bench_kernels.py [--repeat N]``. The first
numba call is excluded so that compilation time is not counted.
"""

import argparse
import timeit

import numpy as np

from covbrackets import SpatialLattice, kernels
from covbrackets._accel import HAVE_NUMBA
from covbrackets.oracles import boson_dispersion


def cases(rng):
    for n in (16, 32, 64):
        f = rng.standard_normal((n, n, n))
        yield f"diff {n}^3", kernels.periodic_diff_numpy, kernels.periodic_diff_numba, (f, 1, 0.5)
    for n, pairs in ((8, 20), (16, 200)):
        lat = SpatialLattice((n, n, n), 1.0)
        k = lat.wavevectors()
        w = boson_dispersion(lat, 1.0)
        amp = np.ones((pairs, k.shape[0]), dtype=complex)
        dx = rng.integers(0, n, (pairs, 3)).astype(float)
        tau = rng.uniform(-5, 5, pairs)
        args = (k, w, amp, dx, tau, 0)
        yield f"mode sum {n}^3 x {pairs}", kernels.mode_sum_numpy, kernels.mode_sum_numba, args


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeat", type=int, default=5)
    args = parser.parse_args()
    if not HAVE_NUMBA:
        print("numba is not installed; only numpy timings are shown")
    rng = np.random.default_rng(0)
    print(f"{'case':<24}{'numpy [ms]':>12}{'numba [ms]':>12}{'speedup':>10}")
    for name, slow, fast, fargs in cases(rng):
        t_np = min(timeit.repeat(lambda: slow(*fargs), number=1, repeat=args.repeat))
        if HAVE_NUMBA:
            np.testing.assert_allclose(fast(*fargs), slow(*fargs), atol=1e-10)
            t_nb = min(timeit.repeat(lambda: fast(*fargs), number=1, repeat=args.repeat))
            print(f"{name:<24}{1e3 * t_np:>12.3f}{1e3 * t_nb:>12.3f}{t_np / t_nb:>10.1f}")
        else:
            print(f"{name:<24}{1e3 * t_np:>12.3f}{'-':>12}{'-':>10}")


if __name__ == "__main__":
    main()
