"""Time the compiled kernels against the numpy fallback on identical inputs.

    python3 benchmarks/bench_kernels.py [--repeat N]

Prints one line per kernel with both timings, the speed-up and the largest
relative difference between the two results.
"""

import argparse
import timeit

import numpy as np

from rfamp import _fallback

try:
    from rfamp import _kernels
except ImportError:
    _kernels = None


def _inputs(rng, nblocks=9, nfreq=21):
    abcd = rng.normal(size=(nblocks, nfreq, 2, 2)) + 1j * rng.normal(size=(nblocks, nfreq, 2, 2))
    omegas = 2 * np.pi * np.geomspace(8e9, 12e9, nfreq)
    mcr = (0.3, 2 * np.pi * 10e9, 12.0, 400.0, 40e-15, 1800.0, 0.05, omegas)
    return {
        "mcr_stage_voltage": mcr,
        "chain_backsolve": (abcd,),
        "impedance_forward": (abcd, 50.0),
    }


def _rel(a, b):
    a, b = np.asarray(a), np.asarray(b)
    return float(np.max(np.abs(a - b) / np.maximum(np.abs(b), 1e-300)))


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=2000)
    args = ap.parse_args()
    if _kernels is None:
        print("compiled extension not built; run: python3 setup.py build_ext --inplace")
        return 1
    cases = _inputs(np.random.default_rng(0))
    print(f"{'kernel':<20}{'numpy us':>12}{'cython us':>12}{'speed-up':>10}{'max rel diff':>15}")
    for name, args_ in cases.items():
        py, cy = getattr(_fallback, name), getattr(_kernels, name)
        t_py = min(timeit.repeat(lambda: py(*args_), number=args.repeat, repeat=3)) / args.repeat * 1e6
        t_cy = min(timeit.repeat(lambda: cy(*args_), number=args.repeat, repeat=3)) / args.repeat * 1e6
        print(f"{name:<20}{t_py:>12.2f}{t_cy:>12.2f}{t_py / t_cy:>10.1f}{_rel(cy(*args_), py(*args_)):>15.2e}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
