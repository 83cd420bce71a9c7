"""Time the compiled and pure-Python kernels on the same inputs.

    python3 benchmarks/bench_kernels.py --frames 158 --bins 513 --channels 4 16
"""
import argparse
import timeit

import numpy as np

from uimvdr import kernels


def _inputs(rng, frames, bins, channels):
    shape = (frames, bins, channels)
    y = rng.standard_normal(shape) + 1j * rng.standard_normal(shape)
    mask = rng.uniform(size=(frames, bins, 1))
    return y, y * mask


def _best_of(fn, repeat, number):
    return min(timeit.repeat(fn, repeat=repeat, number=number)) / number


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    parser.add_argument("--frames", type=int, default=158, help="STFT frames (158 = 5 s at 16 kHz)")
    parser.add_argument("--bins", type=int, default=513)
    parser.add_argument("--channels", type=int, nargs="+", default=[2, 4, 8, 16])
    parser.add_argument("--repeat", type=int, default=5)
    parser.add_argument("--number", type=int, default=3)
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args(argv)

    backends = {name: kernels.get_backend(name) for name in kernels.available_backends()}
    if "cython" not in backends:
        print("compiled kernels not built; timing the Python backend only")
    rng = np.random.default_rng(args.seed)

    print(f"{'kernel':<12}{'C':>4}" + "".join(f"{name + ' [ms]':>16}" for name in backends) + f"{'speed-up':>11}")
    for c in args.channels:
        y, xhat = _inputs(rng, args.frames, args.bins, c)
        phi_xx, phi_nn = backends["python"].scm_pair(y, xhat)
        cases = {
            "scm_pair": lambda mod: mod.scm_pair(y, xhat),
            "mvdr_solve": lambda mod: mod.mvdr_solve(phi_xx, phi_nn, 0, 1e-3),
        }
        for label, call in cases.items():
            times = {name: _best_of(lambda m=mod: call(m), args.repeat, args.number) for name, mod in backends.items()}
            row = f"{label:<12}{c:>4}" + "".join(f"{1e3 * t:>16.3f}" for t in times.values())
            if "cython" in times:
                row += f"{times['python'] / times['cython']:>10.2f}x"
            print(row)


if __name__ == "__main__":
    main()
