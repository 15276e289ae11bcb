"""Compare the compiled and pure-Python kernel backends.

Usage::

    python3 benchmarks/bench_backends.py [--n 200000] [--repeat 5]

Prints the best wall time per kernel and backend, and checks that both
backends return bit-identical results.
"""
import argparse
import timeit

import numpy as np

from acoustic_rte import _kernels


def cases(n):
    rng = np.random.default_rng(0)
    ctr = rng.integers(0, 2 ** 32, (n, 4), dtype=np.uint64).astype(np.uint32)
    key = rng.integers(0, 2 ** 32, (n, 2), dtype=np.uint64).astype(np.uint32)
    ids = np.arange(n, dtype=np.uint64)
    idx = rng.integers(0, 4096, n)
    w = rng.random(n)
    return {
        "philox4x32": lambda: _kernels.philox4x32(ctr, key),
        "uniform_pairs": lambda: _kernels.uniform_pairs(12345, ids, np.zeros(n, np.uint64)),
        "accumulate": lambda: _kernels.accumulate(idx, w, 4096),
    }


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n", type=int, default=200_000)
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args(argv)
    backends = _kernels.available_backends()
    print(f"n = {args.n}, backends = {', '.join(backends)}")
    print(f"{'kernel':<15}" + "".join(f"{b:>12}" for b in backends) + f"{'speedup':>10}")
    for name, fn in cases(args.n).items():
        times, outputs = [], []
        for b in backends:
            with _kernels.using_backend(b):
                times.append(min(timeit.repeat(fn, number=1, repeat=args.repeat)))
                outputs.append(np.asarray(fn()))
        same = all(np.array_equal(outputs[0], o) for o in outputs[1:])
        speed = times[-1] / times[0] if len(times) > 1 else 1.0
        print(f"{name:<15}" + "".join(f"{t * 1e3:>10.2f}ms" for t in times)
              + f"{speed:>9.1f}x" + ("" if same else "  MISMATCH"))


if __name__ == "__main__":
    main()
