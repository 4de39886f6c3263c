"""Compare the compiled and pure-Python tridiagonal trace kernels.

    python3 benchmarks/bench_kernels.py --dim 48 --points 20000 --repeat 3
"""
import argparse
import time

import numpy as np

from tauhusimi import _backend, _spectral


def make_batch(rng, points, dim, cols):
    # positive semidefinite exponents, as the semigroup produces
    off = rng.normal(size=(points, dim - 1)) + 1j * rng.normal(size=(points, dim - 1))
    mag = np.abs(off)
    diag = rng.uniform(0, 4, size=(points, dim))
    diag[:, :-1] += mag
    diag[:, 1:] += mag
    b = rng.normal(size=(dim, cols)) + 1j * rng.normal(size=(dim, cols))
    return diag, off, b


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        times.append(time.perf_counter() - t0)
    return min(times), out


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--dim", type=int, default=48)
    ap.add_argument("--points", type=int, default=20000)
    ap.add_argument("--cols", type=int, default=4, help="rank of the state factor")
    ap.add_argument("--taus", type=int, default=3)
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--threads", type=int, default=1)
    args = ap.parse_args(argv)

    rng = np.random.default_rng(0)
    diag, off, b = make_batch(rng, args.points, args.dim, args.cols)
    group = np.zeros(args.cols, dtype=np.intc)
    coefs = list(-np.geomspace(0.25, 4.0, args.taus))

    def run(backend):
        return _spectral.tridiagonal_traces(diag, off, b, group, 1, coefs, backend=backend, threads=args.threads)

    print(f"dim={args.dim} points={args.points} cols={args.cols} taus={args.taus} threads={args.threads}")
    t_py, out_py = best_of(lambda: run("python"), args.repeat)
    print(f"python    {t_py:9.4f} s  {args.points / t_py:12.0f} points/s")
    if not _backend.HAVE_COMPILED:
        print("compiled  not built")
        return 0
    t_c, out_c = best_of(lambda: run("compiled"), args.repeat)
    diff = float(np.max(np.abs(out_py - out_c) / np.maximum(np.abs(out_py), 1e-300)))
    print(f"compiled  {t_c:9.4f} s  {args.points / t_c:12.0f} points/s")
    print(f"speedup   {t_py / t_c:9.2f}x  max rel diff {diff:.2e}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
