"""Benchmark the compiled kernels against their numpy fallbacks.

Run:  python3 benchmarks/bench_kernels.py [--repeats N]

Sizes mirror the attack loop's hot path: batches of 256-point clouds
pushed through nearest-neighbor search, max-pool, and the pooled-gradient
scatter-matmul.
"""

import argparse
import time

import numpy as np

from gsda.kernels import _numpy as np_impl

try:
    from gsda.kernels import _native as nat_impl
except ImportError:
    nat_impl = None


def _time(fn, repeats):
    best = np.inf
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def main():
    parser = argparse.ArgumentParser()
    parser.add_argument("--repeats", type=int, default=7)
    parser.add_argument("--batch", type=int, default=16)
    parser.add_argument("--points", type=int, default=256)
    args = parser.parse_args()

    rng = np.random.default_rng(0)
    B, n = args.batch, args.points
    a = rng.normal(size=(B, n, 3))
    b = rng.normal(size=(B, n, 3))
    h = rng.normal(size=(B, n, 256))
    dpool = rng.normal(size=(B, 256))
    arg = rng.integers(0, n, size=(B, 256))
    w = rng.normal(size=(256, 128))

    cases = [
        ("nearest_sqdist_batch (B=%d, n=%d)" % (B, n),
         lambda impl: impl.nearest_sqdist_batch(a, b)),
        ("maxpool_forward     (B=%d, n=%d, f=256)" % (B, n),
         lambda impl: impl.maxpool_forward(h)),
        ("pool_backward_matmul(B=%d, n=%d, 256->128)" % (B, n),
         lambda impl: impl.pool_backward_matmul(dpool, arg, w, n)),
    ]

    print("%-44s %12s %12s %9s" % ("kernel", "numpy", "native", "speedup"))
    for name, fn in cases:
        t_np = _time(lambda: fn(np_impl), args.repeats)
        if nat_impl is None:
            print("%-44s %10.3f ms %12s %9s" % (name, t_np * 1e3, "n/a", "n/a"))
            continue
        t_nat = _time(lambda: fn(nat_impl), args.repeats)
        print("%-44s %10.3f ms %9.3f ms %8.1fx" % (name, t_np * 1e3, t_nat * 1e3, t_np / t_nat))

    if nat_impl is not None:
        # sanity: both backends agree on the same inputs
        dn, ixn = nat_impl.nearest_sqdist_batch(a, b)
        dp, ixp = np_impl.nearest_sqdist_batch(a, b)
        assert np.array_equal(ixn, ixp) and np.allclose(dn, dp, atol=1e-14)
        print("\nparity check: backends agree")
    else:
        print("\nnative extension not built; numpy fallback only")


if __name__ == "__main__":
    main()
