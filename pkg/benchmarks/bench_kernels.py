"""Time every kernel under numba and numpy and check the two agree.

usage: python benchmarks/bench_kernels.py [--repeat N] [--size S]
"""
import argparse
import time

import numpy as np

from mmprompt import _kernels


def cases(rng, size):
    n_ev = 50 * size * size // 16
    ts = np.sort(rng.integers(0, 10_000, n_ev)).astype(np.int64)
    xs = rng.integers(0, size, n_ev).astype(np.int64)
    ys = rng.integers(0, size, n_ev).astype(np.int64)
    ps = rng.choice(np.array([-1, 1], dtype=np.int64), n_ev)
    n = 2000
    conf = rng.integers(0, 200, n).astype(np.float64)
    thr = np.append(np.unique(conf), np.inf)
    return {
        "resample_bilinear": (rng.random((size // 2, size // 2, 3)), size, size),
        "polarity_sum": (ts, xs, ys, ps, 0, 10_000, size, size),
        "polarity_latest": (ts, xs, ys, ps, 0, 10_000, size, size),
        "jet": (rng.random((size, size)),),
        "sidelobe_stats": (rng.random((size, size)), size // 3, size // 2, 5),
        "lt_sums": (rng.random(n), rng.random(n) < 0.8, rng.random(n) < 0.8, conf, thr),
        "count_at_least": (rng.random(n), np.arange(101) / 100.0),
        "count_at_most": (rng.random(n) * 60, np.arange(51, dtype=np.float64)),
    }


def best_time(fn, args, repeat):
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn(*args)
        best = min(best, time.perf_counter() - t0)
    return best


def same(a, b):
    if isinstance(a, tuple):
        return all(same(x, y) for x, y in zip(a, b))
    return np.allclose(np.asarray(a, dtype=float), np.asarray(b, dtype=float), rtol=0, atol=1e-12)


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=20)
    ap.add_argument("--size", type=int, default=256)
    args = ap.parse_args()
    if _kernels.numba_impl is None:
        print("numba is unavailable; nothing to compare")
        return
    rng = np.random.default_rng(0)
    print(f"active backend: {_kernels.BACKEND}; size {args.size}; best of {args.repeat}")
    print(f"{'kernel':<18} {'numpy ms':>10} {'numba ms':>10} {'speedup':>8}  agree")
    for name, inputs in cases(rng, args.size).items():
        f_np = getattr(_kernels.numpy_impl, name)
        f_nb = getattr(_kernels.numba_impl, name)
        f_nb(*inputs)  # compile outside the timed region
        t_np = best_time(f_np, inputs, args.repeat)
        t_nb = best_time(f_nb, inputs, args.repeat)
        ok = same(f_np(*inputs), f_nb(*inputs))
        print(f"{name:<18} {t_np * 1e3:>10.3f} {t_nb * 1e3:>10.3f} {t_np / t_nb:>7.1f}x  {ok}")


if __name__ == "__main__":
    main()
