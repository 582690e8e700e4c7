"""Time the numba kernels against their numpy twins.

    python benchmarks/bench_kernels.py [--n 1000] [--repeat 5]
"""
import argparse
import timeit

import numpy as np

from saccadic import _kernels as K


def cases(n, rng):
    X = rng.normal(size=(n, 40))
    x, t = rng.normal(size=50 * n), rng.normal(size=40)
    starts = np.arange(0, x.size - 40, 1)
    D = K.pairwise_sqdist_np(X)
    P, _ = K.conditional_affinities_np(D, 30.0)
    P = (P + P.T) / (2 * n)
    Y = rng.normal(size=(n, 2))
    return {
        "pairwise_sqdist": (lambda f: f(X), "pairwise_sqdist"),
        "window_sqdist": (lambda f: f(x, t, starts), "window_sqdist"),
        "conditional_affinities": (lambda f: f(D, 30.0), "conditional_affinities"),
        "tsne_gradient": (lambda f: f(P, Y, 1.0, False), "tsne_gradient"),
    }


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--n", type=int, default=1000)
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    if not K.HAS_NUMBA:
        raise SystemExit("numba is not installed; nothing to compare")
    rng = np.random.default_rng(0)
    print(f"n={args.n}  best of {args.repeat}")
    print(f"{'kernel':<24}{'numpy ms':>10}{'numba ms':>10}{'speedup':>9}")
    for name, (call, base) in cases(args.n, rng).items():
        f_np, f_nb = getattr(K, base + "_np"), getattr(K, base + "_nb")
        call(f_nb)  # compile
        t_np = min(timeit.repeat(lambda: call(f_np), number=1, repeat=args.repeat)) * 1e3
        t_nb = min(timeit.repeat(lambda: call(f_nb), number=1, repeat=args.repeat)) * 1e3
        print(f"{name:<24}{t_np:>10.2f}{t_nb:>10.2f}{t_np / t_nb:>8.1f}x")


if __name__ == "__main__":
    main()
