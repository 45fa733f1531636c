"""Time the numba and numpy metric kernels on the same inputs.

    python3 benchmarks/bench_kernels.py --size 352 --repeat 20
"""
import argparse
import timeit

import numpy as np

from tnet.metrics import _kernels as k


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--size", type=int, default=352)
    ap.add_argument("--repeat", type=int, default=20)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    rng = np.random.default_rng(args.seed)
    pred = rng.random((args.size, args.size))
    gt = (rng.random((args.size, args.size)) < 0.3).astype(np.float64)
    binary = (pred >= 2 * pred.mean()).astype(np.float64)

    cases = {
        "pr_counts": ((pred, gt, 256), k.pr_counts_numpy, k.pr_counts_numba),
        "block_ssim": ((pred, gt), k.block_ssim_numpy, k.block_ssim_numba),
        "enhanced_alignment": ((binary, gt), k.enhanced_alignment_numpy, k.enhanced_alignment_numba),
    }
    print(f"{'kernel':<20}{'numpy ms':>10}{'numba ms':>10}{'speedup':>9}")
    for name, (inputs, np_fn, nb_fn) in cases.items():
        nb_fn(*inputs)  # compile outside the timed region
        t_np = min(timeit.repeat(lambda: np_fn(*inputs), number=1, repeat=args.repeat)) * 1e3
        t_nb = min(timeit.repeat(lambda: nb_fn(*inputs), number=1, repeat=args.repeat)) * 1e3
        print(f"{name:<20}{t_np:>10.3f}{t_nb:>10.3f}{t_np / t_nb:>8.1f}x")


if __name__ == "__main__":
    main()
