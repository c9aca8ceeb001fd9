"""Iteration counts of CDMD on noisy sine data (n = 16, sigma^2 = 0.25).

    python3 scripts/admm_profile.py [--trials N]
"""

import argparse

import numpy as np

from cdmd.admm import AdmmConfig, cdmd
from cdmd.dmd import pod_reduce
from cdmd.harness import make_system
from cdmd.systems import NoiseSpec, add_noise


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--trials", type=int, default=200)
    args = ap.parse_args()

    _, clean, _, r = make_system("sine", 16)
    cfg = AdmmConfig()
    iters, conv = [], []
    for t in range(args.trials):
        rd = pod_reduce(add_noise(clean, NoiseSpec(0.25, seed=t)), r)
        res, _, hist = cdmd(rd, cfg)
        iters.append(res.iterations)
        conv.append(res.converged)
    iters = np.array(iters)
    print(f"converged {sum(conv)}/{args.trials}  median iterations {np.median(iters):.0f}  "
          f"p95 {np.percentile(iters, 95):.0f}  max {iters.max()}")


if __name__ == "__main__":
    main()
