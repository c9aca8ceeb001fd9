"""Consistency sweep |AB - I|_F on noisy sine data for n in {8, 16, 32, 64}.

    python3 scripts/run_fig2.py [--out DIR] [--trials N]
"""

import argparse
import csv

from cdmd.cli import bundled_config, load_config, run_experiment


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", default="results/fig2_desk")
    ap.add_argument("--trials", type=int)
    ap.add_argument("--threads", type=int, default=1)
    args = ap.parse_args()

    cfg = load_config(bundled_config("fig2_desk"))
    if args.trials:
        cfg.trials = args.trials
    out = run_experiment(cfg.validate(), args.out, threads=args.threads)
    with open(out / "sweep.csv") as fh:
        rows = list(csv.DictReader(fh))
    for n in sorted({int(r["n"]) for r in rows}):
        line = "  ".join(f"{r['method']}={float(r['value']):.3e}" for r in rows if int(r["n"]) == n)
        print(f"n={n:3d}  {line}")


if __name__ == "__main__":
    main()
