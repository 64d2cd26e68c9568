"""Run every baseline on the desk-scale configuration and tabulate mean PSNR.

    python3 scripts/calibrate_ordering.py [--config configs/desk.cfg] [--seeds 0 1 2]

Writes one row per (seed, mode) plus a zero-filled baseline to
calibration/ordering.csv and prints the per-mode means.
"""
import argparse
import csv
import time
from pathlib import Path

import numpy as np

from fedpmg import config, federation as fed

ROOT = Path(__file__).resolve().parents[1]


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--config", default=ROOT / "configs" / "desk.cfg")
    ap.add_argument("--seeds", type=int, nargs="+", default=[0, 1, 2])
    ap.add_argument("--modes", nargs="+", default=["fedpmg", "mixup", "ideal", "gather", "group"])
    ap.add_argument("--out", default=ROOT / "calibration" / "ordering.csv")
    args = ap.parse_args()

    base = config.load(args.config)
    rows = []
    for seed in args.seeds:
        cfg = base.replace(seed=seed)
        clients = fed.build_clients(cfg)
        zero = fed.run_experiment(cfg.replace(rounds=0, mode="ideal"), clients)
        rows.append((seed, "zero-filled", zero.mean_psnr(1), zero.mean_ssim(1), 0.0))
        for mode in args.modes:
            t0 = time.process_time()
            rep = fed.run_experiment(cfg.replace(mode=mode), clients)
            cpu = time.process_time() - t0
            rows.append((seed, mode, rep.mean_psnr(1), rep.mean_ssim(1), cpu))
            print(f"seed {seed} {mode:>8}: PSNR {rep.mean_psnr(1):.3f} dB  SSIM {rep.mean_ssim(1):.4f}  "
                  f"({cpu:.0f}s)", flush=True)

    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    with open(out, "w", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(["seed", "mode", "psnr", "ssim", "cpu_seconds"])
        w.writerows([s, m, f"{p:.4f}", f"{q:.5f}", f"{c:.1f}"] for s, m, p, q, c in rows)
    print()
    for mode in ["zero-filled", *args.modes]:
        vals = [p for _, m, p, _, _ in rows if m == mode]
        print(f"{mode:>12}: mean PSNR {np.mean(vals):.3f} dB over {len(vals)} seeds")


if __name__ == "__main__":
    main()
