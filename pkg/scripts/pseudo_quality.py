"""How close are pseudo images to the real missing modality?

For each single-modal site, builds pseudo images of the missing modality
from the site's own images and the pooled centroids, then reports PSNR
against the withheld real images, for every alpha in the sweep set. The raw
image of the present modality (alpha = 0) is the reference point.

    python3 scripts/pseudo_quality.py [--config configs/desk.cfg]
"""
import argparse
from pathlib import Path

import numpy as np

from fedpmg import config, federation as fed, metrics, pmg
from fedpmg.clustering import ClusterConfig

ROOT = Path(__file__).resolve().parents[1]


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--config", default=ROOT / "configs" / "desk.cfg")
    ap.add_argument("--draws", type=int, default=3)
    args = ap.parse_args()

    cfg = config.load(args.config)
    clients = fed.build_clients(cfg)
    memory = fed.aggregate_centroids(clients, ClusterConfig(k=cfg.k, restarts=cfg.kmeans_restarts, seed=cfg.seed))
    rng = np.random.default_rng(cfg.seed)
    print(f"{'client':>6} {'missing':>7} " + " ".join(f"{a:>8}" for a in cfg.sweep_alpha))
    for c in clients:
        if c.is_multimodal:
            continue
        (p,) = c.modalities
        h = 3 - p
        own, real = c.images(p), c.withheld[h]
        cells = []
        for a in cfg.sweep_alpha:
            scores = []
            for _ in range(args.draws):
                z = pmg.sample_centroid(memory, h, rng)
                fake = pmg.generate_pseudo(own, z, a)
                scores += [metrics.psnr(r, f) for r, f in zip(real, fake)]
            cells.append(np.mean(scores))
        print(f"{c.id:>6} {h:>7} " + " ".join(f"{v:8.2f}" for v in cells))


if __name__ == "__main__":
    main()
