"""Diagnostic: rerun the desk comparison on phantoms without contrast inversion.

The shipped phantom paints modality 2 as ``gain * (1 - t) ** gamma``. This
script swaps in ``gain * t ** gamma`` for the duration of the run (the package
itself is not changed) to show how much of the FedPMG result depends on the
inversion.

    python3 scripts/contrast_counterfactual.py [--seed 0]
"""
import argparse
from pathlib import Path

import numpy as np

from fedpmg import config, data, federation as fed

ROOT = Path(__file__).resolve().parents[1]


def generate_subject_same_polarity(spec, subject=0):
    rng = np.random.default_rng([spec.seed, subject])
    ells = data._ellipsoids(rng, spec)
    site = spec.site
    bias = data._bias_field(rng, spec.size, site.bias_smoothness)
    xx, yy = data._grid(spec.size)
    zs = np.linspace(-0.6, 0.6, spec.slices) if spec.slices > 1 else np.zeros(1)
    out = []
    for j, z in enumerate(zs):
        m1 = np.zeros((spec.size, spec.size))
        m2 = np.zeros_like(m1)
        for ell in ells:
            cov = data._coverage(ell, z, xx, yy)
            t = ell[-1]
            m1 = m1 * (1 - cov) + t * cov
            m2 = m2 * (1 - cov) + site.gain * t ** site.gamma * cov
        m1 = m1 * bias + site.noise_sigma * rng.standard_normal(m1.shape)
        m2 = m2 * bias + site.noise_sigma * rng.standard_normal(m2.shape)
        out.append(data.PairedSlice(np.clip(m1, 0, 1).astype(np.float32),
                                    np.clip(m2, 0, 1).astype(np.float32), subject, j))
    return out


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--config", default=ROOT / "configs" / "desk.cfg")
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    data.generate_subject = generate_subject_same_polarity
    cfg = config.load(args.config).replace(seed=args.seed)
    clients = fed.build_clients(cfg)
    for mode in ("fedpmg", "mixup", "ideal", "gather"):
        print(f"{mode:>8}: {fed.run_experiment(cfg.replace(mode=mode), clients).mean_psnr(1):.3f} dB", flush=True)
    for a in cfg.sweep_alpha:
        print(f"fedpmg alpha={a}: {fed.run_experiment(cfg.replace(alpha=a), clients).mean_psnr(1):.3f} dB",
              flush=True)


if __name__ == "__main__":
    main()
