"""Command line entry point: ``gen-data``, ``run``, ``sweep``, ``report``, ``cluster-inspect``.

Exit codes: 0 on success, 1 on a runtime failure, 2 on a usage or config error.
"""
from __future__ import annotations

import argparse
import csv
import json
import logging
import os
import sys
from pathlib import Path

import numpy as np

from . import config, data, federation as fed, numerics, pmg
from .clustering import ClusterConfig
from .errors import ConfigError, FedPMGError

log = logging.getLogger("fedpmg")

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2
METRIC_FIELDS = ("round", "client", "modality", "psnr", "ssim")
LEDGER_FIELDS = ("round", "param_bytes", "info_bytes")
SWEEP_FIELDS = ("param", "value", "mean_psnr", "mean_ssim", "info_bytes", "param_bytes", "reduction")


class UsageError(Exception):
    pass


def _num(v: float) -> str:
    return repr(float(v))


def load_config(path, seed: int | None = None, mode: str | None = None) -> config.ExperimentConfig:
    """Config file, then ``FEDPMG_SEED``, then explicit flags."""
    try:
        cfg = config.load(path)
    except OSError as e:
        raise UsageError(f"cannot read config: {e}") from None
    env = os.environ.get("FEDPMG_SEED")
    changes = {}
    if env is not None:
        try:
            changes["seed"] = int(env)
        except ValueError:
            raise ConfigError(f"FEDPMG_SEED must be an integer, got {env!r}") from None
    if seed is not None:
        changes["seed"] = seed
    if mode is not None:
        changes["mode"] = mode
    return cfg.replace(**changes) if changes else cfg


# --- gen-data ---------------------------------------------------------------

def cmd_gen_data(args) -> int:
    cfg = load_config(args.config, args.seed)
    out = Path(args.out)
    manifest = {"seed": cfg.seed, "image_size": cfg.image_size, "split_ratio": cfg.split_ratio,
                "clients": {}}
    for q, cc in sorted(cfg.clients.items()):
        train, test, mask = fed.client_data(cfg, q)
        groups = {"train": (train, cc.modalities),
                  "test": (test, (1, 2)),
                  "withheld": (train, tuple(m for m in (1, 2) if m not in cc.modalities))}
        for name, (slices, mods) in groups.items():
            d = out / f"client_{q}" / name
            d.mkdir(parents=True, exist_ok=True)
            for s in slices:
                for m in mods:
                    data.save_tensor(d / f"subj_{s.subject}_slice_{s.index}_m{m}.fpmg", s.image(m))
        site = cc.site_params()
        manifest["clients"][str(q)] = {
            "modalities": list(cc.modalities),
            "n_q": len(train), "n_test": len(test),
            "train_subjects": sorted({s.subject for s in train}),
            "test_subjects": sorted({s.subject for s in test}),
            "site": cc.site,
            "site_params": {"gain": site.gain, "gamma": site.gamma,
                            "noise_sigma": site.noise_sigma, "bias_smoothness": site.bias_smoothness},
            "phantom_seed": fed._client_seed(cfg.seed, q, 1),
            "mask": {"type": cc.mask_type, "accel": cc.accel,
                     "center_fraction": mask.center_fraction,
                     "columns": [int(c) for c in mask.columns]},
        }
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    (out / "config.txt").write_text(config.serialize(cfg))
    log.info("wrote %d clients to %s", len(cfg.clients), out)
    return EXIT_OK


# --- run --------------------------------------------------------------------

def _write_csv(path: Path, fields, rows) -> None:
    with open(path, "w", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(fields)
        w.writerows(rows)


def metric_rows(report: fed.RunReport) -> list[list[str]]:
    rows = [[str(r["round"]), str(r["client"]), str(r["modality"]), _num(r["psnr"]), _num(r["ssim"])]
            for r in report.metrics]
    for t in sorted({r["modality"] for r in report.metrics}):
        rows.append([str(report.config.rounds), "avg", str(t),
                     _num(report.mean_psnr(t)), _num(report.mean_ssim(t))])
    return rows


def write_run(report: fed.RunReport, out: Path) -> None:
    out.mkdir(parents=True, exist_ok=True)
    (out / "config.txt").write_text(config.serialize(report.config))
    _write_csv(out / "metrics.csv", METRIC_FIELDS, metric_rows(report))
    _write_csv(out / "ledger.csv", LEDGER_FIELDS, [list(map(str, r)) for r in report.ledger.rows()])
    ck = out / "checkpoints"
    ck.mkdir(exist_ok=True)
    for target, models in sorted(report.globals.items()):
        for key, params in sorted(models.items()):
            (ck / f"target{target}_{key}.fpmg").write_bytes(fed.encode_params(params))
    (out / "report.txt").write_text(render_run_report(report))


def render_run_report(report: fed.RunReport) -> str:
    led = report.ledger
    lines = [f"mode: {report.mode.value}", f"seed: {report.config.seed}",
             f"rounds: {report.config.rounds}", ""]
    lines.append(f"{'client':>8} {'target':>7} {'PSNR':>9} {'SSIM':>8}")
    for r in report.metrics:
        lines.append(f"{r['client']:>8} {r['modality']:>7} {r['psnr']:9.3f} {r['ssim']:8.4f}")
    for t in sorted({r["modality"] for r in report.metrics}):
        lines.append(f"{'avg':>8} {t:>7} {report.mean_psnr(t):9.3f} {report.mean_ssim(t):8.4f}")
    lines += ["", f"param bytes: {led.total_param_bytes}", f"info bytes: {led.total_info_bytes}",
              f"centroid broadcast bytes: {led.info_broadcast_bytes}"]
    if led.n_spectra:
        red = led.reduction()
        lines += [f"beta (bytes per spectrum): {led.beta}",
                  f"naive info bytes: {led.naive_info_bytes}",
                  f"info reduction: {red} = {100 * float(red):.4f}%"]
        for q in sorted(led.client_info):
            lines.append(f"  client {q}: {100 * float(led.reduction(q)):.4f}%")
    if report.mode is fed.RunMode.FEDPMG:
        n_bad = len(fed.privacy_violations(report.log, report.clients))
        lines.append(f"privacy violations: {n_bad}")
    return "\n".join(lines) + "\n"


def cmd_run(args) -> int:
    cfg = load_config(args.config, args.seed, args.mode)
    if args.rounds is not None:
        cfg = cfg.replace(rounds=args.rounds)
    clients = fed.build_clients(cfg)
    log.info("running %s for %d rounds", cfg.mode, cfg.rounds)
    report = fed.run_experiment(cfg, clients)
    write_run(report, Path(args.out))
    log.info("mean PSNR %.3f dB, results in %s", report.mean_psnr(), args.out)
    return EXIT_OK


# --- sweep ------------------------------------------------------------------

def _completed_values(path: Path, param: str) -> dict[str, list[str]]:
    if not path.exists():
        return {}
    with open(path, newline="") as f:
        rows = list(csv.reader(f))
    if not rows or tuple(rows[0]) != SWEEP_FIELDS:
        raise UsageError(f"{path} is not a sweep file")
    return {r[1]: r for r in rows[1:] if len(r) == len(SWEEP_FIELDS) and r[0] == param}


def cmd_sweep(args) -> int:
    cfg = load_config(args.config, args.seed, args.mode)
    if args.values:
        raw = args.values
    else:
        raw = cfg.sweep_alpha if args.param == "alpha" else cfg.sweep_k
    try:
        values = [float(v) if args.param == "alpha" else int(v) for v in raw]
    except ValueError:
        raise UsageError(f"bad sweep values {raw}") from None
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    path = out / "sweep.csv"
    done = _completed_values(path, args.param)
    if not path.exists():
        _write_csv(path, SWEEP_FIELDS, [])
    clients = fed.build_clients(cfg)
    for v in values:
        key = _num(v) if args.param == "alpha" else str(v)
        if key in done:
            log.info("skipping %s=%s (already in %s)", args.param, key, path)
            continue
        run_cfg = cfg.replace(**{args.param: v})
        report = fed.run_experiment(run_cfg, clients)
        led = report.ledger
        row = [args.param, key, _num(report.mean_psnr()), _num(report.mean_ssim()),
               str(led.total_info_bytes), str(led.total_param_bytes), _num(float(led.reduction()))]
        with open(path, "a", newline="") as f:
            csv.writer(f, lineterminator="\n").writerow(row)
        log.info("%s=%s: PSNR %.3f dB", args.param, key, report.mean_psnr())
    return EXIT_OK


# --- report -----------------------------------------------------------------

def read_metrics(run_dir) -> dict[tuple[str, str], dict[str, str]]:
    path = Path(run_dir) / "metrics.csv"
    if not path.is_file():
        raise UsageError(f"missing {path}")
    with open(path, newline="") as f:
        reader = csv.DictReader(f)
        if reader.fieldnames is None or tuple(reader.fieldnames) != METRIC_FIELDS:
            raise UsageError(f"{path} has an unexpected header")
        return {(r["client"], r["modality"]): r for r in reader}


def render_comparison(run_dirs) -> str:
    tables = [read_metrics(d) for d in run_dirs]
    names = [Path(d).name or str(d) for d in run_dirs]
    keys = []
    for t in tables:
        keys += [k for k in t if k not in keys]
    keys.sort(key=lambda k: (k[0] == "avg", k[0], k[1]))
    width = max(12, *(len(n) + 2 for n in names))
    head = f"{'client':>7} {'target':>7} {'metric':>7} " + " ".join(f"{n:>{width}}" for n in names)
    lines = [head]
    for key in keys:
        for metric in ("psnr", "ssim"):
            cells = [t[key][metric] if key in t else "" for t in tables]
            vals = [float(c) for c in cells if c]
            best = max(vals) if len(vals) > 1 else None
            shown = [(c + "*") if best is not None and c and float(c) == best else c for c in cells]
            lines.append(f"{key[0]:>7} {key[1]:>7} {metric:>7} " + " ".join(f"{c:>{width}}" for c in shown))
    if len(tables) > 1:
        lines.append("* best value in the row")
    return "\n".join(lines) + "\n"


def cmd_report(args) -> int:
    sys.stdout.write(render_comparison(args.runs))
    return EXIT_OK


# --- cluster-inspect ----------------------------------------------------------

def spectrum_view(amp: np.ndarray) -> np.ndarray:
    """Centred log amplitude scaled to [0, 1] for display."""
    v = np.log1p(np.fft.fftshift(np.asarray(amp, dtype=np.float64)))
    top = v.max()
    return v / top if top > 0 else v


def cmd_cluster_inspect(args) -> int:
    cfg = load_config(args.config, args.seed)
    if args.k is not None:
        cfg = cfg.replace(k=args.k)
    clients = fed.build_clients(cfg)
    ccfg = ClusterConfig(k=cfg.k, max_iter=cfg.kmeans_max_iter, tol=cfg.kmeans_tol,
                         restarts=cfg.kmeans_restarts, seed=cfg.seed)
    memory = fed.aggregate_centroids(clients, ccfg)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    for m, sets in sorted(memory.sets.items()):
        for cs in sets:
            data.save_tensor(out / f"centroids_m{m}_client{cs.source_client}.fpmg", cs.centroids)
            for j, c in enumerate(cs.centroids[:args.limit]):
                data.export_pgm(spectrum_view(c), out / f"centroid_m{m}_client{cs.source_client}_{j}.pgm")
    rng = np.random.default_rng(cfg.seed)
    blend = pmg.BlendParams(cfg.alpha)
    for c in clients:
        if c.is_multimodal:
            continue
        (p,) = c.modalities
        h = 3 - p
        for i, y in enumerate(c.images(p)[:args.limit]):
            z = pmg.sample_centroid(memory, h, rng)
            data.export_pgm(y, out / f"client{c.id}_{i}_real_m{p}.pgm")
            data.export_pgm(pmg.generate_pseudo(y, z, blend), out / f"client{c.id}_{i}_pseudo_m{h}.pgm")
            data.export_pgm(spectrum_view(numerics.amplitude(y)), out / f"client{c.id}_{i}_amp_m{p}.pgm")
    log.info("wrote centroid and pseudo-image dumps to %s", out)
    return EXIT_OK


# --- entry point ------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="fedpmg", description=__doc__.splitlines()[0])
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen-data", help="write the synthetic client datasets")
    g.add_argument("config")
    g.add_argument("--out", required=True)
    g.add_argument("--seed", type=int)
    g.set_defaults(func=cmd_gen_data)

    r = sub.add_parser("run", help="run one federated experiment")
    r.add_argument("config")
    r.add_argument("--mode", choices=config.MODES)
    r.add_argument("--seed", type=int)
    r.add_argument("--rounds", type=int)
    r.add_argument("--out", required=True)
    r.set_defaults(func=cmd_run)

    s = sub.add_parser("sweep", help="sweep alpha or k")
    s.add_argument("config")
    s.add_argument("--param", choices=("alpha", "k"), required=True)
    s.add_argument("--values", nargs="+")
    s.add_argument("--mode", choices=config.MODES)
    s.add_argument("--seed", type=int)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_sweep)

    p = sub.add_parser("report", help="compare the metrics of run directories")
    p.add_argument("runs", nargs="+")
    p.set_defaults(func=cmd_report)

    c = sub.add_parser("cluster-inspect", help="dump centroids and sample pseudo images as PGM")
    c.add_argument("config")
    c.add_argument("--out", required=True)
    c.add_argument("--k", type=int)
    c.add_argument("--seed", type=int)
    c.add_argument("--limit", type=int, default=8)
    c.set_defaults(func=cmd_cluster_inspect)
    return ap


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return EXIT_USAGE if e.code not in (0, None) else EXIT_OK
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s", stream=sys.stderr)
    try:
        return args.func(args)
    except (UsageError, ConfigError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except FedPMGError as e:
        print(f"failed: {e}", file=sys.stderr)
        return EXIT_FAIL
    except Exception as e:  # anything unexpected is a runtime failure, not a usage error
        log.debug("unhandled", exc_info=True)
        print(f"failed: {type(e).__name__}: {e}", file=sys.stderr)
        return EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
