"""Flat ``key=value`` experiment configuration.

Per-client settings live under ``client.<q>.<key>``. Unknown keys are
rejected; ``parse(serialize(cfg)) == cfg`` for every valid config.
"""
from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from pathlib import Path

from .data import SITE_PRESETS, SiteParams
from .errors import ConfigError

MODES = ("fedpmg", "ideal", "mixup", "group", "gather")
SWEEP_ALPHAS = (0.0, 0.01, 0.05, 0.09, 1.0)
SWEEP_KS = (1, 10, 50, 100, 200)


@dataclass
class ClientConfig:
    modalities: tuple[int, ...]
    n_subjects: int
    mask_type: str = "equispaced"
    accel: float = 4.0
    center_fraction: float | None = None
    site: str = "fastmri_3t"
    gain: float | None = None
    gamma: float | None = None
    noise_sigma: float | None = None
    bias_smoothness: float | None = None

    def site_params(self) -> SiteParams:
        base = SITE_PRESETS[self.site]
        overrides = {k: getattr(self, k) for k in ("gain", "gamma", "noise_sigma", "bias_smoothness")
                     if getattr(self, k) is not None}
        return dataclasses.replace(base, **overrides)

    def validate(self, q: int) -> None:
        if not self.modalities or any(m not in (1, 2) for m in self.modalities):
            raise ConfigError(f"client {q}: modalities must be a non-empty subset of {{1,2}}")
        if len(set(self.modalities)) != len(self.modalities):
            raise ConfigError(f"client {q}: duplicate modality")
        if self.n_subjects < 2:
            raise ConfigError(f"client {q}: need at least 2 subjects for a train/test split")
        if self.mask_type not in ("equispaced", "random"):
            raise ConfigError(f"client {q}: unknown mask_type {self.mask_type!r}")
        if self.accel < 1:
            raise ConfigError(f"client {q}: accel must be >= 1")
        if self.site not in SITE_PRESETS:
            raise ConfigError(f"client {q}: unknown site {self.site!r}; choose from {sorted(SITE_PRESETS)}")
        try:
            self.site_params()
        except ValueError as e:
            raise ConfigError(f"client {q}: {e}") from None


@dataclass
class ExperimentConfig:
    clients: dict[int, ClientConfig] = field(default_factory=dict)
    rounds: int = 50
    local_epochs: int = 5
    batch_size: int = 8
    lr: float = 1e-4
    k: int = 50
    alpha: float = 0.09
    mode: str = "fedpmg"
    direction: str = "1"
    seed: int = 0
    image_size: int = 32
    slices_per_subject: int = 16
    split_ratio: float = 0.7
    kspace_noise: float = 0.0
    kmeans_restarts: int = 3
    kmeans_max_iter: int = 100
    kmeans_tol: float = 1e-6
    sweep_alpha: tuple[float, ...] = SWEEP_ALPHAS
    sweep_k: tuple[int, ...] = SWEEP_KS

    def validate(self) -> "ExperimentConfig":
        if not self.clients:
            raise ConfigError("at least one client block (client.<q>.*) is required")
        for q, c in self.clients.items():
            c.validate(q)
        if self.mode not in MODES:
            raise ConfigError(f"mode must be one of {MODES}, got {self.mode!r}")
        if self.direction not in ("1", "2", "both"):
            raise ConfigError("direction must be 1, 2 or both")
        for name in ("local_epochs", "batch_size", "k", "kmeans_restarts", "kmeans_max_iter",
                     "slices_per_subject"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be >= 1")
        if self.rounds < 0:
            raise ConfigError("rounds must be >= 0")
        if not 0.0 <= self.alpha <= 1.0:
            raise ConfigError("alpha must lie in [0, 1]")
        if self.lr <= 0:
            raise ConfigError("lr must be positive")
        if self.image_size < 16:
            raise ConfigError("image_size must be >= 16")
        if not 0.0 < self.split_ratio < 1.0:
            raise ConfigError("split_ratio must lie in (0, 1)")
        if self.kspace_noise < 0:
            raise ConfigError("kspace_noise must be >= 0")
        return self

    @property
    def targets(self) -> tuple[int, ...]:
        return (1, 2) if self.direction == "both" else (int(self.direction),)

    def replace(self, **changes) -> "ExperimentConfig":
        return dataclasses.replace(self, **changes).validate()


_GLOBAL_FIELDS = {f.name: f for f in dataclasses.fields(ExperimentConfig) if f.name != "clients"}
_CLIENT_FIELDS = {f.name: f for f in dataclasses.fields(ClientConfig)}
_ALIASES = {"sweep.alpha": "sweep_alpha", "sweep.k": "sweep_k"}
_CLIENT_REQUIRED = ("modalities", "n_subjects")


def _convert(name: str, raw: str, where: str):
    try:
        if name == "modalities":
            return tuple(int(v) for v in raw.split(",") if v.strip())
        if name == "sweep_alpha":
            return tuple(float(v) for v in raw.split(",") if v.strip())
        if name == "sweep_k":
            return tuple(int(v) for v in raw.split(",") if v.strip())
        if name in ("mode", "direction", "mask_type", "site"):
            return raw
        if name in ("rounds", "local_epochs", "batch_size", "k", "seed", "image_size",
                    "slices_per_subject", "kmeans_restarts", "kmeans_max_iter", "n_subjects"):
            return int(raw)
        return float(raw)
    except ValueError:
        raise ConfigError(f"{where}: cannot parse value {raw!r} for {name}") from None


def parse(text: str) -> ExperimentConfig:
    globals_: dict = {}
    clients: dict[int, dict] = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected key=value")
        key, raw = (s.strip() for s in line.split("=", 1))
        where = f"line {lineno}"
        if key.startswith("client."):
            parts = key.split(".")
            if len(parts) != 3 or not parts[1].isdigit() or parts[2] not in _CLIENT_FIELDS:
                raise ConfigError(f"{where}: unknown key {key!r}")
            q = int(parts[1])
            if q < 1:
                raise ConfigError(f"{where}: client ids start at 1")
            clients.setdefault(q, {})[parts[2]] = _convert(parts[2], raw, where)
        else:
            name = _ALIASES.get(key, key)
            if name not in _GLOBAL_FIELDS or key in ("sweep_alpha", "sweep_k"):
                raise ConfigError(f"{where}: unknown key {key!r}")
            globals_[name] = _convert(name, raw, where)
    built = {}
    for q, kv in sorted(clients.items()):
        missing = [k for k in _CLIENT_REQUIRED if k not in kv]
        if missing:
            raise ConfigError(f"client {q}: missing required keys {missing}")
        built[q] = ClientConfig(**kv)
    return ExperimentConfig(clients=built, **globals_).validate()


def _fmt(v) -> str:
    if isinstance(v, tuple):
        return ",".join(_fmt(x) for x in v)
    if isinstance(v, float):
        return repr(v)
    return str(v)


def serialize(cfg: ExperimentConfig) -> str:
    lines = []
    for name in _GLOBAL_FIELDS:
        key = {v: k for k, v in _ALIASES.items()}.get(name, name)
        lines.append(f"{key} = {_fmt(getattr(cfg, name))}")
    for q, c in sorted(cfg.clients.items()):
        for name in _CLIENT_FIELDS:
            v = getattr(c, name)
            if v is not None:
                lines.append(f"client.{q}.{name} = {_fmt(v)}")
    return "\n".join(lines) + "\n"


def load(path) -> ExperimentConfig:
    return parse(Path(path).read_text())


def default_config() -> ExperimentConfig:
    """Three sites: a 1.5T-like site holds modality 1 only, a 3T-like site holds
    both, uMR holds modality 2 only."""
    return ExperimentConfig(clients={
        1: ClientConfig(modalities=(1,), n_subjects=18, site="fastmri_1.5t"),
        2: ClientConfig(modalities=(1, 2), n_subjects=18, site="fastmri_3t"),
        3: ClientConfig(modalities=(2,), n_subjects=18, site="umr"),
    }).validate()
