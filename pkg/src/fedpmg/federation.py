"""Client/server simulation: centroid sharing, local training, FedAvg, run modes.

Every byte that crosses the simulated network goes through ``Message`` and is
counted by ``CommLedger``. Clients only ever see what the server sends them
(decoded from the wire format) and vice versa.
"""
from __future__ import annotations

import dataclasses
import enum
from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property

import numpy as np

from . import data, metrics, model, numerics, pmg, sampling
from .clustering import CentroidSet, ClusterConfig, kmeans
from .config import ExperimentConfig
from .errors import AggregationError, InvalidInput, MissingModalityError
from .model import AdamState, ModelParams

SERVER = -1


class RunMode(str, enum.Enum):
    FEDPMG = "fedpmg"
    IDEAL = "ideal"
    MIXUP = "mixup"
    GROUP = "group"
    GATHER = "gather"


class MessageKind(str, enum.Enum):
    CENTROID_UPLOAD = "CentroidUpload"
    PARAM_UPLOAD = "ParamUpload"
    PARAM_BROADCAST = "ParamBroadcast"
    CENTROID_BROADCAST = "CentroidBroadcast"


@dataclass(frozen=True)
class Message:
    sender: int
    receiver: int
    round: int
    kind: MessageKind
    payload: bytes
    modality: int | None = None
    model_key: str | None = None

    @property
    def payload_bytes(self) -> int:
        return len(self.payload)


def encode_params(params: ModelParams) -> bytes:
    """Parameter message payload: one f32 vector ``[in_ch, w_0, w_1, ...]``."""
    return data.encode_tensor(np.concatenate([[params.in_ch], params.vector.astype(np.float64)]))


def decode_params(payload: bytes) -> ModelParams:
    (vec,) = data.decode_tensors(payload)
    if vec.ndim != 1 or vec.size < 1:
        raise AggregationError("parameter payload must be a single vector")
    return ModelParams(vec[1:].copy(), int(vec[0]))


def encode_centroids(centroids: np.ndarray) -> bytes:
    """Centroid payload: each spectrum serialized on its own, concatenated."""
    return b"".join(data.encode_tensor(c) for c in centroids)


def decode_centroids(payload: bytes) -> np.ndarray:
    arrs = data.decode_tensors(payload)
    if not arrs or any(a.ndim != 2 for a in arrs):
        raise AggregationError("centroid payload must hold 2-D amplitude spectra")
    return np.stack(arrs)


@dataclass
class ClientSpec:
    """One site. ``train`` holds only the modalities the site owns; the real
    images of the missing modality sit in ``withheld`` and are used only when a
    mode is explicitly allowed to see them (Ideal, Gather)."""
    id: int
    modalities: tuple[int, ...]
    train: dict[int, np.ndarray]
    test: dict[int, np.ndarray]
    mask: sampling.Mask1D
    site: data.SiteParams | None = None
    withheld: dict[int, np.ndarray] = field(default_factory=dict)
    kspace_noise: float = 0.0

    def __post_init__(self):
        if not self.modalities:
            raise InvalidInput(f"client {self.id} owns no modality")
        if set(self.train) != set(self.modalities):
            raise InvalidInput(f"client {self.id}: train data must cover exactly its modalities")
        sizes = {len(v) for v in self.train.values()}
        if len(sizes) != 1 or sizes.pop() < 1:
            raise InvalidInput(f"client {self.id}: train sets must be non-empty and paired")
        self._x_cache: dict[int, np.ndarray] = {}

    @property
    def n_q(self) -> int:
        return len(next(iter(self.train.values())))

    @property
    def is_multimodal(self) -> bool:
        return set(self.modalities) == {1, 2}

    def images(self, modality: int) -> np.ndarray:
        if modality not in self.train:
            raise MissingModalityError(f"client {self.id} has no modality {modality}")
        return self.train[modality]

    def degrade(self, y: np.ndarray, seed: int = 0) -> np.ndarray:
        noise = sampling.NoiseSpec(self.kspace_noise, seed) if self.kspace_noise > 0 else None
        return sampling.undersample(y, self.mask, noise).astype(np.float32)

    def undersampled(self, modality: int) -> np.ndarray:
        if modality not in self._x_cache:
            self._x_cache[modality] = self.degrade(self.images(modality), seed=self.id)
        return self._x_cache[modality]

    def completed(self) -> "ClientSpec":
        """The same site with its withheld real modality restored."""
        train = dict(self.train)
        train.update(self.withheld)
        mods = tuple(sorted(train))
        return ClientSpec(self.id, mods, train, self.test, self.mask, self.site, {}, self.kspace_noise)


@dataclass
class CentroidMemory:
    sets: dict[int, list[CentroidSet]] = field(default_factory=lambda: {1: [], 2: []})

    def add(self, cs: CentroidSet) -> None:
        self.sets.setdefault(cs.modality, []).append(cs)
        self.__dict__.pop("_pools", None)

    @cached_property
    def _pools(self) -> dict[int, np.ndarray]:
        return {m: np.concatenate([s.centroids for s in sets]) for m, sets in self.sets.items() if sets}

    def pool(self, modality: int) -> np.ndarray:
        return self._pools.get(modality, np.zeros((0, 0, 0)))

    def count(self, modality: int) -> int:
        return len(self.pool(modality))


@dataclass
class CommLedger:
    """Byte accounting. ``param_bytes`` counts parameter traffic in both
    directions; ``info_bytes`` counts uploaded amplitude information."""
    beta: int = 0
    param_bytes: dict[int, int] = field(default_factory=dict)
    info_bytes: dict[int, int] = field(default_factory=dict)
    info_broadcast_bytes: int = 0
    client_info: dict[int, int] = field(default_factory=dict)
    client_naive: dict[int, int] = field(default_factory=dict)
    k_eff: list[int] = field(default_factory=list)
    n_spectra: list[int] = field(default_factory=list)

    def open_round(self, r: int) -> None:
        self.param_bytes.setdefault(r, 0)
        self.info_bytes.setdefault(r, 0)

    def record(self, msg: Message, n_spectra: int | None = None) -> None:
        self.open_round(msg.round)
        if msg.kind in (MessageKind.PARAM_UPLOAD, MessageKind.PARAM_BROADCAST):
            self.param_bytes[msg.round] += msg.payload_bytes
        elif msg.kind is MessageKind.CENTROID_UPLOAD:
            if n_spectra is None:
                raise InvalidInput("centroid uploads need the number of clustered spectra")
            k = msg.payload_bytes // self.beta
            if k * self.beta != msg.payload_bytes:
                raise AggregationError("centroid payload is not a whole number of spectra")
            self.info_bytes[msg.round] += msg.payload_bytes
            self.client_info[msg.sender] = self.client_info.get(msg.sender, 0) + msg.payload_bytes
            self.client_naive[msg.sender] = self.client_naive.get(msg.sender, 0) + n_spectra * self.beta
            self.k_eff.append(k)
            self.n_spectra.append(n_spectra)
        else:
            self.info_broadcast_bytes += msg.payload_bytes

    @property
    def total_param_bytes(self) -> int:
        return sum(self.param_bytes.values())

    @property
    def total_info_bytes(self) -> int:
        return sum(self.info_bytes.values())

    @property
    def naive_info_bytes(self) -> int:
        return sum(self.n_spectra) * self.beta

    def reduction(self, client: int | None = None) -> Fraction:
        """Exact fraction of amplitude traffic saved against shipping every spectrum."""
        if client is None:
            info, naive = self.total_info_bytes, self.naive_info_bytes
        else:
            info, naive = self.client_info.get(client, 0), self.client_naive.get(client, 0)
        if naive == 0:
            return Fraction(0)
        return 1 - Fraction(info, naive)

    def rows(self) -> list[tuple[int, int, int]]:
        keys = sorted(set(self.param_bytes) | set(self.info_bytes))
        return [(r, self.param_bytes.get(r, 0), self.info_bytes.get(r, 0)) for r in keys]


def _cluster_seed(seed: int, client: int, modality: int) -> int:
    return int(np.random.SeedSequence([seed, 7, client, modality]).generate_state(1)[0])


def aggregate_centroids(clients: list[ClientSpec], cluster_cfg: ClusterConfig,
                        ledger: CommLedger | None = None, log: list | None = None,
                        require_all_modalities: bool = True) -> CentroidMemory:
    """Every client clusters the amplitude spectra of each modality it owns and
    uploads the centroids once; the server files them by modality."""
    owned = set()
    for c in clients:
        if not c.modalities or c.n_q < 1:
            raise InvalidInput(f"client {c.id} has no images")
        owned |= set(c.modalities)
    if require_all_modalities and owned != {1, 2}:
        missing = sorted({1, 2} - owned)
        raise MissingModalityError(f"modality {missing} is absent from every client")
    memory = CentroidMemory()
    for c in sorted(clients, key=lambda c: c.id):
        for p in sorted(c.modalities):
            amps = numerics.amplitude(c.images(p))
            if ledger is not None and ledger.beta == 0:
                ledger.beta = data.tensor_nbytes(amps.shape[1:])
            cfg = dataclasses.replace(cluster_cfg, seed=_cluster_seed(cluster_cfg.seed, c.id, p))
            cs = kmeans(amps, cfg, modality=p, source_client=c.id)
            msg = Message(c.id, SERVER, 0, MessageKind.CENTROID_UPLOAD,
                          encode_centroids(cs.centroids), modality=p)
            if ledger is not None:
                ledger.record(msg, n_spectra=len(amps))
            if log is not None:
                log.append(msg)
            received = decode_centroids(msg.payload)
            memory.add(CentroidSet(p, received, c.id, cs.objective))
    return memory


def broadcast_centroids(memory: CentroidMemory, client: ClientSpec, modality: int,
                        ledger: CommLedger | None = None, log: list | None = None) -> CentroidMemory:
    """Ship the pooled centroids of ``modality`` to a client; returns its local copy."""
    pool = memory.pool(modality)
    if len(pool) == 0:
        raise MissingModalityError(f"server holds no centroids for modality {modality}")
    msg = Message(SERVER, client.id, 0, MessageKind.CENTROID_BROADCAST, encode_centroids(pool),
                  modality=modality)
    if ledger is not None:
        ledger.record(msg)
    if log is not None:
        log.append(msg)
    local = CentroidMemory()
    local.add(CentroidSet(modality, decode_centroids(msg.payload), SERVER))
    return local


@dataclass
class TrainConfig:
    target: int = 1
    local_epochs: int = 5
    batch_size: int = 8
    lr: float = 1e-4
    alpha: float = 0.09

    @property
    def aux(self) -> int:
        return 3 - self.target


def _train_loop(params: ModelParams, n: int, make_batch, epochs: int, cfg: TrainConfig,
                rng: np.random.Generator):
    state = AdamState.fresh(params.vector.size, cfg.lr, params.vector.dtype)
    losses = []
    for _ in range(epochs):
        order = rng.permutation(n)
        for start in range(0, n, cfg.batch_size):
            idx = np.sort(order[start:start + cfg.batch_size])
            inputs, targets = make_batch(idx)
            loss, grad = model.loss_and_grad(params, inputs, targets)
            params, state = model.adam_step(params, grad, state)
            losses.append(loss)
    return params, losses


def _as_batch(*channels) -> np.ndarray:
    return np.stack(channels, axis=1).astype(np.float32)


def local_train_multimodal(client: ClientSpec, params: ModelParams, epochs: int,
                           cfg: TrainConfig, rng: np.random.Generator):
    """Channel-fused training on real pairs: input ``[x_target, y_aux]``, target ``y_target``."""
    if params.in_ch != 2:
        raise InvalidInput("multi-modal training needs a 2-channel model")
    y_t, y_a = client.images(cfg.target), client.images(cfg.aux)
    x_t = client.undersampled(cfg.target)

    def make_batch(idx):
        return _as_batch(x_t[idx], y_a[idx]), y_t[idx][:, None]

    return _train_loop(params, client.n_q, make_batch, epochs, cfg, rng)


def local_train_single_with_pseudo(client: ClientSpec, params: ModelParams, memory: CentroidMemory,
                                   blend: pmg.BlendParams, epochs: int, cfg: TrainConfig,
                                   rng: np.random.Generator):
    """Training at a single-modal site with a pseudo image for the missing modality.

    One centroid is drawn per batch. If the target modality is missing, the
    pseudo target is undersampled with the site's own mask and becomes the
    regression target; if the auxiliary is missing, the pseudo image replaces it.
    """
    if params.in_ch != 2:
        raise InvalidInput("pseudo-modality training needs a 2-channel model")
    if len(client.modalities) != 1:
        raise InvalidInput(f"client {client.id} is not single-modal")
    (p,) = client.modalities
    h = 3 - p
    if memory.count(h) == 0:
        raise MissingModalityError(f"no centroids for missing modality {h}")
    y_p = client.images(p)

    if h == cfg.target:
        def make_batch(idx):
            z = pmg.sample_centroid(memory, h, rng)
            pseudo_t = pmg.generate_pseudo(y_p[idx], z, blend).astype(np.float32)
            return _as_batch(client.degrade(pseudo_t), y_p[idx]), pseudo_t[:, None]
    else:
        x_p = client.undersampled(p)

        def make_batch(idx):
            z = pmg.sample_centroid(memory, h, rng)
            pseudo_a = pmg.generate_pseudo(y_p[idx], z, blend).astype(np.float32)
            return _as_batch(x_p[idx], pseudo_a), y_p[idx][:, None]

    return _train_loop(params, client.n_q, make_batch, epochs, cfg, rng)


def local_train_single(client: ClientSpec, params: ModelParams, modalities, epochs: int,
                       cfg: TrainConfig, rng: np.random.Generator):
    """One-channel training on every image of ``modalities`` without distinction."""
    if params.in_ch != 1:
        raise InvalidInput("single-modal training needs a 1-channel model")
    ys = np.concatenate([client.images(m) for m in modalities])
    xs = np.concatenate([client.undersampled(m) for m in modalities])

    def make_batch(idx):
        return xs[idx][:, None], ys[idx][:, None]

    return _train_loop(params, len(ys), make_batch, epochs, cfg, rng)


def client_weights(counts) -> list[float]:
    total = sum(counts)
    if total <= 0:
        raise InvalidInput("client data counts must sum to a positive number")
    return [n / total for n in counts]


def fedavg(param_list: list[ModelParams], weights) -> ModelParams:
    """Weighted parameter average, reduced in the given order."""
    if not param_list:
        raise AggregationError("nothing to aggregate")
    if len(weights) != len(param_list):
        raise InvalidInput("one weight per parameter vector required")
    if abs(sum(weights) - 1.0) > 1e-12:
        raise InvalidInput(f"weights sum to {sum(weights)!r}, not 1")
    in_ch = param_list[0].in_ch
    if any(p.in_ch != in_ch for p in param_list):
        raise AggregationError("cannot average models with different input channels")
    acc = np.zeros(param_list[0].vector.size, dtype=np.float64)
    for p, w in zip(param_list, weights):
        acc += w * p.vector.astype(np.float64)
    return ModelParams(acc.astype(param_list[0].vector.dtype), in_ch)


@dataclass
class FederationState:
    clients: list[ClientSpec]
    mode: RunMode
    train_cfg: TrainConfig
    globals: dict[str, ModelParams]
    seed: int = 0
    round: int = 0
    ledger: CommLedger = field(default_factory=CommLedger)
    log: list[Message] = field(default_factory=list)
    local_memory: dict[int, CentroidMemory] = field(default_factory=dict)
    blend: pmg.BlendParams = field(default_factory=pmg.BlendParams)
    losses: list[float] = field(default_factory=list)


MODEL_KEYS = {"main": 0, "m1": 1, "m2": 2}


def _client_jobs(client: ClientSpec, mode: RunMode):
    """(model key, trainer kind, modalities) triples a client runs in a round."""
    if mode is RunMode.GROUP:
        return [(f"m{m}", "single", (m,)) for m in sorted(client.modalities)]
    if mode is RunMode.MIXUP:
        return [("main", "single", tuple(sorted(client.modalities)))]
    if client.is_multimodal:
        return [("main", "multi", None)]
    if mode is RunMode.FEDPMG:
        return [("main", "pseudo", None)]
    raise MissingModalityError(f"client {client.id} lacks a modality required by mode {mode.value}")


def run_round(state: FederationState, mode: RunMode | None = None) -> FederationState:
    """Broadcast, local training, upload and weighted averaging for one round."""
    mode = RunMode(mode or state.mode)
    r = state.round + 1
    cfg = state.train_cfg
    state.ledger.open_round(r)

    if mode is RunMode.GATHER:
        pooled = _pooled_client(state.clients)
        rng = np.random.default_rng([state.seed, r, 0, 0])
        params, losses = local_train_multimodal(pooled, state.globals["main"], cfg.local_epochs, cfg, rng)
        state.globals["main"] = params
        state.losses.extend(losses)
        state.round = r
        return state

    uploads: dict[str, list[tuple[int, ModelParams, int]]] = {}
    for client in sorted(state.clients, key=lambda c: c.id):
        for key, kind, mods in _client_jobs(client, mode):
            down = Message(SERVER, client.id, r, MessageKind.PARAM_BROADCAST,
                           encode_params(state.globals[key]), model_key=key)
            state.ledger.record(down)
            state.log.append(down)
            local = decode_params(down.payload)
            rng = np.random.default_rng([state.seed, r, client.id, MODEL_KEYS[key]])
            if kind == "multi":
                local, losses = local_train_multimodal(client, local, cfg.local_epochs, cfg, rng)
            elif kind == "pseudo":
                memory = state.local_memory.get(client.id)
                if memory is None:
                    raise MissingModalityError(f"client {client.id} never received centroids")
                local, losses = local_train_single_with_pseudo(client, local, memory, state.blend,
                                                               cfg.local_epochs, cfg, rng)
            else:
                local, losses = local_train_single(client, local, mods, cfg.local_epochs, cfg, rng)
            state.losses.extend(losses)
            up = Message(client.id, SERVER, r, MessageKind.PARAM_UPLOAD, encode_params(local),
                         model_key=key)
            state.ledger.record(up)
            state.log.append(up)
            uploads.setdefault(key, []).append((client.id, decode_params(up.payload), client.n_q))

    for key, items in uploads.items():
        items.sort(key=lambda t: t[0])
        weights = client_weights([n for _, _, n in items])
        state.globals[key] = fedavg([p for _, p, _ in items], weights)
    state.round = r
    return state


def _pooled_client(clients: list[ClientSpec]) -> ClientSpec:
    full = [c if c.is_multimodal else c.completed() for c in clients]
    for c in full:
        if not c.is_multimodal:
            raise MissingModalityError(f"client {c.id} cannot supply a complete pair for Gather")
    train = {m: np.concatenate([c.images(m) for c in full]) for m in (1, 2)}
    pooled = ClientSpec(0, (1, 2), train, {}, full[0].mask)
    # each site keeps its own sampling pattern when pooled
    pooled._x_cache = {m: np.concatenate([c.undersampled(m) for c in full]) for m in (1, 2)}
    return pooled


# --- experiment driver ----------------------------------------------------

def _client_seed(seed: int, q: int, purpose: int) -> int:
    return int(np.random.SeedSequence([seed, purpose, q]).generate_state(1)[0])


def client_data(cfg: ExperimentConfig, q: int):
    """``(train_slices, test_slices, mask)`` for site ``q``; pure in ``cfg.seed``."""
    cc = cfg.clients[q]
    spec = data.PhantomSpec(size=cfg.image_size, seed=_client_seed(cfg.seed, q, 1),
                            site=cc.site_params(), slices=cfg.slices_per_subject)
    slices = data.generate_subjects(spec, cc.n_subjects)
    train, test = data.split_dataset(slices, cfg.split_ratio, seed=_client_seed(cfg.seed, q, 2))
    mask = sampling.make_mask(cc.mask_type, cfg.image_size, cc.accel, cc.center_fraction,
                              seed=_client_seed(cfg.seed, q, 3))
    return train, test, mask


def build_clients(cfg: ExperimentConfig) -> list[ClientSpec]:
    """Generate every site's data. Missing modalities are withheld, not discarded."""
    clients = []
    for q, cc in sorted(cfg.clients.items()):
        train, test, mask = client_data(cfg, q)
        present = tuple(sorted(cc.modalities))
        clients.append(ClientSpec(
            id=q, modalities=present,
            train={m: data.stack(train, m) for m in present},
            test={m: data.stack(test, m) for m in (1, 2)},
            mask=mask, site=cc.site_params(),
            withheld={m: data.stack(train, m) for m in (1, 2) if m not in present},
            kspace_noise=cfg.kspace_noise,
        ))
    return clients


def init_globals(mode: RunMode, seed: int) -> dict[str, ModelParams]:
    s = _client_seed(seed, 0, 4)
    if mode is RunMode.MIXUP:
        return {"main": model.init_params(1, s)}
    if mode is RunMode.GROUP:
        return {"m1": model.init_params(1, s), "m2": model.init_params(1, s + 1)}
    return {"main": model.init_params(2, s)}


def predict(mode: RunMode, globals_: dict[str, ModelParams], x_t: np.ndarray, y_a: np.ndarray,
            target: int, batch: int = 64) -> np.ndarray:
    if mode is RunMode.MIXUP:
        params, chans = globals_["main"], (x_t,)
    elif mode is RunMode.GROUP:
        params, chans = globals_[f"m{target}"], (x_t,)
    else:
        params, chans = globals_["main"], (x_t, y_a)
    out = [model.forward(params, _as_batch(*(c[i:i + batch] for c in chans)))[:, 0]
           for i in range(0, len(x_t), batch)]
    return np.concatenate(out)


def evaluate(mode: RunMode, globals_: dict[str, ModelParams], clients: list[ClientSpec],
             target: int, round_: int) -> list[dict]:
    """PSNR/SSIM of the global model(s) on each site's held-out real pairs."""
    rows = []
    for c in sorted(clients, key=lambda c: c.id):
        y_t, y_a = c.test[target], c.test[3 - target]
        x_t = c.degrade(y_t, seed=c.id + 10_000)
        pred = predict(mode, globals_, x_t, y_a, target)
        ps = [metrics.psnr(y, p) for y, p in zip(y_t, pred)]
        ss = [metrics.ssim(y, p) for y, p in zip(y_t, pred)]
        rows.append({"round": round_, "client": c.id, "modality": target,
                     "psnr": float(np.mean(ps)), "ssim": float(np.mean(ss))})
    return rows


@dataclass
class RunReport:
    config: ExperimentConfig
    mode: RunMode
    metrics: list[dict]
    ledger: CommLedger
    log: list[Message]
    globals: dict[int, dict[str, ModelParams]]
    memory: CentroidMemory | None = None
    losses: list[float] = field(default_factory=list)
    clients: list[ClientSpec] = field(default_factory=list)

    def mean_psnr(self, target: int | None = None) -> float:
        rows = [r for r in self.metrics if target is None or r["modality"] == target]
        return float(np.mean([r["psnr"] for r in rows]))

    def mean_ssim(self, target: int | None = None) -> float:
        rows = [r for r in self.metrics if target is None or r["modality"] == target]
        return float(np.mean([r["ssim"] for r in rows]))


def run_experiment(cfg: ExperimentConfig, clients: list[ClientSpec] | None = None) -> RunReport:
    """Centroid aggregation (Fed-PMG only), ``cfg.rounds`` rounds, then evaluation."""
    cfg.validate()
    mode = RunMode(cfg.mode)
    clients = build_clients(cfg) if clients is None else clients
    if mode in (RunMode.IDEAL, RunMode.GATHER):
        train_clients = [c.completed() for c in clients]
    else:
        train_clients = clients

    ledger, log = CommLedger(), []
    ledger.open_round(0)
    memory = None
    local_memory: dict[int, CentroidMemory] = {}
    if mode is RunMode.FEDPMG:
        ccfg = ClusterConfig(k=cfg.k, max_iter=cfg.kmeans_max_iter, tol=cfg.kmeans_tol,
                             restarts=cfg.kmeans_restarts, seed=cfg.seed)
        memory = aggregate_centroids(train_clients, ccfg, ledger, log)
        for c in train_clients:
            if not c.is_multimodal:
                local_memory[c.id] = broadcast_centroids(memory, c, 3 - c.modalities[0], ledger, log)

    rows, finals, all_losses = [], {}, []
    trained: dict[str, dict] = {}
    for target in cfg.targets:
        # single-channel modes train the same models regardless of direction
        cache_key = "shared" if mode in (RunMode.MIXUP, RunMode.GROUP) else f"t{target}"
        if cache_key not in trained:
            state = FederationState(
                clients=train_clients, mode=mode,
                train_cfg=TrainConfig(target, cfg.local_epochs, cfg.batch_size, cfg.lr, cfg.alpha),
                globals=init_globals(mode, cfg.seed), seed=cfg.seed + 1000 * target,
                ledger=ledger, log=log, local_memory=local_memory,
                blend=pmg.BlendParams(cfg.alpha))
            for _ in range(cfg.rounds):
                run_round(state)
            trained[cache_key] = state.globals
            all_losses.extend(state.losses)
        finals[target] = trained[cache_key]
        rows.extend(evaluate(mode, finals[target], clients, target, cfg.rounds))
    return RunReport(cfg, mode, rows, ledger, log, finals, memory, all_losses, clients)


def privacy_violations(log: list[Message], clients: list[ClientSpec]) -> list[str]:
    """Schema scan of a message log.

    Single-modal sites may only send CentroidUpload/ParamUpload. Centroid
    payloads must decode to non-negative, point-symmetric 2-D grids (the
    signature of an amplitude spectrum, which phase maps and images lack) and
    must not coincide with any training image. Parameter payloads must decode
    to one vector of the right length for their in_ch tag.
    """
    by_id = {c.id: c for c in clients}
    bad = []
    for i, m in enumerate(log):
        sender = by_id.get(m.sender)
        if sender is not None and len(sender.modalities) == 1 and m.kind not in (
                MessageKind.CENTROID_UPLOAD, MessageKind.PARAM_UPLOAD):
            bad.append(f"#{i}: single-modal client {m.sender} sent {m.kind.value}")
        try:
            if m.kind in (MessageKind.CENTROID_UPLOAD, MessageKind.CENTROID_BROADCAST):
                grids = decode_centroids(m.payload)
                if np.any(grids < 0):
                    bad.append(f"#{i}: negative entries in amplitude payload")
                flipped = np.roll(grids[:, ::-1, ::-1], 1, axis=(1, 2))
                if not np.allclose(grids, flipped, rtol=1e-5, atol=1e-3):
                    bad.append(f"#{i}: payload is not an amplitude spectrum")
                for c in clients:
                    for imgs in c.train.values():
                        if imgs.shape[1:] == grids.shape[1:] and any(
                                np.array_equal(g, im) for g in grids for im in imgs):
                            bad.append(f"#{i}: payload contains a raw image")
            else:
                p = decode_params(m.payload)
                if p.vector.size != model.param_count(p.in_ch):
                    bad.append(f"#{i}: malformed parameter payload")
        except Exception as e:  # any undecodable payload is a violation
            bad.append(f"#{i}: undecodable payload ({e})")
    return bad
