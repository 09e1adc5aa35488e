"""Loss, Adam training loop with step learning-rate decay, and checkpoints."""

from __future__ import annotations

import json
import logging
import math
import time
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import List, Optional, Sequence

import numpy as np
import torch
from torch import nn

from .data.dataset import BundledSample, TrajectoryDataset, bundle_counts
from .errors import InvalidArgumentError, SchemaError, TrainingDivergedError
from .evaluation import evaluate_rollout
from .model import DeepONet, DeepONetConfig, FieldPrediction, GraphDeepONet, ModelConfig, evaluate_field
from .rollout import predict_frames, prepare_graph

log = logging.getLogger(__name__)

DTYPES = {"float32": torch.float32, "float64": torch.float64}


@dataclass
class TrainConfig:
    lr: float = 5e-4
    batch_size: int = 16
    epochs: int = 100
    lr_decay_factor: float = 0.8
    # None: every quarter of the total epochs
    lr_decay_every: Optional[int] = None
    seed: int = 0
    precision: str = "float32"
    grad_clip: float = 1.0
    eval_batch_size: int = 32
    # roll each training trajectory by a random whole number of cells (uniform periodic 1D grids only)
    augment_shifts: bool = False

    def __post_init__(self):
        if not self.lr > 0:
            raise InvalidArgumentError("lr must be positive")
        if not 0 < self.lr_decay_factor <= 1:
            raise InvalidArgumentError("lr_decay_factor must lie in (0, 1]")
        if self.precision not in DTYPES:
            raise InvalidArgumentError(f"precision must be one of {sorted(DTYPES)}")
        if self.batch_size < 1 or self.epochs < 0:
            raise InvalidArgumentError("batch_size must be >= 1 and epochs >= 0")

    @property
    def decay_every(self) -> int:
        if self.lr_decay_every is not None:
            return max(1, int(self.lr_decay_every))
        return max(1, self.epochs // 4)

    @property
    def dtype(self):
        return DTYPES[self.precision]

    def to_dict(self):
        d = asdict(self)
        d["resolved_lr_decay_every"] = self.decay_every
        return d


def learning_rate(config: TrainConfig, epoch: int) -> float:
    """Learning rate in effect during (0-based) ``epoch``."""
    return config.lr * config.lr_decay_factor ** (epoch // config.decay_every)


def lattice_order(sensors) -> np.ndarray:
    """Sensor indices sorted along a uniform periodic 1D lattice.

    Raises if the sensors do not form such a lattice, since only then is a
    cyclic roll of the values an exact translation of the field.
    """
    dom = sensors.domain
    if dom.dim != 1 or not dom.periodic[0]:
        raise InvalidArgumentError("shift augmentation needs a periodic 1D domain")
    x = sensors.positions[:, 0]
    order = np.argsort(x, kind="stable")
    gaps = np.diff(np.append(x[order], x[order][0] + dom.extent[0]))
    if not np.allclose(gaps, dom.extent[0] / len(x), rtol=0, atol=1e-9 * dom.extent[0]):
        raise InvalidArgumentError("shift augmentation needs uniformly spaced sensors")
    return order


def shift_nodes(u: torch.Tensor, order: np.ndarray, shifts: np.ndarray) -> torch.Tensor:
    """Translate each trajectory of ``u`` ``[B, T, N, C]`` by ``shifts[b]`` lattice cells."""
    n = len(order)
    rank = np.empty(n, dtype=np.int64)
    rank[order] = np.arange(n)
    src = torch.as_tensor(order[(rank[None, :] - np.asarray(shifts)[:, None]) % n])
    return u[torch.arange(u.shape[0])[:, None], :, src].transpose(1, 2)


def loss_total(preds: Sequence[FieldPrediction], targets, sensor_positions) -> torch.Tensor:
    """Mean over predicted frames of the MSE at the target sensors.

    ``targets`` is a :class:`BundledSample` or an array ``[..., R*K, N, C]``.
    """
    if isinstance(targets, BundledSample):
        targets = targets.target_frames
    coeffs = torch.cat([p.coeffs for p in preds], dim=-3)
    targets = torch.as_tensor(targets, dtype=coeffs.dtype)
    if coeffs.shape[-3] != targets.shape[-3]:
        raise InvalidArgumentError(
            f"{coeffs.shape[-3]} predicted frames but {targets.shape[-3]} target frames"
        )
    stacked = FieldPrediction(coeffs, torch.cat([p.times for p in preds]), preds[0].trunk, preds[0].domain)
    values = evaluate_field(stacked, sensor_positions)
    return torch.mean((values - targets) ** 2)


def frames_loss(pred: torch.Tensor, targets: torch.Tensor) -> torch.Tensor:
    return torch.mean((pred - targets) ** 2)


# -- checkpoints ----------------------------------------------------------------


def model_kind(model) -> str:
    if isinstance(model, GraphDeepONet):
        return "graphdeeponet"
    if isinstance(model, DeepONet):
        return "deeponet"
    raise TypeError(type(model).__name__)


def build_model(kind: str, config_dict: dict, seed: Optional[int] = None, dtype=torch.float32):
    if seed is not None:
        torch.manual_seed(seed)
    if kind == "graphdeeponet":
        model = GraphDeepONet(ModelConfig.from_dict(config_dict))
    elif kind == "deeponet":
        model = DeepONet(DeepONetConfig.from_dict(config_dict))
    else:
        raise InvalidArgumentError(f"unknown model kind {kind!r}")
    return model.to(dtype)


def save_checkpoint(path, model, optimizer=None, epoch: int = 0, step: int = 0, seed: int = 0,
                    train_config: Optional[TrainConfig] = None, extra: Optional[dict] = None) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    payload = {
        "kind": model_kind(model),
        "model_config": model.config.to_dict(),
        "state_dict": model.state_dict(),
        "dtype": str(model.dtype).replace("torch.", ""),
        "epoch": int(epoch),
        "step": int(step),
        "seed": int(seed),
        "train_config": train_config.to_dict() if train_config is not None else None,
        "optimizer": optimizer.state_dict() if optimizer is not None else None,
        "extra": extra or {},
    }
    tmp = path.with_suffix(path.suffix + ".tmp")
    torch.save(payload, tmp)
    tmp.replace(path)
    return path


def load_checkpoint(path):
    """Return ``(model, payload)``."""
    payload = torch.load(Path(path), map_location="cpu", weights_only=False)
    for key in ("kind", "model_config", "state_dict", "dtype"):
        if key not in payload:
            raise SchemaError(key, path)
    model = build_model(payload["kind"], payload["model_config"], dtype=DTYPES[payload["dtype"]])
    model.load_state_dict(payload["state_dict"])
    return model, payload


# -- training loop --------------------------------------------------------------


def _param_norm(model) -> float:
    return float(torch.sqrt(sum(p.detach().double().pow(2).sum() for p in model.parameters())))


def fit(
    model,
    train_ds: TrajectoryDataset,
    val_ds: Optional[TrajectoryDataset],
    config: TrainConfig,
    run_dir=None,
    resume: Optional[dict] = None,
    n_rollout: Optional[int] = None,
    time_budget: Optional[float] = None,
    progress: bool = False,
):
    """Minimise the rollout loss with Adam.

    Every epoch logs training loss, validation relative L2 and the learning
    rate; the parameters with the best validation error are restored at the end.
    ``resume`` is a checkpoint payload from :func:`load_checkpoint`.
    ``time_budget`` (seconds) stops after the epoch that exceeds it.
    Returns ``(model, history)``.
    """
    K = model.config.K
    R_full, _ = bundle_counts(train_ds.n_times, K)
    R = R_full if n_rollout is None else int(n_rollout)
    if R > R_full:
        raise InvalidArgumentError(f"training data supports at most {R_full} rollout blocks")
    end = K + R * K

    model.to(config.dtype)
    inputs_all = torch.as_tensor(train_ds.u[:, :K]).to(config.dtype)
    targets_all = torch.as_tensor(train_ds.u[:, K:end]).to(config.dtype)
    graph = prepare_graph(model, train_ds.sensors)
    sensors = train_ds.sensors
    n = train_ds.n_traj
    lattice = lattice_order(sensors) if config.augment_shifts else None

    optimizer = torch.optim.Adam(model.parameters(), lr=config.lr)
    start_epoch, step = 0, 0
    history: List[dict] = []
    best = (math.inf, None, -1)
    if resume is not None:
        if resume.get("optimizer") is not None:
            optimizer.load_state_dict(resume["optimizer"])
        start_epoch = int(resume.get("epoch", 0))
        step = int(resume.get("step", 0))
        history = list(resume.get("extra", {}).get("history", []))
        b = resume.get("extra", {}).get("best_val")
        if b is not None:
            best = (b, None, -1)

    run_dir = Path(run_dir) if run_dir is not None else None
    if run_dir is not None:
        (run_dir / "checkpoints").mkdir(parents=True, exist_ok=True)
        metrics_path = run_dir / "metrics.jsonl"

    t0 = time.perf_counter()
    for epoch in range(start_epoch, config.epochs):
        lr = learning_rate(config, epoch)
        for group in optimizer.param_groups:
            group["lr"] = lr
        model.train()
        rng = np.random.default_rng([config.seed, epoch])
        order = rng.permutation(n)
        shifts = rng.integers(0, sensors.n, size=n) if lattice is not None else None
        total, count = 0.0, 0
        for b, start in enumerate(range(0, n, config.batch_size)):
            idx = torch.as_tensor(order[start:start + config.batch_size])
            inputs, targets = inputs_all[idx], targets_all[idx]
            if lattice is not None:
                inputs = shift_nodes(inputs, lattice, shifts[idx.numpy()])
                targets = shift_nodes(targets, lattice, shifts[idx.numpy()])
            pred = predict_frames(model, inputs, sensors, R, train_ds.dt, graph=graph)
            loss = frames_loss(pred, targets)
            if not torch.isfinite(loss):
                raise TrainingDivergedError(epoch, b, _param_norm(model))
            optimizer.zero_grad(set_to_none=True)
            loss.backward()
            if config.grad_clip:
                nn.utils.clip_grad_norm_(model.parameters(), config.grad_clip)
            optimizer.step()
            step += 1
            total += float(loss.detach()) * len(idx)
            count += len(idx)
        train_loss = total / count

        val = None
        if val_ds is not None:
            val = evaluate_rollout(model, val_ds, batch_size=config.eval_batch_size).rel_l2_mean
        record = {"epoch": epoch + 1, "train_loss": train_loss, "val_rel_l2": val, "lr": lr,
                  "elapsed": time.perf_counter() - t0}
        history.append(record)
        if progress:
            log.info("epoch %d train %.4e val %s lr %.2e", epoch + 1, train_loss, val, lr)
        score = val if val is not None else train_loss
        improved = score < best[0]
        if improved:
            best = (score, {k: v.detach().clone() for k, v in model.state_dict().items()}, epoch + 1)

        if run_dir is not None:
            with open(metrics_path, "a") as fh:
                fh.write(json.dumps(record) + "\n")
            extra = {"history": history, "best_val": best[0]}
            save_checkpoint(run_dir / "checkpoints" / "last.pt", model, optimizer, epoch + 1, step,
                            config.seed, config, extra)
            if improved:
                save_checkpoint(run_dir / "checkpoints" / "best.pt", model, None, epoch + 1, step,
                                config.seed, config, extra)
        if time_budget is not None and time.perf_counter() - t0 > time_budget:
            log.info("time budget reached after epoch %d", epoch + 1)
            break

    if best[1] is not None:
        model.load_state_dict(best[1])
    return model, history
