"""Linear probes on fixed features, trained by SGD with momentum."""

from __future__ import annotations

import json
import logging
import math
from dataclasses import asdict, dataclass, fields
from pathlib import Path

import numpy as np

from .data import FeatureDataset
from .losses import HXE, LossResult, aggregate, hace_loss, sce_loss, softmax
from .targets import ANCESTRAL_KINDS, LEAF_KINDS, TargetMatrix, TargetScheme, build_target_matrix
from .taxonomy import Taxonomy, reachability

log = logging.getLogger(__name__)

LOSSES = ("hace", "sce", "hxe")
PAIRINGS = ("hace_anchored", "sce_anchored")
SCHEDULES = ("constant", "cosine")
DIVERGENCE_FACTOR = 10.0


class ConfigError(ValueError):
    pass


class TrainingDiverged(RuntimeError):
    def __init__(self, epoch: int, loss: float, initial: float):
        self.epoch, self.loss, self.initial = epoch, loss, initial
        super().__init__(
            f"training diverged at epoch {epoch}: loss {loss:.6g} exceeds "
            f"{DIVERGENCE_FACTOR:g}x the initial loss {initial:.6g}"
        )


@dataclass(frozen=True)
class RunConfig:
    loss: str = "sce"
    scheme: str = "one_hot"
    epsilon: float | None = None
    dilution: float | None = None
    beta: float | None = None
    alpha: float | None = None
    pairing: str | None = None
    base_lr: float = 0.1
    momentum: float = 0.9
    weight_decay: float = 0.0
    epochs: int = 30
    batch_size: int = 64
    seed: int = 0
    schedule: str = "constant"
    normalize: bool = False

    def __post_init__(self):
        if self.loss not in LOSSES:
            raise ConfigError(f"loss must be one of {LOSSES}, got {self.loss!r}")
        if self.loss == "sce" and self.scheme not in LEAF_KINDS:
            raise ConfigError(f"sce needs a leaf scheme {LEAF_KINDS}, got {self.scheme!r}")
        if self.loss == "hxe" and self.alpha is None:
            raise ConfigError("hxe requires alpha")
        if self.pairing is not None and self.pairing not in PAIRINGS:
            raise ConfigError(f"pairing must be one of {PAIRINGS} or null, got {self.pairing!r}")
        if self.pairing is not None and self.dilution is None:
            try:
                effective_lr(self)
            except ConfigError:
                raise ConfigError("learning-rate pairing requires dilution") from None
        if self.loss == "hace" and self.scheme in ANCESTRAL_KINDS and self.dilution is None:
            raise ConfigError(f"scheme {self.scheme!r} requires dilution")
        if self.schedule not in SCHEDULES:
            raise ConfigError(f"schedule must be one of {SCHEDULES}, got {self.schedule!r}")
        if not (self.base_lr > 0 and self.epochs > 0 and self.batch_size > 0):
            raise ConfigError("base_lr, epochs and batch_size must be positive")
        if self.momentum < 0 or self.weight_decay < 0:
            raise ConfigError("momentum and weight_decay must be non-negative")
        try:
            self.target_scheme()
        except ValueError as err:
            raise ConfigError(str(err)) from None

    def target_scheme(self) -> TargetScheme | None:
        if self.loss == "hxe":
            return None
        kw = {}
        if self.scheme in ("uniform_smooth", "ancestral_with_uniform") or (
            self.scheme == "ancestral" and self.epsilon
        ):
            kw["epsilon"] = self.epsilon
        if self.scheme in ANCESTRAL_KINDS:
            kw["dilution"] = self.dilution
        if self.scheme in ("lca_soft", "ancestral_with_lca"):
            kw["beta"] = self.beta
        return TargetScheme(self.scheme, **kw)

    def replace(self, **changes) -> RunConfig:
        return RunConfig(**{**asdict(self), **changes})

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2) + "\n"

    @classmethod
    def from_dict(cls, d: dict) -> RunConfig:
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ConfigError(f"unknown config fields: {', '.join(sorted(unknown))}")
        return cls(**d)

    @classmethod
    def load(cls, path: str | Path) -> RunConfig:
        try:
            d = json.loads(Path(path).read_text(encoding="utf-8"))
        except json.JSONDecodeError as err:
            raise ConfigError(f"{path}: {err}") from None
        return cls.from_dict(d)


def effective_lr(config: RunConfig, loss: str | None = None) -> float:
    """Learning rate after applying the HACE/SCE pairing rule."""
    lr = config.base_lr
    loss = loss or config.loss
    paired = loss == "hace" or (loss == "sce" and config.scheme != "lca_soft")
    if config.pairing is None or not paired:
        return lr
    if config.pairing == "hace_anchored":
        return lr if loss == "hace" else lr * _need_d(config)
    return lr if loss == "sce" else lr / _need_d(config)


def _need_d(config: RunConfig) -> float:
    if config.dilution is None:
        raise ConfigError("learning-rate pairing requires dilution")
    return config.dilution


@dataclass
class LinearModel:
    w: np.ndarray
    b: np.ndarray

    @classmethod
    def init(cls, out_dim: int, in_dim: int, seed: int) -> LinearModel:
        rng = np.random.default_rng([seed, 0])
        return cls(rng.normal(0.0, 0.01, (out_dim, in_dim)), np.zeros(out_dim))

    def logits(self, x: np.ndarray) -> np.ndarray:
        return x @ self.w.T + self.b

    def save(self, path: str | Path) -> None:
        np.savez(path, w=self.w, b=self.b)

    @classmethod
    def load(cls, path: str | Path) -> LinearModel:
        with np.load(path) as f:
            return cls(f["w"], f["b"])


class LossContext:
    """Binds a loss kind to its hierarchy-derived constants."""

    def __init__(self, t: Taxonomy, config: RunConfig):
        self.taxonomy = t
        self.kind = config.loss
        self.r = reachability(t)
        self.targets: TargetMatrix | None = None
        self.hxe: HXE | None = None
        if self.kind == "hxe":
            self.hxe = HXE(t, config.alpha, self.r)
        else:
            self.targets = build_target_matrix(t, config.target_scheme())

    @property
    def out_dim(self) -> int:
        return self.taxonomy.N if self.kind == "hace" else self.taxonomy.n

    def __call__(self, z: np.ndarray, labels: np.ndarray) -> LossResult:
        if self.kind == "hace":
            res = hace_loss(z, labels, self.targets, self.r)
        elif self.kind == "hxe":
            res = self.hxe(z, labels)
        else:
            res = sce_loss(z, self.targets.leaf_targets[labels])
        if res.clamped:
            log.warning("log floor hit %d times in one batch", res.clamped)
        return res

    def predict(self, z: np.ndarray) -> np.ndarray:
        """HACE: aggregated scores over all N nodes. Others: leaf softmax."""
        q_hat = softmax(z)
        if self.kind == "hace":
            return aggregate(self.r, q_hat)
        return q_hat


def _epoch_lr(config: RunConfig, lr: float, epoch: int) -> float:
    if config.schedule == "cosine":
        return lr * 0.5 * (1.0 + math.cos(math.pi * epoch / config.epochs))
    return lr


def train(
    model: LinearModel, data: FeatureDataset, config: RunConfig, ctx: LossContext
) -> tuple[LinearModel, list[float]]:
    """Mini-batch SGD. Returns the trained model and the per-epoch mean loss."""
    x = data.normalized().x if config.normalize else data.x
    y = data.y
    if model.w.shape != (ctx.out_dim, x.shape[1]):
        raise ValueError(f"model shape {model.w.shape} != ({ctx.out_dim}, {x.shape[1]})")
    data.check_labels(ctx.taxonomy.n)

    w, b = model.w.copy(), model.b.copy()
    vw, vb = np.zeros_like(w), np.zeros_like(b)
    lr0 = effective_lr(config)
    rng = np.random.default_rng([config.seed, 1])
    initial = ctx(x @ w.T + b, y).loss
    trace = []
    for epoch in range(config.epochs):
        lr = _epoch_lr(config, lr0, epoch)
        perm = rng.permutation(len(y))
        total = 0.0
        for start in range(0, len(y), config.batch_size):
            idx = perm[start : start + config.batch_size]
            xb = x[idx]
            res = ctx(xb @ w.T + b, y[idx])
            total += res.loss * len(idx)
            gw = res.grad.T @ xb + config.weight_decay * w
            gb = res.grad.sum(axis=0)
            vw = config.momentum * vw + gw
            vb = config.momentum * vb + gb
            w -= lr * vw
            b -= lr * vb
        epoch_loss = total / len(y)
        if not math.isfinite(epoch_loss) or epoch_loss > DIVERGENCE_FACTOR * initial:
            raise TrainingDiverged(epoch, epoch_loss, initial)
        trace.append(epoch_loss)
    return LinearModel(w, b), trace


def write_trace(trace: list[float], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("epoch,loss\n")
        for i, v in enumerate(trace):
            fh.write(f"{i},{v!r}\n")
