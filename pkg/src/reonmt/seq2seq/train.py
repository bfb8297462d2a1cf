"""Mini-batch training with global-norm clipping and best-checkpoint selection."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from ..corpus import ParallelCorpus, batch as make_batches
from .model import NonFiniteLoss, forward_loss, loss_and_gradients
from .params import HyperParams, Model, copy_params, init_params

log = logging.getLogger(__name__)


@dataclass
class OptConfig:
    lr: float = 0.5
    epochs: int = 30
    batch_size: int = 32
    clip: float = 5.0
    optimizer: str = "sgd"
    seed: int = 0
    # stop once the epoch's training loss falls below this value
    target_loss: float | None = None
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    def __post_init__(self):
        if self.optimizer not in ("sgd", "adam"):
            raise ValueError(f"unknown optimizer {self.optimizer!r}")


class TrainingDiverged(FloatingPointError):
    """Raised when the loss turns non-finite; ``checkpoint`` holds the last good parameters."""

    def __init__(self, epoch, checkpoint, cause):
        super().__init__(f"training diverged in epoch {epoch}: {cause}")
        self.epoch = epoch
        self.checkpoint = checkpoint


@dataclass
class TrainResult:
    params: dict
    log: list = field(default_factory=list)  # (epoch, train_loss, dev_loss)
    best_epoch: int = 0


def global_norm(grads) -> float:
    return math.sqrt(sum(float(np.sum(g * g)) for g in grads.values()))


def clip_grads(grads, max_norm: float) -> float:
    norm = global_norm(grads)
    if max_norm and norm > max_norm:
        scale = max_norm / norm
        for g in grads.values():
            g *= scale
    return norm


class Adam:
    def __init__(self, params, cfg: OptConfig):
        self.cfg = cfg
        self.m = {k: np.zeros_like(v) for k, v in params.items()}
        self.v = {k: np.zeros_like(v) for k, v in params.items()}
        self.t = 0

    def step(self, params, grads):
        c = self.cfg
        self.t += 1
        b1t = 1.0 - c.beta1 ** self.t
        b2t = 1.0 - c.beta2 ** self.t
        for k, g in grads.items():
            self.m[k] = c.beta1 * self.m[k] + (1.0 - c.beta1) * g
            self.v[k] = c.beta2 * self.v[k] + (1.0 - c.beta2) * g * g
            params[k] -= c.lr * (self.m[k] / b1t) / (np.sqrt(self.v[k] / b2t) + c.eps)


def corpus_loss(params, hp: HyperParams, corpus: ParallelCorpus, reorderings=None,
                batch_size: int = 64) -> float:
    """Token-weighted mean cross-entropy over a whole corpus."""
    total = tokens = 0.0
    for b in make_batches(corpus, batch_size, reorderings):
        loss, _ = forward_loss(params, hp, b, keep_cache=False)
        n = b.tgt_mask.sum()
        total += loss * n
        tokens += n
    return total / tokens


def train(corpus: ParallelCorpus, hp: HyperParams, opt: OptConfig, reorderings=None,
          dev: ParallelCorpus | None = None, dev_reorderings=None,
          params: dict | None = None) -> TrainResult:
    """Train from ``params`` (or a fresh seeded initialization).

    The returned parameters are those of the epoch with the lowest dev loss
    (training loss when no dev set is given).
    """
    if hp.needs_reordering and reorderings is None:
        raise ValueError(f"encoder variant {hp.encoder_variant} needs a reordering per training pair")
    if hp.needs_reordering and dev is not None and dev_reorderings is None:
        raise ValueError(f"encoder variant {hp.encoder_variant} needs dev reorderings")
    rng = np.random.default_rng(opt.seed)
    if params is None:
        params = init_params(hp, opt.seed)
    params = copy_params(params)
    adam = Adam(params, opt) if opt.optimizer == "adam" else None
    result = TrainResult(copy_params(params))
    best = math.inf
    for epoch in range(1, opt.epochs + 1):
        total = tokens = 0.0
        for k, b in enumerate(make_batches(corpus, opt.batch_size, reorderings, rng)):
            try:
                loss, grads = loss_and_gradients(params, hp, b, batch_index=k)
            except NonFiniteLoss as e:
                raise TrainingDiverged(epoch, result.params, e) from e
            clip_grads(grads, opt.clip)
            if adam is not None:
                adam.step(params, grads)
            else:
                for name, g in grads.items():
                    params[name] -= opt.lr * g
            n = b.tgt_mask.sum()
            total += loss * n
            tokens += n
        train_loss = total / tokens
        dev_loss = corpus_loss(params, hp, dev, dev_reorderings) if dev is not None else math.nan
        if not (np.isfinite(train_loss) and all(np.all(np.isfinite(v)) for v in params.values())):
            raise TrainingDiverged(epoch, result.params, "non-finite parameters")
        result.log.append((epoch, train_loss, dev_loss))
        log.info("epoch %d train %.4f dev %.4f", epoch, train_loss, dev_loss)
        score = dev_loss if dev is not None else train_loss
        if score < best:
            best = score
            result.params = copy_params(params)
            result.best_epoch = epoch
        if opt.target_loss is not None and train_loss < opt.target_loss:
            break
    return result


def train_model(corpus: ParallelCorpus, hp: HyperParams, opt: OptConfig, reorderings=None,
                dev=None, dev_reorderings=None) -> tuple[Model, TrainResult]:
    res = train(corpus, hp, opt, reorderings, dev, dev_reorderings)
    model = Model(hp, res.params, corpus.source_vocab, corpus.target_vocab,
                  {"seed": opt.seed, "best_epoch": res.best_epoch})
    return model, res


def write_loss_log(path, rows) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for epoch, tr, dv in rows:
            fh.write(f"{epoch}\t{tr:.6f}\t{dv:.6f}\n")


def read_loss_log(path) -> list[tuple[int, float, float]]:
    rows = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            e, tr, dv = line.rstrip("\n").split("\t")
            rows.append((int(e), float(tr), float(dv)))
    return rows
