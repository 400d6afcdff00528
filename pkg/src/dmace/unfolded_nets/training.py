"""Mini-batch Adam training with a trailing-window stopping rule."""

from __future__ import annotations

import copy
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from dmace.errors import ConfigError
from dmace.metrics import mean_nmse, nmse_per_sample
from dmace.numerics import AdamState, Tape, adam_step
from dmace.unfolded_nets.models import SUPERVISED, Batch, UnfoldedModel


@dataclass
class TrainConfig:
    batch_size: int = 64
    lr: float = 1e-3
    max_epochs: int = 60
    window: int = 10
    seed: int = 0
    loss_mode: str = SUPERVISED
    shards: int = 1
    threads: int = 1

    def __post_init__(self):
        if self.batch_size < 1 or self.window < 2 or self.max_epochs < 0 or self.shards < 1:
            raise ConfigError("need batch_size >= 1, window >= 2, max_epochs >= 0, shards >= 1")

    def to_dict(self):
        return asdict(self)


@dataclass
class TrainResult:
    model: UnfoldedModel
    log: list = field(default_factory=list)
    best_epoch: int = 0
    converged_epoch: int | None = None
    initial_test_nmse: float = float("nan")


def converged_at(curve, window: int = 10) -> int | None:
    """First epoch (1-based) at which the trailing-window mean stops descending.

    The mean over the last ``window`` entries is compared with the mean of
    the window ending one epoch earlier (shorter while the curve is short).
    ``None`` if the curve keeps descending.
    """
    curve = list(curve)
    for e in range(window, len(curve) + 1):
        cur = np.mean(curve[e - window : e])
        prev = np.mean(curve[max(0, e - 1 - window) : e - 1])
        if not cur < prev:
            return e
    return None


def evaluate_nmse(model: UnfoldedModel, batch: Batch) -> float:
    return mean_nmse(model.estimate(batch.inputs), batch.g_star)


def _shard_grads(model, batch: Batch, shards: int, threads: int):
    bounds = np.linspace(0, len(batch), min(shards, len(batch)) + 1).astype(int)
    parts = [batch.take(slice(a, b)) for a, b in zip(bounds[:-1], bounds[1:])]

    def run(part):
        t = Tape()
        loss, out = model.batch_loss(t, part)
        return float(loss.value), t.backward(loss), out

    if threads > 1 and len(parts) > 1:
        with ThreadPoolExecutor(threads) as ex:
            results = list(ex.map(run, parts))
    else:
        results = [run(p) for p in parts]
    # fixed reduction order keeps the sum independent of scheduling
    loss = sum(r[0] for r in results)
    grads = dict(results[0][1])
    for r in results[1:]:
        for k in grads:
            grads[k] = grads[k] + r[1][k]
    out = np.concatenate([r[2] for r in results], axis=1)
    return loss, grads, out


def train(model: UnfoldedModel, train_batch: Batch, test_batch: Batch, tc: TrainConfig) -> TrainResult:
    """Fit ``model`` in place on pre-built batches; returns the best-test checkpoint."""
    if len(train_batch) == 0 or len(test_batch) == 0:
        raise ConfigError("training and test sets must be non-empty")
    rng = np.random.default_rng(tc.seed)
    state = AdamState(lr=tc.lr)
    init_params = copy.deepcopy(model.params)
    init_nmse = evaluate_nmse(model, test_batch)
    best = (init_nmse, 0, init_params)
    log = []
    converged = None
    n = len(train_batch)
    for epoch in range(1, tc.max_epochs + 1):
        order = rng.permutation(n)
        loss_sum = 0.0
        ratios = []
        for start in range(0, n, tc.batch_size):
            part = train_batch.take(order[start : start + tc.batch_size])
            loss, grads, out = _shard_grads(model, part, tc.shards, tc.threads)
            ratios.append(nmse_per_sample(model.to_channel(out) / model.scale, part.g_star))
            loss_sum += loss
            new = adam_step(model.params.as_dict(), grads, state)
            model.params = type(model.params).from_dict(new).clamp()
        test_nmse = evaluate_nmse(model, test_batch)
        log.append(
            {
                "epoch": epoch,
                "train_loss": loss_sum / n,
                "train_nmse": float(np.mean(np.concatenate(ratios))),
                "test_nmse": test_nmse,
            }
        )
        if test_nmse < best[0]:
            best = (test_nmse, epoch, copy.deepcopy(model.params))
        converged = converged_at([r["test_nmse"] for r in log], tc.window)
        if converged is not None:
            break
    model.params = best[2]
    return TrainResult(model, log, best[1], converged, init_nmse)
