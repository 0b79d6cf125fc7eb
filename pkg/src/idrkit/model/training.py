"""Training loop: AdamW with per-group learning rates, linear warmup into a
cosine schedule, global-norm gradient clipping, gradient accumulation,
per-epoch checkpointing with early stopping, and best-checkpoint restore.

Fully deterministic under a fixed seed.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..containers import write_checkpoint
from . import autodiff as ad
from .fusion import (STATS_HEAD_PARAMS, FusionConfig, ModelParams, Sample,
                     forward, init_params, supervised_contrastive_loss,
                     weighted_ce_loss)


class DivergenceError(RuntimeError):
    """Training loss went non-finite; carries the last finite parameters."""

    def __init__(self, arrays: dict[str, np.ndarray], history: list[dict]):
        super().__init__("training diverged (non-finite loss)")
        self.arrays = arrays
        self.history = history


@dataclass
class TrainConfig:
    lr_backbone: float = 5e-5
    lr_heads: float = 5e-5
    lr_stats_head: float = 5e-4
    weight_decay: float = 0.05
    warmup_ratio: float = 0.1
    max_grad_norm: float = 1.0
    epochs: int = 7
    grad_accum: int = 8
    lambda_cls: float = 1.0
    lambda_lm: float = 0.0
    lambda_contr: float = 0.0
    class_weights: np.ndarray | None = None
    seed: int = 0
    patience: int = 2

    def __post_init__(self):
        if self.lambda_lm != 0.0:
            raise ValueError("lambda_lm must be 0 with the stub backbone "
                             "(no language-model head)")


def class_weights(labels, num_classes: int = 4) -> np.ndarray:
    """Inverse-frequency weights w_c = N / (num_classes * N_c); classes with
    no examples get weight 0 (they never enter the loss)."""
    labels = np.asarray(labels, dtype=int)
    counts = np.bincount(labels, minlength=num_classes).astype(np.float64)
    n = float(len(labels))
    w = np.zeros(num_classes)
    nz = counts > 0
    w[nz] = n / (num_classes * counts[nz])
    return w


def lr_at_step(step: int, total_steps: int, warmup_ratio: float,
               peak: float) -> float:
    """Linear warmup to the peak, then cosine decay to 0 at the final step."""
    warmup = max(1, int(round(warmup_ratio * total_steps)))
    if step <= warmup:
        return peak * step / warmup
    if total_steps <= warmup:
        return peak
    progress = (step - warmup) / (total_steps - warmup)
    return peak * 0.5 * (1.0 + np.cos(np.pi * progress))


class AdamW:
    def __init__(self, params: ModelParams, cfg: TrainConfig,
                 betas=(0.9, 0.999), eps: float = 1e-8):
        self.params = params
        self.cfg = cfg
        self.betas = betas
        self.eps = eps
        self.step_count = 0
        named = params.named()
        self.m = {n: np.zeros_like(t.data) for n, t in named.items()}
        self.v = {n: np.zeros_like(t.data) for n, t in named.items()}

    def group_lr_scale(self, name: str) -> float:
        if name in STATS_HEAD_PARAMS:
            return self.cfg.lr_stats_head / self.cfg.lr_heads
        return 1.0

    def step(self, grads: dict[str, np.ndarray], lr: float):
        self.step_count += 1
        b1, b2 = self.betas
        t = self.step_count
        for name, tensor in self.params.named().items():
            g = grads[name]
            self.m[name] = b1 * self.m[name] + (1 - b1) * g
            self.v[name] = b2 * self.v[name] + (1 - b2) * g * g
            m_hat = self.m[name] / (1 - b1 ** t)
            v_hat = self.v[name] / (1 - b2 ** t)
            group_lr = lr * self.group_lr_scale(name)
            update = m_hat / (np.sqrt(v_hat) + self.eps)
            if not self.params.no_decay(name):
                update = update + self.cfg.weight_decay * tensor.data
            tensor.data = tensor.data - group_lr * update


def clip_global_norm(grads: dict[str, np.ndarray], max_norm: float) -> float:
    total = np.sqrt(sum(float((g ** 2).sum()) for g in grads.values()))
    if total > max_norm and total > 0:
        scale = max_norm / total
        for name in grads:
            grads[name] = grads[name] * scale
    return float(total)


def _mean_loss(params: ModelParams, config: FusionConfig, samples: list[Sample],
               weights: np.ndarray) -> float:
    total = 0.0
    for s in samples:
        _z, logits = forward(params, config, s)
        total += float(weighted_ce_loss(logits, s.label, weights).data)
    return total / max(1, len(samples))


def _accumulate_window(params: ModelParams, config: FusionConfig,
                       window: list[Sample], weights: np.ndarray,
                       cfg: TrainConfig) -> tuple[float, dict[str, np.ndarray]]:
    """Mean loss and mean gradient over one accumulation window."""
    params.zero_grads()
    zs, labels = [], []
    losses = []
    for s in window:
        z, logits = forward(params, config, s)
        loss = ad.mul(weighted_ce_loss(logits, s.label, weights), cfg.lambda_cls)
        losses.append(loss)
        if cfg.lambda_contr > 0:
            zs.append(z)
            labels.append(s.label)
    total = losses[0]
    for extra in losses[1:]:
        total = ad.add(total, extra)
    total = ad.mul(total, 1.0 / len(window))
    if cfg.lambda_contr > 0:
        contr = supervised_contrastive_loss(zs, labels, config.tau)
        if contr is not None:
            total = ad.add(total, ad.mul(contr, cfg.lambda_contr))
    total.backward()
    grads = {n: (t.grad.copy() if t.grad is not None else np.zeros_like(t.data))
             for n, t in params.named().items()}
    return float(total.data), grads


@dataclass
class FitResult:
    params: ModelParams
    history: list[dict] = field(default_factory=list)
    best_epoch: int = -1


def fit(train: list[Sample], val: list[Sample], config: FusionConfig,
        cfg: TrainConfig, checkpoint_dir: str | Path | None = None) -> FitResult:
    if not train or not val:
        raise ValueError("train and validation splits must be non-empty")
    rng = np.random.Generator(np.random.PCG64(cfg.seed))
    params = init_params(config, rng)
    weights = (np.asarray(cfg.class_weights, dtype=np.float64)
               if cfg.class_weights is not None
               else class_weights([s.label for s in train], config.num_classes))

    steps_per_epoch = int(np.ceil(len(train) / cfg.grad_accum))
    total_steps = cfg.epochs * steps_per_epoch
    optimizer = AdamW(params, cfg)

    ckpt_dir = Path(checkpoint_dir) if checkpoint_dir else None
    if ckpt_dir:
        ckpt_dir.mkdir(parents=True, exist_ok=True)

    history: list[dict] = []
    best_val = np.inf
    best_arrays = params.arrays()
    best_epoch = -1
    last_finite = params.arrays()
    epochs_since_best = 0

    for epoch in range(cfg.epochs):
        order = rng.permutation(len(train))
        epoch_losses = []
        lr = 0.0
        for start in range(0, len(train), cfg.grad_accum):
            window = [train[i] for i in order[start : start + cfg.grad_accum]]
            loss, grads = _accumulate_window(params, config, window, weights, cfg)
            if not np.isfinite(loss):
                raise DivergenceError(last_finite, history)
            epoch_losses.append(loss)
            clip_global_norm(grads, cfg.max_grad_norm)
            lr = lr_at_step(optimizer.step_count + 1, total_steps,
                            cfg.warmup_ratio, cfg.lr_heads)
            optimizer.step(grads, lr)
        train_loss = float(np.mean(epoch_losses))
        val_loss = _mean_loss(params, config, val, weights)
        if not np.isfinite(val_loss):
            raise DivergenceError(last_finite, history)
        last_finite = params.arrays()
        history.append({"epoch": epoch, "train_loss": train_loss,
                        "val_loss": val_loss, "lr": lr})
        if ckpt_dir:
            write_checkpoint(ckpt_dir / f"epoch{epoch:03d}.idrc",
                             config.to_dict(), params.arrays())
        if val_loss < best_val:
            best_val = val_loss
            best_arrays = params.arrays()
            best_epoch = epoch
            epochs_since_best = 0
        else:
            epochs_since_best += 1
            if epochs_since_best > cfg.patience:
                break

    params.load_arrays(best_arrays)
    if ckpt_dir:
        write_checkpoint(ckpt_dir / "best.idrc", config.to_dict(), params.arrays())
    return FitResult(params=params, history=history, best_epoch=best_epoch)


def save_history_csv(history: list[dict], path: str | Path) -> None:
    with Path(path).open("w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=["epoch", "train_loss",
                                                "val_loss", "lr"])
        writer.writeheader()
        for row in history:
            writer.writerow(row)


def predict(params: ModelParams, config: FusionConfig,
            samples: list[Sample]) -> np.ndarray:
    out = np.empty(len(samples), dtype=int)
    for i, s in enumerate(samples):
        _z, logits = forward(params, config, s)
        out[i] = int(np.argmax(logits.data))
    return out
