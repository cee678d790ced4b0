"""Training loop: stepped learning-rate schedule, decoupled weight decay,
deterministic batching, checkpointing, and a CSV loss log.

Batch composition depends only on (seed, step), so training can be stopped,
checkpointed, and resumed with bit-identical results.
"""

from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .model import ModelConfig, forward, init_params, loss, loss_and_grads
from .util import config_hash, subrng

CHECKPOINT_VERSION = 1
_SALT_BATCH = 211
_SALT_EVAL = 212

ADAM_BETA1 = 0.9
ADAM_BETA2 = 0.999
ADAM_EPS = 1e-8


@dataclass(frozen=True)
class TrainConfig:
    lr0: float = 1e-2
    lr_step_every: int = 33_000
    lr_decay: float = 0.5
    total_steps: int = 125_000
    weight_decay: float = 1e-4
    batch_size: int = 32
    seed: int = 1337
    log_every: int = 50
    eval_every: int = 1000
    eval_batches: int = 4
    checkpoint_every: int = 0  # 0: only the final checkpoint
    stop_loss: float | None = None

    def __post_init__(self):
        if min(self.lr0, self.lr_step_every, self.total_steps, self.batch_size) <= 0:
            raise ValueError("lr0, lr_step_every, total_steps, batch_size must be positive")
        if not 0.0 < self.lr_decay < 1.0:
            raise ValueError("lr_decay must be in (0, 1)")
        if self.weight_decay < 0:
            raise ValueError("weight_decay must be >= 0")

    def to_dict(self) -> dict:
        return {k: getattr(self, k) for k in (
            "lr0", "lr_step_every", "lr_decay", "total_steps", "weight_decay",
            "batch_size", "seed", "log_every", "eval_every", "eval_batches",
            "checkpoint_every", "stop_loss")}

    @classmethod
    def from_dict(cls, d: dict) -> "TrainConfig":
        return cls(**d)


def lr_at(step: int, tc: TrainConfig) -> float:
    """Stepped decay: lr0 * decay^(step // step_every)."""
    if not 0 <= step < tc.total_steps:
        raise ValueError(f"step {step} outside [0, {tc.total_steps})")
    return tc.lr0 * tc.lr_decay ** (step // tc.lr_step_every)


@dataclass
class Checkpoint:
    model_cfg: ModelConfig
    train_cfg: TrainConfig
    params: dict
    opt_m: dict
    opt_v: dict
    step: int
    pad_id: int
    extra: dict = field(default_factory=dict)


def save_checkpoint(path, ckpt: Checkpoint) -> None:
    meta = {
        "format_version": CHECKPOINT_VERSION,
        "model_config": ckpt.model_cfg.to_dict(),
        "train_config": ckpt.train_cfg.to_dict(),
        "step": ckpt.step,
        "pad_id": ckpt.pad_id,
        "extra": ckpt.extra,
        "config_hash": config_hash(ckpt.model_cfg.to_dict()),
    }
    arrays = {"meta": np.frombuffer(json.dumps(meta).encode("utf-8"), dtype=np.uint8)}
    arrays.update({f"p.{k}": v for k, v in ckpt.params.items()})
    arrays.update({f"m.{k}": v for k, v in ckpt.opt_m.items()})
    arrays.update({f"v.{k}": v for k, v in ckpt.opt_v.items()})
    path = Path(path)
    tmp = path.with_suffix(path.suffix + ".tmp")
    with open(tmp, "wb") as f:
        np.savez(f, **arrays)
    os.replace(tmp, path)


def load_checkpoint(path) -> Checkpoint:
    with np.load(path) as z:
        meta = json.loads(bytes(z["meta"]).decode("utf-8"))
        if meta["format_version"] != CHECKPOINT_VERSION:
            raise ValueError(f"unsupported checkpoint version {meta['format_version']}")
        params, opt_m, opt_v = {}, {}, {}
        for key in z.files:
            if key.startswith("p."):
                params[key[2:]] = z[key]
            elif key.startswith("m."):
                opt_m[key[2:]] = z[key]
            elif key.startswith("v."):
                opt_v[key[2:]] = z[key]
    return Checkpoint(
        model_cfg=ModelConfig.from_dict(meta["model_config"]),
        train_cfg=TrainConfig.from_dict(meta["train_config"]),
        params=params, opt_m=opt_m, opt_v=opt_v,
        step=meta["step"], pad_id=meta["pad_id"], extra=meta.get("extra", {}),
    )


def _decays(name: str, tensor) -> bool:
    # decay matrices and embeddings; never biases or layernorm parameters
    return tensor.ndim >= 2


def adamw_step(params, grads, opt_m, opt_v, step: int, lr: float, weight_decay: float):
    """One decoupled-weight-decay adaptive-moment update (in place)."""
    t = step + 1
    c1 = 1.0 - ADAM_BETA1 ** t
    c2 = 1.0 - ADAM_BETA2 ** t
    for name, p in params.items():
        g = grads[name]
        m = opt_m[name]
        v = opt_v[name]
        m *= ADAM_BETA1
        m += (1.0 - ADAM_BETA1) * g
        v *= ADAM_BETA2
        v += (1.0 - ADAM_BETA2) * g * g
        update = (m / c1) / (np.sqrt(v / c2) + ADAM_EPS)
        if weight_decay and _decays(name, p):
            update = update + weight_decay * p
        p -= (lr * update).astype(p.dtype)


def _pad_batch(seqs, idx, pad_id: int, ascii_pad: int = 0):
    """inputs[t] = PAD-prefixed stream, targets[t] = stream; PAD-masked loss."""
    chosen = [seqs[i] for i in idx]
    T = max(len(s.stream) for s in chosen)
    S = max(len(s.ascii_ids) for s in chosen)
    B = len(chosen)
    X = np.full((B, T), pad_id, dtype=np.int64)
    Y = np.full((B, T), pad_id, dtype=np.int64)
    C = np.full((B, S), ascii_pad, dtype=np.int64)
    for j, s in enumerate(chosen):
        n = len(s.stream)
        X[j, 0] = pad_id
        X[j, 1:n] = s.stream[:-1]
        Y[j, :n] = s.stream
        C[j, :len(s.ascii_ids)] = s.ascii_ids
    return X, C, Y


def eval_loss(params, cfg: ModelConfig, seqs, tc: TrainConfig, pad_id: int) -> float:
    """Mean loss over a fixed, seeded set of evaluation batches."""
    if not seqs:
        return math.nan
    rng = subrng(tc.seed, _SALT_EVAL)
    losses = []
    for _ in range(tc.eval_batches):
        idx = rng.integers(0, len(seqs), size=min(tc.batch_size, len(seqs)))
        X, C, Y = _pad_batch(seqs, idx, pad_id)
        logits, _ = forward(params, cfg, X, C)
        losses.append(loss(logits, Y, pad_id)[0])
    return float(np.mean(losses))


def train(
    corpus,
    mc: ModelConfig,
    tc: TrainConfig,
    pad_id: int,
    checkpoint_dir=None,
    test_corpus=None,
    init_seed: int = 0,
    resume: Checkpoint | None = None,
    on_step=None,
) -> Checkpoint:
    """Run the optimizer for ``tc.total_steps`` steps (or until ``stop_loss``).

    ``corpus`` is a sequence of objects with ``stream`` and ``ascii_ids``
    arrays (see ``dataset.TrainingSequence``). Checkpoints and ``loss.csv``
    land in ``checkpoint_dir`` when given.
    """
    if not corpus:
        raise ValueError("training corpus is empty")
    too_long = [i for i, s in enumerate(corpus) if len(s.stream) > mc.max_stroke_context]
    if too_long:
        raise ValueError(f"corpus sequence {too_long[0]} exceeds the stroke context")
    if resume is not None:
        params = resume.params
        opt_m, opt_v = resume.opt_m, resume.opt_v
        start = resume.step
    else:
        params = init_params(mc, seed=init_seed)
        opt_m = {k: np.zeros_like(v) for k, v in params.items()}
        opt_v = {k: np.zeros_like(v) for k, v in params.items()}
        start = 0

    ckpt_dir = Path(checkpoint_dir) if checkpoint_dir is not None else None
    log_file = None
    if ckpt_dir is not None:
        ckpt_dir.mkdir(parents=True, exist_ok=True)
        log_path = ckpt_dir / "loss.csv"
        new_log = not (log_path.exists() and start > 0)
        log_file = open(log_path, "w" if new_log else "a", encoding="utf-8")
        if new_log:
            log_file.write("step,lr,train_loss,test_loss\n")

    def checkpoint(step):
        return Checkpoint(model_cfg=mc, train_cfg=tc, params=params,
                          opt_m=opt_m, opt_v=opt_v, step=step, pad_id=pad_id)

    value = math.nan
    completed = start
    try:
        for step in range(start, tc.total_steps):
            lr = lr_at(step, tc)
            idx = subrng(tc.seed, _SALT_BATCH, step).integers(
                0, len(corpus), size=tc.batch_size)
            X, C, Y = _pad_batch(corpus, idx, pad_id)
            value, grads = loss_and_grads(params, mc, X, C, Y, pad_id)
            adamw_step(params, grads, opt_m, opt_v, step, lr, tc.weight_decay)
            completed = step + 1
            if log_file and (completed % tc.log_every == 0 or completed == tc.total_steps):
                test = ""
                if test_corpus is not None and completed % tc.eval_every == 0:
                    test = f"{eval_loss(params, mc, test_corpus, tc, pad_id):.6f}"
                log_file.write(f"{completed},{lr:.8g},{value:.6f},{test}\n")
                log_file.flush()
            if on_step is not None:
                on_step(completed, value)
            if ckpt_dir and tc.checkpoint_every and completed % tc.checkpoint_every == 0:
                save_checkpoint(ckpt_dir / f"step_{completed:08d}.npz", checkpoint(completed))
            if tc.stop_loss is not None and value < tc.stop_loss:
                break
    finally:
        if log_file:
            log_file.close()
    final = checkpoint(completed)
    final.extra["final_train_loss"] = value
    if ckpt_dir:
        save_checkpoint(ckpt_dir / "final.npz", final)
    return final
