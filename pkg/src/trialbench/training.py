"""Streaming training: AdamW with a short warmup then linear decay, loss
selection per position kind, and checkpoint/metrics I/O.

Every transcript is seen once. Supervised positions split into three kinds:
ordinary steps (multi-target cross-entropy, or plain cross-entropy on the
taken token under the single-target ablation), guess nodes (the position
holding a level token; expected-trials loss or multi-target cross-entropy
per config), and scratchpad thinking tokens (plain cross-entropy on the
cell's solution action token).
"""

from __future__ import annotations

import json
import time
from dataclasses import dataclass, field
from typing import Iterable, Optional

import numpy as np

from . import vocab as V
from . import autodiff as ad
from .autodiff import Tensor
from .model import (
    Model, ModelConfig, batched_log_l1, batched_multi_ce, causal_mask,
    gather_positions, scratchpad_mask,
)


@dataclass
class TrainConfig:
    batch_size: int = 32
    steps: int = 1000
    lr_peak: float = 1e-4
    warmup_steps: int = 5
    betas: tuple = (0.9, 0.95)
    eps: float = 1e-8
    weight_decay: float = 0.1
    multi_target: bool = True          # False: plain CE on the taken token
    guess_loss: str = "l2"             # "l1" (expected-trials) or "l2"
    guess_weight: float = 1.0
    scratchpad_weight: float = 1.0
    seed: int = 0


class AdamW:
    """Decoupled weight decay; decay applies to matrices only (embeddings,
    projections), not to gains/biases. Learning rate ramps linearly to the
    peak over the first warmup steps, then decays linearly to zero."""

    def __init__(self, params: dict, config: TrainConfig):
        self.params = params
        self.cfg = config
        self.step_count = 0
        self.m = {k: np.zeros_like(t.data) for k, t in params.items()}
        self.v = {k: np.zeros_like(t.data) for k, t in params.items()}

    def lr_at(self, step: int) -> float:
        c = self.cfg
        if step <= c.warmup_steps:
            return c.lr_peak * step / c.warmup_steps
        if c.steps <= c.warmup_steps:
            return c.lr_peak
        frac = (c.steps - step) / (c.steps - c.warmup_steps)
        return c.lr_peak * max(0.0, frac)

    def step(self):
        self.step_count += 1
        lr = self.lr_at(self.step_count)
        b1, b2 = self.cfg.betas
        for k, t in self.params.items():
            if t.grad is None:
                continue
            g = t.grad
            self.m[k] = b1 * self.m[k] + (1 - b1) * g
            self.v[k] = b2 * self.v[k] + (1 - b2) * g * g
            mh = self.m[k] / (1 - b1 ** self.step_count)
            vh = self.v[k] / (1 - b2 ** self.step_count)
            t.data -= lr * mh / (np.sqrt(vh) + self.cfg.eps)
            if self.cfg.weight_decay and t.data.ndim >= 2:
                t.data -= lr * self.cfg.weight_decay * t.data
        return lr


# ---------------------------------------------------------------------------
# batch assembly


@dataclass
class _Example:
    ids: np.ndarray
    pos: np.ndarray
    mask: Optional[np.ndarray]         # None = causal
    step_targets: list                 # (t, target_set)
    guess_targets: list                # (t, target_set)
    pad_targets: list                  # (t, token)


def prepare_example(tr, scratchpad_len: int, multi_target: bool) -> _Example:
    """Token/position arrays plus supervised positions for one transcript.

    Depth-1 transcripts get their scratchpad inserted after the guess node:
    thinking tokens are PAD inputs on positional rows 1..m*m, the original
    continuation keeps its scratchpad-free positions, and the guess node is
    supervised on the full backdoor set.
    """
    tokens = list(tr.tokens)
    kind = tr.meta.get("kind", "dfs")
    if kind != "depth1":
        ids = np.array(tokens, dtype=np.int64)
        pos = np.arange(len(tokens))
        step_t, guess_t = [], []
        for i, m in enumerate(tr.loss_mask):
            if not m:
                continue
            target = tr.target_sets[i] if multi_target else (tokens[i + 1],)
            if V.is_level_token(tokens[i]):
                guess_t.append((i, tr.target_sets[i]))
            else:
                step_t.append((i, target))
        return _Example(ids, pos, None, step_t, guess_t, [])

    gp = tr.meta["guess_pos"]
    m2 = scratchpad_len
    sp_targets = tr.meta["scratchpad_targets"]
    assert len(sp_targets) == m2
    ids = np.array(tokens[:gp + 1] + [V.PAD] * m2 + tokens[gp + 1:], np.int64)
    pos = np.concatenate([np.arange(gp + 1), np.arange(1, m2 + 1),
                          np.arange(gp + 1, len(tokens))])
    mask = scratchpad_mask(len(ids), gp, m2)
    step_t, guess_t, pad_t = [], [], []
    for i, m in enumerate(tr.loss_mask):
        if not m:
            continue
        j = i if i < gp else i + m2  # position after insertion
        target = tr.target_sets[i] if multi_target else (tokens[i + 1],)
        if i == gp:
            guess_t.append((j, tr.target_sets[i]))
        else:
            step_t.append((j, target))
    for k in range(m2):
        pad_t.append((gp + 1 + k, sp_targets[k]))
    return _Example(ids, pos, mask, step_t, guess_t, pad_t)


def assemble_batch(examples):
    """Pad to the longest sequence; every position may attend to itself so
    padded softmax rows stay finite (their outputs carry no loss)."""
    B = len(examples)
    T = max(len(e.ids) for e in examples)
    ids = np.zeros((B, T), np.int64)
    pos = np.zeros((B, T), np.int64)
    need_custom = any(e.mask is not None for e in examples)
    if need_custom:
        mask = np.zeros((B, T, T), bool)
    else:
        mask = causal_mask(T)
    for b, e in enumerate(examples):
        L = len(e.ids)
        ids[b, :L] = e.ids
        pos[b, :L] = e.pos
        if need_custom:
            base = e.mask if e.mask is not None else causal_mask(L)
            mask[b, :L, :L] = base
            mask[b, np.arange(T), np.arange(T)] = True
    return ids, pos, mask


def batch_loss(model: Model, examples, config: TrainConfig) -> Tensor:
    ids, pos, mask = assemble_batch(examples)
    logits = model.forward(ids, mask, pos)
    groups = {"step": [], "guess": [], "pad": []}
    for b, e in enumerate(examples):
        for t, s in e.step_targets:
            groups["step"].append((b, t, s))
        for t, s in e.guess_targets:
            groups["guess"].append((b, t, s))
        for t, tok in e.pad_targets:
            groups["pad"].append((b, t, (tok,)))
    total = None
    weight = {"step": 1.0, "guess": config.guess_weight, "pad": config.scratchpad_weight}
    npos = 0
    for name, items in groups.items():
        if not items:
            continue
        bidx = [b for b, _, _ in items]
        tidx = [t for _, t, _ in items]
        sets = [s for _, _, s in items]
        rows = gather_positions(logits, bidx, tidx)
        if name == "guess" and config.guess_loss == "l1":
            part = batched_log_l1(rows, sets)
        else:
            part = batched_multi_ce(rows, sets)
        part = ad.scale(part, weight[name])
        total = part if total is None else ad.add(total, part)
        npos += len(items)
    if total is None:
        raise ValueError("batch has no supervised positions")
    return ad.scale(total, 1.0 / npos)


# ---------------------------------------------------------------------------
# the training loop


@dataclass
class TrainResult:
    model: Model
    metrics: list                     # (step, loss, lr, tokens_seen)
    tokens_seen: int

    def metrics_csv(self) -> str:
        lines = ["step,loss,lr,tokens_seen"]
        for s, l, lr, tok in self.metrics:
            lines.append(f"{s},{l:.6f},{lr:.8g},{tok}")
        return "\n".join(lines) + "\n"


def train(model: Model, transcript_stream: Iterable, config: TrainConfig,
          hook=None, log_every: int = 50) -> TrainResult:
    """Stream transcripts once through the model. ``hook(step, model)`` runs
    every log_every steps and may return True to stop early."""
    opt = AdamW(model.params, config)
    it = iter(transcript_stream)
    metrics = []
    tokens_seen = 0
    sp = model.config.scratchpad_len
    for step in range(1, config.steps + 1):
        examples = []
        for _ in range(config.batch_size):
            try:
                tr = next(it)
            except StopIteration:
                break
            examples.append(prepare_example(tr, sp, config.multi_target))
        if not examples:
            break
        model.zero_grad()
        loss = batch_loss(model, examples, config)
        if not np.isfinite(loss.data):
            raise RuntimeError(
                f"non-finite loss {loss.data} at step {step}; "
                f"batch sizes {[len(e.ids) for e in examples]}")
        loss.backward()
        lr = opt.step()
        tokens_seen += sum(len(e.ids) for e in examples)
        if step % log_every == 0 or step == 1:
            metrics.append((step, float(loss.data), lr, tokens_seen))
            if hook is not None and hook(step, model):
                break
    return TrainResult(model, metrics, tokens_seen)


# ---------------------------------------------------------------------------
# checkpoints


CKPT_MAGIC = b"TBCKPT01"


def save_checkpoint(model: Model, path: str):
    """Versioned header with the config, then a name/shape manifest and raw
    little-endian float64 buffers."""
    cfg = model.config
    header = {
        "config": {"vocab_size": cfg.vocab_size, "layers": cfg.layers,
                   "heads": cfg.heads, "embed_dim": cfg.embed_dim,
                   "max_positions": cfg.max_positions,
                   "scratchpad_len": cfg.scratchpad_len},
        "params": [{"name": k, "shape": list(t.data.shape)}
                   for k, t in sorted(model.params.items())],
    }
    hb = json.dumps(header, sort_keys=True).encode()
    with open(path, "wb") as f:
        f.write(CKPT_MAGIC)
        f.write(len(hb).to_bytes(8, "little"))
        f.write(hb)
        for k, _ in sorted(model.params.items()):
            f.write(model.params[k].data.astype("<f8").tobytes())


def load_checkpoint(path: str) -> Model:
    with open(path, "rb") as f:
        blob = f.read()
    if blob[:8] != CKPT_MAGIC:
        raise ValueError(f"{path}: not a checkpoint file")
    hlen = int.from_bytes(blob[8:16], "little")
    header = json.loads(blob[16:16 + hlen].decode())
    model = Model(ModelConfig(**header["config"]), seed=0)
    off = 16 + hlen
    for spec in header["params"]:
        shape = tuple(spec["shape"])
        size = int(np.prod(shape)) if shape else 1
        buf = np.frombuffer(blob, dtype="<f8", count=size, offset=off)
        model.params[spec["name"]].data = buf.reshape(shape).astype(np.float64)
        off += size * 8
    return model
