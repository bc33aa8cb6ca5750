"""Decoder-only transformer with causal masking, an optional scratchpad
attention window, and the two multi-target losses.

The model is GPT-2-shaped: token + position embeddings, pre-norm blocks of
multi-head attention and a gelu MLP with hidden size 6x the embedding, a
final layer norm, and an untied output head. Training math runs through the
float64 autodiff tape; decoding uses a no-grad numpy path with a KV cache
that produces the same logits.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor
from .rng import make_rng


@dataclass(frozen=True)
class ModelConfig:
    vocab_size: int
    layers: int = 4
    heads: int = 4
    embed_dim: int = 96
    max_positions: int = 512
    scratchpad_len: int = 0     # m*m thinking tokens; 0 disables the window

    def __post_init__(self):
        if self.embed_dim % self.heads != 0:
            raise ValueError("embed_dim must be divisible by heads")

    @property
    def ff_dim(self) -> int:
        return 6 * self.embed_dim

    @property
    def head_dim(self) -> int:
        return self.embed_dim // self.heads


def paper_scale_config(vocab_size: int) -> ModelConfig:
    """The reference shape (8 layers, 8 heads, 576 wide, 3456 hidden);
    constructable for completeness, far beyond what the toy runs train."""
    return ModelConfig(vocab_size=vocab_size, layers=8, heads=8, embed_dim=576,
                       max_positions=4096, scratchpad_len=81)


class Model:
    def __init__(self, config: ModelConfig, seed: int = 0):
        self.config = config
        rng = make_rng(seed, 21)
        D, V, P = config.embed_dim, config.vocab_size, config.max_positions
        std = 0.02
        resid_std = std / np.sqrt(2 * config.layers)

        def normal(*shape, s=std):
            return Tensor(rng.normal(0, s, size=shape), requires_grad=True)

        def zeros(*shape):
            return Tensor(np.zeros(shape), requires_grad=True)

        def ones(*shape):
            t = Tensor(np.ones(shape), requires_grad=True)
            return t

        p = {"wte": normal(V, D), "wpe": normal(P, D),
             "ln_f_g": ones(D), "ln_f_b": zeros(D), "head": normal(D, V)}
        for i in range(config.layers):
            p[f"h{i}.ln1_g"] = ones(D)
            p[f"h{i}.ln1_b"] = zeros(D)
            p[f"h{i}.qkv_w"] = normal(D, 3 * D)
            p[f"h{i}.qkv_b"] = zeros(3 * D)
            p[f"h{i}.proj_w"] = normal(D, D, s=resid_std)
            p[f"h{i}.proj_b"] = zeros(D)
            p[f"h{i}.ln2_g"] = ones(D)
            p[f"h{i}.ln2_b"] = zeros(D)
            p[f"h{i}.fc_w"] = normal(D, config.ff_dim)
            p[f"h{i}.fc_b"] = zeros(config.ff_dim)
            p[f"h{i}.out_w"] = normal(config.ff_dim, D, s=resid_std)
            p[f"h{i}.out_b"] = zeros(D)
        self.params = p

    def param_count(self) -> int:
        return sum(t.data.size for t in self.params.values())

    def zero_grad(self):
        for t in self.params.values():
            t.zero_grad()

    # -- training-path forward (autodiff) ----------------------------------

    def forward(self, token_ids, mask=None, pos_ids=None) -> Tensor:
        """Logits (B, T, V). ``mask`` is a boolean allowed-to-attend matrix
        of shape (T, T) or (B, T, T); defaults to causal. Output at position
        t depends only on positions the mask admits."""
        ids = np.atleast_2d(np.asarray(token_ids))
        B, T = ids.shape
        cfg = self.config
        if ids.max(initial=0) >= cfg.vocab_size:
            raise ValueError("token id out of vocabulary")
        if T > cfg.max_positions:
            raise ValueError(f"sequence length {T} exceeds {cfg.max_positions}")
        if mask is None:
            mask = causal_mask(T)
        mask = np.asarray(mask, dtype=bool)
        if mask.shape[-2:] != (T, T):
            raise ValueError("mask shape mismatch")
        att_mask = mask if mask.ndim == 2 else mask[:, None, :, :]
        if pos_ids is None:
            pos_ids = np.broadcast_to(np.arange(T), (B, T))
        p = self.params
        x = ad.add(ad.embedding(p["wte"], ids), ad.embedding(p["wpe"], np.asarray(pos_ids)))
        H, dh = cfg.heads, cfg.head_dim
        for i in range(cfg.layers):
            h = ad.layer_norm(x, p[f"h{i}.ln1_g"], p[f"h{i}.ln1_b"])
            qkv = ad.add(ad.matmul(h, p[f"h{i}.qkv_w"]), p[f"h{i}.qkv_b"])
            qkv = ad.reshape(qkv, (B, T, 3, H, dh))
            qkv = ad.transpose(qkv, (2, 0, 3, 1, 4))      # (3, B, H, T, dh)
            q = _slice0(qkv, 0)
            k = _slice0(qkv, 1)
            v = _slice0(qkv, 2)
            scores = ad.scale(ad.matmul(q, _swap(k)), 1.0 / np.sqrt(dh))
            att = ad.masked_softmax(scores, att_mask)
            ctx = ad.matmul(att, v)                        # (B, H, T, dh)
            ctx = ad.reshape(ad.transpose(ctx, (0, 2, 1, 3)), (B, T, H * dh))
            x = ad.add(x, ad.add(ad.matmul(ctx, p[f"h{i}.proj_w"]), p[f"h{i}.proj_b"]))
            h2 = ad.layer_norm(x, p[f"h{i}.ln2_g"], p[f"h{i}.ln2_b"])
            ff = ad.gelu(ad.add(ad.matmul(h2, p[f"h{i}.fc_w"]), p[f"h{i}.fc_b"]))
            x = ad.add(x, ad.add(ad.matmul(ff, p[f"h{i}.out_w"]), p[f"h{i}.out_b"]))
        x = ad.layer_norm(x, p["ln_f_g"], p["ln_f_b"])
        return ad.matmul(x, p["head"])

    # -- inference-path forward (no tape, KV cache) --------------------------

    def forward_infer(self, token_ids, mask=None, pos_ids=None) -> np.ndarray:
        """Same logits as forward(), as a plain array."""
        return self.forward(token_ids, mask, pos_ids).data

    def infer_prefill(self, ids, pos_ids=None):
        """Causal forward over a batch of prompts; returns (logits_last, kv)
        where kv caches keys/values per layer for incremental decoding."""
        ids = np.atleast_2d(np.asarray(ids))
        B, T = ids.shape
        cfg = self.config
        if pos_ids is None:
            pos_ids = np.broadcast_to(np.arange(T), (B, T)).copy()
        x = self.params["wte"].data[ids] + self.params["wpe"].data[pos_ids]
        kv = []
        mask = causal_mask(T)
        logits, kv = self._infer_stack(x, kv=None, att_mask=mask)
        return logits[:, -1], kv

    def infer_step(self, kv, ids_step, pos_step):
        """One decode step: ids_step (B,), pos_step (B,). Returns logits (B, V)."""
        x = self.params["wte"].data[ids_step][:, None, :] + \
            self.params["wpe"].data[pos_step][:, None, :]
        logits, _ = self._infer_stack(x, kv=kv, att_mask=None)
        return logits[:, -1]

    def _infer_stack(self, x, kv, att_mask):
        cfg = self.config
        p = self.params
        B, T, D = x.shape
        H, dh = cfg.heads, cfg.head_dim
        new_kv = kv if kv is not None else []
        for i in range(cfg.layers):
            h = _ln(x, p[f"h{i}.ln1_g"].data, p[f"h{i}.ln1_b"].data)
            qkv = h @ p[f"h{i}.qkv_w"].data + p[f"h{i}.qkv_b"].data
            qkv = qkv.reshape(B, T, 3, H, dh).transpose(2, 0, 3, 1, 4)
            q, k, v = qkv[0], qkv[1], qkv[2]
            if kv is not None:
                pk, pv = kv[i]
                k = np.concatenate([pk, k], axis=2)
                v = np.concatenate([pv, v], axis=2)
                kv[i] = (k, v)
            else:
                new_kv.append((k, v))
            scores = q @ np.swapaxes(k, -1, -2) / np.sqrt(dh)
            if att_mask is not None:
                scores = np.where(att_mask, scores, -np.inf)
            m = scores.max(axis=-1, keepdims=True)
            e = np.exp(scores - m)
            att = e / e.sum(axis=-1, keepdims=True)
            ctx = (att @ v).transpose(0, 2, 1, 3).reshape(B, T, D)
            x = x + ctx @ p[f"h{i}.proj_w"].data + p[f"h{i}.proj_b"].data
            h2 = _ln(x, p[f"h{i}.ln2_g"].data, p[f"h{i}.ln2_b"].data)
            ff = _gelu(h2 @ p[f"h{i}.fc_w"].data + p[f"h{i}.fc_b"].data)
            x = x + ff @ p[f"h{i}.out_w"].data + p[f"h{i}.out_b"].data
        x = _ln(x, p["ln_f_g"].data, p["ln_f_b"].data)
        return x @ p["head"].data, new_kv


def _slice0(t: Tensor, idx: int) -> Tensor:
    """Select index idx of axis 0 (tape-aware)."""
    out = Tensor(t.data[idx], t.requires_grad, (t,))

    def back(g):
        if t.requires_grad:
            acc = np.zeros_like(t.data)
            acc[idx] = g
            t._accumulate(acc)
    out._backward = back
    return out


def _swap(t: Tensor) -> Tensor:
    axes = list(range(t.data.ndim))
    axes[-1], axes[-2] = axes[-2], axes[-1]
    return ad.transpose(t, tuple(axes))


def _ln(x, g, b, eps=1e-5):
    mu = x.mean(axis=-1, keepdims=True)
    xc = x - mu
    inv = 1.0 / np.sqrt((xc ** 2).mean(axis=-1, keepdims=True) + eps)
    return xc * inv * g + b


def _gelu(x):
    c = np.sqrt(2.0 / np.pi)
    return 0.5 * x * (1.0 + np.tanh(c * (x + 0.044715 * x ** 3)))


# ---------------------------------------------------------------------------
# attention masks


def causal_mask(seq_len: int) -> np.ndarray:
    return np.tril(np.ones((seq_len, seq_len), dtype=bool))


def scratchpad_mask(seq_len: int, guess_pos: int, pad_len: int) -> np.ndarray:
    """Causal base plus a full-attention window: the guess token sees all
    thinking tokens (the pad_len positions that follow it) and they see one
    another; thinking tokens keep causal access to the prefix."""
    if guess_pos < 0 or guess_pos + pad_len >= seq_len:
        raise ValueError("scratchpad window out of bounds")
    mask = causal_mask(seq_len)
    if pad_len:
        w0, w1 = guess_pos + 1, guess_pos + pad_len + 1
        mask[guess_pos, w0:w1] = True
        mask[w0:w1, w0:w1] = True
    return mask


# ---------------------------------------------------------------------------
# losses


def _logsumexp(z):
    m = z.max()
    return m + np.log(np.exp(z - m).sum())


def loss_ce_multi(logits, target_set):
    """Sum of cross-entropies over every valid target: |S|*lse(z) - sum z_S.

    Accepts a Tensor (differentiable) or an array; returns a scalar Tensor.
    """
    S = sorted(set(int(i) for i in target_set))
    if not S:
        raise ValueError("empty target set")
    t = logits if isinstance(logits, Tensor) else Tensor(logits)
    z = t.data
    lse = _logsumexp(z)
    val = len(S) * lse - z[S].sum()
    out = Tensor(val, t.requires_grad, (t,))

    def back(g):
        if t.requires_grad:
            p = np.exp(z - lse)
            dz = len(S) * p
            dz[S] -= 1.0
            t._accumulate(g * dz)
    out._backward = back
    return out


def loss_log_l1(logits, target_set):
    """-log of the total probability on the target set: lse(z) - lse(z_S).

    The log of the expected-trials loss; minimizing it concentrates mass on
    the set as a whole rather than on each member.
    """
    S = sorted(set(int(i) for i in target_set))
    if not S:
        raise ValueError("empty target set")
    t = logits if isinstance(logits, Tensor) else Tensor(logits)
    z = t.data
    lse = _logsumexp(z)
    lse_s = _logsumexp(z[S])
    out = Tensor(lse - lse_s, t.requires_grad, (t,))

    def back(g):
        if t.requires_grad:
            p = np.exp(z - lse)
            dz = p.copy()
            ps = np.exp(z[S] - lse_s)
            dz[S] -= ps
            t._accumulate(g * dz)
    out._backward = back
    return out


def gather_positions(logits: Tensor, batch_idx, time_idx) -> Tensor:
    """Rows (N, V) picked from (B, T, V) logits, tape-aware."""
    b = np.asarray(batch_idx)
    t = np.asarray(time_idx)
    out = Tensor(logits.data[b, t], logits.requires_grad, (logits,))

    def back(g):
        if logits.requires_grad:
            acc = np.zeros_like(logits.data)
            np.add.at(acc, (b, t), g)
            logits._accumulate(acc)
    out._backward = back
    return out


def batched_multi_ce(rows: Tensor, sets) -> Tensor:
    """Sum of loss_ce_multi over rows (N, V) with per-row target sets."""
    z = rows.data
    n, v = z.shape
    m = z.max(axis=1, keepdims=True)
    e = np.exp(z - m)
    lse = m[:, 0] + np.log(e.sum(axis=1))
    sizes = np.array([len(s) for s in sets], dtype=float)
    tsum = np.array([z[i, list(s)].sum() for i, s in enumerate(sets)])
    out = Tensor((sizes * lse - tsum).sum(), rows.requires_grad, (rows,))

    def back(g):
        if rows.requires_grad:
            p = e / e.sum(axis=1, keepdims=True)
            dz = sizes[:, None] * p
            for i, s in enumerate(sets):
                dz[i, list(s)] -= 1.0
            rows._accumulate(g * dz)
    out._backward = back
    return out


def batched_log_l1(rows: Tensor, sets) -> Tensor:
    """Sum of loss_log_l1 over rows (N, V) with per-row target sets."""
    z = rows.data
    m = z.max(axis=1, keepdims=True)
    e = np.exp(z - m)
    lse = m[:, 0] + np.log(e.sum(axis=1))
    vals = []
    subs = []
    for i, s in enumerate(sets):
        idx = list(s)
        zs = z[i, idx]
        ms = zs.max()
        lses = ms + np.log(np.exp(zs - ms).sum())
        vals.append(lse[i] - lses)
        subs.append((idx, np.exp(zs - lses)))
    out = Tensor(float(np.sum(vals)), rows.requires_grad, (rows,))

    def back(g):
        if rows.requires_grad:
            dz = e / e.sum(axis=1, keepdims=True)
            for i, (idx, ps) in enumerate(subs):
                dz[i, idx] -= ps
            rows._accumulate(g * dz)
    out._backward = back
    return out
