"""Transformer encoder over tokenized positions, with hand-written
reverse-mode gradients.

Architecture: token embedding + learned positional encoding with a prepended
CLS slot, pre-layer-norm blocks (multi-head self-attention, GELU MLP, both
with residual connections and dropout), a final layer norm, CLS readout,
square linear projection, and l2 normalization of the output vector.

Everything is plain numpy in double precision; the forward pass records the
intermediates needed for an exact backward pass (the "tape").
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, asdict, replace

import numpy as np
from scipy.special import erf

from .tokens import CLS_ID, SEQ_LEN, VOCAB_SIZE

MODEL_SEQ_LEN = SEQ_LEN + 1  # CLS + 77 position tokens

CHECKPOINT_MAGIC = b"LCENC\x01"

_SQRT2 = np.sqrt(2.0)
_INV_SQRT_2PI = 1.0 / np.sqrt(2.0 * np.pi)


class EncoderError(ValueError):
    pass


@dataclass(frozen=True)
class EncoderConfig:
    layers: int = 6
    embed_dim: int = 128
    heads: int = 8
    mlp_size: int = 256
    dropout: float = 0.10
    vocab_size: int = VOCAB_SIZE
    seq_len: int = MODEL_SEQ_LEN

    def __post_init__(self):
        if self.layers < 1:
            raise EncoderError("layers must be >= 1")
        if self.embed_dim % self.heads != 0:
            raise EncoderError(
                f"embed_dim {self.embed_dim} not divisible by heads {self.heads}"
            )
        if not 0.0 <= self.dropout < 1.0:
            raise EncoderError("dropout must lie in [0, 1)")


MINI_CONFIG = EncoderConfig(layers=6, embed_dim=128, heads=8, mlp_size=256)
BASE_CONFIG = EncoderConfig(layers=6, embed_dim=1024, heads=16, mlp_size=1024)


def param_names(config: EncoderConfig) -> list[str]:
    """Canonical parameter order; also the checkpoint serialization order."""
    names = ["tok_emb", "pos_emb"]
    for i in range(config.layers):
        for part in (
            "ln1.g", "ln1.b", "wq", "bq", "wk", "bk", "wv", "bv", "wo", "bo",
            "ln2.g", "ln2.b", "w1", "b1", "w2", "b2",
        ):
            names.append(f"layer{i}.{part}")
    names.extend(["final.ln.g", "final.ln.b", "proj.w", "proj.b"])
    return names


def init_params(config: EncoderConfig, seed: int) -> dict[str, np.ndarray]:
    """Deterministic initialization: Glorot-uniform matrices, zero biases,
    unit layer-norm gains, U(-0.05, 0.05) embedding tables.
    """
    rng = np.random.default_rng(seed)
    D, M = config.embed_dim, config.mlp_size

    def glorot(shape):
        limit = np.sqrt(6.0 / (shape[0] + shape[1]))
        return rng.uniform(-limit, limit, size=shape)

    params: dict[str, np.ndarray] = {
        "tok_emb": rng.uniform(-0.05, 0.05, size=(config.vocab_size, D)),
        "pos_emb": rng.uniform(-0.05, 0.05, size=(config.seq_len, D)),
    }
    for i in range(config.layers):
        pre = f"layer{i}."
        params[pre + "ln1.g"] = np.ones(D)
        params[pre + "ln1.b"] = np.zeros(D)
        for w in ("wq", "wk", "wv", "wo"):
            params[pre + w] = glorot((D, D))
        for b in ("bq", "bk", "bv", "bo"):
            params[pre + b] = np.zeros(D)
        params[pre + "ln2.g"] = np.ones(D)
        params[pre + "ln2.b"] = np.zeros(D)
        params[pre + "w1"] = glorot((D, M))
        params[pre + "b1"] = np.zeros(M)
        params[pre + "w2"] = glorot((M, D))
        params[pre + "b2"] = np.zeros(D)
    params["final.ln.g"] = np.ones(D)
    params["final.ln.b"] = np.zeros(D)
    params["proj.w"] = glorot((D, D))
    params["proj.b"] = np.zeros(D)
    return params


def calibrate_projection(
    params: dict[str, np.ndarray], config: EncoderConfig, sequences
) -> None:
    """Shift proj.b so the mean projection output over `sequences` is zero.

    Chess positions share most of their tokens, so freshly initialized
    embeddings cluster tightly on the sphere; contrastive training started
    from that cluster tends to fall into the uniform-similarity fixed
    point. Centering the projection at initialization spreads the starting
    embeddings and avoids the trap. In-place; call once on fresh params.
    """
    eval_config = replace(config, dropout=0.0)
    z, tape = encode(params, eval_config, sequences, train_mode=True, seed=0)
    c = tape.final_cache[1]
    raw = c @ params["proj.w"] + params["proj.b"]
    params["proj.b"] = params["proj.b"] - raw.mean(axis=0)


def param_count(params: dict[str, np.ndarray]) -> int:
    return int(sum(v.size for v in params.values()))


def zeros_like_params(params: dict[str, np.ndarray]) -> dict[str, np.ndarray]:
    return {k: np.zeros_like(v) for k, v in params.items()}


# -- primitive forward/backward ---------------------------------------------

_LN_EPS = 1e-6


def _layer_norm_fwd(x, g, b):
    mu = x.mean(axis=-1, keepdims=True)
    xc = x - mu
    var = (xc * xc).mean(axis=-1, keepdims=True)
    inv = 1.0 / np.sqrt(var + _LN_EPS)
    xhat = xc * inv
    return xhat * g + b, (xhat, inv, g)


def _layer_norm_bwd(dy, cache):
    xhat, inv, g = cache
    dg = (dy * xhat).sum(axis=tuple(range(dy.ndim - 1)))
    db = dy.sum(axis=tuple(range(dy.ndim - 1)))
    dxhat = dy * g
    m1 = dxhat.mean(axis=-1, keepdims=True)
    m2 = (dxhat * xhat).mean(axis=-1, keepdims=True)
    dx = inv * (dxhat - m1 - xhat * m2)
    return dx, dg, db


def _gelu_fwd(x):
    return 0.5 * x * (1.0 + erf(x / _SQRT2))


def _gelu_grad(x):
    return 0.5 * (1.0 + erf(x / _SQRT2)) + x * _INV_SQRT_2PI * np.exp(-0.5 * x * x)


def _softmax(x):
    e = np.exp(x - x.max(axis=-1, keepdims=True))
    return e / e.sum(axis=-1, keepdims=True)


@dataclass
class Tape:
    """Recorded forward pass: everything the backward pass consumes."""

    config: EncoderConfig
    params: dict
    ids: np.ndarray
    caches: list
    final_cache: tuple
    consumed: bool = False


def _dropout_mask(rng, shape, rate):
    return (rng.random(shape) >= rate) / (1.0 - rate)


def encode(
    params: dict[str, np.ndarray],
    config: EncoderConfig,
    sequences,
    train_mode: bool = False,
    seed: int = 0,
):
    """Embed a batch of 77-token sequences into unit-norm vectors.

    Returns (Z, tape) in train mode and Z alone otherwise. Inference is
    deterministic; dropout is active only in train mode with a seeded mask.
    """
    ids = np.asarray(sequences, dtype=np.int64)
    if ids.ndim == 1:
        ids = ids[None, :]
    if ids.shape[1] != SEQ_LEN:
        raise EncoderError(f"sequences must have length {SEQ_LEN}")
    if ids.max(initial=0) >= config.vocab_size or ids.min(initial=0) < 0:
        raise EncoderError("token id out of vocabulary range")

    B = ids.shape[0]
    ids = np.concatenate(
        [np.full((B, 1), CLS_ID, dtype=np.int64), ids], axis=1
    )
    T, D, H = config.seq_len, config.embed_dim, config.heads
    dh = D // H
    scale = 1.0 / np.sqrt(dh)
    rate = config.dropout if train_mode else 0.0
    rng = np.random.default_rng(seed) if train_mode else None

    x = params["tok_emb"][ids] + params["pos_emb"][None, :, :]
    emb_mask = None
    if rate > 0.0:
        emb_mask = _dropout_mask(rng, x.shape, rate)
        x = x * emb_mask

    caches = []
    for i in range(config.layers):
        pre = f"layer{i}."
        h, ln1_cache = _layer_norm_fwd(x, params[pre + "ln1.g"], params[pre + "ln1.b"])
        q = h @ params[pre + "wq"] + params[pre + "bq"]
        k = h @ params[pre + "wk"] + params[pre + "bk"]
        v = h @ params[pre + "wv"] + params[pre + "bv"]
        # (B, H, T, dh)
        qh = q.reshape(B, T, H, dh).transpose(0, 2, 1, 3)
        kh = k.reshape(B, T, H, dh).transpose(0, 2, 1, 3)
        vh = v.reshape(B, T, H, dh).transpose(0, 2, 1, 3)
        att = _softmax(np.matmul(qh, kh.transpose(0, 1, 3, 2)) * scale)
        ctx = np.matmul(att, vh).transpose(0, 2, 1, 3).reshape(B, T, D)
        o = ctx @ params[pre + "wo"] + params[pre + "bo"]
        att_mask = None
        if rate > 0.0:
            att_mask = _dropout_mask(rng, o.shape, rate)
            o = o * att_mask
        x_mid = x + o

        h2, ln2_cache = _layer_norm_fwd(
            x_mid, params[pre + "ln2.g"], params[pre + "ln2.b"]
        )
        u = h2 @ params[pre + "w1"] + params[pre + "b1"]
        gu = _gelu_fwd(u)
        m = gu @ params[pre + "w2"] + params[pre + "b2"]
        mlp_mask = None
        if rate > 0.0:
            mlp_mask = _dropout_mask(rng, m.shape, rate)
            m = m * mlp_mask
        x_out = x_mid + m

        caches.append(
            (h, ln1_cache, qh, kh, vh, att, ctx, att_mask,
             x_mid, h2, ln2_cache, u, gu, mlp_mask)
        )
        x = x_out

    hf, lnf_cache = _layer_norm_fwd(x, params["final.ln.g"], params["final.ln.b"])
    c = hf[:, 0, :]
    raw = c @ params["proj.w"] + params["proj.b"]
    norms = np.linalg.norm(raw, axis=1, keepdims=True)
    if np.any(norms == 0):
        raise EncoderError("zero-norm projection output")
    z = raw / norms

    if not train_mode:
        return z
    tape = Tape(
        config=config,
        params=params,
        ids=ids,
        caches=caches,
        final_cache=(lnf_cache, c, z, norms, emb_mask),
    )
    return z, tape


def backprop(tape: Tape, dz: np.ndarray) -> dict[str, np.ndarray]:
    """Reverse-mode gradients of a scalar loss with upstream gradient `dz`
    (B x D, w.r.t. the normalized embeddings) for every encoder parameter.
    """
    if tape.consumed:
        raise EncoderError("tape already consumed")
    tape.consumed = True

    config, params, ids = tape.config, tape.params, tape.ids
    B = ids.shape[0]
    T, D, H = config.seq_len, config.embed_dim, config.heads
    dh = D // H
    scale = 1.0 / np.sqrt(dh)
    grads = {}

    lnf_cache, c, z, norms, emb_mask = tape.final_cache
    # through l2 normalization: z = raw / |raw|
    draw = (dz - z * (z * dz).sum(axis=1, keepdims=True)) / norms
    grads["proj.w"] = c.T @ draw
    grads["proj.b"] = draw.sum(axis=0)
    dc = draw @ params["proj.w"].T
    dhf = np.zeros((B, T, D))
    dhf[:, 0, :] = dc
    dx, dg, db = _layer_norm_bwd(dhf, lnf_cache)
    grads["final.ln.g"] = dg
    grads["final.ln.b"] = db

    for i in range(config.layers - 1, -1, -1):
        pre = f"layer{i}."
        (h, ln1_cache, qh, kh, vh, att, ctx, att_mask,
         x_mid, h2, ln2_cache, u, gu, mlp_mask) = tape.caches[i]

        # MLP sublayer: x_out = x_mid + drop(gelu(h2 @ w1 + b1) @ w2 + b2)
        dm = dx if mlp_mask is None else dx * mlp_mask
        grads[pre + "w2"] = gu.reshape(-1, gu.shape[-1]).T @ dm.reshape(-1, D)
        grads[pre + "b2"] = dm.sum(axis=(0, 1))
        dgu = dm @ params[pre + "w2"].T
        du = dgu * _gelu_grad(u)
        grads[pre + "w1"] = h2.reshape(-1, D).T @ du.reshape(-1, du.shape[-1])
        grads[pre + "b1"] = du.sum(axis=(0, 1))
        dh2 = du @ params[pre + "w1"].T
        dx_mid_ln, dg2, db2 = _layer_norm_bwd(dh2, ln2_cache)
        grads[pre + "ln2.g"] = dg2
        grads[pre + "ln2.b"] = db2
        dx_mid = dx + dx_mid_ln

        # attention sublayer: x_mid = x + drop(ctx @ wo + bo)
        do = dx_mid if att_mask is None else dx_mid * att_mask
        grads[pre + "wo"] = ctx.reshape(-1, D).T @ do.reshape(-1, D)
        grads[pre + "bo"] = do.sum(axis=(0, 1))
        dctx = (do @ params[pre + "wo"].T).reshape(B, T, H, dh).transpose(0, 2, 1, 3)
        datt = np.matmul(dctx, vh.transpose(0, 1, 3, 2))
        dvh = np.matmul(att.transpose(0, 1, 3, 2), dctx)
        dscores = att * (datt - (datt * att).sum(axis=-1, keepdims=True))
        dscores *= scale
        dqh = np.matmul(dscores, kh)
        dkh = np.matmul(dscores.transpose(0, 1, 3, 2), qh)

        dq = dqh.transpose(0, 2, 1, 3).reshape(B, T, D)
        dk = dkh.transpose(0, 2, 1, 3).reshape(B, T, D)
        dv = dvh.transpose(0, 2, 1, 3).reshape(B, T, D)
        h_flat = h.reshape(-1, D)
        grads[pre + "wq"] = h_flat.T @ dq.reshape(-1, D)
        grads[pre + "bq"] = dq.sum(axis=(0, 1))
        grads[pre + "wk"] = h_flat.T @ dk.reshape(-1, D)
        grads[pre + "bk"] = dk.sum(axis=(0, 1))
        grads[pre + "wv"] = h_flat.T @ dv.reshape(-1, D)
        grads[pre + "bv"] = dv.sum(axis=(0, 1))
        dh_ = (
            dq @ params[pre + "wq"].T
            + dk @ params[pre + "wk"].T
            + dv @ params[pre + "wv"].T
        )
        dx_ln, dg1, db1 = _layer_norm_bwd(dh_, ln1_cache)
        grads[pre + "ln1.g"] = dg1
        grads[pre + "ln1.b"] = db1
        dx = dx_mid + dx_ln

    if emb_mask is not None:
        dx = dx * emb_mask
    grads["pos_emb"] = dx.sum(axis=0)
    dtok = np.zeros_like(params["tok_emb"])
    np.add.at(dtok, ids.reshape(-1), dx.reshape(-1, D))
    grads["tok_emb"] = dtok
    return grads


# -- checkpoint I/O ---------------------------------------------------------

def save_checkpoint(path, config: EncoderConfig, params: dict[str, np.ndarray]) -> None:
    """Versioned binary checkpoint: magic, JSON header (config + shape
    table), then raw little-endian float64 arrays in canonical order.
    """
    names = param_names(config)
    header = {
        "config": asdict(config),
        "arrays": [[n, list(params[n].shape)] for n in names],
    }
    blob = json.dumps(header).encode()
    with open(path, "wb") as f:
        f.write(CHECKPOINT_MAGIC)
        f.write(struct.pack("<I", len(blob)))
        f.write(blob)
        for n in names:
            f.write(np.ascontiguousarray(params[n], dtype="<f8").tobytes())


def load_checkpoint(path) -> tuple[EncoderConfig, dict[str, np.ndarray]]:
    with open(path, "rb") as f:
        magic = f.read(len(CHECKPOINT_MAGIC))
        if magic != CHECKPOINT_MAGIC:
            raise EncoderError(f"bad checkpoint magic {magic!r}")
        (hlen,) = struct.unpack("<I", f.read(4))
        header = json.loads(f.read(hlen))
        config = EncoderConfig(**header["config"])
        expected = param_names(config)
        if [a[0] for a in header["arrays"]] != expected:
            raise EncoderError("checkpoint parameter order mismatch")
        params = {}
        for name, shape in header["arrays"]:
            n = int(np.prod(shape))
            raw = f.read(n * 8)
            if len(raw) != n * 8:
                raise EncoderError(f"checkpoint truncated in array {name}")
            data = np.frombuffer(raw, dtype="<f8", count=n)
            params[name] = data.reshape(shape).astype(np.float64)
    for name, arr in params.items():
        if not np.all(np.isfinite(arr)):
            raise EncoderError(f"non-finite values in checkpoint array {name}")
    return config, params
