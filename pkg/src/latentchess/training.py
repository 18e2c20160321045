"""Contrastive training: dataset ingestion, margin-based positive masks,
the supervised contrastive loss, and the SGD-with-momentum loop.

Dataset files are plain text, one "FEN,win_prob" line each, where win_prob
is from the side to move's perspective; ingestion normalizes everything to
White's perspective.
"""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from .board import WHITE, FenError, parse_fen
from .encoder import (
    EncoderConfig, Tape, backprop, calibrate_projection, encode, init_params,
    save_checkpoint,
)
from .tokens import tokenize

log = logging.getLogger(__name__)


class DatasetError(ValueError):
    pass


class TrainingDiverged(RuntimeError):
    pass


@dataclass(frozen=True)
class LabeledPosition:
    fen: str
    win_prob_white: float


@dataclass
class TrainConfig:
    temperature: float = 0.07
    margin: float = 0.05  # positive-pair evaluation margin
    positives_per_anchor: int = 5
    lr: float = 0.05
    momentum: float = 0.9
    batch_size: int = 128
    steps: int = 1000
    seed: int = 0
    checkpoint_every: int = 1000

    def __post_init__(self):
        if self.temperature <= 0:
            raise ValueError("temperature must be > 0")
        if not 0 < self.margin < 1:
            raise ValueError("margin must lie in (0, 1)")


def ingest_dataset(path) -> list[LabeledPosition]:
    """Load "FEN,win_prob" lines, converting labels to White's perspective.

    Invalid lines raise with their line number.
    """
    items: list[LabeledPosition] = []
    with open(path, "r", encoding="utf-8") as f:
        for lineno, line in enumerate(f, start=1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            fen, sep, prob_text = line.rpartition(",")
            if not sep:
                raise DatasetError(f"line {lineno}: expected 'FEN,win_prob'")
            try:
                prob = float(prob_text)
            except ValueError:
                raise DatasetError(
                    f"line {lineno}: bad win_prob {prob_text!r}"
                ) from None
            if not 0.0 <= prob <= 1.0:
                raise DatasetError(f"line {lineno}: win_prob {prob} outside [0, 1]")
            try:
                p = parse_fen(fen.strip())
            except FenError as e:
                raise DatasetError(f"line {lineno}: {e}") from None
            p_white = prob if p.side == WHITE else 1.0 - prob
            items.append(LabeledPosition(fen.strip(), p_white))
    return items


def build_mask(probs, margin: float) -> np.ndarray:
    """B x B boolean positive mask: |p_i - p_j| < margin off the diagonal."""
    p = np.asarray(probs, dtype=np.float64)
    mask = np.abs(p[:, None] - p[None, :]) < margin
    np.fill_diagonal(mask, False)
    return mask


@dataclass
class Batch:
    items: list[LabeledPosition]
    mask: np.ndarray
    skipped_anchors: int = 0


def sample_batch(
    dataset: list[LabeledPosition],
    config: TrainConfig,
    rng: np.random.Generator,
    positive_index: Optional[list[np.ndarray]] = None,
) -> Batch:
    """Compose a batch of anchors plus per-anchor sampled positives.

    Anchors are drawn uniformly; for each, up to `positives_per_anchor`
    dataset-global positives (win prob within the margin) are added, without
    replacement, until `batch_size` is reached. Anchors with no candidate
    positive are skipped and counted.
    """
    n = len(dataset)
    if n < 2:
        raise DatasetError("dataset too small to form a batch")
    probs = np.array([d.win_prob_white for d in dataset])
    chosen: list[int] = []
    skipped = 0
    while len(chosen) < config.batch_size:
        anchor = int(rng.integers(n))
        if positive_index is not None:
            candidates = positive_index[anchor]
        else:
            candidates = np.flatnonzero(
                np.abs(probs - probs[anchor]) < config.margin
            )
            candidates = candidates[candidates != anchor]
        if len(candidates) == 0:
            skipped += 1
            if skipped > 10 * config.batch_size:
                raise DatasetError("could not find anchors with positives")
            continue
        take = min(config.positives_per_anchor, len(candidates))
        picks = rng.choice(candidates, size=take, replace=False)
        chosen.append(anchor)
        for idx in picks:
            if len(chosen) + 1 > config.batch_size:
                break
            chosen.append(int(idx))
    chosen = chosen[: config.batch_size]
    items = [dataset[i] for i in chosen]
    mask = build_mask([d.win_prob_white for d in items], config.margin)
    return Batch(items=items, mask=mask, skipped_anchors=skipped)


def build_positive_index(
    dataset: list[LabeledPosition], margin: float
) -> list[np.ndarray]:
    """Precompute, per position, the indices of all its dataset-global
    positives (win probabilities closer than the margin)."""
    probs = np.array([d.win_prob_white for d in dataset])
    order = np.argsort(probs, kind="stable")
    sorted_probs = probs[order]
    index: list[np.ndarray] = [np.empty(0, dtype=np.int64)] * len(dataset)
    lo_edges = np.searchsorted(sorted_probs, probs - margin, side="right")
    hi_edges = np.searchsorted(sorted_probs, probs + margin, side="left")
    for i, (lo, hi) in enumerate(zip(lo_edges, hi_edges)):
        cand = order[lo:hi]
        index[i] = cand[cand != i]
    return index


def supcon_loss(
    z: np.ndarray, mask: np.ndarray, temperature: float
) -> tuple[float, np.ndarray]:
    """Supervised contrastive loss over unit embeddings with multi-positive
    masks, and its gradient with respect to z.

    Anchors whose mask row has no positive are excluded from the outer sum
    (they still appear in other anchors' denominators). Cosine similarity
    reduces to the dot product because embeddings are unit norm.
    """
    if temperature <= 0:
        raise ValueError("temperature must be > 0")
    z = np.asarray(z, dtype=np.float64)
    B = z.shape[0]
    if mask.shape != (B, B):
        raise ValueError("mask shape does not match batch")

    sims = (z @ z.T) / temperature
    neg_inf = np.finfo(np.float64).min
    logits = sims.copy()
    np.fill_diagonal(logits, neg_inf)
    row_max = logits.max(axis=1, keepdims=True)
    exp = np.exp(logits - row_max)
    denom = exp.sum(axis=1, keepdims=True)
    log_prob = (logits - row_max) - np.log(denom)

    pos_counts = mask.sum(axis=1)
    active = pos_counts > 0
    if not np.any(active):
        return 0.0, np.zeros_like(z)

    per_anchor = -(mask * log_prob).sum(axis=1)[active] / pos_counts[active]
    loss = float(per_anchor.sum())

    # d(loss)/d(sims): softmax responsibility minus the positive indicator
    softmax = exp / denom
    g = np.zeros((B, B))
    g[active] = softmax[active] - mask[active] / pos_counts[active, None]
    np.fill_diagonal(g, 0.0)
    dz = (g @ z + g.T @ z) / temperature
    return loss, dz


def supcon_loss_reference(z, mask, temperature: float) -> float:
    """Naive double-loop evaluation of the same objective (test oracle)."""
    z = np.asarray(z, dtype=np.float64)
    B = z.shape[0]
    total = 0.0
    for i in range(B):
        positives = [j for j in range(B) if mask[i][j]]
        if not positives:
            continue
        denom = sum(
            np.exp(float(z[i] @ z[a]) / temperature) for a in range(B) if a != i
        )
        inner = sum(
            np.log(np.exp(float(z[i] @ z[p]) / temperature) / denom)
            for p in positives
        )
        total += -inner / len(positives)
    return total


@dataclass
class TrainResult:
    params: dict
    loss_history: list[float] = field(default_factory=list)


def sgd_momentum_step(params, grads, velocity, lr: float, momentum: float) -> None:
    """In-place SGD with momentum: v <- m v + g; w <- w - lr v."""
    for name, g in grads.items():
        velocity[name] = momentum * velocity[name] + g
        params[name] -= lr * velocity[name]


def train(
    dataset: list[LabeledPosition],
    encoder_config: EncoderConfig,
    train_config: TrainConfig,
    checkpoint_path=None,
    loss_log_path=None,
    initial_params=None,
) -> TrainResult:
    """Run the contrastive training loop and return final parameters plus
    the per-step loss history. Aborts on NaN loss, naming the step.
    """
    if not dataset:
        raise DatasetError("empty dataset")
    rng = np.random.default_rng(train_config.seed)
    if initial_params is not None:
        params = initial_params
    else:
        params = init_params(encoder_config, train_config.seed)
        # center the projection over a data sample; fresh inits otherwise
        # start as a tight cluster prone to the contrastive collapse point
        sample = [dataset[int(i)] for i in rng.integers(len(dataset), size=min(256, len(dataset)))]
        calibrate_projection(
            params, encoder_config,
            np.array([tokenize(item.fen) for item in sample]),
        )
    velocity = {k: np.zeros_like(v) for k, v in params.items()}
    positive_index = build_positive_index(dataset, train_config.margin)

    token_cache: dict[str, list[int]] = {}

    def tokens_for(fen: str):
        seq = token_cache.get(fen)
        if seq is None:
            seq = tokenize(fen)
            token_cache[fen] = seq
        return seq

    history: list[float] = []
    log_rows = []
    for step in range(train_config.steps):
        batch = sample_batch(dataset, train_config, rng, positive_index)
        seqs = np.array([tokens_for(item.fen) for item in batch.items])
        z, tape = encode(
            params, encoder_config, seqs, train_mode=True,
            seed=int(rng.integers(2**63)),
        )
        loss, dz = supcon_loss(z, batch.mask, train_config.temperature)
        if not np.isfinite(loss):
            raise TrainingDiverged(f"non-finite loss at step {step}")
        grads = backprop(tape, dz)
        sgd_momentum_step(params, grads, velocity, train_config.lr, train_config.momentum)
        history.append(loss)
        log_rows.append((step, loss))
        if step % 100 == 0:
            log.info("step %d loss %.4f", step, loss)
        if (
            checkpoint_path is not None
            and (step + 1) % train_config.checkpoint_every == 0
        ):
            save_checkpoint(checkpoint_path, encoder_config, params)

    if checkpoint_path is not None:
        save_checkpoint(checkpoint_path, encoder_config, params)
    if loss_log_path is not None:
        with open(loss_log_path, "w", newline="") as f:
            writer = csv.writer(f)
            writer.writerow(["step", "loss"])
            writer.writerows(log_rows)
    return TrainResult(params=params, loss_history=history)
