"""Embedding-space diagnostics: 2D principal-component projection and
per-game latent trajectory export (CSV plus a static SVG polyline).
"""

from __future__ import annotations

import io
from dataclasses import dataclass

import numpy as np

from .pgn import GameRecord
from .planner import LatentPlanner


class ProjectionError(ValueError):
    pass


@dataclass
class Projection2D:
    """Top-2 principal components of a reference embedding cloud."""

    basis: np.ndarray  # 2 x D, orthonormal rows
    mean: np.ndarray  # D

    def transform(self, z: np.ndarray) -> np.ndarray:
        z = np.atleast_2d(np.asarray(z, dtype=np.float64))
        return (z - self.mean) @ self.basis.T


def fit_projection(embeddings: np.ndarray) -> Projection2D:
    """Mean-centered top-2 PCA basis via eigendecomposition.

    Sign convention: each component's largest-magnitude entry is positive,
    so the fit is deterministic.
    """
    z = np.asarray(embeddings, dtype=np.float64)
    if z.ndim != 2 or z.shape[0] < 3 or z.shape[1] < 2:
        raise ProjectionError("need >= 3 embeddings of dimension >= 2")
    mean = z.mean(axis=0)
    centered = z - mean
    cov = centered.T @ centered / (z.shape[0] - 1)
    eigvals, eigvecs = np.linalg.eigh(cov)
    order = np.argsort(eigvals)[::-1]
    if eigvals[order[1]] <= 1e-12 * max(eigvals[order[0]], 1.0):
        raise ProjectionError("embedding cloud is rank-deficient (< 2 components)")
    basis = eigvecs[:, order[:2]].T.copy()
    for row in basis:
        if row[np.argmax(np.abs(row))] < 0:
            row *= -1.0
    return Projection2D(basis=basis, mean=mean)


def explained_variance_ratio(embeddings: np.ndarray, proj: Projection2D) -> float:
    z = np.asarray(embeddings, dtype=np.float64)
    centered = z - z.mean(axis=0)
    total = (centered ** 2).sum()
    kept = (centered @ proj.basis.T) ** 2
    return float(kept.sum() / total)


def export_trajectory(
    record: GameRecord,
    planner: LatentPlanner,
    projection: Projection2D,
) -> tuple[str, str]:
    """CSV ("ply,san,x,y,advantage_score") and an SVG rendering of a game's
    path through the projected embedding space. Row 0 is the start
    position; the advantage score is the planner's own scoring function.
    """
    positions = record.positions()
    zs = planner.embed_positions(positions)
    xy = projection.transform(zs)
    scores = [planner.model.score(z) for z in zs]

    out = io.StringIO()
    out.write("ply,san,x,y,advantage_score\n")
    sans = [""] + list(record.san_moves)
    for ply, (label, (x, y), score) in enumerate(zip(sans, xy, scores)):
        out.write(f"{ply},{label},{x:.10f},{y:.10f},{score:.10f}\n")
    return out.getvalue(), _trajectory_svg(xy)


def _trajectory_svg(xy: np.ndarray, size: int = 640, pad: float = 40.0) -> str:
    mins = xy.min(axis=0)
    maxs = xy.max(axis=0)
    span = np.maximum(maxs - mins, 1e-12)
    scale = (size - 2 * pad) / span.max()

    def to_px(pt):
        x = pad + (pt[0] - mins[0]) * scale
        y = size - pad - (pt[1] - mins[1]) * scale  # flip: y grows upward
        return x, y

    points = " ".join(f"{x:.2f},{y:.2f}" for x, y in map(to_px, xy))
    x0, y0 = to_px(xy[0])
    xn, yn = to_px(xy[-1])
    return (
        f'<svg xmlns="http://www.w3.org/2000/svg" version="1.1" '
        f'width="{size}" height="{size}" viewBox="0 0 {size} {size}">\n'
        '  <defs>\n'
        '    <marker id="arrow" viewBox="0 0 10 10" refX="9" refY="5" '
        'markerWidth="6" markerHeight="6" orient="auto-start-reverse">\n'
        '      <path d="M 0 0 L 10 5 L 0 10 z" fill="#c0392b"/>\n'
        '    </marker>\n'
        '  </defs>\n'
        f'  <rect width="{size}" height="{size}" fill="white"/>\n'
        f'  <polyline points="{points}" fill="none" stroke="#c0392b" '
        'stroke-width="1.5" marker-mid="url(#arrow)" marker-end="url(#arrow)"/>\n'
        f'  <circle cx="{x0:.2f}" cy="{y0:.2f}" r="5" fill="#2c3e50"/>\n'
        f'  <circle cx="{xn:.2f}" cy="{yn:.2f}" r="5" fill="#c0392b"/>\n'
        '</svg>\n'
    )


def export_embeddings(fens, planner: LatentPlanner) -> str:
    """CSV of raw embedding coordinates for a list of FENs."""
    from .board import parse_fen

    positions = [parse_fen(f) for f in fens]
    zs = planner.embed_positions(positions)
    out = io.StringIO()
    dim = zs.shape[1]
    out.write("fen," + ",".join(f"z{i}" for i in range(dim)) + "\n")
    for fen, z in zip(fens, zs):
        out.write('"' + fen + '",' + ",".join(f"{v:.10f}" for v in z) + "\n")
    return out.getvalue()
