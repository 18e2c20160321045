"""Synthetic labeled positions for desk-scale experiments.

Positions come from random playouts of the rules core; labels are
material-count-derived win probabilities (White's perspective), squashed
through a logistic so large material edges saturate near 0 or 1.
"""

from __future__ import annotations

import math
import random

from .board import BISHOP, KNIGHT, PAWN, QUEEN, ROOK, GameStatus, Position, game_status
from .training import LabeledPosition

MATERIAL = {PAWN: 1.0, KNIGHT: 3.0, BISHOP: 3.0, ROOK: 5.0, QUEEN: 9.0}

# Logistic steepness: a one-queen edge (9 points) maps to ~0.999.
MATERIAL_SCALE = 0.8


def material_balance(p: Position) -> float:
    """Material sum, White minus Black, in pawn units."""
    total = 0.0
    for piece in p.board:
        value = MATERIAL.get(abs(piece))
        if value:
            total += value if piece > 0 else -value
    return total


def material_win_prob(p: Position) -> float:
    return 1.0 / (1.0 + math.exp(-MATERIAL_SCALE * material_balance(p)))


def generate_dataset(
    count: int,
    seed: int = 0,
    max_plies: int = 120,
    skip_opening_plies: int = 4,
) -> list[LabeledPosition]:
    """Sample `count` positions from random playouts, labeled by material.

    Early opening plies are skipped since they are all material-equal; a
    fraction of playouts randomly drops pieces mid-game to spread the
    label distribution across the full [0, 1] range.
    """
    from .board import emit_fen

    rng = random.Random(seed)
    items: list[LabeledPosition] = []
    while len(items) < count:
        p = Position.startpos()
        strip_side = rng.choice((1, -1, 0))  # side to handicap, or none
        for ply in range(max_plies):
            moves = p.legal_moves()
            if not moves or game_status(p) != GameStatus.ONGOING:
                break
            move = rng.choice(moves)
            if strip_side and rng.random() < 0.25:
                # prefer captures against the handicapped side
                captures = [
                    m for m in moves
                    if p.board[m.to_sq] * strip_side > 0
                    and abs(p.board[m.to_sq]) != 6
                ]
                if captures:
                    move = rng.choice(captures)
            p = p.apply_move(move, _validate=False)
            if ply >= skip_opening_plies and len(items) < count:
                items.append(LabeledPosition(emit_fen(p), material_win_prob(p)))
    rng.shuffle(items)
    return items[:count]


def write_dataset(items: list[LabeledPosition], path) -> None:
    """Write "FEN,win_prob" lines with the White-perspective label converted
    back to the side to move (the on-disk convention)."""
    from .board import WHITE, parse_fen

    with open(path, "w") as f:
        for item in items:
            side = parse_fen(item.fen).side
            prob = item.win_prob_white if side == WHITE else 1.0 - item.win_prob_white
            f.write(f"{item.fen},{prob:.10f}\n")
