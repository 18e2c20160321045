"""Latent-space planning: advantage-direction fitting and the bounded
top-W / depth-S min-max search over embedding scores.

Scores live on a White-is-positive scale; White picks the maximum child,
Black the minimum. A Zobrist-keyed transposition table caches per-position
scores (they are depth-independent) so repeated positions are not
re-encoded.
"""

from __future__ import annotations

import json
import time
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .board import WHITE, GameStatus, Move, Position, game_status
from .encoder import EncoderConfig, encode
from .tokens import tokenize_position

MODE_UNANCHORED = "unanchored"
MODE_ANCHORED = "anchored"
MODE_ANCHORED_RAW = "anchored_raw"
MODES = (MODE_UNANCHORED, MODE_ANCHORED, MODE_ANCHORED_RAW)

# Mate values must dominate any reachable embedding score.
MATE_MARGIN = 0.5

# Exact-extreme class selection for the advantage means; widened to this
# band when either extreme class is thinner than MIN_EXTREME_SAMPLES.
EXTREME_BAND = 0.01
MIN_EXTREME_SAMPLES = 100


class PlannerError(ValueError):
    pass


class SearchAborted(Exception):
    """Raised internally when a deadline expires mid-search."""


@dataclass
class AdvantageModel:
    """Class means of decisively-winning embeddings and the unit direction
    from the Black-winning mean to the White-winning mean."""

    mu_white: np.ndarray
    mu_black: np.ndarray
    direction: np.ndarray  # unit vector
    mode: str = MODE_UNANCHORED

    def __post_init__(self):
        if self.mode not in MODES:
            raise PlannerError(f"unknown scoring mode {self.mode!r}")

    @property
    def black_offset(self) -> float:
        """The constant <mu_black, direction> subtracted in raw anchored
        scoring; raw anchored scores are unanchored scores minus this."""
        return float(self.mu_black @ self.direction)

    def score(self, z: np.ndarray) -> float:
        """Scalar score of a unit embedding under the configured mode."""
        if self.mode == MODE_UNANCHORED:
            return float(z @ self.direction)
        shifted = z - self.mu_black
        if self.mode == MODE_ANCHORED_RAW:
            return float(shifted @ self.direction)
        norm = np.linalg.norm(shifted)
        if norm == 0.0:
            return 0.0
        return float(shifted @ self.direction) / norm

    def neutral_value(self) -> float:
        """Draw score: the midpoint of the mode's score range."""
        if self.mode == MODE_ANCHORED_RAW:
            return -self.black_offset
        return 0.0

    def mate_value(self, winner: int) -> float:
        v = (1.0 + MATE_MARGIN) * (1.0 if winner == WHITE else -1.0)
        if self.mode == MODE_ANCHORED_RAW:
            v -= self.black_offset
        return v

    def save(self, path) -> None:
        payload = {
            "dim": int(self.mu_white.shape[0]),
            "mode": self.mode,
            "mu_white": self.mu_white.tolist(),
            "mu_black": self.mu_black.tolist(),
        }
        with open(path, "w") as f:
            json.dump(payload, f)

    @classmethod
    def load(cls, path, mode: Optional[str] = None) -> "AdvantageModel":
        with open(path) as f:
            payload = json.load(f)
        mu_w = np.array(payload["mu_white"], dtype=np.float64)
        mu_b = np.array(payload["mu_black"], dtype=np.float64)
        return fit_from_means(mu_w, mu_b, mode or payload.get("mode", MODE_UNANCHORED))


def fit_from_means(mu_white, mu_black, mode: str = MODE_UNANCHORED) -> AdvantageModel:
    diff = np.asarray(mu_white, dtype=np.float64) - np.asarray(mu_black, dtype=np.float64)
    norm = np.linalg.norm(diff)
    if norm == 0.0:
        raise PlannerError("class means coincide; advantage direction undefined")
    return AdvantageModel(
        mu_white=np.asarray(mu_white, dtype=np.float64),
        mu_black=np.asarray(mu_black, dtype=np.float64),
        direction=diff / norm,
        mode=mode,
    )


def fit_advantage(
    embeddings: np.ndarray,
    probs,
    mode: str = MODE_UNANCHORED,
) -> AdvantageModel:
    """Fit class means from decisively-evaluated positions.

    Uses the exact extremes (p == 1.0 / p == 0.0); if either class has
    fewer than MIN_EXTREME_SAMPLES members, widens to a band of
    EXTREME_BAND around the extremes.
    """
    z = np.asarray(embeddings, dtype=np.float64)
    p = np.asarray(probs, dtype=np.float64)
    if z.shape[0] != p.shape[0]:
        raise PlannerError("embeddings and probabilities disagree in length")

    white_sel = p == 1.0
    black_sel = p == 0.0
    if white_sel.sum() < MIN_EXTREME_SAMPLES or black_sel.sum() < MIN_EXTREME_SAMPLES:
        white_sel = p >= 1.0 - EXTREME_BAND
        black_sel = p <= EXTREME_BAND
    if not white_sel.any() or not black_sel.any():
        raise PlannerError("no samples at either evaluation extreme")
    return fit_from_means(z[white_sel].mean(axis=0), z[black_sel].mean(axis=0), mode)


@dataclass
class SearchConfig:
    depth: int = 3
    width: int = 3
    mode: str = MODE_UNANCHORED
    use_tt: bool = True
    tt_capacity: int = 1 << 20

    def __post_init__(self):
        if self.depth < 1 or self.width < 1:
            raise PlannerError("depth and width must be positive")


@dataclass
class SearchReport:
    best_move: Optional[Move]
    root_score: float
    nodes_encoded: int
    tt_hits: int
    depth_completed: int = 0


def tt_key(p: Position) -> tuple[int, int, int]:
    """Cache key: Zobrist hash extended by the clocks. The hash alone
    ignores clocks, but the encoder tokenizes them, so clock-different
    transpositions can score differently and must not share an entry."""
    return (p.zobrist, p.halfmove_clock, p.fullmove_number)


class TranspositionTable:
    """Score cache keyed by tt_key with always-replace on capacity
    pressure. Cached scores are position properties (no depth field)."""

    def __init__(self, capacity: int):
        self.capacity = capacity
        self.table: dict[tuple, float] = {}
        self.hits = 0

    def get(self, key) -> Optional[float]:
        score = self.table.get(key)
        if score is not None:
            self.hits += 1
        return score

    def put(self, key, score: float) -> None:
        if len(self.table) >= self.capacity:
            self.table.pop(next(iter(self.table)))
        self.table[key] = score


class LatentPlanner:
    """Binds encoder weights and an advantage model into a move selector."""

    def __init__(
        self,
        params: dict,
        encoder_config: EncoderConfig,
        model: AdvantageModel,
    ):
        if model.mu_white.shape[0] != encoder_config.embed_dim:
            raise PlannerError("advantage model dimension mismatch with encoder")
        self.params = params
        self.encoder_config = encoder_config
        self.model = model

    def embed_positions(self, positions: list[Position]) -> np.ndarray:
        seqs = np.array([tokenize_position(p) for p in positions])
        return encode(self.params, self.encoder_config, seqs)

    def score_position(self, p: Position) -> float:
        return self.model.score(self.embed_positions([p])[0])

    def select_move(
        self,
        root: Position,
        config: SearchConfig,
        deadline: Optional[float] = None,
    ) -> SearchReport:
        """Top-W min-max search to the configured depth.

        All children of an expanded node are embedded in one batch and
        scored; the W best from the mover's perspective stay in the tree.
        `nodes_encoded` counts tree nodes (root plus retained children).
        With a deadline, expiry raises SearchAborted to the caller.
        """
        if config.mode != self.model.mode:
            model = fit_from_means(self.model.mu_white, self.model.mu_black, config.mode)
        else:
            model = self.model
        if game_status(root) != GameStatus.ONGOING:
            raise PlannerError("search called on a terminal position")

        tt = TranspositionTable(config.tt_capacity) if config.use_tt else None
        state = _SearchState(self, model, tt, deadline)
        state.nodes += 1  # root occupies the tree's level 0
        value, move = state.expand(root, config.depth, config.width)
        return SearchReport(
            best_move=move,
            root_score=value,
            nodes_encoded=state.nodes,
            tt_hits=tt.hits if tt else 0,
            depth_completed=config.depth,
        )

    def select_move_timed(
        self,
        root: Position,
        config: SearchConfig,
        movetime_s: float,
        max_depth: int = 6,
    ) -> SearchReport:
        """Anytime wrapper: iterative deepening 1..max_depth, returning the
        deepest fully completed result when the budget expires."""
        deadline = time.monotonic() + movetime_s
        best: Optional[SearchReport] = None
        for depth in range(1, max_depth + 1):
            cfg = SearchConfig(
                depth=depth, width=config.width, mode=config.mode,
                use_tt=config.use_tt, tt_capacity=config.tt_capacity,
            )
            try:
                report = self.select_move(root, cfg, deadline=deadline)
            except SearchAborted:
                break
            best = report
            if time.monotonic() >= deadline:
                break
        if best is None:
            # budget too small for even depth 1: fall back to the first
            # legal move so a move is always produced
            move = root.legal_moves()[0]
            best = SearchReport(best_move=move, root_score=0.0,
                                nodes_encoded=0, tt_hits=0, depth_completed=0)
        return best


@dataclass
class _SearchState:
    planner: LatentPlanner
    model: AdvantageModel
    tt: Optional[TranspositionTable]
    deadline: Optional[float]
    nodes: int = 0

    def check_deadline(self) -> None:
        if self.deadline is not None and time.monotonic() >= self.deadline:
            raise SearchAborted

    def scored_children(
        self, p: Position
    ) -> list[tuple[Move, Position, float, bool]]:
        """(move, child, score, is_terminal) for every legal move; embeds
        the non-terminal, non-cached children in one batch."""
        self.check_deadline()
        entries = []
        to_encode: list[int] = []
        positions: list[Position] = []
        for m in p.legal_moves():
            child = p.apply_move(m, _validate=False)
            status = game_status(child)
            if status != GameStatus.ONGOING:
                if status in GameStatus.DRAWS:
                    value = self.model.neutral_value()
                else:
                    winner = WHITE if status == GameStatus.WHITE_WINS else -WHITE
                    value = self.model.mate_value(winner)
                entries.append([m, child, value, True])
                continue
            cached = self.tt.get(tt_key(child)) if self.tt else None
            if cached is not None:
                entries.append([m, child, cached, False])
                continue
            entries.append([m, child, None, False])
            to_encode.append(len(entries) - 1)
            positions.append(child)
        if positions:
            zs = self.planner.embed_positions(positions)
            for idx, z in zip(to_encode, zs):
                score = self.model.score(z)
                entries[idx][2] = score
                if self.tt:
                    self.tt.put(tt_key(entries[idx][1]), score)
        return [tuple(e) for e in entries]

    def expand(
        self, p: Position, depth: int, width: int
    ) -> tuple[float, Optional[Move]]:
        """Backed-up value of `p` and the move starting the optimal line.

        Children are kept top-W by static score from the mover's
        perspective; kept non-terminal children are recursed until the
        depth budget is spent, at which point leaves keep their own score.
        """
        entries = self.scored_children(p)
        maximize = p.side == WHITE
        # stable sort keeps the lexicographic move order among score ties
        entries.sort(key=lambda e: -e[2] if maximize else e[2])
        kept = entries[:width]
        self.nodes += len(kept)

        best_value: Optional[float] = None
        best_move: Optional[Move] = None
        for move, child, score, is_terminal in kept:
            if is_terminal or depth <= 1:
                value = score
            else:
                value, _ = self.expand(child, depth - 1, width)
            if best_value is None or (
                value > best_value if maximize else value < best_value
            ):
                best_value, best_move = value, move
        return best_value, best_move
