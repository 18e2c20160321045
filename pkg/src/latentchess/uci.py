"""UCI protocol server over line-oriented text streams.

Never crashes on malformed input: anything unparseable is acknowledged
with an "info string" diagnostic and otherwise ignored, per UCI custom.
"""

from __future__ import annotations

import sys
from dataclasses import dataclass, field
from typing import Optional, TextIO

import numpy as np

from .board import FenError, GameStatus, Move, Position, game_status, parse_fen
from .encoder import EncoderConfig, init_params, load_checkpoint
from .planner import (
    MODES, AdvantageModel, LatentPlanner, PlannerError, SearchConfig,
    fit_from_means,
)

ENGINE_NAME = "LatentChess"
ENGINE_AUTHOR = "latentchess contributors"

# Wall-clock slack reserved inside a movetime budget for emitting the move.
MOVETIME_RESERVE_S = 0.015

FALLBACK_CONFIG = EncoderConfig(layers=1, embed_dim=16, heads=2, mlp_size=32)
FALLBACK_SEED = 0xC0FFEE


def fallback_planner() -> LatentPlanner:
    """Deterministic stand-in planner (seeded random weights) so the engine
    always produces legal moves even before a trained model is loaded."""
    params = init_params(FALLBACK_CONFIG, FALLBACK_SEED)
    rng = np.random.default_rng(FALLBACK_SEED)
    direction = rng.normal(size=FALLBACK_CONFIG.embed_dim)
    direction /= np.linalg.norm(direction)
    model = fit_from_means(direction, -direction)
    return LatentPlanner(params, FALLBACK_CONFIG, model)


def load_planner(model_path: str, mode: str) -> LatentPlanner:
    """Load an encoder checkpoint plus its sibling advantage file
    (`<model_path>.adv`)."""
    config, params = load_checkpoint(model_path)
    model = AdvantageModel.load(model_path + ".adv", mode=mode)
    return LatentPlanner(params, config, model)


@dataclass
class UciSession:
    """One engine session: current position, loaded model, search options."""

    out: TextIO = sys.stdout
    position: Position = field(default_factory=Position.startpos)
    planner: Optional[LatentPlanner] = None
    width: int = 3
    depth: int = 3
    mode: str = "unanchored"
    model_path: Optional[str] = None
    running: bool = True

    def send(self, line: str) -> None:
        self.out.write(line + "\n")
        self.out.flush()

    def info(self, message: str) -> None:
        self.send(f"info string {message}")

    def _planner(self) -> LatentPlanner:
        if self.planner is None:
            self.planner = fallback_planner()
        return self.planner

    # -- command handling --------------------------------------------------

    def handle_line(self, line: str) -> None:
        try:
            self._dispatch(line.strip())
        except Exception as e:  # protocol contract: never crash the loop
            self.info(f"error: {type(e).__name__}: {e}")

    def _dispatch(self, line: str) -> None:
        if not line:
            return
        parts = line.split()
        cmd = parts[0]
        if cmd == "uci":
            self.send(f"id name {ENGINE_NAME}")
            self.send(f"id author {ENGINE_AUTHOR}")
            self.send("option name Width type spin default 3 min 1 max 64")
            self.send("option name Depth type spin default 3 min 1 max 10")
            self.send(
                "option name Mode type combo default unanchored "
                + " ".join(f"var {m}" for m in MODES)
            )
            self.send("option name ModelPath type string default <empty>")
            self.send("uciok")
        elif cmd == "isready":
            self.send("readyok")
        elif cmd == "ucinewgame":
            self.position = Position.startpos()
        elif cmd == "setoption":
            self._setoption(parts[1:])
        elif cmd == "position":
            self._position(parts[1:])
        elif cmd == "go":
            self._go(parts[1:])
        elif cmd == "stop":
            pass  # searches are synchronous; nothing in flight by now
        elif cmd == "quit":
            self.running = False
        else:
            self.info(f"unknown command: {cmd}")

    def _setoption(self, args: list[str]) -> None:
        if len(args) < 2 or args[0] != "name":
            self.info("malformed setoption")
            return
        try:
            value_at = args.index("value")
            name = " ".join(args[1:value_at]).lower()
            value = " ".join(args[value_at + 1:])
        except ValueError:
            name = " ".join(args[1:]).lower()
            value = ""
        if name == "width":
            self.width = min(64, max(1, int(value)))
        elif name == "depth":
            self.depth = min(10, max(1, int(value)))
        elif name == "mode":
            if value not in MODES:
                self.info(f"unknown mode {value!r}")
                return
            self.mode = value
            if self.model_path:
                self.planner = load_planner(self.model_path, self.mode)
        elif name == "modelpath":
            self.planner = load_planner(value, self.mode)
            self.model_path = value
        else:
            self.info(f"unknown option {name!r}")

    def _position(self, args: list[str]) -> None:
        if not args:
            self.info("malformed position command")
            return
        if args[0] == "startpos":
            p = Position.startpos()
            rest = args[1:]
        elif args[0] == "fen":
            fen_fields = args[1:7]
            if len(fen_fields) != 6:
                self.info("position fen needs 6 fields")
                return
            try:
                p = parse_fen(" ".join(fen_fields))
            except FenError as e:
                self.info(f"bad fen: {e}")
                return
            rest = args[7:]
        else:
            self.info("position expects 'startpos' or 'fen'")
            return

        if rest and rest[0] == "moves":
            for text in rest[1:]:
                try:
                    move = Move.from_uci(text)
                except ValueError as e:
                    self.info(f"bad move {text!r}: {e}")
                    return
                if move not in p.legal_moves():
                    self.info(f"illegal move {text!r} ignored with remainder")
                    return
                p = p.apply_move(move, _validate=False)
        self.position = p

    def _go(self, args: list[str]) -> None:
        depth = self.depth
        movetime_ms: Optional[int] = None
        it = iter(args)
        for token in it:
            if token == "depth":
                depth = min(10, max(1, int(next(it, "1"))))
            elif token == "movetime":
                movetime_ms = max(1, int(next(it, "1")))
            elif token in ("wtime", "btime", "winc", "binc", "movestogo", "nodes"):
                next(it, None)  # recognized but unused

        if game_status(self.position) != GameStatus.ONGOING:
            self.send("bestmove 0000")
            return
        planner = self._planner()
        config = SearchConfig(depth=depth, width=self.width, mode=self.mode)
        try:
            if movetime_ms is not None:
                budget = max(0.001, movetime_ms / 1000.0 - MOVETIME_RESERVE_S)
                report = planner.select_move_timed(
                    self.position, config, budget, max_depth=depth
                )
            else:
                report = planner.select_move(self.position, config)
        except PlannerError as e:
            self.info(f"search failed: {e}")
            self.send("bestmove 0000")
            return
        self.send(
            f"info depth {report.depth_completed} score cp "
            f"{int(report.root_score * 100)} nodes {report.nodes_encoded}"
        )
        self.send(f"bestmove {report.best_move.uci()}")


def uci_loop(stdin: TextIO = sys.stdin, stdout: TextIO = sys.stdout) -> None:
    """Serve UCI until 'quit' or EOF."""
    session = UciSession(out=stdout)
    for line in stdin:
        session.handle_line(line)
        if not session.running:
            break
