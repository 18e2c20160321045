"""Engine-vs-engine match runner: drives an external UCI opponent over
spawned-process stdio, plays games to adjudicated termination, and records
PGN plus win-draw-loss tallies.
"""

from __future__ import annotations

import logging
import queue
import shlex
import subprocess
import threading
from dataclasses import dataclass, field
from typing import Optional

from .board import BLACK, WHITE, GameStatus, Move, Position, game_status
from .elo import MatchTally
from .pgn import GameRecord, emit_pgn, san
from .planner import LatentPlanner, SearchConfig

log = logging.getLogger(__name__)

PROTOCOL_TIMEOUT_S = 10.0
MAX_PLIES = 400


class OpponentError(RuntimeError):
    """Opponent process failed the protocol (crash, timeout, bad output)."""


class UciClient:
    """Minimal UCI driver for an external engine subprocess."""

    def __init__(self, command: str, options: Optional[dict[str, str]] = None,
                 timeout: float = PROTOCOL_TIMEOUT_S):
        self.timeout = timeout
        self.proc = subprocess.Popen(
            shlex.split(command),
            stdin=subprocess.PIPE,
            stdout=subprocess.PIPE,
            stderr=subprocess.DEVNULL,
            text=True,
            bufsize=1,
        )
        self._lines: queue.Queue[Optional[str]] = queue.Queue()
        self._reader = threading.Thread(target=self._pump, daemon=True)
        self._reader.start()
        self.last_nodes: Optional[int] = None

        self._send("uci")
        self._wait_for("uciok")
        for name, value in (options or {}).items():
            self._send(f"setoption name {name} value {value}")
        self._send("isready")
        self._wait_for("readyok")

    def _pump(self) -> None:
        try:
            for line in self.proc.stdout:
                self._lines.put(line.rstrip("\n"))
        finally:
            self._lines.put(None)

    def _send(self, line: str) -> None:
        if self.proc.poll() is not None:
            raise OpponentError("opponent process exited")
        try:
            self.proc.stdin.write(line + "\n")
            self.proc.stdin.flush()
        except (BrokenPipeError, OSError) as e:
            raise OpponentError(f"opponent pipe broken: {e}") from e

    def _read_line(self) -> str:
        try:
            line = self._lines.get(timeout=self.timeout)
        except queue.Empty:
            raise OpponentError("opponent timed out") from None
        if line is None:
            raise OpponentError("opponent closed its output")
        return line

    def _wait_for(self, token: str) -> None:
        while True:
            if self._read_line().split() [:1] == [token]:
                return

    def bestmove(self, position_cmd: str, go_cmd: str) -> str:
        """Issue position + go, returning the bestmove token; records the
        last reported node count from info lines."""
        self.last_nodes = None
        self._send(position_cmd)
        self._send(go_cmd)
        while True:
            parts = self._read_line().split()
            if not parts:
                continue
            if parts[0] == "info" and "nodes" in parts:
                try:
                    self.last_nodes = int(parts[parts.index("nodes") + 1])
                except (IndexError, ValueError):
                    pass
            elif parts[0] == "bestmove":
                if len(parts) < 2:
                    raise OpponentError("bestmove without a move")
                return parts[1]

    def quit(self) -> None:
        try:
            self._send("quit")
            self.proc.wait(timeout=2.0)
        except (OpponentError, subprocess.TimeoutExpired):
            self.proc.kill()


@dataclass
class MatchConfig:
    games: int = 2
    alternate_colors: bool = True
    depth: int = 3
    width: int = 3
    mode: str = "unanchored"
    opponent_command: str = ""
    opponent_options: dict[str, str] = field(default_factory=dict)
    opponent_go: str = "go depth 3"
    movetime_ms: Optional[int] = None  # use timed search for our side if set
    max_plies: int = MAX_PLIES

    def __post_init__(self):
        if self.games < 1:
            raise ValueError("games must be >= 1")
        if self.alternate_colors and self.games % 2 != 0:
            raise ValueError("alternating colors needs an even game count")


@dataclass
class MatchResult:
    tally: MatchTally
    records: list[GameRecord]

    def points(self) -> float:
        return self.tally.points


def _our_move(planner: LatentPlanner, p: Position, config: MatchConfig) -> tuple[Move, int]:
    search = SearchConfig(depth=config.depth, width=config.width, mode=config.mode)
    if config.movetime_ms is not None:
        report = planner.select_move_timed(
            p, search, config.movetime_ms / 1000.0, max_depth=config.depth
        )
    else:
        report = planner.select_move(p, search)
    return report.best_move, report.nodes_encoded


def play_game(
    planner: LatentPlanner,
    opponent: UciClient,
    config: MatchConfig,
    our_side: int,
) -> tuple[GameRecord, float]:
    """Play one game; returns the record and our score (1 / 0.5 / 0).

    Draws are claimed automatically at threefold or the fifty-move rule;
    games hitting the ply cap are adjudicated drawn. An illegal opponent
    move or an opponent crash forfeits the game to us.
    """
    p = Position.startpos()
    history = [p.zobrist]
    record = GameRecord()
    uci_moves: list[str] = []

    while True:
        status = game_status(p, history)
        if status != GameStatus.ONGOING:
            record.termination = status
            break
        if len(record.san_moves) >= config.max_plies:
            record.termination = "draw_adjudicated_maxply"
            break

        if p.side == our_side:
            move, nodes = _our_move(planner, p, config)
            record.node_counts.append(nodes)
        else:
            position_cmd = "position startpos"
            if uci_moves:
                position_cmd += " moves " + " ".join(uci_moves)
            try:
                reply = opponent.bestmove(position_cmd, config.opponent_go)
                move = Move.from_uci(reply)
            except (OpponentError, ValueError) as e:
                log.warning("opponent failed: %s", e)
                record.termination = "opponent_forfeit"
                record.result = "1-0" if our_side == WHITE else "0-1"
                return record, 1.0
            if move not in p.legal_moves():
                log.warning("opponent played illegal move %s", reply)
                record.termination = "illegal_move"
                record.result = "1-0" if our_side == WHITE else "0-1"
                return record, 1.0
            record.node_counts.append(opponent.last_nodes)

        record.san_moves.append(san(p, move))
        uci_moves.append(move.uci())
        p = p.apply_move(move, _validate=False)
        history.append(p.zobrist)

    if record.termination == GameStatus.WHITE_WINS:
        record.result = "1-0"
        score = 1.0 if our_side == WHITE else 0.0
    elif record.termination == GameStatus.BLACK_WINS:
        record.result = "0-1"
        score = 1.0 if our_side == BLACK else 0.0
    else:
        record.result = "1/2-1/2"
        score = 0.5
    return record, score


def run_match(planner: LatentPlanner, config: MatchConfig) -> MatchResult:
    """Play a match against the configured opponent command."""
    wins = draws = losses = 0
    records: list[GameRecord] = []
    opponent = UciClient(config.opponent_command, config.opponent_options)
    try:
        for game_idx in range(config.games):
            our_side = WHITE
            if config.alternate_colors and game_idx % 2 == 1:
                our_side = BLACK
            record, score = play_game(planner, opponent, config, our_side)
            records.append(record)
            if score == 1.0:
                wins += 1
            elif score == 0.0:
                losses += 1
            else:
                draws += 1
            log.info(
                "game %d: %s (%s), running tally %d-%d-%d",
                game_idx + 1, record.result, record.termination,
                wins, draws, losses,
            )
    finally:
        opponent.quit()
    return MatchResult(tally=MatchTally(wins, draws, losses), records=records)


def tally_csv_row(label: str, tally: MatchTally) -> str:
    """One result cell in "W--D--L (points)" form, prefixed by its label."""
    points = tally.points
    points_text = f"{points:g}"
    return f"{label},{tally.wins}--{tally.draws}--{tally.losses} ({points_text})"


def write_match_artifacts(result: MatchResult, pgn_path, tally_path, label: str) -> None:
    with open(pgn_path, "w") as f:
        for idx, record in enumerate(result.records):
            f.write(emit_pgn(record, {"Event": label, "Round": str(idx + 1)}))
            f.write("\n")
    with open(tally_path, "w") as f:
        f.write("configuration,result\n")
        f.write(tally_csv_row(label, result.tally) + "\n")
