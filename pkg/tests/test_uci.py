"""UCI session tests driven through an in-process text transcript."""

import io
import random
import time

import pytest

from latentchess.board import GameStatus, Move, Position, game_status
from latentchess.uci import ENGINE_NAME, UciSession


def session():
    return UciSession(out=io.StringIO())


def run(s, *lines):
    mark = s.out.tell()
    for line in lines:
        s.handle_line(line)
    s.out.seek(mark)
    return s.out.read().splitlines()


def bestmove_of(lines):
    for line in lines:
        if line.startswith("bestmove"):
            return line.split()[1]
    raise AssertionError(f"no bestmove in {lines!r}")


class TestHandshake:
    def test_uci_identifies_and_finishes_with_uciok(self):
        lines = run(session(), "uci")
        assert lines[0] == f"id name {ENGINE_NAME}"
        assert lines[-1] == "uciok"
        assert any(l.startswith("option name Width") for l in lines)
        assert any(l.startswith("option name ModelPath") for l in lines)

    def test_isready(self):
        assert run(session(), "isready") == ["readyok"]

    def test_quit_stops_the_session(self):
        s = session()
        run(s, "quit")
        assert not s.running


class TestPosition:
    def test_startpos_with_moves(self):
        s = session()
        run(s, "position startpos moves e2e4 e7e5")
        assert s.position.fullmove_number == 2

    def test_fen_setup(self):
        s = session()
        run(s, "position fen k7/8/8/8/8/8/8/KR6 w - - 4 30")
        assert s.position.halfmove_clock == 4

    def test_illegal_move_in_list_is_reported_not_fatal(self):
        s = session()
        lines = run(s, "position startpos moves e2e5")
        assert any("illegal move" in l for l in lines)
        assert s.position == Position.startpos()

    def test_bad_fen_is_reported_not_fatal(self):
        lines = run(session(), "position fen this is not a fen at all")
        assert any(l.startswith("info string") for l in lines)


class TestGo:
    def test_go_depth_returns_legal_bestmove(self):
        s = session()
        lines = run(s, "position startpos", "go depth 2")
        move = Move.from_uci(bestmove_of(lines))
        assert move in Position.startpos().legal_moves()

    def test_go_on_terminal_position_returns_null_move(self):
        s = session()
        lines = run(s, "position fen k7/8/8/8/8/8/R7/1R5K b - - 0 1", "go depth 1")
        assert bestmove_of(lines) == "0000"

    def test_movetime_is_respected_within_tolerance(self):
        s = session()
        run(s, "position startpos")
        start = time.monotonic()
        lines = run(s, "go movetime 50")
        elapsed = time.monotonic() - start
        assert elapsed < 0.050 + 0.020
        assert Move.from_uci(bestmove_of(lines)) in Position.startpos().legal_moves()

    def test_emitted_moves_stay_legal_over_scripted_games(self):
        rng = random.Random(77)
        s = session()
        for _ in range(5):
            run(s, "ucinewgame")
            moves: list[str] = []
            for _ in range(40):
                if game_status(s.position) != GameStatus.ONGOING:
                    break
                lines = run(
                    s, "position startpos" + (" moves " + " ".join(moves) if moves else ""),
                    "go depth 1",
                )
                text = bestmove_of(lines)
                assert Move.from_uci(text) in s.position.legal_moves()
                moves.append(text)
                # opponent plays a random legal reply through the same channel
                after = s.position.apply_move(Move.from_uci(text))
                if game_status(after) != GameStatus.ONGOING:
                    break
                moves.append(rng.choice(after.legal_moves()).uci())


class TestOptions:
    def test_width_and_depth_options(self):
        s = session()
        run(s, "setoption name Width value 2", "setoption name Depth value 1")
        assert s.width == 2 and s.depth == 1

    def test_mode_option_validates(self):
        s = session()
        run(s, "setoption name Mode value anchored")
        assert s.mode == "anchored"
        lines = run(s, "setoption name Mode value nonsense")
        assert any("unknown mode" in l for l in lines)
        assert s.mode == "anchored"

    def test_unknown_option_is_reported(self):
        lines = run(session(), "setoption name Sideways value 9")
        assert any("unknown option" in l for l in lines)


class TestRobustness:
    def test_unknown_command_is_acknowledged(self):
        lines = run(session(), "flibbertigibbet")
        assert any("unknown command" in l for l in lines)

    def test_fuzzed_lines_never_crash(self):
        rng = random.Random(123)
        vocab = [
            "uci", "isready", "position", "go", "setoption", "name", "value",
            "startpos", "fen", "moves", "depth", "movetime", "stop", "e2e4",
            "0000", "-5", "99999999999999999999", "K7/8", "\x00", "🜍", "",
            '"', "\\", "None", "nan", "%", "..", "\t",
        ]
        s = session()
        for _ in range(10_000):
            n = rng.randint(0, 6)
            line = " ".join(rng.choice(vocab) for _ in range(n))
            if line.split()[:1] == ["go"]:
                # cap the search budget so the fuzz loop stays fast; the
                # point here is parser robustness, not search behavior
                line = "go movetime 1"
            s.handle_line(line)
        assert run(s, "isready") == ["readyok"]
