"""Match-harness tests: self-play against our own engine run as a real UCI
subprocess, plus forfeit handling against scripted misbehaving opponents.
"""

import sys
import textwrap

import pytest

from latentchess.board import GameStatus
from latentchess.elo import MatchTally
from latentchess.match import (
    MatchConfig,
    MatchResult,
    OpponentError,
    UciClient,
    run_match,
    tally_csv_row,
    write_match_artifacts,
)
from latentchess.pgn import parse_pgn
from latentchess.uci import fallback_planner

ENGINE_CMD = f"{sys.executable} -m latentchess uci"


def fake_engine(tmp_path, body):
    """Write a tiny scripted UCI opponent and return its launch command."""
    script = tmp_path / "opponent.py"
    script.write_text(textwrap.dedent(body))
    return f"{sys.executable} -u {script}"


CRASHING_OPPONENT = """
    import sys
    for line in sys.stdin:
        line = line.strip()
        if line == "uci":
            print("id name crasher", flush=True)
            print("uciok", flush=True)
        elif line == "isready":
            print("readyok", flush=True)
        elif line.startswith("go"):
            sys.exit(3)
"""

ILLEGAL_OPPONENT = """
    import sys
    for line in sys.stdin:
        line = line.strip()
        if line == "uci":
            print("uciok", flush=True)
        elif line == "isready":
            print("readyok", flush=True)
        elif line.startswith("go"):
            print("bestmove e2e5", flush=True)
        elif line == "quit":
            break
"""


class TestConfig:
    def test_alternation_requires_even_games(self):
        with pytest.raises(ValueError):
            MatchConfig(games=3, alternate_colors=True)
        MatchConfig(games=3, alternate_colors=False)

    def test_game_count_positive(self):
        with pytest.raises(ValueError):
            MatchConfig(games=0)


class TestSelfPlay:
    def test_two_game_match_conserves_points(self, tmp_path):
        config = MatchConfig(
            games=2,
            depth=1,
            width=2,
            opponent_command=ENGINE_CMD,
            opponent_options={"Depth": "1", "Width": "2"},
            opponent_go="go depth 1",
            max_plies=120,
        )
        result = run_match(fallback_planner(), config)
        assert result.tally.games == 2
        assert 0.0 <= result.points() <= 2.0
        for record in result.records:
            assert record.result in ("1-0", "0-1", "1/2-1/2")
            # every game replays legally from its own SAN record
            assert len(record.positions()) == len(record.san_moves) + 1

        pgn_path = tmp_path / "match.pgn"
        tally_path = tmp_path / "tally.csv"
        write_match_artifacts(result, pgn_path, tally_path, "selfplay")
        games = [g for g in pgn_path.read_text().split("\n\n\n") if g.strip()]
        first, tags = parse_pgn(games[0])
        assert tags["Event"] == "selfplay"
        assert first.san_moves == result.records[0].san_moves
        assert "selfplay," in tally_path.read_text()


class TestForfeits:
    def test_opponent_crash_forfeits_to_us(self, tmp_path):
        config = MatchConfig(
            games=1,
            alternate_colors=False,
            depth=1,
            width=1,
            opponent_command=fake_engine(tmp_path, CRASHING_OPPONENT),
        )
        result = run_match(fallback_planner(), config)
        assert result.tally.wins == 1
        assert result.records[0].termination == "opponent_forfeit"

    def test_illegal_opponent_move_forfeits_to_us(self, tmp_path):
        config = MatchConfig(
            games=1,
            alternate_colors=False,
            depth=1,
            width=1,
            opponent_command=fake_engine(tmp_path, ILLEGAL_OPPONENT),
        )
        result = run_match(fallback_planner(), config)
        assert result.tally.wins == 1
        assert result.records[0].termination == "illegal_move"


class TestClient:
    def test_handshake_and_bestmove_round_trip(self):
        client = UciClient(ENGINE_CMD, options={"Depth": "1"})
        try:
            move = client.bestmove("position startpos", "go depth 1")
            assert len(move) in (4, 5)
        finally:
            client.quit()

    def test_protocol_timeout_raises(self, tmp_path):
        silent = fake_engine(
            tmp_path,
            """
            import sys, time
            for line in sys.stdin:
                if line.strip() == "uci":
                    print("uciok", flush=True)
                elif line.strip() == "isready":
                    print("readyok", flush=True)
                # never answers "go"
            """,
        )
        client = UciClient(silent, timeout=1.0)
        client.timeout = 1.0
        try:
            with pytest.raises(OpponentError):
                client.bestmove("position startpos", "go depth 1")
        finally:
            client.quit()


def test_tally_csv_row_format():
    row = tally_csv_row("depth3", MatchTally(wins=5, draws=3, losses=2))
    assert row == "depth3,5--3--2 (6.5)"
