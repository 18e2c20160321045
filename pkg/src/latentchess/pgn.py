"""PGN game records: SAN generation, movetext parsing, and seven-tag-roster
emission. Every parsed move is verified ply by ply against the rules core.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Optional

from .board import (
    BISHOP, KING, KNIGHT, PAWN, QUEEN, ROOK, WHITE,
    GameStatus, Move, Position, game_status, square_file, square_name, square_rank,
)

RESULT_TOKENS = ("1-0", "0-1", "1/2-1/2", "*")


class PgnError(ValueError):
    """Raised for unparseable movetext or illegal SAN."""


@dataclass
class GameRecord:
    """A finished (or in-progress) game as SAN moves plus outcome metadata."""

    san_moves: list[str] = field(default_factory=list)
    result: str = "*"
    termination: str = GameStatus.ONGOING
    node_counts: list[Optional[int]] = field(default_factory=list)

    def positions(self) -> list[Position]:
        """Every position of the game, starting from the initial position."""
        p = Position.startpos()
        out = [p]
        for ply, san in enumerate(self.san_moves):
            p = p.apply_move(parse_san(p, san), _validate=False)
            out.append(p)
        return out


def san(p: Position, m: Move) -> str:
    """Standard Algebraic Notation for a legal move in `p`."""
    legal = p.legal_moves()
    if m not in legal:
        raise PgnError(f"move {m.uci()} not legal here")
    piece = abs(p.piece_at(m.from_sq))

    if piece == KING and abs(m.to_sq - m.from_sq) == 2:
        text = "O-O" if m.to_sq > m.from_sq else "O-O-O"
    else:
        is_capture = p.piece_at(m.to_sq) != 0 or (
            piece == PAWN and m.to_sq == p.ep_square
        )
        if piece == PAWN:
            text = ""
            if is_capture:
                text += "abcdefgh"[square_file(m.from_sq)] + "x"
            text += square_name(m.to_sq)
            if m.promotion:
                text += "=" + "  NBRQ"[m.promotion].strip()
        else:
            text = "PNBRQK"[piece - 1]
            text += _disambiguation(p, m, legal)
            if is_capture:
                text += "x"
            text += square_name(m.to_sq)

    child = p.apply_move(m, _validate=False)
    if child.in_check():
        text += "#" if not child.legal_moves() else "+"
    return text


def _disambiguation(p: Position, m: Move, legal: list[Move]) -> str:
    piece = p.piece_at(m.from_sq)
    rivals = [
        x for x in legal
        if x.to_sq == m.to_sq and x.from_sq != m.from_sq
        and p.piece_at(x.from_sq) == piece
    ]
    if not rivals:
        return ""
    same_file = any(square_file(x.from_sq) == square_file(m.from_sq) for x in rivals)
    same_rank = any(square_rank(x.from_sq) == square_rank(m.from_sq) for x in rivals)
    if not same_file:
        return "abcdefgh"[square_file(m.from_sq)]
    if not same_rank:
        return "12345678"[square_rank(m.from_sq)]
    return square_name(m.from_sq)


def parse_san(p: Position, text: str) -> Move:
    """Resolve a SAN token to the legal move it denotes.

    Tolerant of optional check/mate suffixes and of missing/extra
    disambiguation as long as the move is unique.
    """
    token = text.rstrip("+#!?").replace("0-0-0", "O-O-O").replace("0-0", "O-O")
    matches = [m for m in p.legal_moves() if _san_matches(p, m, token)]
    if len(matches) == 1:
        return matches[0]
    if not matches:
        raise PgnError(f"illegal SAN {text!r} in {p.fullmove_number}. (no match)")
    raise PgnError(f"ambiguous SAN {text!r}")


def _san_matches(p: Position, m: Move, token: str) -> bool:
    canonical = san(p, m).rstrip("+#")
    if canonical == token:
        return True
    # accept under- or over-disambiguated piece moves, e.g. Ngf3 for Nf3
    piece = abs(p.piece_at(m.from_sq))
    if piece == PAWN or canonical.startswith("O"):
        return False
    pattern = (
        "PNBRQK"[piece - 1]
        + "([a-h]?[1-8]?)(x?)"
        + square_name(m.to_sq)
        + ("=" + "  NBRQ"[m.promotion].strip() if m.promotion else "")
        + "$"
    )
    mt = re.match(pattern, token)
    if not mt:
        return False
    hint = mt.group(1)
    from_name = square_name(m.from_sq)
    return all(c in from_name for c in hint)


# Movetext ------------------------------------------------------------------

_TAG_RE = re.compile(r'^\s*\[(\w+)\s+"(.*)"\]\s*$')


def parse_pgn(text: str) -> tuple[GameRecord, dict[str, str]]:
    """Parse one PGN game (tags + movetext), replaying every SAN legally."""
    tags: dict[str, str] = {}
    movetext_lines = []
    for line in text.splitlines():
        tag = _TAG_RE.match(line)
        if tag:
            tags[tag.group(1)] = tag.group(2)
        elif line.strip() and not line.strip().startswith("%"):
            movetext_lines.append(line.strip())
    movetext = " ".join(movetext_lines)
    movetext = re.sub(r"\{[^}]*\}", " ", movetext)  # strip comments
    movetext = re.sub(r";[^\n]*", " ", movetext)

    record = GameRecord()
    p = Position.startpos()
    history = [p.zobrist]
    result = "*"
    for raw in movetext.split():
        if raw in RESULT_TOKENS:
            result = raw
            break
        token = re.sub(r"^\d+\.+", "", raw)  # strip move numbers like "12." / "12..."
        if not token or token == "...":
            continue
        try:
            move = parse_san(p, token)
        except PgnError as e:
            raise PgnError(f"ply {len(record.san_moves) + 1}: {e}") from e
        record.san_moves.append(san(p, move))
        p = p.apply_move(move, _validate=False)
        history.append(p.zobrist)

    record.result = result
    record.termination = game_status(p, history)
    return record, tags


def emit_pgn(record: GameRecord, tags: Optional[dict[str, str]] = None) -> str:
    """Seven-tag-roster PGN with 80-column-wrapped SAN movetext."""
    tags = dict(tags or {})
    roster = ["Event", "Site", "Date", "Round", "White", "Black", "Result"]
    defaults = {
        "Event": "?", "Site": "?", "Date": "????.??.??", "Round": "?",
        "White": "?", "Black": "?", "Result": record.result,
    }
    lines = []
    for key in roster:
        lines.append(f'[{key} "{tags.pop(key, defaults[key])}"]')
    for key in sorted(tags):
        lines.append(f'[{key} "{tags[key]}"]')
    lines.append("")

    tokens = []
    for ply, move in enumerate(record.san_moves):
        if ply % 2 == 0:
            tokens.append(f"{ply // 2 + 1}.")
        tokens.append(move)
    tokens.append(record.result)

    line = ""
    for token in tokens:
        if line and len(line) + 1 + len(token) > 80:
            lines.append(line)
            line = token
        else:
            line = f"{line} {token}".strip()
    lines.append(line)
    lines.append("")
    return "\n".join(lines)


def play_san_line(sans: list[str]) -> Position:
    """Apply a SAN sequence from the start position, returning the end state."""
    p = Position.startpos()
    for s in sans:
        p = p.apply_move(parse_san(p, s), _validate=False)
    return p
