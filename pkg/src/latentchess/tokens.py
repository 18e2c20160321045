"""Fixed-length tokenization of FEN strings for the encoder.

Layout (77 slots total, deterministic):
    64  board squares, rank 8 -> 1, file a -> h, '.' for empty
     1  side to move ('w'/'b')
     4  castling rights in KQkq order, '.'-padded
     2  en passant square ('-' padded as '..')
     3  halfmove clock digits, left-padded with '0'
     3  fullmove number digits, left-padded with '0'

The CLS token is prepended by the encoder, not by `tokenize`.
"""

from __future__ import annotations

from .board import (
    CASTLE_BK, CASTLE_BQ, CASTLE_WK, CASTLE_WQ, PIECE_CHARS, WHITE,
    Position, parse_fen, square, square_name,
)

SEQ_LEN = 77

_CHARS = (
    list("PNBRQKpnbrqk")  # pieces (k/q double as castling letters, b as side/file)
    + ["."]               # empty square / padding
    + list("0123456789")  # clock digits
    + ["w"]               # side to move ('b' is already a piece letter)
    + list("acdefgh")     # remaining ep file letters
)
CLS = "<cls>"
_TOKENS = _CHARS + [CLS]

TOKEN_TO_ID = {t: i for i, t in enumerate(_TOKENS)}
ID_TO_TOKEN = dict(enumerate(_TOKENS))
VOCAB_SIZE = len(_TOKENS)
CLS_ID = TOKEN_TO_ID[CLS]


class TokenError(ValueError):
    """Raised for sequences that violate the tokenization layout."""


def tokenize_position(p: Position) -> list[int]:
    chars: list[str] = []
    for rank in range(7, -1, -1):
        for file in range(8):
            piece = p.board[square(file, rank)]
            if piece == 0:
                chars.append(".")
            else:
                ch = PIECE_CHARS[abs(piece)]
                chars.append(ch if piece > 0 else ch.lower())
    chars.append("w" if p.side == WHITE else "b")
    for flag, ch in ((CASTLE_WK, "K"), (CASTLE_WQ, "Q"), (CASTLE_BK, "k"), (CASTLE_BQ, "q")):
        chars.append(ch if p.castling & flag else ".")
    if p.ep_square is None:
        chars.extend("..")
    else:
        chars.extend(square_name(p.ep_square))
    for clock in (p.halfmove_clock, p.fullmove_number):
        if clock > 999:
            raise TokenError(f"clock value {clock} exceeds 3 digits")
        chars.extend(f"{clock:03d}")
    assert len(chars) == SEQ_LEN
    return [TOKEN_TO_ID[c] for c in chars]


def tokenize(fen: str) -> list[int]:
    """Tokenize a FEN into the fixed 77-token sequence."""
    return tokenize_position(parse_fen(fen))


def detokenize(token_ids: list[int]) -> str:
    """Reconstruct the canonical FEN a token sequence encodes."""
    if len(token_ids) != SEQ_LEN:
        raise TokenError(f"expected {SEQ_LEN} tokens, got {len(token_ids)}")
    try:
        chars = [ID_TO_TOKEN[i] for i in token_ids]
    except KeyError as e:
        raise TokenError(f"unknown token id {e}") from None
    if CLS in chars:
        raise TokenError("CLS id inside a tokenized sequence")

    board_chars = chars[:64]
    rows = []
    for rank_idx in range(8):
        row = ""
        run = 0
        for ch in board_chars[rank_idx * 8: rank_idx * 8 + 8]:
            if ch == ".":
                run += 1
            elif ch in "PNBRQKpnbrqk":
                if run:
                    row += str(run)
                    run = 0
                row += ch
            else:
                raise TokenError(f"non-piece token {ch!r} in board field")
        if run:
            row += str(run)
        rows.append(row)

    side = chars[64]
    if side not in "wb":
        raise TokenError(f"bad side token {side!r}")
    castling = "".join(c for c in chars[65:69] if c != ".") or "-"
    ep = "".join(chars[69:71])
    ep_field = "-" if ep == ".." else ep
    try:
        halfmove = str(int("".join(chars[71:74])))
        fullmove = str(int("".join(chars[74:77])))
    except ValueError:
        raise TokenError("non-digit token in a clock field") from None
    return " ".join(["/".join(rows), side, castling, ep_field, halfmove, fullmove])
