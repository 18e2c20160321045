"""Chess rules core: position state, FEN round-trip, legal move generation,
termination detection, and incremental Zobrist hashing.

Squares are indexed 0..63 with a1=0, b1=1, ..., h8=63 (rank-major from
White's perspective). Pieces are signed ints: positive for White, negative
for Black; absolute values follow PAWN..KING below.
"""

from __future__ import annotations

import random
from dataclasses import dataclass
from typing import Iterable, Optional

EMPTY = 0
PAWN, KNIGHT, BISHOP, ROOK, QUEEN, KING = 1, 2, 3, 4, 5, 6

WHITE = 1
BLACK = -1

PIECE_CHARS = {
    PAWN: "P", KNIGHT: "N", BISHOP: "B", ROOK: "R", QUEEN: "Q", KING: "K",
}
CHAR_PIECES = {}
for _val, _ch in PIECE_CHARS.items():
    CHAR_PIECES[_ch] = _val
    CHAR_PIECES[_ch.lower()] = -_val

CASTLE_WK, CASTLE_WQ, CASTLE_BK, CASTLE_BQ = 1, 2, 4, 8

STARTPOS_FEN = "rnbqkbnr/pppppppp/8/8/8/8/PPPPPPPP/RNBQKBNR w KQkq - 0 1"


class FenError(ValueError):
    """Raised for malformed or inconsistent FEN input."""


class IllegalMoveError(ValueError):
    """Raised when a move is not legal in the given position."""


def square(file: int, rank: int) -> int:
    return rank * 8 + file


def square_file(sq: int) -> int:
    return sq & 7


def square_rank(sq: int) -> int:
    return sq >> 3


def square_name(sq: int) -> str:
    return "abcdefgh"[sq & 7] + "12345678"[sq >> 3]


def parse_square(name: str) -> int:
    if len(name) != 2 or name[0] not in "abcdefgh" or name[1] not in "12345678":
        raise ValueError(f"bad square name {name!r}")
    return square("abcdefgh".index(name[0]), "12345678".index(name[1]))


# Precomputed move geometry -------------------------------------------------

def _build_step_table(deltas: Iterable[tuple[int, int]]) -> list[tuple[int, ...]]:
    table = []
    for sq in range(64):
        f, r = sq & 7, sq >> 3
        targets = []
        for df, dr in deltas:
            nf, nr = f + df, r + dr
            if 0 <= nf < 8 and 0 <= nr < 8:
                targets.append(nr * 8 + nf)
        table.append(tuple(targets))
    return table


def _build_ray_table(directions: Iterable[tuple[int, int]]) -> list[tuple[tuple[int, ...], ...]]:
    table = []
    for sq in range(64):
        f, r = sq & 7, sq >> 3
        rays = []
        for df, dr in directions:
            ray = []
            nf, nr = f + df, r + dr
            while 0 <= nf < 8 and 0 <= nr < 8:
                ray.append(nr * 8 + nf)
                nf += df
                nr += dr
            rays.append(tuple(ray))
        table.append(tuple(rays))
    return table


KNIGHT_STEPS = _build_step_table(
    [(1, 2), (2, 1), (2, -1), (1, -2), (-1, -2), (-2, -1), (-2, 1), (-1, 2)]
)
KING_STEPS = _build_step_table(
    [(0, 1), (1, 1), (1, 0), (1, -1), (0, -1), (-1, -1), (-1, 0), (-1, 1)]
)
BISHOP_RAYS = _build_ray_table([(1, 1), (1, -1), (-1, -1), (-1, 1)])
ROOK_RAYS = _build_ray_table([(0, 1), (1, 0), (0, -1), (-1, 0)])
QUEEN_RAYS = [b + r for b, r in zip(BISHOP_RAYS, ROOK_RAYS)]


# Zobrist key tables (fixed seed: hashing must be stable across runs) -------

_ZOBRIST_SEED = 0x5EED_C0DE_2024
_zrng = random.Random(_ZOBRIST_SEED)
# index: [piece 0..11][square]; piece index = (abs - 1) + (0 if white else 6)
ZOBRIST_PIECE = [[_zrng.getrandbits(64) for _ in range(64)] for _ in range(12)]
ZOBRIST_SIDE = _zrng.getrandbits(64)  # xored in when Black to move
ZOBRIST_CASTLE = [_zrng.getrandbits(64) for _ in range(16)]
ZOBRIST_EP_FILE = [_zrng.getrandbits(64) for _ in range(8)]
del _zrng


def _piece_index(piece: int) -> int:
    return (abs(piece) - 1) + (0 if piece > 0 else 6)


@dataclass(frozen=True, order=True)
class Move:
    """A move as (from, to, optional promotion piece kind).

    Ordering is (from_sq, to_sq, promotion) which gives the stable move
    ordering used everywhere for reproducible tie-breaking.
    """

    from_sq: int
    to_sq: int
    promotion: int = 0  # one of KNIGHT/BISHOP/ROOK/QUEEN, or 0

    def uci(self) -> str:
        s = square_name(self.from_sq) + square_name(self.to_sq)
        if self.promotion:
            s += PIECE_CHARS[self.promotion].lower()
        return s

    @classmethod
    def from_uci(cls, text: str) -> "Move":
        if len(text) not in (4, 5):
            raise ValueError(f"bad uci move {text!r}")
        promo = 0
        if len(text) == 5:
            p = CHAR_PIECES.get(text[4].upper())
            if p not in (KNIGHT, BISHOP, ROOK, QUEEN):
                raise ValueError(f"bad promotion in {text!r}")
            promo = p
        return cls(parse_square(text[:2]), parse_square(text[2:4]), promo)


class GameStatus:
    ONGOING = "ongoing"
    WHITE_WINS = "white_wins"
    BLACK_WINS = "black_wins"
    DRAW_STALEMATE = "draw_stalemate"
    DRAW_FIFTY = "draw_fifty"
    DRAW_THREEFOLD = "draw_threefold"
    DRAW_INSUFFICIENT = "draw_insufficient"

    DRAWS = (DRAW_STALEMATE, DRAW_FIFTY, DRAW_THREEFOLD, DRAW_INSUFFICIENT)


@dataclass(frozen=True)
class Position:
    """Immutable chess position with incrementally maintained Zobrist hash.

    The hash covers placement, side to move, castling rights, and the en
    passant square; the two clocks are deliberately excluded so that
    transpositions reached with different clocks share a hash.
    """

    board: tuple  # 64 signed ints
    side: int  # WHITE or BLACK
    castling: int  # bitmask of CASTLE_*
    ep_square: Optional[int]
    halfmove_clock: int
    fullmove_number: int
    zobrist: int

    # -- construction ------------------------------------------------------

    @staticmethod
    def startpos() -> "Position":
        return parse_fen(STARTPOS_FEN)

    def piece_at(self, sq: int) -> int:
        return self.board[sq]

    def king_square(self, side: int) -> int:
        target = KING * side
        return self.board.index(target)

    # -- attack detection --------------------------------------------------

    def is_attacked(self, sq: int, by_side: int) -> bool:
        """True if `sq` is attacked by any piece of `by_side`."""
        board = self.board
        for t in KNIGHT_STEPS[sq]:
            if board[t] == KNIGHT * by_side:
                return True
        for t in KING_STEPS[sq]:
            if board[t] == KING * by_side:
                return True
        # Pawn attacks: a by_side pawn attacks sq if it sits one rank
        # behind sq (from by_side's view) on an adjacent file.
        r = (sq >> 3) - by_side
        if 0 <= r < 8:
            f = sq & 7
            if f > 0 and board[r * 8 + f - 1] == PAWN * by_side:
                return True
            if f < 7 and board[r * 8 + f + 1] == PAWN * by_side:
                return True
        for ray in BISHOP_RAYS[sq]:
            for t in ray:
                piece = board[t]
                if piece:
                    if piece * by_side > 0 and abs(piece) in (BISHOP, QUEEN):
                        return True
                    break
        for ray in ROOK_RAYS[sq]:
            for t in ray:
                piece = board[t]
                if piece:
                    if piece * by_side > 0 and abs(piece) in (ROOK, QUEEN):
                        return True
                    break
        return False

    def in_check(self, side: Optional[int] = None) -> bool:
        s = self.side if side is None else side
        return self.is_attacked(self.king_square(s), -s)

    # -- move generation ---------------------------------------------------

    def pseudo_legal_moves(self) -> list[Move]:
        board = self.board
        side = self.side
        moves: list[Move] = []
        push = moves.append
        for sq in range(64):
            piece = board[sq]
            if piece == 0 or piece * side <= 0:
                continue
            kind = abs(piece)
            if kind == PAWN:
                self._pawn_moves(sq, push)
            elif kind == KNIGHT:
                for t in KNIGHT_STEPS[sq]:
                    if board[t] * side <= 0:
                        push(Move(sq, t))
            elif kind == KING:
                for t in KING_STEPS[sq]:
                    if board[t] * side <= 0:
                        push(Move(sq, t))
            else:
                rays = (
                    BISHOP_RAYS[sq] if kind == BISHOP
                    else ROOK_RAYS[sq] if kind == ROOK
                    else QUEEN_RAYS[sq]
                )
                for ray in rays:
                    for t in ray:
                        occ = board[t]
                        if occ == 0:
                            push(Move(sq, t))
                        else:
                            if occ * side < 0:
                                push(Move(sq, t))
                            break
        self._castling_moves(push)
        return moves

    def _pawn_moves(self, sq: int, push) -> None:
        board = self.board
        side = self.side
        f, r = sq & 7, sq >> 3
        fwd = sq + 8 * side
        last_rank = 7 if side == WHITE else 0
        start_rank = 1 if side == WHITE else 6

        def emit(to_sq: int) -> None:
            if (to_sq >> 3) == last_rank:
                for promo in (KNIGHT, BISHOP, ROOK, QUEEN):
                    push(Move(sq, to_sq, promo))
            else:
                push(Move(sq, to_sq))

        if board[fwd] == 0:
            emit(fwd)
            if r == start_rank and board[fwd + 8 * side] == 0:
                push(Move(sq, fwd + 8 * side))
        for df in (-1, 1):
            nf = f + df
            if not 0 <= nf < 8:
                continue
            t = fwd + df
            if board[t] * side < 0:
                emit(t)
            elif t == self.ep_square:
                push(Move(sq, t))

    def _castling_moves(self, push) -> None:
        board = self.board
        side = self.side
        if side == WHITE:
            ksq = 4
            if board[ksq] != KING:
                return
            if (
                self.castling & CASTLE_WK
                and board[5] == 0 and board[6] == 0
                and not self.is_attacked(4, BLACK)
                and not self.is_attacked(5, BLACK)
                and not self.is_attacked(6, BLACK)
            ):
                push(Move(4, 6))
            if (
                self.castling & CASTLE_WQ
                and board[3] == 0 and board[2] == 0 and board[1] == 0
                and not self.is_attacked(4, BLACK)
                and not self.is_attacked(3, BLACK)
                and not self.is_attacked(2, BLACK)
            ):
                push(Move(4, 2))
        else:
            ksq = 60
            if board[ksq] != -KING:
                return
            if (
                self.castling & CASTLE_BK
                and board[61] == 0 and board[62] == 0
                and not self.is_attacked(60, WHITE)
                and not self.is_attacked(61, WHITE)
                and not self.is_attacked(62, WHITE)
            ):
                push(Move(60, 62))
            if (
                self.castling & CASTLE_BQ
                and board[59] == 0 and board[58] == 0 and board[57] == 0
                and not self.is_attacked(60, WHITE)
                and not self.is_attacked(59, WHITE)
                and not self.is_attacked(58, WHITE)
            ):
                push(Move(60, 58))

    def legal_moves(self) -> list[Move]:
        """All legal moves, sorted by (from, to, promotion) for stable order."""
        moves = []
        for m in self.pseudo_legal_moves():
            if not self._leaves_king_in_check(m):
                moves.append(m)
        moves.sort()
        return moves

    def _leaves_king_in_check(self, m: Move) -> bool:
        # Castling legality (no transit through check) is enforced at
        # generation time; here we only verify the mover's king safety.
        child = self.apply_move(m, _validate=False)
        return child.is_attacked(child.king_square(self.side), -self.side)

    # -- make move ---------------------------------------------------------

    def apply_move(self, m: Move, _validate: bool = True) -> "Position":
        """Apply a legal move, producing the child position.

        Clocks, castling rights, en passant square and the Zobrist hash are
        updated incrementally.
        """
        if _validate and m not in self.legal_moves():
            raise IllegalMoveError(f"illegal move {m.uci()} in {emit_fen(self)}")

        board = list(self.board)
        side = self.side
        piece = board[m.from_sq]
        captured = board[m.to_sq]
        z = self.zobrist

        # remove ep file of current position from hash
        if self.ep_square is not None:
            z ^= ZOBRIST_EP_FILE[self.ep_square & 7]
        z ^= ZOBRIST_CASTLE[self.castling]

        halfmove = self.halfmove_clock + 1
        if captured or abs(piece) == PAWN:
            halfmove = 0

        if captured:
            z ^= ZOBRIST_PIECE[_piece_index(captured)][m.to_sq]

        z ^= ZOBRIST_PIECE[_piece_index(piece)][m.from_sq]
        board[m.from_sq] = 0

        ep_square = None
        if abs(piece) == PAWN:
            if m.to_sq == self.ep_square:
                cap_sq = m.to_sq - 8 * side
                z ^= ZOBRIST_PIECE[_piece_index(board[cap_sq])][cap_sq]
                board[cap_sq] = 0
            elif abs(m.to_sq - m.from_sq) == 16:
                ep_square = (m.from_sq + m.to_sq) // 2
        placed = piece if not m.promotion else m.promotion * side
        board[m.to_sq] = placed
        z ^= ZOBRIST_PIECE[_piece_index(placed)][m.to_sq]

        if abs(piece) == KING and abs(m.to_sq - m.from_sq) == 2:
            # move the castling rook
            if m.to_sq > m.from_sq:
                rook_from, rook_to = m.from_sq + 3, m.from_sq + 1
            else:
                rook_from, rook_to = m.from_sq - 4, m.from_sq - 1
            rook = board[rook_from]
            board[rook_from] = 0
            board[rook_to] = rook
            z ^= ZOBRIST_PIECE[_piece_index(rook)][rook_from]
            z ^= ZOBRIST_PIECE[_piece_index(rook)][rook_to]

        castling = self.castling
        for sq in (m.from_sq, m.to_sq):
            if sq == 4:
                castling &= ~(CASTLE_WK | CASTLE_WQ)
            elif sq == 60:
                castling &= ~(CASTLE_BK | CASTLE_BQ)
            elif sq == 7:
                castling &= ~CASTLE_WK
            elif sq == 0:
                castling &= ~CASTLE_WQ
            elif sq == 63:
                castling &= ~CASTLE_BK
            elif sq == 56:
                castling &= ~CASTLE_BQ

        z ^= ZOBRIST_CASTLE[castling]
        if ep_square is not None:
            z ^= ZOBRIST_EP_FILE[ep_square & 7]
        z ^= ZOBRIST_SIDE  # side always flips

        return Position(
            board=tuple(board),
            side=-side,
            castling=castling,
            ep_square=ep_square,
            halfmove_clock=halfmove,
            fullmove_number=self.fullmove_number + (1 if side == BLACK else 0),
            zobrist=z,
        )

    # -- termination -------------------------------------------------------

    def has_insufficient_material(self) -> bool:
        """K vs K, K+minor vs K, or K+B vs K+B with same-colored bishops."""
        minors = []
        for sq, piece in enumerate(self.board):
            kind = abs(piece)
            if kind in (EMPTY, KING):
                continue
            if kind in (PAWN, ROOK, QUEEN):
                return False
            minors.append((sq, piece))
        if len(minors) <= 1:
            return True
        if len(minors) == 2:
            (sq_a, pa), (sq_b, pb) = minors
            if abs(pa) == BISHOP and abs(pb) == BISHOP and pa * pb < 0:
                color_a = ((sq_a >> 3) + (sq_a & 7)) & 1
                color_b = ((sq_b >> 3) + (sq_b & 7)) & 1
                return color_a == color_b
        return False


def zobrist_from_scratch(
    board: tuple, side: int, castling: int, ep_square: Optional[int]
) -> int:
    z = 0
    for sq, piece in enumerate(board):
        if piece:
            z ^= ZOBRIST_PIECE[_piece_index(piece)][sq]
    if side == BLACK:
        z ^= ZOBRIST_SIDE
    z ^= ZOBRIST_CASTLE[castling]
    if ep_square is not None:
        z ^= ZOBRIST_EP_FILE[ep_square & 7]
    return z


def game_status(p: Position, history: Optional[list[int]] = None) -> str:
    """Adjudicate the position. `history` is the multiset of Zobrist hashes
    of every position of the game so far (including `p` itself); threefold
    repetition is claimed automatically when p's hash appears 3+ times.
    """
    if p.legal_moves():
        if history is not None and history.count(p.zobrist) >= 3:
            return GameStatus.DRAW_THREEFOLD
        if p.halfmove_clock >= 100:
            return GameStatus.DRAW_FIFTY
        if p.has_insufficient_material():
            return GameStatus.DRAW_INSUFFICIENT
        return GameStatus.ONGOING
    if p.in_check():
        return GameStatus.BLACK_WINS if p.side == WHITE else GameStatus.WHITE_WINS
    return GameStatus.DRAW_STALEMATE


# FEN parsing / emission ----------------------------------------------------

def parse_fen(text: str) -> Position:
    """Parse a 6-field FEN into a validated Position."""
    fields = text.split()
    if len(fields) != 6:
        raise FenError(f"expected 6 FEN fields, got {len(fields)}")
    placement, side_f, castling_f, ep_f, half_f, full_f = fields

    ranks = placement.split("/")
    if len(ranks) != 8:
        raise FenError(f"placement has {len(ranks)} ranks, expected 8")
    board = [0] * 64
    for rank_idx, rank_text in enumerate(ranks):
        rank = 7 - rank_idx
        file = 0
        for ch in rank_text:
            if ch.isdigit():
                if ch == "0":
                    raise FenError(f"bad run length in rank {rank + 1}")
                file += int(ch)
            else:
                piece = CHAR_PIECES.get(ch)
                if piece is None:
                    raise FenError(f"illegal piece char {ch!r}")
                if file >= 8:
                    raise FenError(f"rank {rank + 1} overflows 8 files")
                board[square(file, rank)] = piece
                file += 1
        if file != 8:
            raise FenError(f"rank {rank + 1} covers {file} files, expected 8")

    if side_f == "w":
        side = WHITE
    elif side_f == "b":
        side = BLACK
    else:
        raise FenError(f"bad side-to-move field {side_f!r}")

    castling = 0
    if castling_f != "-":
        flags = {"K": CASTLE_WK, "Q": CASTLE_WQ, "k": CASTLE_BK, "q": CASTLE_BQ}
        seen = set()
        for ch in castling_f:
            if ch not in flags or ch in seen:
                raise FenError(f"bad castling field {castling_f!r}")
            seen.add(ch)
            castling |= flags[ch]

    ep_square = None
    if ep_f != "-":
        try:
            ep_square = parse_square(ep_f)
        except ValueError as e:
            raise FenError(f"bad en passant field {ep_f!r}") from e

    try:
        halfmove = int(half_f)
        fullmove = int(full_f)
    except ValueError as e:
        raise FenError(f"non-integer clock field: {e}") from e
    if halfmove < 0:
        raise FenError(f"negative halfmove clock {halfmove}")
    if fullmove < 1:
        raise FenError(f"fullmove number {fullmove} < 1")

    z = zobrist_from_scratch(tuple(board), side, castling, ep_square)
    p = Position(
        board=tuple(board),
        side=side,
        castling=castling,
        ep_square=ep_square,
        halfmove_clock=halfmove,
        fullmove_number=fullmove,
        zobrist=z,
    )
    _validate_position(p)
    return p


def _validate_position(p: Position) -> None:
    board = p.board
    if board.count(KING) != 1 or board.count(-KING) != 1:
        raise FenError("placement must contain exactly one king per side")
    for sq in range(64):
        if abs(board[sq]) == PAWN and (sq >> 3) in (0, 7):
            raise FenError(f"pawn on back rank at {square_name(sq)}")
    if p.is_attacked(p.king_square(-p.side), p.side):
        raise FenError("side not to move is in check")

    if p.castling & CASTLE_WK and (board[4] != KING or board[7] != ROOK):
        raise FenError("castling field: white kingside rights without K/R on e1/h1")
    if p.castling & CASTLE_WQ and (board[4] != KING or board[0] != ROOK):
        raise FenError("castling field: white queenside rights without K/R on e1/a1")
    if p.castling & CASTLE_BK and (board[60] != -KING or board[63] != -ROOK):
        raise FenError("castling field: black kingside rights without k/r on e8/h8")
    if p.castling & CASTLE_BQ and (board[60] != -KING or board[56] != -ROOK):
        raise FenError("castling field: black queenside rights without k/r on e8/a8")

    if p.ep_square is not None:
        rank = p.ep_square >> 3
        if p.side == WHITE:
            # Black just pushed a pawn two squares onto rank 5; ep target rank 6
            if rank != 5 or p.board[p.ep_square - 8] != -PAWN:
                raise FenError("inconsistent en passant square")
            if p.board[p.ep_square] != 0 or p.board[p.ep_square + 8] != 0:
                raise FenError("inconsistent en passant square")
        else:
            if rank != 2 or p.board[p.ep_square + 8] != PAWN:
                raise FenError("inconsistent en passant square")
            if p.board[p.ep_square] != 0 or p.board[p.ep_square - 8] != 0:
                raise FenError("inconsistent en passant square")


def emit_fen(p: Position) -> str:
    rows = []
    for rank in range(7, -1, -1):
        row = ""
        run = 0
        for file in range(8):
            piece = p.board[square(file, rank)]
            if piece == 0:
                run += 1
            else:
                if run:
                    row += str(run)
                    run = 0
                row += PIECE_CHARS[abs(piece)] if piece > 0 else PIECE_CHARS[abs(piece)].lower()
        if run:
            row += str(run)
        rows.append(row)
    castling = ""
    for flag, ch in ((CASTLE_WK, "K"), (CASTLE_WQ, "Q"), (CASTLE_BK, "k"), (CASTLE_BQ, "q")):
        if p.castling & flag:
            castling += ch
    return " ".join(
        [
            "/".join(rows),
            "w" if p.side == WHITE else "b",
            castling or "-",
            square_name(p.ep_square) if p.ep_square is not None else "-",
            str(p.halfmove_clock),
            str(p.fullmove_number),
        ]
    )


def perft(p: Position, depth: int) -> int:
    """Leaf-node count of the legal move tree (bulk-counted at depth 1)."""
    if depth == 0:
        return 1
    moves = p.legal_moves()
    if depth == 1:
        return len(moves)
    return sum(perft(p.apply_move(m, _validate=False), depth - 1) for m in moves)
