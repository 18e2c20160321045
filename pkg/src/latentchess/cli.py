"""Umbrella command line: train / uci / match / rate / export subcommands.

Config files are simple "key = value" text; command-line flags override
file entries.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .board import parse_fen
from .elo import MatchTally, elo_estimate
from .encoder import EncoderConfig, load_checkpoint
from .match import MatchConfig, run_match, write_match_artifacts
from .pgn import parse_pgn
from .planner import AdvantageModel, LatentPlanner, fit_advantage
from .tokens import tokenize
from .training import TrainConfig, ingest_dataset, train
from .uci import load_planner, uci_loop
from .viz import export_trajectory, fit_projection

log = logging.getLogger(__name__)


def read_config_file(path) -> dict[str, str]:
    """Parse "key = value" lines; '#' starts a comment."""
    values: dict[str, str] = {}
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        if not sep:
            raise ValueError(f"{path}:{lineno}: expected 'key = value'")
        values[key.strip()] = value.strip()
    return values


def _merged(args, keys: dict[str, type]) -> dict:
    """Config-file values overridden by any explicitly passed flags."""
    merged: dict = {}
    if getattr(args, "config", None):
        file_values = read_config_file(args.config)
        for key, caster in keys.items():
            if key in file_values:
                merged[key] = caster(file_values[key])
    for key in keys:
        value = getattr(args, key, None)
        if value is not None:
            merged[key] = value
    return merged


def cmd_train(args) -> int:
    enc_keys = {"layers": int, "embed_dim": int, "heads": int, "mlp_size": int,
                "dropout": float}
    trn_keys = {"temperature": float, "margin": float, "positives_per_anchor": int,
                "lr": float, "momentum": float, "batch_size": int, "steps": int,
                "seed": int}
    encoder_config = EncoderConfig(**_merged(args, enc_keys))
    train_config = TrainConfig(**_merged(args, trn_keys))

    dataset = ingest_dataset(args.dataset)
    log.info("dataset: %d labeled positions", len(dataset))
    result = train(
        dataset, encoder_config, train_config,
        checkpoint_path=args.checkpoint,
        loss_log_path=args.loss_log,
    )

    # fit and store the advantage direction beside the checkpoint
    held_out = dataset[: min(len(dataset), 4096)]
    seqs = np.array([tokenize(d.fen) for d in held_out])
    from .encoder import encode

    zs = encode(result.params, encoder_config, seqs)
    model = fit_advantage(zs, [d.win_prob_white for d in held_out], mode=args.mode)
    model.save(str(args.checkpoint) + ".adv")
    print(json.dumps({
        "steps": len(result.loss_history),
        "first_loss": result.loss_history[0],
        "final_loss": result.loss_history[-1],
        "checkpoint": str(args.checkpoint),
    }))
    return 0


def cmd_uci(args) -> int:
    uci_loop(sys.stdin, sys.stdout)
    return 0


def _planner_from_args(args) -> LatentPlanner:
    return load_planner(args.model, args.mode)


def cmd_match(args) -> int:
    planner = _planner_from_args(args)
    config = MatchConfig(
        games=args.games,
        depth=args.depth,
        width=args.width,
        mode=args.mode,
        opponent_command=args.opponent_cmd,
        opponent_options=dict(
            opt.split("=", 1) for opt in (args.opponent_option or [])
        ),
        opponent_go=args.opponent_go,
        movetime_ms=args.movetime,
    )
    result = run_match(planner, config)
    label = f"S{args.depth}-W{args.width}-{args.mode}"
    write_match_artifacts(result, args.pgn_out, args.tally_out, label)
    t = result.tally
    print(json.dumps({
        "wins": t.wins, "draws": t.draws, "losses": t.losses,
        "points": t.points, "pgn": str(args.pgn_out), "tally": str(args.tally_out),
    }))
    return 0


def cmd_rate(args) -> int:
    tallies = []
    for spec_text in args.tally:
        try:
            rating_text, wdl = spec_text.split(":", 1)
            w, d, l = (int(x) for x in wdl.split("-"))
        except ValueError:
            raise SystemExit(
                f"bad tally {spec_text!r}; expected RATING:W-D-L"
            ) from None
        tallies.append((float(rating_text), MatchTally(w, d, l)))
    est = elo_estimate(tallies)
    print(json.dumps({
        "rating": est.rating,
        "ci_low": est.ci_low,
        "ci_high": est.ci_high,
        "draw_param": est.draw_param,
    }))
    return 0


def cmd_export_embeddings(args) -> int:
    from .viz import export_embeddings

    planner = _planner_from_args(args)
    fens = [line.strip() for line in Path(args.fens).read_text().splitlines()
            if line.strip()]
    for fen in fens:
        parse_fen(fen)
    Path(args.out).write_text(export_embeddings(fens, planner))
    print(json.dumps({"rows": len(fens), "out": str(args.out)}))
    return 0


def cmd_export_trajectory(args) -> int:
    planner = _planner_from_args(args)
    record, _tags = parse_pgn(Path(args.pgn).read_text())
    # reference cloud for the projection: a supplied dataset, or the game's
    # own positions as a fallback
    if args.reference:
        positions = [parse_fen(d.fen) for d in ingest_dataset(args.reference)]
        ref_embeddings = planner.embed_positions(positions)
    else:
        ref_embeddings = planner.embed_positions(record.positions())
    projection = fit_projection(ref_embeddings)
    csv_text, svg_text = export_trajectory(record, planner, projection)
    Path(args.out).write_text(csv_text)
    svg_path = Path(args.out).with_suffix(".svg")
    svg_path.write_text(svg_text)
    print(json.dumps({"plies": len(record.san_moves), "csv": str(args.out),
                      "svg": str(svg_path)}))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="latentchess",
        description="Latent-planning chess engine: train, play, evaluate.",
    )
    parser.add_argument("--version", action="version", version=__version__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command")

    p = sub.add_parser("train", help="train the encoder on a labeled dataset")
    p.add_argument("--dataset", required=True)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--loss-log", default=None)
    p.add_argument("--config", default=None, help="key=value config file")
    p.add_argument("--mode", default="unanchored")
    for flag, caster in (
        ("layers", int), ("embed-dim", int), ("heads", int), ("mlp-size", int),
        ("dropout", float), ("temperature", float), ("margin", float),
        ("positives-per-anchor", int), ("lr", float), ("momentum", float),
        ("batch-size", int), ("steps", int), ("seed", int),
    ):
        p.add_argument(f"--{flag}", type=caster, default=None)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("uci", help="serve the UCI protocol on stdio")
    p.set_defaults(func=cmd_uci)

    p = sub.add_parser("match", help="play a match against a UCI opponent")
    p.add_argument("--model", required=True)
    p.add_argument("--opponent-cmd", required=True)
    p.add_argument("--opponent-option", action="append", metavar="NAME=VALUE")
    p.add_argument("--opponent-go", default="go depth 3")
    p.add_argument("--games", type=int, default=2)
    p.add_argument("--depth", type=int, default=3)
    p.add_argument("--width", type=int, default=3)
    p.add_argument("--mode", default="unanchored")
    p.add_argument("--movetime", type=int, default=None)
    p.add_argument("--pgn-out", default="match.pgn")
    p.add_argument("--tally-out", default="tally.csv")
    p.set_defaults(func=cmd_match)

    p = sub.add_parser("rate", help="estimate a rating from match tallies")
    p.add_argument("tally", nargs="+", metavar="RATING:W-D-L")
    p.set_defaults(func=cmd_rate)

    p = sub.add_parser("export-embeddings", help="embed a list of FENs to CSV")
    p.add_argument("--model", required=True)
    p.add_argument("--mode", default="unanchored")
    p.add_argument("--fens", required=True, help="file with one FEN per line")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_export_embeddings)

    p = sub.add_parser("export-trajectory", help="latent trajectory of a game")
    p.add_argument("--model", required=True)
    p.add_argument("--mode", default="unanchored")
    p.add_argument("--pgn", required=True)
    p.add_argument("--reference", default=None,
                   help="dataset file for the projection's reference cloud")
    p.add_argument("--out", required=True, help="CSV path (SVG written beside)")
    p.set_defaults(func=cmd_export_trajectory)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )
    if not getattr(args, "command", None):
        parser.print_usage(sys.stderr)
        return 2
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
