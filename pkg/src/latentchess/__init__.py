"""Latent-planning chess engine: a contrastively trained transformer
encoder, advantage-direction move scoring, bounded min-max search, and the
surrounding evaluation apparatus (UCI, match harness, Elo, export tools).
"""

__version__ = "0.1.0"
