"""Projection and trajectory-export tests."""

import numpy as np
import pytest

from latentchess.pgn import parse_pgn
from latentchess.uci import fallback_planner
from latentchess.viz import (
    Projection2D,
    ProjectionError,
    explained_variance_ratio,
    export_embeddings,
    export_trajectory,
    fit_projection,
)


def planted_plane_data(rng, n=300, d=10):
    """Points living almost entirely in the span of two fixed axes."""
    basis = np.zeros((2, d))
    basis[0, 0] = 1.0
    basis[1, 3] = 1.0
    coords = rng.standard_normal((n, 2)) * np.array([5.0, 2.0])
    noise = rng.standard_normal((n, d)) * 1e-4
    return coords @ basis + noise, basis


class TestProjection:
    def test_basis_is_orthonormal(self):
        rng = np.random.default_rng(0)
        proj = fit_projection(rng.standard_normal((200, 12)))
        gram = proj.basis @ proj.basis.T
        np.testing.assert_allclose(gram, np.eye(2), atol=1e-10)

    def test_recovers_a_planted_plane(self):
        rng = np.random.default_rng(1)
        data, basis = planted_plane_data(rng)
        proj = fit_projection(data)
        # each fitted axis must lie in the planted span
        for row in proj.basis:
            residual = row - basis.T @ (basis @ row)
            assert np.linalg.norm(residual) < 1e-3
        assert explained_variance_ratio(data, proj) > 0.999

    def test_isotropic_data_explains_about_two_over_d(self):
        rng = np.random.default_rng(2)
        d = 20
        data = rng.standard_normal((4000, d))
        ratio = explained_variance_ratio(data, fit_projection(data))
        assert 2.0 / d < ratio < 4.0 / d

    def test_fit_is_deterministic_with_fixed_sign_convention(self):
        rng = np.random.default_rng(3)
        data = rng.standard_normal((100, 8))
        a = fit_projection(data)
        b = fit_projection(data)
        np.testing.assert_array_equal(a.basis, b.basis)
        for row in a.basis:
            assert row[np.argmax(np.abs(row))] > 0

    def test_transform_centers_on_the_mean(self):
        rng = np.random.default_rng(4)
        data = rng.standard_normal((50, 6)) + 10.0
        proj = fit_projection(data)
        xy = proj.transform(data)
        np.testing.assert_allclose(xy.mean(axis=0), 0.0, atol=1e-9)

    def test_degenerate_input_rejected(self):
        with pytest.raises(ProjectionError):
            fit_projection(np.ones((40, 6)))  # rank 0 after centering
        with pytest.raises(ProjectionError):
            fit_projection(np.zeros((1, 6)))


class TestExports:
    def setup_method(self):
        self.planner = fallback_planner()

    def test_trajectory_csv_and_svg(self, tmp_path):
        record, _ = parse_pgn("1. e4 e5 2. Nf3 Nc6 3. Bb5 a6 *")
        zs = self.planner.embed_positions(record.positions())
        rng = np.random.default_rng(5)
        reference = zs + rng.standard_normal(zs.shape) * 0.1
        proj = fit_projection(np.vstack([zs, reference]))
        csv_text, svg_text = export_trajectory(record, self.planner, proj)
        lines = csv_text.strip().splitlines()
        assert lines[0] == "ply,san,x,y,advantage_score"
        assert len(lines) == len(record.san_moves) + 2  # header + start position
        assert lines[1].startswith("0,,")
        assert lines[2].split(",")[1] == "e4"
        assert svg_text.startswith("<svg")
        assert "polyline" in svg_text

    def test_embedding_csv_shape(self):
        fens = [
            "rnbqkbnr/pppppppp/8/8/8/8/PPPPPPPP/RNBQKBNR w KQkq - 0 1",
            "rnbqkbnr/pppppppp/8/8/4P3/8/PPPP1PPP/RNBQKBNR b KQkq e3 0 1",
        ]
        text = export_embeddings(fens, self.planner)
        lines = text.strip().splitlines()
        dim = self.planner.encoder_config.embed_dim
        assert lines[0].split(",")[:2] == ["fen", "z0"]
        assert len(lines) == 3
        assert len(lines[1].rsplit(",", dim)) == dim + 1
