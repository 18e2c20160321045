"""Rating-estimation tests: closed-form identities, maximum-likelihood
recovery of planted gaps, and confidence-interval behavior.
"""

import math

import numpy as np
import pytest

from latentchess.elo import (
    MatchTally,
    elo_estimate,
    expected_score,
    rating_gap_for_score,
)


class TestTally:
    def test_points_and_games(self):
        t = MatchTally(wins=6, draws=2, losses=4)
        assert t.games == 12
        assert t.points == 7.0

    def test_swapped(self):
        t = MatchTally(3, 1, 8).swapped()
        assert (t.wins, t.draws, t.losses) == (8, 1, 3)

    def test_negative_entries_rejected(self):
        with pytest.raises(ValueError):
            MatchTally(-1, 0, 0)


class TestClosedForm:
    def test_75_percent_score_inverts_to_known_gap(self):
        gap = rating_gap_for_score(0.75)
        assert gap == pytest.approx(400.0 * math.log10(3.0))
        assert gap == pytest.approx(190.8485, abs=1e-3)

    def test_expected_score_round_trip(self):
        for gap in (-300.0, -50.0, 0.0, 120.0, 400.0):
            assert rating_gap_for_score(expected_score(gap)) == pytest.approx(gap)

    def test_boundary_scores_rejected(self):
        for bad in (0.0, 1.0, -0.1, 1.5):
            with pytest.raises(ValueError):
                rating_gap_for_score(bad)


class TestEstimator:
    def test_even_score_estimates_zero_gap(self):
        est = elo_estimate([(0.0, MatchTally(wins=50, draws=0, losses=50))])
        assert est.rating == pytest.approx(0.0, abs=1.0)
        assert est.ci_low < 0.0 < est.ci_high

    def test_draw_free_75_percent_recovers_logistic_gap(self):
        est = elo_estimate([(0.0, MatchTally(wins=300, draws=0, losses=100))])
        assert est.rating == pytest.approx(190.8485, abs=0.5)

    def test_antisymmetry_under_tally_swap(self):
        tally = MatchTally(wins=140, draws=40, losses=60)
        up = elo_estimate([(0.0, tally)])
        down = elo_estimate([(0.0, tally.swapped())])
        assert up.rating == pytest.approx(-down.rating, abs=0.5)

    def test_multiple_opponents_are_pooled(self):
        tallies = [
            (-100.0, MatchTally(wins=70, draws=0, losses=30)),
            (100.0, MatchTally(wins=30, draws=0, losses=70)),
        ]
        est = elo_estimate(tallies)
        # both tallies point at a rating near -15: 85 below/above the opponents
        assert est.ci_low < est.rating < est.ci_high
        assert abs(est.rating) < 60

    def test_all_wins_is_unbounded_above(self):
        est = elo_estimate([(0.0, MatchTally(wins=20, draws=0, losses=0))])
        assert est.rating == math.inf
        assert est.ci_high == math.inf
        assert math.isfinite(est.ci_low)

    def test_all_losses_is_unbounded_below(self):
        est = elo_estimate([(0.0, MatchTally(wins=0, draws=0, losses=20))])
        assert est.rating == -math.inf
        assert est.ci_low == -math.inf
        assert math.isfinite(est.ci_high)

    def test_confidence_interval_shrinks_with_games(self):
        small = elo_estimate([(0.0, MatchTally(wins=30, draws=0, losses=10))])
        large = elo_estimate([(0.0, MatchTally(wins=300, draws=0, losses=100))])
        assert (large.ci_high - large.ci_low) < (small.ci_high - small.ci_low)

    def test_draws_widen_nothing_but_still_fit(self):
        est = elo_estimate([(0.0, MatchTally(wins=100, draws=200, losses=50))])
        assert est.draw_param > 0.0
        assert est.ci_low < est.rating < est.ci_high

    def test_empty_tally_rejected(self):
        with pytest.raises(ValueError):
            elo_estimate([(0.0, MatchTally(0, 0, 0))])


class TestMonteCarlo:
    def test_planted_gap_recovery_single_seed(self):
        rng = np.random.default_rng(99)
        planted = 120.0
        p = expected_score(planted)
        wins = int(rng.binomial(1000, p))
        est = elo_estimate([(0.0, MatchTally(wins=wins, draws=0, losses=1000 - wins))])
        assert est.rating == pytest.approx(planted, abs=25.0)
