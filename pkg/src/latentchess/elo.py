"""Elo estimation by maximum likelihood under a logistic model with a
draw parameter (Davidson).

For rating difference d (us minus opponent), let x = 10^(d/400). Outcome
probabilities with draw parameter nu >= 0 are

    P(win)  = x / (x + 1 + nu * sqrt(x))
    P(loss) = 1 / (x + 1 + nu * sqrt(x))
    P(draw) = nu * sqrt(x) / (x + 1 + nu * sqrt(x))

With nu = 0 this reduces to the plain logistic curve, whose expected score
is 1 / (1 + 10^(-d/400)). The 95% interval comes from the profile
likelihood (chi-square cutoff at one degree of freedom).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from scipy.optimize import brentq, minimize_scalar

_LN10_400 = math.log(10.0) / 400.0
_CHI2_95 = 3.841458820694124  # chi-square 95% quantile, 1 dof


@dataclass(frozen=True)
class MatchTally:
    wins: int
    draws: int
    losses: int

    def __post_init__(self):
        if min(self.wins, self.draws, self.losses) < 0:
            raise ValueError("negative tally entry")

    @property
    def games(self) -> int:
        return self.wins + self.draws + self.losses

    @property
    def points(self) -> float:
        return self.wins + 0.5 * self.draws

    def swapped(self) -> "MatchTally":
        return MatchTally(self.losses, self.draws, self.wins)


@dataclass(frozen=True)
class RatingEstimate:
    rating: float
    ci_low: float  # -inf when unbounded below
    ci_high: float  # +inf when unbounded above
    draw_param: float
    log_likelihood: float


def _log_likelihood(rating: float, nu: float, tallies) -> float:
    ll = 0.0
    for opp_rating, tally in tallies:
        d = rating - opp_rating
        x = math.pow(10.0, d / 400.0)
        sx = math.sqrt(x)
        denom = x + 1.0 + nu * sx
        if tally.wins:
            ll += tally.wins * math.log(x / denom)
        if tally.losses:
            ll += tally.losses * math.log(1.0 / denom)
        if tally.draws:
            ll += tally.draws * math.log(nu * sx / denom)
    return ll


def _profile_nu(rating: float, tallies) -> tuple[float, float]:
    """Maximize the likelihood over the draw parameter at fixed rating."""
    draws = sum(t.draws for _, t in tallies)
    if draws == 0:
        return 0.0, _log_likelihood(rating, 0.0, tallies)
    res = minimize_scalar(
        lambda lognu: -_log_likelihood(rating, math.exp(lognu), tallies),
        bounds=(-12.0, 6.0),
        method="bounded",
        options={"xatol": 1e-10},
    )
    nu = math.exp(res.x)
    return nu, -res.fun


def elo_estimate(tallies, span: float = 4000.0) -> RatingEstimate:
    """MLE of our rating from (opponent_rating, MatchTally) pairs.

    Degenerate inputs (all games won, or all lost) give an open interval
    with the relevant bound at +/- infinity.
    """
    tallies = [(float(r), t) for r, t in tallies]
    if not tallies:
        raise ValueError("need at least one tally")
    total = sum(t.games for _, t in tallies)
    if total == 0:
        raise ValueError("no games in tallies")
    points = sum(t.points for _, t in tallies)

    anchor = sum(r * t.games for r, t in tallies) / total
    lo, hi = anchor - span, anchor + span

    if points == 0.0 or points == total:
        # Likelihood increases monotonically toward the boundary.
        sign = 1.0 if points == total else -1.0
        edge = hi if sign > 0 else lo
        nu, ll = _profile_nu(edge, tallies)
        return RatingEstimate(
            rating=math.inf * sign,
            ci_low=_profile_ci_bound(tallies, ll, lo, edge, "low")
            if sign > 0 else -math.inf,
            ci_high=math.inf if sign > 0
            else _profile_ci_bound(tallies, ll, edge, hi, "high"),
            draw_param=nu,
            log_likelihood=ll,
        )

    res = minimize_scalar(
        lambda r: -_profile_nu(r, tallies)[1],
        bounds=(lo, hi),
        method="bounded",
        options={"xatol": 1e-8},
    )
    rating = float(res.x)
    nu, ll_max = _profile_nu(rating, tallies)
    ci_low = _profile_ci_bound(tallies, ll_max, lo, rating, "low")
    ci_high = _profile_ci_bound(tallies, ll_max, rating, hi, "high")
    return RatingEstimate(rating, ci_low, ci_high, nu, ll_max)


def _profile_ci_bound(tallies, ll_max: float, lo: float, hi: float, side: str) -> float:
    """Profile-likelihood bound: rating where 2 * (ll_max - ll) hits the
    chi-square cutoff. Returns an infinite bound if never reached."""

    def deficit(r: float) -> float:
        return 2.0 * (ll_max - _profile_nu(r, tallies)[1]) - _CHI2_95

    edge = lo if side == "low" else hi
    inner = hi if side == "low" else lo
    if deficit(edge) < 0.0:
        return -math.inf if side == "low" else math.inf
    return float(brentq(deficit, min(edge, inner), max(edge, inner), xtol=1e-6))


def expected_score(diff: float) -> float:
    """Logistic expected score for a rating difference."""
    return 1.0 / (1.0 + math.pow(10.0, -diff / 400.0))


def rating_gap_for_score(score: float) -> float:
    """Closed-form inversion of the logistic expected-score curve."""
    if not 0.0 < score < 1.0:
        raise ValueError("score must be strictly inside (0, 1)")
    return 400.0 * math.log10(score / (1.0 - score))
