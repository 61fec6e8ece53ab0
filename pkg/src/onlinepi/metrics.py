"""Scoring functions for quantile and interval forecasts.

Everything here is a pure function of its arguments: pinball loss for single
quantiles, the Winkler score for intervals, the per-step reward derived from
it, and whole-trace aggregation into the three headline criteria
(mean Winkler, average coverage deviation, mean sharpness).

All scores are computed in raw target units; nothing is normalized here.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, Sequence

from .validation import check_unit_open

__all__ = [
    "IntervalForecast",
    "ScoreReport",
    "pinball_loss",
    "pinball_grad",
    "winkler_score",
    "reward",
    "score_trace",
]


@dataclass(frozen=True)
class IntervalForecast:
    """An interval ``[lower, upper]`` asserted to cover with probability 1 - beta.

    ``beta`` is the miss probability, so the nominal coverage is
    ``(1 - beta) * 100%``.  Callers are responsible for ``lower <= upper``
    (the engine repairs crossed bounds before building one of these).
    """

    lower: float
    upper: float
    beta: float

    def __post_init__(self) -> None:
        check_unit_open("beta", self.beta)
        if self.lower > self.upper:
            raise ValueError(f"lower bound {self.lower} exceeds upper bound {self.upper}")

    @property
    def width(self) -> float:
        return self.upper - self.lower


@dataclass(frozen=True)
class ScoreReport:
    """Whole-trace aggregate scores.

    ``avg_coverage_deviation`` is empirical coverage minus the nominal
    coverage probability; positive means over-coverage.
    """

    mean_winkler: float
    avg_coverage_deviation: float
    mean_sharpness: float
    mean_pinball_per_proportion: Dict[float, float] = field(default_factory=dict)
    n_steps: int = 0


def pinball_loss(y: float, q: float, alpha: float) -> float:
    """Asymmetric piecewise-linear loss whose minimizer is the alpha-quantile.

    Returns ``(1 - alpha) * (q - y)`` when ``q - y >= 0`` and
    ``alpha * (y - q)`` otherwise.  The tie ``q == y`` sits on the first
    branch and scores zero either way.
    """
    alpha = check_unit_open("alpha", alpha)
    d = q - y
    if d >= 0.0:
        return (1.0 - alpha) * d
    return alpha * (-d)


def pinball_grad(y: float, q: float, alpha: float) -> float:
    """Subgradient of ``pinball_loss`` with respect to ``q``.

    The tie ``q == y`` follows the ``(1 - alpha)`` branch.
    """
    alpha = check_unit_open("alpha", alpha)
    return (1.0 - alpha) if q - y >= 0.0 else -alpha


def winkler_score(y: float, pi: IntervalForecast) -> float:
    """Interval width plus a ``2 / beta``-scaled penalty when ``y`` falls outside.

    Always at least the width; equality holds exactly when the interval
    covers ``y``.  Lower is better.
    """
    width = pi.width
    if y < pi.lower:
        return width + 2.0 * (pi.lower - y) / pi.beta
    if y > pi.upper:
        return width + 2.0 * (y - pi.upper) / pi.beta
    return width


def reward(winkler: float) -> float:
    """Per-step reward: the negated Winkler score (higher is better)."""
    return -winkler


def score_trace(records: Sequence, ncp: float) -> ScoreReport:
    """Aggregate step records into the three headline criteria.

    ``records`` must expose ``y``, ``lower``, ``upper``, ``winkler`` and
    ``proportion`` attributes.  ``ncp`` is the nominal coverage probability
    (1 - beta).  Pinball means are reported per observed proportion, for both
    the lower proportion and its paired upper proportion.
    """
    if not records:
        raise ValueError("cannot score an empty trace")
    ncp = check_unit_open("ncp", ncp)
    beta = 1.0 - ncp

    winkler_sum = 0.0
    width_sum = 0.0
    covered = 0
    pinball_sums: Dict[float, float] = {}
    pinball_counts: Dict[float, int] = {}

    for rec in records:
        winkler_sum += rec.winkler
        width_sum += rec.upper - rec.lower
        if rec.lower <= rec.y <= rec.upper:
            covered += 1
        lo_p = rec.proportion
        up_p = rec.proportion + 1.0 - beta
        for prop, bound in ((lo_p, rec.lower), (up_p, rec.upper)):
            pinball_sums[prop] = pinball_sums.get(prop, 0.0) + pinball_loss(rec.y, bound, prop)
            pinball_counts[prop] = pinball_counts.get(prop, 0) + 1

    n = len(records)
    return ScoreReport(
        mean_winkler=winkler_sum / n,
        avg_coverage_deviation=covered / n - ncp,
        mean_sharpness=width_sum / n,
        mean_pinball_per_proportion={p: pinball_sums[p] / pinball_counts[p] for p in sorted(pinball_sums)},
        n_steps=n,
    )
