"""Conversation-pattern statistics, ensemble percentile intervals and coverage.

Three statistics are tracked:

speaking
    share of all turns taken by each member.
aba
    share of a member's own turns whose lag-2 predecessor is also theirs
    (exactly one turn by someone else in between).  Undefined (NaN) for a
    member with no turns.
dyadic
    share of all turns that lie inside a long two-person exchange.  An
    exchange is a maximal contiguous window whose speaker set is exactly one
    dyad; "long" means at least ``min_len`` turns.  Consecutive exchanges share
    their pivot turn, which then counts once for each of the two dyads.

Statistics are built from raw counts so several meetings can be pooled
without creating cross-meeting patterns.  All counting is vectorised over
the rows of an ``(R, T)`` array, so one code path serves a single observed
sequence and a 10,000-row ensemble.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .model import Roster, TurnSequence

logger = logging.getLogger(__name__)

__all__ = [
    "UNDEFINED",
    "STATISTICS",
    "PatternCounts",
    "PatternReport",
    "PatternEnsemble",
    "Interval",
    "CoverageVerdict",
    "CoverageReport",
    "pattern_counts",
    "pattern_report",
    "speaking_proportions",
    "aba_proportions",
    "dyadic_long_proportions",
    "percentile_ci",
    "coverage_report",
    "CoverageComparison",
]

UNDEFINED = math.nan
STATISTICS = ("speaking", "aba", "dyadic")


@dataclass(frozen=True, eq=False)
class PatternCounts:
    """Raw counts, one row per replication.

    ``turns``: (R, n); ``aba``: (R, n); ``dyadic``: (R, n_dyads); ``total``: (R,)
    """

    turns: np.ndarray
    aba: np.ndarray
    dyadic: np.ndarray
    total: np.ndarray

    def __add__(self, other: "PatternCounts") -> "PatternCounts":
        return PatternCounts(
            self.turns + other.turns,
            self.aba + other.aba,
            self.dyadic + other.dyadic,
            self.total + other.total,
        )


def _as_rows(seqs) -> np.ndarray:
    arr = np.asarray(seqs, dtype=np.int64)
    return arr.reshape(1, -1) if arr.ndim == 1 else arr


def pattern_counts(seqs, n: int, min_len: int = 4) -> PatternCounts:
    """Counts for every row of ``seqs`` (an ``(R, T)`` array or one sequence)."""
    if min_len < 2:
        raise ValueError("min_len must be >= 2")
    s = _as_rows(seqs)
    R, T = s.shape
    turns = np.stack([(s == i).sum(axis=1) for i in range(n)], axis=1)

    # lag2[:, k] is True when turn k+2 repeats the speaker of turn k
    lag2 = s[:, 2:] == s[:, :-2]
    aba = np.stack([((s[:, 2:] == i) & lag2).sum(axis=1) for i in range(n)], axis=1)

    dyads = [(i, j) for i in range(n) for j in range(i + 1, n)]
    dyadic = np.zeros((R, len(dyads)), dtype=np.int64)
    if T >= 2 and dyads:
        # adjacent pairs (t, t+1); pair t continues pair t-1's window iff turn t+1 repeats turn t-1
        P = T - 1
        brk = np.zeros((R, P), dtype=np.int64)
        brk[:, 1:] = ~lag2
        wid = np.cumsum(brk, axis=1)
        flat = (np.arange(R)[:, None] * P + wid).ravel()
        pairs_per_window = np.bincount(flat, minlength=R * P)
        length = pairs_per_window[flat].reshape(R, P) + 1
        qualifies = length >= min_len
        lo = np.minimum(s[:, :-1], s[:, 1:])
        hi = np.maximum(s[:, :-1], s[:, 1:])
        for k, (i, j) in enumerate(dyads):
            hit = qualifies & (lo == i) & (hi == j)
            inside = np.zeros((R, T), dtype=bool)
            inside[:, :-1] |= hit
            inside[:, 1:] |= hit
            dyadic[:, k] = inside.sum(axis=1)
    return PatternCounts(turns, aba, dyadic, np.full(R, T, dtype=np.int64))


def _proportions(counts: PatternCounts):
    with np.errstate(invalid="ignore", divide="ignore"):
        total = counts.total[:, None].astype(float)
        speaking = np.where(total > 0, counts.turns / total, UNDEFINED)
        aba = np.where(counts.turns > 0, counts.aba / np.maximum(counts.turns, 1), UNDEFINED)
        dyadic = np.where(total > 0, counts.dyadic / total, UNDEFINED)
    return speaking, aba, dyadic


def speaking_proportions(seq: TurnSequence, roster: Roster | None = None) -> np.ndarray:
    if len(seq) == 0:
        raise ValueError("speaking proportions need at least one turn")
    return pattern_report([seq], roster or seq.roster).speaking_proportion


def aba_proportions(seq: TurnSequence, roster: Roster | None = None) -> np.ndarray:
    return pattern_report([seq], roster or seq.roster).aba_proportion


def dyadic_long_proportions(
    seq: TurnSequence, roster: Roster | None = None, min_len: int = 4
) -> np.ndarray:
    """Per-dyad values in the order of :meth:`Roster.dyads`."""
    return pattern_report([seq], roster or seq.roster, min_len).dyadic_long_proportion


@dataclass(frozen=True, eq=False)
class PatternReport:
    roster: Roster
    speaking_proportion: np.ndarray
    aba_proportion: np.ndarray
    dyadic_long_proportion: np.ndarray

    def values(self, statistic: str) -> np.ndarray:
        return {
            "speaking": self.speaking_proportion,
            "aba": self.aba_proportion,
            "dyadic": self.dyadic_long_proportion,
        }[statistic]

    def subjects(self, statistic: str) -> list[str]:
        return self.roster.dyad_labels() if statistic == "dyadic" else list(self.roster.members)


def pattern_report(
    meetings: Sequence[TurnSequence], roster: Roster, min_len: int = 4
) -> PatternReport:
    """Statistics pooled over meetings (no patterns cross a meeting boundary)."""
    meetings = list(meetings)
    n = len(roster)
    total = None
    for m in meetings:
        if m.roster != roster:
            raise ValueError("meeting roster does not match")
        c = pattern_counts(m.speakers, n, min_len)
        total = c if total is None else total + c
    if total is None or int(total.total[0]) == 0:
        raise ValueError("pattern statistics need at least one turn")
    speaking, aba, dyadic = _proportions(total)
    return PatternReport(roster, speaking[0], aba[0], dyadic[0])


@dataclass(frozen=True, eq=False)
class PatternEnsemble:
    """Statistics for R replications stacked row-wise."""

    roster: Roster
    speaking: np.ndarray
    aba: np.ndarray
    dyadic: np.ndarray

    @classmethod
    def from_arrays(
        cls, blocks: Iterable[np.ndarray], roster: Roster, min_len: int = 4, chunk: int = 2000
    ) -> "PatternEnsemble":
        """From simulated blocks, one ``(R, T_j)`` array per meeting."""
        n = len(roster)
        total = None
        for block in blocks:
            parts = [
                pattern_counts(block[i : i + chunk], n, min_len)
                for i in range(0, block.shape[0], chunk)
            ]
            c = PatternCounts(
                np.concatenate([p.turns for p in parts]),
                np.concatenate([p.aba for p in parts]),
                np.concatenate([p.dyadic for p in parts]),
                np.concatenate([p.total for p in parts]),
            )
            total = c if total is None else total + c
        if total is None:
            raise ValueError("empty ensemble")
        return cls(roster, *_proportions(total))

    @classmethod
    def from_reports(cls, reports: Sequence[PatternReport]) -> "PatternEnsemble":
        reports = list(reports)
        if not reports:
            raise ValueError("empty ensemble")
        return cls(
            reports[0].roster,
            np.stack([r.speaking_proportion for r in reports]),
            np.stack([r.aba_proportion for r in reports]),
            np.stack([r.dyadic_long_proportion for r in reports]),
        )

    def __len__(self) -> int:
        return int(self.speaking.shape[0])

    def values(self, statistic: str) -> np.ndarray:
        return {"speaking": self.speaking, "aba": self.aba, "dyadic": self.dyadic}[statistic]


class Interval(tuple):
    """``(low, high)`` with the number of undefined values that were dropped."""

    excluded: int

    def __new__(cls, low: float, high: float, excluded: int = 0):
        obj = super().__new__(cls, (low, high))
        obj.excluded = excluded
        return obj

    @property
    def low(self) -> float:
        return self[0]

    @property
    def high(self) -> float:
        return self[1]


def _nearest_rank(sorted_values: np.ndarray, q: float) -> float:
    N = sorted_values.size
    rank = max(1, math.ceil(q * N - 1e-9))
    return float(sorted_values[min(rank, N) - 1])


def percentile_ci(values, level: float = 0.95) -> Interval:
    """Central percentile interval by the nearest-rank rule; NaNs are dropped."""
    if not 0.0 < level < 1.0:
        raise ValueError("level must lie in (0, 1)")
    v = np.asarray(values, dtype=float).ravel()
    if v.size == 0:
        raise ValueError("no values to summarise")
    keep = ~np.isnan(v)
    excluded = int(v.size - keep.sum())
    v = np.sort(v[keep])
    if v.size == 0:
        return Interval(UNDEFINED, UNDEFINED, excluded)
    if v.size < 40:
        logger.warning("only %d values for a %.0f%% interval", v.size, 100 * level)
    tail = (1.0 - level) / 2.0
    return Interval(_nearest_rank(v, tail), _nearest_rank(v, 1.0 - tail), excluded)


@dataclass(frozen=True)
class CoverageVerdict:
    statistic: str
    subject: str
    observed: float
    ci_low: float
    ci_high: float
    covered: bool


@dataclass(frozen=True)
class CoverageReport:
    verdicts: tuple[CoverageVerdict, ...]
    level: float
    replications: int
    variant: str = ""

    def coverage_rate(self, statistic: str | None = None) -> float:
        rows = [v for v in self.verdicts if statistic is None or v.statistic == statistic]
        return sum(v.covered for v in rows) / len(rows) if rows else UNDEFINED

    def counts(self, statistic: str) -> tuple[int, int]:
        """(covered, not covered) for one statistic."""
        rows = [v for v in self.verdicts if v.statistic == statistic]
        hit = sum(v.covered for v in rows)
        return hit, len(rows) - hit


def coverage_report(
    observed: PatternReport,
    ensemble: PatternEnsemble | Sequence[PatternReport],
    level: float = 0.95,
    variant: str = "",
) -> CoverageReport:
    if not isinstance(ensemble, PatternEnsemble):
        ensemble = PatternEnsemble.from_reports(ensemble)
    if len(ensemble) == 0:
        raise ValueError("empty ensemble")
    if len(ensemble) == 1:
        logger.warning("single replication: intervals are degenerate")
    verdicts = []
    for stat in STATISTICS:
        obs = observed.values(stat)
        sim = ensemble.values(stat)
        for k, subject in enumerate(observed.subjects(stat)):
            lo, hi = percentile_ci(sim[:, k], level)
            x = float(obs[k])
            verdicts.append(CoverageVerdict(stat, subject, x, lo, hi, bool(lo <= x <= hi)))
    return CoverageReport(tuple(verdicts), level, len(ensemble), variant)


@dataclass(frozen=True)
class CoverageComparison:
    """Coverage under several fitted variants plus per-statistic chi-squared
    comparisons of their matched/unmatched counts (``None`` when undefined)."""

    reports: tuple[CoverageReport, ...]
    chi_squared: dict[str, tuple[float, float] | None]
