"""Yates chi-squared, univariate OLS, AICc ranking and group-mean centering."""

from __future__ import annotations

import enum
import math
from collections import defaultdict
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np
from scipy import special

__all__ = [
    "StatsError",
    "PerfectFitError",
    "ContingencyTable2x2",
    "chi_squared_yates",
    "Sex",
    "Nationality",
    "TraitRecord",
    "CONTINUOUS_TRAITS",
    "PREDICTORS",
    "group_mean_center",
    "OLSResult",
    "ols_univariate",
    "null_model",
    "gaussian_log_likelihood",
    "aicc",
    "akaike_weights",
    "RankingRow",
    "ModelRanking",
    "rank_models",
    "evidence_ratio",
    "rank_trait_models",
]

PERFECT_FIT_RSS = 1e-12


class StatsError(ValueError):
    pass


class PerfectFitError(StatsError):
    """Residual sum of squares is zero, so the Gaussian likelihood is unbounded."""


@dataclass(frozen=True)
class ContingencyTable2x2:
    """``[[a, b], [c, d]]``: rows are model variants, columns matched / not matched."""

    a: int
    b: int
    c: int
    d: int

    def __post_init__(self):
        cells = (self.a, self.b, self.c, self.d)
        if any(int(x) != x or x < 0 for x in cells):
            raise StatsError("counts must be non-negative integers")
        if sum(cells) < 1:
            raise StatsError("empty table")

    @classmethod
    def from_rows(cls, rows) -> "ContingencyTable2x2":
        (a, b), (c, d) = rows
        return cls(a, b, c, d)


def chi_squared_yates(table: ContingencyTable2x2 | Sequence[Sequence[int]]) -> tuple[float, float]:
    """Pearson chi-squared with Yates' continuity correction (1 df).

    Returns ``(statistic, p_value)``; the p-value is the chi-squared(1)
    survival function ``erfc(sqrt(x / 2))``.
    """
    if not isinstance(table, ContingencyTable2x2):
        table = ContingencyTable2x2.from_rows(table)
    a, b, c, d = table.a, table.b, table.c, table.d
    n = a + b + c + d
    r1, r2, c1, c2 = a + b, c + d, a + c, b + d
    if min(r1, r2, c1, c2) == 0:
        raise StatsError("a zero marginal leaves expected counts undefined")
    diff = max(abs(a * d - b * c) - n / 2.0, 0.0)
    stat = n * diff * diff / (r1 * r2 * c1 * c2)
    return stat, math.erfc(math.sqrt(stat / 2.0))


class Sex(str, enum.Enum):
    MALE = "male"
    FEMALE = "female"


class Nationality(str, enum.Enum):
    AMERICAN = "american"
    NON_AMERICAN = "non-american"


CONTINUOUS_TRAITS = ("extraversion", "agreeableness", "conscientiousness")
PREDICTORS = ("extraversion", "agreeableness", "conscientiousness", "sex", "nationality")


@dataclass(frozen=True)
class TraitRecord:
    member: str
    team: str
    extraversion: float
    agreeableness: float
    conscientiousness: float
    sex: Sex
    nationality: Nationality

    def __post_init__(self):
        object.__setattr__(self, "sex", Sex(self.sex))
        object.__setattr__(self, "nationality", Nationality(self.nationality))
        for name in CONTINUOUS_TRAITS:
            if not math.isfinite(getattr(self, name)):
                raise StatsError(f"{name} must be finite for member {self.member!r}")

    def predictor(self, name: str) -> float:
        """Numeric coding: binary categories as 0/1 (female, non-American = 0)."""
        if name == "sex":
            return float(self.sex is Sex.MALE)
        if name == "nationality":
            return float(self.nationality is Nationality.AMERICAN)
        return float(getattr(self, name))


def group_mean_center(records: Sequence[TraitRecord], trait: str) -> np.ndarray:
    """Trait minus its team mean, in record order.

    Members alone in their team get 0.
    """
    if trait not in CONTINUOUS_TRAITS:
        raise StatsError(f"{trait!r} is not a continuous trait")
    by_team: dict[str, list[int]] = defaultdict(list)
    for i, r in enumerate(records):
        if not r.team:
            raise StatsError(f"member {r.member!r} has no team")
        by_team[r.team].append(i)
    raw = np.array([getattr(r, trait) for r in records], dtype=float)
    out = np.zeros_like(raw)
    for idx in by_team.values():
        vals = raw[idx]
        out[idx] = vals - vals.mean() if len(idx) > 1 else 0.0
    return out


def gaussian_log_likelihood(rss: float, n: int) -> float:
    """Log-likelihood of a Gaussian linear model at the MLE variance RSS/n."""
    if rss < PERFECT_FIT_RSS:
        return math.inf
    return -0.5 * n * (math.log(2.0 * math.pi * rss / n) + 1.0)


@dataclass(frozen=True)
class OLSResult:
    beta: float
    intercept: float
    p_beta: float
    residual_ss: float
    log_likelihood: float
    n: int
    perfect_fit: bool = False


def ols_univariate(y, x) -> OLSResult:
    """Least squares ``y = intercept + beta * x`` with a two-sided t-test on beta."""
    y = np.asarray(y, dtype=float)
    x = np.asarray(x, dtype=float)
    n = y.size
    if x.shape != y.shape:
        raise StatsError("x and y lengths differ")
    if n < 3:
        raise StatsError("need at least 3 observations")
    xc = x - x.mean()
    sxx = float(xc @ xc)
    if sxx <= 0 or np.ptp(x) == 0:
        raise StatsError("predictor is constant")
    beta = float(xc @ (y - y.mean())) / sxx
    intercept = float(y.mean() - beta * x.mean())
    resid = y - intercept - beta * x
    rss = float(resid @ resid)
    df = n - 2
    if rss < PERFECT_FIT_RSS:
        return OLSResult(beta, intercept, 0.0, rss, math.inf, n, perfect_fit=True)
    se = math.sqrt(rss / df / sxx)
    t = beta / se
    # two-sided Student-t tail through the regularized incomplete beta function
    p = float(special.betainc(df / 2.0, 0.5, df / (df + t * t)))
    return OLSResult(beta, intercept, p, rss, gaussian_log_likelihood(rss, n), n)


def null_model(y) -> tuple[float, float, float]:
    """Intercept-only fit: ``(mean, residual_ss, log_likelihood)``."""
    y = np.asarray(y, dtype=float)
    if y.size < 2:
        raise StatsError("need at least 2 observations")
    mean = float(y.mean())
    rss = float(((y - mean) ** 2).sum())
    return mean, rss, gaussian_log_likelihood(rss, y.size)


def aicc(log_likelihood: float, k: int, n: int) -> float:
    """``-2 LL + 2k + 2k(k+1)/(n-k-1)``."""
    if k < 1:
        raise StatsError("k must be at least 1")
    if n <= k + 1:
        raise StatsError(f"AICc needs n > k + 1 (n={n}, k={k})")
    if not math.isfinite(log_likelihood):
        raise PerfectFitError("log-likelihood is not finite (perfect fit?)")
    return -2.0 * log_likelihood + 2.0 * k + 2.0 * k * (k + 1) / (n - k - 1)


def akaike_weights(deltas) -> np.ndarray:
    deltas = np.asarray(deltas, dtype=float)
    w = np.exp(-0.5 * (deltas - deltas.min()))
    return w / w.sum()


@dataclass(frozen=True)
class RankingRow:
    name: str
    k: int
    log_likelihood: float
    aicc: float
    delta: float
    weight: float
    top: bool


@dataclass(frozen=True)
class ModelRanking:
    rows: tuple[RankingRow, ...]
    n: int
    target: str = ""
    extras: Mapping[str, float] = field(default_factory=dict)

    def names(self) -> list[str]:
        return [r.name for r in self.rows]

    def row(self, name: str) -> RankingRow:
        for r in self.rows:
            if r.name == name:
                return r
        raise KeyError(name)

    def top_set(self) -> list[str]:
        return [r.name for r in self.rows if r.top]


def rank_models(
    candidates: Sequence[tuple[str, float, int]], n: int, target: str = "", top_delta: float = 2.0
) -> ModelRanking:
    """AICc table sorted best first; ``top`` marks the best and any model within 2 units."""
    if len(candidates) < 2:
        raise StatsError("need at least two candidate models")
    scored = [(name, ll, k, aicc(ll, k, n)) for name, ll, k in candidates]
    order = sorted(range(len(scored)), key=lambda i: (scored[i][3], i))
    best = scored[order[0]][3]
    deltas = np.array([scored[i][3] - best for i in order])
    weights = akaike_weights(deltas)
    rows = tuple(
        RankingRow(
            name=scored[i][0],
            k=scored[i][2],
            log_likelihood=scored[i][1],
            aicc=scored[i][3],
            delta=float(dl),
            weight=float(w),
            top=bool(j == 0 or dl < top_delta),
        )
        for j, (i, dl, w) in enumerate(zip(order, deltas, weights))
    )
    return ModelRanking(rows, n, target)


def evidence_ratio(w_i: float, w_j: float) -> float:
    if not w_j > 0:
        raise StatsError("reference weight must be positive")
    return w_i / w_j


def rank_trait_models(
    records: Sequence[TraitRecord], values: Mapping[str, float], target: str = ""
) -> ModelRanking:
    """Null model plus one univariate model per trait, ranked by AICc.

    ``values`` maps member id to the response (a fitted parameter).  Continuous
    traits are group-mean centered within teams first.  The ranking's
    ``extras`` hold each model's evidence ratio against the null model and the
    slope p-values.
    """
    records = [r for r in records if r.member in values]
    missing = set(values) - {r.member for r in records}
    if missing:
        raise StatsError(f"no trait records for members {sorted(missing)}")
    y = np.array([values[r.member] for r in records], dtype=float)
    n = y.size
    _, _, ll_null = null_model(y)
    candidates = [("Null", ll_null, 2)]
    extras: dict[str, float] = {}
    for name in PREDICTORS:
        if name in CONTINUOUS_TRAITS:
            x = group_mean_center(records, name)
        else:
            x = np.array([r.predictor(name) for r in records])
        res = ols_univariate(y, x)
        candidates.append((name.capitalize(), res.log_likelihood, 3))
        extras[f"beta:{name.capitalize()}"] = res.beta
        extras[f"p:{name.capitalize()}"] = res.p_beta
    ranking = rank_models(candidates, n, target)
    w_null = ranking.row("Null").weight
    for r in ranking.rows:
        extras[f"er_vs_null:{r.name}"] = evidence_ratio(r.weight, w_null)
    return ModelRanking(ranking.rows, n, target, extras)
