"""Maximum-likelihood fitting of team parameters.

The optimiser works in unconstrained coordinates:

* baselines: ``pi = floor + (1 - n*floor) * softmax([z_1..z_{n-1}, 0])``
* memory scales: ``d = exp(w)``

so every iterate satisfies ``sum(pi) = 1``, ``pi >= PI_FLOOR`` and ``d > 0``.
The log-likelihood gradient is analytic (see
:meth:`HistoryFeatures.log_likelihood_and_grad`) and fed to L-BFGS-B.
"""

from __future__ import annotations

import enum
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.optimize import minimize

from .model import PI_FLOOR, HistoryFeatures, Roster, TeamParams, TurnSequence
from .simulator import worker_count

logger = logging.getLogger(__name__)

__all__ = [
    "ModelVariant",
    "FitOptions",
    "FitResult",
    "SplitEvaluation",
    "FitError",
    "free_parameter_count",
    "fit",
    "fit_features",
    "evaluate_split",
    "SplitComparison",
    "compare_split",
]

# keeps softmax/exp away from overflow; exp(-30) is far below PI_FLOOR's effect
_Z_BOUND = 30.0
_W_BOUNDS = (-30.0, 8.0)


class FitError(ValueError):
    pass


class ModelVariant(str, enum.Enum):
    FULL = "full"
    REDUCED = "reduced"
    TIED = "tied"


def free_parameter_count(variant: ModelVariant, n: int) -> int:
    variant = ModelVariant(variant)
    if variant is ModelVariant.FULL:
        return 2 * n - 1
    if variant is ModelVariant.REDUCED:
        return n - 1
    return 1


@dataclass(frozen=True)
class FitOptions:
    restarts: int = 8
    seed: int = 0
    tol: float = 1e-8
    max_iter: int = 2000

    def __post_init__(self):
        if self.restarts < 1:
            raise ValueError("need at least one restart")
        if self.max_iter < 1:
            raise ValueError("max_iter must be positive")


@dataclass(frozen=True)
class FitResult:
    team: TeamParams
    variant: ModelVariant
    log_likelihood: float
    converged: bool
    n_restarts_used: int
    k: int
    n_turns: int = 0
    warnings: tuple[str, ...] = field(default_factory=tuple)


@dataclass(frozen=True)
class SplitEvaluation:
    train_ll: float
    test_ll: float
    variant: ModelVariant
    split_fraction: float = 0.8
    n_train: int = 0
    n_test: int = 0


class _Objective:
    """Negative log-likelihood in unconstrained coordinates."""

    def __init__(self, features: HistoryFeatures, variant: ModelVariant):
        self.features = features
        self.variant = variant
        self.n = features.n_members
        self.scale = 1.0 - self.n * PI_FLOOR

    def bounds(self):
        zb = [(-_Z_BOUND, _Z_BOUND)] * (self.n - 1)
        if self.variant is ModelVariant.TIED:
            return [_W_BOUNDS]
        if self.variant is ModelVariant.REDUCED:
            return zb
        return zb + [_W_BOUNDS] * self.n

    def _softmax(self, z):
        full = np.append(z, 0.0)
        e = np.exp(full - full.max())
        return e / e.sum()

    def unpack(self, x):
        n = self.n
        if self.variant is ModelVariant.TIED:
            return np.full(n, 1.0 / n), np.full(n, math.exp(x[0]))
        s = self._softmax(x[: n - 1])
        pi = PI_FLOOR + self.scale * s
        if self.variant is ModelVariant.REDUCED:
            return pi, np.zeros(n)
        return pi, np.exp(x[n - 1 :])

    def pack(self, pi, d) -> np.ndarray:
        if self.variant is ModelVariant.TIED:
            return np.array([_clip_w(np.mean(d))])
        s = np.clip((np.asarray(pi) - PI_FLOOR) / self.scale, 1e-300, None)
        z = np.clip(np.log(s[:-1]) - np.log(s[-1]), -_Z_BOUND, _Z_BOUND)
        if self.variant is ModelVariant.REDUCED:
            return z
        return np.concatenate([z, [_clip_w(v) for v in d]])

    def __call__(self, x):
        pi, d = self.unpack(x)
        ll, g_pi, g_d = self.features.log_likelihood_and_grad(pi, d)
        if not math.isfinite(ll):
            return math.inf, np.zeros_like(x)
        n = self.n
        if self.variant is ModelVariant.TIED:
            return -ll, -np.array([np.sum(g_d * d)])
        s = (pi - PI_FLOOR) / self.scale
        g_z = (self.scale * s * (g_pi - np.dot(s, g_pi)))[: n - 1]
        if self.variant is ModelVariant.REDUCED:
            return -ll, -g_z
        return -ll, -np.concatenate([g_z, g_d * d])


def _clip_w(d: float) -> float:
    return float(np.clip(math.log(max(d, 1e-300)), *_W_BOUNDS))


def _empirical_pi(features: HistoryFeatures) -> np.ndarray:
    counts = np.bincount(features.speaker, minlength=features.n_members) + 0.5
    return counts / counts.sum()


def _run(obj: _Objective, x0: np.ndarray, opts: FitOptions):
    f0 = abs(obj(x0)[0])
    # L-BFGS-B's ftol is relative; scale it so the absolute step criterion is opts.tol
    ftol = opts.tol / max(f0, 1.0)
    res = minimize(
        obj,
        x0,
        jac=True,
        method="L-BFGS-B",
        bounds=obj.bounds(),
        options={"maxiter": opts.max_iter, "ftol": ftol, "gtol": 1e-7},
    )
    return res


def _converged(obj: _Objective, res) -> bool:
    if res.success:
        return True
    # L-BFGS-B reports ABNORMAL when the line search runs out of precision at an optimum
    g = np.array(res.jac, dtype=float)
    lo, hi = np.array(obj.bounds()).T
    g[(res.x <= lo) & (g > 0)] = 0.0
    g[(res.x >= hi) & (g < 0)] = 0.0
    return bool(np.all(np.isfinite(g)) and np.max(np.abs(g)) < 1e-4)


def _starts(obj: _Objective, opts: FitOptions, seeds: list[np.ndarray]) -> list[np.ndarray]:
    rng = np.random.default_rng(opts.seed)
    starts = list(seeds)
    while len(starts) < opts.restarts:
        if obj.variant is ModelVariant.TIED:
            starts.append(rng.uniform(-3.0, 2.0, size=1))
            continue
        z = rng.normal(0.0, 1.0, size=obj.n - 1)
        if obj.variant is ModelVariant.REDUCED:
            starts.append(z)
        else:
            starts.append(np.concatenate([z, rng.uniform(-3.0, 1.5, size=obj.n)]))
    return starts[: max(opts.restarts, len(seeds))]


def fit_features(
    features: HistoryFeatures,
    roster: Roster,
    variant: ModelVariant | str = ModelVariant.FULL,
    options: FitOptions | None = None,
) -> FitResult:
    """Fit from precomputed history features (see :func:`fit`)."""
    variant = ModelVariant(variant)
    opts = options or FitOptions()
    n = len(roster)
    k = free_parameter_count(variant, n)
    T = len(features)
    warns: list[str] = []
    if T < k + 1:
        raise FitError(f"{T} turns cannot identify {k} free parameters")
    if T < 10 * k:
        warns.append(f"only {T} turns for {k} free parameters")
    if n == 2 and variant is not ModelVariant.TIED:
        warns.append("two-member team: alternation is forced, only first turns inform pi")
    unseen = sorted(set(range(n)) - set(np.unique(features.speaker).tolist()))
    for i in unseen:
        warns.append(f"member {roster.members[i]!r} never speaks; pi pinned near floor")

    obj = _Objective(features, variant)
    seeds: list[np.ndarray] = []
    reduced_point = None
    if variant is ModelVariant.FULL:
        red = fit_features(features, roster, ModelVariant.REDUCED, opts)
        reduced_point = (red.team.pi, np.zeros(n))
        seeds.append(obj.pack(red.team.pi, np.full(n, 1e-3)))
        seeds.append(obj.pack(_empirical_pi(features), np.ones(n)))
    elif variant is ModelVariant.REDUCED:
        seeds.append(obj.pack(_empirical_pi(features), np.zeros(n)))
    else:
        seeds.append(np.array([0.0]))

    starts = _starts(obj, opts, seeds)
    workers = min(worker_count(), len(starts))
    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            results = list(pool.map(lambda x0: _run(obj, x0, opts), starts))
    else:
        results = [_run(obj, x0, opts) for x0 in starts]

    # deterministic argmax, ties to the lowest restart index
    best = min(range(len(results)), key=lambda i: (results[i].fun, i))
    pi, d = obj.unpack(results[best].x)
    ll = features.log_likelihood(pi, d)
    converged = _converged(obj, results[best])
    if reduced_point is not None:
        ll_red = features.log_likelihood(*reduced_point)
        if ll_red >= ll:
            pi, d = reduced_point
            ll = ll_red
    if not converged:
        warns.append("optimiser did not converge; returning best point found")
        logger.warning("fit did not converge (%s)", results[best].message)
    team = TeamParams.from_arrays(roster, pi, d)
    return FitResult(
        team=team,
        variant=variant,
        log_likelihood=float(features.log_likelihood(team.pi, team.d)),
        converged=converged,
        n_restarts_used=len(starts),
        k=k,
        n_turns=T,
        warnings=tuple(warns),
    )


def fit(
    data: Sequence[TurnSequence],
    roster: Roster,
    variant: ModelVariant | str = ModelVariant.FULL,
    options: FitOptions | None = None,
) -> FitResult:
    """Maximum-likelihood parameters for one team across its meetings."""
    data = list(data)
    for s in data:
        if s.roster != roster:
            raise FitError("every sequence must use the fitting roster")
    return fit_features(HistoryFeatures.from_sequences(data, len(roster)), roster, variant, options)


def evaluate_split(
    data: Sequence[TurnSequence],
    roster: Roster,
    variant: ModelVariant | str = ModelVariant.FULL,
    fraction: float = 0.8,
    options: FitOptions | None = None,
) -> SplitEvaluation:
    """Fit on the first ``fraction`` of the turn timeline, score the rest.

    Meetings are concatenated in order; a meeting straddling the boundary is
    cut inside.  Test turns keep the true preceding history for their
    memory and exclusion terms.
    """
    if not 0.0 < fraction < 1.0:
        raise FitError("split fraction must lie strictly between 0 and 1")
    variant = ModelVariant(variant)
    feats = HistoryFeatures.from_sequences(list(data), len(roster))
    T = len(feats)
    n_train = int(math.floor(fraction * T))
    if n_train >= T:
        raise FitError("split leaves no test turns")
    train = feats.rows(0, n_train)
    test = feats.rows(n_train)
    res = fit_features(train, roster, variant, options)
    pi, d = res.team.pi, res.team.d
    return SplitEvaluation(
        train_ll=res.log_likelihood,
        test_ll=float(test.log_likelihood(pi, d)),
        variant=variant,
        split_fraction=float(fraction),
        n_train=n_train,
        n_test=T - n_train,
    )


@dataclass(frozen=True)
class SplitComparison:
    """Held-out log-likelihood without and with memory for one dataset."""

    dataset: str
    no_memory: SplitEvaluation
    memory: SplitEvaluation


def compare_split(
    data: Sequence[TurnSequence],
    roster: Roster,
    fraction: float = 0.8,
    options: FitOptions | None = None,
    dataset: str = "",
) -> SplitComparison:
    return SplitComparison(
        dataset,
        evaluate_split(data, roster, ModelVariant.REDUCED, fraction, options),
        evaluate_split(data, roster, ModelVariant.FULL, fraction, options),
    )
