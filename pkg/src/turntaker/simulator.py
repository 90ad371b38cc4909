"""Synthetic conversations and replication ensembles.

Every replication ``r`` draws from its own PCG64 stream keyed by
``(seed, r)`` through :class:`numpy.random.SeedSequence` spawn keys, so a
replication's output never depends on which other replications were run or
in what order.  One uniform is consumed per turn and mapped to a speaker by
inverse-CDF over the likelihood vector in roster order.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .model import ConversationState, TeamParams, TurnSequence, decay_table, speaking_likelihoods

__all__ = [
    "SimConfig",
    "substream",
    "worker_count",
    "sample_next_speaker",
    "simulate_conversation",
    "simulate_array",
    "replicate_ensemble",
    "ensemble_array",
]

_CHUNK = 512


@dataclass(frozen=True)
class SimConfig:
    turns: int
    seed: int = 0
    replications: int = 10_000

    def __post_init__(self):
        if int(self.turns) < 1:
            raise ValueError("turns must be >= 1")
        if int(self.replications) < 1:
            raise ValueError("replications must be >= 1")
        if not 0 <= int(self.seed) < 2**64:
            raise ValueError("seed must be a 64-bit unsigned integer")


def substream(seed: int, *key: int) -> np.random.Generator:
    """Independent generator for ``(seed, *key)``."""
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=key)))


def worker_count() -> int:
    """Thread cap from ``TURNTAKER_THREADS`` (default: CPU count)."""
    cap = os.environ.get("TURNTAKER_THREADS")
    ncpu = os.cpu_count() or 1
    if cap:
        try:
            return max(1, min(int(cap), ncpu))
        except ValueError:
            pass
    return ncpu


def _inverse_cdf(ell: np.ndarray, u: np.ndarray) -> np.ndarray:
    """Row-wise first index whose cumulative likelihood exceeds ``u * total``."""
    cdf = np.cumsum(ell, axis=1)
    target = u * cdf[:, -1]
    choice = np.sum(cdf <= target[:, None], axis=1)
    overflow = choice >= ell.shape[1]
    if np.any(overflow):
        # u * total rounded up to total: take the last eligible member
        n = ell.shape[1]
        last_pos = n - 1 - np.argmax(ell[overflow, ::-1] > 0, axis=1)
        choice[overflow] = last_pos
    return choice


def sample_next_speaker(
    team: TeamParams, state: ConversationState, rng: np.random.Generator
) -> int:
    ell = speaking_likelihoods(team, state)
    u = np.array([rng.random()])
    return int(_inverse_cdf(ell[None, :], u)[0])


def _walk(pi: np.ndarray, d: np.ndarray, uniforms: np.ndarray) -> np.ndarray:
    """Run ``R`` conversations in lock-step, one row of ``uniforms`` each."""
    R, T = uniforms.shape
    n = pi.size
    table = decay_table(T)
    rows = np.arange(R)
    last = np.full((R, n), -1, dtype=np.int64)
    prev = np.full(R, -1, dtype=np.int64)
    out = np.empty((R, T), dtype=np.int64)
    for t in range(T):
        seen = last >= 0
        gap = np.where(seen, t - last, 0)
        ell = pi + np.where(seen, d * table[gap], 0.0)
        if t:
            ell[rows, prev] = 0.0
        choice = _inverse_cdf(ell, uniforms[:, t])
        out[:, t] = choice
        last[rows, choice] = t
        prev = choice
    return out


def _uniforms(seed: int, keys: Sequence[tuple[int, ...]], turns: int) -> np.ndarray:
    return np.stack([substream(seed, *k).random(turns) for k in keys])


def simulate_array(
    team: TeamParams, turns: int, seed: int, keys: Sequence[tuple[int, ...]]
) -> np.ndarray:
    """Raw ``(len(keys), turns)`` array of speaker indices, one row per key."""
    keys = list(keys)
    pi, d = team.pi, team.d
    chunks = [keys[i : i + _CHUNK] for i in range(0, len(keys), _CHUNK)]

    def run(chunk):
        return _walk(pi, d, _uniforms(seed, chunk, turns))

    workers = min(worker_count(), len(chunks))
    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            parts = list(pool.map(run, chunks))
    else:
        parts = [run(c) for c in chunks]
    return np.concatenate(parts, axis=0)


def simulate_conversation(team: TeamParams, config: SimConfig) -> TurnSequence:
    """One conversation; identical to replication 0 of :func:`replicate_ensemble`."""
    arr = simulate_array(team, int(config.turns), int(config.seed), [(0,)])
    return TurnSequence(team.roster, arr[0])


def ensemble_array(
    team: TeamParams, config: SimConfig, meeting_lengths: Sequence[int] | None = None
) -> list[np.ndarray]:
    """Ensemble as arrays, one ``(R, T_j)`` block per meeting.

    Without ``meeting_lengths`` each replication is a single conversation of
    ``config.turns`` turns keyed by ``(r,)``.  With them, meeting ``j`` of
    replication ``r`` is keyed by ``(r, j)``.
    """
    R = int(config.replications)
    if meeting_lengths is None:
        return [simulate_array(team, int(config.turns), int(config.seed), [(r,) for r in range(R)])]
    return [
        simulate_array(team, int(T), int(config.seed), [(r, j) for r in range(R)])
        for j, T in enumerate(meeting_lengths)
    ]


def replicate_ensemble(team: TeamParams, config: SimConfig) -> list[TurnSequence]:
    (arr,) = ensemble_array(team, config)
    return [TurnSequence(team.roster, row) for row in arr]
