"""Memory-weighted turn-taking model.

Each team member i carries a baseline propensity ``pi_i`` and a memory scale
``d_i``.  At turn t the member's likelihood of speaking is

    l_i(t) = 0                                   if i spoke at t - 1
    l_i(t) = pi_i + d_i * exp(-0.5 * (t - t_last_i))   otherwise

and the next speaker is drawn from the normalised likelihoods.  Members who
have not spoken yet contribute no memory term.

Everything here is pure and operates on immutable values.  The streaming
functions (``turn_probabilities``/``advance``) are the reference path;
:class:`HistoryFeatures` is the vectorised path the fitter uses.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

__all__ = [
    "NEVER",
    "DECAY_RATE",
    "PI_FLOOR",
    "ModelError",
    "Roster",
    "MemberParams",
    "TeamParams",
    "TurnSequence",
    "ConversationState",
    "memory_value",
    "decay_table",
    "speaking_likelihoods",
    "turn_probabilities",
    "advance",
    "sequence_log_likelihood",
    "multi_meeting_log_likelihood",
    "HistoryFeatures",
]

#: Sentinel for "has not spoken yet in this meeting".
NEVER = None

DECAY_RATE = 0.5
PI_FLOOR = 1e-9
_SUM_TOL = 1e-9


class ModelError(ValueError):
    """Raised when a model value or contract is violated."""


@dataclass(frozen=True)
class Roster:
    members: tuple[str, ...]

    def __init__(self, members: Iterable[str]):
        members = tuple(members)
        if len(members) < 2:
            raise ModelError("a roster needs at least two members")
        if any(not isinstance(m, str) or not m for m in members):
            raise ModelError("member identifiers must be non-empty strings")
        if len(set(members)) != len(members):
            raise ModelError(f"duplicate member identifiers in {members!r}")
        object.__setattr__(self, "members", members)

    def __len__(self) -> int:
        return len(self.members)

    def __iter__(self):
        return iter(self.members)

    def index(self, member: str) -> int:
        try:
            return self.members.index(member)
        except ValueError:
            raise ModelError(f"unknown member {member!r}") from None

    def dyads(self) -> list[tuple[int, int]]:
        """Unordered member pairs ``(i, j)`` with ``i < j`` in roster order."""
        n = len(self.members)
        return [(i, j) for i in range(n) for j in range(i + 1, n)]

    def dyad_labels(self) -> list[str]:
        return [f"{self.members[i]}-{self.members[j]}" for i, j in self.dyads()]


@dataclass(frozen=True)
class MemberParams:
    pi: float
    d: float = 0.0

    def __post_init__(self):
        if not (math.isfinite(self.pi) and self.pi >= PI_FLOOR):
            raise ModelError(f"pi must be >= {PI_FLOOR}, got {self.pi}")
        if not (math.isfinite(self.d) and self.d >= 0.0):
            raise ModelError(f"d must be finite and non-negative, got {self.d}")


@dataclass(frozen=True)
class TeamParams:
    """Per-member parameters for one team.

    With ``normalized=True`` (the canonical form) the baselines must sum to
    one.  Probabilities are invariant to scaling every ``(pi, d)`` by the same
    positive constant, so the constraint only fixes the scale.
    """

    roster: Roster
    params: tuple[MemberParams, ...]
    normalized: bool = True

    def __post_init__(self):
        object.__setattr__(self, "params", tuple(self.params))
        if len(self.params) != len(self.roster):
            raise ModelError(
                f"{len(self.params)} parameter pairs for {len(self.roster)} members"
            )
        if self.normalized and abs(sum(p.pi for p in self.params) - 1.0) > _SUM_TOL:
            raise ModelError("baselines must sum to 1 in normalised form")

    @classmethod
    def from_arrays(
        cls, roster: Roster | Sequence[str], pi, d=None, normalize: bool = True
    ) -> "TeamParams":
        """Build from arrays, rescaling ``(pi, d)`` jointly so that sum(pi) = 1."""
        if not isinstance(roster, Roster):
            roster = Roster(roster)
        pi = np.asarray(pi, dtype=float)
        d = np.zeros_like(pi) if d is None else np.asarray(d, dtype=float)
        if pi.shape != (len(roster),) or d.shape != pi.shape:
            raise ModelError("pi and d must have one entry per roster member")
        if normalize:
            total = pi.sum()
            if not total > 0:
                raise ModelError("baselines must have a positive sum")
            if abs(total - 1.0) > 1e-12:
                pi, d = pi / total, d / total
        params = tuple(MemberParams(float(a), float(b)) for a, b in zip(pi, d))
        return cls(roster, params, normalized=normalize)

    @property
    def pi(self) -> np.ndarray:
        return np.array([p.pi for p in self.params])

    @property
    def d(self) -> np.ndarray:
        return np.array([p.d for p in self.params])

    def scaled(self, c: float) -> "TeamParams":
        """Jointly rescaled copy (no longer in normalised form unless c == 1)."""
        if not c > 0:
            raise ModelError("scale must be positive")
        params = tuple(MemberParams(p.pi * c, p.d * c) for p in self.params)
        return TeamParams(self.roster, params, normalized=False)


@dataclass(frozen=True, eq=False)
class TurnSequence:
    """Speakers of one meeting as roster indices; no speaker follows itself."""

    roster: Roster
    speakers: np.ndarray = field(repr=False)

    def __post_init__(self):
        s = np.array(self.speakers, dtype=np.int64).reshape(-1)
        n = len(self.roster)
        if s.size and (s.min() < 0 or s.max() >= n):
            raise ModelError("speaker index outside the roster")
        if s.size > 1 and np.any(s[1:] == s[:-1]):
            t = int(np.flatnonzero(s[1:] == s[:-1])[0]) + 2
            raise ModelError(f"consecutive turns by the same speaker at turn {t}")
        s.flags.writeable = False
        object.__setattr__(self, "speakers", s)

    @classmethod
    def from_ids(cls, roster: Roster, ids: Iterable[str]) -> "TurnSequence":
        return cls(roster, [roster.index(m) for m in ids])

    def __len__(self) -> int:
        return int(self.speakers.size)

    def __iter__(self):
        return (int(s) for s in self.speakers)

    def __getitem__(self, item):
        if isinstance(item, slice):
            return TurnSequence(self.roster, self.speakers[item])
        return int(self.speakers[item])

    def __eq__(self, other):
        if not isinstance(other, TurnSequence):
            return NotImplemented
        return self.roster == other.roster and np.array_equal(
            self.speakers, other.speakers
        )

    def __hash__(self):
        return hash((self.roster, self.speakers.tobytes()))

    def ids(self) -> list[str]:
        return [self.roster.members[s] for s in self.speakers]


@dataclass(frozen=True)
class ConversationState:
    """Turn index of each member's latest turn (``NEVER`` if none) and the
    1-based index of the turn about to be taken."""

    last_spoke: tuple[int | None, ...]
    current_turn: int = 1

    def __post_init__(self):
        object.__setattr__(self, "last_spoke", tuple(self.last_spoke))
        if self.current_turn < 1:
            raise ModelError("turn indices are 1-based")
        seen = [t for t in self.last_spoke if t is not NEVER]
        if any(t < 1 or t >= self.current_turn for t in seen):
            raise ModelError("last_spoke values must lie in [1, current_turn)")
        if seen.count(self.current_turn - 1) > 1:
            raise ModelError("two members cannot share the previous turn")

    @classmethod
    def fresh(cls, n: int) -> "ConversationState":
        return cls((NEVER,) * n, 1)

    @property
    def previous_speaker(self) -> int | None:
        prev = self.current_turn - 1
        for i, t in enumerate(self.last_spoke):
            if t is not NEVER and t == prev:
                return i
        return None

    def gaps(self) -> list[int | None]:
        return [NEVER if t is NEVER else self.current_turn - t for t in self.last_spoke]


def memory_value(d: float, gap: int | None) -> float:
    """Memory boost ``d * exp(-0.5 * gap)``; zero for ``gap=NEVER`` or ``d=0``."""
    if d < 0:
        raise ModelError("memory scale must be non-negative")
    if gap is NEVER:
        return 0.0
    if gap < 1:
        raise ModelError(f"gap must be >= 1, got {gap}")
    if d == 0:
        return 0.0
    return d * math.exp(-DECAY_RATE * gap)


def decay_table(max_gap: int) -> np.ndarray:
    """``exp(-0.5 * g)`` for ``g = 0..max_gap``, bit-identical to :func:`memory_value`."""
    return np.array([math.exp(-DECAY_RATE * g) for g in range(max_gap + 1)])


def _check_state(team: TeamParams, state: ConversationState) -> None:
    if len(state.last_spoke) != len(team.roster):
        raise ModelError("state and team disagree on the number of members")


def speaking_likelihoods(team: TeamParams, state: ConversationState) -> np.ndarray:
    _check_state(team, state)
    prev = state.current_turn - 1
    out = np.empty(len(team.roster))
    for i, (p, last) in enumerate(zip(team.params, state.last_spoke)):
        if last is not NEVER and last == prev:
            out[i] = 0.0
        else:
            gap = NEVER if last is NEVER else state.current_turn - last
            out[i] = p.pi + memory_value(p.d, gap)
    return out


def turn_probabilities(team: TeamParams, state: ConversationState) -> np.ndarray:
    ell = speaking_likelihoods(team, state)
    total = ell.sum()
    if not total > 0:
        raise ModelError("degenerate distribution: all speaking likelihoods are zero")
    return ell / total


def advance(state: ConversationState, speaker: int) -> ConversationState:
    n = len(state.last_spoke)
    if not 0 <= speaker < n:
        raise ModelError(f"speaker index {speaker} outside the roster")
    if state.previous_speaker == speaker:
        raise ModelError("a member cannot take two consecutive turns")
    last = list(state.last_spoke)
    last[speaker] = state.current_turn
    return ConversationState(tuple(last), state.current_turn + 1)


def sequence_log_likelihood(
    team: TeamParams, seq: TurnSequence, state: ConversationState | None = None
) -> float:
    """Log-probability of ``seq`` under ``team``, streamed turn by turn.

    ``state`` lets a sequence be scored as the continuation of earlier turns.
    """
    if seq.roster != team.roster:
        raise ModelError("sequence and team use different rosters")
    if state is None:
        state = ConversationState.fresh(len(team.roster))
    total = 0.0
    for speaker in seq:
        p = turn_probabilities(team, state)[speaker]
        if p <= 0:
            return -math.inf
        total += math.log(p)
        state = advance(state, speaker)
    return total


def multi_meeting_log_likelihood(team: TeamParams, seqs: Iterable[TurnSequence]) -> float:
    """Sum over meetings; the conversation state resets at each meeting."""
    return sum((sequence_log_likelihood(team, s) for s in seqs), 0.0)


@dataclass(frozen=True, eq=False)
class HistoryFeatures:
    """Per-turn quantities the log-likelihood depends on, precomputed once.

    Rows are turns (meetings concatenated, state reset at each boundary):

    * ``speaker[t]``   observed speaker
    * ``eligible[t,i]`` 1.0 unless member i took the previous turn
    * ``decay[t,i]``   ``exp(-0.5 * gap)``, 0.0 if i has not spoken yet

    so that ``l_i(t) = eligible * (pi_i + d_i * decay)``.
    """

    speaker: np.ndarray
    eligible: np.ndarray
    decay: np.ndarray

    @classmethod
    def from_sequences(cls, seqs: Sequence[TurnSequence], n: int | None = None):
        seqs = list(seqs)
        if n is None:
            if not seqs:
                raise ModelError("need a member count for an empty history")
            n = len(seqs[0].roster)
        parts = [_features_one(s.speakers, n) for s in seqs if len(s)]
        if not parts:
            empty = np.zeros((0, n))
            return cls(np.zeros(0, dtype=np.int64), empty, empty.copy())
        return cls(
            np.concatenate([p[0] for p in parts]),
            np.concatenate([p[1] for p in parts]),
            np.concatenate([p[2] for p in parts]),
        )

    def __len__(self) -> int:
        return int(self.speaker.size)

    @property
    def n_members(self) -> int:
        return int(self.eligible.shape[1])

    def rows(self, start: int, stop: int | None = None) -> "HistoryFeatures":
        sl = slice(start, stop)
        return HistoryFeatures(self.speaker[sl], self.eligible[sl], self.decay[sl])

    def log_likelihood(self, pi: np.ndarray, d: np.ndarray) -> float:
        return self.log_likelihood_and_grad(pi, d, grad=False)[0]

    def log_likelihood_and_grad(self, pi, d, grad: bool = True):
        """Log-likelihood and (optionally) its gradient in ``pi`` and ``d``."""
        pi = np.asarray(pi, dtype=float)
        d = np.asarray(d, dtype=float)
        T = len(self)
        if T == 0:
            z = np.zeros_like(pi)
            return 0.0, z, z.copy()
        h = self.speaker
        decay_h = self.decay[np.arange(T), h]
        num = pi[h] + d[h] * decay_h
        elig_decay = self.eligible * self.decay
        den = self.eligible @ pi + elig_decay @ d
        with np.errstate(divide="ignore"):
            ll = float(np.sum(np.log(num)) - np.sum(np.log(den)))
        if not grad:
            return ll, None, None
        n = pi.size
        inv_num = 1.0 / num
        inv_den = 1.0 / den
        g_pi = np.bincount(h, weights=inv_num, minlength=n) - self.eligible.T @ inv_den
        g_d = np.bincount(h, weights=decay_h * inv_num, minlength=n) - elig_decay.T @ inv_den
        return ll, g_pi, g_d


def _features_one(speakers: np.ndarray, n: int):
    T = speakers.size
    t = np.arange(T)
    last = np.full((T, n), -1, dtype=np.int64)
    for i in range(n):
        pos = np.where(speakers == i, t, -1)
        # latest turn strictly before t
        prior = np.maximum.accumulate(pos)
        last[1:, i] = prior[:-1]
    gap = t[:, None] - last
    seen = last >= 0
    table = decay_table(T)
    decay = np.where(seen, table[np.where(seen, gap, 0)], 0.0)
    eligible = np.where(seen & (gap == 1), 0.0, 1.0)
    return speakers.astype(np.int64), eligible, decay
