import itertools
import math

import hypothesis
import numpy as np
import pytest

from turntaker.model import TeamParams

hypothesis.settings.register_profile("default", max_examples=100, deadline=None)
hypothesis.settings.register_profile("fast", max_examples=10, deadline=None)
hypothesis.settings.load_profile("default")

ACCEPTANCE_LINES: list[str] = []


def oracle_probabilities(pi, d, history):
    """Next-speaker probabilities computed straight from the speaker history.

    Independent of ConversationState: scans the history for each member's
    latest turn (1-based turn numbers) and applies the model formula.
    """
    t = len(history) + 1
    ell = []
    for i in range(len(pi)):
        last = max((k + 1 for k, s in enumerate(history) if s == i), default=None)
        if last is not None and last == t - 1:
            ell.append(0.0)
        elif last is None:
            ell.append(pi[i])
        else:
            ell.append(pi[i] + d[i] * math.exp(-0.5 * (t - last)))
    total = sum(ell)
    return [x / total for x in ell]


def oracle_log_likelihood(pi, d, history):
    return sum(
        math.log(oracle_probabilities(pi, d, history[:k])[s]) for k, s in enumerate(history)
    )


def brute_aba(s, n):
    out = []
    for i in range(n):
        mine = [t for t in range(len(s)) if s[t] == i]
        if not mine:
            out.append(math.nan)
            continue
        out.append(sum(1 for t in mine if t >= 2 and s[t - 2] == i) / len(mine))
    return out


def brute_dyadic(s, n, min_len=4):
    """Mark every turn inside any window of >= min_len turns with exactly two speakers."""
    T = len(s)
    dyads = [(i, j) for i in range(n) for j in range(i + 1, n)]
    marked = {d: set() for d in dyads}
    for a in range(T):
        for b in range(a + min_len - 1, T):
            speakers = set(s[a : b + 1])
            if len(speakers) == 2:
                marked[tuple(sorted(speakers))].update(range(a, b + 1))
    return [len(marked[d]) / T for d in dyads]


def all_sequences(n, max_len):
    for T in range(1, max_len + 1):
        for first in range(n):
            for steps in itertools.product(range(1, n), repeat=T - 1):
                s = [first]
                for k in steps:
                    s.append((s[-1] + k) % n)
                yield s


@pytest.fixture
def team3():
    return TeamParams.from_arrays(["A", "B", "C"], [0.5, 0.3, 0.2], [0.0, 0.0, 0.0])


@pytest.fixture
def rng():
    return np.random.default_rng(20240917)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
