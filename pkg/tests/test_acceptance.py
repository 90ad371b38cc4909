"""Acceptance criteria, one test each; every test records a pass/fail line.

Run alone with ``pytest tests/test_acceptance.py -v -s``; the lines are also
printed in the terminal summary of a full run.
"""

import time

import numpy as np
import pytest

from conftest import ACCEPTANCE_LINES, all_sequences, brute_aba, brute_dyadic
from turntaker.cli import main
from turntaker.fitter import FitOptions, compare_split, fit
from turntaker.model import (
    NEVER,
    ConversationState,
    Roster,
    TeamParams,
    TurnSequence,
    multi_meeting_log_likelihood,
    turn_probabilities,
)
from turntaker.patterns import PatternEnsemble, coverage_report, pattern_counts, pattern_report
from turntaker.results import dumps, save_results
from turntaker.simulator import SimConfig, ensemble_array, simulate_conversation
from turntaker.stats import (
    Nationality,
    Sex,
    TraitRecord,
    akaike_weights,
    chi_squared_yates,
    evidence_ratio,
    rank_trait_models,
)

pytestmark = pytest.mark.acceptance


def record(number, title, passed, detail, t0):
    line = f"[{'PASS' if passed else 'FAIL'}] criterion {number:>2}: {title} -- {detail} ({time.perf_counter() - t0:.1f}s)"
    ACCEPTANCE_LINES.append(line)
    print(line)
    assert passed, line


def random_state(rng, n, t):
    """A reachable state at turn t: distinct past turns, one of them t-1."""
    if t == 1:
        return ConversationState.fresh(n)
    spoken = rng.integers(1, min(n, t - 1) + 1)
    members = rng.choice(n, size=spoken, replace=False)
    turns = [t - 1]
    if spoken > 1:
        turns += list(rng.choice(np.arange(1, t - 1), size=spoken - 1, replace=False))
    last = [NEVER] * n
    for m, k in zip(members, turns):
        last[m] = int(k)
    return ConversationState(tuple(last), t)


def random_team(rng, n):
    pi = rng.uniform(0.01, 1.0, n)
    d = np.where(rng.random(n) < 0.2, 0.0, rng.exponential(2.0, n))
    return TeamParams.from_arrays([f"m{i}" for i in range(n)], pi, d)


# ---------------------------------------------------------------- 1


def test_criterion_01_chi_squared_reproduction():
    t0 = time.perf_counter()
    cases = [
        ([[24, 0], [17, 7]], 6.0, 0.014),
        ([[21, 3], [7, 17]], 14.5, 0.00014),
        ([[26, 4], [11, 19]], 13.8, 0.00020),
    ]
    ok = True
    parts = []
    for table, chi2, p in cases:
        stat, pval = chi_squared_yates(table)
        ok &= abs(stat - chi2) <= 0.1 and abs(pval - p) <= 0.05 * p
        parts.append(f"chi2={stat:.2f} p={pval:.2g}")
    record(1, "chi-squared reproduction", ok, "; ".join(parts), t0)


# ---------------------------------------------------------------- 2


def test_criterion_02_akaike_weight_reproduction():
    t0 = time.perf_counter()
    w = akaike_weights([0, 7.2, 8.2, 9.3, 9.6, 9.7])
    target = [0.94, 0.025, 0.015, 0.010, 0.010, 0.010]
    err = float(np.max(np.abs(np.array(w) - target)))
    er = evidence_ratio(0.94, 0.025)
    ok = err <= 0.01 and abs(er - 37.6) <= 0.1
    record(2, "Akaike-weight reproduction", ok, f"max |w - reference| = {err:.4f}, ER = {er:.2f}", t0)


# ---------------------------------------------------------------- 3


def test_criterion_03_parameter_recovery():
    t0 = time.perf_counter()
    roster = Roster(["A", "B", "C", "D"])
    truth = TeamParams.from_arrays(roster, [0.4, 0.3, 0.2, 0.1], [2, 1, 0.5, 0])
    good = at_max = 0
    for seed in range(20):
        seq = simulate_conversation(truth, SimConfig(5000, seed))
        res = fit([seq], roster, "full")
        est = res.team
        # misses with LL(fit) >= LL(truth) are sampling error, not optimiser failure
        at_max += res.log_likelihood >= multi_meeting_log_likelihood(truth, [seq])
        pi_ok = np.all(np.abs(est.pi - truth.pi) <= 0.03)
        d_ok = np.all(np.abs(est.d[:3] - truth.d[:3]) <= 0.15 * truth.d[:3]) and est.d[3] < 0.1
        good += bool(pi_ok and d_ok)
    elapsed = time.perf_counter() - t0
    ok = good >= 18 and elapsed < 120
    record(3, "parameter recovery n=4 T=5000", ok, f"{good}/20 seeds within tolerance (need >= 18); LL(fit) >= LL(truth) in {at_max}/20", t0)


# ---------------------------------------------------------------- 4


def test_criterion_04_memory_wins_held_out():
    t0 = time.perf_counter()
    wins = 0
    opts = FitOptions(restarts=4)
    for seed in range(100):
        rng = np.random.default_rng([4, seed])
        n = int(rng.integers(3, 6))
        team = TeamParams.from_arrays(
            [f"m{i}" for i in range(n)], rng.dirichlet(np.full(n, 2.0)), rng.uniform(1.0, 3.0, n)
        )
        lengths = [int(x) for x in rng.integers(300, 700, size=3)]
        blocks = ensemble_array(team, SimConfig(1, seed, replications=1), meeting_lengths=lengths)
        data = [TurnSequence(team.roster, b[0]) for b in blocks]
        cmp = compare_split(data, team.roster, 0.8, opts)
        wins += cmp.memory.test_ll > cmp.no_memory.test_ll
    elapsed = time.perf_counter() - t0
    ok = wins >= 95 and elapsed < 300
    record(4, "held-out FULL > REDUCED with d >= 1", ok, f"{wins}/100 seeds (need >= 95)", t0)


# ---------------------------------------------------------------- 5


def test_criterion_05_normalisation_and_exclusion():
    t0 = time.perf_counter()
    rng = np.random.default_rng(5)
    worst = 0.0
    excluded_ok = True
    for _ in range(100_000):
        n = int(rng.integers(2, 9))
        team = random_team(rng, n)
        state = random_state(rng, n, int(rng.integers(1, 60)))
        p = turn_probabilities(team, state)
        worst = max(worst, abs(p.sum() - 1.0))
        prev = state.previous_speaker
        if prev is not None and p[prev] != 0.0:
            excluded_ok = False
    ok = worst <= 1e-12 and excluded_ok
    record(5, "normalisation and exclusion over 1e5 states", ok, f"max |sum-1| = {worst:.1e}, exclusion exact = {excluded_ok}", t0)


# ---------------------------------------------------------------- 6


def test_criterion_06_scale_invariance():
    t0 = time.perf_counter()
    rng = np.random.default_rng(6)
    worst = 0.0
    for _ in range(1000):
        n = int(rng.integers(2, 9))
        team = random_team(rng, n)
        state = random_state(rng, n, int(rng.integers(1, 60)))
        base = turn_probabilities(team, state)
        for c in (0.1, 3.0, 100.0):
            worst = max(worst, float(np.max(np.abs(turn_probabilities(team.scaled(c), state) - base))))
    record(6, "scale invariance c in {0.1, 3, 100}", worst <= 1e-12, f"max deviation {worst:.1e} over 1000 sets", t0)


# ---------------------------------------------------------------- 7


def test_criterion_07_pattern_oracle_exhaustive():
    t0 = time.perf_counter()
    checked = mismatches = 0
    for s in all_sequences(3, 8):
        c = pattern_counts(s, 3, min_len=4)
        aba = np.where(c.turns[0] > 0, c.aba[0] / np.maximum(c.turns[0], 1), np.nan)
        dyadic = c.dyadic[0] / len(s)
        same = np.allclose(aba, brute_aba(s, 3), equal_nan=True, rtol=0, atol=0) and np.array_equal(
            dyadic, np.array(brute_dyadic(s, 3))
        )
        mismatches += not same
        checked += 1
    expected = sum(3 * 2 ** (T - 1) for T in range(1, 9))
    ok = mismatches == 0 and checked == expected
    record(7, "pattern statistics vs brute force, all length <= 8", ok, f"{checked} sequences, {mismatches} mismatches", t0)


# ---------------------------------------------------------------- 8


def test_criterion_08_ci_calibration():
    t0 = time.perf_counter()
    roster = Roster(["A", "B", "C", "D"])
    generator = TeamParams.from_arrays(roster, [0.35, 0.3, 0.2, 0.15], [1.5, 1.0, 0.6, 0.3])
    T = 500
    seed_conv = simulate_conversation(generator, SimConfig(2000, 80))
    model = fit([seed_conv], roster, "full").team
    ens = PatternEnsemble.from_arrays(ensemble_array(model, SimConfig(T, 81, replications=2000)), roster)
    hits = []
    for trial in range(200):
        obs = pattern_report([simulate_conversation(model, SimConfig(T, 100_000 + trial))], roster)
        hits.extend(v.covered for v in coverage_report(obs, ens, 0.95).verdicts)
    rate = float(np.mean(hits))
    ok = 0.90 <= rate <= 0.99
    record(8, "95% CI coverage, R=2000, 200 trials", ok, f"coverage {rate:.3f} over {len(hits)} verdicts (need [0.90, 0.99])", t0)


# ---------------------------------------------------------------- 9


def test_criterion_09_determinism_across_threads(tmp_path, monkeypatch):
    t0 = time.perf_counter()
    team = TeamParams.from_arrays(["A", "B", "C", "D"], [0.4, 0.3, 0.2, 0.1], [2, 1, 0.5, 0])
    params = tmp_path / "p.json"
    save_results(params, team)
    outputs = {}
    for threads in ("1", "4", "1"):
        monkeypatch.setenv("TURNTAKER_THREADS", threads)
        blocks = ensemble_array(team, SimConfig(300, 9, replications=3000), meeting_lengths=[300, 120])
        seq = simulate_conversation(team, SimConfig(2000, 9))
        res = fit([seq], team.roster, "full", FitOptions(seed=9))
        sim = tmp_path / f"sim{threads}.csv"
        fitted = tmp_path / f"fit{threads}.json"
        main(["simulate", "--params", str(params), "--turns", "400", "--meetings", "3", "--seed", "9", "--out", str(sim)])
        main(["fit", "--data", str(sim), "--seed", "9", "--out", str(fitted)])
        blob = b"".join(b.tobytes() for b in blocks) + dumps(res).encode() + sim.read_bytes() + fitted.read_bytes()
        outputs.setdefault(threads, []).append(blob)
    runs = outputs["1"] + outputs["4"]
    ok = all(r == runs[0] for r in runs)
    record(9, "byte-identical outputs for 1 vs 4 threads", ok, f"{len(runs)} runs, {len(set(runs))} distinct output(s)", t0)


# ---------------------------------------------------------------- 10


def test_criterion_10_trait_analysis_end_to_end():
    t0 = time.perf_counter()
    rng = np.random.default_rng(10)
    sizes = [3, 3, 3, 3, 4, 4, 4]
    records = []
    pi_hat, d_hat = {}, {}
    for t, size in enumerate(sizes):
        members = [f"t{t}m{j}" for j in range(size)]
        american = [(j + t) % 2 == 0 for j in range(size)]
        weights = np.where(american, 3.0, 1.0)
        d = rng.uniform(0.5, 2.5, size)
        team = TeamParams.from_arrays(members, weights, d)
        for m, am in zip(members, american):
            e, a, c = rng.normal(3.5, 0.7, 3)
            sex = Sex.MALE if rng.random() < 0.5 else Sex.FEMALE
            nat = Nationality.AMERICAN if am else Nationality.NON_AMERICAN
            records.append(TraitRecord(m, f"t{t}", e, a, c, sex, nat))
        blocks = ensemble_array(team, SimConfig(1, 100 + t, replications=1), meeting_lengths=[800, 800, 800])
        res = fit([TurnSequence(team.roster, b[0]) for b in blocks], team.roster, "full")
        for m, p in zip(members, res.team.params):
            pi_hat[m] = p.pi
            d_hat[m] = p.d
    pi_rank = rank_trait_models(records, pi_hat, "pi")
    d_rank = rank_trait_models(records, d_hat, "d")
    first = pi_rank.rows[0]
    ok = first.name == "Nationality" and first.weight > 0.9 and "Null" in d_rank.top_set()
    detail = (
        f"pi: first={first.name} w={first.weight:.3f}; "
        f"d: top set={d_rank.top_set()}"
    )
    record(10, "trait analysis (24 members, 7 teams)", ok, detail, t0)
