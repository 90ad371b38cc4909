import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from turntaker.fitter import (
    FitError,
    FitOptions,
    ModelVariant,
    compare_split,
    evaluate_split,
    fit,
    free_parameter_count,
)
from turntaker.model import PI_FLOOR, Roster, TeamParams, TurnSequence, multi_meeting_log_likelihood
from turntaker.simulator import SimConfig, ensemble_array, simulate_conversation

R4 = Roster(["A", "B", "C", "D"])
TRUE4 = TeamParams.from_arrays(R4, [0.4, 0.3, 0.2, 0.1], [2, 1, 0.5, 0])


def meetings(team, lengths, seed):
    blocks = ensemble_array(team, SimConfig(1, seed, replications=1), meeting_lengths=lengths)
    return [TurnSequence(team.roster, b[0]) for b in blocks]


def test_free_parameter_counts():
    assert free_parameter_count(ModelVariant.FULL, 4) == 7
    assert free_parameter_count("reduced", 4) == 3
    assert free_parameter_count(ModelVariant.TIED, 6) == 1
    with pytest.raises(ValueError):
        FitOptions(restarts=0)


@pytest.mark.parametrize("variant", list(ModelVariant))
def test_fit_invariants(variant):
    data = meetings(TRUE4, [400, 300, 250], 3)
    res = fit(data, R4, variant)
    assert res.k == free_parameter_count(variant, 4)
    assert res.n_turns == 950
    assert res.converged
    assert abs(res.team.pi.sum() - 1.0) <= 1e-9
    assert np.all(res.team.d >= 0) and np.all(res.team.pi >= PI_FLOOR * 0.999)
    assert res.log_likelihood == pytest.approx(multi_meeting_log_likelihood(res.team, data), abs=1e-9)
    if variant is ModelVariant.REDUCED:
        assert np.all(res.team.d == 0)
    if variant is ModelVariant.TIED:
        assert np.allclose(res.team.pi, 0.25) and np.ptp(res.team.d) == 0


def test_nesting_full_dominates():
    for seed in range(6):
        team = TeamParams.from_arrays(R4, [0.3, 0.3, 0.2, 0.2], [0, 0, 0, 0])
        data = meetings(team, [150, 90], seed)
        full = fit(data, R4, "full", FitOptions(restarts=3))
        for v in ("reduced", "tied"):
            assert full.log_likelihood >= fit(data, R4, v, FitOptions(restarts=3)).log_likelihood - 1e-9


@given(st.permutations(range(4)))
@settings(max_examples=8)
def test_meeting_order_irrelevant(order):
    data = meetings(TRUE4, [120, 80, 60, 100], 21)
    a = fit(data, R4, "reduced", FitOptions(restarts=2))
    b = fit([data[i] for i in order], R4, "reduced", FitOptions(restarts=2))
    assert a.log_likelihood == pytest.approx(b.log_likelihood, abs=1e-7)
    assert a.team.pi == pytest.approx(b.team.pi, abs=1e-4)


def test_state_resets_between_meetings():
    # one long meeting vs the same turns cut in two are different likelihood problems
    seq = simulate_conversation(TRUE4, SimConfig(600, 2))
    whole = fit([seq], R4, "full", FitOptions(restarts=2))
    cut = fit([seq[:300], seq[300:]], R4, "full", FitOptions(restarts=2))
    assert whole.log_likelihood != cut.log_likelihood


def test_two_member_reduced_tends_to_first_speaker():
    r2 = Roster(["A", "B"])
    data = [TurnSequence(r2, [1, 0, 1, 0, 1, 0, 1, 0, 1, 0, 1, 0])]
    res = fit(data, r2, "reduced")
    assert res.team.pi[1] > 1 - 1e-6
    assert res.log_likelihood == pytest.approx(0.0, abs=1e-6)
    assert any("two-member" in w for w in res.warnings)


def test_unseen_member_pinned_to_floor():
    r = Roster(["A", "B", "C", "Z"])
    ids = [0, 1, 2] * 60 + [0, 2, 1] * 40
    res = fit([TurnSequence(r, ids)], r, "reduced")
    assert res.team.pi[3] < 1e-6
    assert any("'Z'" in w for w in res.warnings)
    assert res.team.roster == r


def test_too_few_turns():
    with pytest.raises(FitError):
        fit([TurnSequence(R4, [0, 1, 2])], R4, "full")
    res = fit([TurnSequence(R4, [0, 1, 2, 3, 0, 1, 2, 3])], R4, "full", FitOptions(restarts=2))
    assert any("only 8 turns" in w for w in res.warnings)


def test_foreign_roster_rejected():
    with pytest.raises(FitError):
        fit([TurnSequence(Roster(["A", "B", "C"]), [0, 1])], R4)


def test_fit_deterministic():
    data = meetings(TRUE4, [500], 5)
    a = fit(data, R4, "full", FitOptions(seed=3))
    b = fit(data, R4, "full", FitOptions(seed=3))
    assert a == b


@pytest.mark.slow
def test_recovery_at_large_horizon():
    seq = simulate_conversation(TRUE4, SimConfig(50_000, 7))
    res = fit([seq], R4, "full")
    assert res.team.pi == pytest.approx(TRUE4.pi, abs=0.03)
    assert res.team.d[:3] == pytest.approx(TRUE4.d[:3], rel=0.15)
    assert res.team.d[3] < 0.1


def test_fit_beats_truth_in_likelihood():
    seq = simulate_conversation(TRUE4, SimConfig(3000, 13))
    res = fit([seq], R4, "full")
    assert res.log_likelihood >= multi_meeting_log_likelihood(TRUE4, [seq]) - 1e-9


# ---------------------------------------------------------------- split evaluation


def test_split_guards():
    data = meetings(TRUE4, [50], 1)
    for frac in (0.0, 1.0, 1.5):
        with pytest.raises(FitError):
            evaluate_split(data, R4, "reduced", frac)
    ev = evaluate_split(data, R4, "reduced", 0.8, FitOptions(restarts=2))
    assert (ev.n_train, ev.n_test) == (40, 10)


def test_split_test_rows_keep_prior_history():
    seq = simulate_conversation(TRUE4, SimConfig(1000, 4))
    ev = evaluate_split([seq], R4, "full", 0.8, FitOptions(restarts=2))
    train_fit = fit([seq[:800]], R4, "full", FitOptions(restarts=2))
    expected = multi_meeting_log_likelihood(train_fit.team, [seq]) - multi_meeting_log_likelihood(
        train_fit.team, [seq[:800]]
    )
    assert ev.test_ll == pytest.approx(expected, abs=1e-8)
    assert ev.train_ll == pytest.approx(train_fit.log_likelihood, abs=1e-9)


def test_memoryless_split_gap_small():
    team = TeamParams.from_arrays(R4, [0.4, 0.3, 0.2, 0.1], [0, 0, 0, 0])
    for seed in range(5):
        data = meetings(team, [1500, 1500], seed)
        cmp = compare_split(data, R4, options=FitOptions(restarts=3))
        gap = abs(cmp.memory.test_ll - cmp.no_memory.test_ll)
        assert gap < 0.05 * abs(cmp.no_memory.test_ll)


def test_strong_memory_split_ordering():
    team = TeamParams.from_arrays(R4, [0.4, 0.3, 0.2, 0.1], [3, 3, 3, 3])
    wins = 0
    for seed in range(10):
        cmp = compare_split(meetings(team, [1200, 800], seed), R4, options=FitOptions(restarts=3))
        wins += cmp.memory.test_ll > cmp.no_memory.test_ll
    assert wins >= 9
