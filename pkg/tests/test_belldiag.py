import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from twoway_bb84 import belldiag
from twoway_bb84.belldiag import (
    CONVERGES,
    DIVERGES,
    UNDECIDED,
    BellDiagonal,
    InitialCondition,
    b_step_map,
    bit_marginal,
    eve_info_bound,
    find_threshold,
    iterate_schedule,
    key_rate_accounting,
    p_step_map,
    phase_marginal,
    schedule_search,
)
from twoway_bb84.distill import PairedBits, Schedule, b_step
from twoway_bb84.session import SessionParams, run_session

from oracles import FLIPS, b_step_enum, p_step_enum, sigma3


def random_states(n, seed):
    return np.random.default_rng(seed).dirichlet(np.ones(4), size=n)


def independent(p):
    return InitialCondition("independent").states(p)[0]


class TestBStepMap:
    def test_identity(self):
        q, pr = b_step_map([1, 0, 0, 0])
        assert q.tolist() == [1, 0, 0, 0] and pr == 1

    def test_phase_errors_cancel(self):
        q, pr = b_step_map([0, 0, 0, 1])
        assert q.tolist() == [1, 0, 0, 0] and pr == 1

    def test_independent_010(self):
        q, pr = b_step_map([0.81, 0.09, 0.01, 0.09])
        assert pr == pytest.approx(0.82, abs=1e-12)
        # unnormalized weights from the 16-pair rule: i^2+z^2, x^2+y^2, 2xy, 2iz
        assert np.allclose(q, np.array([0.6642, 0.0082, 0.0018, 0.1458]) / 0.82, atol=1e-12)
        assert round(q[2], 6) == 0.002195 and round(q[3], 6) == 0.177805
        assert bit_marginal(q) == pytest.approx(0.01 / 0.82)

    def test_matches_enumeration(self):
        for q in random_states(1000, 1):
            got, pr = b_step_map(q)
            want, wpr = b_step_enum(q)
            assert np.max(np.abs(got - want)) <= 1e-12 and abs(pr - wpr) <= 1e-12

    def test_broadcasts(self):
        qs = random_states(50, 2)
        batch, prs = b_step_map(qs)
        for q, row, pr in zip(qs, batch, prs):
            one, p1 = b_step_map(q)
            assert np.allclose(one, row, atol=1e-15) and p1 == pytest.approx(pr)


class TestPStepMap:
    def test_identity(self):
        assert p_step_map([1, 0, 0, 0]).tolist() == [1, 0, 0, 0]

    def test_phase_only(self):
        assert np.allclose(p_step_map([0.9, 0, 0, 0.1]), [0.972, 0, 0, 0.028], atol=1e-12)

    def test_bit_only(self):
        assert np.allclose(p_step_map([0.9, 0.1, 0, 0]), [0.756, 0.244, 0, 0], atol=1e-12)

    def test_matches_enumeration(self):
        for q in random_states(1000, 3):
            assert np.max(np.abs(p_step_map(q) - p_step_enum(q))) <= 1e-12


def test_normalization_and_non_negativity():
    qs = random_states(100_000, 4)
    qb, pr = b_step_map(qs)
    qp = p_step_map(qs)
    for out in (qb, qp):
        assert np.all(out >= 0)
        assert np.max(np.abs(out.sum(axis=1) - 1)) <= 1e-12
    assert np.all((pr > 0) & (pr <= 1))


@settings(max_examples=200, deadline=None)
@given(st.floats(1e-6, 0.5 - 1e-6))
def test_b_step_lowers_bit_error_for_independent(p):
    q = independent(p)
    assert bit_marginal(b_step_map(q)[0]) < bit_marginal(q)


@settings(max_examples=200, deadline=None)
@given(st.floats(1e-6, 0.5 - 1e-6))
def test_p_step_lowers_phase_error_for_independent(p):
    q = independent(p)
    assert phase_marginal(p_step_map(q)) < phase_marginal(q)


@settings(max_examples=200, deadline=None)
@given(st.lists(st.floats(0, 1), min_size=4, max_size=4).filter(lambda v: sum(v) > 1e-3))
def test_p_step_lowers_phase_error_whenever_below_half(v):
    q = np.array(v) / sum(v)
    ph = phase_marginal(q)
    if 1e-9 < ph < 0.5 - 1e-9:
        assert phase_marginal(p_step_map(q)) < ph


def test_monte_carlo_bridge():
    # errors drawn from q on 10**6 pairs (2 * 10**6 positions), fed through the protocol's B step
    rng = np.random.default_rng(11)
    q = np.array([0.80, 0.07, 0.03, 0.10])
    n = 2 * 10**6
    labels = rng.choice(4, size=n, p=q)
    flips = np.array([FLIPS[k] for k in range(4)], dtype=np.uint8)
    bit_err, ph_err = flips[labels, 0], flips[labels, 1]
    alice = rng.integers(0, 2, n, dtype=np.uint8)
    pairing = rng.permutation(n)
    kept, (pa, pb), passed = b_step(PairedBits(alice, alice ^ bit_err), pairing)
    mask = pa == pb
    first, second = pairing[0::2][mask], pairing[1::2][mask]
    kept_phase = ph_err[first] ^ ph_err[second]

    want, pr = b_step_map(q)
    assert abs(passed / (n // 2) - pr) <= sigma3(pr, n // 2)
    assert abs(kept.error_rate - bit_marginal(want)) <= sigma3(bit_marginal(want), passed)
    assert abs(kept_phase.mean() - phase_marginal(want)) <= sigma3(phase_marginal(want), passed)


class TestBellDiagonal:
    def test_marginals(self):
        s = BellDiagonal(0.7, 0.1, 0.05, 0.15)
        assert s.bit_error == pytest.approx(0.15) and s.phase_error == pytest.approx(0.2)

    def test_invalid(self):
        with pytest.raises(ValueError):
            BellDiagonal(0.5, 0.5, 0.5, -0.5)
        with pytest.raises(ValueError):
            BellDiagonal(0.5, 0.1, 0.1, 0.1)


class TestInitialCondition:
    def test_independent(self):
        assert np.allclose(independent(0.1), [0.81, 0.09, 0.01, 0.09])

    def test_depolarizing(self):
        q = InitialCondition("depolarizing").states(0.1)[0]
        assert np.allclose(q, [0.85, 0.05, 0.05, 0.05]) and bit_marginal(q) == pytest.approx(0.1)

    def test_worst_case_grid(self):
        qs = InitialCondition("worst-case").states(0.1)
        assert len(qs) == 101
        assert np.allclose(bit_marginal(qs), 0.1) and np.allclose(phase_marginal(qs), 0.1)
        assert qs[0, 2] == 0 and qs[-1, 2] == pytest.approx(0.1)
        assert np.allclose(qs.sum(axis=1), 1) and (qs >= -1e-15).all()

    def test_unknown(self):
        with pytest.raises(ValueError):
            InitialCondition("bogus")


class TestIterate:
    def test_perfect_converges_in_round_one(self):
        res = iterate_schedule([1, 0, 0, 0])
        assert res.verdict == CONVERGES and res.rounds == 1

    def test_independent_015_converges(self):
        res = iterate_schedule(independent(0.15))
        assert res.verdict == CONVERGES and res.rounds == 2

    def test_independent_015_fails_the_marginals_rule(self):
        # B steps keep doubling the phase error, so both marginals never sit below 0.10 together
        res = iterate_schedule(independent(0.15), criterion="marginals")
        assert res.verdict == DIVERGES
        assert max(belldiag.one_way_yield(t[2]) for t in res.trajectory) > 0.2

    @pytest.mark.parametrize("criterion", ["capacity", "marginals"])
    def test_independent_025_diverges(self, criterion):
        assert iterate_schedule(independent(0.25), criterion=criterion).verdict == DIVERGES

    def test_fixed_sequence_runs_out(self):
        res = iterate_schedule(independent(0.3), "fixed:B")
        assert res.verdict == UNDECIDED and res.rounds == 1

    def test_max_rounds(self):
        res = iterate_schedule(independent(0.3), "alternating", max_rounds=1)
        assert res.verdict == UNDECIDED

    def test_trajectory_records_pass_probability(self):
        q0 = independent(0.1)
        res = iterate_schedule(q0, "fixed:BP", criterion="marginals")
        r0, r1, r2 = res.trajectory[:3]
        assert r0[0] == 0 and np.array_equal(r0[2], q0)
        assert r1[1] == "B" and r1[3] == pytest.approx(0.82)
        assert r2[1] == "P" and r2[3] == 1.0
        assert np.allclose(r2[2], p_step_map(b_step_map(q0)[0]))

    def test_alternating_round_is_b_then_p(self):
        res = iterate_schedule(independent(0.15))
        assert res.trajectory[1][1] == "BP"

    def test_accepts_bell_diagonal(self):
        assert iterate_schedule(BellDiagonal(1, 0, 0, 0)).verdict == CONVERGES

    def test_adaptive_rejected(self):
        with pytest.raises(ValueError):
            iterate_schedule(independent(0.1), Schedule.adaptive())


class TestThreshold:
    def test_deterministic(self):
        a = find_threshold("alternating", "worst-case")
        b = find_threshold("alternating", "worst-case")
        assert a.threshold == b.threshold and a.trace == b.trace and a.scan == b.scan

    def test_bracket_width(self):
        res = find_threshold("alternating", "worst-case", tol=1e-4)
        lo, hi, _, _ = res.trace[-1]
        assert res.monotone and (hi - lo) <= 2e-4
        assert res.worst_q_y is not None

    def test_p_only_has_zero_threshold(self):
        res = find_threshold(Schedule.fixed("P" * 12), "independent", criterion="marginals")
        assert res.threshold == 0.0

    def test_independent_above_worst_case(self):
        ind = find_threshold("alternating", "independent").threshold
        worst = find_threshold("alternating", "worst-case").threshold
        assert ind >= worst

    def test_report_lists_scan(self):
        text = find_threshold("alternating", "independent", tol=1e-2).report()
        assert text.startswith("threshold ") and "scan p=0.1000 converges" in text


class TestScheduleSearch:
    def test_length_two(self):
        res = schedule_search(2)
        assert res.method == "exhaustive" and res.sequence[0] == "B"
        assert res.sequence in ("BB", "BP")
        by_hand = {s: find_threshold(s, "worst-case").threshold for s in ("BB", "BP", "PB", "PP")}
        assert res.threshold == pytest.approx(max(by_hand.values()), abs=2e-4)

    def test_not_worse_than_alternating_prefix(self):
        res = schedule_search(4)
        assert res.threshold >= find_threshold("BPBP", "worst-case").threshold - 1e-4

    def test_bounds(self):
        with pytest.raises(ValueError):
            schedule_search(0)
        with pytest.raises(ValueError):
            schedule_search(21)


class TestEveInfoBound:
    def test_value(self):
        c, bound = eve_info_bound(30, 100)
        assert c == pytest.approx(30 - math.log2(200 + 30 + 1 / math.log(2)), abs=1e-12)
        assert abs(c - 22.145) <= 1e-3
        assert bound == pytest.approx(2.0**-c)

    @pytest.mark.parametrize("s", [12, 20, 30, 45])
    def test_one_more_bit_of_s_gains_just_under_one(self, s):
        d = eve_info_bound(s + 1, 100)[0] - eve_info_bound(s, 100)[0]
        assert 0 < d < 1

    def test_vacuous(self):
        with pytest.raises(ValueError):
            eve_info_bound(8, 200)
        with pytest.raises(ValueError):
            eve_info_bound(0, 1)


class TestKeyRate:
    def test_seed_of_one_bit(self):
        out = run_session(SessionParams(n=64, r=128, seed=1))
        rep = key_rate_accounting(out)
        assert rep.consumed_secret_bits == 1 and rep.transmitted == 128

    def test_usable_ratio_and_consumption(self):
        out = run_session(SessionParams(n=1024, r=16, seed=2))
        a = key_rate_accounting(out, "no_pab")
        b = key_rate_accounting(out, "standard_bb84")
        assert a.usable_fraction == 1.0 and b.usable_fraction == 0.5
        assert a.usable_positions / b.usable_positions == 2.0
        assert a.consumed_secret_bits == 128 and b.consumed_secret_bits == 0
        assert a.check_cost == 1024
        assert a.net_secret_bits == a.final_key_bits - 128 > 0

    def test_unknown_baseline(self):
        out = run_session(SessionParams(n=16, seed=3))
        with pytest.raises(ValueError):
            key_rate_accounting(out, "e91")


def test_trajectory_csv():
    res = iterate_schedule(independent(0.1))
    text = belldiag.trajectory_to_csv([(0.1, res)], header="family=independent")
    lines = text.splitlines()
    assert lines[0] == "# family=independent"
    assert lines[1] == "p,verdict,rounds,final_bit_marginal,final_phase_marginal"
    assert lines[2].startswith("0.1,Converges,")
