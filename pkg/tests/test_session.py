import numpy as np
import pytest

from twoway_bb84.channel import InterceptResend, PauliChannel
from twoway_bb84.distill import Schedule
from twoway_bb84.session import (
    SessionParams,
    block_failure_probability,
    estimate_check_qber,
    key_digest,
    run_session,
    select_check_bits,
    transcript_eve_view,
)
from twoway_bb84.transcript import Kind, Transcript

from oracles import sigma3

BITWISE = {Kind.CHECK_VALUES, Kind.PAIR_PARITIES, Kind.SACRIFICE_VALUES, Kind.CODE_ANNOUNCEMENT}


class TestParams:
    @pytest.mark.parametrize("kw", [dict(n=0), dict(n=4, r=3), dict(n=4, abort_threshold=0.6), dict(n=4, failure_target=0)])
    def test_invalid(self, kw):
        with pytest.raises(ValueError):
            SessionParams(**kw)

    def test_defaults(self):
        p = SessionParams(n=8)
        assert p.abort_threshold == 0.20 and p.css.n == 7 and p.schedule.policy == "alternating"


class TestCheckBits:
    def test_two_positions(self):
        picks = [tuple(select_check_bits(np.random.default_rng(s), 2)) for s in range(2000)]
        assert set(picks) == {(0,), (1,)}
        frac = picks.count((0,)) / len(picks)
        assert abs(frac - 0.5) <= sigma3(0.5, len(picks))

    def test_reproducible(self):
        a = select_check_bits(np.random.default_rng(3), 8)
        b = select_check_bits(np.random.default_rng(3), 8)
        assert np.array_equal(a, b) and len(a) == 4 and len(set(a)) == 4

    def test_uniform_positions(self):
        rng = np.random.default_rng(4)
        draws = 100_000
        counts = np.zeros(8)
        for _ in range(draws):
            counts[select_check_bits(rng, 8)] += 1
        assert np.all(np.abs(counts / draws - 0.5) <= sigma3(0.5, draws))

    def test_odd_total(self, rng):
        with pytest.raises(ValueError):
            select_check_bits(rng, 7)


class TestCheckQber:
    def test_values(self):
        assert estimate_check_qber([0, 1, 1], [0, 1, 1]) == 0
        assert estimate_check_qber([0, 1, 1], [1, 0, 0]) == 1
        assert estimate_check_qber([0, 1, 0, 1], [0, 0, 0, 0]) == 0.5

    def test_empty(self):
        with pytest.raises(ValueError):
            estimate_check_qber([], [])


def test_block_failure_probability():
    # brute force over all 2**7 error patterns
    import itertools

    e = 0.03
    brute = sum(
        e ** sum(w) * (1 - e) ** (7 - sum(w)) for w in itertools.product((0, 1), repeat=7) if sum(w) > 1
    )
    assert block_failure_probability(e, 7, 1) == pytest.approx(brute, rel=1e-12)
    assert block_failure_probability(0.0, 7, 1) == 0.0


class TestRunSession:
    def test_noiseless(self):
        out = run_session(SessionParams(n=64, seed=1))
        assert out.completed and out.keys_match and out.observed_qber == 0
        assert out.alice_key.size == out.blocks * 1 == 64 // 7

    def test_intercept_resend_aborts(self):
        out = run_session(SessionParams(n=4096, channel=InterceptResend(), seed=2))
        assert out.status == "aborted" and out.reason.startswith("qber")
        assert abs(out.observed_qber - 0.25) <= sigma3(0.25, 4096)
        assert out.transcript[-1].kind == Kind.ABORT

    def test_intercept_resend_cheat_mode_passes(self):
        out = run_session(SessionParams(n=256, channel=InterceptResend(knows_basis=True), seed=2))
        assert out.completed and out.observed_qber == 0

    def test_noisy_channel_completes(self):
        out = run_session(SessionParams(n=4096, channel=PauliChannel.depolarizing(0.075), seed=3))
        assert out.completed and out.keys_match and out.rounds_executed >= 1
        assert out.alice_key.size == out.bob_key.size == out.blocks

    def test_exhaustion_aborts(self):
        out = run_session(
            SessionParams(n=256, channel=PauliChannel.depolarizing(0.25), abort_threshold=0.5, seed=4)
        )
        assert out.status == "aborted" and "exhausted" in out.reason

    def test_no_sifting_and_consumed_bits(self):
        out = run_session(SessionParams(n=512, r=8, seed=5))
        assert out.usable_fraction == 1.0 and out.usable_positions == out.transmitted == 1024
        assert out.consumed_secret_bits == 1024 // 8
        assert out.key_material == 512

    def test_key_lengths_equal_with_any_channel(self):
        for seed, ch in enumerate([None, PauliChannel.depolarizing(0.1), PauliChannel.from_xyz(0.02, 0.0, 0.08)]):
            params = SessionParams(n=2048, channel=ch, seed=seed)
            out = run_session(params)
            assert out.completed
            assert out.alice_key.size == out.bob_key.size == out.blocks * params.css.key_length

    def test_deterministic(self):
        params = SessionParams(n=1024, channel=PauliChannel.depolarizing(0.09), seed=42)
        a, b = run_session(params), run_session(params)
        assert a.transcript.dumps() == b.transcript.dumps()
        assert np.array_equal(a.alice_key, b.alice_key) and np.array_equal(a.bob_key, b.bob_key)

    def test_different_seeds_differ(self):
        a = run_session(SessionParams(n=256, seed=1))
        b = run_session(SessionParams(n=256, seed=2))
        assert a.transcript.dumps() != b.transcript.dumps()


class TestTranscript:
    def test_no_basis_information(self):
        out = run_session(SessionParams(n=512, channel=PauliChannel.depolarizing(0.06), seed=6))
        kinds = {m.kind for m in out.transcript}
        assert kinds <= set(Kind)
        assert not any("basis" in k.value.lower() for k in kinds)

    def test_check_before_distillation(self):
        out = run_session(SessionParams(n=2048, channel=PauliChannel.depolarizing(0.06), seed=7))
        kinds = [m.kind for m in out.transcript]
        first_dist = kinds.index(Kind.PAIRING_PERMUTATION)
        assert kinds[:first_dist] == [Kind.RECEIPT_ACK, Kind.CHECK_POSITIONS, Kind.CHECK_VALUES, Kind.CHECK_VALUES]
        assert kinds[-1] == Kind.CODE_ANNOUNCEMENT

    def test_minimal_session_inventory(self):
        # one forced round on a clean channel: ack, check, B, P, estimate, code announcement
        out = run_session(SessionParams(n=64, schedule=Schedule.alternating(min_rounds=1), seed=8))
        assert out.completed
        assert [(m.sender, m.kind.value) for m in out.transcript] == [
            ("B", "ReceiptAck"),
            ("A", "CheckPositions"),
            ("A", "CheckValues"),
            ("B", "CheckValues"),
            ("A", "PairingPermutation"),
            ("A", "PairParities"),
            ("B", "PairParities"),
            ("A", "TripleGrouping"),
            ("A", "SacrificePositions"),
            ("A", "SacrificeValues"),
            ("B", "SacrificeValues"),
            ("A", "ErrorEstimate"),
            ("A", "CodeAnnouncement"),
        ]

    def test_aborted_ends_with_abort(self):
        out = run_session(SessionParams(n=512, channel=InterceptResend(), seed=9))
        view = transcript_eve_view(out)
        assert view.messages[-1].kind == Kind.ABORT

    def test_two_parity_bits_per_pair(self):
        out = run_session(SessionParams(n=2048, channel=PauliChannel.depolarizing(0.06), seed=10))
        b_records = [r for r in out.records if r.step_kind == "B"]
        parities = out.transcript.of_kind(Kind.PAIR_PARITIES)
        assert sum(m.announced_bits for m in parities) == 2 * sum(r.in_len // 2 for r in b_records)

    def test_eve_view_totals(self):
        out = run_session(SessionParams(n=1024, channel=PauliChannel.depolarizing(0.06), seed=11))
        view = transcript_eve_view(out)
        bits = sum(np.asarray(m.payload).size for m in out.transcript if m.kind in BITWISE)
        assert view.announced_bits == bits
        assert view.counts["CheckValues"] == 2
        assert Transcript.loads(out.transcript.dumps()).dumps() == out.transcript.dumps()


def test_key_digest():
    assert key_digest([1, 0, 1]) != key_digest([1, 0, 1, 0])
    assert key_digest(np.array([1, 0], np.uint8)) == key_digest([1, 0])
