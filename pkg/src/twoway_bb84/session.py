"""End-to-end prepare-and-measure session without basis announcement.

Alice and Bob share a secret basis sequence up front, so every transmitted
position is measured in the right basis and nothing is sifted away. Half the
positions are sacrificed as check bits; the rest go through two-way
distillation and coset reconciliation with a CSS pair applied block by block.

All randomness comes from one ``numpy`` generator seeded from
``SessionParams.seed``; the same parameters give the same transcript and keys.
"""
from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass, field
from typing import Optional, Union

import numpy as np

from . import gf2codes
from .channel import InterceptResend, PauliChannel, expand_basis, transmit
from .distill import PairedBits, Schedule, StepRecord, run_schedule
from .gf2codes import CssPair, DecodingError
from .transcript import Kind, Message, Transcript

__all__ = [
    "SessionParams",
    "SessionOutcome",
    "EveView",
    "run_session",
    "select_check_bits",
    "estimate_check_qber",
    "transcript_eve_view",
    "block_failure_probability",
    "key_digest",
]

Channel = Union[PauliChannel, InterceptResend, None]


@dataclass(frozen=True)
class SessionParams:
    """Inputs to :func:`run_session`.

    ``n`` is the number of check bits, and also of key-material bits, so
    ``2n`` qubits are sent. ``failure_target`` bounds the forecast chance
    that any reconciliation block fails before distillation may hand off.
    """

    n: int
    r: int = 1
    channel: Channel = None
    abort_threshold: float = 0.20
    schedule: Schedule = field(default_factory=Schedule.alternating)
    css: Optional[CssPair] = None
    seed: int = 0
    failure_target: float = 1e-3

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("n must be at least 1")
        if self.r < 1 or (2 * self.n) % self.r:
            raise ValueError(f"r={self.r} does not divide 2n={2 * self.n}")
        if not 0 <= self.abort_threshold <= 0.5:
            raise ValueError("abort_threshold must lie in [0, 0.5]")
        if not 0 < self.failure_target < 1:
            raise ValueError("failure_target must lie in (0, 1)")
        if self.css is None:
            object.__setattr__(self, "css", gf2codes.steane_pair())


@dataclass(eq=False)
class SessionOutcome:
    status: str  # "completed" or "aborted"
    alice_key: np.ndarray
    bob_key: np.ndarray
    transcript: Transcript
    consumed_secret_bits: int
    observed_qber: Optional[float]
    rounds_executed: int = 0
    reason: str = ""
    records: list[StepRecord] = field(default_factory=list)
    transmitted: int = 0
    usable_positions: int = 0
    key_material: int = 0
    distilled_bits: int = 0
    blocks: int = 0

    @property
    def completed(self) -> bool:
        return self.status == "completed"

    @property
    def keys_match(self) -> bool:
        return np.array_equal(self.alice_key, self.bob_key)

    @property
    def usable_fraction(self) -> float:
        return self.usable_positions / self.transmitted if self.transmitted else 0.0


def select_check_bits(rng: np.random.Generator, total: int) -> np.ndarray:
    """Uniformly random ``total // 2`` positions out of ``total``, sorted."""
    if total % 2:
        raise ValueError("total must be even")
    return np.sort(rng.choice(total, size=total // 2, replace=False))


def estimate_check_qber(alice_vals, bob_vals) -> float:
    a = np.asarray(alice_vals)
    b = np.asarray(bob_vals)
    if a.shape != b.shape:
        raise ValueError("check strings differ in length")
    if a.size == 0:
        raise ValueError("empty check set")
    return float(np.mean(a != b))


def block_failure_probability(e: float, n: int, t: int) -> float:
    """Chance that more than ``t`` of ``n`` i.i.d. bits at error rate ``e`` are flipped."""
    ok = sum(math.comb(n, w) * e**w * (1 - e) ** (n - w) for w in range(t + 1))
    return max(0.0, 1.0 - ok)


def _ready_for(css: CssPair, target: float):
    n, t = css.n, css.c1.t

    def ready(forecast: float, length: int) -> bool:
        blocks = length // n
        if blocks == 0:
            return False
        pb = block_failure_probability(forecast, n, t)
        return -math.expm1(blocks * math.log1p(-pb)) <= target if pb < 1 else False

    return ready


def run_session(params: SessionParams) -> SessionOutcome:
    """Run one session and return keys, transcript and bookkeeping.

    The session aborts (status ``"aborted"``, reason recorded and an ``Abort``
    message appended) when the check error rate exceeds
    ``abort_threshold``, when distillation runs out of bits, or when
    reconciliation meets an undecodable syndrome.
    """
    rng = np.random.default_rng(params.seed)
    n2 = 2 * params.n
    t = Transcript()
    out = SessionOutcome(
        status="completed",
        alice_key=np.zeros(0, np.uint8),
        bob_key=np.zeros(0, np.uint8),
        transcript=t,
        consumed_secret_bits=n2 // params.r,
        observed_qber=None,
        transmitted=n2,
    )

    def abort(reason: str) -> SessionOutcome:
        out.status = "aborted"
        out.reason = reason
        t.send("A", Kind.ABORT, reason)
        return out

    # shared basis sequence, random key encoded, sent through the channel
    basis = expand_basis(rng.integers(0, 2, n2 // params.r, dtype=np.uint8), params.r, n2)
    alice = rng.integers(0, 2, n2, dtype=np.uint8)
    bob = transmit(alice, basis.expanded, params.channel, rng)

    # Bob measured in the shared basis; nothing is sifted away
    t.send("B", Kind.RECEIPT_ACK, n2)
    out.usable_positions = n2

    # check bits
    check = select_check_bits(rng, n2)
    t.send("A", Kind.CHECK_POSITIONS, check)
    t.send("A", Kind.CHECK_VALUES, alice[check])
    t.send("B", Kind.CHECK_VALUES, bob[check])
    qber = estimate_check_qber(alice[check], bob[check])
    out.observed_qber = qber
    if qber > params.abort_threshold:
        return abort(f"qber {qber:.4f} exceeds abort threshold {params.abort_threshold}")

    keep = np.ones(n2, dtype=bool)
    keep[check] = False
    material = PairedBits(alice[keep], bob[keep])
    out.key_material = len(material)

    # two-way distillation
    css = params.css
    dist = run_schedule(
        material,
        params.schedule,
        rng,
        prior_qber=qber,
        ready=_ready_for(css, params.failure_target),
        transcript=t,
    )
    out.records = dist.records
    out.rounds_executed = dist.rounds
    if not dist.succeeded:
        return abort(f"distillation exhausted: {dist.reason}")
    bits = dist.final
    out.distilled_bits = len(bits)

    # one CSS block at a time; leftover bits are dropped
    blocks = len(bits) // css.n
    if blocks == 0:
        return abort(f"only {len(bits)} bits left, fewer than one code block of {css.n}")
    out.blocks = blocks
    ak, bk, ann = [], [], []
    try:
        for i in range(blocks):
            sl = slice(i * css.n, (i + 1) * css.n)
            a, b, u_plus_v = gf2codes.one_way_reconcile(css, bits.alice[sl], bits.bob[sl], rng)
            ak.append(a)
            bk.append(b)
            ann.append(u_plus_v)
    except DecodingError as exc:
        return abort(f"reconciliation failure: {exc}")
    t.send("A", Kind.CODE_ANNOUNCEMENT, np.concatenate(ann))
    out.alice_key = np.concatenate(ak)
    out.bob_key = np.concatenate(bk)
    return out


@dataclass(frozen=True)
class EveView:
    messages: tuple[Message, ...]
    announced_bits: int
    announced_indices: int
    counts: dict


def transcript_eve_view(outcome: SessionOutcome) -> EveView:
    """Everything an eavesdropper learns from the public transcript."""
    msgs = tuple(outcome.transcript)
    counts: dict[str, int] = {}
    for m in msgs:
        counts[m.kind.value] = counts.get(m.kind.value, 0) + 1
    return EveView(
        messages=msgs,
        announced_bits=sum(m.announced_bits for m in msgs),
        announced_indices=sum(m.announced_indices for m in msgs),
        counts=counts,
    )


def key_digest(key) -> str:
    """SHA-256 of a key's packed bits, prefixed with its length."""
    key = np.asarray(key, dtype=np.uint8)
    return hashlib.sha256(int(key.size).to_bytes(8, "big") + np.packbits(key).tobytes()).hexdigest()
