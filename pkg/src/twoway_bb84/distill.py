"""Two-way post-processing on Alice's and Bob's bit strings.

A *B step* pairs up bits, both parties announce the parity of each pair and
pairs with disagreeing parities are dropped; the first bit of each surviving
pair is kept. A *P step* replaces each triple of bits by its parity. Between
rounds a random sample of bits is sacrificed to estimate the current bit
error rate, and the schedule stops once that rate is low enough to hand off
to one-way reconciliation.

Schedules only ever see bit-error observations (:class:`BitObservation`);
there is no phase information in the prepare-and-measure protocol to give them.
"""
from __future__ import annotations

import csv
import io
import itertools
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .transcript import Kind, Transcript

__all__ = [
    "PairedBits",
    "Sacrifice",
    "BitObservation",
    "StepRecord",
    "Schedule",
    "ScheduleResult",
    "ExhaustedError",
    "b_step",
    "p_step",
    "refined_estimate",
    "run_schedule",
    "bit_error_after_b",
    "bit_error_after_p",
    "records_to_csv",
]


class ExhaustedError(ValueError):
    """Too few bits remain for the requested step."""


@dataclass(frozen=True, eq=False)
class PairedBits:
    alice: np.ndarray
    bob: np.ndarray

    def __post_init__(self):
        a = np.asarray(self.alice, dtype=np.uint8)
        b = np.asarray(self.bob, dtype=np.uint8)
        if a.shape != b.shape or a.ndim != 1:
            raise ValueError("alice and bob bit strings must be 1-d with equal lengths")
        object.__setattr__(self, "alice", a)
        object.__setattr__(self, "bob", b)

    def __len__(self):
        return self.alice.size

    @property
    def error_rate(self) -> float:
        return float(np.mean(self.alice != self.bob)) if len(self) else 0.0


@dataclass(frozen=True, eq=False)
class Sacrifice:
    positions: np.ndarray
    alice_values: np.ndarray
    bob_values: np.ndarray


def bit_error_after_b(p):
    """Bit error of a kept bit after one B step on i.i.d. errors at rate ``p``."""
    return p * p / (p * p + (1 - p) * (1 - p))


def bit_error_after_p(p):
    """Bit error of a triple parity built from i.i.d. errors at rate ``p``."""
    return 3 * p * (1 - p) ** 2 + p**3


def b_step(bits: PairedBits, pairing):
    """Advantage distillation on announced pairs.

    ``pairing`` lists bit indices; consecutive entries ``(pairing[2i],
    pairing[2i+1])`` form pair ``i``. A trailing odd index is dropped.

    Returns
    -------
    kept : PairedBits
        First bit of every pair whose parities agree.
    parities : tuple of np.ndarray
        Alice's and Bob's announced parities, one per pair.
    pass_count : int
    """
    pairing = np.asarray(pairing, dtype=np.int64)
    if pairing.size < 2:
        raise ExhaustedError("B step needs at least 2 bits")
    pairs = pairing[: pairing.size // 2 * 2].reshape(-1, 2)
    a, b = bits.alice[pairs], bits.bob[pairs]
    pa = a[:, 0] ^ a[:, 1]
    pb = b[:, 0] ^ b[:, 1]
    keep = pa == pb
    kept = PairedBits(a[keep, 0], b[keep, 0])
    return kept, (pa, pb), int(keep.sum())


def p_step(bits: PairedBits, grouping) -> PairedBits:
    """Replace each announced triple by its parity; up to two leftovers are dropped."""
    grouping = np.asarray(grouping, dtype=np.int64)
    if grouping.size < 3:
        raise ExhaustedError("P step needs at least 3 bits")
    triples = grouping[: grouping.size // 3 * 3].reshape(-1, 3)
    return PairedBits(
        np.bitwise_xor.reduce(bits.alice[triples], axis=1),
        np.bitwise_xor.reduce(bits.bob[triples], axis=1),
    )


def refined_estimate(bits: PairedBits, m: int, rng: np.random.Generator):
    """Publicly compare ``m`` random positions and remove them.

    Returns ``(estimate, remaining, sacrifice)``.
    """
    if m < 1:
        raise ValueError("sample size must be positive")
    if m > len(bits):
        raise ExhaustedError(f"cannot sacrifice {m} of {len(bits)} bits")
    positions = np.sort(rng.choice(len(bits), size=m, replace=False))
    mask = np.ones(len(bits), dtype=bool)
    mask[positions] = False
    sac = Sacrifice(positions, bits.alice[positions], bits.bob[positions])
    estimate = float(np.mean(sac.alice_values != sac.bob_values))
    return estimate, PairedBits(bits.alice[mask], bits.bob[mask]), sac


@dataclass(frozen=True)
class BitObservation:
    """What a schedule may see after a round. No phase data, by construction."""

    round: int
    steps: str
    in_len: int
    out_len: int
    pairs: int
    pass_count: int
    errors: int
    sample_size: int

    @property
    def estimate(self) -> float:
        return self.errors / self.sample_size


@dataclass(frozen=True)
class StepRecord:
    round: int
    step_kind: str
    in_len: int
    out_len: int
    pass_count: Optional[int] = None
    estimate: Optional[float] = None


DecisionFn = Callable[[Sequence[BitObservation]], Optional[str]]


def default_adaptive(observations: Sequence[BitObservation]) -> str:
    """Two B steps per round while the observed bit error is above 5%, else one."""
    if observations and observations[-1].estimate > 0.05:
        return "BBP"
    return "BP"


@dataclass(frozen=True)
class Schedule:
    """Which steps each round runs and when to stop.

    Parameters
    ----------
    policy : {"alternating", "fixed", "adaptive"}
    sequence : str
        For ``"fixed"``: the steps, each of which is its own round.
    decide : callable
        For ``"adaptive"``: maps the observations so far to the next round's
        steps (a string over ``"BP"``), or ``None`` to give up.
    sacrifice_m : int, optional
        Bits sacrificed per estimate. Default ``min(1024, len // 4)``.
    handoff_threshold : float
        Hand off once the estimated bit error falls strictly below this.
    min_rounds : int
        Rounds to run before handoff is allowed.
    max_rounds : int
    """

    policy: str = "alternating"
    sequence: str = ""
    decide: Optional[DecisionFn] = field(default=None, compare=False)
    sacrifice_m: Optional[int] = None
    handoff_threshold: float = 0.10
    min_rounds: int = 0
    max_rounds: int = 64

    def __post_init__(self):
        if self.policy not in ("alternating", "fixed", "adaptive"):
            raise ValueError(f"unknown policy {self.policy!r}")
        if set(self.sequence) - set("BP"):
            raise ValueError("fixed sequences may only contain 'B' and 'P'")
        if self.policy == "fixed" and not self.sequence:
            raise ValueError("fixed policy needs a non-empty sequence")
        if self.policy == "adaptive" and self.decide is None:
            object.__setattr__(self, "decide", default_adaptive)
        if not 0 < self.handoff_threshold < 0.11:
            raise ValueError("handoff_threshold must lie in (0, 0.11)")

    @classmethod
    def alternating(cls, **kw) -> "Schedule":
        return cls("alternating", **kw)

    @classmethod
    def fixed(cls, sequence: str, **kw) -> "Schedule":
        return cls("fixed", sequence=sequence, **kw)

    @classmethod
    def adaptive(cls, decide: DecisionFn | None = None, **kw) -> "Schedule":
        return cls("adaptive", decide=decide, **kw)

    @classmethod
    def parse(cls, text: str, **kw) -> "Schedule":
        """Parse ``alternating``, ``fixed:BPBB...`` or ``adaptive``."""
        if text == "alternating":
            return cls.alternating(**kw)
        if text == "adaptive":
            return cls.adaptive(**kw)
        if text.startswith("fixed:"):
            return cls.fixed(text[len("fixed:"):], **kw)
        raise ValueError(f"bad schedule {text!r}; use alternating, fixed:<BP...> or adaptive")

    def describe(self) -> str:
        return "fixed:" + self.sequence if self.policy == "fixed" else self.policy

    def round_steps(self, round_no: int, observations: Sequence[BitObservation]) -> Optional[str]:
        """Steps for 1-based ``round_no``, or ``None`` when the schedule has run out."""
        if self.policy == "alternating":
            return "BP"
        if self.policy == "fixed":
            return self.sequence[round_no - 1] if round_no <= len(self.sequence) else None
        steps = self.decide(tuple(observations))
        if steps is not None and (not steps or set(steps) - set("BP")):
            raise ValueError(f"decision function returned invalid steps {steps!r}")
        return steps

    def sample_size(self, length: int) -> int:
        if self.sacrifice_m is not None:
            return self.sacrifice_m
        return max(1, min(1024, length // 4))


@dataclass
class ScheduleResult:
    final: PairedBits
    status: str  # "handoff" or "exhausted"
    records: list = field(default_factory=list)
    observations: list = field(default_factory=list)
    rounds: int = 0
    estimate: Optional[float] = None
    forecast: Optional[float] = None
    reason: str = ""

    @property
    def succeeded(self) -> bool:
        return self.status == "handoff"


ReadyFn = Callable[[float, int], bool]


def run_schedule(
    bits: PairedBits,
    schedule: Schedule,
    rng: np.random.Generator,
    *,
    prior_qber: Optional[float] = None,
    ready: Optional[ReadyFn] = None,
    transcript: Optional[Transcript] = None,
) -> ScheduleResult:
    """Run distillation rounds until handoff or exhaustion.

    Each round runs the schedule's steps then sacrifices a sample to estimate
    the bit error. Handoff happens after at least ``schedule.min_rounds``
    rounds, once the estimate is below ``schedule.handoff_threshold`` and
    ``ready(forecast, remaining_length)`` agrees. ``forecast`` is
    ``prior_qber`` pushed through the executed steps with the i.i.d. bit-error
    maps, or the latest estimate when no prior is given. With a prior, a
    zero-round handoff is possible.

    Alice draws every pairing, grouping and sample from ``rng``; all of them
    are appended to ``transcript`` when one is given.
    """
    if len(bits) == 0:
        raise ValueError("run_schedule needs a nonempty input")
    t = transcript if transcript is not None else Transcript()
    result = ScheduleResult(final=bits, status="exhausted", forecast=prior_qber)

    def may_hand_off(estimate, length):
        if result.rounds < schedule.min_rounds or not estimate < schedule.handoff_threshold:
            return False
        forecast = result.forecast if result.forecast is not None else estimate
        return ready is None or ready(forecast, length)

    if prior_qber is not None and may_hand_off(prior_qber, len(bits)):
        result.status = "handoff"
        result.estimate = prior_qber
        return result

    cur = bits
    for round_no in itertools.count(1):
        if round_no > schedule.max_rounds:
            result.reason = f"no handoff within {schedule.max_rounds} rounds"
            break
        steps = schedule.round_steps(round_no, result.observations)
        if steps is None:
            result.reason = "schedule ran out of steps"
            break
        in_len = len(cur)
        pairs = passed = 0
        try:
            for s in steps:
                n0 = len(cur)
                if s == "B":
                    pairing = rng.permutation(n0)
                    t.send("A", Kind.PAIRING_PERMUTATION, pairing)
                    cur, (pa, pb), pc = b_step(cur, pairing)
                    t.send("A", Kind.PAIR_PARITIES, pa)
                    t.send("B", Kind.PAIR_PARITIES, pb)
                    pairs += pa.size
                    passed += pc
                    result.records.append(StepRecord(round_no, "B", n0, len(cur), pass_count=pc))
                    if result.forecast is not None:
                        result.forecast = bit_error_after_b(result.forecast)
                else:
                    grouping = rng.permutation(n0)
                    t.send("A", Kind.TRIPLE_GROUPING, grouping)
                    cur = p_step(cur, grouping)
                    result.records.append(StepRecord(round_no, "P", n0, len(cur)))
                    if result.forecast is not None:
                        result.forecast = bit_error_after_p(result.forecast)
            m = schedule.sample_size(len(cur))
            if m >= len(cur):
                raise ExhaustedError(f"only {len(cur)} bits left for a sample of {m}")
        except ExhaustedError as exc:
            result.reason = str(exc)
            result.rounds = round_no
            break
        n0 = len(cur)
        estimate, cur, sac = refined_estimate(cur, m, rng)
        errors = int(np.count_nonzero(sac.alice_values != sac.bob_values))
        t.send("A", Kind.SACRIFICE_POSITIONS, sac.positions)
        t.send("A", Kind.SACRIFICE_VALUES, sac.alice_values)
        t.send("B", Kind.SACRIFICE_VALUES, sac.bob_values)
        t.send("A", Kind.ERROR_ESTIMATE, (errors, m))
        result.records.append(StepRecord(round_no, "E", n0, len(cur), estimate=estimate))
        result.observations.append(BitObservation(round_no, steps, in_len, len(cur), pairs, passed, errors, m))
        result.rounds = round_no
        result.estimate = estimate
        if may_hand_off(estimate, len(cur)):
            result.status = "handoff"
            break
    result.final = cur
    return result


def records_to_csv(records: Sequence[StepRecord], header: str = "") -> str:
    """Round records as CSV; ``header`` lines are emitted as ``#`` comments."""
    buf = io.StringIO()
    for line in header.splitlines():
        buf.write(f"# {line}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["round", "step_kind", "in_len", "out_len", "pass_count", "estimate"])
    for r in records:
        w.writerow([
            r.round,
            r.step_kind,
            r.in_len,
            r.out_len,
            "" if r.pass_count is None else r.pass_count,
            "" if r.estimate is None else f"{r.estimate:.6g}",
        ])
    return buf.getvalue()
