"""Bell-diagonal error recurrences for two-way distillation.

A pair's error is described by a probability 4-vector over the Pauli labels
``(I, X, Y, Z)``: ``q[..., 0..3]``. The bit-error marginal is ``q_x + q_y``
and the phase-error marginal is ``q_z + q_y``. All maps broadcast over
leading axes, so a whole family of initial states can be iterated at once.

Convergence means the state can be handed to one-way error correction and
privacy amplification. The default ``"capacity"`` criterion asks for a
positive one-way yield ``1 - h(bit) - h(phase)``, where ``h`` is the binary
entropy. ``"marginals"`` is a stricter rule on the two error rates alone.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence

import numpy as np

from .distill import Schedule

__all__ = [
    "BellDiagonal",
    "InitialCondition",
    "b_step_map",
    "p_step_map",
    "bit_marginal",
    "phase_marginal",
    "one_way_yield",
    "iterate_schedule",
    "IterationResult",
    "find_threshold",
    "ThresholdResult",
    "schedule_search",
    "SearchResult",
    "eve_info_bound",
    "key_rate_accounting",
    "KeyRateReport",
    "trajectory_to_csv",
]

CONVERGES = "Converges"
DIVERGES = "Diverges"
UNDECIDED = "Undecided"


@dataclass(frozen=True, eq=False)
class BellDiagonal:
    """Error distribution ``(q_i, q_x, q_y, q_z)`` on one pair."""

    q_i: float
    q_x: float
    q_y: float
    q_z: float

    def __post_init__(self):
        q = self.q
        if (q < 0).any() or abs(q.sum() - 1) > 1e-12:
            raise ValueError(f"not a probability vector: {q}")

    @classmethod
    def from_array(cls, q) -> "BellDiagonal":
        return cls(*(float(x) for x in np.asarray(q, dtype=float).reshape(4)))

    @property
    def q(self) -> np.ndarray:
        return np.array([self.q_i, self.q_x, self.q_y, self.q_z])

    @property
    def bit_error(self) -> float:
        return self.q_x + self.q_y

    @property
    def phase_error(self) -> float:
        return self.q_z + self.q_y


def bit_marginal(q) -> np.ndarray:
    q = np.asarray(q, dtype=float)
    return q[..., 1] + q[..., 2]


def phase_marginal(q) -> np.ndarray:
    q = np.asarray(q, dtype=float)
    return q[..., 3] + q[..., 2]


def _h(p):
    p = np.clip(np.asarray(p, dtype=float), 0.0, 1.0)
    with np.errstate(divide="ignore", invalid="ignore"):
        out = -p * np.log2(p) - (1 - p) * np.log2(1 - p)
    return np.nan_to_num(out, nan=0.0)


def one_way_yield(q) -> np.ndarray:
    """``1 - h(bit) - h(phase)``: key fraction left by one-way post-processing."""
    return 1.0 - _h(bit_marginal(q)) - _h(phase_marginal(q))


def b_step_map(q):
    """Error distribution of the kept pair after a B step, and the pass probability.

    The kept pair carries the shared bit error of the two inputs and the XOR
    of their phase errors.

    Returns
    -------
    q_out : np.ndarray
    pass_prob : np.ndarray or float
    """
    q = np.asarray(q, dtype=float)
    i, x, y, z = q[..., 0], q[..., 1], q[..., 2], q[..., 3]
    pass_prob = (i + z) ** 2 + (x + y) ** 2
    if np.any(pass_prob <= 0):
        raise ValueError("B step cannot pass on this input")
    out = np.stack([i * i + z * z, x * x + y * y, 2 * x * y, 2 * i * z], axis=-1)
    out = out / pass_prob[..., None]
    return out / out.sum(axis=-1, keepdims=True), pass_prob


def p_step_map(q) -> np.ndarray:
    """Error distribution of the parity of a triple after a P step.

    The output bit error is the XOR of the three input bit errors, and the
    output phase error is their majority. Writing ``s0, d0 = q_i + q_x,
    q_i - q_x`` and ``s1, d1 = q_z + q_y, q_z - q_y``, sums of products of
    ``s`` give the total weight with a given number of phase errors, and the
    same products of ``d`` give even-minus-odd bit parity.
    """
    q = np.asarray(q, dtype=float)
    i, x, y, z = q[..., 0], q[..., 1], q[..., 2], q[..., 3]
    s0, d0, s1, d1 = i + x, i - x, z + y, z - y
    S0 = s0**3 + 3 * s0**2 * s1
    D0 = d0**3 + 3 * d0**2 * d1
    S1 = 3 * s0 * s1**2 + s1**3
    D1 = 3 * d0 * d1**2 + d1**3
    out = np.stack([(S0 + D0) / 2, (S0 - D0) / 2, (S1 - D1) / 2, (S1 + D1) / 2], axis=-1)
    out = np.clip(out, 0.0, None)
    return out / out.sum(axis=-1, keepdims=True)


def _apply(step: str, q):
    return b_step_map(q)[0] if step == "B" else p_step_map(q)


@dataclass(frozen=True)
class InitialCondition:
    """A family of initial error distributions parameterized by error rate ``p``.

    ``"independent"``: independent bit and phase flips, each at rate ``p``.
    ``"depolarizing"``: ``q_x = q_y = q_z = p/2`` so the bit error is ``p``.
    ``"worst-case"``: bit and phase marginals both ``p`` (or ``p_phase``
    when given), with every ``q_y`` on a grid of step ``q_y_step`` over
    ``[0, min(p_bit, p_phase)]``.
    """

    family: str = "worst-case"
    q_y_step: float = 1e-3
    p_phase: Optional[float] = None

    def __post_init__(self):
        if self.family not in ("independent", "depolarizing", "worst-case"):
            raise ValueError(f"unknown family {self.family!r}")

    def states(self, p: float) -> np.ndarray:
        """Array of shape ``(G, 4)`` with every member of the family at ``p``."""
        if self.family == "independent":
            return np.array([[(1 - p) ** 2, p * (1 - p), p * p, p * (1 - p)]])
        if self.family == "depolarizing":
            return np.array([[1 - 1.5 * p, p / 2, p / 2, p / 2]])
        pb = p
        pp = p if self.p_phase is None else self.p_phase
        top = min(pb, pp)
        qy = np.arange(0.0, top, self.q_y_step)
        qy = np.append(qy, top)
        return np.stack([1 - pb - pp + qy, pb - qy, qy, pp - qy], axis=-1)


def _family(family) -> InitialCondition:
    return family if isinstance(family, InitialCondition) else InitialCondition(family)


def _rounds(schedule) -> Iterable[str]:
    """Per-round step strings; Alternating rounds are ``"BP"``, fixed steps are one round each."""
    if isinstance(schedule, Schedule):
        if schedule.policy == "alternating":
            return itertools.repeat("BP")
        if schedule.policy == "fixed":
            return list(schedule.sequence)
        raise ValueError("adaptive schedules depend on sampled data and cannot be iterated analytically")
    if schedule == "alternating":
        return itertools.repeat("BP")
    if isinstance(schedule, str):
        seq = schedule[len("fixed:"):] if schedule.startswith("fixed:") else schedule
        if not seq or set(seq) - set("BP"):
            raise ValueError(f"bad schedule {schedule!r}")
        return list(seq)
    return list(schedule)


class _Tracker:
    """Per-state convergence bookkeeping for one of the two criteria."""

    def __init__(self, shape, criterion: str, window: int):
        if criterion not in ("capacity", "marginals"):
            raise ValueError(f"unknown criterion {criterion!r}")
        self.criterion = criterion
        self.window = window
        self.prev_bit = np.full(shape, np.inf)
        self.prev_phase = np.full(shape, np.inf)
        self.streak = np.zeros(shape, dtype=int)
        self.best = np.full(shape, -np.inf)
        self.stale = np.zeros(shape, dtype=int)

    def update(self, q):
        """Returns (converged, diverged) boolean arrays for the new states."""
        bit, phase = bit_marginal(q), phase_marginal(q)
        y = one_way_yield(q)
        if self.criterion == "capacity":
            conv = y > 0
        else:
            dec = (bit < self.prev_bit) & (phase < self.prev_phase)
            self.streak = np.where(dec, self.streak + 1, 0)
            conv = ((bit < 1e-6) & (phase < 1e-6)) | ((bit < 0.10) & (phase < 0.10) & (self.streak >= 3))
        improved = y > self.best + 1e-12
        self.best = np.where(improved, y, self.best)
        self.stale = np.where(improved, 0, self.stale + 1)
        self.prev_bit, self.prev_phase = bit, phase
        div = ~conv & ((bit >= 0.5 - 1e-12) | (phase >= 0.5 - 1e-12) | (self.stale >= self.window))
        return conv, div

    def expand(self, k: int):
        for name in ("prev_bit", "prev_phase", "streak", "best", "stale"):
            setattr(self, name, np.repeat(getattr(self, name), k, axis=0))


@dataclass
class IterationResult:
    verdict: str
    rounds: int
    trajectory: list = field(default_factory=list)  # (round, steps, q, pass_prob)

    @property
    def final(self) -> np.ndarray:
        return self.trajectory[-1][2]


def iterate_schedule(
    q0,
    schedule="alternating",
    max_rounds: int = 200,
    criterion: str = "capacity",
    window: int = 50,
) -> IterationResult:
    """Iterate the recurrences round by round and classify the outcome.

    ``Converges`` once the criterion holds after a round. ``Diverges`` when a
    marginal reaches 0.5 or the one-way yield has not improved for
    ``window`` rounds. ``Undecided`` when ``max_rounds`` or a fixed sequence
    runs out first. Trajectory entry 0 is the initial state.

    ``pass_prob`` in the trajectory is the product of the B-step pass
    probabilities within that round (1.0 for a round without B steps).
    """
    q = np.asarray(q0.q if isinstance(q0, BellDiagonal) else q0, dtype=float).reshape(4)
    tracker = _Tracker((), criterion, window)
    traj = [(0, "", q.copy(), 1.0)]
    for r, steps in enumerate(_rounds(schedule), start=1):
        if r > max_rounds:
            break
        pp = 1.0
        for s in steps:
            if s == "B":
                q, pr = b_step_map(q)
                pp *= float(pr)
            else:
                q = p_step_map(q)
        traj.append((r, steps, q.copy(), pp))
        conv, div = tracker.update(q)
        if conv:
            return IterationResult(CONVERGES, r, traj)
        if div:
            return IterationResult(DIVERGES, r, traj)
    return IterationResult(UNDECIDED, len(traj) - 1, traj)


def _all_converge(states, schedule, criterion, max_rounds, window) -> bool:
    q = np.asarray(states, dtype=float)
    tracker = _Tracker(q.shape[:-1], criterion, window)
    done = np.zeros(q.shape[:-1], dtype=bool)
    for r, steps in enumerate(_rounds(schedule), start=1):
        if r > max_rounds:
            return False
        for s in steps:
            q = _apply(s, q)
        conv, div = tracker.update(q)
        done |= conv
        if done.all():
            return True
        if (div & ~done).any():
            return False
    return bool(done.all())


@dataclass
class ThresholdResult:
    threshold: float
    monotone: bool
    scan: list  # (p, converges)
    trace: list  # (lo, hi, mid, converges)
    worst_q_y: Optional[float] = None

    def report(self) -> str:
        lines = [f"threshold {self.threshold:.6f} (monotone scan: {self.monotone})"]
        lines += [f"  scan p={p:.4f} {'converges' if ok else 'fails'}" for p, ok in self.scan]
        lines += [f"  bisect [{lo:.6f}, {hi:.6f}] mid={m:.6f} {'converges' if ok else 'fails'}" for lo, hi, m, ok in self.trace]
        if self.worst_q_y is not None:
            lines.append(f"  first failing q_y just above threshold: {self.worst_q_y:.4f}")
        return "\n".join(lines)


def find_threshold(
    schedule="alternating",
    family="worst-case",
    tol: float = 1e-4,
    criterion: str = "capacity",
    max_rounds: int = 200,
    scan_step: float = 0.01,
    window: int = 50,
) -> ThresholdResult:
    """Largest error rate at which every member of ``family`` converges.

    A scan over ``[0, 0.5]`` at ``scan_step`` first checks that convergence
    switches off exactly once. If it does, bisection narrows the bracket to
    ``tol``. If it does not, the result is the last converging scan point
    before the first failure, with ``monotone=False``.
    """
    fam = _family(family)

    def ok(p):
        return _all_converge(fam.states(p), schedule, criterion, max_rounds, window)

    grid = np.round(np.arange(0.0, 0.5 + 1e-12, scan_step), 12)
    scan = [(float(p), ok(p)) for p in grid]
    flags = [f for _, f in scan]
    first_fail = flags.index(False) if False in flags else len(flags)
    monotone = not any(flags[first_fail:])
    if first_fail == 0:
        return ThresholdResult(0.0, monotone, scan, [])
    if first_fail == len(flags):
        return ThresholdResult(float(grid[-1]), monotone, scan, [])
    lo, hi = float(grid[first_fail - 1]), float(grid[first_fail])
    trace = []
    if monotone:
        while hi - lo > tol:
            mid = (lo + hi) / 2
            good = ok(mid)
            trace.append((lo, hi, mid, good))
            lo, hi = (mid, hi) if good else (lo, mid)
    worst = None
    if fam.family == "worst-case":
        for row in fam.states(hi):
            if not _all_converge(row[None, :], schedule, criterion, max_rounds, window):
                worst = float(row[2])
                break
    return ThresholdResult(lo, monotone, scan, trace, worst)


@dataclass
class SearchResult:
    sequence: str
    threshold: float
    alternating_threshold: float
    trace: list  # (p, number of sequences converging)
    method: str


def _tree_success(states, length, criterion, window) -> np.ndarray:
    """Converged-at-some-prefix flags for all ``2**length`` B/P sequences.

    Sequence ``j`` reads its steps from the bits of ``j``, most significant
    first, with 0 for B and 1 for P.
    """
    q = np.asarray(states, dtype=float)[None, ...]
    tracker = _Tracker(q.shape[:-1], criterion, window)
    done = np.zeros(q.shape[:-1], dtype=bool)
    for _ in range(length):
        q = np.stack([b_step_map(q)[0], p_step_map(q)], axis=1).reshape(-1, *q.shape[1:])
        tracker.expand(2)
        done = np.repeat(done, 2, axis=0)
        conv, _ = tracker.update(q)
        done |= conv
    return done.all(axis=1)


def _seq_name(j: int, length: int) -> str:
    return "".join("BP"[(j >> (length - 1 - i)) & 1] for i in range(length))


def schedule_search(
    max_len: int = 12,
    family="worst-case",
    tol: float = 1e-4,
    criterion: str = "capacity",
    beam: int = 32,
    window: int = 50,
) -> SearchResult:
    """Best fixed B/P sequence of length ``max_len`` by threshold.

    A sequence converges once any prefix does, so extending a sequence never
    lowers its threshold and only full-length sequences need comparing. Up to
    length 12 the search is exhaustive: every ``p`` in a bisection is tested
    against all ``2**max_len`` sequences at once. Longer searches keep the
    ``beam`` best prefixes at each length.
    """
    if not 1 <= max_len <= 20:
        raise ValueError("max_len must lie in [1, 20]")
    fam = _family(family)
    alt = find_threshold("alternating", fam, tol=tol, criterion=criterion, window=window).threshold
    trace: list = []
    if max_len <= 12:
        def winners(p):
            w = _tree_success(fam.states(p), max_len, criterion, window)
            trace.append((p, int(w.sum())))
            return w

        lo, hi = 0.0, 0.5
        best = winners(lo)
        while hi - lo > tol:
            mid = (lo + hi) / 2
            w = winners(mid)
            if w.any():
                lo, best = mid, w
            else:
                hi = mid
        seq = _seq_name(int(np.flatnonzero(best)[0]), max_len)
        method = "exhaustive"
    else:
        prefixes = [""]
        for _ in range(max_len):
            cands = [p + s for p in prefixes for s in "BP"]
            scored = [(find_threshold(c, fam, tol=1e-3, criterion=criterion, window=window).threshold, c) for c in cands]
            scored.sort(key=lambda t: (-t[0], t[1]))
            prefixes = [c for _, c in scored[:beam]]
            trace.append((scored[0][0], len(cands)))
        seq = prefixes[0]
        method = f"beam({beam})"
    thr = find_threshold(seq, fam, tol=tol, criterion=criterion, window=window).threshold
    return SearchResult(seq, thr, alt, trace, method)


def eve_info_bound(s: float, m: float) -> tuple[float, float]:
    """Leading term of the bound on Eve's information about an ``m``-bit key.

    Returns ``(c, 2**-c)`` with ``c = s - log2(2m + s + 1/ln 2)``. The
    subleading ``2**O(-2s)`` term has no explicit constant and is omitted.
    """
    if s < 1 or m < 1:
        raise ValueError("s and m must be at least 1")
    arg = 2 * m + s + 1 / math.log(2)
    if arg >= 2.0**s:
        raise ValueError(f"2m + s + 1/ln2 = {arg:.4g} is not below 2**s; the bound is vacuous")
    c = s - math.log2(arg)
    return c, 2.0**-c


@dataclass(frozen=True)
class KeyRateReport:
    baseline: str
    transmitted: int
    usable_positions: float
    usable_fraction: float
    check_cost: int
    key_material: float
    distilled_bits: float
    survival_fraction: float
    final_key_bits: float
    consumed_secret_bits: int
    net_secret_bits: float

    def as_rows(self) -> list[tuple[str, object]]:
        return list(self.__dict__.items())


def key_rate_accounting(outcome, baseline: str = "no_pab") -> KeyRateReport:
    """Where the transmitted qubits of a session went.

    ``no_pab`` reports the session as run. ``standard_bb84`` reports what the
    same run would give if bases were announced and mismatches sifted: half
    the positions survive, no secret basis bits are consumed, and check cost,
    key material and final key scale by one half.
    """
    if baseline not in ("no_pab", "standard_bb84"):
        raise ValueError(f"unknown baseline {baseline!r}")
    tx = outcome.transmitted
    keep = 1.0 if baseline == "no_pab" else 0.5
    usable = outcome.usable_positions * keep
    material = outcome.key_material * keep
    distilled = outcome.distilled_bits * keep
    final = outcome.alice_key.size * keep if outcome.completed else 0
    consumed = outcome.consumed_secret_bits if baseline == "no_pab" else 0
    return KeyRateReport(
        baseline=baseline,
        transmitted=tx,
        usable_positions=usable,
        usable_fraction=usable / tx if tx else 0.0,
        check_cost=int(round((outcome.transmitted - outcome.key_material) * keep)),
        key_material=material,
        distilled_bits=distilled,
        survival_fraction=distilled / material if material else 0.0,
        final_key_bits=final,
        consumed_secret_bits=consumed,
        net_secret_bits=final - consumed,
    )


def trajectory_to_csv(points: Sequence[tuple], header: str = "") -> str:
    """CSV rows ``p, verdict, rounds, final_bit_marginal, final_phase_marginal``.

    ``points`` holds ``(p, IterationResult)`` pairs.
    """
    out = [f"# {line}" for line in header.splitlines()]
    out.append("p,verdict,rounds,final_bit_marginal,final_phase_marginal")
    for p, res in points:
        q = res.final
        out.append(f"{p:.6g},{res.verdict},{res.rounds},{bit_marginal(q):.6g},{phase_marginal(q):.6g}")
    return "\n".join(out) + "\n"
