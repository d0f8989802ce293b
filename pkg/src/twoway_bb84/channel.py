"""Classical model of the quantum channel for prepare-and-measure BB84.

Qubits are tracked as (bit, basis) records. Basis 0 is Z, basis 1 is X.
A Pauli error flips the Z-basis record for X and Y, and the X-basis record
for Z and Y. The receiver always measures in the sender's basis, because both
hold the same secret basis sequence.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

__all__ = [
    "Basis",
    "Pauli",
    "PauliChannel",
    "InterceptResend",
    "BasisSequence",
    "QubitRecord",
    "expand_basis",
    "apply_pauli",
    "apply_paulis",
    "sample_pauli",
    "sample_paulis",
    "effective_qber",
    "intercept_resend_qber",
    "simulate_intercept_resend",
    "transmit",
    "standard_bb84_sift",
]


class Basis(enum.IntEnum):
    Z = 0
    X = 1


class Pauli(enum.IntEnum):
    """Single-pair error label; the integer value indexes probability 4-vectors."""

    I = 0
    X = 1
    Y = 2
    Z = 3

    @property
    def flips_z(self) -> bool:
        return self in (Pauli.X, Pauli.Y)

    @property
    def flips_x(self) -> bool:
        return self in (Pauli.Z, Pauli.Y)


# flip table indexed [basis, pauli]
_FLIP = np.array([[0, 1, 1, 0], [0, 0, 1, 1]], dtype=np.uint8)


@dataclass(frozen=True)
class PauliChannel:
    p_i: float
    p_x: float
    p_y: float
    p_z: float

    def __post_init__(self):
        probs = self.probs
        if (probs < 0).any():
            raise ValueError("Pauli channel probabilities must be non-negative")
        if abs(probs.sum() - 1.0) > 1e-12:
            raise ValueError(f"Pauli channel probabilities sum to {probs.sum()!r}, not 1")

    @property
    def probs(self) -> np.ndarray:
        return np.array([self.p_i, self.p_x, self.p_y, self.p_z], dtype=float)

    @classmethod
    def identity(cls) -> "PauliChannel":
        return cls(1.0, 0.0, 0.0, 0.0)

    @classmethod
    def depolarizing(cls, p: float) -> "PauliChannel":
        """X, Y and Z each with probability ``p/3``."""
        return cls(1.0 - p, p / 3, p / 3, p / 3)

    @classmethod
    def from_xyz(cls, p_x: float, p_y: float, p_z: float) -> "PauliChannel":
        return cls(1.0 - p_x - p_y - p_z, p_x, p_y, p_z)


@dataclass(frozen=True)
class InterceptResend:
    """Eve measures every qubit in a random basis and resends her result.

    ``knows_basis`` makes her measure in the true basis instead; it exists to
    give tests a zero-disturbance reference.
    """

    knows_basis: bool = False


@dataclass(frozen=True)
class QubitRecord:
    bit: int
    basis: Basis


@dataclass(frozen=True, eq=False)
class BasisSequence:
    seed: np.ndarray
    r: int
    expanded: np.ndarray

    def __eq__(self, other):
        return (
            isinstance(other, BasisSequence)
            and self.r == other.r
            and np.array_equal(self.seed, other.seed)
            and np.array_equal(self.expanded, other.expanded)
        )


def expand_basis(seed, r: int, total_len: int) -> BasisSequence:
    """Repeat ``seed`` ``r`` times; ``r * len(seed)`` must equal ``total_len``."""
    seed = np.asarray(seed, dtype=np.uint8)
    if r < 1 or r * seed.size != total_len:
        raise ValueError(f"seed of length {seed.size} repeated {r} times does not give {total_len} bases")
    return BasisSequence(seed.copy(), r, np.tile(seed, r))


def apply_pauli(q: QubitRecord, e: Pauli) -> QubitRecord:
    """Outcome of measuring ``q`` in its own basis after error ``e``."""
    e = Pauli(e)
    flip = e.flips_z if Basis(q.basis) == Basis.Z else e.flips_x
    return QubitRecord(q.bit ^ int(flip), Basis(q.basis))


def apply_paulis(bits: np.ndarray, bases: np.ndarray, errors: np.ndarray) -> np.ndarray:
    """Vectorized :func:`apply_pauli` over arrays of bits, bases and labels."""
    return bits ^ _FLIP[bases, errors]


def sample_pauli(ch: PauliChannel, rng: np.random.Generator) -> Pauli:
    return Pauli(int(sample_paulis(ch, 1, rng)[0]))


def sample_paulis(ch: PauliChannel, size: int, rng: np.random.Generator) -> np.ndarray:
    cdf = np.cumsum(ch.probs)
    cdf[-1] = 1.0
    return np.searchsorted(cdf, rng.random(size), side="right").astype(np.intp)


def effective_qber(ch: PauliChannel, basis: Basis) -> float:
    """Probability that a record in ``basis`` is flipped."""
    if Basis(basis) == Basis.Z:
        return ch.p_x + ch.p_y
    return ch.p_z + ch.p_y


def intercept_resend_qber() -> float:
    """Exact error rate of intercept-resend against a hidden basis.

    Computed by enumerating Alice's basis and bit, Eve's basis, Eve's outcome
    and Bob's outcome, all branches weighted by their probabilities.
    """
    total = 0.0
    for a_basis in (0, 1):
        for a_bit in (0, 1):
            for e_basis in (0, 1):
                for e_bit in (0, 1):
                    p_e = (e_bit == a_bit) * 1.0 if e_basis == a_basis else 0.5
                    for b_bit in (0, 1):
                        p_b = (b_bit == e_bit) * 1.0 if e_basis == a_basis else 0.5
                        total += 0.125 * p_e * p_b * (b_bit != a_bit)
    return total


def _intercept_resend(bits, bases, rng, knows_basis=False):
    n = bits.size
    eve_bases = bases.copy() if knows_basis else rng.integers(0, 2, n, dtype=np.uint8)
    match = eve_bases == bases
    eve_bits = np.where(match, bits, rng.integers(0, 2, n, dtype=np.uint8))
    # Bob measures Eve's resent state in the true basis
    return np.where(match, eve_bits, rng.integers(0, 2, n, dtype=np.uint8)).astype(np.uint8)


def simulate_intercept_resend(n: int, rng: np.random.Generator, knows_basis: bool = False) -> float:
    """Empirical error rate of intercept-resend over ``n`` random qubits."""
    bits = rng.integers(0, 2, n, dtype=np.uint8)
    bases = rng.integers(0, 2, n, dtype=np.uint8)
    received = _intercept_resend(bits, bases, rng, knows_basis)
    return float(np.mean(received != bits))


def transmit(bits, bases, channel, rng: np.random.Generator) -> np.ndarray:
    """Bob's measurement outcomes for Alice's encoded records.

    ``channel`` is a :class:`PauliChannel`, an :class:`InterceptResend`
    adversary, or ``None`` for a perfect channel.
    """
    bits = np.asarray(bits, dtype=np.uint8)
    bases = np.asarray(bases, dtype=np.uint8)
    if channel is None:
        return bits.copy()
    if isinstance(channel, InterceptResend):
        return _intercept_resend(bits, bases, rng, channel.knows_basis)
    if isinstance(channel, PauliChannel):
        return apply_paulis(bits, bases, sample_paulis(channel, bits.size, rng))
    raise TypeError(f"unsupported channel {channel!r}")


def standard_bb84_sift(n: int, rng: np.random.Generator) -> float:
    """Fraction of positions surviving basis sifting when bases are announced.

    Baseline for comparison: Alice and Bob choose independent uniform bases
    and keep positions where they agree.
    """
    alice = rng.integers(0, 2, n, dtype=np.uint8)
    bob = rng.integers(0, 2, n, dtype=np.uint8)
    return float(np.mean(alice == bob))
