"""Public classical messages and their line-based text serialization.

One message per line::

    <seq> <A|B> <KIND> <hex payload>

An empty payload is written as ``-``. Payload encodings by kind:

* bit payloads: 4-byte big-endian bit count, then ``numpy.packbits`` bytes
* index payloads: big-endian uint32 per index
* ``ReceiptAck``: one uint32, the number of qubits received
* ``ErrorEstimate``: two uint32, disagreements then sample size
* ``Abort``: UTF-8 reason text
"""
from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

__all__ = ["Kind", "Message", "Transcript", "encode_payload", "decode_payload"]


class Kind(str, enum.Enum):
    RECEIPT_ACK = "ReceiptAck"
    CHECK_POSITIONS = "CheckPositions"
    CHECK_VALUES = "CheckValues"
    PAIRING_PERMUTATION = "PairingPermutation"
    PAIR_PARITIES = "PairParities"
    TRIPLE_GROUPING = "TripleGrouping"
    SACRIFICE_POSITIONS = "SacrificePositions"
    SACRIFICE_VALUES = "SacrificeValues"
    ERROR_ESTIMATE = "ErrorEstimate"
    CODE_ANNOUNCEMENT = "CodeAnnouncement"
    ABORT = "Abort"


BIT_KINDS = {Kind.CHECK_VALUES, Kind.PAIR_PARITIES, Kind.SACRIFICE_VALUES, Kind.CODE_ANNOUNCEMENT}
INDEX_KINDS = {Kind.CHECK_POSITIONS, Kind.PAIRING_PERMUTATION, Kind.TRIPLE_GROUPING, Kind.SACRIFICE_POSITIONS}


@dataclass(frozen=True, eq=False)
class Message:
    sender: str
    kind: Kind
    payload: object = None

    def __post_init__(self):
        if self.sender not in ("A", "B"):
            raise ValueError(f"sender must be 'A' or 'B', got {self.sender!r}")
        object.__setattr__(self, "kind", Kind(self.kind))

    def __eq__(self, other):
        if not isinstance(other, Message):
            return NotImplemented
        return (self.sender, self.kind) == (other.sender, other.kind) and encode_payload(
            self.kind, self.payload
        ) == encode_payload(other.kind, other.payload)

    @property
    def announced_bits(self) -> int:
        return int(np.asarray(self.payload).size) if self.kind in BIT_KINDS else 0

    @property
    def announced_indices(self) -> int:
        return int(np.asarray(self.payload).size) if self.kind in INDEX_KINDS else 0


def encode_payload(kind: Kind, payload) -> str:
    kind = Kind(kind)
    if kind in BIT_KINDS:
        bits = np.asarray(payload, dtype=np.uint8)
        raw = int(bits.size).to_bytes(4, "big") + np.packbits(bits).tobytes()
    elif kind in INDEX_KINDS:
        raw = np.asarray(payload, dtype=">u4").tobytes()
    elif kind == Kind.RECEIPT_ACK:
        raw = int(payload).to_bytes(4, "big")
    elif kind == Kind.ERROR_ESTIMATE:
        raw = np.asarray(payload, dtype=">u4").reshape(2).tobytes()
    elif kind == Kind.ABORT:
        raw = str(payload).encode()
    else:  # pragma: no cover - enum is closed
        raise ValueError(kind)
    return raw.hex() or "-"


def decode_payload(kind: Kind, text: str):
    kind = Kind(kind)
    raw = b"" if text == "-" else bytes.fromhex(text)
    if kind in BIT_KINDS:
        count = int.from_bytes(raw[:4], "big")
        return np.unpackbits(np.frombuffer(raw[4:], dtype=np.uint8))[:count].astype(np.uint8)
    if kind in INDEX_KINDS:
        return np.frombuffer(raw, dtype=">u4").astype(np.int64)
    if kind == Kind.RECEIPT_ACK:
        return int.from_bytes(raw, "big")
    if kind == Kind.ERROR_ESTIMATE:
        return tuple(int(x) for x in np.frombuffer(raw, dtype=">u4"))
    return raw.decode()


class Transcript(list):
    """Ordered list of :class:`Message` with text (de)serialization."""

    def send(self, sender: str, kind: Kind, payload=None) -> Message:
        msg = Message(sender, kind, payload)
        self.append(msg)
        return msg

    def dumps(self) -> str:
        return "".join(
            f"{i} {m.sender} {m.kind.value} {encode_payload(m.kind, m.payload)}\n" for i, m in enumerate(self)
        )

    @classmethod
    def loads(cls, text: str) -> "Transcript":
        out = cls()
        for expected, line in enumerate(ln for ln in text.splitlines() if ln.strip()):
            seq, sender, kind, payload = line.split()
            if int(seq) != expected:
                raise ValueError(f"message out of order: got seq {seq}, expected {expected}")
            out.append(Message(sender, Kind(kind), decode_payload(Kind(kind), payload)))
        return out

    def of_kind(self, kind: Kind) -> list[Message]:
        return [m for m in self if m.kind == Kind(kind)]
