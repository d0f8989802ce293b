"""GF(2) linear algebra and small classical linear codes.

Bit vectors and matrices are plain ``numpy`` arrays of dtype ``uint8`` holding
0/1 entries. Codes here are meant to be small enough that syndrome tables and
full codeword enumeration are cheap.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

__all__ = [
    "DecodingError",
    "LinearCode",
    "CssPair",
    "as_bits",
    "mat_vec_mul",
    "rref",
    "rank",
    "nullspace",
    "in_span",
    "syndrome_decode",
    "verify_nested",
    "coset_label",
    "one_way_reconcile",
    "hamming_7_4",
    "steane_pair",
    "parse_code",
    "format_code",
    "load_code",
]

MAX_ENUM_DIM = 16


class DecodingError(ValueError):
    """Raised when a syndrome lies outside the decodable set of a code."""


def as_bits(v) -> np.ndarray:
    """Coerce a sequence of 0/1 values (or a 0/1 string) to a uint8 array."""
    if isinstance(v, str):
        v = [int(c) for c in v]
    a = np.asarray(v, dtype=np.uint8)
    if a.size and a.max() > 1:
        raise ValueError("bit vector entries must be 0 or 1")
    return a


def mat_vec_mul(m, v) -> np.ndarray:
    """GF(2) product ``m @ v``.

    Raises
    ------
    ValueError
        If the number of columns of ``m`` differs from ``len(v)``.
    """
    m = np.atleast_2d(np.asarray(m, dtype=np.uint8))
    v = as_bits(v)
    if m.shape[1] != v.shape[-1]:
        raise ValueError(f"dimension mismatch: matrix has {m.shape[1]} columns, vector has {v.shape[-1]} entries")
    return ((m.astype(np.int64) @ v.astype(np.int64)) & 1).astype(np.uint8)


def rref(m) -> tuple[np.ndarray, list[int]]:
    """Reduced row echelon form over GF(2). Returns (matrix, pivot columns)."""
    a = np.array(m, dtype=np.uint8, copy=True) & 1
    a = np.atleast_2d(a)
    rows, cols = a.shape
    pivots = []
    r = 0
    for c in range(cols):
        if r == rows:
            break
        hits = np.nonzero(a[r:, c])[0]
        if hits.size == 0:
            continue
        p = r + hits[0]
        if p != r:
            a[[r, p]] = a[[p, r]]
        others = np.nonzero(a[:, c])[0]
        others = others[others != r]
        a[others] ^= a[r]
        pivots.append(c)
        r += 1
    return a[:r], pivots


def rank(m) -> int:
    return len(rref(m)[1])


def nullspace(m) -> np.ndarray:
    """Basis (as rows) of ``{x : m x = 0}`` over GF(2)."""
    m = np.atleast_2d(np.asarray(m, dtype=np.uint8))
    n = m.shape[1]
    red, pivots = rref(m)
    free = [c for c in range(n) if c not in pivots]
    basis = np.zeros((len(free), n), dtype=np.uint8)
    for i, f in enumerate(free):
        basis[i, f] = 1
        for row, p in enumerate(pivots):
            basis[i, p] = red[row, f]
    return basis


def in_span(rows, v) -> bool:
    """True iff ``v`` is a GF(2) combination of ``rows``."""
    rows = np.atleast_2d(np.asarray(rows, dtype=np.uint8))
    if rows.size == 0:
        return not as_bits(v).any()
    return rank(np.vstack([rows, as_bits(v)])) == rank(rows)


def _to_int(bits: np.ndarray) -> int:
    out = 0
    for b in bits:
        out = (out << 1) | int(b)
    return out


@dataclass(frozen=True, eq=False)
class LinearCode:
    """Binary linear ``[n, k]`` code with a syndrome lookup table.

    Build instances with :meth:`from_generator` or :meth:`from_parity_check`;
    the constructor trusts its arguments apart from the consistency checks in
    ``__post_init__``.

    Attributes
    ----------
    generator : np.ndarray
        ``k x n`` generator matrix with independent rows.
    parity_check : np.ndarray
        ``(n-k) x n`` parity check matrix with ``H G^T = 0``.
    t : int
        Number of errors the code is guaranteed to correct.
    """

    generator: np.ndarray
    parity_check: np.ndarray
    t: int = field(default=-1)
    _table: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        g = np.atleast_2d(np.asarray(self.generator, dtype=np.uint8))
        h = np.atleast_2d(np.asarray(self.parity_check, dtype=np.uint8))
        if g.shape[1] != h.shape[1]:
            raise ValueError("generator and parity check have different block lengths")
        if rank(g) != g.shape[0]:
            raise ValueError("generator rows are not independent")
        if h.shape[0] and rank(h) != g.shape[1] - g.shape[0]:
            raise ValueError("parity check rank does not equal n - k")
        if ((g.astype(np.int64) @ h.T.astype(np.int64)) & 1).any():
            raise ValueError("parity_check . generator^T is not zero")
        object.__setattr__(self, "generator", g)
        object.__setattr__(self, "parity_check", h)
        if self.t < 0:
            object.__setattr__(self, "t", (self.min_distance() - 1) // 2)
        object.__setattr__(self, "_table", self._build_table())

    @classmethod
    def from_generator(cls, generator, t: int = -1) -> "LinearCode":
        g = np.atleast_2d(np.asarray(generator, dtype=np.uint8))
        return cls(g, nullspace(g), t)

    @classmethod
    def from_parity_check(cls, parity_check, t: int = -1) -> "LinearCode":
        h = np.atleast_2d(np.asarray(parity_check, dtype=np.uint8))
        return cls(nullspace(h), h, t)

    @property
    def n(self) -> int:
        return self.generator.shape[1]

    @property
    def k(self) -> int:
        return self.generator.shape[0]

    def codewords(self) -> np.ndarray:
        """All ``2**k`` codewords, ordered by message integer."""
        if self.k > MAX_ENUM_DIM:
            raise ValueError(f"refusing to enumerate 2**{self.k} codewords")
        if self.k == 0:
            return np.zeros((1, self.n), dtype=np.uint8)
        msgs = np.array(list(itertools.product((0, 1), repeat=self.k)), dtype=np.int64).reshape(-1, self.k)
        return ((msgs @ self.generator.astype(np.int64)) & 1).astype(np.uint8)

    def encode(self, message) -> np.ndarray:
        return mat_vec_mul(self.generator.T, message)

    def contains(self, word) -> bool:
        return not self.syndrome(word).any()

    def syndrome(self, word) -> np.ndarray:
        return mat_vec_mul(self.parity_check, word) if self.parity_check.shape[0] else np.zeros(0, np.uint8)

    def min_distance(self) -> int:
        if self.k == 0:
            return self.n + 1
        w = self.codewords().sum(axis=1)
        return int(w[w > 0].min())

    def _build_table(self) -> dict[int, np.ndarray]:
        # coset leaders for every error of weight <= t; collisions mean t was overstated
        table: dict[int, np.ndarray] = {}
        for w in range(self.t + 1):
            for pos in itertools.combinations(range(self.n), w):
                e = np.zeros(self.n, dtype=np.uint8)
                e[list(pos)] = 1
                key = _to_int(self.syndrome(e))
                if key in table:
                    raise ValueError(f"t={self.t} is not achievable: two errors of weight <= t share a syndrome")
                table[key] = e
        return table

    def decode(self, word) -> np.ndarray:
        """Nearest codeword within distance ``t``; see :func:`syndrome_decode`."""
        word = as_bits(word)
        if word.shape != (self.n,):
            raise ValueError(f"word length {word.shape} does not match block length {self.n}")
        e = self._table.get(_to_int(self.syndrome(word)))
        if e is None:
            raise DecodingError("syndrome outside the decodable set")
        return word ^ e


def syndrome_decode(code: LinearCode, word) -> np.ndarray:
    """Correct ``word`` to the unique codeword within Hamming distance ``code.t``.

    Raises :class:`DecodingError` when the syndrome does not belong to any
    error of weight at most ``t``, rather than guessing.
    """
    return code.decode(word)


@dataclass(frozen=True, eq=False)
class CssPair:
    """Nested codes ``c2 ⊂ c1``; one block carries ``c1.k - c2.k`` key bits."""

    c1: LinearCode
    c2: LinearCode
    _reduced: np.ndarray = field(default=None, repr=False)
    _pivots: tuple = field(default=(), repr=False)
    _labels: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        if self.c1.n != self.c2.n:
            raise ValueError("c1 and c2 have different block lengths")
        if not verify_nested(self):
            raise ValueError("c2 is not contained in c1")
        if self.key_length < 1:
            raise ValueError("dim(c1) - dim(c2) must be at least 1")
        red, piv = rref(self.c2.generator) if self.c2.k else (np.zeros((0, self.n), np.uint8), [])
        object.__setattr__(self, "_reduced", red)
        object.__setattr__(self, "_pivots", tuple(piv))
        object.__setattr__(self, "_labels", self._build_labels())

    @property
    def n(self) -> int:
        return self.c1.n

    @property
    def key_length(self) -> int:
        return self.c1.k - self.c2.k

    def _canonical(self, u: np.ndarray) -> np.ndarray:
        # clear c2's pivot columns: one fixed representative per coset u + C2
        u = u.copy()
        for row, p in zip(self._reduced, self._pivots):
            if u[p]:
                u ^= row
        return u

    def _build_labels(self) -> dict[bytes, np.ndarray]:
        groups: dict[bytes, tuple] = {}
        for word in self.c1.codewords():
            key = self._canonical(word).tobytes()
            cand = tuple(int(b) for b in word)
            if key not in groups or cand < groups[key]:
                groups[key] = cand
        order = sorted(groups, key=groups.__getitem__)
        width = self.key_length
        return {
            key: np.array([(i >> (width - 1 - j)) & 1 for j in range(width)], dtype=np.uint8)
            for i, key in enumerate(order)
        }


def verify_nested(pair: CssPair) -> bool:
    """True iff every generator row of ``pair.c2`` has zero syndrome under ``pair.c1``."""
    if pair.c1.n != pair.c2.n:
        return False
    return all(pair.c1.contains(row) for row in pair.c2.generator)


def coset_label(pair: CssPair, u) -> np.ndarray:
    """Label of the coset ``u + C2``, of length ``dim C1 - dim C2``.

    Cosets are numbered in lexicographic order of their smallest member, so the
    coset ``C2`` itself is always labelled all-zeros.
    """
    u = as_bits(u)
    if u.shape != (pair.n,) or not pair.c1.contains(u):
        raise ValueError("u is not a codeword of c1")
    return pair._labels[pair._canonical(u).tobytes()].copy()


def one_way_reconcile(pair: CssPair, alice_bits, bob_bits, rng: np.random.Generator):
    """One block of coset-based reconciliation.

    Alice draws a uniform codeword ``u`` of ``c1`` and announces ``u ^ v``
    where ``v`` are her bits. Bob strips the announcement from his bits
    ``v ^ eps``, decodes ``u ^ eps`` to ``w`` and both output coset labels.

    Returns
    -------
    alice_key, bob_key, announcement : np.ndarray

    Raises
    ------
    DecodingError
        If Bob's syndrome is not decodable.
    """
    v = as_bits(alice_bits)
    y = as_bits(bob_bits)
    if v.shape != (pair.n,) or y.shape != (pair.n,):
        raise ValueError(f"both bit blocks must have length {pair.n}")
    u = pair.c1.encode(rng.integers(0, 2, size=pair.c1.k, dtype=np.uint8))
    announcement = u ^ v
    w = pair.c1.decode(announcement ^ y)
    return coset_label(pair, u), coset_label(pair, w), announcement


def hamming_7_4() -> LinearCode:
    """Hamming [7,4,3]; column ``i`` of the check matrix is ``i+1`` in binary."""
    h = np.array([[(c >> (2 - r)) & 1 for c in range(1, 8)] for r in range(3)], dtype=np.uint8)
    return LinearCode.from_parity_check(h)


def steane_pair() -> CssPair:
    """Hamming [7,4] with its dual [7,3] as the contained code."""
    c1 = hamming_7_4()
    return CssPair(c1, LinearCode.from_generator(c1.parity_check))


def parse_code(text: str) -> LinearCode:
    """Parse the plain-text matrix format.

    The first non-blank line is ``"n k"``, followed by ``k`` rows of ``n``
    characters from ``{0,1}`` (the generator). An optional line ``H`` starts a
    block of ``n - k`` parity-check rows; otherwise the check matrix is
    derived. Lines starting with ``#`` are ignored.
    """
    lines = [ln.strip() for ln in text.splitlines()]
    lines = [ln for ln in lines if ln and not ln.startswith("#")]
    if not lines:
        raise ValueError("empty code file")
    try:
        n, k = (int(x) for x in lines[0].split())
    except ValueError:
        raise ValueError(f"bad header line {lines[0]!r}, expected 'n k'") from None

    def rows(block):
        out = []
        for ln in block:
            if len(ln) != n or set(ln) - {"0", "1"}:
                raise ValueError(f"bad matrix row {ln!r}")
            out.append([int(c) for c in ln])
        return np.array(out, dtype=np.uint8).reshape(len(out), n)

    body = lines[1:]
    if "H" in body:
        i = body.index("H")
        g, h = rows(body[:i]), rows(body[i + 1:])
    else:
        g, h = rows(body), None
    if g.shape[0] != k:
        raise ValueError(f"header says k={k} but {g.shape[0]} generator rows given")
    if h is None:
        return LinearCode.from_generator(g)
    if h.shape[0] != n - k:
        raise ValueError(f"expected {n - k} parity-check rows, got {h.shape[0]}")
    return LinearCode(g, h)


def format_code(code: LinearCode, with_check: bool = True) -> str:
    out = [f"{code.n} {code.k}"]
    out += ["".join(map(str, row)) for row in code.generator]
    if with_check:
        out.append("H")
        out += ["".join(map(str, row)) for row in code.parity_check]
    return "\n".join(out) + "\n"


def load_code(path) -> LinearCode:
    return parse_code(Path(path).read_text())
