"""Bit-packed F2 linear algebra, bipartite graph states and Pauli-frame test outcomes.

Bits are packed least-significant-bit first into little-endian 64-bit words,
so bit ``i`` of a :class:`BitVec` lives in word ``i // 64`` at position
``i % 64``.  Qubits of a :class:`GraphState` are ordered black first, then
white: qubit ``b`` is black for ``b < n_B`` and qubit ``n_B + w`` is white.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache
from typing import Iterable, Sequence

import numpy as np

__all__ = [
    "BitVec",
    "BinaryMatrix",
    "GraphState",
    "PauliError",
    "MeasurementRecord",
    "deviation_B",
    "deviation_W",
    "sample_test_outcomes",
    "test_statistic",
    "check_stabilizer_identities",
    "T_B",
    "T_W",
]

T_B = "T_B"
T_W = "T_W"

_WORD = np.dtype("<u8")


def _nwords(n: int) -> int:
    return (n + 63) // 64


def _pack(bits: np.ndarray) -> np.ndarray:
    """Pack a 1-D boolean array into little-endian uint64 words."""
    n = bits.shape[0]
    raw = np.packbits(bits.astype(bool, copy=False), bitorder="little")
    buf = np.zeros(_nwords(n) * 8, dtype=np.uint8)
    buf[: raw.shape[0]] = raw
    return buf.view(_WORD)


def _unpack(words: np.ndarray, n: int) -> np.ndarray:
    return np.unpackbits(words.view(np.uint8), bitorder="little", count=n).astype(bool)


class BitVec:
    """Immutable length-``n`` vector over F2."""

    __slots__ = ("length", "data", "_hash")

    def __init__(self, length: int, data: np.ndarray | None = None):
        if length < 0:
            raise ValueError("negative length")
        if data is None:
            data = np.zeros(_nwords(length), dtype=_WORD)
        else:
            data = np.asarray(data, dtype=_WORD)
            if data.shape != (_nwords(length),):
                raise ValueError(f"expected {_nwords(length)} words, got {data.shape}")
            tail = length % 64
            if tail and int(data[-1]) >> tail:
                raise ValueError("bits set beyond length")
        data.setflags(write=False)
        self.length = length
        self.data = data
        self._hash = None

    # construction -----------------------------------------------------------
    @classmethod
    def zeros(cls, n: int) -> BitVec:
        return cls(n)

    @classmethod
    def ones(cls, n: int) -> BitVec:
        return cls.from_bools(np.ones(n, dtype=bool))

    @classmethod
    def from_bools(cls, bits) -> BitVec:
        bits = np.asarray(bits, dtype=bool).ravel()
        return cls(bits.shape[0], _pack(bits))

    @classmethod
    def from_indices(cls, n: int, indices: Iterable[int]) -> BitVec:
        bits = np.zeros(n, dtype=bool)
        idx = np.fromiter(indices, dtype=np.int64)
        if idx.size and (idx.min() < 0 or idx.max() >= n):
            raise IndexError("bit index out of range")
        # repeated indices toggle, matching F2 addition
        np.logical_xor.at(bits, idx, True)
        return cls.from_bools(bits)

    @classmethod
    def random(cls, n: int, rng: np.random.Generator) -> BitVec:
        return cls.from_bools(rng.integers(0, 2, size=n, dtype=np.uint8).astype(bool))

    @classmethod
    def concat(cls, parts: Sequence[BitVec]) -> BitVec:
        return cls.from_bools(np.concatenate([p.to_bools() for p in parts]))

    # access -----------------------------------------------------------------
    def to_bools(self) -> np.ndarray:
        return _unpack(self.data, self.length)

    def indices(self) -> np.ndarray:
        return np.flatnonzero(self.to_bools())

    def weight(self) -> int:
        return int(np.bitwise_count(self.data).sum())

    def any(self) -> bool:
        return bool(self.data.any())

    def slice(self, start: int, stop: int) -> BitVec:
        if not 0 <= start <= stop <= self.length:
            raise IndexError("slice out of range")
        return BitVec.from_bools(self.to_bools()[start:stop])

    def __getitem__(self, i: int) -> int:
        if not 0 <= i < self.length:
            raise IndexError(i)
        return (int(self.data[i >> 6]) >> (i & 63)) & 1

    def __len__(self) -> int:
        return self.length

    # algebra ----------------------------------------------------------------
    def _check(self, other: BitVec) -> None:
        if not isinstance(other, BitVec):
            raise TypeError(f"expected BitVec, got {type(other).__name__}")
        if other.length != self.length:
            raise ValueError(f"length mismatch: {self.length} vs {other.length}")

    def __xor__(self, other: BitVec) -> BitVec:
        self._check(other)
        return BitVec(self.length, self.data ^ other.data)

    def __and__(self, other: BitVec) -> BitVec:
        self._check(other)
        return BitVec(self.length, self.data & other.data)

    def dot(self, other: BitVec) -> int:
        self._check(other)
        return int(np.bitwise_count(self.data & other.data).sum()) & 1

    def __eq__(self, other) -> bool:
        if not isinstance(other, BitVec):
            return NotImplemented
        return self.length == other.length and bool(np.array_equal(self.data, other.data))

    def __hash__(self) -> int:
        if self._hash is None:
            self._hash = hash((self.length, self.data.tobytes()))
        return self._hash

    def key(self) -> bytes:
        """Compact hashable key (used for memoising membership decisions)."""
        return self.data.tobytes()

    # serialisation ----------------------------------------------------------
    def to_hex(self) -> str:
        """``"<length>:<hex>"`` with bytes in little-endian order."""
        nbytes = (self.length + 7) // 8
        return f"{self.length}:{self.data.view(np.uint8)[:nbytes].tobytes().hex()}"

    @classmethod
    def from_hex(cls, text: str) -> BitVec:
        length_s, _, hexpart = text.partition(":")
        length = int(length_s)
        raw = bytes.fromhex(hexpart)
        if len(raw) != (length + 7) // 8:
            raise ValueError("hex payload does not match declared length")
        buf = np.zeros(_nwords(length) * 8, dtype=np.uint8)
        buf[: len(raw)] = np.frombuffer(raw, dtype=np.uint8)
        return cls(length, buf.view(_WORD).copy())

    def __repr__(self) -> str:
        if self.length <= 64:
            s = "".join("1" if b else "0" for b in self.to_bools())
            return f"BitVec({s!r})"
        return f"BitVec(length={self.length}, weight={self.weight()})"


class BinaryMatrix:
    """Dense F2 matrix with row-major bit-packed rows."""

    __slots__ = ("rows", "cols", "data")

    def __init__(self, rows: int, cols: int, data: np.ndarray | None = None):
        if data is None:
            data = np.zeros((rows, _nwords(cols)), dtype=_WORD)
        data = np.asarray(data, dtype=_WORD)
        if data.shape != (rows, _nwords(cols)):
            raise ValueError("packed data has wrong shape")
        data.setflags(write=False)
        self.rows = rows
        self.cols = cols
        self.data = data

    @classmethod
    def from_dense(cls, dense) -> BinaryMatrix:
        dense = np.asarray(dense, dtype=bool)
        if dense.ndim != 2:
            raise ValueError("expected a 2-D array")
        rows, cols = dense.shape
        nbytes = _nwords(cols) * 8
        raw = np.packbits(dense, axis=1, bitorder="little")
        buf = np.zeros((rows, nbytes), dtype=np.uint8)
        buf[:, : raw.shape[1]] = raw
        return cls(rows, cols, buf.view(_WORD))

    @classmethod
    def from_entries(cls, rows: int, cols: int, entries: Iterable[tuple[int, int]]) -> BinaryMatrix:
        dense = np.zeros((rows, cols), dtype=bool)
        for r, c in entries:
            dense[r, c] ^= True
        return cls.from_dense(dense)

    def to_dense(self) -> np.ndarray:
        if self.rows == 0:
            return np.zeros((0, self.cols), dtype=bool)
        return np.unpackbits(
            self.data.view(np.uint8), axis=1, bitorder="little", count=self.cols
        ).astype(bool)

    @property
    def shape(self) -> tuple[int, int]:
        return (self.rows, self.cols)

    def transpose(self) -> BinaryMatrix:
        return BinaryMatrix.from_dense(self.to_dense().T)

    @property
    def T(self) -> BinaryMatrix:
        return self.transpose()

    def matvec(self, v: BitVec) -> BitVec:
        if v.length != self.cols:
            raise ValueError(f"matrix has {self.cols} columns, vector has length {v.length}")
        if self.rows == 0:
            return BitVec(0)
        if not v.data.any():
            return BitVec(self.rows)
        parity = np.bitwise_count(self.data & v.data[None, :]).sum(axis=1) & 1
        return BitVec.from_bools(parity.astype(bool))

    def __matmul__(self, v: BitVec) -> BitVec:
        return self.matvec(v)

    def nonzero(self) -> list[tuple[int, int]]:
        r, c = np.nonzero(self.to_dense())
        return list(zip(r.tolist(), c.tolist()))

    def __eq__(self, other) -> bool:
        if not isinstance(other, BinaryMatrix):
            return NotImplemented
        return self.shape == other.shape and bool(np.array_equal(self.data, other.data))

    def __repr__(self) -> str:
        return f"BinaryMatrix({self.rows}x{self.cols})"


@dataclass(frozen=True, eq=False)
class GraphState:
    """Two-colourable graph state.

    ``A`` has one row per white qubit and one column per black qubit, so the
    black-stabiliser relation reads ``X_B^z Z_W^{A z}``.  No validation is done
    here; :func:`check_stabilizer_identities` reports inconsistent instances.
    """

    n_B: int
    n_W: int
    A: BinaryMatrix
    edges: tuple[tuple[int, int], ...]
    _AT: BinaryMatrix | None = field(default=None, repr=False)

    @classmethod
    def from_edges(cls, n_B: int, n_W: int, edges: Iterable[tuple[int, int]]) -> GraphState:
        edges = tuple(sorted({(int(b), int(w)) for b, w in edges}))
        A = BinaryMatrix.from_entries(n_W, n_B, ((w, b) for b, w in edges))
        return cls(n_B, n_W, A, edges, A.transpose())

    @property
    def n(self) -> int:
        return self.n_B + self.n_W

    @property
    def AT(self) -> BinaryMatrix:
        if self._AT is None:
            object.__setattr__(self, "_AT", self.A.transpose())
        return self._AT

    @property
    def color(self) -> np.ndarray:
        return np.array(["B"] * self.n_B + ["W"] * self.n_W)

    def qubit_edges(self) -> list[tuple[int, int]]:
        """Edges as pairs of global qubit indices."""
        return [(b, self.n_B + w) for b, w in self.edges]

    # text format: "n_B n_W" header then one "b w" edge per line --------------
    def to_text(self) -> str:
        lines = [f"{self.n_B} {self.n_W}"]
        lines.extend(f"{b} {w}" for b, w in self.edges)
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> GraphState:
        rows = [ln.split() for ln in text.splitlines() if ln.strip() and not ln.startswith("#")]
        if not rows or len(rows[0]) != 2:
            raise ValueError("missing 'n_B n_W' header")
        n_B, n_W = int(rows[0][0]), int(rows[0][1])
        edges = []
        for r in rows[1:]:
            if len(r) != 2:
                raise ValueError(f"bad edge line: {' '.join(r)}")
            b, w = int(r[0]), int(r[1])
            if not (0 <= b < n_B and 0 <= w < n_W):
                raise ValueError(f"edge ({b}, {w}) out of range")
            edges.append((b, w))
        return cls.from_edges(n_B, n_W, edges)


def check_stabilizer_identities(g: GraphState) -> bool:
    """Shape contracts and the edge-list <-> adjacency bijection."""
    if g.n_B < 0 or g.n_W < 0:
        return False
    if g.A.shape != (g.n_W, g.n_B):
        return False
    if len(set(g.edges)) != len(g.edges):
        return False
    for b, w in g.edges:
        if not (0 <= b < g.n_B and 0 <= w < g.n_W):
            return False
    dense = g.A.to_dense()
    if int(dense.sum()) != len(g.edges):
        return False
    if g.edges:
        b, w = np.array(g.edges).T
        if not dense[w, b].all():
            return False
    if g._AT is not None and not np.array_equal(g._AT.to_dense(), dense.T):
        return False
    return True


@dataclass(frozen=True)
class PauliError:
    """Pauli-frame error ``X^xpart Z^zpart`` on all ``n`` qubits of a block."""

    xpart: BitVec
    zpart: BitVec

    def __post_init__(self):
        if self.xpart.length != self.zpart.length:
            raise ValueError("xpart and zpart lengths differ")

    @classmethod
    def identity(cls, n: int) -> PauliError:
        z = BitVec.zeros(n)
        return cls(z, z)

    @classmethod
    def from_indices(cls, n: int, x: Iterable[int] = (), z: Iterable[int] = ()) -> PauliError:
        return cls(BitVec.from_indices(n, x), BitVec.from_indices(n, z))

    @property
    def n(self) -> int:
        return self.xpart.length

    def compose(self, other: PauliError) -> PauliError:
        return PauliError(self.xpart ^ other.xpart, self.zpart ^ other.zpart)

    __mul__ = compose

    def is_identity(self) -> bool:
        return not (self.xpart.any() or self.zpart.any())

    def weight(self) -> int:
        return BitVec(self.n, self.xpart.data | self.zpart.data).weight()


@dataclass(frozen=True)
class MeasurementRecord:
    """Single-qubit measurement bases and outcomes of one block.

    ``basis[i]`` is ``"X"``, ``"Z"``, ``"XY"`` or ``None`` (unmeasured);
    outcome bits of unmeasured qubits must be zero.
    """

    basis: tuple
    outcome: BitVec

    def __post_init__(self):
        if len(self.basis) != self.outcome.length:
            raise ValueError("basis and outcome lengths differ")
        for b in set(self.basis):
            if b not in ("X", "Z", "XY", None):
                raise ValueError(f"unknown basis label {b!r}")
        if None in self.basis:
            unmeasured = np.array([b is None for b in self.basis])
            if (self.outcome.to_bools() & unmeasured).any():
                raise ValueError("outcome bit recorded for an unmeasured qubit")


def _check_error(error: PauliError, g: GraphState) -> None:
    if error.n != g.n:
        raise ValueError(f"error acts on {error.n} qubits, graph has {g.n}")


def _halves(v: BitVec, n_B: int) -> tuple[np.ndarray, np.ndarray]:
    bits = v.to_bools()
    return bits[:n_B], bits[n_B:]


def _mv(m: BinaryMatrix, bits: np.ndarray) -> np.ndarray:
    """``m @ bits`` on unpacked booleans, packing only the input."""
    if not bits.any():
        return np.zeros(m.rows, dtype=bool)
    return (np.bitwise_count(m.data & _pack(bits)[None, :]).sum(axis=1) & 1).astype(bool)


def deviation_B(error: PauliError, g: GraphState) -> BitVec:
    """``z_B + A^T x_W``: the value of ``X_B + A^T Z_W`` produced by ``error``."""
    _check_error(error, g)
    if error.is_identity():
        return BitVec(g.n_B)
    zB, _ = _halves(error.zpart, g.n_B)
    _, xW = _halves(error.xpart, g.n_B)
    return BitVec.from_bools(zB ^ _mv(g.AT, xW))


def deviation_W(error: PauliError, g: GraphState) -> BitVec:
    """``z_W + A x_B``: the value of ``X_W + A Z_B`` produced by ``error``."""
    _check_error(error, g)
    if error.is_identity():
        return BitVec(g.n_W)
    _, zW = _halves(error.zpart, g.n_B)
    xB, _ = _halves(error.xpart, g.n_B)
    return BitVec.from_bools(zW ^ _mv(g.A, xB))


@lru_cache(maxsize=16)
def _basis(n_B: int, n_W: int, which: str) -> tuple:
    if which == T_B:
        return ("X",) * n_B + ("Z",) * n_W
    return ("Z",) * n_B + ("X",) * n_W


def sample_test_outcomes(
    error: PauliError, g: GraphState, which: str, rng: np.random.Generator
) -> MeasurementRecord:
    """Sample the outcomes of test ``which`` on a block carrying ``error``.

    The Z-measured colour gets uniformly random outcomes (flipped by the
    X-part of the error there); the X-measured colour is then fixed by the
    stabiliser relation up to the deviation.
    """
    _check_error(error, g)
    xB_e, xW_e = _halves(error.xpart, g.n_B)
    zB_e, zW_e = _halves(error.zpart, g.n_B)
    if which == T_B:
        zW = rng.integers(0, 2, size=g.n_W, dtype=np.uint8).astype(bool) ^ xW_e
        dev = zB_e ^ _mv(g.AT, xW_e)
        xB = _mv(g.AT, zW) ^ dev
        bits = np.concatenate([xB, zW])
    elif which == T_W:
        zB = rng.integers(0, 2, size=g.n_B, dtype=np.uint8).astype(bool) ^ xB_e
        dev = zW_e ^ _mv(g.A, xB_e)
        xW = _mv(g.A, zB) ^ dev
        bits = np.concatenate([zB, xW])
    else:
        raise ValueError(f"unknown test {which!r}")
    return MeasurementRecord(_basis(g.n_B, g.n_W, which), BitVec.from_bools(bits))


def test_statistic(record: MeasurementRecord, g: GraphState, which: str) -> BitVec:
    """Recompute ``X_B + A^T Z_W`` (or ``X_W + A Z_B``) from a measurement record."""
    first, second = _halves(record.outcome, g.n_B)
    if which == T_B:
        return BitVec.from_bools(first ^ _mv(g.AT, second))
    if which == T_W:
        return BitVec.from_bools(second ^ _mv(g.A, first))
    raise ValueError(f"unknown test {which!r}")


# keep pytest from collecting the helper above when imported into test modules
test_statistic.__test__ = False
