"""Per-qubit Pauli noise and prover strategies over the ``2k+1`` blocks."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from typing import Callable, Sequence, Union

import numpy as np

from .f2core import BitVec, PauliError

__all__ = [
    "NoiseModel",
    "AdversaryStrategy",
    "sample_block_error",
    "sample_prover_blocks",
    "load_table_csv",
    "canonical_bad_error",
    "BAD_KINDS",
]

IID_Z = "iid_z"
IID_DEPOLARIZING_XZ = "iid_depolarizing_xz"
PER_QUBIT_TABLE = "per_qubit_table"


@dataclass(frozen=True, eq=False)
class NoiseModel:
    """Independent per-qubit Pauli channel.

    ``iid_depolarizing_xz`` applies X, Z and XZ with probability ``p/3`` each.
    A ``per_qubit_table`` holds rows ``(pI, pX, pZ, pXZ)``, one per qubit.
    """

    kind: str
    p: float = 0.0
    table: np.ndarray | None = None

    def __post_init__(self):
        if self.kind in (IID_Z, IID_DEPOLARIZING_XZ):
            if not 0.0 <= self.p <= 1.0:
                raise ValueError(f"probability {self.p} outside [0, 1]")
        elif self.kind == PER_QUBIT_TABLE:
            t = np.asarray(self.table, dtype=float)
            if t.ndim != 2 or t.shape[1] != 4:
                raise ValueError("per-qubit table must have rows (pI, pX, pZ, pXZ)")
            if (t < 0).any() or (t > 1).any():
                raise ValueError("per-qubit probabilities must lie in [0, 1]")
            if not np.allclose(t.sum(axis=1), 1.0, atol=1e-9):
                raise ValueError("per-qubit distributions must sum to 1")
            object.__setattr__(self, "table", t)
        else:
            raise ValueError(f"unknown noise kind {self.kind!r}")

    @classmethod
    def iid_z(cls, p: float) -> NoiseModel:
        return cls(IID_Z, float(p))

    @classmethod
    def iid_depolarizing_xz(cls, p: float) -> NoiseModel:
        return cls(IID_DEPOLARIZING_XZ, float(p))

    @classmethod
    def per_qubit_table(cls, table) -> NoiseModel:
        return cls(PER_QUBIT_TABLE, 0.0, np.asarray(table, dtype=float))

    def to_dict(self) -> dict:
        if self.kind == PER_QUBIT_TABLE:
            return {"kind": self.kind, "table": self.table.tolist()}
        return {"kind": self.kind, "p": self.p}


def load_table_csv(path, n: int | None = None) -> NoiseModel:
    """Read ``qubit, pI, pX, pZ, pXZ`` rows (header optional) into a table model."""
    rows = {}
    with open(path, newline="") as fh:
        for rec in csv.reader(fh):
            if not rec or rec[0].strip().startswith("#"):
                continue
            try:
                q = int(rec[0])
            except ValueError:
                continue  # header
            if q in rows:
                raise ValueError(f"qubit {q} listed twice in {path}")
            rows[q] = [float(x) for x in rec[1:5]]
    size = n if n is not None else (max(rows) + 1 if rows else 0)
    if sorted(rows) != list(range(size)):
        raise ValueError(f"{path} must list every qubit 0..{size - 1} exactly once")
    return NoiseModel.per_qubit_table([rows[q] for q in range(size)])


def sample_block_error(model: NoiseModel, n: int, rng: np.random.Generator) -> PauliError:
    """One draw of the channel on ``n`` qubits.

    For the iid kinds the number of hit qubits is drawn first and their
    positions second, which is the same distribution as ``n`` Bernoulli draws.
    """
    if model.kind == PER_QUBIT_TABLE:
        if model.table.shape[0] != n:
            raise ValueError(f"table covers {model.table.shape[0]} qubits, block has {n}")
        cum = np.cumsum(model.table, axis=1)
        u = rng.random(n)
        outcome = (u[:, None] >= cum[:, :3]).sum(axis=1)  # 0 I, 1 X, 2 Z, 3 XZ
        x = np.flatnonzero((outcome == 1) | (outcome == 3))
        z = np.flatnonzero(outcome >= 2)
        return PauliError.from_indices(n, x, z)
    hits = int(rng.binomial(n, model.p))
    if hits == 0:
        return PauliError.identity(n)
    pos = rng.choice(n, size=hits, replace=False)
    if model.kind == IID_Z:
        return PauliError.from_indices(n, (), pos)
    kind = rng.integers(0, 3, size=hits)  # 0 X, 1 Z, 2 XZ
    return PauliError.from_indices(n, pos[kind != 1], pos[kind != 0])


BlockSource = Union[NoiseModel, PauliError]


@dataclass(frozen=True, eq=False)
class AdversaryStrategy:
    """How the prover prepares the ``2k+1`` blocks.

    ``honest``: every block from ``noise``.  ``single_bad_block``: zero error
    everywhere except ``bad_error`` at ``position``.  ``block_table``: one
    source per block, each a noise model or a fixed error.
    """

    kind: str
    noise: NoiseModel | None = None
    bad_error: PauliError | None = None
    position: int = 0
    table: tuple[BlockSource, ...] = field(default_factory=tuple)
    label: str = ""

    def __post_init__(self):
        if self.kind == "honest":
            if self.noise is None:
                raise ValueError("honest strategy needs a noise model")
        elif self.kind == "single_bad_block":
            if self.bad_error is None:
                raise ValueError("single_bad_block needs bad_error")
            if self.position < 0:
                raise ValueError("bad block position must be non-negative")
        elif self.kind == "block_table":
            if not self.table:
                raise ValueError("block_table needs one entry per block")
        else:
            raise ValueError(f"unknown strategy kind {self.kind!r}")

    @classmethod
    def honest(cls, noise: NoiseModel, label: str = "") -> AdversaryStrategy:
        return cls("honest", noise=noise, label=label or "honest")

    @classmethod
    def single_bad_block(cls, bad_error: PauliError, position: int = 0, label: str = "") -> AdversaryStrategy:
        return cls("single_bad_block", bad_error=bad_error, position=position, label=label or "single_bad_block")

    @classmethod
    def block_table(cls, table: Sequence[BlockSource], label: str = "") -> AdversaryStrategy:
        return cls("block_table", table=tuple(table), label=label or "block_table")

    def check_blocks(self, blocks: int) -> None:
        if self.kind == "single_bad_block" and self.position >= blocks:
            raise ValueError(f"bad block position {self.position} outside {blocks} blocks")
        if self.kind == "block_table" and len(self.table) != blocks:
            raise ValueError(f"block_table has {len(self.table)} entries for {blocks} blocks")


def _source_error(src: BlockSource, n: int, rng) -> PauliError:
    if isinstance(src, PauliError):
        if src.n != n:
            raise ValueError("fixed block error has the wrong length")
        return src
    return sample_block_error(src, n, rng)


def sample_prover_blocks(
    strategy: AdversaryStrategy,
    blocks: int,
    n: int,
    rng: np.random.Generator | Callable[[int], np.random.Generator],
) -> list[PauliError]:
    """Errors on each block, in the prover's order (before any shuffling).

    ``rng`` is either one generator shared across blocks or a function from
    block index to that block's own generator.
    """
    strategy.check_blocks(blocks)
    per_block = rng if callable(rng) else (lambda _b: rng)
    if strategy.kind == "honest":
        return [sample_block_error(strategy.noise, n, per_block(b)) for b in range(blocks)]
    if strategy.kind == "single_bad_block":
        if strategy.bad_error.n != n:
            raise ValueError("bad_error has the wrong length")
        ident = PauliError.identity(n)
        return [strategy.bad_error if b == strategy.position else ident for b in range(blocks)]
    return [_source_error(src, n, per_block(b)) for b, src in enumerate(strategy.table)]


BAD_KINDS = ("fail_both", "fail_B", "fail_W")


def canonical_bad_error(lat, kind: str = "fail_both") -> PauliError:
    """Z errors along shortest logical chains: primal for ``fail_B``, dual for ``fail_W``."""
    from .lattice import shortest_logical_chain

    if kind not in BAD_KINDS:
        raise ValueError(f"unknown bad error kind {kind!r}; expected one of {BAD_KINDS}")
    z = []
    if kind in ("fail_both", "fail_B"):
        z.extend(int(e) for e in shortest_logical_chain(lat, "B"))
    if kind in ("fail_both", "fail_W"):
        z.extend(lat.n_B + int(e) for e in shortest_logical_chain(lat, "W"))
    return PauliError(BitVec.zeros(lat.n), BitVec.from_indices(lat.n, z))
