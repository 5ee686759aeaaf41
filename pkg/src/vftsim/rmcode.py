"""Recursive 15-to-1 fault labelling of the singular (non-Clifford) measurements.

Each of ``m`` logical measurements is a tree of depth ``l`` with fan-out 15.
A node above the leaves is faulty when two or more of its children are.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .decode import ResidualAnalysis
from .f2core import BitVec
from .lattice import ClusterLattice

__all__ = ["FANOUT", "RMCodeSpec", "FaultTree", "RmVerdict", "level0_faults", "label_tree", "in_Srm"]

FANOUT = 15
MAX_LEVEL = 2


@dataclass(frozen=True)
class RMCodeSpec:
    l: int = 0
    m: int = 1

    def __post_init__(self):
        if not 0 <= self.l <= MAX_LEVEL:
            raise ValueError(f"concatenation level must be 0..{MAX_LEVEL}, got {self.l}")
        if self.m < 1:
            raise ValueError("need at least one logical measurement")

    @property
    def leaves_per_tree(self) -> int:
        return FANOUT**self.l

    @property
    def n_sites(self) -> int:
        return self.leaves_per_tree * self.m

    def assignment(self, lat: ClusterLattice) -> np.ndarray:
        """``(m, 15^l)`` singular-site indices; leaves follow sorted site coordinates."""
        if len(lat.singular) != self.n_sites:
            raise ValueError(
                f"lattice has {len(lat.singular)} singular sites, spec needs 15^{self.l}*{self.m} = {self.n_sites}"
            )
        order = sorted(range(len(lat.singular)), key=lambda i: lat.singular[i].coord)
        return np.array(order, dtype=np.int64).reshape(self.m, self.leaves_per_tree)


@dataclass(frozen=True)
class FaultTree:
    levels: tuple[np.ndarray, ...]  # levels[0] leaves ... levels[-1] the single top node

    @property
    def l(self) -> int:
        return len(self.levels) - 1

    @property
    def top(self) -> bool:
        return bool(self.levels[-1][0])

    def to_dict(self) -> dict:
        return {"levels": [[int(b) for b in lv] for lv in self.levels], "top": self.top}

    def to_json(self) -> str:
        return json.dumps(self.to_dict())


def _as_bools(bits) -> np.ndarray:
    if isinstance(bits, BitVec):
        return bits.to_bools()
    return np.asarray(bits, dtype=bool)


def label_tree(leaf_faults) -> FaultTree:
    leaves = _as_bools(leaf_faults)
    n = leaves.size
    l = 0
    while FANOUT**l < n:
        l += 1
    if FANOUT**l != n:
        raise ValueError(f"{n} leaves is not a power of 15")
    levels = [leaves.copy()]
    cur = leaves
    for _ in range(l):
        cur = cur.reshape(-1, FANOUT).sum(axis=1) >= 2
        levels.append(cur)
    return FaultTree(tuple(levels))


def _site_fault(site, residuals) -> bool:
    for res in residuals:
        if res is None or not res.components:
            continue
        region = site.region[res.color]
        cut = site.local_membrane[res.color]
        for comp in res.components:
            if np.intersect1d(comp, region, assume_unique=True).size == 0:
                continue
            if np.intersect1d(comp, cut, assume_unique=True).size & 1:
                return True
    return False


def level0_faults(
    lat: ClusterLattice,
    residual_B: ResidualAnalysis | None,
    residual_W: ResidualAnalysis | None,
    spec: RMCodeSpec,
) -> BitVec:
    """Leaf fault bits in tree-major order.

    A leaf is faulty when a residual component reaches its site's correction
    region and crosses the site's local cut an odd number of times.
    """
    assign = spec.assignment(lat)
    residuals = (residual_B, residual_W)
    out = np.zeros(spec.n_sites, dtype=bool)
    if not any(r is not None and r.components for r in residuals):
        return BitVec.from_bools(out)
    for pos, site_idx in enumerate(assign.reshape(-1)):
        out[pos] = _site_fault(lat.singular[site_idx], residuals)
    return BitVec.from_bools(out)


@dataclass(frozen=True)
class RmVerdict:
    member: bool
    tree: int | None
    trees: tuple[FaultTree, ...]

    def __bool__(self) -> bool:
        return self.member


def in_Srm(
    lat: ClusterLattice,
    residual_B: ResidualAnalysis | None,
    residual_W: ResidualAnalysis | None,
    spec: RMCodeSpec,
) -> RmVerdict:
    """Member iff no tree's top node is faulty; otherwise report the first faulty tree."""
    leaves = level0_faults(lat, residual_B, residual_W, spec).to_bools()
    per_tree = leaves.reshape(spec.m, spec.leaves_per_tree)
    trees = tuple(label_tree(row) for row in per_tree)
    for i, t in enumerate(trees):
        if t.top:
            return RmVerdict(False, i, trees)
    return RmVerdict(True, None, trees)
