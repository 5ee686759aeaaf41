"""Closed-form bounds evaluated in extended precision.

Probabilities are clamped to ``[0, 1]``; every clamp sets ``saturated`` on
the returned :class:`BoundReport` rather than happening silently.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from typing import Sequence

import mpmath

__all__ = [
    "BoundDomainError",
    "BoundReport",
    "SAWTable",
    "TableCoverageError",
    "enumerate_saw",
    "p0_fault",
    "rm_acceptance_bound",
    "rm_fault_recursion",
    "sf_rejection_bound",
    "theorem1_bound",
    "trace_distance_bound",
    "union_bound",
    "RM_FACTOR",
]

mpmath.mp.dps = 50

RM_FACTOR = 105**2  # pairs of faulty children among 15, squared bookkeeping constant


class BoundDomainError(ValueError):
    pass


class TableCoverageError(ValueError):
    pass


@dataclass
class BoundReport:
    name: str
    value: float
    raw: mpmath.mpf
    inputs: dict
    saturated: bool = False
    flags: dict = field(default_factory=dict)
    extras: dict = field(default_factory=dict)

    def __float__(self) -> float:
        return self.value

    def row(self) -> dict:
        out = {"bound": self.name, **self.inputs, "value": self.value, "saturated": self.saturated}
        out.update(self.flags)
        return out


def _clamp(name: str, raw, inputs: dict, **kw) -> BoundReport:
    raw = mpmath.mpf(raw)
    sat = False
    if raw < 0:
        val, sat = mpmath.mpf(0), True
    elif raw > 1:
        val, sat = mpmath.mpf(1), True
    else:
        val = raw
    return BoundReport(name, float(val), raw, inputs, sat, **kw)


def theorem1_bound(alpha: float, k: int) -> float:
    """``1 - 1/(alpha (2k+1))``, the guaranteed mass of correctable outcomes after acceptance.

    At ``alpha = 1/(2k+1)`` the bound is exactly 0; below it the statement is empty.
    """
    if k < 0 or not 0 < alpha <= 1:
        raise BoundDomainError("need k >= 0 and alpha in (0, 1]")
    prod = mpmath.mpf(alpha) * (2 * k + 1)
    if prod < 1 and not mpmath.almosteq(prod, 1, rel_eps=mpmath.mpf(2) ** -50):
        raise BoundDomainError(f"alpha = {alpha} is below 1/(2k+1) = {1 / (2 * k + 1)}; the bound is vacuous")
    return float(max(mpmath.mpf(0), 1 - 1 / prod))


def trace_distance_bound(alpha: float, k: int) -> float:
    if k < 0 or not 0 < alpha <= 1:
        raise BoundDomainError("need k >= 0 and alpha in (0, 1]")
    return float(1 / mpmath.sqrt(mpmath.mpf(alpha) * (2 * k + 1)))


@dataclass(frozen=True)
class SAWTable:
    """Chain counts ``C_nu`` for ``nu = 1..nu_max`` (index 0 unused)."""

    counts: tuple
    source: str = "user_table"

    def __post_init__(self):
        if any(c < 0 for c in self.counts):
            raise ValueError("chain counts must be non-negative")

    @property
    def nu_max(self) -> int:
        return len(self.counts)

    def __getitem__(self, nu: int):
        if not 1 <= nu <= self.nu_max:
            raise TableCoverageError(f"no chain count for length {nu} (table covers 1..{self.nu_max})")
        return self.counts[nu - 1]

    @classmethod
    def upper_bound_6x5(cls, nu_max: int, sites: int = 1) -> SAWTable:
        """``sites * 6 * 5^(nu-1)``: every non-reversing walk from every site."""
        return cls(tuple(mpmath.mpf(sites) * 6 * mpmath.mpf(5) ** (nu - 1) for nu in range(1, nu_max + 1)),
                   "upper_bound_6x5")

    @classmethod
    def from_counts(cls, counts: Sequence) -> SAWTable:
        return cls(tuple(mpmath.mpf(c) for c in counts), "user_table")

    @classmethod
    def from_csv(cls, path) -> SAWTable:
        """Rows ``nu, C_nu`` with ``nu`` running 1, 2, ... without gaps; a header line is allowed."""
        rows = {}
        with open(path, newline="") as fh:
            for rec in csv.reader(fh):
                if not rec or rec[0].strip().startswith("#"):
                    continue
                try:
                    nu = int(rec[0])
                except ValueError:
                    continue
                rows[nu] = mpmath.mpf(rec[1].strip())
        if sorted(rows) != list(range(1, len(rows) + 1)):
            raise TableCoverageError(f"{path} must list lengths 1..N without gaps")
        return cls(tuple(rows[nu] for nu in range(1, len(rows) + 1)), "user_table")


def _chain_term(p, n: int, nu: int):
    """``sum_{mu >= ceil(nu/2)}^{nu} binom(nu, mu) p^mu (1-p)^(n-mu)``."""
    p = mpmath.mpf(p)
    if p == 0:
        return mpmath.mpf(0)
    q = 1 - p
    total = mpmath.mpf(0)
    for mu in range((nu + 1) // 2, nu + 1):
        total += mpmath.binomial(nu, mu) * p**mu * q ** (n - mu)
    return total


def sf_rejection_bound(n: int, p: float, d: int, nu_max: int | None = None) -> BoundReport:
    """Upper bound on the probability of a residual chain of length ``d`` or more.

    ``value`` is the explicit double sum truncated at ``nu_max`` plus the
    geometric tail; ``extras['closed_form']`` is ``n (6/5) x^d / (1 - x)``
    with ``x = 10 sqrt(p)``.  Both are infinite when ``x >= 1``.
    """
    if not 0 <= p <= 1:
        raise BoundDomainError("p must lie in [0, 1]")
    if d < 1:
        raise BoundDomainError("d must be at least 1")
    if nu_max is None:
        nu_max = d + 60
    if nu_max < d:
        raise BoundDomainError("nu_max must be at least d")
    inputs = {"n": n, "p": p, "d": d, "nu_max": nu_max}
    pm = mpmath.mpf(p)
    x = 10 * mpmath.sqrt(pm)
    diverges = x >= 1
    if pm == 0:
        return _clamp("sf_rejection", 0, inputs, flags={"diverges": False},
                      extras={"closed_form": mpmath.mpf(0), "explicit": mpmath.mpf(0), "tail": mpmath.mpf(0)})
    pref = mpmath.mpf(n) * mpmath.mpf(6) / 5
    explicit = mpmath.mpf(0)
    for nu in range(d, nu_max + 1):
        explicit += pref * mpmath.mpf(5) ** nu * _chain_term(pm, n, nu)
    if diverges:
        tail = closed = mpmath.inf
    else:
        tail = pref * x ** (nu_max + 1) / (1 - x)
        closed = pref * x**d / (1 - x)
    return _clamp(
        "sf_rejection", explicit + tail, inputs,
        flags={"diverges": bool(diverges)},
        extras={"closed_form": closed, "explicit": explicit, "tail": tail},
    )


def p0_fault(p: float, d: int, table: SAWTable, n: int) -> BoundReport:
    """``sum_{nu=1}^{d} C_nu sum_{mu=ceil(nu/2)}^{nu} binom(nu, mu) p^mu (1-p)^(n-mu)``."""
    if not 0 <= p <= 1:
        raise BoundDomainError("p must lie in [0, 1]")
    if d < 1:
        raise BoundDomainError("d must be at least 1")
    if table.nu_max < d:
        raise TableCoverageError(f"table covers lengths up to {table.nu_max}, need {d}")
    total = mpmath.mpf(0)
    for nu in range(1, d + 1):
        total += mpmath.mpf(table[nu]) * _chain_term(p, n, nu)
    return _clamp("p0_fault", total, {"p": p, "d": d, "n": n, "table": table.source})


def rm_fault_recursion(p0: float, l: int) -> BoundReport:
    """``(105^2 p0)^(2^l) / 105^2`` with the level-by-level sequence in ``extras['steps']``."""
    if not 0 <= p0 <= 1:
        raise BoundDomainError("p0 must lie in [0, 1]")
    if l < 0:
        raise BoundDomainError("l must be non-negative")
    c = mpmath.mpf(RM_FACTOR)
    pm = mpmath.mpf(p0)
    closed = (c * pm) ** (2**l) / c
    steps = [pm]
    for _ in range(l):
        steps.append(c * steps[-1] ** 2)
    return _clamp("rm_fault", closed, {"p0": p0, "l": l}, extras={"steps": steps},
                  flags={"grows": bool(c * pm > 1)})


def rm_acceptance_bound(p0: float, l: int, m: int) -> BoundReport:
    if m < 0:
        raise BoundDomainError("m must be non-negative")
    pl = rm_fault_recursion(p0, l)
    val = (1 - mpmath.mpf(pl.value)) ** m
    rep = _clamp("rm_acceptance", val, {"p0": p0, "l": l, "m": m})
    rep.saturated = rep.saturated or pl.saturated
    return rep


def union_bound(P_sf: float, P_rm: float) -> BoundReport:
    for v in (P_sf, P_rm):
        if not 0 <= v <= 1:
            raise BoundDomainError("probabilities must lie in [0, 1]")
    return _clamp("union", mpmath.mpf(P_sf) + mpmath.mpf(P_rm) - 1, {"P_sf": P_sf, "P_rm": P_rm})


def enumerate_saw(nu_max: int) -> list[int]:
    """Number of self-avoiding walks of each length 1..nu_max from the origin of the cubic lattice."""
    if not 1 <= nu_max <= 10:
        raise ValueError("enumeration is meant for short walks (1..10 steps)")
    steps = ((1, 0, 0), (-1, 0, 0), (0, 1, 0), (0, -1, 0), (0, 0, 1), (0, 0, -1))
    counts = [0] * (nu_max + 1)
    visited = {(0, 0, 0)}

    def walk(pos, depth):
        counts[depth] += 1
        if depth == nu_max:
            return
        x, y, z = pos
        for dx, dy, dz in steps:
            nxt = (x + dx, y + dy, z + dz)
            if nxt not in visited:
                visited.add(nxt)
                walk(nxt, depth + 1)
                visited.remove(nxt)

    walk((0, 0, 0), 0)
    return counts[1:]
