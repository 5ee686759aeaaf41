"""One round of the verification protocol, and Monte Carlo estimators over many rounds.

A round: the prover hands over ``2k+1`` blocks; a uniform permutation sends
``k`` blocks to the black test, ``k`` to the white test and one to the
computation.  The verifier accepts iff every test block's statistic lies in
the correctable set of its colour.  The compute block's membership in
``S = S_B x S_W`` is recorded whatever the verdict.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, fields
from functools import lru_cache

import numpy as np

from . import rng as rngmod
from .decode import in_Ssf
from .f2core import T_B, T_W, BitVec, PauliError, deviation_B, deviation_W, sample_test_outcomes, test_statistic
from .lattice import ClusterLattice, LatticeSpec, build
from .noise import AdversaryStrategy, sample_prover_blocks
from .rmcode import RMCodeSpec, in_Srm

__all__ = [
    "ProtocolConfig",
    "Transcript",
    "TrialCounters",
    "Evaluator",
    "ColorVerdict",
    "run_trial",
    "run_trials",
    "estimate_acceptance",
    "estimate_detection_operating_point",
    "AcceptanceEstimate",
    "DetectionRow",
    "lattice_for",
]


class IntegrityError(AssertionError):
    """Recomputed data disagrees with what was sampled."""


@lru_cache(maxsize=8)
def lattice_for(spec: LatticeSpec) -> ClusterLattice:
    return build(spec)


@dataclass(frozen=True)
class ProtocolConfig:
    k: int
    alpha: float
    lattice: LatticeSpec
    strategy: AdversaryStrategy
    rm: RMCodeSpec | None = None
    seed: int = 0
    trials: int = 1
    backend: str = "exact_subset_dp"
    cross_check: bool = False

    def __post_init__(self):
        if self.k < 1:
            raise ValueError("k must be at least 1")
        if not 0 < self.alpha <= 1:
            raise ValueError("alpha must lie in (0, 1]")
        if self.trials < 1:
            raise ValueError("trials must be at least 1")
        self.strategy.check_blocks(self.blocks)

    @property
    def blocks(self) -> int:
        return 2 * self.k + 1


@dataclass(frozen=True)
class ColorVerdict:
    member: bool
    sf_member: bool
    sf_reason: str | None
    rm_tree: int | None
    logical_flip: bool


_ZERO_VERDICT = ColorVerdict(True, True, None, None, False)


class Evaluator:
    """Membership of one colour's deviation in ``S_C``, memoised on the deviation bits."""

    def __init__(self, lat: ClusterLattice, rm: RMCodeSpec | None = None,
                 backend: str = "exact_subset_dp", cross_check: bool = False, memo_size: int = 4096):
        self.lat = lat
        self.rm = rm
        self.backend = backend
        self.cross_check = cross_check
        self.memo_size = memo_size
        self._memo: dict = {}
        if rm is not None:
            rm.assignment(lat)  # validates the site count

    def __call__(self, deviation: BitVec, color: str) -> ColorVerdict:
        if not deviation.any():
            return _ZERO_VERDICT
        key = (color, deviation.key())
        hit = self._memo.get(key)
        if hit is not None:
            return hit
        sf = in_Ssf(self.lat, deviation, color, self.backend, self.cross_check)
        res = sf.analysis
        rm_tree = None
        rm_ok = True
        if self.rm is not None:
            r = in_Srm(self.lat, res if color == "B" else None, res if color == "W" else None, self.rm)
            rm_ok, rm_tree = r.member, r.tree
        out = ColorVerdict(sf.member and rm_ok, sf.member, sf.reason, rm_tree, res.homology_nontrivial)
        if len(self._memo) < self.memo_size:
            self._memo[key] = out
        return out


@dataclass
class Transcript:
    trial: int
    groups: dict  # group name -> prover block indices
    tests: list  # per test block: block, test, record, verdict
    accept: bool
    compute: dict

    def to_dict(self) -> dict:
        return {
            "trial": self.trial,
            "groups": self.groups,
            "tests": self.tests,
            "accept": self.accept,
            "compute": self.compute,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))

    @classmethod
    def from_json(cls, text: str) -> Transcript:
        d = json.loads(text)
        return cls(d["trial"], d["groups"], d["tests"], d["accept"], d["compute"])


def _partition(seed: int, trial: int, k: int) -> tuple[list[int], list[int], int]:
    perm = rngmod.stream(seed, trial, 0, rngmod.STAGE_PERMUTATION).permutation(2 * k + 1)
    return [int(b) for b in perm[:k]], [int(b) for b in perm[k : 2 * k]], int(perm[2 * k])


def run_trial(cfg: ProtocolConfig, trial: int, evaluator: Evaluator | None = None,
              with_records: bool = True, early_exit: bool = False) -> Transcript:
    """Play round ``trial``; everything random is drawn from streams keyed by ``(seed, trial)``.

    With ``early_exit`` the remaining test blocks are skipped after the first
    failure and a rejected round leaves its compute block unevaluated
    (``None``).  The accept flag and every accepted round are unchanged since
    each block has its own noise stream; per-test and compute tallies of
    rejected rounds are incomplete.
    """
    lat = lattice_for(cfg.lattice)
    if evaluator is None:
        evaluator = Evaluator(lat, cfg.rm, cfg.backend, cfg.cross_check)
    g = lat.graph
    errors = sample_prover_blocks(
        cfg.strategy, cfg.blocks, g.n,
        lambda b: rngmod.stream(cfg.seed, trial, b, rngmod.STAGE_NOISE),
    )
    group_b, group_w, compute = _partition(cfg.seed, trial, cfg.k)

    tests = []
    accept = True
    outcomes = rngmod.stream(cfg.seed, trial, 0, rngmod.STAGE_OUTCOMES) if with_records else None
    for which, color, group, devfn in ((T_B, "B", group_b, deviation_B), (T_W, "W", group_w, deviation_W)):
        if early_exit and not accept:
            break
        for blk in group:
            err = errors[blk]
            dev = devfn(err, g)
            entry = {"block": blk, "test": which}
            if with_records:
                record = sample_test_outcomes(err, g, which, outcomes)
                if test_statistic(record, g, which) != dev:
                    raise IntegrityError(f"test statistic of block {blk} differs from its deviation")
                entry["record"] = record.outcome.to_hex()
            verdict = evaluator(dev, color)
            entry["pass"] = verdict.member
            tests.append(entry)
            accept = accept and verdict.member
            if early_exit and not accept:
                break

    if accept != all(t["pass"] for t in tests) or (len(tests) != 2 * cfg.k and accept) \
            or (len(tests) != 2 * cfg.k and not early_exit):
        raise IntegrityError("accept flag is not the conjunction of the test verdicts")

    err = errors[compute]
    if early_exit and not accept:
        comp = {"block": compute, "in_S": None, "in_S_B": None, "in_S_W": None, "logical_failure": None}
    else:
        vb = evaluator(deviation_B(err, g), "B")
        vw = evaluator(deviation_W(err, g), "W")
        comp = {
            "block": compute,
            "in_S": vb.member and vw.member,
            "in_S_B": vb.member,
            "in_S_W": vw.member,
            "logical_failure": vb.logical_flip or vw.logical_flip,
        }
    groups = {"T_B": group_b, "T_W": group_w, "compute": [compute]}
    return Transcript(trial, groups, tests, accept, comp)


@dataclass
class TrialCounters:
    """Additive tallies; merging is commutative, so worker order never matters."""

    trials: int = 0
    accepts: int = 0
    tests_B: int = 0
    passes_B: int = 0
    tests_W: int = 0
    passes_W: int = 0
    compute_in_S: int = 0
    accepted_in_S: int = 0
    logical_failures: int = 0
    accepted_logical_failures: int = 0
    compute_slot: list = field(default_factory=list)  # per prover block: times it was the compute block

    def add(self, t: Transcript) -> None:
        self.trials += 1
        self.accepts += int(t.accept)
        for e in t.tests:
            if e["test"] == T_B:
                self.tests_B += 1
                self.passes_B += int(e["pass"])
            else:
                self.tests_W += 1
                self.passes_W += int(e["pass"])
        c = t.compute
        self.compute_in_S += int(bool(c["in_S"]))
        self.accepted_in_S += int(bool(c["in_S"]) and t.accept)
        self.logical_failures += int(bool(c["logical_failure"]))
        self.accepted_logical_failures += int(bool(c["logical_failure"]) and t.accept)
        blk = c["block"]
        if len(self.compute_slot) <= blk:
            self.compute_slot.extend([0] * (blk + 1 - len(self.compute_slot)))
        self.compute_slot[blk] += 1

    def merge(self, other: TrialCounters) -> TrialCounters:
        out = TrialCounters()
        for f in fields(self):
            a, b = getattr(self, f.name), getattr(other, f.name)
            if isinstance(a, list):
                n = max(len(a), len(b))
                a = a + [0] * (n - len(a))
                b = b + [0] * (n - len(b))
                setattr(out, f.name, [x + y for x, y in zip(a, b)])
            else:
                setattr(out, f.name, a + b)
        return out

    def to_dict(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self)}


def run_trials(cfg: ProtocolConfig, start: int, stop: int, with_records: bool = True,
               sink=None) -> TrialCounters:
    lat = lattice_for(cfg.lattice)
    ev = Evaluator(lat, cfg.rm, cfg.backend, cfg.cross_check)
    counts = TrialCounters()
    for t in range(start, stop):
        tr = run_trial(cfg, t, ev, with_records)
        counts.add(tr)
        if sink is not None:
            sink(tr)
    return counts


def _binom_se(successes: int, n: int) -> float:
    if n == 0:
        return float("nan")
    q = successes / n
    return math.sqrt(q * (1 - q) / n)


@dataclass(frozen=True)
class AcceptanceEstimate:
    trials: int
    rate: float
    stderr: float
    q_B: float
    q_W: float
    product: float
    product_stderr: float
    counters: TrialCounters

    @property
    def combined_sigma(self) -> float:
        return math.hypot(self.stderr, self.product_stderr)


def acceptance_from_counters(c: TrialCounters, k: int) -> AcceptanceEstimate:
    rate = c.accepts / c.trials
    qB = c.passes_B / c.tests_B if c.tests_B else 1.0
    qW = c.passes_W / c.tests_W if c.tests_W else 1.0
    prod = qB**k * qW**k
    # delta method for q_B^k q_W^k
    vB = qB * (1 - qB) / c.tests_B if c.tests_B else 0.0
    vW = qW * (1 - qW) / c.tests_W if c.tests_W else 0.0
    dB = k * qB ** (k - 1) * qW**k
    dW = k * qW ** (k - 1) * qB**k
    pse = math.sqrt(dB * dB * vB + dW * dW * vW)
    return AcceptanceEstimate(c.trials, rate, _binom_se(c.accepts, c.trials), qB, qW, prod, pse, c)


def estimate_acceptance(cfg: ProtocolConfig, trials: int | None = None, runner=None) -> AcceptanceEstimate:
    """Monte Carlo acceptance with the per-test pass rates and their product-form prediction."""
    n = cfg.trials if trials is None else trials
    counts = runner(cfg, n) if runner is not None else run_trials(cfg, 0, n, with_records=True)
    return acceptance_from_counters(counts, cfg.k)


@dataclass(frozen=True)
class DetectionRow:
    strategy: str
    trials: int
    accepts: int
    accept_rate: float
    accept_stderr: float
    accepted_in_S: int
    membership: float
    membership_stderr: float
    bound: float | None
    violates: bool

    def to_dict(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self)}


def detection_row(label: str, c: TrialCounters, k: int, alpha: float) -> DetectionRow:
    from .bounds import BoundDomainError, theorem1_bound

    rate = c.accepts / c.trials
    if c.accepts:
        mem = c.accepted_in_S / c.accepts
        mem_se = _binom_se(c.accepted_in_S, c.accepts)
    else:
        mem, mem_se = float("nan"), float("nan")
    try:
        bound = theorem1_bound(alpha, k)
    except BoundDomainError:
        bound = None
    violates = bool(
        bound is not None and c.accepts and rate >= alpha and mem < bound - 3 * mem_se
    )
    return DetectionRow(label, c.trials, c.accepts, rate, _binom_se(c.accepts, c.trials),
                        c.accepted_in_S, mem, mem_se, bound, violates)


def estimate_detection_operating_point(cfg: ProtocolConfig, suite, trials: int | None = None,
                                       runner=None) -> list[DetectionRow]:
    """Acceptance and post-acceptance membership of the compute block for each strategy in ``suite``."""
    n = cfg.trials if trials is None else trials
    rows = []
    for strat in suite:
        sub = ProtocolConfig(cfg.k, cfg.alpha, cfg.lattice, strat, cfg.rm, cfg.seed, n,
                             cfg.backend, cfg.cross_check)
        counts = runner(sub, n) if runner is not None else run_trials(sub, 0, n, with_records=False)
        rows.append(detection_row(strat.label or strat.kind, counts, cfg.k, cfg.alpha))
    return rows
