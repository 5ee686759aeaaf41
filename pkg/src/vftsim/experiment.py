"""Experiment configs, task expansion, parallel execution and result files.

A run writes into its output directory:

``summary.csv``
    one row per (task, metric); byte-identical for a given config and seed
    whatever the worker count.
``manifest.json``
    effective config, its hash, completion flag, timings.
``transcripts.jsonl``
    optional, one protocol round per line.
``plot_summary.py``
    a standalone matplotlib script that redraws the figures from the CSV.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
import math
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, fields
from functools import lru_cache
from itertools import combinations, product
from pathlib import Path

import jsonschema
import numpy as np

from . import __version__
from . import rng as rngmod
from .bounds import (
    SAWTable,
    p0_fault,
    rm_acceptance_bound,
    rm_fault_recursion,
    sf_rejection_bound,
    theorem1_bound,
)
from .decode import CapacityError, DecoderIntegrityError, counters as decode_counters, decode_mwpm, extract_syndrome, in_Ssf
from .f2core import PauliError, deviation_B, deviation_W
from .lattice import LAYOUTS, LatticeSpecError, layout_spec
from .noise import BAD_KINDS, AdversaryStrategy, NoiseModel, canonical_bad_error, load_table_csv, sample_block_error
from .protocol import (
    IntegrityError,
    ProtocolConfig,
    Transcript,
    TrialCounters,
    acceptance_from_counters,
    detection_row,
    lattice_for,
    run_trial,
)
from .rmcode import RMCodeSpec

__all__ = [
    "CONFIG_SCHEMA",
    "COLUMNS",
    "ConfigError",
    "EXIT_OK",
    "EXIT_CONFIG",
    "EXIT_CAPACITY",
    "EXIT_INTEGRITY",
    "config_hash",
    "load_config",
    "normalize_config",
    "replay",
    "run_experiment",
    "expand_tasks",
]

SCHEMA_VERSION = 1
EXPERIMENTS = ("acceptance_sweep", "detection_suite", "decoder_validation", "bounds_table", "protocol_single")

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_CAPACITY = 3
EXIT_INTEGRITY = 4


class ConfigError(ValueError):
    pass


def _array(items: dict) -> dict:
    return {"type": "array", "minItems": 1, "items": items}


_PROB = {"type": "number", "minimum": 0, "maximum": 1}
_BAD = {"enum": list(BAD_KINDS)}

_STRATEGY = {
    "type": "object",
    "additionalProperties": False,
    "required": ["kind"],
    "properties": {
        "kind": {"enum": ["honest", "single_bad_block", "bad_blocks", "block_table"]},
        "label": {"type": "string"},
        "p": _PROB,
        "noise": {"enum": ["iid_z", "iid_depolarizing_xz"]},
        "bad": {"oneOf": [_BAD, _array(_BAD)]},
        "position": {"type": "integer", "minimum": 0},
        "positions": _array({"type": "integer", "minimum": 0}),
        "blocks": _array({
            "type": "object",
            "additionalProperties": False,
            "properties": {"p": _PROB, "noise": {"enum": ["iid_z", "iid_depolarizing_xz"]}, "bad": _BAD},
        }),
    },
}

CONFIG_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "type": "object",
    "additionalProperties": False,
    "required": ["schema_version", "experiment"],
    "properties": {
        "schema_version": {"const": SCHEMA_VERSION},
        "experiment": {"enum": list(EXPERIMENTS)},
        "seed": {"type": "integer", "minimum": 0},
        "trials": {"type": "integer", "minimum": 1},
        "layout": {"enum": list(LAYOUTS)},
        "boundary": {"enum": ["periodic", "open"]},
        "backend": {"enum": ["exact", "exact_subset_dp", "blossom", "greedy"]},
        "noise": {"enum": ["iid_z", "iid_depolarizing_xz"]},
        "noise_table": {"type": "string"},
        "mode": {"enum": ["block", "protocol"]},
        "grid": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "p": _array(_PROB),
                "d": _array({"type": "integer", "minimum": 2}),
                "k": _array({"type": "integer", "minimum": 1}),
                "l": _array({"type": "integer", "minimum": 0, "maximum": 2}),
                "m": _array({"type": "integer", "minimum": 1}),
                "p0": _array(_PROB),
            },
        },
        "alpha": {"type": ["number", "null"], "exclusiveMinimum": 0, "maximum": 1},
        "strategies": _array(_STRATEGY),
        "transcripts": {"type": "boolean"},
        "records": {"type": "boolean"},
        "early_exit": {"type": "boolean"},
        "cross_check": {"type": "boolean"},
        "chunk_size": {"type": "integer", "minimum": 1},
        "saw_table": {"type": "string"},
        "nu_max": {"type": "integer", "minimum": 1},
    },
}

DEFAULTS = {
    "seed": 0,
    "trials": 1000,
    "layout": "fig2-pair",
    "boundary": "periodic",
    "backend": "exact",
    "noise": "iid_z",
    "mode": "block",
    "grid": {},
    "alpha": None,
    "transcripts": False,
    "records": True,
    "early_exit": False,
    "cross_check": False,
    "chunk_size": 2000,
}

_REQUIRED_GRID = {
    "acceptance_sweep": ("d", "p"),
    "detection_suite": ("k",),
    "decoder_validation": ("d",),
    "bounds_table": (),
    "protocol_single": ("k", "d", "p"),
}


def normalize_config(raw: dict, overrides: dict | None = None) -> dict:
    """Schema-check ``raw``, apply ``overrides`` and fill defaults; raises :class:`ConfigError`."""
    try:
        jsonschema.validate(raw, CONFIG_SCHEMA)
    except jsonschema.ValidationError as exc:
        where = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise ConfigError(f"{where}: {exc.message}") from None
    cfg = json.loads(json.dumps(DEFAULTS))
    cfg.update(json.loads(json.dumps(raw)))
    for key, value in (overrides or {}).items():
        if value is not None:
            cfg[key] = value
    if cfg["backend"] == "exact_subset_dp":
        cfg["backend"] = "exact"
    try:
        jsonschema.validate(cfg, CONFIG_SCHEMA)
    except jsonschema.ValidationError as exc:
        raise ConfigError(f"override: {exc.message}") from None

    exp = cfg["experiment"]
    grid = cfg["grid"]
    for key in _REQUIRED_GRID[exp]:
        if key not in grid:
            raise ConfigError(f"{exp} needs grid.{key}")
    if exp == "bounds_table" and not ({"p0", "l"} <= grid.keys() or {"p", "d"} <= grid.keys()):
        raise ConfigError("bounds_table needs grid.p0 with grid.l, or grid.p with grid.d")
    if exp == "acceptance_sweep" and cfg["mode"] == "protocol" and "k" not in grid:
        raise ConfigError("protocol-mode acceptance_sweep needs grid.k")
    if exp == "detection_suite" and "strategies" not in cfg:
        raise ConfigError("detection_suite needs a strategies list")
    if cfg["boundary"] == "open" and cfg["layout"] != "empty-vacuum":
        raise ConfigError("open boundaries are available for the empty-vacuum layout only")
    if exp in ("detection_suite", "protocol_single") or cfg["mode"] == "protocol":
        if cfg["layout"] == "empty-vacuum" and ({"l", "m"} & grid.keys()):
            raise ConfigError("the empty-vacuum layout has no singular sites for grid.l / grid.m")
    if "noise_table" in cfg and not Path(cfg["noise_table"]).is_file():
        raise ConfigError(f"noise table {cfg['noise_table']} not found")
    if "saw_table" in cfg and not Path(cfg["saw_table"]).is_file():
        raise ConfigError(f"SAW table {cfg['saw_table']} not found")
    for s in cfg.get("strategies", []):
        kind = s["kind"]
        if kind == "honest" and "p" not in s:
            raise ConfigError("honest strategy needs p")
        if kind == "single_bad_block" and not isinstance(s.get("bad", "fail_both"), str):
            raise ConfigError("single_bad_block takes one bad kind")
        if kind == "bad_blocks" and ("bad" not in s or "positions" not in s):
            raise ConfigError("bad_blocks needs bad and positions")
        if kind == "block_table" and "blocks" not in s:
            raise ConfigError("block_table needs blocks")
    return cfg


def load_config(path, overrides: dict | None = None) -> dict:
    try:
        with open(path) as fh:
            raw = json.load(fh)
    except FileNotFoundError:
        raise ConfigError(f"config file {path} not found") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path} is not valid JSON: {exc}") from None
    return normalize_config(raw, overrides)


def canonical_json(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"))


def config_hash(cfg: dict) -> str:
    return hashlib.sha256(canonical_json(cfg).encode()).hexdigest()


# --------------------------------------------------------------------------
# tasks


@dataclass(frozen=True)
class Task:
    index: int
    key: str
    kind: str  # block | protocol | detection | decoder | bounds
    params: tuple  # sorted (name, value) pairs

    @property
    def p(self) -> dict:
        return dict(self.params)


def _fmt_key(params: dict) -> str:
    return ",".join(f"{k}={v}" for k, v in params.items())


def expand_tasks(cfg: dict) -> list[Task]:
    grid = cfg["grid"]
    exp = cfg["experiment"]
    out: list[Task] = []

    def add(kind, params):
        out.append(Task(len(out), _fmt_key(params), kind, tuple(params.items())))

    rm_l = grid.get("l", [0])
    rm_m = grid.get("m", [1])
    if exp == "acceptance_sweep" and cfg["mode"] == "block":
        for d, p in product(grid["d"], grid["p"]):
            add("block", {"d": d, "p": p})
    elif exp in ("acceptance_sweep", "protocol_single"):
        for d, p, k, l, m in product(grid["d"], grid["p"], grid["k"], rm_l, rm_m):
            add("protocol", {"d": d, "p": p, "k": k, "l": l, "m": m})
    elif exp == "detection_suite":
        for d, k, l, m in product(grid.get("d", [3]), grid["k"], rm_l, rm_m):
            for si, s in enumerate(cfg["strategies"]):
                add("detection", {"d": d, "k": k, "l": l, "m": m, "strategy": si})
    elif exp == "decoder_validation":
        for d in grid["d"]:
            add("decoder", {"d": d})
    else:
        add("bounds", {})
    return out


def _rm_for(cfg: dict, params: dict) -> RMCodeSpec | None:
    if cfg["layout"] == "empty-vacuum":
        return None
    return RMCodeSpec(params.get("l", 0), params.get("m", 1))


def _spec_for(cfg: dict, params: dict):
    rm = _rm_for(cfg, params)
    return layout_spec(cfg["layout"], params["d"], rm.n_sites if rm else 0, cfg["boundary"])


def _noise(cfg: dict, kind: str | None, p: float) -> NoiseModel:
    if "noise_table" in cfg:
        return load_table_csv(cfg["noise_table"])
    kind = kind or cfg["noise"]
    return NoiseModel(kind, float(p))


def _alpha(cfg: dict, k: int) -> float:
    return cfg["alpha"] if cfg["alpha"] is not None else 1 / math.sqrt(2 * k + 1)


def _strategy(cfg: dict, s: dict, lat, k: int) -> AdversaryStrategy:
    blocks = 2 * k + 1
    kind = s["kind"]
    if kind == "honest":
        return AdversaryStrategy.honest(_noise(cfg, s.get("noise"), s["p"]), s.get("label", f"honest_p{s['p']}"))
    if kind == "single_bad_block":
        bad = s.get("bad", "fail_both")
        return AdversaryStrategy.single_bad_block(
            canonical_bad_error(lat, bad), s.get("position", 0), s.get("label", f"single_{bad}")
        )
    table: list = []
    if kind == "bad_blocks":
        bads = s["bad"] if isinstance(s["bad"], list) else [s["bad"]] * len(s["positions"])
        if len(bads) != len(s["positions"]):
            raise ConfigError("bad and positions lengths differ")
        fixed = dict(zip(s["positions"], bads))
        if len(fixed) != len(s["positions"]):
            raise ConfigError("repeated bad block position")
        background = _noise(cfg, s.get("noise"), s.get("p", 0.0))
        for b in range(blocks):
            table.append(canonical_bad_error(lat, fixed[b]) if b in fixed else background)
        label = s.get("label", f"{len(fixed)}x_" + "+".join(sorted(set(bads))))
    else:
        if len(s["blocks"]) != blocks:
            raise ConfigError(f"block_table lists {len(s['blocks'])} blocks, protocol has {blocks}")
        for e in s["blocks"]:
            if "bad" in e:
                table.append(canonical_bad_error(lat, e["bad"]))
            else:
                table.append(_noise(cfg, e.get("noise"), e.get("p", 0.0)))
        label = s.get("label", "block_table")
    for b, src in enumerate(table):
        if isinstance(src, PauliError):
            continue
        if src.kind == "iid_z" and src.p == 0:
            table[b] = PauliError.identity(lat.n)
    return AdversaryStrategy.block_table(table, label)


@lru_cache(maxsize=32)
def _context(cfg_json: str, task_index: int):
    cfg = json.loads(cfg_json)
    task = expand_tasks(cfg)[task_index]
    p = task.p
    if task.kind == "bounds":
        return cfg, task, None
    spec = _spec_for(cfg, p)
    lat = lattice_for(spec)
    if task.kind == "block":
        return cfg, task, {"lat": lat, "noise": _noise(cfg, None, p["p"])}
    if task.kind == "decoder":
        return cfg, task, {"lat": lat}
    k = p["k"]
    if task.kind == "protocol":
        strat = AdversaryStrategy.honest(_noise(cfg, None, p["p"]))
    else:
        strat = _strategy(cfg, cfg["strategies"][p["strategy"]], lat, k)
    pcfg = ProtocolConfig(k, _alpha(cfg, k), spec, strat, _rm_for(cfg, p), cfg["seed"], cfg["trials"],
                          cfg["backend"], cfg["cross_check"])
    from .protocol import Evaluator

    ev = Evaluator(lat, pcfg.rm, pcfg.backend, pcfg.cross_check)
    return cfg, task, {"lat": lat, "pcfg": pcfg, "ev": ev}


# --------------------------------------------------------------------------
# per-chunk work


@dataclass
class BlockCounters:
    trials: int = 0
    rejects_B: int = 0
    rejects_W: int = 0
    rejects_any: int = 0
    logical_B: int = 0
    logical_W: int = 0
    decoded: int = 0

    def merge(self, other: BlockCounters) -> BlockCounters:
        return BlockCounters(*(getattr(self, f.name) + getattr(other, f.name) for f in fields(self)))


def _block_chunk(cfg, task, ctx, start, stop) -> BlockCounters:
    lat, noise = ctx["lat"], ctx["noise"]
    g = lat.graph
    c = BlockCounters()
    for t in range(start, stop):
        err = sample_block_error(noise, g.n, rngmod.stream(cfg["seed"], t, 0, rngmod.STAGE_NOISE))
        c.trials += 1
        bad = False
        for color, fn in (("B", deviation_B), ("W", deviation_W)):
            dev = fn(err, g)
            if not dev.any():
                continue
            v = in_Ssf(lat, dev, color, cfg["backend"], cfg["cross_check"], skip_short=True)
            if v.analysis is not None:
                c.decoded += 1
                if v.analysis.homology_nontrivial:
                    if color == "B":
                        c.logical_B += 1
                    else:
                        c.logical_W += 1
            if not v.member:
                bad = True
                if color == "B":
                    c.rejects_B += 1
                else:
                    c.rejects_W += 1
        c.rejects_any += int(bad)
    return c


def _protocol_chunk(cfg, task, ctx, start, stop, want_transcripts):
    pcfg, ev = ctx["pcfg"], ctx["ev"]
    counts = TrialCounters()
    lines = []
    early = cfg["early_exit"] and task.kind == "detection"
    for t in range(start, stop):
        tr = run_trial(pcfg, t, ev, with_records=cfg["records"], early_exit=early)
        counts.add(tr)
        if want_transcripts:
            d = tr.to_dict()
            d["task"] = task.key
            lines.append(canonical_json(d))
    return counts, lines


def _run_chunk(payload):
    cfg_json, task_index, start, stop, want_transcripts = payload
    cfg, task, ctx = _context(cfg_json, task_index)
    before = dict(decode_counters)
    if task.kind == "block":
        out = (_block_chunk(cfg, task, ctx, start, stop), [])
    else:
        out = _protocol_chunk(cfg, task, ctx, start, stop, want_transcripts)
    delta = {k: decode_counters[k] - before[k] for k in decode_counters}
    return out[0], out[1], delta


# --------------------------------------------------------------------------
# decoder validation


def weight2_oracle(lat, color: str) -> dict:
    """Minimum weight of any chain of weight <= 2 for each boundary it realises."""
    sub = lat.sub(color)
    act = [int(e) for e in sub.active_edges]
    best: dict = {(): 0}
    ends = {e: [v for v in (int(sub.u[e]), int(sub.v[e])) if v >= 0] for e in act}
    for e in act:
        k = tuple(sorted(ends[e]))
        best[k] = min(best.get(k, 9), 1)
    for a, b in combinations(act, 2):
        verts = {}
        for v in ends[a] + ends[b]:
            verts[v] = verts.get(v, 0) ^ 1
        k = tuple(sorted(v for v, odd in verts.items() if odd))
        best[k] = min(best.get(k, 9), 2)
    return best


def _decoder_validation(cfg, task, ctx) -> list[dict]:
    lat = ctx["lat"]
    rows = []
    for color in ("B", "W"):
        sub = lat.sub(color)
        oracle = weight2_oracle(lat, color)
        act = [int(e) for e in sub.active_edges]
        cases = matches = boundary_ok = 0
        chains = [()] + [(e,) for e in act] + list(combinations(act, 2))
        for ch in chains:
            dev = np.zeros(sub.n_edges, dtype=bool)
            dev[list(ch)] = True
            syn = extract_syndrome(lat, dev, color)
            try:
                corr = decode_mwpm(lat, syn, cfg["backend"])
            except DecoderIntegrityError:
                cases += 1
                continue
            cases += 1
            boundary_ok += 1
            key = tuple(syn.flagged.tolist())
            matches += int(corr.weight == oracle[key])
        rows.append(_row(cfg, task, "oracle_match_rate_" + color, matches / cases, None, matches, cases))
        rows.append(_row(cfg, task, "boundary_ok_rate_" + color, boundary_ok / cases, None, boundary_ok, cases))
    return rows


# --------------------------------------------------------------------------
# rows

COLUMNS = ("experiment", "task", "layout", "d", "p", "k", "l", "m", "alpha", "strategy", "backend",
           "metric", "value", "stderr", "count", "trials")


def _num(x) -> str:
    if x is None:
        return ""
    if isinstance(x, bool):
        return str(int(x))
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    x = float(x)
    if math.isnan(x):
        return "nan"
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return format(x, ".12g")


def _row(cfg, task, metric, value, stderr=None, count=None, trials=None, **extra) -> dict:
    p = task.p
    row = {
        "experiment": cfg["experiment"],
        "task": task.key,
        "layout": cfg["layout"] if task.kind != "bounds" else "",
        "d": p.get("d"),
        "p": p.get("p"),
        "k": p.get("k"),
        "l": p.get("l"),
        "m": p.get("m"),
        "alpha": None,
        "strategy": "",
        "backend": cfg["backend"] if task.kind != "bounds" else "",
        "metric": metric,
        "value": value,
        "stderr": stderr,
        "count": count,
        "trials": trials,
    }
    row.update(extra)
    return row


def _se(c: int, n: int) -> float:
    q = c / n
    return math.sqrt(q * (1 - q) / n)


def _block_rows(cfg, task, ctx, c: BlockCounters) -> list[dict]:
    n = c.trials
    lat = ctx["lat"]
    out = []
    for metric, cnt in (("sf_reject_B", c.rejects_B), ("sf_reject_W", c.rejects_W), ("sf_reject_any", c.rejects_any),
                        ("logical_failure_B", c.logical_B), ("logical_failure_W", c.logical_W)):
        out.append(_row(cfg, task, metric, cnt / n, _se(cnt, n), cnt, n))
    for color, nq in (("B", lat.n_B), ("W", lat.n_W)):
        rep = sf_rejection_bound(nq, task.p["p"], lat.d)
        out.append(_row(cfg, task, "sf_bound_" + color, rep.value))
        out.append(_row(cfg, task, "sf_bound_closed_" + color, float(min(rep.extras["closed_form"], 1e300))
                        if not rep.flags["diverges"] else math.inf))
    return out


def _protocol_rows(cfg, task, ctx, c: TrialCounters) -> list[dict]:
    pcfg = ctx["pcfg"]
    k = pcfg.k
    est = acceptance_from_counters(c, k)
    extra = {"alpha": pcfg.alpha}
    out = [
        _row(cfg, task, "accept_rate", est.rate, est.stderr, c.accepts, c.trials, **extra),
        _row(cfg, task, "q_B", est.q_B, _se(c.passes_B, c.tests_B), c.passes_B, c.tests_B, **extra),
        _row(cfg, task, "q_W", est.q_W, _se(c.passes_W, c.tests_W), c.passes_W, c.tests_W, **extra),
        _row(cfg, task, "product_form", est.product, est.product_stderr, None, c.trials, **extra),
        _row(cfg, task, "compute_membership", c.compute_in_S / c.trials, _se(c.compute_in_S, c.trials),
             c.compute_in_S, c.trials, **extra),
    ]
    if c.accepts:
        out.append(_row(cfg, task, "membership_given_accept", c.accepted_in_S / c.accepts,
                        _se(c.accepted_in_S, c.accepts), c.accepted_in_S, c.accepts, **extra))
    return out


def _detection_rows(cfg, task, ctx, c: TrialCounters) -> list[dict]:
    pcfg = ctx["pcfg"]
    r = detection_row(pcfg.strategy.label, c, pcfg.k, pcfg.alpha)
    extra = {"alpha": pcfg.alpha, "strategy": r.strategy}
    out = [
        _row(cfg, task, "accept_rate", r.accept_rate, r.accept_stderr, r.accepts, r.trials, **extra),
        _row(cfg, task, "membership_given_accept", r.membership, r.membership_stderr, r.accepted_in_S,
             r.accepts, **extra),
    ]
    if r.bound is not None:
        out.append(_row(cfg, task, "membership_floor", r.bound, **extra))
    out.append(_row(cfg, task, "soundness_violation", int(r.violates), **extra))
    return out


def _bounds_rows(cfg, task) -> list[dict]:
    grid = cfg["grid"]
    out = []

    def brow(metric, value, **params):
        row = _row(cfg, task, metric, value)
        row["task"] = _fmt_key(params)
        for key in ("d", "p", "l", "m"):
            if key in params:
                row[key] = params[key]
        if "p0" in params:
            row["p"] = params["p0"]
        return row

    for p0, l in product(grid.get("p0", []), grid.get("l", [])):
        out.append(brow("rm_fault", rm_fault_recursion(p0, l).value, p0=p0, l=l))
        for m in grid.get("m", []):
            out.append(brow("rm_acceptance", rm_acceptance_bound(p0, l, m).value, p0=p0, l=l, m=m))
    if "p" in grid and "d" in grid:
        table = SAWTable.from_csv(cfg["saw_table"]) if "saw_table" in cfg else None
        for p, d in product(grid["p"], grid["d"]):
            n = lattice_for(layout_spec(cfg["layout"], d, 0, cfg["boundary"])).n_B
            rep = sf_rejection_bound(n, p, d, cfg.get("nu_max"))
            out.append(brow("sf_rejection", rep.value, p=p, d=d))
            closed = rep.extras["closed_form"]
            out.append(brow("sf_closed_form", math.inf if rep.flags["diverges"] else float(closed), p=p, d=d))
            tab = table or SAWTable.upper_bound_6x5(d)
            out.append(brow("p0_fault", p0_fault(p, d, tab, n).value, p=p, d=d))
    return out


# --------------------------------------------------------------------------
# driver


def default_threads() -> int:
    env = os.environ.get("VFTSIM_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            raise ConfigError(f"VFTSIM_THREADS={env!r} is not an integer") from None
    return 1


def _chunks(trials: int, size: int):
    return [(a, min(a + size, trials)) for a in range(0, trials, size)]


def _execute(cfg: dict, tasks: list[Task], threads: int, want_transcripts: bool):
    """Yield (task, merged counters, transcript lines, decode deltas, seconds) per task, in order."""
    cfg_json = canonical_json(cfg)
    pool = ProcessPoolExecutor(max_workers=threads) if threads > 1 else None
    try:
        for task in tasks:
            t0 = time.perf_counter()
            if task.kind in ("bounds", "decoder"):
                yield task, None, [], {}, time.perf_counter() - t0
                continue
            payloads = [(cfg_json, task.index, a, b, want_transcripts) for a, b in _chunks(cfg["trials"], cfg["chunk_size"])]
            results = pool.map(_run_chunk, payloads) if pool else map(_run_chunk, payloads)
            merged = None
            lines: list[str] = []
            deltas = {k: 0 for k in decode_counters}
            for counts, chunk_lines, delta in results:
                merged = counts if merged is None else merged.merge(counts)
                lines.extend(chunk_lines)
                for k, v in delta.items():
                    deltas[k] += v
            yield task, merged, lines, deltas, time.perf_counter() - t0
    finally:
        if pool:
            pool.shutdown(cancel_futures=True)


def rows_to_csv(rows: list[dict]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(COLUMNS)
    for r in rows:
        w.writerow([r[c] if isinstance(r[c], str) else _num(r[c]) for c in COLUMNS])
    return buf.getvalue()


def _write_manifest(out_dir: Path, cfg: dict, complete: bool, **extra) -> None:
    man = {
        "vftsim_version": __version__,
        "schema_version": SCHEMA_VERSION,
        "config": cfg,
        "config_sha256": config_hash(cfg),
        "seed": cfg["seed"],
        "complete": complete,
    }
    man.update(extra)
    (out_dir / "manifest.json").write_text(json.dumps(man, indent=2, sort_keys=True) + "\n")


@dataclass
class RunResult:
    exit_code: int
    rows: list
    out_dir: Path
    message: str = ""
    decode_stats: dict | None = None


def run_experiment(cfg: dict, out_dir, threads: int | None = None, plot: bool = False) -> RunResult:
    """Run a normalised config; always leaves a manifest, even on failure."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    threads = threads or default_threads()
    try:
        tasks = expand_tasks(cfg)
        for task in tasks:  # build every lattice and strategy up front so config errors surface early
            _context(canonical_json(cfg), task.index)
    except (ConfigError, LatticeSpecError, ValueError) as exc:
        _write_manifest(out_dir, cfg, False, error=f"config: {exc}")
        return RunResult(EXIT_CONFIG, [], out_dir, str(exc))

    want_tx = cfg["transcripts"]
    tx_path = out_dir / "transcripts.jsonl"
    summary_path = out_dir / "summary.csv"
    rows: list[dict] = []
    timings = {}
    stats = {k: 0 for k in decode_counters}
    code, message = EXIT_OK, ""
    tx_fh = open(tx_path, "w") if want_tx else None
    t_start = time.perf_counter()
    try:
        for task, counts, lines, deltas, secs in _execute(cfg, tasks, threads, want_tx):
            _, _, ctx = _context(canonical_json(cfg), task.index)
            if task.kind == "bounds":
                rows.extend(_bounds_rows(cfg, task))
            elif task.kind == "decoder":
                before = dict(decode_counters)
                rows.extend(_decoder_validation(cfg, task, ctx))
                deltas = {k: decode_counters[k] - before[k] for k in decode_counters}
            elif task.kind == "block":
                rows.extend(_block_rows(cfg, task, ctx, counts))
            elif task.kind == "protocol":
                rows.extend(_protocol_rows(cfg, task, ctx, counts))
            else:
                rows.extend(_detection_rows(cfg, task, ctx, counts))
            for k, v in deltas.items():
                stats[k] += v
            if tx_fh:
                for line in lines:
                    tx_fh.write(line + "\n")
            timings[task.key] = round(secs, 3)
            summary_path.write_text(rows_to_csv(rows))
    except CapacityError as exc:
        code, message = EXIT_CAPACITY, str(exc)
    except (IntegrityError, DecoderIntegrityError) as exc:
        code, message = EXIT_INTEGRITY, str(exc)
    finally:
        if tx_fh:
            tx_fh.close()
    summary_path.write_text(rows_to_csv(rows))
    from .plotting import write_plot_script

    write_plot_script(out_dir)
    figures = []
    if plot and code == EXIT_OK:
        from .plotting import render

        figures = render(rows, out_dir)
    _write_manifest(
        out_dir, cfg, code == EXIT_OK,
        threads=threads, wall_time_s=round(time.perf_counter() - t_start, 3), task_seconds=timings,
        decoder_checks=stats, error=message or None,
        files=sorted(["summary.csv", "plot_summary.py"] + (["transcripts.jsonl"] if want_tx else []) + figures),
    )
    return RunResult(code, rows, out_dir, message, stats)


# --------------------------------------------------------------------------
# replay


def replay(path, index: int, task_key: str | None = None, config: dict | None = None) -> Transcript:
    """Regenerate round ``index`` from a run directory (or its transcripts file).

    The manifest's config hash is checked, and so is ``config`` when given.
    When the stored transcript for that round exists it must match exactly.
    """
    path = Path(path)
    run_dir = path if path.is_dir() else path.parent
    man_path = run_dir / "manifest.json"
    if not man_path.is_file():
        raise IntegrityError(f"no manifest in {run_dir}")
    man = json.loads(man_path.read_text())
    cfg = man.get("config")
    if cfg is None or config_hash(cfg) != man.get("config_sha256"):
        raise IntegrityError("manifest config does not match its recorded hash")
    if config is not None and config_hash(config) != man["config_sha256"]:
        raise IntegrityError("supplied config differs from the one recorded for this run")
    if not 0 <= index < cfg["trials"]:
        raise IntegrityError(f"trial index {index} outside 0..{cfg['trials'] - 1}")
    tasks = [t for t in expand_tasks(cfg) if t.kind in ("protocol", "detection")]
    if not tasks:
        raise IntegrityError("this run has no protocol rounds to replay")
    if task_key is None:
        task = tasks[0]
    else:
        found = [t for t in tasks if t.key == task_key]
        if not found:
            raise IntegrityError(f"no task {task_key!r} in this run")
        task = found[0]
    cfg_used, _, ctx = _context(canonical_json(cfg), task.index)
    tr = run_trial(ctx["pcfg"], index, ctx["ev"], with_records=cfg_used["records"],
                   early_exit=cfg_used["early_exit"] and task.kind == "detection")
    tx = path if path.is_file() else run_dir / "transcripts.jsonl"
    if tx.is_file():
        d = tr.to_dict()
        d["task"] = task.key
        fresh = canonical_json(d)
        with open(tx) as fh:
            for line in fh:
                stored = json.loads(line)
                if stored.get("task") == task.key and stored.get("trial") == index:
                    if canonical_json(stored) != fresh:
                        raise IntegrityError(f"replayed round {index} differs from the stored transcript")
                    break
    return tr
