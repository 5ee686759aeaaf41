"""Command-line entry point: ``vftsim run | replay | validate-config | enumerate-saw``."""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import __version__
from .bounds import enumerate_saw
from .experiment import (
    EXIT_CONFIG,
    EXIT_INTEGRITY,
    EXIT_OK,
    ConfigError,
    config_hash,
    default_threads,
    expand_tasks,
    load_config,
    replay,
    run_experiment,
)
from .protocol import IntegrityError

BACKEND_CHOICES = ("exact", "blossom", "greedy")
LAYOUT_CHOICES = ("empty-vacuum", "fig2-pair")


def _parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="vftsim", description="Stabilizer-test verification experiments.")
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run an experiment config")
    run.add_argument("--config", required=True, type=Path)
    run.add_argument("--seed", type=int)
    run.add_argument("--trials", type=int)
    run.add_argument("--threads", type=int, help="worker processes (default: $VFTSIM_THREADS or 1)")
    run.add_argument("--out-dir", type=Path, default=Path("vftsim-out"))
    run.add_argument("--backend", choices=BACKEND_CHOICES)
    run.add_argument("--layout", choices=LAYOUT_CHOICES)
    run.add_argument("--plot", action="store_true", help="also render PNG figures (needs matplotlib)")
    run.add_argument("--quiet", action="store_true", help="do not echo the summary CSV")

    rp = sub.add_parser("replay", help="regenerate one protocol round from a finished run")
    rp.add_argument("path", type=Path, help="run directory or its transcripts.jsonl")
    rp.add_argument("--index", type=int, default=0)
    rp.add_argument("--task", help="task key (default: first protocol task)")
    rp.add_argument("--config", type=Path, help="also require this config to match the run")
    rp.add_argument("--seed", type=int)
    rp.add_argument("--trials", type=int)
    rp.add_argument("--backend", choices=BACKEND_CHOICES)
    rp.add_argument("--layout", choices=LAYOUT_CHOICES)

    vc = sub.add_parser("validate-config", help="check a config against the schema")
    vc.add_argument("--config", required=True, type=Path)

    sw = sub.add_parser("enumerate-saw", help="count self-avoiding walks on the cubic lattice")
    sw.add_argument("--nu-max", type=int, default=8)
    sw.add_argument("--out", type=Path, help="write nu,C_nu CSV here instead of stdout")
    return ap


def _overrides(args) -> dict:
    return {"seed": args.seed, "trials": args.trials, "backend": args.backend, "layout": args.layout}


def _err(msg: str) -> None:
    print(f"vftsim: {msg}", file=sys.stderr)


def _run(args) -> int:
    try:
        cfg = load_config(args.config, _overrides(args))
        threads = args.threads if args.threads is not None else default_threads()
        if threads < 1:
            raise ConfigError("--threads must be at least 1")
    except ConfigError as exc:
        _err(f"config error: {exc}")
        return EXIT_CONFIG
    res = run_experiment(cfg, args.out_dir, threads, plot=args.plot)
    if res.exit_code != EXIT_OK:
        _err(f"{res.message} (partial results in {res.out_dir})")
    if not args.quiet:
        sys.stdout.write((res.out_dir / "summary.csv").read_text())
    return res.exit_code


def _replay(args) -> int:
    given = None
    try:
        if args.config is not None:
            given = load_config(args.config, _overrides(args))
        tr = replay(args.path, args.index, args.task, given)
    except ConfigError as exc:
        _err(f"config error: {exc}")
        return EXIT_CONFIG
    except IntegrityError as exc:
        _err(f"integrity error: {exc}")
        return EXIT_INTEGRITY
    print(tr.to_json())
    return EXIT_OK


def _validate(args) -> int:
    try:
        cfg = load_config(args.config)
    except ConfigError as exc:
        _err(f"config error: {exc}")
        return EXIT_CONFIG
    tasks = expand_tasks(cfg)
    print(json.dumps({"valid": True, "experiment": cfg["experiment"], "tasks": len(tasks),
                      "config_sha256": config_hash(cfg)}))
    return EXIT_OK


def _saw(args) -> int:
    try:
        counts = enumerate_saw(args.nu_max)
    except ValueError as exc:
        _err(str(exc))
        return EXIT_CONFIG
    text = "nu,C_nu\n" + "".join(f"{nu},{c}\n" for nu, c in enumerate(counts, 1))
    if args.out:
        args.out.write_text(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    handler = {"run": _run, "replay": _replay, "validate-config": _validate, "enumerate-saw": _saw}[args.command]
    return handler(args)


if __name__ == "__main__":
    sys.exit(main())
