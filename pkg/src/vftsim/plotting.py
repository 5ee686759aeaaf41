"""Figure emission.

The core never imports matplotlib.  Every run writes ``plot_summary.py``, a
standalone script that redraws the figures from ``summary.csv``; ``render``
runs that same script in-process when the ``plot`` extra is installed.
"""

from __future__ import annotations

from pathlib import Path

__all__ = ["PLOT_SCRIPT", "render", "write_plot_script"]

PLOT_SCRIPT = '''\
"""Redraw figures from summary.csv (written by vftsim run)."""

import csv
import math
import sys
from collections import defaultdict
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402


def _f(s):
    return float(s) if s not in ("", None) else math.nan


def load(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def _save(fig, out_dir, name, written):
    fig.tight_layout()
    fig.savefig(Path(out_dir) / name, dpi=120)
    plt.close(fig)
    written.append(name)


def _block(rows, out_dir, written):
    emp = defaultdict(list)
    bnd = defaultdict(list)
    for r in rows:
        if r["metric"] in ("sf_reject_B", "sf_reject_W"):
            emp[(r["metric"][-1], r["p"])].append((int(r["d"]), _f(r["value"]), _f(r["stderr"])))
        elif r["metric"] in ("sf_bound_B", "sf_bound_W"):
            bnd[(r["metric"][-1], r["p"])].append((int(r["d"]), _f(r["value"])))
    if not emp:
        return
    fig, ax = plt.subplots(figsize=(6, 4))
    for (color, p), pts in sorted(emp.items()):
        pts.sort()
        line = ax.errorbar([a for a, _, _ in pts], [b for _, b, _ in pts], yerr=[c for _, _, c in pts],
                           marker="o", capsize=3, label=f"{color}, p={p}")
        bpts = sorted(bnd.get((color, p), []))
        if bpts:
            ax.plot([a for a, _ in bpts], [b for _, b in bpts], ls="--", color=line[0].get_color(), alpha=0.6)
    ax.set_xlabel("code distance d")
    ax.set_ylabel("rejection rate 1 - P(S_sf)")
    ax.set_yscale("symlog", linthresh=1e-6)
    ax.set_title("block rejection (dashed: analytic bound)")
    ax.legend(fontsize=7)
    _save(fig, out_dir, "block_rejection.png", written)


def _protocol(rows, out_dir, written):
    acc = defaultdict(list)
    prod = defaultdict(dict)
    for r in rows:
        if r["experiment"] == "detection_suite":
            continue
        key = (r["d"], r["k"], r["l"], r["m"])
        if r["metric"] == "accept_rate":
            acc[key].append((_f(r["p"]), _f(r["value"]), _f(r["stderr"])))
        elif r["metric"] == "product_form":
            prod[key][_f(r["p"])] = _f(r["value"])
    if not acc:
        return
    fig, ax = plt.subplots(figsize=(6, 4))
    for key, pts in sorted(acc.items()):
        pts.sort()
        d, k, l, m = key
        line = ax.errorbar([a for a, _, _ in pts], [b for _, b, _ in pts], yerr=[c for _, _, c in pts],
                           marker="o", capsize=3, label=f"d={d} k={k} l={l}")
        pp = sorted(prod[key].items())
        ax.plot([a for a, _ in pp], [b for _, b in pp], ls=":", color=line[0].get_color())
    ax.set_xlabel("physical error rate p")
    ax.set_ylabel("acceptance rate")
    ax.set_title("protocol acceptance (dotted: product of per-block pass rates)")
    ax.legend(fontsize=7)
    _save(fig, out_dir, "protocol_acceptance.png", written)


def _detection(rows, out_dir, written):
    by = defaultdict(dict)
    for r in rows:
        if r["experiment"] != "detection_suite":
            continue
        by[(r["task"], r["strategy"])][r["metric"]] = (_f(r["value"]), _f(r["stderr"]))
    if not by:
        return
    labels = [s for _, s in by]
    keys = list(by)
    acc = [by[k].get("accept_rate", (math.nan, 0)) for k in keys]
    mem = [by[k].get("membership_given_accept", (math.nan, 0)) for k in keys]
    bound = [by[k].get("membership_floor", (math.nan, 0))[0] for k in keys]
    x = range(len(keys))
    fig, ax = plt.subplots(figsize=(max(6, 1.2 * len(keys)), 4))
    ax.bar([i - 0.2 for i in x], [a for a, _ in acc], 0.4, yerr=[s for _, s in acc], label="accept rate")
    ax.bar([i + 0.2 for i in x], [a for a, _ in mem], 0.4, yerr=[s for _, s in mem], label="P(S | accept)")
    ax.scatter(list(x), bound, marker="_", s=400, color="k", label="guaranteed membership", zorder=3)
    ax.set_xticks(list(x))
    ax.set_xticklabels(labels, rotation=30, ha="right", fontsize=7)
    ax.set_ylim(0, 1.05)
    ax.legend(fontsize=7)
    ax.set_title("adversary suite")
    _save(fig, out_dir, "detection_suite.png", written)


def _bounds(rows, out_dir, written):
    rm = defaultdict(list)
    for r in rows:
        if r["metric"] == "rm_fault":
            rm[r["l"]].append((_f(r["p"]), _f(r["value"])))
    if not rm:
        return
    fig, ax = plt.subplots(figsize=(6, 4))
    for l, pts in sorted(rm.items()):
        pts.sort()
        ax.loglog([a for a, _ in pts], [max(b, 1e-300) for _, b in pts], marker="o", label=f"l={l}")
    lo = min(a for pts in rm.values() for a, _ in pts)
    hi = max(a for pts in rm.values() for a, _ in pts)
    ax.loglog([lo, hi], [lo, hi], color="grey", ls="--", lw=0.8, label="p_l = p0")
    ax.set_xlabel("level-0 fault probability p0")
    ax.set_ylabel("top-level fault bound p_l")
    ax.legend(fontsize=7)
    _save(fig, out_dir, "rm_recursion.png", written)


def main(csv_path="summary.csv", out_dir=None):
    csv_path = Path(csv_path)
    out_dir = Path(out_dir) if out_dir else csv_path.parent
    rows = load(csv_path)
    written = []
    _block(rows, out_dir, written)
    _protocol(rows, out_dir, written)
    _detection(rows, out_dir, written)
    _bounds(rows, out_dir, written)
    return written


if __name__ == "__main__":
    here = Path(__file__).resolve().parent
    for name in main(sys.argv[1] if len(sys.argv) > 1 else here / "summary.csv"):
        print(name)
'''


def write_plot_script(out_dir) -> Path:
    path = Path(out_dir) / "plot_summary.py"
    path.write_text(PLOT_SCRIPT)
    return path


def render(rows, out_dir) -> list[str]:
    """Draw PNGs next to ``summary.csv``; returns the file names written.

    ``rows`` is accepted for symmetry with the CSV writer but the figures are
    drawn from the CSV on disk so the script and this call cannot disagree.
    """
    try:
        import matplotlib  # noqa: F401
    except ImportError as exc:
        raise RuntimeError("plotting needs matplotlib; install the 'plot' extra") from exc
    ns: dict = {"__name__": "vftsim_plot"}
    exec(compile(PLOT_SCRIPT, "plot_summary.py", "exec"), ns)
    return ns["main"](Path(out_dir) / "summary.csv", out_dir)
