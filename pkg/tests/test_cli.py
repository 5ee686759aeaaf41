import csv
import io
import json

import pytest

from vftsim.cli import main
from vftsim.experiment import COLUMNS, EXIT_CAPACITY, EXIT_CONFIG, EXIT_INTEGRITY, EXIT_OK

HEADER = "experiment,task,layout,d,p,k,l,m,alpha,strategy,backend,metric,value,stderr,count,trials"


def write(tmp_path, name, obj):
    path = tmp_path / name
    path.write_text(json.dumps(obj))
    return path


def base(**kw):
    cfg = {"schema_version": 1}
    cfg.update(kw)
    return cfg


def read_rows(out):
    return list(csv.DictReader(io.StringIO((out / "summary.csv").read_text())))


def test_golden_header():
    assert ",".join(COLUMNS) == HEADER


def test_run_protocol_single_and_replay(tmp_path, capsys):
    cfg = write(tmp_path, "c.json", base(experiment="protocol_single", grid={"k": [1], "d": [3], "p": [0.01]},
                                         trials=12, transcripts=True))
    out = tmp_path / "run"
    assert main(["run", "--config", str(cfg), "--out-dir", str(out)]) == EXIT_OK
    echoed = capsys.readouterr().out
    assert echoed.splitlines()[0] == HEADER
    assert echoed == (out / "summary.csv").read_text()
    man = json.loads((out / "manifest.json").read_text())
    assert man["complete"] and man["decoder_checks"]["boundary_failures"] == 0
    assert {"summary.csv", "transcripts.jsonl", "plot_summary.py"} <= set(man["files"])
    metrics = {r["metric"] for r in read_rows(out)}
    assert {"accept_rate", "q_B", "q_W", "product_form", "compute_membership"} <= metrics

    lines = (out / "transcripts.jsonl").read_text().splitlines()
    assert len(lines) == 12
    for idx in (0, 7):
        assert main(["replay", str(out), "--index", str(idx)]) == EXIT_OK
        got = json.loads(capsys.readouterr().out)
        stored = json.loads(lines[idx])
        stored.pop("task")
        assert got == stored
    assert main(["replay", str(out / "transcripts.jsonl"), "--config", str(cfg)]) == EXIT_OK
    capsys.readouterr()


def test_replay_detects_tampering(tmp_path, capsys):
    cfg = write(tmp_path, "c.json", base(experiment="protocol_single", grid={"k": [1], "d": [3], "p": [0.02]},
                                         trials=4, transcripts=True))
    out = tmp_path / "run"
    assert main(["run", "--config", str(cfg), "--out-dir", str(out), "--quiet"]) == EXIT_OK

    other = write(tmp_path, "o.json", base(experiment="protocol_single", grid={"k": [1], "d": [3], "p": [0.03]},
                                           trials=4))
    assert main(["replay", str(out), "--config", str(other)]) == EXIT_INTEGRITY
    assert main(["replay", str(out), "--index", "9"]) == EXIT_INTEGRITY

    tx = out / "transcripts.jsonl"
    lines = tx.read_text().splitlines()
    row = json.loads(lines[0])
    row["accept"] = not row["accept"]
    tx.write_text("\n".join([json.dumps(row)] + lines[1:]) + "\n")
    assert main(["replay", str(out), "--index", "0"]) == EXIT_INTEGRITY

    man_path = out / "manifest.json"
    man = json.loads(man_path.read_text())
    man["config"]["seed"] = 99
    man_path.write_text(json.dumps(man))
    assert main(["replay", str(out)]) == EXIT_INTEGRITY
    assert "integrity error" in capsys.readouterr().err


def test_threads_do_not_change_output(tmp_path):
    cfg = write(tmp_path, "c.json", base(experiment="acceptance_sweep", layout="empty-vacuum",
                                         grid={"d": [3, 5], "p": [0.01]}, trials=300, chunk_size=70))
    a, b = tmp_path / "a", tmp_path / "b"
    assert main(["run", "--config", str(cfg), "--out-dir", str(a), "--threads", "1", "--quiet"]) == EXIT_OK
    assert main(["run", "--config", str(cfg), "--out-dir", str(b), "--threads", "2", "--quiet"]) == EXIT_OK
    assert (a / "summary.csv").read_bytes() == (b / "summary.csv").read_bytes()


def test_chunk_size_does_not_change_output(tmp_path):
    rows = []
    for size in (25, 1000):
        cfg = write(tmp_path, f"c{size}.json", base(experiment="protocol_single", grid={"k": [2], "d": [3], "p": [0.01]},
                                                     trials=60, chunk_size=size))
        out = tmp_path / f"r{size}"
        assert main(["run", "--config", str(cfg), "--out-dir", str(out), "--quiet"]) == EXIT_OK
        rows.append((out / "summary.csv").read_text())
    assert rows[0] == rows[1]


def test_seed_override_changes_results(tmp_path):
    cfg = write(tmp_path, "c.json", base(experiment="acceptance_sweep", layout="empty-vacuum",
                                         grid={"d": [3], "p": [0.03]}, trials=200))
    texts = []
    for seed in ("1", "2"):
        out = tmp_path / seed
        assert main(["run", "--config", str(cfg), "--out-dir", str(out), "--seed", seed, "--quiet"]) == EXIT_OK
        texts.append((out / "summary.csv").read_text())
        assert json.loads((out / "manifest.json").read_text())["seed"] == int(seed)
    assert texts[0] != texts[1]


@pytest.mark.parametrize("raw", [
    {"experiment": "acceptance_sweep"},
    {"schema_version": 1, "experiment": "nope"},
    {"schema_version": 1, "experiment": "acceptance_sweep", "grid": {"d": [3]}},
    {"schema_version": 1, "experiment": "detection_suite", "grid": {"k": [1]}},
    {"schema_version": 1, "experiment": "acceptance_sweep", "grid": {"d": [3], "p": [1.5]}},
    {"schema_version": 1, "experiment": "acceptance_sweep", "grid": {"d": [3], "p": [0.1]}, "bogus": 1},
    {"schema_version": 1, "experiment": "acceptance_sweep", "grid": {"d": [3], "p": [0.1]}, "boundary": "open"},
])
def test_bad_configs_exit_2(tmp_path, raw, capsys):
    cfg = write(tmp_path, "bad.json", raw)
    assert main(["validate-config", "--config", str(cfg)]) == EXIT_CONFIG
    assert main(["run", "--config", str(cfg), "--out-dir", str(tmp_path / "o")]) == EXIT_CONFIG
    assert "config error" in capsys.readouterr().err


def test_missing_and_malformed_config(tmp_path):
    assert main(["validate-config", "--config", str(tmp_path / "none.json")]) == EXIT_CONFIG
    (tmp_path / "x.json").write_text("{not json")
    assert main(["validate-config", "--config", str(tmp_path / "x.json")]) == EXIT_CONFIG


def test_bad_thread_count(tmp_path):
    cfg = write(tmp_path, "c.json", base(experiment="bounds_table", grid={"p0": [1e-5], "l": [1]}))
    assert main(["run", "--config", str(cfg), "--threads", "0", "--out-dir", str(tmp_path / "o")]) == EXIT_CONFIG


def test_validate_config_reports_hash(tmp_path, capsys):
    cfg = write(tmp_path, "c.json", base(experiment="decoder_validation", grid={"d": [3]}))
    assert main(["validate-config", "--config", str(cfg)]) == EXIT_OK
    rep = json.loads(capsys.readouterr().out)
    assert rep["valid"] and rep["tasks"] == 1 and len(rep["config_sha256"]) == 64


def test_capacity_exit_code(tmp_path):
    cfg = write(tmp_path, "c.json", base(experiment="acceptance_sweep", layout="empty-vacuum",
                                         grid={"d": [5], "p": [0.2]}, trials=3, backend="exact"))
    out = tmp_path / "o"
    assert main(["run", "--config", str(cfg), "--out-dir", str(out), "--quiet"]) == EXIT_CAPACITY
    man = json.loads((out / "manifest.json").read_text())
    assert not man["complete"] and "capacity" in man["error"]
    assert (out / "summary.csv").read_text().startswith(HEADER)


def test_backend_override_avoids_capacity(tmp_path):
    cfg = write(tmp_path, "c.json", base(experiment="acceptance_sweep", layout="empty-vacuum",
                                         grid={"d": [3], "p": [0.2]}, trials=3, backend="exact"))
    out = tmp_path / "o"
    assert main(["run", "--config", str(cfg), "--out-dir", str(out), "--backend", "blossom", "--quiet"]) == EXIT_OK
    assert {r["backend"] for r in read_rows(out)} == {"blossom"}


def test_bounds_table_rows(tmp_path):
    cfg = write(tmp_path, "c.json", base(experiment="bounds_table",
                                         grid={"p0": [1e-5], "l": [2], "m": [10], "p": [1e-4], "d": [5]}))
    out = tmp_path / "o"
    assert main(["run", "--config", str(cfg), "--out-dir", str(out), "--quiet"]) == EXIT_OK
    rows = {r["metric"]: r for r in read_rows(out)}
    assert float(rows["rm_fault"]["value"]) == pytest.approx(1.3400956406e-08, rel=1e-9)
    assert {"rm_acceptance", "sf_rejection", "sf_closed_form", "p0_fault"} <= rows.keys()


def test_decoder_validation_rows(tmp_path):
    cfg = write(tmp_path, "c.json", base(experiment="decoder_validation", grid={"d": [3]}))
    out = tmp_path / "o"
    assert main(["run", "--config", str(cfg), "--out-dir", str(out), "--quiet"]) == EXIT_OK
    rows = {r["metric"]: r for r in read_rows(out)}
    for c in "BW":
        assert rows["oracle_match_rate_" + c]["value"] == "1"
        assert rows["boundary_ok_rate_" + c]["value"] == "1"


def test_detection_suite_rows(tmp_path):
    cfg = write(tmp_path, "c.json", base(
        experiment="detection_suite", grid={"k": [1]}, trials=300, records=False, early_exit=True,
        strategies=[{"kind": "single_bad_block"}, {"kind": "bad_blocks", "bad": "fail_both", "positions": [0, 2]},
                    {"kind": "block_table", "blocks": [{"bad": "fail_B"}, {"bad": "fail_W"}, {"p": 0.0}]},
                    {"kind": "honest", "p": 0.0}]))
    out = tmp_path / "o"
    assert main(["run", "--config", str(cfg), "--out-dir", str(out), "--quiet"]) == EXIT_OK
    rows = read_rows(out)
    acc = {r["strategy"]: float(r["value"]) for r in rows if r["metric"] == "accept_rate"}
    assert acc["2x_fail_both"] == 0 and acc["honest_p0.0"] == 1
    assert 0.2 < acc["single_fail_both"] < 0.47
    assert all(r["value"] == "0" for r in rows if r["metric"] == "soundness_violation")


def test_enumerate_saw(tmp_path, capsys):
    assert main(["enumerate-saw", "--nu-max", "4"]) == EXIT_OK
    assert capsys.readouterr().out == "nu,C_nu\n1,6\n2,30\n3,150\n4,726\n"
    out = tmp_path / "saw.csv"
    assert main(["enumerate-saw", "--nu-max", "3", "--out", str(out)]) == EXIT_OK
    assert out.read_text().splitlines()[-1] == "3,150"
    assert main(["enumerate-saw", "--nu-max", "0"]) == EXIT_CONFIG


def test_saw_table_feeds_bounds(tmp_path):
    saw = tmp_path / "saw.csv"
    assert main(["enumerate-saw", "--nu-max", "5", "--out", str(saw)]) == EXIT_OK
    cfg = write(tmp_path, "c.json", base(experiment="bounds_table", grid={"p": [1e-3], "d": [5]},
                                         saw_table=str(saw), layout="empty-vacuum"))
    out = tmp_path / "o"
    assert main(["run", "--config", str(cfg), "--out-dir", str(out), "--quiet"]) == EXIT_OK
    tight = {r["metric"]: float(r["value"]) for r in read_rows(out)}["p0_fault"]
    cfg2 = write(tmp_path, "c2.json", base(experiment="bounds_table", grid={"p": [1e-3], "d": [5]},
                                           layout="empty-vacuum"))
    assert main(["run", "--config", str(cfg2), "--out-dir", str(tmp_path / "o2"), "--quiet"]) == EXIT_OK
    loose = {r["metric"]: float(r["value"]) for r in read_rows(tmp_path / "o2")}["p0_fault"]
    assert 0 < tight < loose


def test_plot_flag_writes_figures(tmp_path):
    pytest.importorskip("matplotlib")
    cfg = write(tmp_path, "c.json", base(experiment="acceptance_sweep", layout="empty-vacuum",
                                         grid={"d": [3, 5], "p": [0.01]}, trials=50))
    out = tmp_path / "o"
    assert main(["run", "--config", str(cfg), "--out-dir", str(out), "--plot", "--quiet"]) == EXIT_OK
    assert (out / "block_rejection.png").stat().st_size > 1000
    assert "block_rejection.png" in json.loads((out / "manifest.json").read_text())["files"]


def test_version(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["--version"])
    assert exc.value.code == 0
    assert "0.1.0" in capsys.readouterr().out
