import json

import pytest

from sieve_mmr.cli import SWEEP_COLUMNS, main


def run_cli(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def test_run_fig3_report(capsys):
    code, out, err = run_cli(capsys, "run", "fig3", "--seed", "7", "--show-filtered", "2")
    assert code == 0
    report = json.loads(out)
    assert report["seed"] == 7
    assert all(v["status"] in ("pass", "na") for v in report["verdicts"].values())
    assert "step 2 n1: {c, n1@1, n2@1}" in err


def test_run_fig2_no_filter_is_a_demonstration(capsys):
    code, out, _ = run_cli(capsys, "run", "fig2", "--mode", "no-filter")
    report = json.loads(out)
    assert report["verdicts"]["TTRB1"]["status"] == "fail"
    assert report["demonstration"] and code == 0


def test_rejected_scenario_exit_code(capsys, tmp_path):
    src = tmp_path / "s.yaml"
    from sieve_mmr.sim import resolve

    src.write_text(resolve("supremacy-violation").read_text().replace("violation_experiment: true", "violation_experiment: false"))
    code, out, _ = run_cli(capsys, "run", str(src))
    assert code == 3 and json.loads(out)["rejected"]


def test_trace_and_report_files(capsys, tmp_path):
    trace, report = tmp_path / "t.jsonl", tmp_path / "r.json"
    code, out, _ = run_cli(capsys, "run", "all-correct", "--horizon", "4", "--trace", str(trace), "--report", str(report))
    assert code == 0 and out == ""
    lines = trace.read_text().splitlines()
    assert lines and all(json.loads(l)["kind"] for l in lines)
    assert json.loads(report.read_text())["scenario"] == "all-correct"


def test_trace_digest_is_stable(capsys):
    _, a, _ = run_cli(capsys, "run", "fig5", "--trace-digest")
    _, b, _ = run_cli(capsys, "run", "fig5", "--trace-digest")
    assert a == b and len(a.strip()) == 64


def test_report_is_byte_identical(capsys, tmp_path):
    outs = []
    for i in range(2):
        p = tmp_path / f"r{i}.json"
        run_cli(capsys, "run", "adversarial-leader", "--seed", "4", "--horizon", "10", "--report", str(p))
        outs.append(p.read_bytes())
    assert outs[0] == outs[1]


def test_sweep_table(capsys):
    code, out, _ = run_cli(capsys, "sweep", "all-correct", "--seeds", "0:3", "--horizon", "8")
    rows = [l.split("\t") for l in out.splitlines()]
    assert rows[0] == list(SWEEP_COLUMNS)
    assert [r[0] for r in rows[1:]] == ["0", "1", "2", "all"]
    col = SWEEP_COLUMNS.index("block_latency_min")
    assert {r[col] for r in rows[1:]} == {"3"}
    assert code == 0


def test_sweep_empty_range(capsys, tmp_path):
    out_file = tmp_path / "t.tsv"
    code, _, _ = run_cli(capsys, "sweep", "all-correct", "--seeds", "5:5", "--output", str(out_file))
    assert code == 0
    assert out_file.read_text() == "\t".join(SWEEP_COLUMNS) + "\n"


def test_pow_tune(capsys):
    code, out, _ = run_cli(capsys, "pow", "tune", "--target-bits", "40", "--min-work", "1/2")
    assert code == 0 and out.strip() == "k = 40"


def test_pow_prove_verify(capsys, tmp_path):
    proof = tmp_path / "p.bin"
    code, _, _ = run_cli(capsys, "pow", "prove", "--chi", "c0ffee", "--w", "64", "--k", "8", "--out", str(proof))
    assert code == 0
    code, out, _ = run_cli(capsys, "pow", "verify", "--chi", "c0ffee", "--w", "64", "--k", "8", "--proof", str(proof))
    assert code == 0 and out.strip() == "valid"
    code, out, _ = run_cli(capsys, "pow", "verify", "--chi", "c0ffef", "--w", "64", "--k", "8", "--proof", str(proof))
    assert code == 1 and out.strip() == "invalid"
    proof.write_bytes(proof.read_bytes()[:-10])
    code, _, err = run_cli(capsys, "pow", "verify", "--chi", "c0ffee", "--w", "64", "--k", "8", "--proof", str(proof))
    assert code == 2 and "malformed proof" in err


def test_pow_weight_too_small(capsys, tmp_path):
    code, _, err = run_cli(capsys, "pow", "prove", "--chi", "00", "--w", "4", "--k", "8", "--out", str(tmp_path / "x"))
    assert code == 2 and "weight too small" in err


def test_errors_and_help(capsys):
    code, _, err = run_cli(capsys, "run", "does-not-exist")
    assert code == 2 and "not found" in err
    code, out, _ = run_cli(capsys, "validate", "fig3")
    assert code == 0 and out.startswith("fig3: ok")
    with pytest.raises(SystemExit):
        main(["--help"])
    out, _ = capsys.readouterr()
    assert "SIEVE_MMR_SCENARIOS" in out
    with pytest.raises(SystemExit):
        main(["run", "--help"])
    out, _ = capsys.readouterr()
    for flag in ("--seed", "--mode", "--trace", "--trace-digest", "--backend", "--horizon"):
        assert flag in out
