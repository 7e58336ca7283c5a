import csv
import io
import json

import pytest

from discfrac.cli import run


def invoke(*argv):
    buf = io.StringIO()
    code = run(list(argv), stdout=buf)
    return code, buf.getvalue()


def parse_csv(text):
    lines = text.splitlines()
    assert lines[0].startswith("# config: ")
    config = json.loads(lines[0][len("# config: "):])
    summary = None
    body = [l for l in lines[1:] if not l.startswith("#")]
    for l in lines:
        if l.startswith("# summary: "):
            summary = json.loads(l[len("# summary: "):])
    rows = list(csv.DictReader(body))
    return config, rows, summary


def parse_jsonl(text):
    objs = [json.loads(l) for l in text.splitlines()]
    assert "config" in objs[0]
    return objs


def test_jacobi_check():
    code, out = invoke("repcount", "--jacobi-check", "--max", "10000")
    assert code == 0
    config, rows, summary = parse_csv(out)
    assert len(rows) == 10000 and all(r["ok"] == "true" for r in rows)
    assert summary["all_ok"] and config["max"] == 10000


def test_profile_csv_with_summary():
    code, out = invoke("profile", "--gamma", "euclid-sq", "--tau", "euclid", "--s", "2", "--jmax", "4")
    assert code == 0
    config, rows, summary = parse_csv(out)
    assert [int(r["M_j"]) for r in rows] == [4, 8, 16, 24, 32]
    assert summary["policy"] == "all-feasible" and summary["slope"] is not None
    assert config["subcommand"] == "profile" and config["jmax"] == 4


def test_shells_table():
    code, out = invoke("shells", "--tau", "hyperbolic", "--jmax", "6")
    assert code == 0
    _, rows, summary = parse_csv(out)
    assert [int(r["count"]) for r in rows] == [12, 80, 456, 2368, 11584, 54936, 253616]
    assert summary["constant"] / summary["floor"] <= 3


def test_records_and_counts():
    code, out = invoke("repcount", "--s", "3", "--k", "2", "--max", "100", "--records")
    assert code == 0
    _, rows, _ = parse_csv(out)
    assert (rows[0]["N"], rows[0]["r"]) == ("3", "1") and (rows[1]["N"], rows[1]["r"]) == ("6", "3")
    code, out = invoke("repcount", "--s", "2", "--k", "2", "--max", "5", "--mode", "signed-squares")
    assert [int(r["r"]) for r in parse_csv(out)[1]] == [4, 4, 0, 4, 8]


def test_diocount():
    code, out = invoke("diocount", "--j", "0", "--n", "0,0", "--t", "2", "--format", "jsonl")
    assert code == 0
    assert parse_jsonl(out)[1]["count"] == 4
    code, out = invoke("diocount", "--j", "1", "--s", "2")
    _, rows, summary = parse_csv(out)
    assert sum(int(r["count"]) for r in rows) == 36**2 == summary["total"]
    code, out = invoke("diocount", "--j", "2", "--reduction-check", "--gamma", "hyperbolic", "--format", "jsonl")
    rec = parse_jsonl(out)[1]
    assert rec["ok"] and rec["mismatches"] == 0


def test_operator():
    code, out = invoke("operator", "--at", "3,4,25", "--format", "jsonl")
    assert parse_jsonl(out)[1]["value"] == pytest.approx(0.2)
    code, out = invoke("operator", "--box", "1", "--tmin", "0", "--tmax", "2")
    _, rows, summary = parse_csv(out)
    assert len(rows) == 8 and summary["support"] == 8
    code, out = invoke("operator", "--trivial-check", "--f", "random:3:10", "--format", "jsonl")
    assert parse_jsonl(out)[1]["l1_ok"]


def test_diverge():
    code, out = invoke("diverge", "--family", "delta", "--k", "2", "--lam", "0.5", "--q", "1")
    assert code == 0
    _, rows, summary = parse_csv(out)
    assert len(rows) == 9 and abs(summary["exponent"] - 1) <= 0.15


def test_region_and_grid():
    code, out = invoke("region", "--inv-p", "0.9", "--inv-q", "0.2")
    assert parse_jsonl(out)[1]["verdict"] == "inside-sufficient"
    code, out = invoke("region", "--grid", "0.05")
    objs = parse_jsonl(out)[1:]
    assert len(objs) == 21 * 21
    assert not any(o["verdict"] == "inside-sufficient" and not o["necessary"] for o in objs)


def test_christ():
    code, out = invoke("christ", "--side", "5", "--alpha", "0.75")
    rec = parse_jsonl(out)[1]
    assert code == 0 and rec["violations"] == [] and rec["F_sizes"][0] > 0


def test_reruns_are_identical():
    a = invoke("profile", "--s", "2", "--jmax", "3")
    b = invoke("profile", "--s", "2", "--jmax", "3")
    assert a == b
    c = invoke("profile", "--s", "2", "--jmax", "3", "--workers", "2")
    assert a[1].splitlines()[1:] == c[1].splitlines()[1:]


def test_output_file(tmp_path):
    path = tmp_path / "rows.csv"
    code, out = invoke("shells", "--jmax", "3", "--out", str(path))
    assert code == 0 and out == ""
    text = path.read_bytes()
    assert b"\r\n" not in text and text.startswith(b"# config: ")


@pytest.mark.parametrize("argv", [
    ["profile", "--gamma", "cubic"],
    ["profile", "--jmax", "99"],
    ["profile", "--s", "3", "--policy", "degenerate-only", "--jmax", "1"],
    ["repcount", "--max", "0"],
    ["region", "--lam", "1.5", "--inv-p", "0.5", "--inv-q", "0.5"],
    ["diocount", "--n", "1,2,3", "--t", "4"],
    ["diverge", "--tmax", "2"],
    ["shells", "--bogus"],
])
def test_invalid_parameters(argv, capsys):
    code, _ = invoke(*argv)
    assert code == 2
    err = capsys.readouterr().err.strip()
    if err.startswith("{"):
        assert json.loads(err)["error"] == "invalid-parameters"


def test_budget_exceeded(capsys):
    code, out = invoke("diocount", "--s", "3", "--j", "5", "--max-entries", "1000")
    assert code == 3 and out == ""
    rec = json.loads(capsys.readouterr().err.strip())
    assert rec["error"] == "budget-exceeded" and rec["config"]["max_entries"] == 1000
