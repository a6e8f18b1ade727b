import io
import json
import subprocess
import sys

import pytest

from forcinglab import cli
from forcinglab.cichon import fixtures


def run(*argv):
    buf = io.StringIO()
    code = cli.main(list(argv), out=buf)
    return code, buf.getvalue()


def write(tmp_path, name, doc):
    p = tmp_path / name
    p.write_text(doc if isinstance(doc, str) else json.dumps(doc))
    return str(p)


def test_cichon_fixtures():
    code, text = run("cichon", "fixtures")
    assert code == 0
    rows = json.loads(text)
    assert {r["name"] for r in rows} == set(fixtures())
    assert all(r["violations"] == [] for r in rows)


def test_cichon_enumerate():
    code, text = run("cichon", "enumerate")
    assert code == 0 and json.loads(text)["count"] == 23


def test_cichon_check_exit_codes(tmp_path):
    ten = {k: v for k, v in fixtures()["ten"].items() if k not in ("addM", "cofM")}
    assert run("cichon", "check", write(tmp_path, "ok.json", ten))[0] == 0
    bad = dict(ten, d=1)
    code, text = run("cichon", "check", write(tmp_path, "bad.json", bad))
    assert code == 1 and "b≤d" in json.loads(text)["violations"]
    assert run("cichon", "check", write(tmp_path, "short.json", {"b": 1}))[0] == 2
    assert run("cichon", "check")[0] == 2


def test_probtree_cdf():
    assert run("probtree", "cdf", "--l", "1", "--n", "2", "--p", "1/2") == (0, "3/4\n")


def test_probtree_rejects_float_probability(capsys):
    assert run("probtree", "cdf", "--l", "1", "--n", "2", "--p", "0.5")[0] == 2
    assert "exact rational" in capsys.readouterr().err


def test_probtree_find_k():
    code, text = run("probtree", "find-k", "--loss", "1/4")
    assert code == 0 and json.loads(text) == {"k": 0, "intervalSize": 1}
    code, text = run("probtree", "find-k", "--sizes", "1,2", *["--loss", "1/2"] * 30)
    assert code == 1 and json.loads(text)["k"] is None


def test_probtree_simulate_deterministic():
    a = run("probtree", "simulate", "--trials", "2", "--seed", "3")
    b = run("probtree", "simulate", "--trials", "2", "--seed", "3")
    assert a == b and a[0] == 0


def test_verify_ramsey_deterministic():
    a = run("verify", "ramsey", "--trials", "100", "--seed", "42")
    b = run("verify", "ramsey", "--trials", "100", "--seed", "42")
    assert a == b
    assert a[0] == 0 and json.loads(a[1])["violations"] == []


def test_verify_other_suites():
    for suite in ("loss", "linked", "measure"):
        code, text = run("verify", suite, "--trials", "5", "--seed", "1")
        assert code == 0, suite
        assert json.loads(text)["suite"] == suite


def test_bad_json_reports_position(tmp_path, capsys):
    path = write(tmp_path, "broken.json", '{\n  "b": 1,\n  oops\n}')
    assert run("cichon", "check", path)[0] == 2
    err = capsys.readouterr().err
    assert f"{path}:3:3:" in err


def test_usage_errors(capsys):
    assert run("nonsense")[0] == 2
    assert run("verify", "ramsey", "--trials", "x")[0] == 2
    assert run("delta", "extract")[0] == 2
    assert run("fam", "approx", "--input", "/nonexistent/file.json")[0] == 2


def test_params_json_and_csv():
    code, text = run("params", "--hmax", "1", "--verify")
    doc = json.loads(text)
    assert code == 0
    assert {"h": 1, "field": "pi", "exact": str(2 ** 160)} in doc["records"]
    assert all(c["passed"] for c in doc["identities"])
    code, text = run("params", "--hmax", "1", "--format", "csv")
    lines = text.splitlines()
    assert code == 0 and lines[0] == "h,field,exact,log2lo,log2hi,logDepth"
    assert "0,rho,2,,," in lines


def test_precision_env(monkeypatch):
    monkeypatch.setenv(cli.PRECISION_ENV, "3")
    assert run("probtree", "cdf", "--n", "1")[0] == 2
    monkeypatch.setenv(cli.PRECISION_ENV, "128")
    assert run("probtree", "cdf", "--l", "0", "--n", "1", "--p", "1/3") == (0, "2/3\n")


def test_delta_extract_and_cover(tmp_path):
    lab = ["S3", "s", "1/4"]
    fam = {"family": [{"coords": [0, k], "labels": [lab, lab]} for k in (1, 2, 3)], "minSize": 3}
    code, text = run("delta", "extract", "--input", write(tmp_path, "d.json", fam))
    assert code == 0 and json.loads(text)["delta"]["heart"] == [0]
    cov = {"partials": [{"0": "a"}, {"0": "b"}, {"1": "a"}], "labels": {"0": ["a", "b"], "1": ["a"]}}
    code, text = run("delta", "cover", "--input", write(tmp_path, "c.json", cov))
    assert code == 0 and json.loads(text)["uncovered"] == []


def test_fam_commands(tmp_path):
    assignment = {"window": 8, "sets": {"A0": [0, 2, 4, 6]},
                  "atomWeights": [{"atom": [0, 2, 4, 6], "w": "1/2"}, {"atom": [1, 3, 5, 7], "w": "1/2"}]}
    code, text = run("fam", "approx", "--input",
                     write(tmp_path, "a.json", {"assignment": assignment, "eps": "1/2", "kStar": 0}))
    doc = json.loads(text)
    assert code == 0 and doc["ok"] and doc["perSetError"] == {"A0": "0/1"}
    code, text = run("fam", "check", "--input",
                     write(tmp_path, "b.json", {"assignment": assignment, "candidates": [[0, 1], [2, 3]]}))
    assert code == 1 and json.loads(text)["intersectionHypothesis"] is False


def test_limit_commands(tmp_path):
    space = {"succCount": [2, 2, 100, 2], "base": [2, 2, 17, 730]}
    member = {"nodes": [[], [0], [0, 1]] + [[0, 1, i] for i in range(100) if i != 4]
              + [[0, 1, i, j] for i in range(100) if i != 4 for j in range(2)]}
    fam = {"stem": [0, 1], "loss": "1/3", "offset": 0, "strict": False, "members": [member] * 2}
    doc = {"space": space, "partition": [0, 1, 2], "families": [fam], "weights": {"0": "1/2", "1": "1/2"}}
    path = write(tmp_path, "l.json", doc)
    code, text = run("limit", "build-qk", "--input", path, "--k", "1")
    assert code == 0 and json.loads(text)["branchViolations"] == []
    code, text = run("limit", "weighted", "--input", path)
    assert code == 0 and json.loads(text)["stem"] == [0, 1]


def test_module_entry_point():
    r = subprocess.run([sys.executable, "-m", "forcinglab", "probtree", "cdf", "--l", "1", "--n", "2",
                        "--p", "1/2"], capture_output=True, text=True)
    assert r.returncode == 0 and r.stdout == "3/4\n"
    r = subprocess.run([sys.executable, "-m", "forcinglab", "bogus"], capture_output=True, text=True)
    assert r.returncode == 2
