"""Command-line interface: exit codes, reports, determinism."""

import io
import json
import os

import pytest

from hpt.cli import main


def run_cli(args):
    out = io.StringIO()
    code = main(args, out=out)
    return code, out.getvalue()


@pytest.fixture()
def tmp_hpt(tmp_path):
    def write(name, text):
        p = tmp_path / name
        p.write_text(text)
        return str(p)

    return write


def test_check_empty_file(tmp_hpt):
    path = tmp_hpt("empty.hpt", "")
    code, out = run_cli(["check", path])
    assert code == 0
    assert "0 declaration(s)" in out


def test_check_reports_unbound_name(tmp_hpt):
    path = tmp_hpt("bad.hpt", "def f : missing := missing\n")
    code, out = run_cli(["check", path])
    assert code == 1
    assert f"{path}:1:9: error:" in out
    assert "unbound name" in out


def test_check_continues_across_files(tmp_hpt):
    bad = tmp_hpt("a.hpt", "def f : missing := missing\n")
    good = tmp_hpt("b.hpt", "axiom B : Type\naxiom b : B\n")
    code, out = run_cli(["check", bad, good])
    assert code == 1
    assert "2 declaration(s)" in out  # the second file still checked


def test_check_stops_within_file(tmp_hpt):
    path = tmp_hpt(
        "c.hpt", "axiom B : Type\ndef f : missing := missing\naxiom c : B\n"
    )
    code, out = run_cli(["check", path])
    assert code == 1
    assert "1 declaration(s)" in out  # nothing after the error in the file


def test_check_open_corpus(tmp_hpt):
    path = tmp_hpt(
        "use.hpt",
        "def my-loops (p : refl star = refl star) : refl star = refl star := p * p\n"
        "#assert defeq concat (refl star) (refl star) ~ refl star : star = star\n",
    )
    code, out = run_cli(["check", "--open-corpus", path])
    assert code == 0
    assert "1 assertion(s) passed" in out


def test_check_json_schema(tmp_hpt):
    path = tmp_hpt("bad.hpt", "def f : missing := missing\n")
    code, out = run_cli(["check", "--json", path])
    assert code == 1
    data = json.loads(out)
    assert set(data) == {
        "files",
        "declarations_checked",
        "assertions_passed",
        "assertions_failed",
        "diagnostics",
    }
    assert data["files"] == [path]
    (diag,) = data["diagnostics"]
    assert set(diag) == {"severity", "file", "line", "col", "message"}
    assert diag["severity"] == "error"
    assert diag["line"] == 1


def test_failed_assertion_sets_exit_code(tmp_hpt):
    path = tmp_hpt(
        "assert.hpt",
        "axiom B : Type\naxiom x : B\naxiom y : B\n"
        "axiom p : x = y\n"
        "#assert defeq x ~ y : B\n",
    )
    code, out = run_cli(["check", path])
    assert code == 1
    assert "definitional assertion failed" in out


def test_eval_corpus_reduction():
    code, out = run_cli(
        ["eval", "--open-corpus", "-e", "EH (refl (refl star)) (refl (refl star))"]
    )
    assert code == 0
    assert out.splitlines()[0] == "value: refl (refl (refl star))"


def test_eval_type_universe():
    code, out = run_cli(["eval", "-e", "Type"])
    assert code == 0
    assert out.splitlines() == ["value: Type", "type: Type 1"]


def test_eval_non_function_error():
    code, out = run_cli(["eval", "--open-corpus", "-e", "star star"])
    assert code == 1
    assert "error" in out


def test_eval_requires_expression():
    code, _ = run_cli(["eval"])
    assert code == 2


def test_usage_error_exit_code():
    code, _ = run_cli(["frobnicate"])
    assert code == 2


def test_corpus_command_passes():
    code, out = run_cli(["corpus"])
    assert code == 0
    assert "ok   §4 Theorem (Syllepsis)  [theorem] syllepsis" in out
    assert "0 failed" in out


def test_corpus_command_deterministic():
    code1, out1 = run_cli(["corpus"])
    code2, out2 = run_cli(["corpus"])
    assert (code1, out1) == (code2, out2)


def test_corpus_json_agrees_with_counts():
    code, out = run_cli(["corpus", "--json"])
    assert code == 0
    data = json.loads(out)
    assert data["assertions_failed"] == 0
    man_count = data["declarations_checked"]
    code2, human = run_cli(["corpus"])
    assert f"{man_count} declaration(s)" in human


def test_corpus_missing_file_names_missing_global(tmp_path, monkeypatch):
    from hpt import corpus as corpus_mod

    src = corpus_mod.corpus_dir()
    for p in src.glob("*.hpt"):
        if not p.name.startswith("02-"):
            (tmp_path / p.name).write_text(p.read_text())
    (tmp_path / "manifest.tsv").write_text((src / "manifest.tsv").read_text())
    monkeypatch.setenv("HPT_CORPUS_DIR", str(tmp_path))
    code, out = run_cli(["corpus"])
    assert code == 1
    assert "whisk-L" in out or "whisk-R" in out  # names the missing global


def test_check_missing_file_is_io_diagnostic():
    code, out = run_cli(["check", "/nonexistent/nope.hpt"])
    assert code == 1
    assert "cannot read file" in out


def test_check_corpus_files_directly():
    import re

    from hpt import corpus as corpus_mod

    files = [str(corpus_mod.corpus_dir() / fn) for fn, _ in corpus_mod.prelude_sources()]
    code, out = run_cli(["check", *files])
    assert code == 0
    m = re.search(r"(\d+) declaration\(s\)", out)
    assert m and int(m.group(1)) >= 25
    assert "0 failed" in out


def test_check_prints_eval_directives(tmp_hpt):
    path = tmp_hpt("ev.hpt", "axiom B : Type\naxiom b : B\n#eval refl b\n#check b\n")
    code, out = run_cli(["check", path])
    assert code == 0
    assert f"{path}:3: refl b : b = b" in out
    assert f"{path}:4: b : B" in out
