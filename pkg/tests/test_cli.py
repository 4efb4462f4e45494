import json
from pathlib import Path

import pytest

from mso2mpa import cli, compiler
from mso2mpa.automata import Verdict


@pytest.fixture()
def workdir(tmp_path):
    (tmp_path / "leaf.mso").write_text("!exists y. E(x,y)\n", encoding="utf-8")
    (tmp_path / "bad.mso").write_text("exists y. (p(y)\n", encoding="utf-8")
    (tmp_path / "chain.tree").write_text("({} ({p}) ({q}))\n", encoding="utf-8")
    (tmp_path / "prop.gmsc").write_text(
        "X(0) :- p;\nX :- dia>=1 X;\nappointed: X;\n", encoding="utf-8"
    )
    return tmp_path


def test_compile_reports_stats(workdir):
    out = workdir / "out"
    rc = cli.main([
        "compile", "--formula", str(workdir / "leaf.mso"),
        "--stage", "fixed-point", "--out", str(out),
    ])
    assert rc == 0
    report = (out / "compile_report.txt").read_text(encoding="utf-8")
    assert "fixed_point" in report and "bound=" in report
    payload = json.loads((out / "automaton.json").read_text(encoding="utf-8"))
    assert payload["deterministic"] is True


def test_compile_final_from_raw_formula_warns(workdir, capsys):
    out = workdir / "out"
    rc = cli.main([
        "compile", "--formula", str(workdir / "leaf.mso"),
        "--stage", "final", "--out", str(out), "--seed-max-nodes", "4",
    ])
    assert rc == 0
    assert "obligation" in capsys.readouterr().err


def test_malformed_formula_exits_2(workdir):
    rc = cli.main([
        "compile", "--formula", str(workdir / "bad.mso"),
        "--out", str(workdir / "out"),
    ])
    assert rc == 2


def test_budget_exhaustion_exits_3(workdir):
    rc = cli.main([
        "check", "--gml", "dia>=1 (p & dia>=1 q)", "--stage", "final",
        "--max-nodes", "4", "--state-budget", "2000",
        "--seed-max-nodes", "4", "--out", str(workdir / "out"),
    ])
    assert rc == 3


def test_check_leaf_formula(workdir):
    out = workdir / "out"
    rc = cli.main([
        "check", "--formula", str(workdir / "leaf.mso"),
        "--stage", "fixed-point", "--max-nodes", "4", "--out", str(out),
    ])
    assert rc == 0
    tsv = (out / "check_fixed_point.tsv").read_text(encoding="utf-8").splitlines()
    assert tsv[0] == "case\tformula\toracle\tverdict\trounds\tagree"
    assert all(line.endswith("\t1") for line in tsv[1:])


def test_check_omnipresent_stage(workdir):
    rc = cli.main([
        "check", "--gml", "dia>=1 p", "--stage", "omnipresent",
        "--max-nodes", "4", "--out", str(workdir / "out"),
    ])
    assert rc == 0


def test_check_is_byte_deterministic(workdir):
    out_a, out_b = workdir / "a", workdir / "b"
    for out in (out_a, out_b):
        rc = cli.main([
            "check", "--gml", "dia>=1 p", "--stage", "final",
            "--max-nodes", "3", "--out", str(out),
        ])
        assert rc == 0
    assert (out_a / "check_final.tsv").read_bytes() == (out_b / "check_final.tsv").read_bytes()


def test_check_detects_injected_bug(workdir, monkeypatch):
    # a build whose verdicts are swapped must be caught with exit code 1
    real = compiler.evaluate_at_root

    def sabotaged(unit, tree, stage, **kwargs):
        got = real(unit, tree, stage, **kwargs)
        flip = {Verdict.ACCEPT: Verdict.NEITHER, Verdict.NEITHER: Verdict.ACCEPT,
                Verdict.REJECT: Verdict.ACCEPT}
        return flip[got]

    monkeypatch.setattr(cli.compiler, "evaluate_at_root", sabotaged)
    rc = cli.main([
        "check", "--gml", "p", "--stage", "final",
        "--max-nodes", "3", "--out", str(workdir / "out"),
    ])
    assert rc == 1
    summary = (workdir / "out" / "check_final_summary.txt").read_text(encoding="utf-8")
    assert "first_counterexample" in summary


def test_check_random_corpus_deterministic(workdir):
    out_a, out_b = workdir / "ra", workdir / "rb"
    for out in (out_a, out_b):
        rc = cli.main([
            "check", "--gml", "p", "--stage", "fixed-point", "--random", "12",
            "--seed", "5", "--max-nodes", "5", "--out", str(out),
        ])
        assert rc == 0
    assert (out_a / "check_fixed_point.tsv").read_bytes() == (
        out_b / "check_fixed_point.tsv"
    ).read_bytes()


def test_figures_rendered(workdir):
    out = workdir / "out"
    rc = cli.main([
        "check", "--gml", "p", "--stage", "final", "--max-nodes", "3",
        "--out", str(out), "--figures",
    ])
    assert rc == 0
    assert (out / "check_final_agreement.png").exists()
    assert (out / "check_final_rounds.png").exists()


def test_run_writes_trace(workdir):
    out = workdir / "out"
    rc = cli.main([
        "run", "--formula-text", "exists y. (E(x,y) & p(y))",
        "--stage", "fixed-point", "--tree", str(workdir / "chain.tree"),
        "--out", str(out),
    ])
    assert rc == 0
    lines = (out / "trace.tsv").read_text(encoding="utf-8").splitlines()
    assert lines[0] == "round\tnode\tstate_debug_name"
    assert len(lines) > 3


def test_run_zero_rounds(workdir):
    out = workdir / "out0"
    rc = cli.main([
        "run", "--gmsc", str(workdir / "prop.gmsc"),
        "--tree", str(workdir / "chain.tree"),
        "--max-rounds", "0", "--out", str(out),
    ])
    assert rc == 0
    lines = (out / "trace.tsv").read_text(encoding="utf-8").splitlines()
    assert {line.split("\t")[0] for line in lines[1:]} == {"0"}


def test_gmsc_command_compares(workdir, capsys):
    rc = cli.main([
        "gmsc", "--program", str(workdir / "prop.gmsc"),
        "--tree", str(workdir / "chain.tree"), "--compare",
        "--out", str(workdir / "out"),
    ])
    assert rc == 0
    captured = capsys.readouterr().out
    assert "accepts node 0: True" in captured
    assert "agrees" in captured


def test_gnn_command(workdir):
    out = workdir / "out"
    rc = cli.main([
        "gnn", "--program", str(workdir / "prop.gmsc"),
        "--tree", str(workdir / "chain.tree"), "--out", str(out),
    ])
    assert rc == 0
    lines = (out / "gnn_trace.tsv").read_text(encoding="utf-8").splitlines()
    assert lines[0] == "round\tnode\tvector"


def test_fuzz_deterministic_and_green(workdir):
    out_a, out_b = workdir / "fa", workdir / "fb"
    for out in (out_a, out_b):
        rc = cli.main([
            "fuzz", "--seed", "13", "--cases", "40", "--max-nodes", "5",
            "--out", str(out),
        ])
        assert rc == 0
    assert (out_a / "fuzz_report.txt").read_bytes() == (out_b / "fuzz_report.txt").read_bytes()


def test_fuzz_single_property(workdir):
    rc = cli.main([
        "fuzz", "--seed", "3", "--cases", "30", "--max-nodes", "5",
        "--property", "run-set-equality", "--out", str(workdir / "out"),
    ])
    assert rc == 0
    report = (workdir / "out" / "fuzz_report.txt").read_text(encoding="utf-8")
    assert "run-set-equality: ok" in report
    assert "cap-idempotence" not in report
