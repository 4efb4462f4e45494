"""Command-line front end.

Commands: ``compile``, ``check``, ``run``, ``fuzz``, ``gmsc``, ``gnn``.
Every path is deterministic given its inputs and ``--seed``; reports are
plain text and TSV (figures opt-in via ``--figures``).

Exit codes: 0 success, 1 semantic disagreement or property failure,
2 input error, 3 resource budget exceeded.
"""

from __future__ import annotations

import argparse
import random
import sys
from pathlib import Path

from . import automata, compiler, gnn, logic, trees
from .automata import Verdict
from .errors import (
    BudgetExceededError,
    HorizonExceededError,
    Mso2MpaError,
    ParseError,
    SizeLimitError,
    StateBudgetExceededError,
    UnboundVariableError,
    UndecidableError,
    UnsupportedProgramError,
)
from .report import CaseResult, CheckReport, write_check_report, write_stage_figure

STAGE_NAMES = {
    "fixed-point": "fixed_point",
    "omnipresent": "omnipresent",
    "final": "final",
}

BUDGET_ERRORS = (
    BudgetExceededError,
    StateBudgetExceededError,
    SizeLimitError,
    HorizonExceededError,
    UndecidableError,
)


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.handler(args)
    except (ParseError, UnboundVariableError, UnsupportedProgramError, ValueError) as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return 2
    except BUDGET_ERRORS as exc:
        print(f"budget exceeded: {exc}", file=sys.stderr)
        return 3
    except Mso2MpaError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mso2mpa",
        description="Compile node-property formulas over labeled trees into "
        "message-passing automata, simulate them, and check them against "
        "brute-force oracles.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def shared(p):
        p.add_argument("--max-nodes", type=int, default=6)
        p.add_argument("--max-rounds", type=int, default=64)
        p.add_argument("--state-budget", type=int, default=200_000)
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--out", type=Path, default=Path("out"))

    def formula_opts(p):
        p.add_argument("--formula", type=Path, help="file with a node-property formula")
        p.add_argument("--formula-text", help="the formula itself")
        p.add_argument("--gml", help="modal formula, translated internally")
        p.add_argument("--sig", default="", help="comma-separated proposition symbols")
        p.add_argument(
            "--stage",
            choices=sorted(STAGE_NAMES),
            default="fixed-point",
        )
        p.add_argument("--seed-max-nodes", type=int, default=6)

    p = sub.add_parser("compile", help="compile a formula and report stage statistics")
    formula_opts(p)
    shared(p)
    p.add_argument("--figures", action="store_true")
    p.set_defaults(handler=cmd_compile)

    p = sub.add_parser("check", help="differential-check a compiled stage against the oracle")
    formula_opts(p)
    shared(p)
    p.add_argument("--random", type=int, default=0, help="random cases instead of exhaustive")
    p.add_argument("--figures", action="store_true")
    p.set_defaults(handler=cmd_check)

    p = sub.add_parser("run", help="run an automaton on a tree and write the trace")
    formula_opts(p)
    shared(p)
    p.add_argument("--gmsc", type=Path, help="rule program instead of a formula")
    p.add_argument("--tree", type=Path, required=True)
    p.set_defaults(handler=cmd_run)

    p = sub.add_parser("fuzz", help="seeded property fuzzing")
    shared(p)
    p.add_argument("--cases", type=int, default=1000)
    p.add_argument(
        "--property",
        choices=sorted(FUZZ_PROPERTIES),
        action="append",
        help="restrict to specific properties (default: all)",
    )
    p.set_defaults(handler=cmd_fuzz)

    p = sub.add_parser("gmsc", help="evaluate a rule program on a tree")
    shared(p)
    p.add_argument("--program", type=Path, required=True)
    p.add_argument("--tree", type=Path, required=True)
    p.add_argument("--node", type=int, default=0)
    p.add_argument("--compare", action="store_true", help="also run the compiled automaton")
    p.set_defaults(handler=cmd_gmsc)

    p = sub.add_parser("gnn", help="run an embedded network on a tree")
    shared(p)
    p.add_argument("--program", type=Path, help="rule program to embed")
    p.add_argument("--identity-demo", action="store_true", help="one-feature pass-through net")
    p.add_argument("--tree", type=Path, required=True)
    p.set_defaults(handler=cmd_gnn)

    return parser


def _load_formula(args):
    sources = [s for s in (args.formula, args.formula_text, args.gml) if s]
    if len(sources) != 1:
        raise ValueError("give exactly one of --formula, --formula-text, --gml")
    signature = {s for s in args.sig.split(",") if s}
    if args.gml:
        modal = logic.parse_gml(args.gml)
        formula = logic.gml_to_mso(modal, "x")
        props = _gml_props(modal)
        return formula, signature | props, modal
    text = args.formula.read_text(encoding="utf-8") if args.formula else args.formula_text
    formula = logic.parse_mso(text)
    free_fo, free_so = logic.free_variables(formula)
    props = _mso_props(formula, free_so)
    return formula, signature | props, None


def _mso_props(formula, free_so) -> set:
    props = set()

    def walk(f):
        if isinstance(f, logic.Atom):
            if not logic.is_set_variable_name(f.pred):
                props.add(f.pred)
        elif isinstance(f, logic.Not):
            walk(f.body)
        elif isinstance(f, logic.And):
            walk(f.left)
            walk(f.right)
        elif isinstance(f, (logic.ExistsNode, logic.ExistsSet)):
            walk(f.body)

    walk(formula)
    return props


def _gml_props(modal) -> set:
    props = set()

    def walk(f):
        if isinstance(f, logic.Prop):
            props.add(f.name)
        elif isinstance(f, logic.GNot):
            walk(f.body)
        elif isinstance(f, logic.GOr):
            walk(f.left)
            walk(f.right)
        elif isinstance(f, logic.Diamond):
            walk(f.body)

    walk(modal)
    return props


def _compile_unit(args):
    formula, signature, modal = _load_formula(args)
    stage = STAGE_NAMES[args.stage]
    if stage != "fixed_point" and modal is None:
        free_fo, _ = logic.free_variables(formula)
        if len(free_fo) != 1:
            raise ValueError("later stages need exactly one free node variable")
        print(
            "note: later stages assume the formula is equivalent to a finite "
            "modal disjunction; that is the caller's obligation for raw "
            "formula input (--gml input satisfies it by construction)",
            file=sys.stderr,
        )
    unit = compiler.compile_pipeline(
        formula,
        signature,
        state_budget=args.state_budget,
        seed_max_nodes=args.seed_max_nodes,
        through=stage,
    )
    return unit, stage, modal


def cmd_compile(args) -> int:
    unit, stage, _ = _compile_unit(args)
    args.out.mkdir(parents=True, exist_ok=True)
    lines = [f"stage: {stage}"]
    for name, stats in unit.stats.items():
        parts = ", ".join(
            f"{k}={v if v is not None else 'astronomical'}" for k, v in stats.items()
        )
        lines.append(f"{name}: {parts}")
    (args.out / "compile_report.txt").write_text("\n".join(lines) + "\n", encoding="utf-8")
    (args.out / "automaton.json").write_text(
        unit.stages[stage].describe() + "\n", encoding="utf-8"
    )
    if args.figures:
        write_stage_figure(unit.stats, args.out, "compile")
    print("\n".join(lines))
    return 0


def _corpus(args, signature):
    alphabet = sorted(signature)
    if args.random:
        rng = random.Random(args.seed)
        seen = set()
        out = []
        while len(out) < args.random:
            tree = _random_tree(rng, args.max_nodes, alphabet)
            key = trees.canonical_form(tree)
            if key not in seen:
                seen.add(key)
                out.append(tree)
        return out
    return list(trees.enumerate_trees(args.max_nodes, alphabet))


def _random_tree(rng: random.Random, max_nodes: int, alphabet) -> trees.RootedTree:
    n = rng.randint(1, max_nodes)
    parents = [None] + [rng.randrange(i) for i in range(1, n)]
    labels = [
        frozenset(s for s in alphabet if rng.random() < 0.5) for _ in range(n)
    ]
    return trees.RootedTree(tuple(parents), tuple(labels))


def cmd_check(args) -> int:
    unit, stage, modal = _compile_unit(args)
    var = unit.free_variable
    formula_text = args.gml or args.formula_text or str(args.formula)
    report = CheckReport(title=f"{formula_text} [{stage}]")
    for tree in _corpus(args, unit.signature):
        oracle = logic.mso_check(
            tree, unit.formula, trees.Interpretation(first_order={var: tree.root})
        )
        verdict = compiler.evaluate_at_root(unit, tree, stage)
        labeled = trees.apply_interpretation(
            tree, trees.Interpretation(first_order={var: tree.root})
        )
        rounds = _rounds_to_verdict(unit.stages[stage], labeled)
        report.add(
            CaseResult(
                key=trees.canonical_form(tree),
                formula=formula_text,
                oracle=oracle,
                verdict=verdict.value,
                rounds=rounds,
            )
        )
    write_check_report(report, args.out, f"check_{stage}", figures=args.figures)
    summary = report.summary()
    print(
        f"{summary['total']} cases: {summary['agree']} agree, "
        f"{summary['disagree']} disagree, {summary['neither']} neither"
    )
    if not report.ok:
        counterexample = report.first_counterexample()
        print(f"counterexample: {counterexample.key}", file=sys.stderr)
        return 1
    return 0


def _rounds_to_verdict(automaton, labeled) -> int:
    if not automaton.deterministic:
        return -1
    trace = automata.run(automaton, labeled, max_rounds=len(labeled) + 8,
                         require_stabilization=False)
    return trace.stabilized_at if trace.stabilized_at is not None else len(trace.rounds)


def cmd_run(args) -> int:
    tree = trees.parse_tree(args.tree.read_text(encoding="utf-8"))
    args.out.mkdir(parents=True, exist_ok=True)
    if args.gmsc:
        program = logic.parse_gmsc(args.gmsc.read_text(encoding="utf-8"))
        automaton = compiler.compile_gmsc(program)
        model = tree
    else:
        unit, stage, _ = _compile_unit(args)
        automaton = unit.stages[stage]
        var = unit.free_variable
        model = trees.apply_interpretation(
            tree, trees.Interpretation(first_order={var: tree.root})
        )
        if not automaton.deterministic:
            raise ValueError("run needs a deterministic stage (fixed-point or final)")
    trace = automata.run(
        automaton, model, max_rounds=args.max_rounds, require_stabilization=False
    )
    path = args.out / "trace.tsv"
    path.write_text(trace.to_tsv(), encoding="utf-8")
    print(f"wrote {path} ({len(trace.rounds)} rounds, "
          f"stabilized={trace.stabilized_at})")
    return 0


def cmd_gmsc(args) -> int:
    program = logic.parse_gmsc(args.program.read_text(encoding="utf-8"))
    tree = trees.parse_tree(args.tree.read_text(encoding="utf-8"))
    if args.node not in tree.nodes:
        raise ValueError(f"node {args.node} not in the tree")
    args.out.mkdir(parents=True, exist_ok=True)
    rounds, cycle_start = logic.rule_truth_sequence(tree, program, args.max_rounds)
    lines = ["round\tnode\ttrue_variables"]
    for t, truth in enumerate(rounds):
        for v in tree.nodes:
            names = ",".join(sorted(truth[v])) or "-"
            lines.append(f"{t}\t{v}\t{names}")
    (args.out / "gmsc_rounds.tsv").write_text("\n".join(lines) + "\n", encoding="utf-8")
    accepted = logic.rule_accepts(tree, args.node, program, args.max_rounds)
    print(f"accepts node {args.node}: {accepted} "
          f"({len(rounds)} rounds to repeat, cycle at {cycle_start})")
    if args.compare:
        automaton = compiler.compile_gmsc(program)
        verdict = automata.decide(
            automaton, tree, args.node, automata.STANDARD, max_rounds=args.max_rounds
        )
        agree = (verdict is Verdict.ACCEPT) == accepted
        print(f"compiled automaton: {verdict.value} ({'agrees' if agree else 'DISAGREES'})")
        if not agree:
            return 1
    return 0


def cmd_gnn(args) -> int:
    tree = trees.parse_tree(args.tree.read_text(encoding="utf-8"))
    args.out.mkdir(parents=True, exist_ok=True)
    if args.identity_demo:
        system = gnn.DEMO_SYSTEM
        one, zero = system.one(), system.zero()
        params = gnn.SimpleLayerParams(
            own=((one,),), neighbors=((zero,),), bias=(zero,)
        )
        network = gnn.simple_layer_gnn(
            params,
            system,
            {"p"},
            init=lambda label: (one,) if "p" in label else (zero,),
            is_accepting=lambda vec: vec[0].value == 1,
            name="identity-demo",
        )
    elif args.program:
        program = logic.parse_gmsc(args.program.read_text(encoding="utf-8"))
        automaton = compiler.compile_gmsc(program)
        network = gnn.embed_fcmpa(automaton).gnn
    else:
        raise ValueError("give --program or --identity-demo")
    rounds = gnn.gnn_run(network, tree, max_rounds=args.max_rounds)
    path = args.out / "gnn_trace.tsv"
    path.write_text(gnn.trace_tsv(network, rounds, list(tree.nodes)), encoding="utf-8")
    print(f"wrote {path} ({len(rounds)} rounds)")
    return 0


# ---------------------------------------------------------------------------
# Fuzzing


def _fuzz_cap_idempotence(rng, args) -> list:
    failures = []
    for _ in range(args.cases):
        items = {f"s{i}": rng.randint(0, 6) for i in range(rng.randint(0, 4))}
        k = rng.randint(0, 4)
        m = trees.Multiset(counts=items)
        once = m.cap(k)
        if once.cap(k) != once:
            failures.append(f"cap not idempotent on {items} k={k}")
        if any(c > k for _, c in once.items()):
            failures.append(f"cap exceeded on {items} k={k}")
    return failures


def _fuzz_negation(rng, args) -> list:
    formula = logic.parse_mso("exists y. (E(x,y) & p(y))")
    unit = compiler.compile_mso(formula, {"p"})
    automaton = unit.stages["fixed_point"]
    flipped = automata.negate(automaton)
    failures = []
    if automata.negate(flipped) is not automaton:
        failures.append("double negation is not the original automaton")
    for _ in range(args.cases):
        tree = _random_tree(rng, min(args.max_nodes, 6), ["p"])
        labeled = trees.apply_interpretation(
            tree, trees.Interpretation(first_order={"x": 0})
        )
        a = automata.decide(automaton, labeled, 0, automata.FIXED_POINT)
        b = automata.decide(flipped, labeled, 0, automata.FIXED_POINT)
        swap = {Verdict.ACCEPT: Verdict.REJECT, Verdict.REJECT: Verdict.ACCEPT,
                Verdict.NEITHER: Verdict.NEITHER}
        if swap[a] != b:
            failures.append(f"negation did not flip on {trees.canonical_form(tree)}")
    return failures


def _fuzz_run_sets(rng, args) -> list:
    guess = automata.TableCmpa(
        name="guess-bit",
        signature={"p"},
        states=("low", "high", "won"),
        init=lambda label: ("low", "high"),
        delta=lambda label, m: "won" if m.count("high") >= 1 or m.count("won") >= 1 else "low",
        accepting={"won"},
        rejecting={"low"},
        bound=1,
        deterministic=False,
        quasi_acyclic=True,
    )
    det = automata.determinize(guess)
    failures = []
    for _ in range(max(1, args.cases // 20)):
        tree = _random_tree(rng, min(args.max_nodes, 5), ["p"])
        if not _run_sets_match(guess, det, tree):
            failures.append(f"run sets differ on {trees.canonical_form(tree)}")
    return failures


def _run_sets_match(nondet, det, model) -> bool:
    horizon = len(model) + 2
    det_trace = automata.run(det, model, max_rounds=horizon, require_stabilization=False)
    per_round_sets = [
        [det.members(det_trace.rounds[min(t, len(det_trace.rounds) - 1)][i])
         for i in range(len(model))]
        for t in range(horizon)
    ]
    seqs = {i: set() for i in range(len(model))}
    for combo, configs, cycle_start in automata.enumerate_runs(nondet, model, max_runs=100_000):
        for i in range(len(model)):
            seq = tuple(
                configs[min(t, len(configs) - 1)][i]
                if t < len(configs)
                else configs[cycle_start + (t - cycle_start) % (len(configs) - cycle_start)][i]
                for t in range(horizon)
            )
            seqs[i].add(seq)
    for i in range(len(model)):
        pointwise = 1
        for t in range(horizon):
            pointwise *= len(per_round_sets[t][i])
        if len(seqs[i]) != pointwise:
            return False
        for seq in seqs[i]:
            if any(seq[t] not in per_round_sets[t][i] for t in range(horizon)):
                return False
    return True


def _fuzz_gmsc(rng, args) -> list:
    program = logic.parse_gmsc(
        "X(0) :- p;\nX :- dia>=1 X;\nappointed: X;"
    )
    automaton = compiler.compile_gmsc(program)
    failures = []
    for _ in range(max(1, args.cases // 10)):
        tree = _random_tree(rng, min(args.max_nodes, 6), ["p"])
        node = rng.randrange(len(tree))
        oracle = logic.rule_accepts(tree, node, program)
        verdict = automata.decide(automaton, tree, node, automata.STANDARD)
        if (verdict is Verdict.ACCEPT) != oracle:
            failures.append(f"rule program disagrees on {trees.canonical_form(tree)}@{node}")
    return failures


def _fuzz_embedding(rng, args) -> list:
    automaton = compiler.atom_automaton("p", "x:y")
    embedded = gnn.embed_fcmpa(automaton)
    failures = []
    for _ in range(max(1, args.cases // 10)):
        tree = _random_tree(rng, min(args.max_nodes, 5), ["p", "x:y"])
        auto_trace = automata.run(automaton, tree, max_rounds=len(tree) + 4,
                                  require_stabilization=False)
        gnn_rounds = gnn.gnn_run(embedded.gnn, tree, max_rounds=len(tree) + 4)
        for t in range(min(len(auto_trace.rounds), len(gnn_rounds))):
            for i in range(len(tree)):
                if embedded.decode(gnn_rounds[t][i]) != auto_trace.rounds[t][i]:
                    failures.append(
                        f"embedding trace differs on {trees.canonical_form(tree)} @({t},{i})"
                    )
                    break
    return failures


FUZZ_PROPERTIES = {
    "cap-idempotence": _fuzz_cap_idempotence,
    "negate-involution": _fuzz_negation,
    "run-set-equality": _fuzz_run_sets,
    "gmsc-agreement": _fuzz_gmsc,
    "embedding-faithfulness": _fuzz_embedding,
}


def cmd_fuzz(args) -> int:
    chosen = args.property or sorted(FUZZ_PROPERTIES)
    rng = random.Random(args.seed)
    args.out.mkdir(parents=True, exist_ok=True)
    lines = [f"seed: {args.seed}", f"cases: {args.cases}"]
    all_failures = []
    for name in chosen:
        failures = FUZZ_PROPERTIES[name](random.Random(rng.randint(0, 2**31)), args)
        lines.append(f"{name}: {'ok' if not failures else f'{len(failures)} failures'}")
        for failure in failures[:10]:
            lines.append(f"  {failure}")
        all_failures.extend(failures)
    (args.out / "fuzz_report.txt").write_text("\n".join(lines) + "\n", encoding="utf-8")
    print("\n".join(lines))
    return 1 if all_failures else 0


if __name__ == "__main__":
    sys.exit(main())
