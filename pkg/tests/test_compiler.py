import pytest

from mso2mpa import automata, compiler, logic
from mso2mpa.automata import (
    FIXED_POINT,
    STANDARD,
    Verdict,
    check_quasi_acyclic,
    decide,
    omnipresent_accept_round,
    run,
)
from mso2mpa.compiler import (
    atom_automaton,
    compile_gmsc,
    compile_mso,
    compile_pipeline,
    edge_automaton,
    equality_automaton,
    evaluate_at_root,
    exists_node,
    fixed_point_sets,
    seed_with_fixed_points,
    singleton_automaton,
    verify_closure,
)
from mso2mpa.errors import UnsupportedProgramError
from mso2mpa.logic import free_variables, gml_to_mso, parse_gml, parse_gmsc, parse_mso
from mso2mpa.trees import (
    Interpretation,
    apply_interpretation,
    enumerate_trees,
    parse_tree,
)


def oracle_at_root(tree, formula):
    free_fo, _ = free_variables(formula)
    interp = Interpretation(
        first_order={var: tree.root for var in free_fo}
    )
    return logic.mso_check(tree, formula, interp)


def differential(formula_text, alphabet, max_nodes=4):
    formula = parse_mso(formula_text)
    unit = compile_mso(formula, alphabet)
    for tree in enumerate_trees(max_nodes, alphabet):
        want = oracle_at_root(tree, unit.formula)
        got = evaluate_at_root(unit, tree, "fixed_point")
        assert got is not Verdict.NEITHER, tree
        assert (got is Verdict.ACCEPT) == want, (formula_text, tree)


# -- atomic automata ---------------------------------------------------------


def test_atom_examples():
    a = atom_automaton("P", "x:y")
    assert decide(a, parse_tree("({P,x:y})"), 0, FIXED_POINT) is Verdict.ACCEPT
    tree = parse_tree("({}({P,x:y}))")
    trace = run(a, tree)
    assert a.state_name(trace.rounds[1][0]) == "found"
    assert decide(a, tree, 0, FIXED_POINT) is Verdict.ACCEPT
    assert decide(a, parse_tree("({}({})({}))"), 0, FIXED_POINT) is Verdict.REJECT
    assert a.bound == 1


def test_edge_examples():
    e = edge_automaton("x:y", "x:z")
    assert decide(e, parse_tree("({x:y}({x:z}))"), 0, FIXED_POINT) is Verdict.ACCEPT
    # the relation is irreflexive: both labels on one node is not an edge
    assert decide(e, parse_tree("({x:y,x:z})"), 0, FIXED_POINT) is Verdict.REJECT
    # a source stuck above the target never links
    assert decide(e, parse_tree("({x:z}({x:y}))"), 0, FIXED_POINT) is Verdict.REJECT
    assert e.bound == 1


def test_edge_accepts_deeper_pairs():
    e = edge_automaton("x:y", "x:z")
    tree = parse_tree("({}({x:y}({x:z})))")
    assert decide(e, tree, 0, FIXED_POINT) is Verdict.ACCEPT


def test_equality_examples():
    q = equality_automaton("x:y", "x:z")
    deep = parse_tree("({}({}({x:y,x:z})))")
    trace = run(q, deep)
    assert q.state_name(trace.rounds[2][0]) == "same"
    assert decide(q, deep, 0, FIXED_POINT) is Verdict.ACCEPT
    split = parse_tree("({}({x:y})({x:z}))")
    assert decide(q, split, 0, FIXED_POINT) is Verdict.REJECT
    assert decide(q, parse_tree("({})"), 0, FIXED_POINT) is Verdict.REJECT


def test_singleton_tracker_examples():
    s = singleton_automaton(["x:u"])
    assert decide(s, parse_tree("({x:u})"), 0, FIXED_POINT) is Verdict.ACCEPT
    doubled = parse_tree("({x:u}({x:u}))")
    trace = run(s, doubled)
    assert s.state_value(trace.rounds[1][0]) == (2,)
    assert decide(s, doubled, 0, FIXED_POINT) is Verdict.REJECT
    # no occurrence at all: the zero count is neither accepting nor rejecting
    assert decide(s, parse_tree("({}({}))"), 0, FIXED_POINT) is Verdict.NEITHER
    assert s.bound == 2


def test_singleton_tracker_prefix_counts():
    s = singleton_automaton(["x:u", "x:v"])
    tree = parse_tree("({x:u}({x:v})({x:v}))")
    trace = run(s, tree)
    assert s.state_value(trace.rounds[0][0]) == (1, 0)
    assert s.state_value(trace.rounds[1][0]) == (1, 2)


# -- quantifiers --------------------------------------------------------------


def test_exists_node_examples():
    body = parse_mso("(E(x,y) & p(y))")
    unit = compile_mso(parse_mso("exists y. (E(x,y) & p(y))"), {"p"})
    assert evaluate_at_root(unit, parse_tree("({}({p}))"), "fixed_point") is Verdict.ACCEPT
    assert evaluate_at_root(unit, parse_tree("({})"), "fixed_point") is Verdict.REJECT

    taut = compile_mso(parse_mso("exists y. (y = y)"), {"p"})
    for text in ("({})", "({p}({}))", "({}({p})({p}))"):
        assert evaluate_at_root(taut, parse_tree(text), "fixed_point") is Verdict.ACCEPT


def test_exists_set_examples():
    some = compile_mso(parse_mso("exists2 Y. Y(x)"), {"p"})
    none = compile_mso(parse_mso("exists2 Y. !Y(x)"), {"p"})
    contradiction = compile_mso(parse_mso("exists2 Y. (Y(x) & !Y(x))"), {"p"})
    for text in ("({})", "({p}({}))", "({}({p})({}))"):
        tree = parse_tree(text)
        assert evaluate_at_root(some, tree, "fixed_point") is Verdict.ACCEPT
        assert evaluate_at_root(none, tree, "fixed_point") is Verdict.ACCEPT
        assert evaluate_at_root(contradiction, tree, "fixed_point") is Verdict.REJECT


def test_compile_differentials():
    differential("p(x)", {"p"})
    differential("!exists y. E(x,y)", {"p"})
    differential("exists2 Y. (Y(x) & !Y(x))", {"p"})
    differential("exists y. (p(y) & !(x = y))", {"p"})


def test_compile_handles_shadowed_names():
    # the same bound name twice: guessed labels must not capture each other
    differential("exists y. (p(y) & exists y. q(y))", {"p", "q"})


def test_compiled_stage_one_is_carefree():
    unit = compile_mso(parse_mso("exists y. (E(x,y) & p(y))"), {"p"})
    automaton = unit.stages["fixed_point"]
    assert automaton.deterministic and automaton.forgetful and automaton.quasi_acyclic
    assert check_quasi_acyclic(automaton, enumerate_trees(4, {"p", "x:x"})).passed


def test_stage_one_bound_bookkeeping():
    unit = compile_mso(parse_mso("exists y. (E(x,y) & p(y))"), {"p"})
    automaton = unit.stages["fixed_point"]
    inner = automaton.inner
    assert automaton.bound == inner.bound * inner.state_count
    assert inner.bound == 2  # edge/atom automata have bound 1, the tracker 2


# -- fixed points and the later stages ----------------------------------------


def test_fixed_point_sets_of_atom():
    a = atom_automaton("P", "x:y")
    seeds = fixed_point_sets(a, method="closure")
    values = {
        tuple(sorted(label)): {a.state_value(s) for s in ids}
        for label, ids in seeds.per_label.items()
    }
    assert values[("P", "x:y")] == {"found"}
    # below an unlabeled root anything may or may not be found
    assert values[()] == {"found", "absent"}
    assert verify_closure(seeds)


def test_fixed_point_sets_constant_automaton():
    constant = automata.TableCmpa(
        name="constant",
        signature={"p"},
        states=("s",),
        init=lambda label: "s",
        delta=lambda label, m: "s",
        accepting=set(),
        rejecting=set(),
        bound=1,
        quasi_acyclic=True,
    )
    seeds = fixed_point_sets(constant, method="closure")
    assert all(ids == frozenset({0}) for ids in seeds.per_label.values())


def test_fixed_point_sets_of_singleton_tracker():
    s = singleton_automaton(["x:u"])
    seeds = fixed_point_sets(s, method="closure")
    values = {
        tuple(sorted(label)): {s.state_value(q) for q in ids}
        for label, ids in seeds.per_label.items()
    }
    assert {(1,), (2,)} <= values[("x:u",)]
    assert {(0,), (1,), (2,)} <= values[()]
    assert verify_closure(seeds)


def test_seeding_drops_rejection_and_keeps_transitions():
    unit = compile_pipeline(
        gml_to_mso(parse_gml("dia>=1 p"), "x"), {"p"}, through="omnipresent"
    )
    seeded = unit.stages["omnipresent"]
    stage1 = unit.stages["fixed_point"]
    assert not seeded.deterministic
    assert seeded.inner is stage1
    assert all(not seeded.is_rejecting(s) for s in range(4))


def test_omnipresent_rounds_for_child_witness():
    unit = compile_pipeline(
        gml_to_mso(parse_gml("dia>=1 p"), "x"), {"p"}, through="omnipresent"
    )
    seeded = unit.stages["omnipresent"]
    var = unit.free_variable
    satisfied = apply_interpretation(
        parse_tree("({}({p}))"), Interpretation(first_order={var: 0})
    )
    assert omnipresent_accept_round(seeded, satisfied, 0, max_runs=10**7) == 1
    lonely = apply_interpretation(
        parse_tree("({})"), Interpretation(first_order={var: 0})
    )
    # Some single run accepts at round 0 (a seed may be the fixed point of a
    # satisfying tree); what never happens is a round where all runs accept.
    assert omnipresent_accept_round(seeded, lonely, 0) is None
    from mso2mpa.automata import OMNIPRESENT

    assert decide(seeded, lonely, 0, OMNIPRESENT) is not Verdict.ACCEPT


def test_final_stage_small_differential():
    for text, alphabet in (("p", {"p"}), ("dia>=1 p", {"p"}), ("!dia>=1 p", {"p"})):
        modal = parse_gml(text)
        unit = compile_pipeline(gml_to_mso(modal, "x"), alphabet, through="final")
        final = unit.stages["final"]
        assert final.deterministic and final.forgetful
        assert all(not final.is_rejecting(s) for s in final.materialized_state_ids())
        for tree in enumerate_trees(4, alphabet):
            want = logic.gml_eval(tree, 0, modal)
            got = evaluate_at_root(unit, tree, "final")
            assert (got is Verdict.ACCEPT) == want, (text, tree)


def test_pipeline_rebuild_is_deterministic():
    formula = gml_to_mso(parse_gml("dia>=1 p"), "x")
    first = compile_pipeline(formula, {"p"}, through="final")
    second = compile_pipeline(formula, {"p"}, through="final")
    for tree in enumerate_trees(3, {"p"}):
        assert evaluate_at_root(first, tree, "final") is evaluate_at_root(
            second, tree, "final"
        )
    assert {k: v["bound"] for k, v in first.stats.items()} == {
        k: v["bound"] for k, v in second.stats.items()
    }


# -- rule programs -------------------------------------------------------------


def test_compile_gmsc_example():
    program = parse_gmsc("X(0) :- p;\nX :- dia>=1 X;\nappointed: X;")
    automaton = compile_gmsc(program)
    tree = parse_tree("({}({p}))")
    trace = run(automaton, tree, max_rounds=8, require_stabilization=False)
    label, assign = automaton.state_value(trace.rounds[1][0])
    assert assign == frozenset({"X"})
    assert decide(automaton, tree, 0, STANDARD) is Verdict.ACCEPT


def test_compile_gmsc_no_appointed():
    program = parse_gmsc("X(0) :- p;\nX :- dia>=1 X;\nappointed: ;")
    automaton = compile_gmsc(program)
    for tree in enumerate_trees(3, {"p"}):
        assert decide(automaton, tree, 0, STANDARD) is not Verdict.ACCEPT


def test_compile_gmsc_matches_oracle():
    programs = [
        "X(0) :- p;\nX :- dia>=1 X;\nappointed: X;",
        "X(0) :- q;\nX :- (q | dia>=1 X);\nappointed: X;",
        "A(0) :- p;\nA :- dia>=1 A;\nB(0) :- !p;\nB :- dia>=2 A;\nappointed: B;",
    ]
    for text in programs:
        program = parse_gmsc(text)
        automaton = compile_gmsc(program)
        alphabet = {"p", "q"}
        for tree in enumerate_trees(4, alphabet):
            for node in tree.nodes:
                want = logic.rule_accepts(tree, node, program)
                got = decide(automaton, tree, node, STANDARD)
                assert (got is Verdict.ACCEPT) == want, (text, tree, node)


def test_compile_gmsc_round_exact():
    program = parse_gmsc("X(0) :- p;\nX :- dia>=1 X;\nappointed: X;")
    automaton = compile_gmsc(program)
    for tree in enumerate_trees(4, {"p"}):
        rounds, _ = logic.rule_truth_sequence(tree, program)
        trace = run(automaton, tree, max_rounds=len(rounds) + 2,
                    require_stabilization=False)
        for t in range(min(len(rounds), len(trace.rounds))):
            for v in tree.nodes:
                _, assign = automaton.state_value(trace.rounds[t][v])
                assert assign == rounds[t][v]


def test_compile_gmsc_rejects_nested_diamonds():
    nested = parse_gmsc("X(0) :- p;\nX :- dia>=1 (dia>=1 X);\nappointed: X;")
    with pytest.raises(UnsupportedProgramError):
        compile_gmsc(nested)
    modal_init = parse_gmsc("X(0) :- dia>=1 p;\nX :- X;\nappointed: X;")
    with pytest.raises(UnsupportedProgramError):
        compile_gmsc(modal_init)
