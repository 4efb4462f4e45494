import random

import pytest

from mso2mpa import automata
from mso2mpa.automata import (
    FIXED_POINT,
    OMNIPRESENT,
    STANDARD,
    Acceptance,
    KripkeGraph,
    TableCmpa,
    Verdict,
    cap_multiset,
    check_quasi_acyclic,
    decide,
    determinize,
    enumerate_runs,
    negate,
    omnipresent_accept_round,
    possible_state_sets,
    product,
    run,
    step,
)
from mso2mpa.compiler import atom_automaton
from mso2mpa.errors import HorizonExceededError
from mso2mpa.trees import Multiset, enumerate_trees, parse_tree


def hit_automaton():
    return atom_automaton("P", "x:y")


def flip_flop():
    # Alternates states every round regardless of the children: the classic
    # non-quasi-acyclic automaton.
    return TableCmpa(
        name="flip",
        signature=set(),
        states=("even", "odd"),
        init=lambda label: "even",
        delta=lambda label, prev, m: "odd" if prev == "even" else "even",
        accepting=set(),
        rejecting=set(),
        bound=1,
        forgetful=False,
    )


def guess_bit():
    return TableCmpa(
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


def test_cap_multiset_examples():
    assert sorted(cap_multiset(Multiset(["s", "t", "t"]), 1).items()) == [("s", 1), ("t", 1)]
    assert cap_multiset(Multiset(), 5) == Multiset()
    assert sorted(cap_multiset(Multiset(counts={"a": 3, "b": 1}), 2).items()) == [
        ("a", 2),
        ("b", 1),
    ]


def test_step_leaf_ignores_nothing():
    a = hit_automaton()
    single = parse_tree("({})")
    out = step(a, single, {0: "found"})
    # forgetful: the next state of a leaf is delta(label, empty) regardless
    assert out == {0: "absent"}


def test_step_hand_simulation():
    a = hit_automaton()
    tree = parse_tree("({}({P,x:y}))")
    config0 = {v: a.initial(tree.label(v)) for v in tree.nodes}
    assert config0 == {0: "absent", 1: "found"}
    config1 = step(a, tree, config0)
    assert config1 == {0: "found", 1: "found"}


def test_bound_collapses_identical_children():
    a = hit_automaton()
    five = parse_tree("({}" + "({P,x:y})" * 5 + ")")
    one = parse_tree("({}({P,x:y}))")
    t5 = run(a, five)
    t1 = run(a, one)
    assert a.state_name(t5.rounds[1][0]) == a.state_name(t1.rounds[1][0]) == "found"


def test_bound_respected_on_fuzzed_multisets():
    a = hit_automaton()
    rng = random.Random(3)
    label = frozenset({"P"})
    for _ in range(200):
        counts = {s: rng.randint(0, 6) for s in ("found", "absent")}
        m = Multiset(counts=counts)
        assert a.delta(label, m) == a.delta(label, m.cap(a.bound))


def test_run_stabilizes_by_depth():
    a = hit_automaton()
    for tree in enumerate_trees(5, {"P", "x:y"}):
        trace = run(a, tree)
        assert trace.stabilized_at is not None
        assert trace.stabilized_at <= tree.depth() + 1


def test_run_single_node_forgetful():
    a = hit_automaton()
    trace = run(a, parse_tree("({P,x:y})"))
    assert trace.stabilized_at <= 2


def test_run_deterministic_repeatable():
    a = hit_automaton()
    tree = parse_tree("({}({P,x:y})({}))")
    assert run(a, tree).rounds == run(a, tree).rounds


def test_run_horizon_error_carries_trace():
    with pytest.raises(HorizonExceededError) as err:
        run(flip_flop(), parse_tree("({})"), max_rounds=6)
    assert len(err.value.trace.rounds) == 7


def test_decide_fixed_point_examples():
    a = hit_automaton()
    assert decide(a, parse_tree("({P,x:y})"), 0, FIXED_POINT) is Verdict.ACCEPT
    assert decide(a, parse_tree("({})"), 0, FIXED_POINT) is Verdict.REJECT


def test_decide_neither_with_empty_verdict_sets():
    blank = TableCmpa(
        name="blank",
        signature=set(),
        states=("s",),
        init=lambda label: "s",
        delta=lambda label, m: "s",
        accepting=set(),
        rejecting=set(),
        bound=1,
        quasi_acyclic=True,
    )
    for cond in (STANDARD, FIXED_POINT, OMNIPRESENT):
        assert decide(blank, parse_tree("({}({}))"), 0, cond) is Verdict.NEITHER


def test_negate_involution_and_swap():
    a = hit_automaton()
    assert negate(negate(a)) is a
    flipped = negate(a)
    assert decide(flipped, parse_tree("({})"), 0, FIXED_POINT) is Verdict.ACCEPT
    # state space and transitions are untouched
    assert [flipped.state_value(s) for s in flipped.materialized_state_ids()] == [
        a.state_value(s) for s in a.materialized_state_ids()
    ]
    label = frozenset({"P"})
    m = Multiset(["found"])
    assert flipped.delta(label, m) == a.delta(label, m)


def test_negate_flips_decisions_everywhere():
    a = hit_automaton()
    flipped = negate(a)
    swap = {Verdict.ACCEPT: Verdict.REJECT, Verdict.REJECT: Verdict.ACCEPT,
            Verdict.NEITHER: Verdict.NEITHER}
    for tree in enumerate_trees(4, {"P", "x:y"}):
        direct = decide(a, tree, 0, FIXED_POINT)
        assert decide(flipped, tree, 0, FIXED_POINT) is swap[direct]


def test_product_is_componentwise():
    a = hit_automaton()
    b = atom_automaton("Q", "x:z")
    combined = product(a, b)
    assert combined.bound == max(a.bound, b.bound)
    for tree in enumerate_trees(4, {"P", "Q", "x:y", "x:z"}):
        ta = run(a, tree)
        tb = run(b, tree)
        tc = run(combined, tree)
        horizon = max(len(ta.rounds), len(tb.rounds), len(tc.rounds))
        for t in range(horizon):
            for v in tree.nodes:
                pair = combined.state_value(
                    tc.rounds[min(t, len(tc.rounds) - 1)][v]
                )
                assert pair == (
                    a.state_value(ta.rounds[min(t, len(ta.rounds) - 1)][v]),
                    b.state_value(tb.rounds[min(t, len(tb.rounds) - 1)][v]),
                )


def test_product_diagonal():
    a = hit_automaton()
    diag = product(a, a)
    for tree in enumerate_trees(4, {"P", "x:y"}):
        assert decide(diag, tree, 0, FIXED_POINT) is decide(a, tree, 0, FIXED_POINT)


def test_product_bound_is_max():
    one = hit_automaton()
    from mso2mpa.compiler import singleton_automaton

    two = singleton_automaton(["x:y"])
    assert product(one, two).bound == 2


def test_determinize_bound_formula():
    g = guess_bit()
    d = determinize(g)
    assert d.bound == g.bound * g.state_count == 3


def test_determinize_single_node_example():
    h = TableCmpa(
        name="h",
        signature=set(),
        states=("a", "b", "f"),
        init=lambda label: ("a", "b"),
        delta=lambda label, m: "f",
        accepting=set(),
        rejecting=set(),
        bound=1,
        deterministic=False,
    )
    d = determinize(h)
    trace = run(d, parse_tree("({})"))
    names = [d.state_name(trace.rounds[t][0]) for t in range(len(trace.rounds))]
    assert names == ["{a,b}", "{f}"]


def test_determinize_preserves_decisions():
    g = guess_bit()
    d = determinize(g)
    for tree in enumerate_trees(4, {"p"}):
        for cond in (STANDARD, FIXED_POINT):
            assert decide(g, tree, 0, cond) is decide(d, tree, 0, cond)


def test_determinize_of_deterministic_is_isomorphic():
    a = hit_automaton()
    d = determinize(a)
    for tree in enumerate_trees(3, {"P", "x:y"}):
        ta = run(a, tree)
        td = run(d, tree)
        assert len(ta.rounds) == len(td.rounds)
        for t in range(len(ta.rounds)):
            for v in tree.nodes:
                members = d.members(td.rounds[t][v])
                assert members == frozenset({ta.rounds[t][v]})


def test_run_set_equality_small():
    g = guess_bit()
    d = determinize(g)
    for tree in enumerate_trees(4, {"p"}):
        horizon = len(tree) + 2
        td = run(d, tree, max_rounds=horizon, require_stabilization=False)

        def det_members(t, v):
            t = min(t, len(td.rounds) - 1)
            return d.members(td.rounds[t][v])

        sequences = {v: set() for v in tree.nodes}
        for _, configs, cycle_start in enumerate_runs(g, tree):
            period = len(configs) - cycle_start
            for v in tree.nodes:
                seq = tuple(
                    configs[t][v]
                    if t < len(configs)
                    else configs[cycle_start + (t - cycle_start) % period][v]
                    for t in range(horizon)
                )
                sequences[v].add(seq)
        for v in tree.nodes:
            pointwise = 1
            for t in range(horizon):
                pointwise *= len(det_members(t, v))
            assert len(sequences[v]) == pointwise
            for seq in sequences[v]:
                assert all(seq[t] in det_members(t, v) for t in range(horizon))


def test_possible_state_sets_match_enumeration():
    g = guess_bit()
    for tree in enumerate_trees(4, {"p"}):
        horizon = len(tree) + 2
        sets = possible_state_sets(g, tree, horizon)
        brute = [
            [set() for _ in tree.nodes] for _ in range(horizon + 1)
        ]
        for _, configs, cycle_start in enumerate_runs(g, tree):
            period = len(configs) - cycle_start
            for t in range(horizon + 1):
                config = (
                    configs[t]
                    if t < len(configs)
                    else configs[cycle_start + (t - cycle_start) % period]
                )
                for v in tree.nodes:
                    brute[t][v].add(config[v])
        for t in range(horizon + 1):
            for v in tree.nodes:
                assert sets[t][v] == frozenset(brute[t][v])


def test_omnipresent_round():
    g = guess_bit()
    chain = parse_tree("({}({}))")
    # the child can pick "low" forever, so no common accepting round exists;
    # from round 2 every run has washed out to "low", which is rejecting
    assert omnipresent_accept_round(g, chain, 0) is None
    assert decide(g, chain, 0, OMNIPRESENT) is Verdict.REJECT
    sure = TableCmpa(
        name="sure",
        signature=set(),
        states=("a", "b"),
        init=lambda label: ("a", "b"),
        delta=lambda label, m: "b",
        accepting={"b"},
        rejecting=set(),
        bound=1,
        deterministic=False,
        quasi_acyclic=True,
    )
    assert omnipresent_accept_round(sure, chain, 0) == 1
    assert decide(sure, chain, 0, OMNIPRESENT) is Verdict.ACCEPT
    assert decide(sure, chain, 0, Acceptance("omnipresent", at_round=0)) is Verdict.NEITHER


def test_omnipresent_mode_determinization_matches_common_rounds():
    # all-runs-accepting at some round iff the all-mode subset automaton
    # visits an accepting state under plain acceptance
    g = guess_bit()
    d = determinize(g, mode="omnipresent")
    for tree in enumerate_trees(4, {"p"}):
        common = omnipresent_accept_round(g, tree, 0) is not None
        assert (decide(d, tree, 0, STANDARD) is Verdict.ACCEPT) == common, tree


def test_quasi_acyclic_checks():
    a = hit_automaton()
    assert check_quasi_acyclic(a, enumerate_trees(5, {"P", "x:y"})).passed

    report = check_quasi_acyclic(flip_flop(), [parse_tree("({}({}))")])
    assert not report.passed
    assert report.counterexample["rounds"][0] == 0

    constant = TableCmpa(
        name="constant",
        signature=set(),
        states=("s",),
        init=lambda label: "s",
        delta=lambda label, m: "s",
        accepting=set(),
        rejecting=set(),
        bound=1,
        quasi_acyclic=True,
    )
    assert check_quasi_acyclic(constant, enumerate_trees(3, set())).passed


def test_kripke_graph_cycles_are_decidable():
    a = hit_automaton()
    # two-node cycle: P,x:y on one node; states march around forever
    graph = KripkeGraph(
        n=2,
        edges=((0, 1), (1, 0)),
        labels=(frozenset(), frozenset({"P", "x:y"})),
    )
    assert decide(a, graph, 0, STANDARD) is Verdict.ACCEPT


def test_trace_tsv_format():
    a = hit_automaton()
    trace = run(a, parse_tree("({}({P,x:y}))"))
    lines = trace.to_tsv().strip().splitlines()
    assert lines[0] == "round\tnode\tstate_debug_name"
    assert lines[1].split("\t") == ["0", "0", "absent"]


def test_describe_is_json():
    import json

    a = hit_automaton()
    payload = json.loads(a.describe())
    assert payload["bound"] == 1
    assert payload["accepting"] == ["found"]
    assert payload["deterministic"] is True
