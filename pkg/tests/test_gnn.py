import random
from fractions import Fraction as F

import pytest

from mso2mpa import automata, gnn
from mso2mpa.automata import STANDARD, Verdict, decide, run
from mso2mpa.compiler import atom_automaton, compile_gmsc, singleton_automaton
from mso2mpa.errors import SystemTooSmallError
from mso2mpa.floats import FloatSystem
from mso2mpa.gnn import (
    DEMO_SYSTEM,
    SimpleLayerParams,
    embed_fcmpa,
    gnn_accepts,
    gnn_run,
    simple_layer_gnn,
    system_for_counts,
)
from mso2mpa.logic import parse_gmsc
from mso2mpa.trees import Multiset, enumerate_trees, parse_tree


def constant_zero_net():
    zero = DEMO_SYSTEM.zero()
    params = SimpleLayerParams(own=((zero,),), neighbors=((zero,),), bias=(zero,))
    return simple_layer_gnn(
        params,
        DEMO_SYSTEM,
        {"p"},
        init=lambda label: (DEMO_SYSTEM.one(),) if "p" in label else (zero,),
        is_accepting=lambda vec: False,
        name="zero-map",
    )


def identity_net():
    one, zero = DEMO_SYSTEM.one(), DEMO_SYSTEM.zero()
    params = SimpleLayerParams(own=((one,),), neighbors=((zero,),), bias=(zero,))
    return simple_layer_gnn(
        params,
        DEMO_SYSTEM,
        {"p"},
        init=lambda label: (one,) if "p" in label else (zero,),
        is_accepting=lambda vec: vec[0].value == 1,
        name="identity",
    )


def test_zero_map_collapses():
    net = constant_zero_net()
    tree = parse_tree("({p}({})({p}))")
    rounds = gnn_run(net, tree)
    assert all(x.value == 0 for vec in rounds[-1] for x in vec)
    assert len(rounds) == 2  # one step to flush the inputs, then fixed


def test_identity_probe_is_fixed():
    net = identity_net()
    tree = parse_tree("({p}({})({p}))")
    rounds = gnn_run(net, tree)
    assert len(rounds) == 1  # already a fixed point
    assert [vec[0].value for vec in rounds[0]] == [1, 0, 1]
    assert gnn_accepts(net, tree, 0) is True
    assert gnn_accepts(net, tree, 1) is False


def test_aggregation_order_is_value_sorted_and_input_order_blind():
    net = identity_net()
    vectors = [(DEMO_SYSTEM.nearest(v),) for v in (F(3), F(1, 2), F(7), F(1, 4))]
    rng = random.Random(4)
    baseline = net.agg(vectors)
    for _ in range(6):
        shuffled = vectors[:]
        rng.shuffle(shuffled)
        assert net.agg(shuffled) == baseline


def test_embedding_reproduces_atom_traces():
    automaton = atom_automaton("p", "x:y")
    embedded = embed_fcmpa(automaton)
    for tree in enumerate_trees(4, {"p", "x:y"}):
        auto = run(automaton, tree, require_stabilization=False)
        net_rounds = gnn_run(embedded.gnn, tree, max_rounds=len(tree) + 4)
        assert len(net_rounds) == len(auto.rounds)
        for t in range(len(auto.rounds)):
            for v in tree.nodes:
                assert embedded.decode(net_rounds[t][v]) == auto.rounds[t][v]


def test_embedding_acceptance_matches():
    automaton = atom_automaton("p", "x:y")
    embedded = embed_fcmpa(automaton)
    for tree in enumerate_trees(4, {"p", "x:y"}):
        for node in tree.nodes:
            want = decide(automaton, tree, node, STANDARD) is Verdict.ACCEPT
            assert gnn_accepts(embedded.gnn, tree, node) == want


def test_embedding_clamps_counts_beyond_bound():
    automaton = atom_automaton("p", "x:y")
    embedded = embed_fcmpa(automaton)
    one_child = parse_tree("({}({p,x:y}))")
    many_children = parse_tree("({}" + "({p,x:y})" * 4 + ")")
    a = gnn_run(embedded.gnn, one_child)[1][0]
    b = gnn_run(embedded.gnn, many_children)[1][0]
    # state block identical: 4 = bound-capped to the same transition as 1
    assert a[: len(embedded.state_ids)] == b[: len(embedded.state_ids)]


def test_embedded_aggregation_is_bounded():
    automaton = singleton_automaton(["x:u"])
    embedded = embed_fcmpa(automaton)
    net = embedded.gnn
    rng = random.Random(9)
    labels = [frozenset(), frozenset({"x:u"})]
    vectors = [net.init(rng.choice(labels)) for _ in range(7)]
    k = net.bound
    capped = []
    seen = {}
    for vec in vectors:
        seen[vec] = seen.get(vec, 0) + 1
        if seen[vec] <= k:
            capped.append(vec)
    assert net.agg(vectors) == net.agg(capped)


def test_embedding_of_rule_program():
    program = parse_gmsc("X(0) :- p;\nX :- dia>=1 X;\nappointed: X;")
    automaton = compile_gmsc(program)
    embedded = embed_fcmpa(automaton)
    tree = parse_tree("({}({p}))")
    auto = run(automaton, tree, require_stabilization=False, max_rounds=6)
    net_rounds = gnn_run(embedded.gnn, tree, max_rounds=6)
    for t in range(min(len(auto.rounds), len(net_rounds))):
        for v in tree.nodes:
            assert embedded.decode(net_rounds[t][v]) == auto.rounds[t][v]


def test_system_for_counts():
    for k in (1, 3, 7, 19):
        system = system_for_counts(k)
        assert all(system.representable(F(i)) for i in range(k + 1))
        assert system.max_value() >= k


def test_embedding_needs_representable_bound():
    automaton = singleton_automaton(["x:u"])
    with pytest.raises(SystemTooSmallError):
        embed_fcmpa(automaton, system=FloatSystem(1, 1, 2))


def test_trace_tsv_format():
    net = identity_net()
    tree = parse_tree("({p})")
    rounds = gnn_run(net, tree)
    text = gnn.trace_tsv(net, rounds, list(tree.nodes))
    assert text.splitlines()[0] == "round\tnode\tvector"
    assert text.splitlines()[1].startswith("0\t0\t1")
