"""Compile node-property formulas over labeled trees into synchronous
message-passing automata, simulate the automata (and recursive rule programs
and finite-float graph networks) on finite trees, and differential-check all
of it against brute-force logic oracles."""

from .automata import (
    Acceptance,
    Cmpa,
    FIXED_POINT,
    KripkeGraph,
    OMNIPRESENT,
    PowersetCmpa,
    ProductCmpa,
    RunTrace,
    STANDARD,
    SeededCmpa,
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
from .compiler import (
    CompilationUnit,
    FixedPointSets,
    atom_automaton,
    compile_gmsc,
    compile_mso,
    compile_pipeline,
    edge_automaton,
    equality_automaton,
    evaluate_at_root,
    exists_node,
    exists_set,
    finalize,
    fixed_point_sets,
    seed_with_fixed_points,
    singleton_automaton,
    verify_closure,
)
from .floats import FloatNum, FloatSystem, decode, fmul, fsum, nearest, relu_star
from .gnn import (
    DEMO_SYSTEM,
    EmbeddedAutomaton,
    GnnF,
    GnnReal,
    SimpleLayerParams,
    embed_fcmpa,
    gnn_accepts,
    gnn_run,
    simple_layer_gnn,
)
from .logic import (
    And,
    Atom,
    Diamond,
    EdgeAtom,
    EqAtom,
    ExistsNode,
    ExistsSet,
    FiniteDisjunction,
    GNot,
    GOr,
    Not,
    Prop,
    RuleProgram,
    SchemaVar,
    free_variables,
    gml_eval,
    gml_to_mso,
    k_extendable_check,
    modal_depth,
    mso_check,
    parse_gml,
    parse_gmsc,
    parse_mso,
    rule_accepts,
    rule_round,
    rule_truth_sequence,
)
from .trees import (
    Interpretation,
    Multiset,
    RootedTree,
    apply_interpretation,
    canonical_form,
    enumerate_extensions,
    enumerate_trees,
    k_prefix,
    parse_tree,
    serialize_tree,
    validate_tree,
)

__version__ = "0.1.0"
