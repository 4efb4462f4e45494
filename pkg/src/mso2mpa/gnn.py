"""Recurrent graph neural networks over finite floating-point systems.

A network assigns each node a feature vector, re-computed each round by
aggregating the children's vectors and combining with the node's own; it
accepts a node once the vector lands in the accepting set.  Everything runs
on the exact saturating arithmetic from :mod:`.floats`; no host floats
appear anywhere.

Two constructions are provided: simple one-layer recurrences
(clip(q C + p A + b)) with element-wise saturating-sum aggregation folded in
increasing value order, and a one-hot embedding of bounded message-passing
automata whose aggregation clamps per-state child counts at the automaton's
bound.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Iterable, Optional, Sequence, Tuple

from .errors import HorizonExceededError, SystemTooSmallError
from .floats import FloatNum, FloatSystem, fmul, fsum, relu_star, saturating_sum

DEMO_SYSTEM = FloatSystem(4, 2, 2)  # integers 0..7 exact, max 7.5


@dataclass
class GnnF:
    """A recurrent network over a finite float system.

    ``agg`` folds the multiset of children vectors, ``com`` combines the
    node's previous vector with the aggregate.  ``bound`` documents the k
    with agg(M) = agg(M|k) when known.
    """

    dim: int
    system: FloatSystem
    signature: frozenset
    init: Callable
    agg: Callable
    com: Callable
    is_accepting: Callable
    bound: Optional[int] = None
    name: str = "gnn"


@dataclass(frozen=True)
class GnnReal:
    """Type-level stand-in for networks over the reals (not simulated here)."""

    dim: int
    signature: frozenset
    init: Callable
    agg: Callable
    com: Callable
    is_accepting: Callable


@dataclass(frozen=True)
class SimpleLayerParams:
    """Square matrices C, A and bias b of one clipped-linear combination."""

    own: tuple  # C, applied to the node's own vector
    neighbors: tuple  # A, applied to the aggregate
    bias: tuple

    def __post_init__(self):
        d = len(self.bias)
        if len(self.own) != d or len(self.neighbors) != d:
            raise ValueError("matrix sizes disagree with the bias length")
        for row in self.own + self.neighbors:
            if len(row) != d:
                raise ValueError("matrices must be square")


def saturation_bound(system: FloatSystem, probe_cap: int = 4096) -> int:
    """Smallest k with "summing k copies saturates" for every positive value.

    Saturating sums of a fixed positive value are nondecreasing and live in
    a finite set, so each value's partial sums become constant; the maximum
    step count over all start values and summands bounds how many identical
    children can ever matter to an element-wise sum.
    """
    values = [v for v in system.values() if v > 0]
    worst = 1
    for v in values:
        vf = system.nearest(v)
        for start in system.values():
            total = system.nearest(start)
            steps = 0
            while steps < probe_cap:
                nxt = fsum(total, vf)
                if nxt.value == total.value:
                    break
                total = nxt
                steps += 1
            else:
                raise SystemTooSmallError("no saturation within the probe cap")
            worst = max(worst, steps)
    return worst


def simple_layer_gnn(
    params: SimpleLayerParams,
    system: FloatSystem,
    signature: Iterable,
    init: Callable,
    is_accepting: Callable,
    name: str = "simple-layer",
) -> GnnF:
    """One clipped-linear layer; aggregation is the element-wise saturating
    sum taken in increasing value order."""
    dim = len(params.bias)

    def agg(vectors: Sequence[tuple]) -> tuple:
        return tuple(
            saturating_sum([vec[i] for vec in vectors], system) for i in range(dim)
        )

    def matvec(vector: tuple, matrix: tuple) -> list:
        out = []
        for j in range(dim):
            total = system.zero()
            for i in range(dim):
                total = fsum(total, fmul(vector[i], matrix[i][j]))
            out.append(total)
        return out

    def com(own: tuple, aggregate: tuple) -> tuple:
        left = matvec(own, params.own)
        right = matvec(aggregate, params.neighbors)
        return tuple(
            relu_star(fsum(fsum(left[j], right[j]), params.bias[j]))
            for j in range(dim)
        )

    return GnnF(
        dim=dim,
        system=system,
        signature=frozenset(signature),
        init=init,
        agg=agg,
        com=com,
        is_accepting=is_accepting,
        bound=saturation_bound(system) if system.size() <= 64 else None,
        name=name,
    )


def gnn_run(gnn: GnnF, model, max_rounds: Optional[int] = None) -> list:
    """Vector configurations per round, until two consecutive rounds agree.

    Raises HorizonExceededError (carrying the partial trace) when the
    network keeps moving past ``max_rounds``.
    """
    nodes = list(model.nodes)
    if max_rounds is None:
        max_rounds = len(nodes) + 4
    index = {v: i for i, v in enumerate(nodes)}
    children = [tuple(index[c] for c in model.successors(v)) for v in nodes]
    labels = [frozenset(model.label(v)) & gnn.signature for v in nodes]
    config = tuple(gnn.init(lab) for lab in labels)
    rounds = [config]
    for _ in range(max_rounds):
        nxt = tuple(
            gnn.com(config[i], gnn.agg([config[c] for c in children[i]]))
            for i in range(len(nodes))
        )
        if nxt == config:
            return rounds
        rounds.append(nxt)
        config = nxt
    raise HorizonExceededError(f"no stabilization within {max_rounds} rounds", rounds)


def gnn_accepts(gnn: GnnF, model, node, max_rounds: int = 10_000) -> bool:
    """True iff the node's vector is accepting in some round.

    The configuration sequence is deterministic over a finite value set, so
    it eventually repeats; scanning until the first global repeat covers
    every round.
    """
    nodes = list(model.nodes)
    node_index = nodes.index(node)
    index = {v: i for i, v in enumerate(nodes)}
    children = [tuple(index[c] for c in model.successors(v)) for v in nodes]
    labels = [frozenset(model.label(v)) & gnn.signature for v in nodes]
    config = tuple(gnn.init(lab) for lab in labels)
    seen = {config}
    while True:
        if gnn.is_accepting(config[node_index]):
            return True
        config = tuple(
            gnn.com(config[i], gnn.agg([config[c] for c in children[i]]))
            for i in range(len(nodes))
        )
        if config in seen:
            return False
        seen.add(config)
        if len(seen) > max_rounds:
            raise HorizonExceededError(f"no repeat within {max_rounds} rounds")


def system_for_counts(k: int) -> FloatSystem:
    """Smallest base-2 system representing the integers 0..k exactly."""
    sig = max(4, k.bit_length())
    exp = 1
    while 2 ** exp - 1 < sig:
        exp += 1
    return FloatSystem(sig, exp, 2)


@dataclass
class EmbeddedAutomaton:
    """A one-hot embedding of a bounded automaton, plus decoders."""

    gnn: GnnF
    automaton: object
    state_ids: tuple

    def decode(self, vector: tuple) -> int:
        """State id of a one-hot vector (the label block is ignored)."""
        ones = [i for i in range(len(self.state_ids)) if vector[i].value == 1]
        if len(ones) != 1:
            raise ValueError("vector is not a one-hot state encoding")
        return self.state_ids[ones[0]]

    def decode_name(self, vector: tuple) -> str:
        return self.automaton.state_name(self.decode(vector))


def embed_fcmpa(automaton, system: Optional[FloatSystem] = None) -> EmbeddedAutomaton:
    """Realize a bounded automaton as a network with one-hot state vectors.

    Feature layout: one coordinate per automaton state (exactly one carries
    1), then one 0/1 coordinate per signature symbol.  The label block is
    constant per node and lets the combination function select the right
    transition, since unlike the automaton it cannot see the node's label
    directly.  Aggregation sums the children's one-hot blocks element-wise
    with saturation and clamps each count at the automaton's bound; counts
    beyond the bound cannot change any transition, which is what "bounded"
    means.
    """
    if not automaton.deterministic:
        raise ValueError("embedding needs a deterministic automaton")
    state_ids = tuple(automaton.materialized_state_ids())
    if automaton.state_count is None or automaton.state_count != len(state_ids):
        raise ValueError("embedding needs an explicitly materialized state space")
    bound = automaton.bound
    if system is None:
        system = system_for_counts(max(bound, 1))
    if system.max_value() < max(bound, 1):
        raise SystemTooSmallError("system cannot represent counts up to the bound")
    one = system.one()
    zero = system.zero()
    cap = system.nearest(bound)
    if cap.value != bound:
        raise SystemTooSmallError("bound is not exactly representable")
    symbols = tuple(sorted(automaton.signature))
    n = len(state_ids)
    dim = n + len(symbols)
    position = {sid: i for i, sid in enumerate(state_ids)}

    def one_hot(sid, label) -> tuple:
        vec = [zero] * dim
        vec[position[sid]] = one
        for j, sym in enumerate(symbols):
            if sym in label:
                vec[n + j] = one
        return tuple(vec)

    def init(label):
        return one_hot(automaton.initial_id(label), label)

    def agg(vectors) -> tuple:
        out = []
        for i in range(dim):
            total = saturating_sum([vec[i] for vec in vectors], system)
            if total.value > bound:
                total = cap
            out.append(total)
        return tuple(out)

    def com(own: tuple, aggregate: tuple) -> tuple:
        label = frozenset(sym for j, sym in enumerate(symbols) if own[n + j].value == 1)
        prev = state_ids[next(i for i in range(n) if own[i].value == 1)]
        children = []
        for i in range(n):
            count = aggregate[i].value
            if count.denominator != 1:
                raise AssertionError("non-integer state count in aggregate")
            children.extend([state_ids[i]] * int(count))
        nxt = automaton.transition_ids(label, prev, children)
        return one_hot(nxt, label)

    def is_accepting(vector) -> bool:
        ones = [i for i in range(n) if vector[i].value == 1]
        return len(ones) == 1 and automaton.is_accepting(state_ids[ones[0]])

    gnn = GnnF(
        dim=dim,
        system=system,
        signature=automaton.signature,
        init=init,
        agg=agg,
        com=com,
        is_accepting=is_accepting,
        bound=bound,
        name=f"embedded({automaton.name})",
    )
    return EmbeddedAutomaton(gnn=gnn, automaton=automaton, state_ids=state_ids)


def trace_tsv(gnn: GnnF, rounds: list, nodes) -> str:
    """TSV rendering: round, node, comma-separated exact fractions."""
    lines = ["round\tnode\tvector"]
    for t, config in enumerate(rounds):
        for i, v in enumerate(nodes):
            vector = ",".join(str(x.value) for x in config[i])
            lines.append(f"{t}\t{v}\t{vector}")
    return "\n".join(lines) + "\n"
