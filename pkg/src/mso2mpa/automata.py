"""Counting message-passing automata and their execution engine.

An automaton here is the "one transition function per label set" variant: a
node's label selects the transition function once and for all, the function
itself reads the multiset of children states each round.  Transitions are
evaluators over capped child-state counts rather than extensional tables,
because composed automata (products, power sets) have state spaces far too
large to tabulate.

Composite automata intern their states and child-multiset accumulators to
small integer ids, so memoization keys stay cheap even when a state is a set
of pairs of sets.  States of power-set automata are materialized lazily: only
subsets actually reached during simulation exist, guarded by a state budget.

Every automaton carries three structural flags next to its bound:

* ``deterministic``: the initialization function yields a single state.
* ``forgetful``: transitions ignore the node's own previous state (the label
  still selects the transition function).
* ``quasi_acyclic``: a by-construction promise that a node never revisits a
  state it left; :func:`check_quasi_acyclic` probes it empirically.
"""

from __future__ import annotations

import enum
import itertools
import json
import math
from dataclasses import dataclass
from typing import Callable, Iterable, Iterator, Mapping, Optional, Sequence

from .errors import (
    BudgetExceededError,
    EmptyInitError,
    HorizonExceededError,
    MissingTransitionError,
    StateBudgetExceededError,
    UndecidableError,
)
from .trees import Multiset

LabelSet = frozenset


def cap_multiset(multiset: Multiset, k: int) -> Multiset:
    """Clip every multiplicity at ``k``."""
    return multiset.cap(k)


class Verdict(enum.Enum):
    ACCEPT = "accept"
    REJECT = "reject"
    NEITHER = "neither"


@dataclass(frozen=True)
class Acceptance:
    """How a run's verdict is read off.

    ``standard`` accepts once an accepting state is visited at the node;
    ``fixed_point`` requires the node's state to become constant and that
    constant to be accepting (rejecting likewise); ``omnipresent`` requires
    every run to sit in an accepting state at one common round (optionally a
    given one).
    """

    kind: str
    at_round: Optional[int] = None

    def __post_init__(self):
        if self.kind not in ("standard", "fixed_point", "omnipresent"):
            raise ValueError(f"unknown acceptance kind {self.kind!r}")


STANDARD = Acceptance("standard")
FIXED_POINT = Acceptance("fixed_point")
OMNIPRESENT = Acceptance("omnipresent")


class Cmpa:
    """Base class: interning, memoization, and the public simulation API."""

    def __init__(
        self,
        *,
        name: str,
        signature: Iterable,
        bound: int,
        deterministic: bool,
        forgetful: bool,
        quasi_acyclic: bool,
        state_count: int,
    ):
        self.name = name
        self.signature = frozenset(signature)
        self.bound = bound
        self.deterministic = deterministic
        self.forgetful = forgetful
        self.quasi_acyclic = quasi_acyclic
        self.state_count = state_count
        self._init_memo: dict = {}
        self._add_memo: dict = {}
        self._delta_memo: dict = {}  # label -> {acc (or (prev, acc)) -> state}

    # -- hooks implemented by subclasses (all ids are ints local to self) --

    def _initial_ids(self, label: LabelSet) -> tuple:
        raise NotImplementedError

    def _acc_empty_id(self) -> int:
        raise NotImplementedError

    def _acc_add_id(self, acc_id: int, state_id: int) -> int:
        raise NotImplementedError

    def _delta_id(self, label: LabelSet, prev_id: Optional[int], acc_id: int) -> int:
        raise NotImplementedError

    def is_accepting(self, state_id: int) -> bool:
        raise NotImplementedError

    def is_rejecting(self, state_id: int) -> bool:
        raise NotImplementedError

    def state_value(self, state_id: int):
        raise NotImplementedError

    def state_name(self, state_id: int) -> str:
        return _render_value(self.state_value(state_id))

    def materialized_state_ids(self) -> range:
        raise NotImplementedError

    # -- shared machinery --

    def normalize_label(self, label) -> LabelSet:
        return frozenset(label) & self.signature

    def initial_options(self, label) -> tuple:
        label = self.normalize_label(label)
        cached = self._init_memo.get(label)
        if cached is None:
            cached = tuple(self._initial_ids(label))
            if not cached:
                raise EmptyInitError(f"{self.name}: no initial state for {sorted(label)}")
            self._init_memo[label] = cached
        return cached

    def initial_id(self, label) -> int:
        options = self.initial_options(label)
        if len(options) != 1:
            raise ValueError(f"{self.name} is nondeterministic; pick an initial choice")
        return options[0]

    def acc_add(self, acc_id: int, state_id: int) -> int:
        key = (acc_id, state_id)
        out = self._add_memo.get(key)
        if out is None:
            out = self._acc_add_id(acc_id, state_id)
            self._add_memo[key] = out
        return out

    def _delta_memoized(self, label: LabelSet, prev_id: Optional[int], acc_id: int) -> int:
        per_label = self._delta_memo.get(label)
        if per_label is None:
            per_label = self._delta_memo[label] = {}
        key = acc_id if self.forgetful else (prev_id, acc_id)
        out = per_label.get(key)
        if out is None:
            out = self._delta_id(label, prev_id, acc_id)
            per_label[key] = out
        return out

    def transition_ids(self, label: LabelSet, prev_id: Optional[int], child_ids) -> int:
        acc = self._acc_empty_id()
        for child in child_ids:
            acc = self.acc_add(acc, child)
        return self._delta_memoized(label, prev_id, acc)

    # -- value-level conveniences (tests and small callers) --

    def state_id_of(self, value) -> int:
        for sid in self.materialized_state_ids():
            if self.state_value(sid) == value:
                return sid
        raise KeyError(f"unknown state value {value!r}")

    def delta(self, label, multiset: Multiset, prev=None):
        """Spec-facing transition on state values and an explicit multiset."""
        label = self.normalize_label(label)
        if self.bound is not None:
            multiset = multiset.cap(self.bound)
        children = []
        for value, count in multiset.items():
            children.extend([self.state_id_of(value)] * count)
        prev_id = None if prev is None else self.state_id_of(prev)
        return self.state_value(self.transition_ids(label, prev_id, children))

    def initial(self, label):
        return self.state_value(self.initial_id(label))

    def describe(self) -> str:
        """JSON description: states, bound, flags; transitions stay compositional."""
        payload = {
            "name": self.name,
            "signature": sorted(self.signature),
            "bound": self.bound,
            "deterministic": self.deterministic,
            "forgetful": self.forgetful,
            "quasi_acyclic_by_construction": self.quasi_acyclic,
            "state_count": self.state_count,
            "materialized_states": len(self.materialized_state_ids()),
        }
        ids = self.materialized_state_ids()
        if len(ids) <= 64:
            payload["states"] = [self.state_name(s) for s in ids]
            payload["accepting"] = [self.state_name(s) for s in ids if self.is_accepting(s)]
            payload["rejecting"] = [self.state_name(s) for s in ids if self.is_rejecting(s)]
        return json.dumps(payload, indent=2, sort_keys=True)


def _render_value(value) -> str:
    if isinstance(value, frozenset):
        return "{" + ",".join(sorted(_render_value(v) for v in value)) + "}"
    if isinstance(value, tuple):
        return "(" + ",".join(_render_value(v) for v in value) + ")"
    return str(value)


class TableCmpa(Cmpa):
    """Automaton over an explicit state list with a user transition function.

    ``init(label)`` returns a state (or a tuple of states when
    nondeterministic); ``delta(label, multiset)`` — or
    ``delta(label, prev_state, multiset)`` when not forgetful — returns the
    next state.  The engine caps child counts at the bound before calling
    ``delta``, which is exactly what makes the automaton bounded.
    """

    def __init__(
        self,
        *,
        name: str,
        signature: Iterable,
        states: Sequence,
        init: Callable,
        delta: Callable,
        accepting: Iterable,
        rejecting: Iterable = (),
        bound: int,
        deterministic: bool = True,
        forgetful: bool = True,
        quasi_acyclic: bool = False,
        state_names: Optional[Callable] = None,
    ):
        super().__init__(
            name=name,
            signature=signature,
            bound=bound,
            deterministic=deterministic,
            forgetful=forgetful,
            quasi_acyclic=quasi_acyclic,
            state_count=len(states),
        )
        self.states = tuple(states)
        self._index = {s: i for i, s in enumerate(self.states)}
        if len(self._index) != len(self.states):
            raise ValueError("duplicate states")
        self._init = init
        self._user_delta = delta
        accepting = set(accepting)
        rejecting = set(rejecting)
        if accepting & rejecting:
            raise ValueError("accepting and rejecting states must be disjoint")
        unknown = (accepting | rejecting) - set(self.states)
        if unknown:
            raise ValueError(f"unknown verdict states {unknown!r}")
        self._accepting = frozenset(self._index[s] for s in accepting)
        self._rejecting = frozenset(self._index[s] for s in rejecting)
        self._names = state_names
        self._acc_ids: dict = {(): 0}
        self._acc_vals: list = [()]
        self._multiset_cache: dict = {}

    def _initial_ids(self, label):
        try:
            out = self._init(label)
        except KeyError as exc:
            raise MissingTransitionError(
                f"{self.name}: no initialization for label {sorted(label)}"
            ) from exc
        if self.deterministic:
            return (self._index[out],)
        return tuple(sorted(self._index[s] for s in out))

    def _acc_empty_id(self) -> int:
        return 0

    def _acc_add_id(self, acc_id, state_id):
        counts = dict(self._acc_vals[acc_id])
        sid_count = counts.get(state_id, 0)
        if sid_count < self.bound:
            counts[state_id] = sid_count + 1
        key = tuple(sorted(counts.items()))
        got = self._acc_ids.get(key)
        if got is None:
            got = len(self._acc_vals)
            self._acc_ids[key] = got
            self._acc_vals.append(key)
        return got

    def _delta_id(self, label, prev_id, acc_id):
        multiset = self._multiset_cache.get(acc_id)
        if multiset is None:
            multiset = Multiset(
                counts={self.states[sid]: c for sid, c in self._acc_vals[acc_id]}
            )
            self._multiset_cache[acc_id] = multiset
        try:
            if self.forgetful:
                out = self._user_delta(label, multiset)
            else:
                out = self._user_delta(label, self.states[prev_id], multiset)
        except KeyError as exc:
            raise MissingTransitionError(
                f"{self.name}: no transition for label {sorted(label)}"
            ) from exc
        return self._index[out]

    def is_accepting(self, state_id):
        return state_id in self._accepting

    def is_rejecting(self, state_id):
        return state_id in self._rejecting

    def state_value(self, state_id):
        return self.states[state_id]

    def state_name(self, state_id):
        if self._names is not None:
            return self._names(self.states[state_id])
        return _render_value(self.states[state_id])

    def materialized_state_ids(self):
        return range(len(self.states))

    def state_id_of(self, value):
        return self._index[value]


class NegatedCmpa(Cmpa):
    """Same automaton, accepting and rejecting states swapped."""

    def __init__(self, inner: Cmpa):
        super().__init__(
            name=f"not({inner.name})",
            signature=inner.signature,
            bound=inner.bound,
            deterministic=inner.deterministic,
            forgetful=inner.forgetful,
            quasi_acyclic=inner.quasi_acyclic,
            state_count=inner.state_count,
        )
        self.inner = inner

    def _initial_ids(self, label):
        return self.inner.initial_options(label)

    def _acc_empty_id(self):
        return self.inner._acc_empty_id()

    def _acc_add_id(self, acc_id, state_id):
        return self.inner.acc_add(acc_id, state_id)

    def _delta_id(self, label, prev_id, acc_id):
        return self.inner._delta_memoized(label, prev_id, acc_id)

    def is_accepting(self, state_id):
        return self.inner.is_rejecting(state_id)

    def is_rejecting(self, state_id):
        return self.inner.is_accepting(state_id)

    def state_value(self, state_id):
        return self.inner.state_value(state_id)

    def state_name(self, state_id):
        return self.inner.state_name(state_id)

    def materialized_state_ids(self):
        return self.inner.materialized_state_ids()

    def state_id_of(self, value):
        return self.inner.state_id_of(value)


def negate(automaton: Cmpa) -> Cmpa:
    """Swap accepting and rejecting states; everything else bit-identical."""
    if isinstance(automaton, NegatedCmpa):
        return automaton.inner
    return NegatedCmpa(automaton)


class ProductCmpa(Cmpa):
    """Synchronous product: componentwise init and transitions.

    Each component only reads the labels in its own signature.  The default
    verdict sets are "both accept" / "either rejects"; ``reject_mode`` can be
    set to ``first_rejects_second_accepts`` for the quantifier construction,
    where a pair only counts as rejecting while the bookkeeping component
    (the second one) is in an accepting state.
    """

    def __init__(self, first: Cmpa, second: Cmpa, *, reject_mode: str = "either", name=None):
        if not (first.forgetful and second.forgetful):
            raise ValueError("product requires forgetful components")
        if not (first.deterministic and second.deterministic):
            raise ValueError("product requires deterministic components")
        if reject_mode not in ("either", "first_rejects_second_accepts"):
            raise ValueError(f"unknown reject mode {reject_mode!r}")
        counts = (first.state_count, second.state_count)
        super().__init__(
            name=name or f"({first.name} * {second.name})",
            signature=first.signature | second.signature,
            bound=None if first.bound is None or second.bound is None
            else max(first.bound, second.bound),
            deterministic=True,
            forgetful=True,
            quasi_acyclic=first.quasi_acyclic and second.quasi_acyclic,
            state_count=None if None in counts else counts[0] * counts[1],
        )
        self.first = first
        self.second = second
        self.reject_mode = reject_mode
        self._state_ids: dict = {}
        self._state_vals: list = []
        self._acc_ids: dict = {}
        self._acc_vals: list = []
        self._label_split: dict = {}

    def _intern(self, table: dict, values: list, key) -> int:
        got = table.get(key)
        if got is None:
            got = len(values)
            table[key] = got
            values.append(key)
        return got

    def _split(self, label):
        parts = self._label_split.get(label)
        if parts is None:
            parts = (label & self.first.signature, label & self.second.signature)
            self._label_split[label] = parts
        return parts

    def _initial_ids(self, label):
        la, lb = self._split(label)
        pair = (self.first.initial_id(la), self.second.initial_id(lb))
        return (self._intern(self._state_ids, self._state_vals, pair),)

    def _acc_empty_id(self):
        pair = (self.first._acc_empty_id(), self.second._acc_empty_id())
        return self._intern(self._acc_ids, self._acc_vals, pair)

    def _acc_add_id(self, acc_id, state_id):
        acc_a, acc_b = self._acc_vals[acc_id]
        sa, sb = self._state_vals[state_id]
        pair = (self.first.acc_add(acc_a, sa), self.second.acc_add(acc_b, sb))
        return self._intern(self._acc_ids, self._acc_vals, pair)

    def _delta_id(self, label, prev_id, acc_id):
        la, lb = self._split(label)
        acc_a, acc_b = self._acc_vals[acc_id]
        pair = (
            self.first._delta_memoized(la, None, acc_a),
            self.second._delta_memoized(lb, None, acc_b),
        )
        return self._intern(self._state_ids, self._state_vals, pair)

    def is_accepting(self, state_id):
        sa, sb = self._state_vals[state_id]
        return self.first.is_accepting(sa) and self.second.is_accepting(sb)

    def is_rejecting(self, state_id):
        sa, sb = self._state_vals[state_id]
        if self.reject_mode == "either":
            return self.first.is_rejecting(sa) or self.second.is_rejecting(sb)
        return self.first.is_rejecting(sa) and self.second.is_accepting(sb)

    def component_ids(self, state_id) -> tuple:
        """The pair of component state ids behind a product state."""
        return self._state_vals[state_id]

    def state_value(self, state_id):
        sa, sb = self._state_vals[state_id]
        return (self.first.state_value(sa), self.second.state_value(sb))

    def state_name(self, state_id):
        sa, sb = self._state_vals[state_id]
        return f"({self.first.state_name(sa)},{self.second.state_name(sb)})"

    def materialized_state_ids(self):
        return range(len(self._state_vals))


def product(first: Cmpa, second: Cmpa) -> Cmpa:
    """Run two automata side by side; accept iff both do, reject iff either does."""
    return ProductCmpa(first, second)


class PowersetCmpa(Cmpa):
    """Deterministic tracker of every run of a forgetful automaton at once.

    A state is the set of inner states some run could be in.  The transition
    applies the inner transition to every way of picking one inner state per
    child, optionally under each way of toggling a guessed label on the node
    itself (``guess``), and collects the outcomes.

    ``mode`` fixes the verdict sets: ``existential`` accepts when some
    tracked run accepts (rejects when none accepts and some rejects);
    ``omnipresent`` accepts when every tracked run accepts (rejects when all
    reject).  The bound grows to bound * state_count: that many identical
    children can still be told apart by picking distinct inner states.
    """

    def __init__(
        self,
        inner: Cmpa,
        *,
        mode: str,
        guess: Optional[str] = None,
        name: Optional[str] = None,
        state_budget: int = 200_000,
        drop_rejecting: bool = False,
        prune: Optional[Callable] = None,
    ):
        """``prune`` marks inner states as dead: never again accepting or
        rejecting, and closed under transitions (dead children only ever
        produce dead parents).  Dead states are dropped from tracked sets,
        which cannot change any verdict at any round but collapses the
        reachable subset space."""
        if not inner.forgetful:
            raise ValueError("power-set construction requires a forgetful automaton")
        if mode not in ("existential", "omnipresent"):
            raise ValueError(f"unknown mode {mode!r}")
        signature = inner.signature - ({guess} if guess else set())
        # 2**n overflows anything representable once n is itself a power-set
        # count; None stands for "finite but astronomical".
        inner_count = inner.state_count
        if inner_count is not None and inner_count <= 4096:
            count = 2 ** inner_count
        else:
            count = None
        bound = (
            inner.bound * inner_count
            if inner.bound is not None and inner_count is not None
            else None
        )
        super().__init__(
            name=name or f"powerset[{mode}]({inner.name})",
            signature=signature,
            bound=bound,
            deterministic=True,
            forgetful=True,
            quasi_acyclic=inner.quasi_acyclic,
            state_count=count,
        )
        self.inner = inner
        self.mode = mode
        self.guess = guess
        self.state_budget = state_budget
        self.drop_rejecting = drop_rejecting
        self.prune = prune
        self._state_ids: dict = {}
        self._state_vals: list = []
        self._acc_ids: dict = {}
        self._acc_vals: list = []
        self._accept_cache: dict = {}
        self._reject_cache: dict = {}
        # (inner acc, tracked state) -> frozenset of inner accs; the per-pair
        # results are unioned in C, which is what makes folds over large
        # tracked sets affordable.
        self._pair_add_memo: dict = {}

    def _intern_state(self, members: frozenset) -> int:
        got = self._state_ids.get(members)
        if got is None:
            if len(self._state_vals) >= self.state_budget:
                raise StateBudgetExceededError(
                    f"{self.name}: more than {self.state_budget} reachable subset states"
                )
            got = len(self._state_vals)
            self._state_ids[members] = got
            self._state_vals.append(members)
        return got

    def _intern_acc(self, accs: frozenset) -> int:
        got = self._acc_ids.get(accs)
        if got is None:
            got = len(self._acc_vals)
            self._acc_ids[accs] = got
            self._acc_vals.append(accs)
        return got

    def _variants(self, label):
        if self.guess is None:
            return (label,)
        return (label, label | {self.guess})

    def _initial_ids(self, label):
        members = set()
        for variant in self._variants(label):
            members.update(self.inner.initial_options(variant))
        if self.prune is not None:
            members = {m for m in members if not self.prune(m)}
        return (self._intern_state(frozenset(members)),)

    def _acc_empty_id(self):
        return self._intern_acc(frozenset((self.inner._acc_empty_id(),)))

    def _acc_add_id(self, acc_id, state_id):
        accs = self._acc_vals[acc_id]
        per_state = self._pair_add_memo.get(state_id)
        if per_state is None:
            per_state = self._pair_add_memo[state_id] = {}
        parts = []
        append = parts.append
        lookup = per_state.get
        for a in accs:
            got = lookup(a)
            if got is None:
                inner_add = self.inner.acc_add
                members = self._state_vals[state_id]
                got = per_state[a] = frozenset(inner_add(a, q) for q in members)
            append(got)
        return self._intern_acc(frozenset().union(*parts))

    def _delta_id(self, label, prev_id, acc_id):
        accs = self._acc_vals[acc_id]
        inner = self.inner
        members = set()
        add = members.add
        for variant in self._variants(label):
            per_label = inner._delta_memo.get(variant)
            if per_label is None:
                per_label = inner._delta_memo[variant] = {}
            lookup = per_label.get
            inner_delta = inner._delta_id
            for a in accs:
                out = lookup(a)
                if out is None:
                    out = per_label[a] = inner_delta(variant, None, a)
                add(out)
        if self.prune is not None:
            members = {m for m in members if not self.prune(m)}
        return self._intern_state(frozenset(members))

    def is_accepting(self, state_id):
        got = self._accept_cache.get(state_id)
        if got is None:
            members = self._state_vals[state_id]
            inner_ok = self.inner.is_accepting
            if self.mode == "existential":
                got = any(inner_ok(q) for q in members)
            else:
                got = all(inner_ok(q) for q in members)
            self._accept_cache[state_id] = got
        return got

    def is_rejecting(self, state_id):
        if self.drop_rejecting:
            return False
        got = self._reject_cache.get(state_id)
        if got is None:
            members = self._state_vals[state_id]
            if self.mode == "existential":
                got = (not self.is_accepting(state_id)) and any(
                    self.inner.is_rejecting(q) for q in members
                )
            else:
                got = all(self.inner.is_rejecting(q) for q in members)
            self._reject_cache[state_id] = got
        return got

    def members(self, state_id) -> frozenset:
        """Inner state ids tracked by a subset state."""
        return self._state_vals[state_id]

    def state_value(self, state_id):
        return frozenset(self.inner.state_value(q) for q in self._state_vals[state_id])

    def state_name(self, state_id):
        members = self._state_vals[state_id]
        return "{" + ",".join(sorted(self.inner.state_name(q) for q in members)) + "}"

    def materialized_state_ids(self):
        return range(len(self._state_vals))


def determinize(automaton: Cmpa, mode: str = "existential", *, state_budget: int = 200_000) -> Cmpa:
    """Power-set determinization of a forgetful bounded automaton.

    ``existential`` preserves acceptance/rejection (standard and
    fixed-point); ``omnipresent`` turns common-round acceptance of the input
    into standard acceptance of the output.
    """
    return PowersetCmpa(automaton, mode=mode, state_budget=state_budget)


class SeededCmpa(Cmpa):
    """Same transitions as ``inner``, but initialization draws from given
    per-label state sets and rejecting states are dropped."""

    def __init__(self, inner: Cmpa, init_sets: Mapping, *, name=None):
        super().__init__(
            name=name or f"seeded({inner.name})",
            signature=inner.signature,
            bound=inner.bound,
            deterministic=False,
            forgetful=inner.forgetful,
            quasi_acyclic=inner.quasi_acyclic,
            state_count=inner.state_count,
        )
        self.inner = inner
        self._init_sets = {frozenset(k): tuple(sorted(v)) for k, v in init_sets.items()}
        for label, options in self._init_sets.items():
            if not options:
                raise EmptyInitError(f"no seed states for label {sorted(label)}")

    def _initial_ids(self, label):
        try:
            return self._init_sets[label]
        except KeyError as exc:
            raise MissingTransitionError(
                f"{self.name}: no seeds for label {sorted(label)}"
            ) from exc

    def _acc_empty_id(self):
        return self.inner._acc_empty_id()

    def _acc_add_id(self, acc_id, state_id):
        return self.inner.acc_add(acc_id, state_id)

    def _delta_id(self, label, prev_id, acc_id):
        return self.inner._delta_memoized(label, prev_id, acc_id)

    def is_accepting(self, state_id):
        return self.inner.is_accepting(state_id)

    def is_rejecting(self, state_id):
        return False

    def state_value(self, state_id):
        return self.inner.state_value(state_id)

    def state_name(self, state_id):
        return self.inner.state_name(state_id)

    def materialized_state_ids(self):
        return self.inner.materialized_state_ids()

    def state_id_of(self, value):
        return self.inner.state_id_of(value)


# ---------------------------------------------------------------------------
# Models and simulation


@dataclass(frozen=True)
class KripkeGraph:
    """Minimal directed graph model for the simulator (not validated as a tree)."""

    n: int
    edges: tuple
    labels: tuple

    @property
    def nodes(self) -> range:
        return range(self.n)

    def successors(self, v: int):
        return tuple(d for s, d in self.edges if s == v)

    def label(self, v: int):
        return self.labels[v]


@dataclass
class RunTrace:
    """Global configurations per round, with stabilization metadata."""

    automaton: Cmpa
    node_ids: tuple
    rounds: list
    stabilized_at: Optional[int]
    init_choice: Optional[tuple] = None

    def state_id(self, t: int, v: int) -> int:
        return self.rounds[t][v]

    def state_name(self, t: int, v: int) -> str:
        return self.automaton.state_name(self.rounds[t][v])

    def node_sequence(self, v: int) -> tuple:
        return tuple(r[v] for r in self.rounds)

    def to_tsv(self) -> str:
        lines = ["round\tnode\tstate_debug_name"]
        for t, config in enumerate(self.rounds):
            for v in self.node_ids:
                lines.append(f"{t}\t{v}\t{self.automaton.state_name(config[v])}")
        return "\n".join(lines) + "\n"


def _model_context(automaton: Cmpa, model):
    nodes = list(model.nodes)
    labels = [automaton.normalize_label(model.label(v)) for v in nodes]
    index = {v: i for i, v in enumerate(nodes)}
    children = [tuple(index[c] for c in model.successors(v)) for v in nodes]
    return nodes, labels, children


def _initial_config(automaton, labels, init_choice_ids=None):
    if init_choice_ids is not None:
        return tuple(init_choice_ids)
    return tuple(automaton.initial_id(lab) for lab in labels)


def _next_config(automaton, labels, children, config):
    transition = automaton.transition_ids
    return tuple(
        transition(labels[i], config[i], tuple(config[c] for c in children[i]))
        for i in range(len(labels))
    )


def step(automaton: Cmpa, model, config: Mapping):
    """One synchronous round on a value-level configuration (node -> state)."""
    nodes, labels, children = _model_context(automaton, model)
    ids = tuple(automaton.state_id_of(config[v]) for v in nodes)
    nxt = _next_config(automaton, labels, children, ids)
    return {v: automaton.state_value(nxt[i]) for i, v in enumerate(nodes)}


def run(
    automaton: Cmpa,
    model,
    max_rounds: Optional[int] = None,
    init_choice: Optional[Mapping] = None,
    require_stabilization: bool = True,
) -> RunTrace:
    """Simulate until two consecutive global configurations coincide.

    Raises HorizonExceededError (carrying the partial trace) if stabilization
    does not happen within ``max_rounds``; automata that cycle without
    stabilizing always do that, use :func:`decide` for verdicts on them.
    With ``require_stabilization`` off the partial trace is returned instead.
    """
    nodes, labels, children = _model_context(automaton, model)
    if max_rounds is None:
        max_rounds = len(nodes) + 4
    if automaton.deterministic:
        if init_choice is not None:
            raise ValueError("deterministic automata take no initial choice")
        config = _initial_config(automaton, labels)
        choice_ids = None
    else:
        if init_choice is None:
            raise ValueError("nondeterministic automata need an initial choice")
        choice_ids = tuple(
            init_choice[v] if isinstance(init_choice[v], int) else automaton.state_id_of(init_choice[v])
            for v in nodes
        )
        for i, sid in enumerate(choice_ids):
            if sid not in automaton.initial_options(labels[i]):
                raise ValueError(f"initial choice at node {nodes[i]} is not available")
        config = _initial_config(automaton, labels, choice_ids)
    rounds = [config]
    stabilized = None
    for _ in range(max_rounds):
        nxt = _next_config(automaton, labels, children, config)
        if nxt == config:
            stabilized = len(rounds) - 1
            break
        rounds.append(nxt)
        config = nxt
    trace = RunTrace(automaton, tuple(nodes), rounds, stabilized, choice_ids)
    if stabilized is None and require_stabilization:
        raise HorizonExceededError(
            f"no stabilization within {max_rounds} rounds", trace
        )
    return trace


def _run_to_cycle(automaton, labels, children, config, max_rounds):
    """Configurations until the first global repeat; returns (configs, cycle_start)."""
    seen = {config: 0}
    configs = [config]
    for _ in range(max_rounds):
        config = _next_config(automaton, labels, children, config)
        if config in seen:
            return configs, seen[config]
        seen[config] = len(configs)
        configs.append(config)
    raise UndecidableError(f"no configuration repeat within {max_rounds} rounds")


def initial_configs(automaton: Cmpa, model, max_runs: int = 1_000_000) -> Iterator[tuple]:
    """All initial-choice vectors (each an id tuple in node order)."""
    _, labels, _ = _model_context(automaton, model)
    options = [automaton.initial_options(lab) for lab in labels]
    total = math.prod(len(o) for o in options)
    if total > max_runs:
        raise BudgetExceededError(f"{total} initial-choice vectors exceed cap {max_runs}")
    return itertools.product(*options)


def enumerate_runs(
    automaton: Cmpa, model, max_rounds: int = 10_000, max_runs: int = 1_000_000
) -> Iterator[tuple]:
    """Yield (init_config, configs, cycle_start) over all initial choices."""
    nodes, labels, children = _model_context(automaton, model)
    options = [automaton.initial_options(lab) for lab in labels]
    total = math.prod(len(o) for o in options)
    if total > max_runs:
        raise BudgetExceededError(f"{total} initial-choice vectors exceed cap {max_runs}")
    for combo in itertools.product(*options):
        configs, cycle_start = _run_to_cycle(automaton, labels, children, combo, max_rounds)
        yield combo, configs, cycle_start


def _sequence_classifier(root_states: Sequence, cycle_start: int):
    """(visited set, fixed point state or None) of an eventually periodic sequence."""
    visited = set(root_states)
    tail = root_states[cycle_start:]
    fixed = tail[0] if all(s == tail[0] for s in tail) else None
    return visited, fixed


def decide(
    automaton: Cmpa,
    model,
    root,
    acceptance: Acceptance,
    max_rounds: int = 10_000,
    max_runs: int = 1_000_000,
) -> Verdict:
    """Tri-state verdict at ``root`` under the given acceptance condition.

    Rejecting is deliberately stronger than "not accepting": an automaton
    with empty verdict sets answers NEITHER everywhere.
    """
    nodes, labels, children = _model_context(automaton, model)
    root_index = list(nodes).index(root)
    options = [automaton.initial_options(lab) for lab in labels]
    total = math.prod(len(o) for o in options)
    if total > max_runs:
        raise BudgetExceededError(f"{total} initial-choice vectors exceed cap {max_runs}")

    descriptors = []
    for combo in itertools.product(*options):
        configs, cycle_start = _run_to_cycle(automaton, labels, children, combo, max_rounds)
        root_states = tuple(c[root_index] for c in configs)
        descriptors.append((root_states, cycle_start))

    accepting = automaton.is_accepting
    rejecting = automaton.is_rejecting

    if acceptance.kind == "standard":
        hits = [any(accepting(s) for s in seq) for seq, _ in descriptors]
        if any(hits):
            return Verdict.ACCEPT
        if any(any(rejecting(s) for s in seq) for seq, _ in descriptors):
            return Verdict.REJECT
        return Verdict.NEITHER

    if acceptance.kind == "fixed_point":
        fixeds = [_sequence_classifier(seq, start)[1] for seq, start in descriptors]
        if any(f is not None and accepting(f) for f in fixeds):
            return Verdict.ACCEPT
        if any(f is not None and rejecting(f) for f in fixeds):
            return Verdict.REJECT
        return Verdict.NEITHER

    k = omnipresent_round(
        descriptors, accepting, at_round=acceptance.at_round
    )
    if k is not None:
        return Verdict.ACCEPT
    k = omnipresent_round(descriptors, rejecting, at_round=acceptance.at_round)
    if k is not None:
        return Verdict.REJECT
    return Verdict.NEITHER


def omnipresent_round(descriptors, predicate, at_round=None, lcm_cap: int = 10_000):
    """Smallest round at which every eventually-periodic sequence satisfies
    ``predicate``, or None.  ``descriptors`` are (states, cycle_start) pairs."""

    def state_at(seq, cycle_start, k):
        if k < len(seq):
            return seq[k]
        period = len(seq) - cycle_start
        return seq[cycle_start + (k - cycle_start) % period]

    if at_round is not None:
        ks = [at_round]
    else:
        horizon = max(start for _, start in descriptors) if descriptors else 0
        lcm = 1
        for seq, start in descriptors:
            lcm = math.lcm(lcm, len(seq) - start)
            if lcm > lcm_cap:
                raise UndecidableError("period lcm too large for omnipresence search")
        ks = range(horizon + lcm)
    for k in ks:
        if all(predicate(state_at(seq, start, k)) for seq, start in descriptors):
            return k
    return None


def omnipresent_accept_round(
    automaton: Cmpa, model, root, max_rounds: int = 10_000, max_runs: int = 1_000_000
) -> Optional[int]:
    """First round at which every run sits in an accepting state at ``root``."""
    nodes, labels, children = _model_context(automaton, model)
    root_index = list(nodes).index(root)
    descriptors = []
    for combo in initial_configs(automaton, model, max_runs):
        configs, cycle_start = _run_to_cycle(automaton, labels, children, combo, max_rounds)
        descriptors.append((tuple(c[root_index] for c in configs), cycle_start))
    return omnipresent_round(descriptors, automaton.is_accepting)


def possible_state_sets(automaton: Cmpa, model, rounds: int) -> list:
    """Per round, per node: the set of states some run can be in.

    For a forgetful automaton the runs of different nodes' initial choices
    are independent, so the set at (v, t) is the image of the transition
    over all ways of picking one member per child from round t-1; that is
    computed by folding children sets through the accumulator algebra.
    The result covers every initial-choice vector without enumerating them.
    """
    if not automaton.forgetful:
        raise ValueError("possible-state sets need a forgetful automaton")
    nodes, labels, children = _model_context(automaton, model)
    current = [frozenset(automaton.initial_options(lab)) for lab in labels]
    out = [current]
    for _ in range(rounds):
        nxt = []
        for i in range(len(nodes)):
            accs = {automaton._acc_empty_id()}
            for child in children[i]:
                accs = {
                    automaton.acc_add(acc, sid)
                    for acc in accs
                    for sid in current[child]
                }
            label = labels[i]
            nxt.append(
                frozenset(
                    automaton._delta_memoized(label, None, acc) for acc in accs
                )
            )
        current = nxt
        out.append(current)
    return out


# ---------------------------------------------------------------------------
# Structural probes


@dataclass
class QuasiAcyclicityReport:
    passed: bool
    counterexample: Optional[dict] = None

    def __bool__(self) -> bool:
        return self.passed


def check_quasi_acyclic(
    automaton: Cmpa,
    corpus: Iterable,
    max_rounds: int = 10_000,
    max_runs: int = 100_000,
) -> QuasiAcyclicityReport:
    """Scan runs over the corpus for a node revisiting a state it left.

    This is an empirical probe over the given models, not a proof; compiled
    automata additionally carry a by-construction flag.
    """
    for model_index, model in enumerate(corpus):
        nodes, labels, children = _model_context(automaton, model)
        options = [automaton.initial_options(lab) for lab in labels]
        total = math.prod(len(o) for o in options)
        if total > max_runs:
            raise BudgetExceededError("too many runs for quasi-acyclicity scan")
        for combo in itertools.product(*options):
            configs, cycle_start = _run_to_cycle(automaton, labels, children, combo, max_rounds)
            period = len(configs) - cycle_start
            # One extra period exposes revisits that cross the cycle seam.
            extended = configs + configs[cycle_start:cycle_start + period]
            for i, v in enumerate(nodes):
                seq = [c[i] for c in extended]
                witness = _left_state_revisit(seq)
                if witness is not None:
                    return QuasiAcyclicityReport(
                        False,
                        {
                            "model_index": model_index,
                            "node": v,
                            "rounds": witness,
                            "states": [automaton.state_name(seq[t]) for t in witness],
                        },
                    )
    return QuasiAcyclicityReport(True)


def _left_state_revisit(seq) -> Optional[tuple]:
    last_seen = {}
    for j, state in enumerate(seq):
        if state in last_seen:
            i = last_seen[state]
            between = [m for m in range(i + 1, j) if seq[m] != state]
            if between:
                return (i, between[0], j)
        last_seen[state] = j
    return None
