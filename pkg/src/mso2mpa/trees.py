"""Finite rooted labeled trees.

Trees are immutable once built: nodes are dense integers assigned in preorder,
edges run root-to-leaf, and children are unordered (all verdict-producing
semantics downstream are multiset-based, so child order never matters).  The
canonical text form sorts children by their recursive canonical string, which
gives a cheap isomorphism key for deduplication.

Text format::

    tree     := '(' labelset tree* ')'
    labelset := '{' [label (',' label)*] '}'
    label    := ident | 'x:' ident | 'X:' ident

``x:name`` / ``X:name`` are the reserved spellings for node-variable and
set-variable induced labels; plain idents are ordinary proposition symbols.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, Iterator, Mapping, Optional, Sequence

from .errors import (
    BudgetExceededError,
    CycleError,
    DuplicateParentError,
    MultipleRootsError,
    ParseError,
    UnknownNodeError,
    UnreachableError,
)

LabelSet = frozenset


def node_variable_label(name: str) -> str:
    """Label symbol induced by a first-order (node) variable."""
    return "x:" + name


def set_variable_label(name: str) -> str:
    """Label symbol induced by a second-order (node set) variable."""
    return "X:" + name


def is_variable_label(symbol: str) -> bool:
    return symbol.startswith("x:") or symbol.startswith("X:")


class Multiset:
    """Finitely supported multiset with hashable identity.

    Counts are nonnegative; zero-count entries are dropped so two multisets
    compare equal iff their supports and counts match.
    """

    __slots__ = ("_counts", "_key")

    def __init__(self, items: Iterable = (), counts: Optional[Mapping] = None):
        acc: dict = {}
        if counts is not None:
            for element, count in counts.items():
                if count < 0:
                    raise ValueError(f"negative multiplicity for {element!r}")
                if count:
                    acc[element] = acc.get(element, 0) + count
        for element in items:
            acc[element] = acc.get(element, 0) + 1
        self._counts = acc
        self._key = frozenset(acc.items())

    def count(self, element) -> int:
        return self._counts.get(element, 0)

    def items(self):
        return self._counts.items()

    def support(self):
        return self._counts.keys()

    def total(self) -> int:
        return sum(self._counts.values())

    def cap(self, k: int) -> "Multiset":
        """Clip every multiplicity at ``k`` (the M|k operation)."""
        if k < 0:
            raise ValueError("cap must be nonnegative")
        return Multiset(counts={e: min(c, k) for e, c in self._counts.items()})

    def __contains__(self, element) -> bool:
        return element in self._counts

    def __len__(self) -> int:
        return self.total()

    def __eq__(self, other) -> bool:
        return isinstance(other, Multiset) and self._key == other._key

    def __hash__(self) -> int:
        return hash(self._key)

    def __repr__(self) -> str:
        inner = ", ".join(f"{e!r}: {c}" for e, c in sorted(self._counts.items(), key=repr))
        return "Multiset({%s})" % inner


@dataclass(frozen=True)
class Interpretation:
    """Assignment of node variables to single nodes and set variables to node sets."""

    first_order: Mapping[str, int] = field(default_factory=dict)
    second_order: Mapping[str, frozenset] = field(default_factory=dict)

    def is_empty(self) -> bool:
        return not self.first_order and not self.second_order


@dataclass(frozen=True)
class RootedTree:
    """Finite tree with per-node label sets; node 0 is always the root."""

    parents: tuple
    labels: tuple

    def __post_init__(self):
        if not self.parents:
            raise ValueError("a tree needs at least one node")
        if self.parents[0] is not None or any(p is None for p in self.parents[1:]):
            raise ValueError("node 0 must be the unique root")
        if any(p >= v for v, p in enumerate(self.parents) if p is not None):
            raise ValueError("parents must precede children (topological ids)")

    @property
    def root(self) -> int:
        return 0

    @property
    def nodes(self) -> range:
        return range(len(self.parents))

    def __len__(self) -> int:
        return len(self.parents)

    @cached_property
    def children_map(self) -> tuple:
        kids = [[] for _ in self.parents]
        for v, parent in enumerate(self.parents):
            if parent is not None:
                kids[parent].append(v)
        return tuple(tuple(k) for k in kids)

    def children(self, v: int):
        return self.children_map[v]

    # Run engines talk to models through `successors`; for a tree those are
    # exactly the children.
    def successors(self, v: int):
        return self.children_map[v]

    def label(self, v: int) -> LabelSet:
        return self.labels[v]

    @cached_property
    def depths(self) -> tuple:
        out = [0] * len(self.parents)
        for v, parent in enumerate(self.parents):
            if parent is not None:
                out[v] = out[parent] + 1
        return tuple(out)

    def depth(self) -> int:
        return max(self.depths)

    @cached_property
    def heights(self) -> tuple:
        out = [0] * len(self.parents)
        for v in reversed(range(len(self.parents))):
            kids = self.children_map[v]
            out[v] = 1 + max(out[c] for c in kids) if kids else 0
        return tuple(out)

    def alphabet(self) -> frozenset:
        symbols = set()
        for lab in self.labels:
            symbols |= lab
        return frozenset(symbols)

    def __repr__(self) -> str:
        return f"RootedTree({serialize_tree(self)!r})"


# ---------------------------------------------------------------------------
# Construction and validation


def validate_tree(nodes: Sequence, edges: Sequence, labels: Mapping) -> RootedTree:
    """Build a tree from an explicit node/edge/label table.

    ``edges`` contains (parent, child) pairs.  Raises the specific invariant
    violation: DuplicateParentError, MultipleRootsError, CycleError or
    UnreachableError, each naming the offending node ids.  Node ids may be any
    hashables; they are renumbered to preorder integers.
    """
    nodes = list(nodes)
    if len(set(nodes)) != len(nodes):
        raise ValueError("node ids must be distinct")
    known = set(nodes)
    parent_of: dict = {}
    for parent, child in edges:
        if parent not in known or child not in known:
            raise UnknownNodeError(f"edge ({parent!r}, {child!r}) mentions unknown node", [parent, child])
        if child in parent_of:
            raise DuplicateParentError(f"node {child!r} has more than one parent", [child])
        parent_of[child] = parent

    roots = [v for v in nodes if v not in parent_of]
    if len(roots) > 1:
        raise MultipleRootsError(f"multiple parentless nodes: {roots!r}", roots)
    if not roots:
        cycle = _find_cycle(nodes, parent_of)
        raise CycleError(f"no root; parent chain cycles through {cycle!r}", cycle)
    root = roots[0]

    # Walking up from every node must terminate at the root.
    for v in nodes:
        seen = {v}
        cur = v
        while cur in parent_of:
            cur = parent_of[cur]
            if cur in seen:
                cycle = _find_cycle([v], parent_of)
                raise CycleError(f"parent chain cycles through {cycle!r}", cycle)
            seen.add(cur)

    order = []
    stack = [root]
    child_lists: dict = {v: [] for v in nodes}
    for child, parent in parent_of.items():
        child_lists[parent].append(child)
    while stack:
        v = stack.pop()
        order.append(v)
        stack.extend(reversed(child_lists[v]))
    if len(order) != len(nodes):
        missing = [v for v in nodes if v not in set(order)]
        raise UnreachableError(f"nodes unreachable from root: {missing!r}", missing)

    index = {v: i for i, v in enumerate(order)}
    parents = tuple(None if v == root else index[parent_of[v]] for v in order)
    labelsets = tuple(frozenset(labels.get(v, ())) for v in order)
    return RootedTree(parents, labelsets)


def _find_cycle(start_nodes, parent_of):
    for v in start_nodes:
        seen: list = []
        cur = v
        while cur in parent_of and cur not in seen:
            seen.append(cur)
            cur = parent_of[cur]
        if cur in seen:
            return seen[seen.index(cur):]
    return list(start_nodes)


def tree_from_form(form) -> RootedTree:
    """Build a tree from a nested (labelset, child_forms) tuple."""
    parents: list = []
    labels: list = []

    def visit(node_form, parent):
        idx = len(parents)
        parents.append(parent)
        labels.append(frozenset(node_form[0]))
        for child in node_form[1]:
            visit(child, idx)

    visit(form, None)
    return RootedTree(tuple(parents), tuple(labels))


def form_of_tree(tree: RootedTree, at: int = 0):
    """Canonical nested-tuple form: children sorted by their canonical string."""
    kids = sorted((form_of_tree(tree, c) for c in tree.children(at)), key=_form_key)
    return (tree.labels[at], tuple(kids))


def _form_key(form):
    return _form_string(form)


def _form_string(form) -> str:
    labels = ",".join(sorted(form[0]))
    return "({%s}%s)" % (labels, "".join(_form_string(c) for c in form[1]))


def canonical_form(tree: RootedTree) -> str:
    """Isomorphism-invariant string key for the tree."""
    return _form_string(form_of_tree(tree))


def serialize_tree(tree: RootedTree) -> str:
    """Canonical text rendering (identical to canonical_form)."""
    return canonical_form(tree)


# ---------------------------------------------------------------------------
# Text format parsing


class _TreeScanner:
    def __init__(self, text: str):
        self.text = text
        self.pos = 0

    def error(self, message: str):
        line = self.text.count("\n", 0, self.pos) + 1
        col = self.pos - (self.text.rfind("\n", 0, self.pos) + 1) + 1
        raise ParseError(message, line, col)

    def skip_ws(self):
        while self.pos < len(self.text) and self.text[self.pos].isspace():
            self.pos += 1

    def peek(self) -> str:
        self.skip_ws()
        return self.text[self.pos] if self.pos < len(self.text) else ""

    def expect(self, ch: str):
        if self.peek() != ch:
            self.error(f"expected {ch!r}")
        self.pos += 1

    def ident(self) -> str:
        self.skip_ws()
        start = self.pos
        text = self.text
        if self.pos >= len(text) or not (text[self.pos].isalpha() or text[self.pos] == "_"):
            self.error("expected identifier")
        while self.pos < len(text) and (text[self.pos].isalnum() or text[self.pos] == "_"):
            self.pos += 1
        return text[start:self.pos]

    def label(self) -> str:
        name = self.ident()
        if name in ("x", "X") and self.pos < len(self.text) and self.text[self.pos] == ":":
            self.pos += 1
            return name + ":" + self.ident()
        return name


def parse_tree(text: str) -> RootedTree:
    """Parse the parenthesized tree format; node ids are assigned in preorder."""
    scanner = _TreeScanner(text)
    parents: list = []
    labels: list = []

    def node(parent):
        scanner.expect("(")
        scanner.expect("{")
        symbols = set()
        if scanner.peek() != "}":
            symbols.add(scanner.label())
            while scanner.peek() == ",":
                scanner.expect(",")
                symbols.add(scanner.label())
        scanner.expect("}")
        idx = len(parents)
        parents.append(parent)
        labels.append(frozenset(symbols))
        while scanner.peek() == "(":
            node(idx)
        scanner.expect(")")

    node(None)
    if scanner.peek():
        scanner.error("trailing input after tree")
    return RootedTree(tuple(parents), tuple(labels))


# ---------------------------------------------------------------------------
# Prefixes, interpretations, enumeration


def k_prefix(tree: RootedTree, k: int) -> RootedTree:
    """Restriction to the nodes at distance at most ``k`` from the root."""
    if k < 0:
        raise ValueError("k must be nonnegative")
    keep = [v for v in tree.nodes if tree.depths[v] <= k]
    index = {v: i for i, v in enumerate(keep)}
    parents = tuple(None if v == 0 else index[tree.parents[v]] for v in keep)
    labels = tuple(tree.labels[v] for v in keep)
    return RootedTree(parents, labels)


def apply_interpretation(tree: RootedTree, interp: Interpretation) -> RootedTree:
    """Overlay variable-induced labels onto the tree; original labels survive."""
    extra: dict = {}
    for var, node in interp.first_order.items():
        if node not in tree.nodes:
            raise UnknownNodeError(f"variable {var!r} names unknown node {node!r}", [node])
        extra.setdefault(node, set()).add(node_variable_label(var))
    for var, nodeset in interp.second_order.items():
        for node in nodeset:
            if node not in tree.nodes:
                raise UnknownNodeError(f"variable {var!r} names unknown node {node!r}", [node])
            extra.setdefault(node, set()).add(set_variable_label(var))
    labels = tuple(
        tree.labels[v] | frozenset(extra.get(v, ())) for v in tree.nodes
    )
    return RootedTree(tree.parents, labels)


def _sorted_labelsets(alphabet) -> list:
    symbols = sorted(alphabet)
    out = []
    for r in range(len(symbols) + 1):
        for combo in itertools.combinations(symbols, r):
            out.append(frozenset(combo))
    return out


def _forms_of_size(n: int, labelsets: tuple, cache: dict) -> list:
    """All canonical forms with exactly n nodes, children non-decreasing in key."""
    key = n
    if key in cache:
        return cache[key]
    if n == 1:
        result = [(lab, ()) for lab in labelsets]
    else:
        pool: list = []
        for m in range(1, n):
            pool.extend(_forms_of_size(m, labelsets, cache))
        pool.sort(key=_form_key)
        sizes = [_form_size(f) for f in pool]
        result = []

        def multisets(remaining: int, start: int, chosen: tuple):
            if remaining == 0:
                for lab in labelsets:
                    result.append((lab, chosen))
                return
            for i in range(start, len(pool)):
                if sizes[i] <= remaining:
                    multisets(remaining - sizes[i], i, chosen + (pool[i],))

        multisets(n - 1, 0, ())
    cache[key] = result
    return result


def _form_size(form) -> int:
    return 1 + sum(_form_size(c) for c in form[1])


def _form_depth(form) -> int:
    return 1 + max((_form_depth(c) for c in form[1]), default=0) if form[1] else 0


def enumerate_forms(max_nodes: int, alphabet: Iterable) -> Iterator:
    """Canonical (labelset, children) forms of all trees with <= max_nodes nodes."""
    if max_nodes < 1:
        raise ValueError("max_nodes must be at least 1")
    labelsets = tuple(_sorted_labelsets(alphabet))
    cache: dict = {}
    for n in range(1, max_nodes + 1):
        yield from _forms_of_size(n, labelsets, cache)


def enumerate_trees(max_nodes: int, alphabet: Iterable) -> Iterator[RootedTree]:
    """Yield every labeled rooted tree with at most ``max_nodes`` nodes.

    Children are unordered, so trees are produced exactly once up to
    isomorphism, in increasing node count.
    """
    for form in enumerate_forms(max_nodes, alphabet):
        yield tree_from_form(form)


def _subtree_pool(max_depth: int, max_branch: int, labelsets: tuple) -> list:
    """Canonical forms of all attachable subtrees: depth <= max_depth, branching <= max_branch."""
    if max_depth < 0:
        return []
    levels = [[(lab, ()) for lab in labelsets]]
    for _ in range(max_depth):
        prev = []
        for lvl in levels:
            prev.extend(lvl)
        prev.sort(key=_form_key)
        nxt = []

        def multisets(count_left: int, start: int, chosen: tuple):
            if chosen:
                for lab in labelsets:
                    nxt.append((lab, chosen))
            if count_left == 0:
                return
            for i in range(start, len(prev)):
                multisets(count_left - 1, i, chosen + (prev[i],))

        multisets(max_branch, 0, ())
        # Keep only forms whose deepest child sits at the previous level,
        # otherwise shallower duplicates reappear at every level.
        nxt = [f for f in nxt if _form_depth(f) == len(levels)]
        if not nxt:
            break
        levels.append(nxt)
    pool: list = []
    for lvl in levels:
        pool.extend(lvl)
    pool.sort(key=_form_key)
    return pool


def enumerate_extensions(
    prefix: RootedTree,
    k: int,
    max_extra_depth: int,
    max_branch: int,
    alphabet: Iterable,
    max_count: int = 10_000,
    on_overflow: str = "error",
) -> Iterator[RootedTree]:
    """Yield trees whose k-prefix equals ``prefix``, up to the given caps.

    New subtrees are attached only below nodes at distance exactly ``k``; each
    frontier node receives at most ``max_branch`` new subtrees of depth at
    most ``max_extra_depth - 1`` (so the whole tree gains at most
    ``max_extra_depth`` extra levels).  Results are deduplicated up to
    isomorphism.  ``on_overflow`` selects between raising BudgetExceededError
    and silently truncating after ``max_count`` trees.
    """
    if prefix.depth() > k:
        raise ValueError("prefix is deeper than k")
    if on_overflow not in ("error", "truncate"):
        raise ValueError("on_overflow must be 'error' or 'truncate'")
    labelsets = tuple(_sorted_labelsets(alphabet))
    frontier = [v for v in prefix.nodes if prefix.depths[v] == k]
    pool = _subtree_pool(max_extra_depth - 1, max_branch, labelsets) if max_extra_depth > 0 else []

    def attachment_multisets():
        # Multisets of up to max_branch pool forms, indices non-decreasing.
        out = [()]
        current = [((), 0)]
        for _ in range(max_branch):
            nxt = []
            for chosen, start in current:
                for i in range(start, len(pool)):
                    nxt.append((chosen + (pool[i],), i))
            out.extend(c for c, _ in nxt)
            current = nxt
        return out

    node_options = attachment_multisets() if pool else [()]
    seen: set = set()
    emitted = 0
    scanned = 0
    scan_cap = max(max_count, 1) * 1000
    for combo in itertools.product(node_options, repeat=len(frontier)):
        scanned += 1
        if scanned > scan_cap:
            if on_overflow == "error":
                raise BudgetExceededError(
                    f"extension enumeration scanned more than {scan_cap} candidates"
                )
            return
        attach = dict(zip(frontier, combo))
        tree = _attach(prefix, attach)
        key = canonical_form(tree)
        if key in seen:
            continue
        seen.add(key)
        emitted += 1
        if emitted > max_count:
            if on_overflow == "error":
                raise BudgetExceededError(
                    f"extension enumeration exceeded {max_count} trees"
                )
            return
        yield tree


def _attach(prefix: RootedTree, attach: Mapping) -> RootedTree:
    parents = list(prefix.parents)
    labels = list(prefix.labels)
    for node, forms in attach.items():
        for form in forms:
            _append_form(parents, labels, form, node)
    return RootedTree(tuple(parents), tuple(labels))


def _append_form(parents: list, labels: list, form, parent: int):
    idx = len(parents)
    parents.append(parent)
    labels.append(frozenset(form[0]))
    for child in form[1]:
        _append_form(parents, labels, child, idx)
