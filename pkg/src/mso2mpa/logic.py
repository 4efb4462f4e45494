"""Logic ASTs, parsers, and brute-force evaluators.

These evaluators are the ground truth every automaton construction is checked
against, so they favour obviousness over speed: node quantifiers enumerate all
nodes, set quantifiers enumerate all subsets (guarded by a size cap).

Naming convention, enforced by the parsers: proposition symbols and node
variables start with a lowercase letter or underscore, set variables start
with an uppercase letter, and ``E`` is reserved for the edge relation.

Concrete syntax for node-property formulas::

    p(y)   Y(y)   E(y, z)   y = z   !f   (f & g)   (f | g)
    exists y. f   exists2 Y. f   forall y. f

``|`` and ``forall`` are sugar; the AST only has atoms, negation, conjunction
and the two existential quantifiers.

Modal formulas: ``p``, ``!g``, ``(g | g)``, ``(g & g)`` (sugar), ``dia>=k g``.

Recursive rule programs are given as::

    X(0) :- <modal formula>;
    X :- <rule body>;
    appointed: X, Y;
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Iterator, Mapping, Optional, Union

from .errors import ParseError, SizeLimitError, UnboundVariableError
from .trees import Interpretation, RootedTree

EDGE_SYMBOL = "E"


def is_set_variable_name(name: str) -> bool:
    return name[0].isupper()


# ---------------------------------------------------------------------------
# Node-property formulas (second-order logic restricted to set quantifiers)


@dataclass(frozen=True)
class Atom:
    """``pred(var)``: a proposition symbol or set variable holds at a node."""

    pred: str
    var: str


@dataclass(frozen=True)
class EdgeAtom:
    """``E(src, dst)``: dst is a child of src."""

    src: str
    dst: str


@dataclass(frozen=True)
class EqAtom:
    left: str
    right: str


@dataclass(frozen=True)
class Not:
    body: "MsoFormula"


@dataclass(frozen=True)
class And:
    left: "MsoFormula"
    right: "MsoFormula"


@dataclass(frozen=True)
class ExistsNode:
    var: str
    body: "MsoFormula"


@dataclass(frozen=True)
class ExistsSet:
    var: str
    body: "MsoFormula"


MsoFormula = Union[Atom, EdgeAtom, EqAtom, Not, And, ExistsNode, ExistsSet]


def mso_or(left: MsoFormula, right: MsoFormula) -> MsoFormula:
    """Disjunction, desugared through negation and conjunction."""
    return Not(And(Not(left), Not(right)))


def free_variables(formula: MsoFormula) -> tuple:
    """Free (node_vars, set_vars) of a formula, each as a frozenset."""
    fo: set = set()
    so: set = set()

    def walk(f, bound_fo, bound_so):
        if isinstance(f, Atom):
            if is_set_variable_name(f.pred) and f.pred not in bound_so:
                so.add(f.pred)
            if f.var not in bound_fo:
                fo.add(f.var)
        elif isinstance(f, EdgeAtom):
            for v in (f.src, f.dst):
                if v not in bound_fo:
                    fo.add(v)
        elif isinstance(f, EqAtom):
            for v in (f.left, f.right):
                if v not in bound_fo:
                    fo.add(v)
        elif isinstance(f, Not):
            walk(f.body, bound_fo, bound_so)
        elif isinstance(f, And):
            walk(f.left, bound_fo, bound_so)
            walk(f.right, bound_fo, bound_so)
        elif isinstance(f, ExistsNode):
            walk(f.body, bound_fo | {f.var}, bound_so)
        elif isinstance(f, ExistsSet):
            walk(f.body, bound_fo, bound_so | {f.var})
        else:
            raise TypeError(f"not a formula: {f!r}")

    walk(formula, frozenset(), frozenset())
    return frozenset(fo), frozenset(so)


def quantifier_depth(formula: MsoFormula) -> int:
    if isinstance(formula, (Atom, EdgeAtom, EqAtom)):
        return 0
    if isinstance(formula, Not):
        return quantifier_depth(formula.body)
    if isinstance(formula, And):
        return max(quantifier_depth(formula.left), quantifier_depth(formula.right))
    return 1 + quantifier_depth(formula.body)


def mso_check(
    tree: RootedTree,
    formula: MsoFormula,
    interp: Interpretation,
    size_cap: int = 12,
) -> bool:
    """Exact truth of ``formula`` on ``tree`` under ``interp``.

    The interpretation must cover exactly the free variables.  Set
    quantifiers enumerate all 2^n node subsets, hence the size cap.
    """
    if len(tree) > size_cap:
        raise SizeLimitError(f"oracle cap is {size_cap} nodes, tree has {len(tree)}")
    free_fo, free_so = free_variables(formula)
    if set(interp.first_order) != set(free_fo) or set(interp.second_order) != set(free_so):
        raise ValueError(
            f"interpretation must cover exactly the free variables "
            f"{sorted(free_fo)} / {sorted(free_so)}"
        )
    all_nodes = list(tree.nodes)
    parent = tree.parents

    def sat(f, fo: dict, so: dict) -> bool:
        if isinstance(f, Atom):
            node = fo[f.var]
            if is_set_variable_name(f.pred):
                return node in so[f.pred]
            return f.pred in tree.labels[node]
        if isinstance(f, EdgeAtom):
            return parent[fo[f.dst]] == fo[f.src]
        if isinstance(f, EqAtom):
            return fo[f.left] == fo[f.right]
        if isinstance(f, Not):
            return not sat(f.body, fo, so)
        if isinstance(f, And):
            return sat(f.left, fo, so) and sat(f.right, fo, so)
        if isinstance(f, ExistsNode):
            return any(sat(f.body, {**fo, f.var: v}, so) for v in all_nodes)
        if isinstance(f, ExistsSet):
            return any(
                sat(f.body, fo, {**so, f.var: subset})
                for subset in _subsets(all_nodes)
            )
        raise TypeError(f"not a formula: {f!r}")

    return sat(formula, dict(interp.first_order), dict(interp.second_order))


def _subsets(nodes) -> Iterator[frozenset]:
    for r in range(len(nodes) + 1):
        for combo in itertools.combinations(nodes, r):
            yield frozenset(combo)


# ---------------------------------------------------------------------------
# Graded modal formulas


@dataclass(frozen=True)
class Prop:
    name: str


@dataclass(frozen=True)
class GNot:
    body: "GmlFormula"


@dataclass(frozen=True)
class GOr:
    left: "GmlFormula"
    right: "GmlFormula"


@dataclass(frozen=True)
class Diamond:
    """At least ``grade`` children satisfy the body."""

    grade: int
    body: "GmlFormula"

    def __post_init__(self):
        if self.grade < 0:
            raise ValueError("diamond grade must be nonnegative")


GmlFormula = Union[Prop, GNot, GOr, Diamond]


@dataclass(frozen=True)
class FiniteDisjunction:
    """A finite list of modal disjuncts (stands in for a countable one)."""

    disjuncts: tuple

    def __post_init__(self):
        if not self.disjuncts:
            raise ValueError("at least one disjunct required")


def modal_depth(formula) -> int:
    if isinstance(formula, (Prop, SchemaVar)):
        return 0
    if isinstance(formula, GNot):
        return modal_depth(formula.body)
    if isinstance(formula, GOr):
        return max(modal_depth(formula.left), modal_depth(formula.right))
    if isinstance(formula, Diamond):
        return 1 + modal_depth(formula.body)
    if isinstance(formula, FiniteDisjunction):
        return max(modal_depth(d) for d in formula.disjuncts)
    raise TypeError(f"not a modal formula: {formula!r}")


def gml_eval(tree: RootedTree, node: int, formula: GmlFormula) -> bool:
    if isinstance(formula, Prop):
        return formula.name in tree.labels[node]
    if isinstance(formula, GNot):
        return not gml_eval(tree, node, formula.body)
    if isinstance(formula, GOr):
        return gml_eval(tree, node, formula.left) or gml_eval(tree, node, formula.right)
    if isinstance(formula, Diamond):
        hits = sum(1 for c in tree.children(node) if gml_eval(tree, c, formula.body))
        return hits >= formula.grade
    raise TypeError(f"not a modal formula: {formula!r}")


def disjunction_eval(tree: RootedTree, node: int, formula: FiniteDisjunction) -> bool:
    return any(gml_eval(tree, node, d) for d in formula.disjuncts)


def gml_to_mso(formula: GmlFormula, var: str) -> MsoFormula:
    """Equivalent node-property formula with ``var`` as the evaluation point.

    ``dia>=k g`` becomes "there are k pairwise-distinct children each
    satisfying g", written with each quantifier scoped as tightly as
    possible (witness i only sees the distinctness constraints against the
    earlier witnesses); narrow scopes keep the compiled automata small.
    ``dia>=0 g`` is plainly true and becomes ``var = var``.
    """
    counter = itertools.count(1)

    def fresh() -> str:
        return f"v{next(counter)}"

    def conj(parts):
        body = parts[0]
        for part in parts[1:]:
            body = And(body, part)
        return body

    def go(f, at: str) -> MsoFormula:
        if isinstance(f, Prop):
            return Atom(f.name, at)
        if isinstance(f, GNot):
            return Not(go(f.body, at))
        if isinstance(f, GOr):
            return mso_or(go(f.left, at), go(f.right, at))
        if isinstance(f, Diamond):
            if f.grade == 0:
                return EqAtom(at, at)
            names = [fresh() for _ in range(f.grade)]
            nested = None
            for i in reversed(range(f.grade)):
                witness = names[i]
                parts = [Not(EqAtom(earlier, witness)) for earlier in names[:i]]
                parts.append(EdgeAtom(at, witness))
                parts.append(go(f.body, witness))
                if nested is not None:
                    parts.append(nested)
                nested = ExistsNode(witness, conj(parts))
            return nested
        raise TypeError(f"not a modal formula: {f!r}")

    return go(formula, var)


# ---------------------------------------------------------------------------
# Recursive rule programs


@dataclass(frozen=True)
class SchemaVar:
    """Occurrence of a rule variable inside a rule body."""

    name: str


SchemaFormula = Union[Prop, SchemaVar, GNot, GOr, Diamond]


@dataclass(frozen=True)
class RuleProgram:
    """Mutually recursive modal rules with appointed (accepting) variables.

    ``init_bodies[X]`` seeds round 0 and is a plain modal formula;
    ``rule_bodies[X]`` computes round t from round t-1 and may mention the
    rule variables.
    """

    variables: tuple
    init_bodies: Mapping[str, GmlFormula]
    rule_bodies: Mapping[str, SchemaFormula]
    appointed: frozenset

    def __post_init__(self):
        declared = set(self.variables)
        if len(declared) != len(self.variables):
            raise ValueError("duplicate rule variable")
        for name in self.variables:
            if name not in self.init_bodies or name not in self.rule_bodies:
                raise ValueError(f"variable {name} needs both an init and a rule")
        if not self.appointed <= declared:
            raise ValueError("appointed variables must be declared")
        for body in self.rule_bodies.values():
            for used in _schema_vars(body):
                if used not in declared:
                    raise UnboundVariableError(f"undeclared rule variable {used}")

    def max_grade(self) -> int:
        grades = [0]
        for body in self.rule_bodies.values():
            grades.extend(d.grade for d in _diamonds(body))
        for body in self.init_bodies.values():
            grades.extend(d.grade for d in _diamonds(body))
        return max(grades)


def _schema_vars(body) -> Iterator[str]:
    if isinstance(body, SchemaVar):
        yield body.name
    elif isinstance(body, GNot):
        yield from _schema_vars(body.body)
    elif isinstance(body, GOr):
        yield from _schema_vars(body.left)
        yield from _schema_vars(body.right)
    elif isinstance(body, Diamond):
        yield from _schema_vars(body.body)


def _diamonds(body) -> Iterator[Diamond]:
    if isinstance(body, GNot):
        yield from _diamonds(body.body)
    elif isinstance(body, GOr):
        yield from _diamonds(body.left)
        yield from _diamonds(body.right)
    elif isinstance(body, Diamond):
        yield body
        yield from _diamonds(body.body)


def rule_round(
    tree: RootedTree,
    program: RuleProgram,
    prev: Optional[Mapping[int, frozenset]],
) -> dict:
    """One synchronous round of rule evaluation.

    With ``prev`` absent, round 0 is computed from the init bodies.  In later
    rounds, rule-variable occurrences refer to the previous round at the node
    where they occur, while diamonds look at the children in the same pass.
    """
    if prev is None:
        return {
            v: frozenset(
                name for name in program.variables
                if gml_eval(tree, v, program.init_bodies[name])
            )
            for v in tree.nodes
        }

    def sat(body, node: int) -> bool:
        if isinstance(body, Prop):
            return body.name in tree.labels[node]
        if isinstance(body, SchemaVar):
            return body.name in prev[node]
        if isinstance(body, GNot):
            return not sat(body.body, node)
        if isinstance(body, GOr):
            return sat(body.left, node) or sat(body.right, node)
        if isinstance(body, Diamond):
            hits = sum(1 for c in tree.children(node) if sat(body.body, c))
            return hits >= body.grade
        raise TypeError(f"not a rule body: {body!r}")

    return {
        v: frozenset(
            name for name in program.variables if sat(program.rule_bodies[name], v)
        )
        for v in tree.nodes
    }


def rule_truth_sequence(
    tree: RootedTree, program: RuleProgram, max_rounds: int = 10_000
) -> tuple:
    """Truth maps per round until the global configuration first repeats.

    Returns (rounds, cycle_start) where rounds[cycle_start] is the
    configuration the final computed round loops back to.
    """
    seen: dict = {}
    rounds: list = []
    current = rule_round(tree, program, None)
    for _ in range(max_rounds + 1):
        key = tuple(current[v] for v in tree.nodes)
        if key in seen:
            return rounds, seen[key]
        seen[key] = len(rounds)
        rounds.append(current)
        current = rule_round(tree, program, current)
    raise SizeLimitError(f"no configuration repeat within {max_rounds} rounds")


def rule_accepts(
    tree: RootedTree, node: int, program: RuleProgram, max_rounds: int = 10_000
) -> bool:
    """True iff some appointed variable holds at ``node`` in some round."""
    rounds, _ = rule_truth_sequence(tree, program, max_rounds)
    return any(rounds_t[node] & program.appointed for rounds_t in rounds)


# ---------------------------------------------------------------------------
# Extendability checking


def k_extendable_check(
    tree: RootedTree,
    formula: MsoFormula,
    k: int,
    witness: FiniteDisjunction,
    *,
    max_extra_depth: int = 2,
    max_branch: int = 2,
    alphabet=None,
    max_count: int = 500,
    size_cap: int = 12,
) -> bool:
    """Spot-check that every generated k-extension still satisfies the formula.

    The formula must hold at the root, witnessed by a modal disjunct of depth
    at most ``k``.  Extensions of the k-prefix are enumerated under the given
    caps (truncating at ``max_count``), so this samples the universally
    quantified claim rather than proving it.
    """
    from .trees import enumerate_extensions, k_prefix

    free_fo, free_so = free_variables(formula)
    if len(free_fo) != 1 or free_so:
        raise ValueError("expected exactly one free node variable")
    var = next(iter(free_fo))
    interp = Interpretation(first_order={var: tree.root})
    if not mso_check(tree, formula, interp, size_cap=size_cap):
        raise ValueError("formula does not hold at the root")
    ok_disjunct = any(
        modal_depth(d) <= k and gml_eval(tree, tree.root, d)
        for d in witness.disjuncts
    )
    if not ok_disjunct:
        raise ValueError("no true witness disjunct of modal depth <= k")

    if alphabet is None:
        alphabet = tree.alphabet()
    prefix = k_prefix(tree, k)
    for extension in enumerate_extensions(
        prefix, k, max_extra_depth, max_branch, alphabet,
        max_count=max_count, on_overflow="truncate",
    ):
        ext_interp = Interpretation(first_order={var: extension.root})
        if not mso_check(extension, formula, ext_interp, size_cap=size_cap):
            return False
    return True


# ---------------------------------------------------------------------------
# Parsers


class _Scanner:
    """Tokenizer shared by the formula and program parsers."""

    SYMBOLS = ("(", ")", ",", "=", "&", "|", "!", ".", ";", ":")

    def __init__(self, text: str):
        self.text = text
        self.pos = 0
        self.tokens: list = []
        self._scan()
        self.index = 0

    def _scan(self):
        text = self.text
        pos = 0
        line, col = 1, 1
        while pos < len(text):
            ch = text[pos]
            if ch == "\n":
                pos += 1
                line += 1
                col = 1
                continue
            if ch.isspace():
                pos += 1
                col += 1
                continue
            start_line, start_col = line, col
            if text.startswith(":-", pos):
                self.tokens.append((":-", ":-", start_line, start_col))
                pos += 2
                col += 2
                continue
            if text.startswith(">=", pos):
                self.tokens.append((">=", ">=", start_line, start_col))
                pos += 2
                col += 2
                continue
            if ch in self.SYMBOLS:
                self.tokens.append((ch, ch, start_line, start_col))
                pos += 1
                col += 1
                continue
            if ch.isdigit():
                end = pos
                while end < len(text) and text[end].isdigit():
                    end += 1
                self.tokens.append(("int", text[pos:end], start_line, start_col))
                col += end - pos
                pos = end
                continue
            if ch.isalpha() or ch == "_":
                end = pos
                while end < len(text) and (text[end].isalnum() or text[end] == "_"):
                    end += 1
                self.tokens.append(("ident", text[pos:end], start_line, start_col))
                col += end - pos
                pos = end
                continue
            raise ParseError(f"unexpected character {ch!r}", line, col)

    def peek(self):
        if self.index < len(self.tokens):
            return self.tokens[self.index]
        return ("eof", "", self._end_line(), 1)

    def _end_line(self) -> int:
        return self.text.count("\n") + 1

    def next(self):
        token = self.peek()
        if token[0] != "eof":
            self.index += 1
        return token

    def expect(self, kind: str):
        token = self.next()
        if token[0] != kind:
            raise ParseError(f"expected {kind!r}, found {token[1]!r}", token[2], token[3])
        return token

    def error(self, message: str):
        token = self.peek()
        raise ParseError(message, token[2], token[3])


def parse_mso(text: str, declared_free=None) -> MsoFormula:
    """Parse a node-property formula; see the module docstring for the syntax.

    With ``declared_free`` given, any other free variable raises
    UnboundVariableError.
    """
    scanner = _Scanner(text)
    formula = _parse_mso_formula(scanner)
    token = scanner.peek()
    if token[0] != "eof":
        raise ParseError(f"trailing input {token[1]!r}", token[2], token[3])
    if declared_free is not None:
        free_fo, free_so = free_variables(formula)
        extra = (free_fo | free_so) - set(declared_free)
        if extra:
            raise UnboundVariableError(f"unbound variables: {sorted(extra)}")
    return formula


def _parse_mso_formula(s: _Scanner) -> MsoFormula:
    left = _parse_mso_unary(s)
    while s.peek()[0] in ("&", "|"):
        op = s.next()[0]
        right = _parse_mso_unary(s)
        left = And(left, right) if op == "&" else mso_or(left, right)
    return left


def _parse_mso_unary(s: _Scanner) -> MsoFormula:
    kind, value, line, col = s.peek()
    if kind == "!":
        s.next()
        return Not(_parse_mso_unary(s))
    if kind == "(":
        s.next()
        inner = _parse_mso_formula(s)
        s.expect(")")
        return inner
    if kind == "ident" and value in ("exists", "exists2", "forall"):
        s.next()
        var = s.expect("ident")[1]
        if value == "exists2" and not is_set_variable_name(var):
            raise ParseError("set variables must start uppercase", line, col)
        if value in ("exists", "forall") and is_set_variable_name(var):
            raise ParseError("node variables must start lowercase", line, col)
        s.expect(".")
        body = _parse_mso_unary(s)
        if value == "exists":
            return ExistsNode(var, body)
        if value == "exists2":
            return ExistsSet(var, body)
        return Not(ExistsNode(var, Not(body)))
    if kind == "ident":
        s.next()
        if s.peek()[0] == "(":
            s.next()
            first = s.expect("ident")[1]
            if s.peek()[0] == ",":
                s.next()
                second = s.expect("ident")[1]
                s.expect(")")
                if value != EDGE_SYMBOL:
                    raise ParseError(
                        f"only {EDGE_SYMBOL} takes two arguments", line, col
                    )
                _require_node_var(first, line, col)
                _require_node_var(second, line, col)
                return EdgeAtom(first, second)
            s.expect(")")
            if value == EDGE_SYMBOL:
                raise ParseError(f"{EDGE_SYMBOL} takes two arguments", line, col)
            _require_node_var(first, line, col)
            return Atom(value, first)
        if s.peek()[0] == "=":
            s.next()
            other = s.expect("ident")[1]
            _require_node_var(value, line, col)
            _require_node_var(other, line, col)
            return EqAtom(value, other)
        raise ParseError(f"dangling identifier {value!r}", line, col)
    s.error(f"unexpected token {value!r}")


def _require_node_var(name: str, line: int, col: int):
    if is_set_variable_name(name):
        raise ParseError(f"{name!r} is a set variable, expected a node variable", line, col)


def parse_gml(text: str) -> GmlFormula:
    scanner = _Scanner(text)
    formula = _parse_gml_formula(scanner, allow_vars=False)
    token = scanner.peek()
    if token[0] != "eof":
        raise ParseError(f"trailing input {token[1]!r}", token[2], token[3])
    return formula


def _parse_gml_formula(s: _Scanner, allow_vars: bool):
    left = _parse_gml_unary(s, allow_vars)
    while s.peek()[0] in ("&", "|"):
        op = s.next()[0]
        right = _parse_gml_unary(s, allow_vars)
        if op == "|":
            left = GOr(left, right)
        else:
            left = GNot(GOr(GNot(left), GNot(right)))
    return left


def _parse_gml_unary(s: _Scanner, allow_vars: bool):
    kind, value, line, col = s.peek()
    if kind == "!":
        s.next()
        return GNot(_parse_gml_unary(s, allow_vars))
    if kind == "(":
        s.next()
        inner = _parse_gml_formula(s, allow_vars)
        s.expect(")")
        return inner
    if kind == "ident" and value == "dia":
        s.next()
        s.expect(">=")
        grade = int(s.expect("int")[1])
        body = _parse_gml_unary(s, allow_vars)
        return Diamond(grade, body)
    if kind == "ident":
        s.next()
        if is_set_variable_name(value):
            if not allow_vars:
                raise ParseError(f"rule variable {value!r} not allowed here", line, col)
            return SchemaVar(value)
        return Prop(value)
    s.error(f"unexpected token {value!r}")


def parse_gmsc(text: str) -> RuleProgram:
    """Parse a rule program file (init rules, step rules, appointed footer)."""
    scanner = _Scanner(text)
    variables: list = []
    init_bodies: dict = {}
    rule_bodies: dict = {}
    appointed: Optional[frozenset] = None
    while scanner.peek()[0] != "eof":
        kind, value, line, col = scanner.next()
        if kind != "ident":
            raise ParseError(f"expected a rule variable, found {value!r}", line, col)
        if value == "appointed":
            scanner.expect(":")
            names = []
            if scanner.peek()[0] == "ident":
                names.append(scanner.expect("ident")[1])
                while scanner.peek()[0] == ",":
                    scanner.next()
                    names.append(scanner.expect("ident")[1])
            scanner.expect(";")
            appointed = frozenset(names)
            continue
        if not is_set_variable_name(value):
            raise ParseError("rule variables must start uppercase", line, col)
        name = value
        if scanner.peek()[0] == "(":
            scanner.next()
            zero = scanner.expect("int")
            if zero[1] != "0":
                raise ParseError("init rules are written NAME(0) :- ...", zero[2], zero[3])
            scanner.expect(")")
            scanner.expect(":-")
            body = _parse_gml_formula(scanner, allow_vars=False)
            scanner.expect(";")
            if name in init_bodies:
                raise ParseError(f"duplicate init rule for {name}", line, col)
            init_bodies[name] = body
        else:
            scanner.expect(":-")
            body = _parse_gml_formula(scanner, allow_vars=True)
            scanner.expect(";")
            if name in rule_bodies:
                raise ParseError(f"duplicate step rule for {name}", line, col)
            rule_bodies[name] = body
        if name not in variables:
            variables.append(name)
    if appointed is None:
        raise ParseError("missing 'appointed:' footer", scanner._end_line(), 1)
    return RuleProgram(tuple(variables), init_bodies, rule_bodies, appointed)
