"""
Machine Model
=============
Types, expression/predicate ASTs and machine structure for the checker's
Event-B-like machine language, plus ground values and the pretty printer.

All nodes are frozen dataclasses: they hash structurally, which is what the
kernel's atom sharing table and the simplifier's fixpoint loop rely on.

Usage:
    from core.model import Rel, Ident, IntLit, conj, pretty

    p = conj([Rel('>', Ident('x'), IntLit(0)), Rel(':', Ident('y'), Ident('s'))])
    print(pretty(p))      # x > 0 & y : s
"""

from __future__ import annotations

from dataclasses import dataclass, field, fields, replace
from typing import Any, Dict, Iterable, Iterator, List, Optional, Tuple


# ============================================================================
# Types
# ============================================================================

@dataclass(frozen=True)
class Ty:
    """A type: INT | BOOL | SORT(name) | SET(elem)."""

    kind: str
    name: Optional[str] = None
    elem: Optional["Ty"] = None

    def __str__(self) -> str:
        if self.kind == 'SORT':
            return str(self.name)
        if self.kind == 'SET':
            return f"POW({self.elem})"
        return self.kind

    @property
    def is_set(self) -> bool:
        return self.kind == 'SET'


INT = Ty('INT')
BOOL = Ty('BOOL')


def sort_type(name: str) -> Ty:
    return Ty('SORT', name=name)


def set_of(elem: Ty) -> Ty:
    return Ty('SET', elem=elem)


@dataclass(frozen=True, order=True)
class Element:
    """An element of an enumerated carrier set, encoded as (sort, index)."""

    sort: str
    index: int
    name: str = field(compare=False)

    def __str__(self) -> str:
        return self.name


@dataclass(frozen=True)
class SortDecl:
    """Enumerated carrier set `S = {a, b, ...}`."""

    name: str
    elements: Tuple[str, ...]
    line: Optional[int] = field(default=None, compare=False)

    def element(self, index: int) -> Element:
        return Element(self.name, index, self.elements[index])

    def all_elements(self) -> Tuple[Element, ...]:
        return tuple(self.element(i) for i in range(len(self.elements)))


# ============================================================================
# Expressions
# ============================================================================

class Expr:
    """Base class of expression nodes."""


@dataclass(frozen=True)
class IntLit(Expr):
    value: int
    ty: Optional[Ty] = field(default=None, compare=False, repr=False)


@dataclass(frozen=True)
class BoolLit(Expr):
    value: bool
    ty: Optional[Ty] = field(default=None, compare=False, repr=False)


@dataclass(frozen=True)
class Ident(Expr):
    name: str
    ty: Optional[Ty] = field(default=None, compare=False, repr=False)


@dataclass(frozen=True)
class ElemLit(Expr):
    """A carrier-set element after typechecking resolved its name."""

    element: Element
    ty: Optional[Ty] = field(default=None, compare=False, repr=False)


@dataclass(frozen=True)
class ArithOp(Expr):
    """Binary arithmetic: '+', '-', '*', 'div', 'mod'."""

    op: str
    left: Expr
    right: Expr
    ty: Optional[Ty] = field(default=None, compare=False, repr=False)


@dataclass(frozen=True)
class Negate(Expr):
    arg: Expr
    ty: Optional[Ty] = field(default=None, compare=False, repr=False)


@dataclass(frozen=True)
class SetLit(Expr):
    items: Tuple[Expr, ...]
    ty: Optional[Ty] = field(default=None, compare=False, repr=False)


@dataclass(frozen=True)
class EmptySet(Expr):
    ty: Optional[Ty] = field(default=None, compare=False, repr=False)


@dataclass(frozen=True)
class Interval(Expr):
    lo: Expr
    hi: Expr
    ty: Optional[Ty] = field(default=None, compare=False, repr=False)


@dataclass(frozen=True)
class SetOp(Expr):
    """Binary set operation: 'union', 'inter', 'diff'."""

    op: str
    left: Expr
    right: Expr
    ty: Optional[Ty] = field(default=None, compare=False, repr=False)


@dataclass(frozen=True)
class Card(Expr):
    arg: Expr
    ty: Optional[Ty] = field(default=None, compare=False, repr=False)


@dataclass(frozen=True)
class BuiltinSet(Expr):
    """INT, NAT, NAT1 (bounded by MAXINT) or BOOL used as a set."""

    name: str
    ty: Optional[Ty] = field(default=None, compare=False, repr=False)


@dataclass(frozen=True)
class SortSet(Expr):
    """A carrier set name used as an expression, resolved by typechecking."""

    sort: str
    elements: Tuple[Element, ...]
    ty: Optional[Ty] = field(default=None, compare=False, repr=False)


BUILTIN_SETS = ('INT', 'NAT', 'NAT1', 'BOOL')
SET_OPS = {'union': '\\/', 'inter': '/\\', 'diff': '\\'}


# ============================================================================
# Predicates
# ============================================================================

class Pred:
    """Base class of predicate nodes."""


@dataclass(frozen=True)
class BoolConst(Pred):
    value: bool


@dataclass(frozen=True)
class Rel(Pred):
    """Atomic relation: = /= < <= > >= : /: <: /<:"""

    op: str
    left: Expr
    right: Expr


@dataclass(frozen=True)
class Not(Pred):
    arg: Pred


@dataclass(frozen=True)
class And(Pred):
    args: Tuple[Pred, ...]


@dataclass(frozen=True)
class Or(Pred):
    args: Tuple[Pred, ...]


@dataclass(frozen=True)
class Implies(Pred):
    left: Pred
    right: Pred


@dataclass(frozen=True)
class Equiv(Pred):
    left: Pred
    right: Pred


@dataclass(frozen=True)
class Binder:
    name: str
    ty: Optional[Ty] = None


@dataclass(frozen=True)
class Exists(Pred):
    binders: Tuple[Binder, ...]
    body: Pred


@dataclass(frozen=True)
class Forall(Pred):
    binders: Tuple[Binder, ...]
    body: Pred


TRUE = BoolConst(True)
FALSE = BoolConst(False)

REL_OPS = ('=', '/=', '<', '<=', '>', '>=', ':', '/:', '<:', '/<:')
NEGATED_REL = {
    '=': '/=', '/=': '=', '<': '>=', '>=': '<', '>': '<=', '<=': '>',
    ':': '/:', '/:': ':', '<:': '/<:', '/<:': '<:',
}


def conj(preds: Iterable[Pred]) -> Pred:
    """Conjunction of preds, flattening nested And and dropping TRUE."""
    args: List[Pred] = []
    for p in preds:
        if isinstance(p, And):
            args.extend(p.args)
        elif p != TRUE:
            args.append(p)
    if not args:
        return TRUE
    if len(args) == 1:
        return args[0]
    return And(tuple(args))


def disj(preds: Iterable[Pred]) -> Pred:
    """Disjunction of preds, flattening nested Or and dropping FALSE."""
    args: List[Pred] = []
    for p in preds:
        if isinstance(p, Or):
            args.extend(p.args)
        elif p != FALSE:
            args.append(p)
    if not args:
        return FALSE
    if len(args) == 1:
        return args[0]
    return Or(tuple(args))


def conjuncts(p: Pred) -> Tuple[Pred, ...]:
    """Top-level conjuncts of p (recursively flattened)."""
    if isinstance(p, And):
        out: List[Pred] = []
        for a in p.args:
            out.extend(conjuncts(a))
        return tuple(out)
    if p == TRUE:
        return ()
    return (p,)


def is_atomic(p: Pred) -> bool:
    return isinstance(p, (Rel, BoolConst))


def has_division(node: Any) -> bool:
    """True if node contains div or mod anywhere (a well-definedness hazard)."""
    return any(isinstance(n, ArithOp) and n.op in ('div', 'mod') for n in walk(node))


def walk(node: Any) -> Iterator[Any]:
    """Pre-order traversal over Expr and Pred nodes."""
    yield node
    for child in children(node):
        yield from walk(child)


def children(node: Any) -> Tuple[Any, ...]:
    if isinstance(node, (ArithOp, SetOp, Rel, Implies, Equiv)):
        return (node.left, node.right)
    if isinstance(node, (Negate, Card)):
        return (node.arg,)
    if isinstance(node, Not):
        return (node.arg,)
    if isinstance(node, Interval):
        return (node.lo, node.hi)
    if isinstance(node, SetLit):
        return node.items
    if isinstance(node, (And, Or)):
        return node.args
    if isinstance(node, (Exists, Forall)):
        return (node.body,)
    return ()


# ============================================================================
# Events and machines
# ============================================================================

@dataclass(frozen=True)
class Clause:
    """A labelled predicate (axiom, invariant or guard) with its source line."""

    label: Optional[str]
    pred: Pred
    line: Optional[int] = field(default=None, compare=False)
    col: Optional[int] = field(default=None, compare=False)

    def where(self) -> str:
        text = self.label or '<unlabelled>'
        if self.line is not None:
            text += f" at line {self.line}"
        return text


@dataclass(frozen=True)
class Assignment:
    target: str
    expr: Expr


@dataclass(frozen=True)
class Event:
    name: str
    params: Tuple[Binder, ...] = ()
    guards: Tuple[Clause, ...] = ()
    actions: Tuple[Assignment, ...] = ()
    line: Optional[int] = field(default=None, compare=False)

    @property
    def guard(self) -> Pred:
        return conj(c.pred for c in self.guards)


@dataclass(frozen=True)
class Machine:
    name: str
    sorts: Tuple[SortDecl, ...] = ()
    constants: Tuple[Binder, ...] = ()
    axioms: Tuple[Clause, ...] = ()
    variables: Tuple[Binder, ...] = ()
    invariants: Tuple[Clause, ...] = ()
    init: Optional[Event] = None
    events: Tuple[Event, ...] = ()
    typed: bool = field(default=False, compare=False)

    def event(self, name: str) -> Event:
        for e in self.events:
            if e.name == name:
                return e
        raise KeyError(name)

    def sort(self, name: str) -> SortDecl:
        for s in self.sorts:
            if s.name == name:
                return s
        raise KeyError(name)

    @property
    def declarations(self) -> Tuple[Binder, ...]:
        """Constants followed by variables, in declaration order."""
        return self.constants + self.variables

    def types(self) -> Dict[str, Ty]:
        return {b.name: b.ty for b in self.declarations}


# ============================================================================
# Ground values
# ============================================================================

# A Valuation maps identifiers to ground values: int | bool | Element | frozenset.
Valuation = Dict[str, Any]


def value_key(value: Any) -> Tuple:
    """Total order over ground values of any type (used for canonical encodings)."""
    if isinstance(value, bool):
        return (1, int(value))
    if isinstance(value, int):
        return (0, value)
    if isinstance(value, Element):
        return (2, value.sort, value.index)
    if isinstance(value, frozenset):
        return (3, tuple(sorted(value_key(v) for v in value)))
    raise TypeError(f"not a ground value: {value!r}")


def sorted_values(values: Iterable[Any]) -> List[Any]:
    return sorted(values, key=value_key)


def format_value(value: Any) -> str:
    if isinstance(value, bool):
        return 'TRUE' if value else 'FALSE'
    if isinstance(value, frozenset):
        if not value:
            return '{}'
        return '{' + ','.join(format_value(v) for v in sorted_values(value)) + '}'
    return str(value)


def format_valuation(v: Valuation) -> str:
    return ' & '.join(f"{name}={format_value(value)}" for name, value in v.items())


def value_to_json(value: Any) -> Any:
    """JSON-safe rendering: sets become sorted lists, elements their names."""
    if isinstance(value, bool) or isinstance(value, int):
        return value
    if isinstance(value, Element):
        return value.name
    if isinstance(value, frozenset):
        return [value_to_json(v) for v in sorted_values(value)]
    return str(value)


def canonical_state(v: Valuation) -> Tuple:
    """Hashable encoding of a valuation: sorted fields, sets as sorted element lists."""
    return tuple((name, value_key(v[name])) for name in sorted(v))


def value_to_expr(value: Any, ty: Optional[Ty] = None) -> Expr:
    """Literal expression denoting a ground value."""
    if isinstance(value, bool):
        return BoolLit(value, ty=BOOL)
    if isinstance(value, int):
        return IntLit(value, ty=INT)
    if isinstance(value, Element):
        return ElemLit(value, ty=sort_type(value.sort))
    if isinstance(value, frozenset):
        elem_ty = ty.elem if ty is not None and ty.is_set else None
        if not value:
            return EmptySet(ty=ty)
        items = tuple(value_to_expr(v, elem_ty) for v in sorted_values(value))
        return SetLit(items, ty=ty)
    raise TypeError(f"not a ground value: {value!r}")


def default_value(ty: Ty, sorts: Dict[str, SortDecl]) -> Any:
    """Value given to identifiers no conjunct constrains."""
    if ty.kind == 'INT':
        return 0
    if ty.kind == 'BOOL':
        return False
    if ty.kind == 'SORT':
        return sorts[ty.name].element(0)
    return frozenset()


# ============================================================================
# Pretty printer
# ============================================================================

_PRED_PREC = {Equiv: 1, Implies: 2, Or: 3, And: 4, Not: 5}
_EXPR_PREC = {'setop': 1, 'interval': 2, '+': 3, '-': 3, '*': 4, 'div': 4, 'mod': 4}


def pretty(node: Any) -> str:
    """Render an Expr or Pred in the machine's ASCII syntax."""
    if isinstance(node, Pred):
        return _pretty_pred(node, 0)
    if isinstance(node, Expr):
        return _pretty_expr(node, 0)
    return str(node)


def _paren(text: str, needed: bool) -> str:
    return f"({text})" if needed else text


def _pretty_pred(p: Pred, ctx: int) -> str:
    if isinstance(p, BoolConst):
        return 'TRUE' if p.value else 'FALSE'
    if isinstance(p, Rel):
        return f"{_pretty_expr(p.left, 0)} {p.op} {_pretty_expr(p.right, 0)}"
    if isinstance(p, Not):
        return _paren('not ' + _pretty_pred(p.arg, 5), ctx > 5)
    if isinstance(p, And):
        return _paren(' & '.join(_pretty_pred(a, 5) for a in p.args), ctx > 4)
    if isinstance(p, Or):
        return _paren(' or '.join(_pretty_pred(a, 4) for a in p.args), ctx > 3)
    if isinstance(p, Implies):
        text = f"{_pretty_pred(p.left, 3)} => {_pretty_pred(p.right, 2)}"
        return _paren(text, ctx > 2)
    if isinstance(p, Equiv):
        text = f"{_pretty_pred(p.left, 1)} <=> {_pretty_pred(p.right, 2)}"
        return _paren(text, ctx > 1)
    if isinstance(p, (Exists, Forall)):
        quant = '#' if isinstance(p, Exists) else '!'
        binders = ', '.join(_pretty_binder(b) for b in p.binders)
        return f"{quant}{binders}.({_pretty_pred(p.body, 0)})"
    raise TypeError(f"not a predicate: {p!r}")


def _pretty_binder(b: Binder) -> str:
    return f"{b.name}:{b.ty}" if b.ty is not None else b.name


def _pretty_expr(e: Expr, ctx: int) -> str:
    if isinstance(e, IntLit):
        return str(e.value) if e.value >= 0 else f"(-{-e.value})"
    if isinstance(e, BoolLit):
        return 'TRUE' if e.value else 'FALSE'
    if isinstance(e, Ident):
        return e.name
    if isinstance(e, ElemLit):
        return e.element.name
    if isinstance(e, (BuiltinSet,)):
        return e.name
    if isinstance(e, SortSet):
        return e.sort
    if isinstance(e, EmptySet):
        return '{}'
    if isinstance(e, SetLit):
        return '{' + ', '.join(_pretty_expr(i, 0) for i in e.items) + '}'
    if isinstance(e, Card):
        return f"card({_pretty_expr(e.arg, 0)})"
    if isinstance(e, Negate):
        return _paren('-' + _pretty_expr(e.arg, 5), ctx > 5)
    if isinstance(e, ArithOp):
        prec = _EXPR_PREC[e.op]
        text = f"{_pretty_expr(e.left, prec)} {e.op} {_pretty_expr(e.right, prec + 1)}"
        return _paren(text, ctx > prec)
    if isinstance(e, Interval):
        text = f"{_pretty_expr(e.lo, 3)}..{_pretty_expr(e.hi, 3)}"
        return _paren(text, ctx > 2)
    if isinstance(e, SetOp):
        text = f"{_pretty_expr(e.left, 1)} {SET_OPS[e.op]} {_pretty_expr(e.right, 2)}"
        return _paren(text, ctx > 1)
    raise TypeError(f"not an expression: {e!r}")


def _pretty_clauses(title: str, clauses: Tuple[Clause, ...]) -> List[str]:
    if not clauses:
        return []
    lines = [title]
    for i, c in enumerate(clauses):
        sep = ' ;' if i < len(clauses) - 1 else ''
        label = f"{c.label}: " if c.label else ''
        lines.append(f"  {label}{pretty(c.pred)}{sep}")
    return lines


def _pretty_actions(actions: Tuple[Assignment, ...]) -> str:
    if not actions:
        return 'skip'
    return ' || '.join(f"{a.target} := {pretty(a.expr)}" for a in actions)


def _pretty_event(e: Event) -> str:
    if e.name == 'INITIALISATION':
        return f"  INITIALISATION = BEGIN {_pretty_actions(e.actions)} END"
    head = f"  {e.name} ="
    if e.params:
        head += ' ANY ' + ', '.join(_pretty_binder(b) for b in e.params)
    if e.guards:
        guards = ' ; '.join((f"{c.label}: " if c.label else '') + pretty(c.pred) for c in e.guards)
        head += f" WHEN {guards}"
    if e.params or e.guards:
        return head + f" THEN {_pretty_actions(e.actions)} END"
    return head + f" BEGIN {_pretty_actions(e.actions)} END"


def pretty_machine(m: Machine) -> str:
    """Render a whole machine; re-parsing the text yields an equal Machine."""
    lines = [f"MACHINE {m.name}"]
    if m.sorts:
        lines.append('SETS')
        decls = [f"  {s.name} = {{{', '.join(s.elements)}}}" for s in m.sorts]
        lines.append(' ;\n'.join(decls))
    if m.constants:
        lines.append('CONSTANTS ' + ', '.join(b.name for b in m.constants))
    lines.extend(_pretty_clauses('AXIOMS', m.axioms))
    if m.variables:
        lines.append('VARIABLES ' + ', '.join(b.name for b in m.variables))
    lines.extend(_pretty_clauses('INVARIANTS', m.invariants))
    events = ([m.init] if m.init is not None else []) + list(m.events)
    if events:
        lines.append('EVENTS')
        lines.append(' ;\n'.join(_pretty_event(e) for e in events))
    lines.append('END')
    return '\n'.join(lines) + '\n'


def map_children(node: Any, fn) -> Any:
    """Rebuild node with fn applied to each direct Expr/Pred child."""
    changes = {}
    for f in fields(node):
        value = getattr(node, f.name)
        if isinstance(value, (Expr, Pred)):
            new_value = fn(value)
        elif isinstance(value, tuple) and value and isinstance(value[0], (Expr, Pred)):
            new_value = tuple(fn(v) for v in value)
        else:
            continue
        if new_value is not value:
            changes[f.name] = new_value
    return replace(node, **changes) if changes else node
