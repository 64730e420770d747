"""
Type Checker
============
Infers and checks types for a parsed machine, resolves carrier-set names and
elements, and alpha-renames quantifier binders so every binder in the machine
has a unique name.

Constants and variables are declared without types; their types are inferred
from the axioms, invariants and initialisation (``x : NAT``, ``s <: 0..3``).
"""

import logging
from dataclasses import fields, is_dataclass, replace
from typing import Any, Dict, Iterable, List, Optional, Set, Tuple

from .errors import TypeCheckError
from .model import (
    And, ArithOp, Assignment, Binder, BoolConst, BoolLit, BuiltinSet, Card, Element, ElemLit,
    EmptySet, Equiv, Event, Exists, Expr, Forall, Ident, Implies, IntLit, Interval, Machine, Negate,
    Not, Or, Pred, Rel, SetLit, SetOp, SortDecl, SortSet, Ty, BOOL, INT, set_of, sort_type, walk,
)

logger = logging.getLogger(__name__)


class _Scope:
    """Identifier scope: source name -> (resolved name, type), plus out-of-scope reasons."""

    def __init__(self, names: Optional[Dict[str, Tuple[str, Ty]]] = None,
                 hidden: Optional[Dict[str, str]] = None):
        self.names = dict(names or {})
        self.hidden = dict(hidden or {})

    def extend(self, bindings: Dict[str, Tuple[str, Ty]]) -> "_Scope":
        child = _Scope(self.names, self.hidden)
        child.names.update(bindings)
        for name in bindings:
            child.hidden.pop(name, None)
        return child


class TypeChecker:
    """Unification-based type inference over one machine's name space."""

    def __init__(self, sorts: Iterable[SortDecl]):
        self.sorts: Dict[str, SortDecl] = {}
        self.elements: Dict[str, Element] = {}
        self.used: Set[str] = set()
        self.subst: Dict[str, Ty] = {}
        self._counter = 0
        for decl in sorts:
            if not decl.elements:
                raise TypeCheckError(f"carrier set {decl.name} has no elements")
            self.sorts[decl.name] = decl
            self.used.add(decl.name)
            for element in decl.all_elements():
                self.elements[element.name] = element
                self.used.add(element.name)

    # ------------------------------------------------------------------ types

    def fresh(self) -> Ty:
        self._counter += 1
        return Ty('VAR', name=f"t{self._counter}")

    def resolve(self, ty: Ty) -> Ty:
        if ty.kind == 'VAR' and ty.name in self.subst:
            return self.resolve(self.subst[ty.name])
        if ty.kind == 'SET':
            return set_of(self.resolve(ty.elem))
        return ty

    def _occurs(self, var: str, ty: Ty) -> bool:
        ty = self.resolve(ty)
        if ty.kind == 'VAR':
            return ty.name == var
        if ty.kind == 'SET':
            return self._occurs(var, ty.elem)
        return False

    def unify(self, a: Ty, b: Ty, where: str) -> Ty:
        a, b = self.resolve(a), self.resolve(b)
        if a == b:
            return a
        if a.kind == 'VAR':
            if self._occurs(a.name, b):
                raise TypeCheckError(f"type mismatch: {self._show(a)} vs {self._show(b)}", where)
            self.subst[a.name] = b
            return b
        if b.kind == 'VAR':
            return self.unify(b, a, where)
        if a.kind == 'SET' and b.kind == 'SET':
            return set_of(self.unify(a.elem, b.elem, where))
        raise TypeCheckError(f"type mismatch: {self._show(a)} vs {self._show(b)}", where)

    def _show(self, ty: Ty) -> str:
        ty = self.resolve(ty)
        if ty.kind == 'VAR':
            return '?'
        if ty.kind == 'SET':
            return f"POW({self._show(ty.elem)})"
        return str(ty)

    def check_declared_type(self, ty: Ty, where: str) -> Ty:
        if ty.kind == 'SORT' and ty.name not in self.sorts:
            raise TypeCheckError(f"unknown carrier set {ty.name}", where)
        if ty.kind == 'SET':
            self.check_declared_type(ty.elem, where)
        return ty

    # ------------------------------------------------------------------ names

    def fresh_name(self, name: str) -> str:
        """Return name if unused, otherwise a numbered variant; marks it used."""
        candidate = name
        i = 1
        while candidate in self.used:
            candidate = f"{name}_{i}"
            i += 1
        self.used.add(candidate)
        return candidate

    # ------------------------------------------------------------------ expressions

    def expr(self, e: Expr, scope: _Scope, where: str) -> Expr:
        if isinstance(e, IntLit):
            return replace(e, ty=INT)
        if isinstance(e, BoolLit):
            return replace(e, ty=BOOL)
        if isinstance(e, ElemLit):
            return replace(e, ty=sort_type(e.element.sort))
        if isinstance(e, Ident):
            return self._ident(e, scope, where)
        if isinstance(e, SortSet):
            return replace(e, ty=set_of(sort_type(e.sort)))
        if isinstance(e, BuiltinSet):
            return replace(e, ty=set_of(BOOL if e.name == 'BOOL' else INT))
        if isinstance(e, ArithOp):
            left = self.expr(e.left, scope, where)
            right = self.expr(e.right, scope, where)
            self.unify(left.ty, INT, where)
            self.unify(right.ty, INT, where)
            return ArithOp(e.op, left, right, ty=INT)
        if isinstance(e, Negate):
            arg = self.expr(e.arg, scope, where)
            self.unify(arg.ty, INT, where)
            return Negate(arg, ty=INT)
        if isinstance(e, Card):
            arg = self.expr(e.arg, scope, where)
            self.unify(arg.ty, set_of(self.fresh()), where)
            return Card(arg, ty=INT)
        if isinstance(e, EmptySet):
            return EmptySet(ty=set_of(self.fresh()))
        if isinstance(e, SetLit):
            items = tuple(self.expr(i, scope, where) for i in e.items)
            elem = self.fresh()
            for item in items:
                elem = self.unify(elem, item.ty, where)
            return SetLit(items, ty=set_of(elem))
        if isinstance(e, Interval):
            lo = self.expr(e.lo, scope, where)
            hi = self.expr(e.hi, scope, where)
            self.unify(lo.ty, INT, where)
            self.unify(hi.ty, INT, where)
            return Interval(lo, hi, ty=set_of(INT))
        if isinstance(e, SetOp):
            left = self.expr(e.left, scope, where)
            right = self.expr(e.right, scope, where)
            ty = self.unify(left.ty, set_of(self.fresh()), where)
            ty = self.unify(ty, right.ty, where)
            return SetOp(e.op, left, right, ty=ty)
        raise TypeCheckError(f"unsupported expression {e!r}", where)

    def _ident(self, e: Ident, scope: _Scope, where: str) -> Expr:
        name = e.name
        if name in scope.names:
            resolved, ty = scope.names[name]
            return Ident(resolved, ty=ty)
        if name in scope.hidden:
            raise TypeCheckError(f"{scope.hidden[name]} '{name}'", where)
        if name in self.elements:
            element = self.elements[name]
            return ElemLit(element, ty=sort_type(element.sort))
        if name in self.sorts:
            decl = self.sorts[name]
            return SortSet(name, decl.all_elements(), ty=set_of(sort_type(name)))
        raise TypeCheckError(f"unknown identifier '{name}'", where)

    # ------------------------------------------------------------------ predicates

    def pred(self, p: Pred, scope: _Scope, where: str) -> Pred:
        if isinstance(p, BoolConst):
            return p
        if isinstance(p, Rel):
            return self._rel(p, scope, where)
        if isinstance(p, Not):
            return Not(self.pred(p.arg, scope, where))
        if isinstance(p, And):
            return And(tuple(self.pred(a, scope, where) for a in p.args))
        if isinstance(p, Or):
            return Or(tuple(self.pred(a, scope, where) for a in p.args))
        if isinstance(p, Implies):
            return Implies(self.pred(p.left, scope, where), self.pred(p.right, scope, where))
        if isinstance(p, Equiv):
            return Equiv(self.pred(p.left, scope, where), self.pred(p.right, scope, where))
        if isinstance(p, (Exists, Forall)):
            binders = []
            bindings = {}
            for b in p.binders:
                ty = self.check_declared_type(b.ty, where) if b.ty is not None else self.fresh()
                renamed = self.fresh_name(b.name)
                bindings[b.name] = (renamed, ty)
                binders.append(Binder(renamed, ty))
            body = self.pred(p.body, scope.extend(bindings), where)
            return type(p)(tuple(binders), body)
        raise TypeCheckError(f"unsupported predicate {p!r}", where)

    def _rel(self, p: Rel, scope: _Scope, where: str) -> Rel:
        left = self.expr(p.left, scope, where)
        right = self.expr(p.right, scope, where)
        if p.op in ('=', '/='):
            self.unify(left.ty, right.ty, where)
        elif p.op in ('<', '<=', '>', '>='):
            self.unify(left.ty, INT, where)
            self.unify(right.ty, INT, where)
        elif p.op in (':', '/:'):
            self.unify(set_of(left.ty), right.ty, where)
        else:
            ty = self.unify(left.ty, set_of(self.fresh()), where)
            self.unify(ty, right.ty, where)
        return Rel(p.op, left, right)

    # ------------------------------------------------------------------ finishing

    def finish(self, node: Any, where: str) -> Any:
        """Replace type variables by their solutions; fail on uninferable types."""
        if isinstance(node, Ty):
            ty = self.resolve(node)
            if any(t.kind == 'VAR' for t in _ty_parts(ty)):
                raise TypeCheckError("cannot infer type", where)
            return ty
        if isinstance(node, tuple):
            return tuple(self.finish(n, where) for n in node)
        if not is_dataclass(node) or isinstance(node, (Element, SortDecl)):
            return node
        changes = {}
        for f in fields(node):
            value = getattr(node, f.name)
            if value is None:
                continue
            new_value = self.finish(value, where)
            if new_value is not value:
                changes[f.name] = new_value
        return replace(node, **changes) if changes else node


def _ty_parts(ty: Ty) -> List[Ty]:
    parts = [ty]
    while ty.kind == 'SET':
        ty = ty.elem
        parts.append(ty)
    return parts


def typecheck(m: Machine) -> Machine:
    """
    Typecheck a parsed machine.

    Args:
        m: Machine from parse_machine

    Returns:
        Machine with typed declarations, annotated expressions and unique binders

    Raises:
        TypeCheckError: On mismatches, unknown identifiers, uninferable types or a
            malformed initialisation
    """
    if m.typed:
        return m
    tc = TypeChecker(m.sorts)

    constants: Dict[str, Tuple[str, Ty]] = {}
    for b in m.constants:
        tc.used.add(b.name)
        constants[b.name] = (b.name, tc.fresh())
    variables: Dict[str, Tuple[str, Ty]] = {}
    for b in m.variables:
        tc.used.add(b.name)
        variables[b.name] = (b.name, tc.fresh())

    hidden_vars = {name: 'axiom mentions variable' for name in variables}
    axiom_scope = _Scope(constants, hidden_vars)
    state_scope = _Scope({**constants, **variables})

    axioms = [replace(c, pred=tc.pred(c.pred, axiom_scope, f"axiom {c.where()}")) for c in m.axioms]
    invariants = [replace(c, pred=tc.pred(c.pred, state_scope, f"invariant {c.where()}"))
                  for c in m.invariants]

    init = None
    if m.init is not None:
        init_scope = _Scope(constants, {name: 'initialisation reads variable' for name in variables})
        assigned = set()
        actions = []
        for a in m.init.actions:
            where = f"INITIALISATION := {a.target}"
            if a.target not in variables:
                raise TypeCheckError(f"initialisation assigns non-variable '{a.target}'", where)
            expr = tc.expr(a.expr, init_scope, where)
            tc.unify(variables[a.target][1], expr.ty, where)
            assigned.add(a.target)
            actions.append(Assignment(a.target, expr))
        missing = [name for name in variables if name not in assigned]
        if missing:
            raise TypeCheckError(f"initialisation does not assign {', '.join(missing)}", 'INITIALISATION')
        init = replace(m.init, actions=tuple(actions))
    elif variables:
        raise TypeCheckError("machine has variables but no INITIALISATION", m.name)

    events = [_check_event(tc, e, state_scope, constants, variables) for e in m.events]

    typed = Machine(
        name=m.name,
        sorts=m.sorts,
        constants=tuple(Binder(name, ty) for name, (_n, ty) in constants.items()),
        axioms=tuple(axioms),
        variables=tuple(Binder(name, ty) for name, (_n, ty) in variables.items()),
        invariants=tuple(invariants),
        init=init,
        events=tuple(events),
        typed=True,
    )
    for b in typed.declarations:
        if any(t.kind == 'VAR' for t in _ty_parts(tc.resolve(b.ty))):
            raise TypeCheckError(f"cannot infer type of '{b.name}'", m.name)
    result = tc.finish(typed, m.name)
    logger.debug(f"Typechecked machine {m.name}: " +
                 ', '.join(f"{b.name}:{b.ty}" for b in result.declarations))
    return result


def _check_event(tc: TypeChecker, e: Event, state_scope: _Scope,
                 constants: Dict[str, Any], variables: Dict[str, Any]) -> Event:
    bindings = {}
    params = []
    for b in e.params:
        where = f"event {e.name} parameter {b.name}"
        if b.name in constants or b.name in variables or b.name in tc.elements or b.name in tc.sorts:
            raise TypeCheckError(f"parameter '{b.name}' clashes with a declared name", where)
        ty = tc.check_declared_type(b.ty, where) if b.ty is not None else tc.fresh()
        bindings[b.name] = (b.name, ty)
        params.append(Binder(b.name, ty))
        tc.used.add(b.name)
    scope = state_scope.extend(bindings)
    guards = [replace(c, pred=tc.pred(c.pred, scope, f"event {e.name} guard {c.where()}"))
              for c in e.guards]
    actions = []
    for a in e.actions:
        where = f"event {e.name} action {a.target} := ..."
        if a.target not in variables:
            raise TypeCheckError(f"event assigns non-variable '{a.target}'", where)
        expr = tc.expr(a.expr, scope, where)
        tc.unify(variables[a.target][1], expr.ty, where)
        actions.append(Assignment(a.target, expr))
    for b in params:
        if any(t.kind == 'VAR' for t in _ty_parts(tc.resolve(b.ty))):
            raise TypeCheckError(f"cannot infer type of parameter '{b.name}'", f"event {e.name}")
    return replace(e, params=tuple(params), guards=tuple(guards), actions=tuple(actions))


def typecheck_predicate(m: Machine, p: Pred, extra: Optional[Dict[str, Ty]] = None) -> Pred:
    """
    Typecheck a standalone predicate (e.g. a goal) over a typed machine's scope.

    Args:
        m: Typed machine
        p: Parsed predicate
        extra: Additional typed identifiers in scope

    Returns:
        Typed predicate with binders renamed away from the machine's names

    Raises:
        TypeCheckError: On mismatches or unknown identifiers
    """
    tc = TypeChecker(m.sorts)
    scope_names = {b.name: (b.name, b.ty) for b in m.declarations}
    for name, ty in (extra or {}).items():
        scope_names[name] = (name, ty)
    tc.used.update(scope_names)
    for node in _machine_nodes(m):
        if isinstance(node, (Exists, Forall)):
            tc.used.update(b.name for b in node.binders)
    for e in m.events:
        tc.used.update(b.name for b in e.params)
    typed = tc.pred(p, _Scope(scope_names), 'goal')
    return tc.finish(typed, 'goal')


def _machine_nodes(m: Machine):
    for c in m.axioms + m.invariants:
        yield from walk(c.pred)
    for e in m.events:
        for c in e.guards:
            yield from walk(c.pred)
