"""
Ground Evaluator
================
Evaluates typed predicates and expressions under a total valuation.

Semantics:
    - ``div`` truncates toward zero, ``mod`` is ``a - b * (a div b)``; a zero
      divisor raises WDError naming the sub-expression and enclosing atom.
    - ``&``, ``or`` and ``=>`` are non-strict left to right; ``<=>`` is strict.
    - Quantifiers iterate candidate values drawn from the body (equalities,
      memberships, subset constraints, integer bounds) and otherwise the
      binder's type domain, with integers limited to -MAXINT..MAXINT.

Usage:
    from core.evaluator import eval_pred, free_vars

    eval_pred(parse_predicate('x > 0'), {'x': 3})       # True
"""

import logging
from functools import lru_cache
from itertools import combinations
from typing import Any, Dict, FrozenSet, Iterator, List, Optional, Sequence, Tuple

from .config import SETTINGS
from .errors import CheckerError, EvaluationError, WDError
from .model import (
    And, ArithOp, Binder, BoolConst, BoolLit, BuiltinSet, Card, ElemLit, EmptySet, Equiv, Event,
    Exists, Expr, Forall, Ident, Implies, IntLit, Interval, Machine, Negate, Not, Or, Pred, Rel,
    SetLit, SetOp, SortDecl, SortSet, Ty, Valuation, children, conjuncts, sorted_values,
)

logger = logging.getLogger(__name__)


def int_div(a: int, b: int) -> int:
    """Integer division truncating toward zero."""
    q = abs(a) // abs(b)
    return q if (a >= 0) == (b > 0) else -q


def int_mod(a: int, b: int) -> int:
    return a - b * int_div(a, b)


@lru_cache(maxsize=4096)
def free_vars(node: Any) -> FrozenSet[str]:
    """
    Free identifiers of an expression or predicate (bound names excluded).

    Args:
        node: Expr or Pred

    Returns:
        Frozen set of identifier names
    """
    if isinstance(node, Ident):
        return frozenset((node.name,))
    if isinstance(node, (Exists, Forall)):
        return free_vars(node.body) - {b.name for b in node.binders}
    result: FrozenSet[str] = frozenset()
    for child in children(node):
        result = result | free_vars(child)
    return result


def enabling_predicate(e: Event) -> Pred:
    """The event's guard, existentially closed over its parameters."""
    guard = e.guard
    if not e.params or guard == BoolConst(True):
        return guard
    return Exists(e.params, guard)


def _is_var(e: Expr, name: str) -> bool:
    return isinstance(e, Ident) and e.name == name


class Evaluator:
    """
    Ground evaluator bound to a machine's carrier sets and an integer bound.

    Args:
        sorts: Carrier set declarations (or a Machine)
        maxint: Integer bound for unbounded quantifier domains
        set_universe_limit: Largest powerset enumerated for set-typed binders
    """

    def __init__(self, sorts: Any = (), maxint: Optional[int] = None,
                 set_universe_limit: Optional[int] = None):
        if isinstance(sorts, Machine):
            sorts = sorts.sorts
        self.sorts: Dict[str, SortDecl] = {s.name: s for s in sorts}
        self.maxint = maxint if maxint is not None else SETTINGS.maxint
        self.set_universe_limit = set_universe_limit or SETTINGS.nested_set_universe_limit

    # ------------------------------------------------------------------ expressions

    def expr(self, e: Expr, v: Valuation) -> Any:
        if isinstance(e, IntLit):
            return e.value
        if isinstance(e, BoolLit):
            return e.value
        if isinstance(e, Ident):
            try:
                return v[e.name]
            except KeyError:
                raise EvaluationError(f"no value for identifier '{e.name}'") from None
        if isinstance(e, ElemLit):
            return e.element
        if isinstance(e, ArithOp):
            a = self.expr(e.left, v)
            b = self.expr(e.right, v)
            if e.op == '+':
                return a + b
            if e.op == '-':
                return a - b
            if e.op == '*':
                return a * b
            if b == 0:
                raise WDError(e)
            return int_div(a, b) if e.op == 'div' else int_mod(a, b)
        if isinstance(e, Negate):
            return -self.expr(e.arg, v)
        if isinstance(e, Card):
            return len(self.expr(e.arg, v))
        if isinstance(e, EmptySet):
            return frozenset()
        if isinstance(e, SetLit):
            return frozenset(self.expr(i, v) for i in e.items)
        if isinstance(e, Interval):
            return frozenset(range(self.expr(e.lo, v), self.expr(e.hi, v) + 1))
        if isinstance(e, SetOp):
            a = self.expr(e.left, v)
            b = self.expr(e.right, v)
            if e.op == 'union':
                return a | b
            if e.op == 'inter':
                return a & b
            return a - b
        if isinstance(e, SortSet):
            return frozenset(e.elements)
        if isinstance(e, BuiltinSet):
            return self.builtin_values(e.name)
        raise EvaluationError(f"cannot evaluate {e!r}")

    def builtin_values(self, name: str) -> FrozenSet[Any]:
        return _builtin_values(name, self.maxint)

    def _member(self, x: Any, s: Expr, v: Valuation) -> bool:
        if isinstance(s, BuiltinSet) and s.name != 'BOOL':
            lo = {'INT': -self.maxint, 'NAT': 0, 'NAT1': 1}[s.name]
            return lo <= x <= self.maxint
        if isinstance(s, Interval):
            return self.expr(s.lo, v) <= x <= self.expr(s.hi, v)
        return x in self.expr(s, v)

    # ------------------------------------------------------------------ predicates

    def pred(self, p: Pred, v: Valuation) -> bool:
        if isinstance(p, BoolConst):
            return p.value
        if isinstance(p, Rel):
            try:
                return self._rel(p, v)
            except WDError as err:
                raise err.with_atom(p) from None
        if isinstance(p, Not):
            return not self.pred(p.arg, v)
        if isinstance(p, And):
            for arg in p.args:
                if not self.pred(arg, v):
                    return False
            return True
        if isinstance(p, Or):
            for arg in p.args:
                if self.pred(arg, v):
                    return True
            return False
        if isinstance(p, Implies):
            return (not self.pred(p.left, v)) or self.pred(p.right, v)
        if isinstance(p, Equiv):
            left = self.pred(p.left, v)
            right = self.pred(p.right, v)
            return left == right
        if isinstance(p, Exists):
            binders, body = _flatten_quantifier(p)
            for env in self.assignments(binders, conjuncts(body), v):
                if self.pred(body, env):
                    return True
            return False
        if isinstance(p, Forall):
            binders, body = _flatten_quantifier(p)
            guards = conjuncts(body.left) if isinstance(body, Implies) else ()
            for env in self.assignments(binders, guards, v):
                if not self.pred(body, env):
                    return False
            return True
        raise EvaluationError(f"cannot evaluate {p!r}")

    def _rel(self, p: Rel, v: Valuation) -> bool:
        op = p.op
        if op in (':', '/:'):
            inside = self._member(self.expr(p.left, v), p.right, v)
            return inside if op == ':' else not inside
        a = self.expr(p.left, v)
        b = self.expr(p.right, v)
        if op == '=':
            return a == b
        if op == '/=':
            return a != b
        if op == '<':
            return a < b
        if op == '<=':
            return a <= b
        if op == '>':
            return a > b
        if op == '>=':
            return a >= b
        if op == '<:':
            return a <= b
        if op == '/<:':
            return not a <= b
        raise EvaluationError(f"unknown relation {op}")

    # ------------------------------------------------------------------ binder enumeration

    def type_values(self, ty: Optional[Ty], lo: Optional[int] = None, hi: Optional[int] = None) -> List[Any]:
        """All values of a type within the evaluator's bounds."""
        if ty is None:
            raise EvaluationError("cannot enumerate an untyped binder")
        if ty.kind == 'INT':
            lo = -self.maxint if lo is None else max(lo, -self.maxint)
            hi = self.maxint if hi is None else min(hi, self.maxint)
            return list(range(lo, hi + 1))
        if ty.kind == 'BOOL':
            return [False, True]
        if ty.kind == 'SORT':
            return list(self.sorts[ty.name].all_elements())
        if ty.elem.kind == 'INT':
            raise EvaluationError(f"cannot enumerate all sets of integers for type {ty}")
        return self._subsets(self.type_values(ty.elem))

    def _subsets(self, base: Sequence[Any]) -> Optional[List[FrozenSet]]:
        if 2 ** len(base) > self.set_universe_limit:
            return None
        base = sorted_values(base)
        out = []
        for k in range(len(base) + 1):
            out.extend(frozenset(c) for c in combinations(base, k))
        return out

    def _try_expr(self, e: Expr, env: Valuation) -> Tuple[bool, Any]:
        try:
            return True, self.expr(e, env)
        except CheckerError:
            return False, None

    def _candidates(self, b: Binder, preds: Sequence[Pred], env: Valuation,
                    pending: FrozenSet[str]) -> Optional[List[Any]]:
        """Values for b pinned down by one of the conjuncts, or None if none does."""
        best = None
        for c in preds:
            if not isinstance(c, Rel):
                continue
            values = None
            if c.op == '=':
                other = c.right if _is_var(c.left, b.name) else c.left if _is_var(c.right, b.name) else None
                if other is not None and not (free_vars(other) & (pending | {b.name})):
                    ok, value = self._try_expr(other, env)
                    values = [value] if ok else None
            elif c.op in (':', '<:') and _is_var(c.left, b.name) and not (free_vars(c.right) & (pending | {b.name})):
                ok, value = self._try_expr(c.right, env)
                if ok:
                    values = sorted_values(value) if c.op == ':' else self._subsets(list(value))
            if values is not None and (best is None or len(values) < len(best)):
                best = values
        return best

    def _int_bounds(self, b: Binder, preds: Sequence[Pred], env: Valuation,
                    pending: FrozenSet[str]) -> Tuple[Optional[int], Optional[int]]:
        lo = hi = None
        for c in preds:
            if not isinstance(c, Rel) or c.op not in ('<', '<=', '>', '>='):
                continue
            if _is_var(c.left, b.name):
                other, op = c.right, c.op
            elif _is_var(c.right, b.name):
                other, op = c.left, {'<': '>', '<=': '>=', '>': '<', '>=': '<='}[c.op]
            else:
                continue
            if free_vars(other) & (pending | {b.name}):
                continue
            ok, value = self._try_expr(other, env)
            if not ok:
                continue
            if op == '<':
                hi = value - 1 if hi is None else min(hi, value - 1)
            elif op == '<=':
                hi = value if hi is None else min(hi, value)
            elif op == '>':
                lo = value + 1 if lo is None else max(lo, value + 1)
            else:
                lo = value if lo is None else max(lo, value)
        return lo, hi

    def assignments(self, binders: Sequence[Binder], preds: Sequence[Pred],
                    env: Valuation) -> Iterator[Valuation]:
        """
        Enumerate extensions of env over binders, restricted by the given conjuncts.

        Every extension on which all of ``preds`` hold is produced; other
        extensions may or may not be.
        """
        if not binders:
            yield env
            return
        names = frozenset(b.name for b in binders)
        chosen = None
        for i, b in enumerate(binders):
            values = self._candidates(b, preds, env, names - {b.name})
            if values is not None and (chosen is None or len(values) < len(chosen[1])):
                chosen = (i, values)
        if chosen is None:
            b = binders[0]
            lo, hi = (None, None)
            if b.ty is not None and b.ty.kind == 'INT':
                lo, hi = self._int_bounds(b, preds, env, names - {b.name})
            values = self.type_values(b.ty, lo, hi)
            if values is None:
                raise EvaluationError(f"domain of {b.name}:{b.ty} is too large to enumerate")
            chosen = (0, values)
        index, values = chosen
        binder = binders[index]
        rest = list(binders[:index]) + list(binders[index + 1:])
        for value in values:
            child = dict(env)
            child[binder.name] = value
            yield from self.assignments(rest, preds, child)

    def solutions(self, binders: Sequence[Binder], p: Pred, v: Valuation) -> Iterator[Valuation]:
        """Binder valuations (binders only) under which p holds in v."""
        names = [b.name for b in binders]
        for env in self.assignments(binders, conjuncts(p), v):
            if self.pred(p, env):
                yield {name: env[name] for name in names}


def _flatten_quantifier(p: Pred) -> Tuple[Tuple[Binder, ...], Pred]:
    """Merge directly nested quantifiers of the same kind with distinct binder names."""
    binders = p.binders
    body = p.body
    while isinstance(body, type(p)) and not ({b.name for b in body.binders} & {b.name for b in binders}):
        binders = binders + body.binders
        body = body.body
    return binders, body


@lru_cache(maxsize=32)
def _builtin_values(name: str, maxint: int) -> FrozenSet[Any]:
    if name == 'BOOL':
        return frozenset((False, True))
    lo = {'INT': -maxint, 'NAT': 0, 'NAT1': 1}[name]
    return frozenset(range(lo, maxint + 1))


def eval_pred(p: Pred, v: Valuation, sorts: Any = (), maxint: Optional[int] = None) -> bool:
    """
    Evaluate a predicate under a total valuation.

    Raises:
        WDError: On division or modulo by zero
        EvaluationError: On a missing identifier or an unenumerable binder
    """
    return Evaluator(sorts, maxint).pred(p, v)


def eval_expr(e: Expr, v: Valuation, sorts: Any = (), maxint: Optional[int] = None) -> Any:
    return Evaluator(sorts, maxint).expr(e, v)


def evaluate(node: Any, v: Valuation, sorts: Any = (), maxint: Optional[int] = None) -> Any:
    """Evaluate a predicate (to bool) or an expression (to a ground value)."""
    if isinstance(node, Pred):
        return eval_pred(node, v, sorts, maxint)
    return eval_expr(node, v, sorts, maxint)


def apply_actions(e: Event, v: Valuation, params: Optional[Valuation] = None,
                  evaluator: Optional[Evaluator] = None) -> Valuation:
    """Execute an event's assignments simultaneously: all right-hand sides read v."""
    evaluator = evaluator or Evaluator()
    env = dict(v)
    if params:
        env.update(params)
    updates = {a.target: evaluator.expr(a.expr, env) for a in e.actions}
    result = dict(v)
    result.update(updates)
    return result


def guard_truth(e: Event, v: Valuation, evaluator: Evaluator) -> Tuple[bool, Optional[Pred]]:
    """
    Whether an event is enabled in v and, if not, a guard conjunct it fails on.

    For a parameterless event the first false guard conjunct is returned; with
    parameters the falsified conjunct is the first one false for every candidate
    parameter valuation, if any single conjunct is.
    """
    guard_conjuncts = conjuncts(e.guard)
    if not e.params:
        for c in guard_conjuncts:
            if not evaluator.pred(c, v):
                return False, c
        return True, None
    envs = list(evaluator.assignments(e.params, guard_conjuncts, v))
    for env in envs:
        if evaluator.pred(e.guard, env):
            return True, None
    for c in guard_conjuncts:
        if not (free_vars(c) & {b.name for b in e.params}) and not evaluator.pred(c, v):
            return False, c
    return False, None

