"""
Predicate Simplifier
====================
Rewrites enabling predicates into a form the constraint kernel handles well
and normalizes atomic predicates into sharing keys.

Rules (innermost first, repeated to a fixpoint):
    R4  #x.(... & x = E & ...)  ->  (...)[E/x]          x not free in E, E well-defined,
                                                        x = E before any div or mod
    H   #x.(C & D)              ->  C & #x.(D)          x not free in C, C and the conjuncts
                                                        before it free of div and mod
    R1  #x.(x : S)              ->  S /= {}
    R2  S /= {}                 ->  TRUE                S known nonempty
    R3  #x.(x > E)              ->  TRUE                x : INT, E statically below MAXINT
                                                        (and the mirrored / non-strict forms)
"""

import logging
from dataclasses import dataclass, field
from typing import Any, Dict, FrozenSet, Iterable, List, Optional, Tuple

from .config import SETTINGS
from .errors import NotAtomicError
from .evaluator import free_vars
from .model import (
    And, ArithOp, Binder, BoolConst, BuiltinSet, Card, EmptySet, Exists, Expr, Forall, Ident,
    IntLit, Interval, Negate, Not, Or, Pred, Rel, SetLit, SetOp, SortSet, FALSE, TRUE, conj,
    conjuncts, disj, has_division, map_children,
)

logger = logging.getLogger(__name__)

_MIRROR = {'<': '>', '<=': '>=', '>': '<', '>=': '<='}


@dataclass
class NonEmptyFacts:
    """
    Static knowledge used by R2 and R3.

    Attributes:
        sets: set expressions known to be nonempty
        int_bounds: static (lo, hi) bounds of integer identifiers
        maxint: integer bound of the solver
    """

    sets: FrozenSet[Expr] = frozenset()
    int_bounds: Dict[str, Tuple[Optional[int], Optional[int]]] = field(default_factory=dict)
    maxint: int = SETTINGS.maxint

    @classmethod
    def from_predicates(cls, preds: Iterable[Pred], maxint: Optional[int] = None) -> "NonEmptyFacts":
        """Collect facts from the top-level conjuncts of axioms/invariants."""
        maxint = maxint if maxint is not None else SETTINGS.maxint
        sets = set()
        bounds: Dict[str, Tuple[Optional[int], Optional[int]]] = {}

        def narrow(name: str, lo: Optional[int], hi: Optional[int]):
            old_lo, old_hi = bounds.get(name, (None, None))
            if lo is not None:
                old_lo = lo if old_lo is None else max(old_lo, lo)
            if hi is not None:
                old_hi = hi if old_hi is None else min(old_hi, hi)
            bounds[name] = (old_lo, old_hi)

        for p in preds:
            for c in conjuncts(p):
                nonempty = _asserted_nonempty(c)
                if nonempty is not None:
                    sets.add(nonempty)
                if not isinstance(c, Rel):
                    continue
                if c.op == ':':
                    sets.add(c.right)
                    if isinstance(c.left, Ident):
                        lo, hi = _set_int_range(c.right, maxint)
                        if lo is not None or hi is not None:
                            narrow(c.left.name, lo, hi)
                elif c.op in _MIRROR:
                    op, left, right = c.op, c.left, c.right
                    if not isinstance(left, Ident):
                        op, left, right = _MIRROR[op], right, left
                    if isinstance(left, Ident) and isinstance(right, IntLit):
                        k = right.value
                        if op == '<':
                            narrow(left.name, None, k - 1)
                        elif op == '<=':
                            narrow(left.name, None, k)
                        elif op == '>':
                            narrow(left.name, k + 1, None)
                        else:
                            narrow(left.name, k, None)
        return cls(frozenset(sets), bounds, maxint)

    def is_nonempty(self, s: Expr) -> bool:
        if s in self.sets:
            return True
        if isinstance(s, (SortSet, BuiltinSet)):
            return True
        if isinstance(s, SetLit):
            return len(s.items) > 0
        if isinstance(s, Interval):
            lo = static_bounds(s.lo, self)
            hi = static_bounds(s.hi, self)
            return lo[1] is not None and hi[0] is not None and lo[1] <= hi[0]
        if isinstance(s, SetOp) and s.op == 'union':
            return self.is_nonempty(s.left) or self.is_nonempty(s.right)
        return False


def _asserted_nonempty(c: Pred) -> Optional[Expr]:
    """S for conjuncts of the form S /= {}, {} /= S, not(S = {}), card(S) > 0, card(S) >= 1."""
    if isinstance(c, Not) and isinstance(c.arg, Rel) and c.arg.op == '=':
        c = Rel('/=', c.arg.left, c.arg.right)
    if isinstance(c, Rel) and c.op == '/=':
        if isinstance(c.right, EmptySet):
            return c.left
        if isinstance(c.left, EmptySet):
            return c.right
    if isinstance(c, Rel) and isinstance(c.left, Card) and isinstance(c.right, IntLit):
        if (c.op == '>' and c.right.value >= 0) or (c.op == '>=' and c.right.value >= 1):
            return c.left.arg
    return None


def _set_int_range(s: Expr, maxint: int) -> Tuple[Optional[int], Optional[int]]:
    if isinstance(s, Interval) and isinstance(s.lo, IntLit) and isinstance(s.hi, IntLit):
        return s.lo.value, s.hi.value
    if isinstance(s, BuiltinSet):
        return {'INT': (-maxint, maxint), 'NAT': (0, maxint), 'NAT1': (1, maxint)}.get(s.name, (None, None))
    if isinstance(s, SetLit) and s.items and all(isinstance(i, IntLit) for i in s.items):
        values = [i.value for i in s.items]
        return min(values), max(values)
    return None, None


def static_bounds(e: Expr, facts: NonEmptyFacts) -> Tuple[Optional[int], Optional[int]]:
    """Conservative static (lo, hi) bounds of an integer expression; None means unknown."""
    if isinstance(e, IntLit):
        return e.value, e.value
    if isinstance(e, Ident):
        return facts.int_bounds.get(e.name, (None, None))
    if isinstance(e, Negate):
        lo, hi = static_bounds(e.arg, facts)
        return (-hi if hi is not None else None), (-lo if lo is not None else None)
    if isinstance(e, Card):
        return 0, None
    if isinstance(e, ArithOp) and e.op in ('+', '-', '*'):
        a_lo, a_hi = static_bounds(e.left, facts)
        b_lo, b_hi = static_bounds(e.right, facts)
        if e.op == '+':
            return _add(a_lo, b_lo), _add(a_hi, b_hi)
        if e.op == '-':
            return _sub(a_lo, b_hi), _sub(a_hi, b_lo)
        if None in (a_lo, a_hi, b_lo, b_hi):
            return None, None
        products = [a_lo * b_lo, a_lo * b_hi, a_hi * b_lo, a_hi * b_hi]
        return min(products), max(products)
    return None, None


def _add(a: Optional[int], b: Optional[int]) -> Optional[int]:
    return None if a is None or b is None else a + b


def _sub(a: Optional[int], b: Optional[int]) -> Optional[int]:
    return None if a is None or b is None else a - b


# ==========================================
# SUBSTITUTION
# ==========================================

def _fresh_name(name: str, avoid: FrozenSet[str]) -> str:
    i = 1
    while f"{name}_{i}" in avoid:
        i += 1
    return f"{name}_{i}"


def substitute(p: Any, x: str, e: Expr) -> Any:
    """
    Capture-avoiding substitution p[e/x] over predicates and expressions.

    Binders that would capture a free identifier of e are renamed first.
    """
    return _subst(p, x, e, free_vars(e))


def _subst(node: Any, x: str, e: Expr, fv_e: FrozenSet[str]) -> Any:
    if isinstance(node, Ident):
        return e if node.name == x else node
    if x not in free_vars(node):
        return node
    if isinstance(node, (Exists, Forall)):
        binders = list(node.binders)
        body = node.body
        taken = set(b.name for b in binders)
        for i, b in enumerate(binders):
            if b.name in fv_e:
                new_name = _fresh_name(b.name, frozenset(fv_e | free_vars(body) | taken | {x}))
                body = _subst(body, b.name, Ident(new_name, ty=b.ty), frozenset((new_name,)))
                binders[i] = Binder(new_name, b.ty)
                taken.add(new_name)
        return type(node)(tuple(binders), _subst(body, x, e, fv_e))
    return map_children(node, lambda child: _subst(child, x, e, fv_e))


# ==========================================
# ATOM NORMALIZATION
# ==========================================

def struct_key(node: Any) -> Tuple[str, str]:
    """Deterministic total order on ASTs: constructor tag, then structure."""
    return type(node).__name__, repr(node)


def normalize_atom(a: Pred) -> Tuple[str, Tuple[Any, ...], bool]:
    """
    Canonical sharing key ``(kind, args, polarity)`` of an atomic predicate.

    ``x > y`` and ``y < x`` share a key; ``y >= x`` has the same kind and
    arguments with the opposite polarity.

    Raises:
        NotAtomicError: If a is not an atomic predicate
    """
    if isinstance(a, BoolConst):
        return 'true', (), a.value
    if not isinstance(a, Rel):
        raise NotAtomicError(f"not an atomic predicate: {type(a).__name__}")
    l, r = a.left, a.right
    if a.op == '<':
        return 'lt', (l, r), True
    if a.op == '>':
        return 'lt', (r, l), True
    if a.op == '>=':
        return 'lt', (l, r), False
    if a.op == '<=':
        return 'lt', (r, l), False
    if a.op in ('=', '/='):
        args = tuple(sorted((l, r), key=struct_key))
        return 'eq', args, a.op == '='
    if a.op in (':', '/:'):
        return 'in', (l, r), a.op == ':'
    if a.op in ('<:', '/<:'):
        return 'subset', (l, r), a.op == '<:'
    raise NotAtomicError(f"unknown relation {a.op}")


# ==========================================
# SIMPLIFICATION
# ==========================================

def simplify(p: Pred, facts: Optional[NonEmptyFacts] = None) -> Pred:
    """
    Simplify p to a fixpoint of the rewrite rules.

    Args:
        p: Typed predicate
        facts: Nonemptiness and bound facts from axioms/invariants

    Returns:
        Equivalent predicate
    """
    facts = facts or NonEmptyFacts()
    previous = None
    while p != previous:
        previous = p
        p = _simp(p, facts)
    return p


def _simp(p: Pred, facts: NonEmptyFacts) -> Pred:
    if isinstance(p, (Exists, Forall)):
        if len(p.binders) > 1:
            inner = type(p)(p.binders[1:], p.body)
            return type(p)(p.binders[:1], _simp(inner, facts))
        p = type(p)(p.binders, _simp(p.body, facts))
        return _simp_exists(p, facts) if isinstance(p, Exists) else _simp_forall(p)
    if isinstance(p, (And, Or, Not)):
        p = map_children(p, lambda child: _simp(child, facts))
    if isinstance(p, And):
        return _constant_fold(p.args, absorbing=FALSE, build=conj)
    if isinstance(p, Or):
        return _constant_fold(p.args, absorbing=TRUE, build=disj)
    if isinstance(p, Not):
        if isinstance(p.arg, BoolConst):
            return BoolConst(not p.arg.value)
        if isinstance(p.arg, Not):
            return p.arg.arg
        if isinstance(p.arg, Rel) and p.arg.op == '=' and _nonempty_test(p.arg, facts):
            return TRUE
        return p
    if isinstance(p, Rel):
        if p.op == '/=' and _nonempty_test(p, facts):
            return TRUE
        return p
    if isinstance(p, (Exists, Forall)):
        return p
    return map_children(p, lambda child: _simp(child, facts))


def _nonempty_test(p: Rel, facts: NonEmptyFacts) -> bool:
    """R2: S /= {} (or {} /= S) with S known nonempty and well-defined."""
    if isinstance(p.right, EmptySet):
        s = p.left
    elif isinstance(p.left, EmptySet):
        s = p.right
    else:
        return False
    return not has_division(s) and facts.is_nonempty(s)


def _constant_fold(args: Tuple[Pred, ...], absorbing: BoolConst, build) -> Pred:
    """Drop neutral constants; cut at an absorbing one without skipping possible WD errors."""
    for i, arg in enumerate(args):
        if arg == absorbing:
            if not any(has_division(a) for a in args[:i]):
                return absorbing
            return build(args[:i + 1])
    return build(args)


def _equality_partner(c: Pred, name: str) -> Optional[Expr]:
    if isinstance(c, Rel) and c.op == '=':
        if isinstance(c.left, Ident) and c.left.name == name:
            return c.right
        if isinstance(c.right, Ident) and c.right.name == name:
            return c.left
    return None


def _division_free_prefix(cs: List[Pred]) -> int:
    """Number of leading conjuncts evaluated before any div or mod can fail."""
    for i, c in enumerate(cs):
        if has_division(c):
            return i
    return len(cs)


def _membership_after_division(cs: List[Pred], name: str) -> bool:
    """True if some name : S comes after a div or mod; an empty S hides the error."""
    for c in cs[_division_free_prefix(cs):]:
        if isinstance(c, Rel) and c.op == ':' and isinstance(c.left, Ident) and c.left.name == name:
            return True
    return False


def _simp_forall(p: Forall) -> Pred:
    if p.binders[0].name not in free_vars(p.body):
        return p.body
    return p


def _simp_exists(p: Exists, facts: NonEmptyFacts) -> Pred:
    x = p.binders[0]
    body = p.body
    if body == FALSE:
        return FALSE
    if x.name not in free_vars(body):
        return body
    cs = list(conjuncts(body))

    # R4: equality elimination, at any conjunct position
    for i, c in enumerate(cs):
        e = _equality_partner(c, x.name)
        if (e is not None and x.name not in free_vars(e) and not has_division(e)
                and i < _division_free_prefix(cs) and not _membership_after_division(cs, x.name)):
            logger.debug(f"R4 eliminates {x.name}")
            return substitute(conj(cs[:i] + cs[i + 1:]), x.name, e)

    # conjunct hoisting, only from the prefix before the first possibly ill-defined conjunct
    prefix = _division_free_prefix(cs)
    outside = [i for i in range(prefix) if x.name not in free_vars(cs[i])]
    if outside:
        inside = [c for i, c in enumerate(cs) if i not in outside]
        return conj([cs[i] for i in outside] + [Exists(p.binders, conj(inside))])

    if len(cs) == 1 and isinstance(cs[0], Rel):
        c = cs[0]
        # R1: #x.(x : S) -> S /= {}
        if (c.op == ':' and isinstance(c.left, Ident) and c.left.name == x.name
                and x.name not in free_vars(c.right) and not has_division(c.right)):
            return Rel('/=', c.right, EmptySet(ty=c.right.ty))
        # R3: #x.(x > E) -> TRUE when a witness fits below MAXINT
        if x.ty is not None and x.ty.kind == 'INT' and _unbounded_witness(c, x.name, facts):
            return TRUE
    return p


def _unbounded_witness(c: Rel, name: str, facts: NonEmptyFacts) -> bool:
    if c.op not in _MIRROR:
        return False
    if isinstance(c.left, Ident) and c.left.name == name:
        op, other = c.op, c.right
    elif isinstance(c.right, Ident) and c.right.name == name:
        op, other = _MIRROR[c.op], c.left
    else:
        return False
    if name in free_vars(other) or has_division(other):
        return False
    lo, hi = static_bounds(other, facts)
    if op == '>':
        return hi is not None and hi < facts.maxint
    if op == '>=':
        return hi is not None and hi <= facts.maxint
    if op == '<':
        return lo is not None and lo > -facts.maxint
    return lo is not None and lo >= -facts.maxint
