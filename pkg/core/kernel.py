"""
Constraint Kernel
=================
A reifying finite-domain solver over integers, carrier-set elements, booleans
and finite sets, used to find valuations satisfying typed predicates.

How it works:
    - Every atomic predicate is reified into a ReifVar whose truth is unknown,
      TRUE or FALSE. Atoms with the same normalized key share one ReifVar, so
      ``x > y`` and ``y >= x`` are the same variable with opposite polarity.
    - Compound predicates become boolean propagators over literals; quantifiers
      are expanded over at most ``quantifier_expansion_limit`` candidate values
      or suspended. ``a <: b`` is the conjunction of ``e : a => e : b`` over
      every element e that a may contain.
    - Propagators run from an agenda to a fixpoint. Every domain or truth change
      is trailed, so a backtrack restores the exact earlier state.
    - Search picks the undetermined identifier or suspended quantifier with the
      fewest estimated solutions (domain size, or the product of binder ranges).
      A picked quantifier is expanded for the current branch only. Every leaf
      is re-checked with the ground evaluator.

Usage:
    from core.kernel import solve

    result = solve(pred, machine.declarations, machine.sorts)
    if isinstance(result, Sat):
        print(result.valuation)
"""

import logging
import time
from collections import deque
from dataclasses import dataclass
from enum import Enum
from itertools import combinations
from typing import Any, Callable, Dict, FrozenSet, Iterator, List, Optional, Sequence, Tuple, Union

from .config import SETTINGS, Settings
from .domains import EnumDomain, IntDomain, SetDomain
from .errors import EvaluationError, KernelError, WDError
from .evaluator import Evaluator, free_vars, int_div, int_mod
from .model import (
    And, ArithOp, Binder, BoolConst, BoolLit, BuiltinSet, Card, ElemLit, EmptySet, Equiv, Exists,
    Expr, Forall, Ident, Implies, IntLit, Interval, Machine, Negate, Not, Or, Pred, Rel, SetLit,
    SetOp, SortSet, Ty, Valuation, conj, conjuncts, default_value, disj, pretty, sorted_values,
    value_to_expr, walk,
)
from .simplify import normalize_atom, substitute

logger = logging.getLogger(__name__)

_ENUMERABLE = 4096
Domain = Union[IntDomain, EnumDomain, SetDomain]


# ==========================================
# RESULTS AND BUDGETS
# ==========================================

@dataclass
class Sat:
    valuation: Valuation
    decisions: int
    bounds_qualified: bool = False


@dataclass
class Unsat:
    decisions: int
    bounds_qualified: bool = False


@dataclass
class Unknown:
    reason: str
    decisions: int = 0


@dataclass
class WDOutcome:
    error: WDError


SolveResult = Union[Sat, Unsat, Unknown, WDOutcome]


class Status(str, Enum):
    FIXPOINT = 'fixpoint'
    INCONSISTENT = 'inconsistent'
    WD = 'wd'


class BudgetExhausted(Exception):
    pass


class Budget:
    """Wall-clock deadline plus a cap on search decisions."""

    def __init__(self, timeout_ms: Optional[int] = None, max_decisions: Optional[int] = None,
                 deadline: Optional[float] = None):
        if deadline is None and timeout_ms is not None:
            deadline = time.monotonic() + timeout_ms / 1000.0
        self.deadline = deadline
        self.max_decisions = max_decisions

    def sub(self, timeout_ms: Optional[int]) -> "Budget":
        """A budget that ends after timeout_ms or at this budget's deadline, whichever is first."""
        if timeout_ms is None:
            return Budget(max_decisions=self.max_decisions, deadline=self.deadline)
        deadline = time.monotonic() + timeout_ms / 1000.0
        if self.deadline is not None:
            deadline = min(deadline, self.deadline)
        return Budget(max_decisions=self.max_decisions, deadline=deadline)

    @property
    def expired(self) -> bool:
        return self.deadline is not None and time.monotonic() > self.deadline

    def check(self, decisions: int):
        if self.max_decisions is not None and decisions > self.max_decisions:
            raise BudgetExhausted(f"decision limit {self.max_decisions} reached")
        if self.expired:
            raise BudgetExhausted("timeout")


class _Fail(Exception):
    pass


class _WDSignal(Exception):
    def __init__(self, expr: Expr):
        super().__init__()
        self.expr = expr


# ==========================================
# REIFIED ATOMS
# ==========================================

class ReifVar:
    """Truth of a shared atom (or of a compound predicate): None, True or False."""

    __slots__ = ('key', 'label', 'truth', 'subscribers')

    def __init__(self, key: Any, label: str):
        self.key = key
        self.label = label
        self.truth: Optional[bool] = None
        self.subscribers: List["Propagator"] = []

    def __repr__(self) -> str:
        return f"ReifVar({self.label}={self.truth})"


# A literal is a ReifVar read with a polarity: (rv, True) is rv, (rv, False) is not rv.
Literal = Tuple[ReifVar, bool]


def negate(lit: Literal) -> Literal:
    return lit[0], not lit[1]


def _atom_pred(kind: str, args: Tuple[Expr, ...]) -> Pred:
    if kind == 'lt':
        return Rel('<', *args)
    if kind == 'eq':
        return Rel('=', *args)
    if kind == 'in':
        return Rel(':', *args)
    return Rel('<:', *args)


# ==========================================
# PROPAGATORS
# ==========================================

class Propagator:
    """Base class: ``run`` narrows domains/truths and raises _Fail on inconsistency."""

    queued = False

    def run(self, s: "Store"):
        raise NotImplementedError


class LtProp(Propagator):
    def __init__(self, rv: ReifVar, x: str, y: str):
        self.rv, self.x, self.y = rv, x, y

    def run(self, s):
        if self.x == self.y:
            s.set_truth(self.rv, False)
            return
        dx, dy = s.dom[self.x], s.dom[self.y]
        t = self.rv.truth
        if t is None:
            if dx.hi < dy.lo:
                s.set_truth(self.rv, True)
            elif dx.lo >= dy.hi:
                s.set_truth(self.rv, False)
        elif t:
            s.restrict(self.x, hi=dy.hi - 1)
            s.restrict(self.y, lo=s.dom[self.x].lo + 1)
        else:
            s.restrict(self.x, lo=dy.lo)
            s.restrict(self.y, hi=s.dom[self.x].hi)


class EqProp(Propagator):
    def __init__(self, rv: ReifVar, x: str, y: str):
        self.rv, self.x, self.y = rv, x, y

    def run(self, s):
        if self.x == self.y:
            s.set_truth(self.rv, True)
            return
        dx, dy = s.dom[self.x], s.dom[self.y]
        if dx.is_fixed and dy.is_fixed:
            s.set_truth(self.rv, dx.value == dy.value)
            return
        if s.kind[self.x] == 'set':
            self._sets(s, dx, dy)
        else:
            self._scalars(s, dx, dy)

    def _scalars(self, s, dx, dy):
        t = self.rv.truth
        if t is None:
            if isinstance(dx, IntDomain):
                disjoint = dx.hi < dy.lo or dy.hi < dx.lo or (
                    (dx.is_fixed and not dy.contains(dx.value)) or (dy.is_fixed and not dx.contains(dy.value)))
            else:
                disjoint = not any(dy.contains(v) for v in dx.values())
            if disjoint:
                s.set_truth(self.rv, False)
        elif t:
            if isinstance(dx, IntDomain):
                s.narrow(self.x, dx.intersect(dy))
                s.narrow(self.y, dy.intersect(s.dom[self.x]))
            else:
                s.narrow(self.x, dx.keep(dy.values()))
                s.narrow(self.y, dy.keep(s.dom[self.x].values()))
        else:
            if dx.is_fixed:
                s.narrow(self.y, dy.remove(dx.value))
            elif dy.is_fixed:
                s.narrow(self.x, dx.remove(dy.value))

    def _sets(self, s, dx, dy):
        t = self.rv.truth
        if t is None:
            if not dx.must <= dy.may or not dy.must <= dx.may:
                s.set_truth(self.rv, False)
        elif t:
            s.narrow(self.x, dx.include(dy.must))
            s.narrow(self.x, s.dom[self.x].restrict_may(dy.may))
            dx = s.dom[self.x]
            s.narrow(self.y, dy.include(dx.must))
            s.narrow(self.y, s.dom[self.y].restrict_may(dx.may))
        else:
            # x /= y with y fixed: the last unknown element of x must differ from y
            for a, b in ((self.x, self.y), (self.y, self.x)):
                da, db = s.dom[a], s.dom[b]
                if db.is_fixed and len(da.unknown) == 1:
                    e = next(iter(da.unknown))
                    if da.must == db.value:
                        s.narrow(a, da.include((e,)))
                    elif da.must | {e} == db.value:
                        s.narrow(a, da.exclude((e,)))


class InProp(Propagator):
    """rv <=> e : S for a set variable S."""

    def __init__(self, rv: ReifVar, e: str, st: str):
        self.rv, self.e, self.st = rv, e, st

    def run(self, s):
        de, ds = s.dom[self.e], s.dom[self.st]
        t = self.rv.truth
        if de.is_fixed:
            v = de.value
            if v in ds.must:
                s.set_truth(self.rv, True)
            elif v not in ds.may:
                s.set_truth(self.rv, False)
            elif t is True:
                s.narrow(self.st, ds.include((v,)))
            elif t is False:
                s.narrow(self.st, ds.exclude((v,)))
            return
        if t is None:
            if not any(de.contains(v) for v in ds.may):
                s.set_truth(self.rv, False)
            elif s.kind[self.e] != 'set' and de.size <= len(ds.must) and all(v in ds.must for v in de.values()):
                s.set_truth(self.rv, True)
        elif t:
            if s.kind[self.e] != 'set':
                s.narrow(self.e, de.keep(ds.may))
        elif s.kind[self.e] != 'set':
            for v in ds.must:
                s.narrow(self.e, s.dom[self.e].remove(v))


class InRangeProp(Propagator):
    """rv <=> e : lo..hi over integer variables."""

    def __init__(self, rv: ReifVar, e: str, lo: str, hi: str):
        self.rv, self.e, self.lo, self.hi = rv, e, lo, hi

    def run(self, s):
        de, dl, dh = s.dom[self.e], s.dom[self.lo], s.dom[self.hi]
        t = self.rv.truth
        if t is None:
            if dl.hi <= de.lo and de.hi <= dh.lo:
                s.set_truth(self.rv, True)
            elif de.hi < dl.lo or de.lo > dh.hi or dl.lo > dh.hi:
                s.set_truth(self.rv, False)
            elif de.is_fixed and dl.is_fixed and dh.is_fixed:
                s.set_truth(self.rv, dl.value <= de.value <= dh.value)
        elif t:
            s.restrict(self.e, lo=dl.lo, hi=dh.hi)
            de = s.dom[self.e]
            s.restrict(self.lo, hi=de.hi)
            s.restrict(self.hi, lo=de.lo)
        elif dl.is_fixed and dh.is_fixed:
            lo, hi = dl.value, dh.value
            if lo > hi:
                return
            if de.lo >= lo:
                s.restrict(self.e, lo=hi + 1)
            elif de.hi <= hi:
                s.restrict(self.e, hi=lo - 1)
            elif hi - lo < _ENUMERABLE:
                s.narrow(self.e, IntDomain.make(de.lo, de.hi, de.excluded | frozenset(range(lo, hi + 1))))


class LinearProp(Propagator):
    """z = x + sign * y."""

    def __init__(self, z: str, x: str, y: str, sign: int):
        self.z, self.x, self.y, self.sign = z, x, y, sign

    def run(self, s):
        dz, dx, dy = s.dom[self.z], s.dom[self.x], s.dom[self.y]
        sign = self.sign
        if dy.is_fixed:
            c = sign * dy.value
            s.narrow(self.z, dz.intersect(dx.affine(1, c)))
            s.narrow(self.x, dx.intersect(s.dom[self.z].affine(1, -c)))
        elif dx.is_fixed:
            c = dx.value
            s.narrow(self.z, dz.intersect(dy.affine(sign, c)))
            s.narrow(self.y, dy.intersect(s.dom[self.z].affine(sign, -sign * c)))
        elif sign == 1:
            s.restrict(self.z, lo=dx.lo + dy.lo, hi=dx.hi + dy.hi)
            dz = s.dom[self.z]
            s.restrict(self.x, lo=dz.lo - dy.hi, hi=dz.hi - dy.lo)
            dx = s.dom[self.x]
            s.restrict(self.y, lo=dz.lo - dx.hi, hi=dz.hi - dx.lo)
        else:
            s.restrict(self.z, lo=dx.lo - dy.hi, hi=dx.hi - dy.lo)
            dz = s.dom[self.z]
            s.restrict(self.x, lo=dz.lo + dy.lo, hi=dz.hi + dy.hi)
            dx = s.dom[self.x]
            s.restrict(self.y, lo=dx.lo - dz.hi, hi=dx.hi - dz.lo)


class NegProp(Propagator):
    def __init__(self, z: str, x: str):
        self.z, self.x = z, x

    def run(self, s):
        s.narrow(self.z, s.dom[self.z].intersect(s.dom[self.x].affine(-1, 0)))
        s.narrow(self.x, s.dom[self.x].intersect(s.dom[self.z].affine(-1, 0)))


class MulProp(Propagator):
    def __init__(self, z: str, x: str, y: str):
        self.z, self.x, self.y = z, x, y

    def run(self, s):
        dx, dy = s.dom[self.x], s.dom[self.y]
        products = [dx.lo * dy.lo, dx.lo * dy.hi, dx.hi * dy.lo, dx.hi * dy.hi]
        s.restrict(self.z, lo=min(products), hi=max(products))
        dz = s.dom[self.z]
        if not dz.is_fixed:
            return
        for a, b in ((self.x, self.y), (self.y, self.x)):
            da = s.dom[a]
            if da.is_fixed and da.value != 0:
                if dz.value % da.value:
                    raise _Fail()
                s.narrow(b, s.dom[b].keep((dz.value // da.value,)))


class DivModProp(Propagator):
    """z = x div y or z = x mod y, decided once both operands are ground."""

    def __init__(self, z: str, x: str, y: str, expr: ArithOp):
        self.z, self.x, self.y, self.expr = z, x, y, expr

    def run(self, s):
        dx, dy = s.dom[self.x], s.dom[self.y]
        if dy.is_fixed and dy.value == 0:
            if self.expr in s.strict:
                raise _WDSignal(self.expr)
            return
        if dx.is_fixed and dy.is_fixed:
            op = int_div if self.expr.op == 'div' else int_mod
            s.narrow(self.z, s.dom[self.z].keep((op(dx.value, dy.value),)))


class CardProp(Propagator):
    def __init__(self, z: str, st: str):
        self.z, self.st = z, st

    def run(self, s):
        ds = s.dom[self.st]
        s.restrict(self.z, lo=len(ds.must), hi=len(ds.may))
        dz = s.dom[self.z]
        if dz.hi == len(ds.must):
            s.narrow(self.st, ds.restrict_may(ds.must))
        elif dz.lo == len(ds.may):
            s.narrow(self.st, ds.include(ds.may))


class SetLitProp(Propagator):
    def __init__(self, z: str, items: Sequence[str]):
        self.z, self.items = z, tuple(items)

    def run(self, s):
        doms = [s.dom[i] for i in self.items]
        s.narrow(self.z, s.dom[self.z].include(d.value for d in doms if d.is_fixed))
        dz = s.dom[self.z]
        s.narrow(self.z, dz.restrict_may(v for v in dz.may if any(d.contains(v) for d in doms)))
        dz = s.dom[self.z]
        for name in self.items:
            if s.kind[name] != 'set':
                s.narrow(name, s.dom[name].keep(dz.may))
        # an element that must be in the set and fits only one item fixes that item
        for v in dz.must:
            holders = [name for name, d in zip(self.items, doms) if d.contains(v)]
            if len(holders) == 1 and s.kind[holders[0]] != 'set':
                s.narrow(holders[0], s.dom[holders[0]].keep((v,)))


class IntervalProp(Propagator):
    def __init__(self, z: str, lo: str, hi: str):
        self.z, self.lo, self.hi = z, lo, hi

    def run(self, s):
        dl, dh = s.dom[self.lo], s.dom[self.hi]
        dz = s.dom[self.z]
        s.narrow(self.z, dz.restrict_may(v for v in dz.may if dl.lo <= v <= dh.hi))
        if dl.hi <= dh.lo:
            s.narrow(self.z, s.dom[self.z].include(range(dl.hi, dh.lo + 1)))


class SetOpProp(Propagator):
    """z = a \\/ b, a /\\ b or a \\ b over set variables."""

    def __init__(self, z: str, a: str, b: str, op: str):
        self.z, self.a, self.b, self.op = z, a, b, op

    def run(self, s):
        getattr(self, '_' + self.op)(s)

    def _union(self, s):
        z, a, b = self.z, self.a, self.b
        da, db = s.dom[a], s.dom[b]
        s.narrow(z, s.dom[z].include(da.must | db.must))
        s.narrow(z, s.dom[z].restrict_may(da.may | db.may))
        dz = s.dom[z]
        s.narrow(a, s.dom[a].restrict_may(dz.may))
        s.narrow(b, s.dom[b].restrict_may(dz.may))
        for v in dz.must:
            if v not in s.dom[a].may:
                s.narrow(b, s.dom[b].include((v,)))
            elif v not in s.dom[b].may:
                s.narrow(a, s.dom[a].include((v,)))

    def _inter(self, s):
        z, a, b = self.z, self.a, self.b
        da, db = s.dom[a], s.dom[b]
        s.narrow(z, s.dom[z].include(da.must & db.must))
        s.narrow(z, s.dom[z].restrict_may(da.may & db.may))
        dz = s.dom[z]
        s.narrow(a, s.dom[a].include(dz.must))
        s.narrow(b, s.dom[b].include(dz.must))
        for v in s.dom[a].must - dz.may:
            s.narrow(b, s.dom[b].exclude((v,)))
        for v in s.dom[b].must - dz.may:
            s.narrow(a, s.dom[a].exclude((v,)))

    def _diff(self, s):
        z, a, b = self.z, self.a, self.b
        da, db = s.dom[a], s.dom[b]
        s.narrow(z, s.dom[z].include(da.must - db.may))
        s.narrow(z, s.dom[z].restrict_may(da.may - db.must))
        dz = s.dom[z]
        s.narrow(a, s.dom[a].include(dz.must))
        s.narrow(b, s.dom[b].exclude(dz.must))
        for v in s.dom[a].must - dz.may:
            s.narrow(b, s.dom[b].include((v,)))


class AndProp(Propagator):
    def __init__(self, res: Literal, lits: Sequence[Literal]):
        self.res, self.lits = res, tuple(lits)

    def run(self, s):
        values = [s.truth(l) for l in self.lits]
        if False in values:
            s.assign(self.res, False)
            return
        if None not in values:
            s.assign(self.res, True)
            return
        r = s.truth(self.res)
        if r is True:
            for lit, value in zip(self.lits, values):
                if value is None:
                    s.assign(lit, True)
        elif r is False and values.count(None) == 1:
            s.assign(self.lits[values.index(None)], False)


class OrProp(Propagator):
    def __init__(self, res: Literal, lits: Sequence[Literal]):
        self.res, self.lits = res, tuple(lits)

    def run(self, s):
        values = [s.truth(l) for l in self.lits]
        if True in values:
            s.assign(self.res, True)
            return
        if None not in values:
            s.assign(self.res, False)
            return
        r = s.truth(self.res)
        if r is False:
            for lit, value in zip(self.lits, values):
                if value is None:
                    s.assign(lit, False)
        elif r is True and values.count(None) == 1:
            s.assign(self.lits[values.index(None)], True)


class EquivProp(Propagator):
    """res <=> (a <=> b): any two known truths determine the third."""

    def __init__(self, res: Literal, a: Literal, b: Literal):
        self.res, self.a, self.b = res, a, b

    def run(self, s):
        r, a, b = s.truth(self.res), s.truth(self.a), s.truth(self.b)
        if a is not None and b is not None:
            s.assign(self.res, a == b)
        elif r is not None and a is not None:
            s.assign(self.b, a if r else not a)
        elif r is not None and b is not None:
            s.assign(self.a, b if r else not b)


class SuspendedQuantifier(Propagator):
    """
    A quantifier too large to expand when posted.

    It is evaluated once its free identifiers are ground, or expanded in the
    current branch when search selects it.
    """

    def __init__(self, rv: ReifVar, pred: Pred, names: Sequence[str]):
        self.rv, self.pred, self.names = rv, pred, tuple(names)
        self.link: Optional["ExpansionLink"] = None
        self.expandable = True

    def unlink(self):
        self.link.active = False
        self.link = None

    def run(self, s):
        if not all(s.dom[n].is_fixed for n in self.names):
            return
        env = {n: s.dom[n].value for n in self.names}
        try:
            value = s.evaluator.pred(self.pred, env)
        except (WDError, EvaluationError):
            return
        s.set_truth(self.rv, value)


class ExpansionLink(Propagator):
    """rv <=> lit for a quantifier expanded inside one search branch."""

    def __init__(self, rv: ReifVar, lit: Literal):
        self.rv, self.lit = rv, lit
        self.active = True

    def run(self, s):
        if not self.active:
            return
        expanded = s.truth(self.lit)
        if self.rv.truth is not None:
            s.assign(self.lit, self.rv.truth)
        elif expanded is not None:
            s.set_truth(self.rv, expanded)


# ==========================================
# STORE
# ==========================================

class Store:
    """
    Constraint store: variable domains, reified atoms, propagators and the trail.

    Args:
        decls: Typed declared identifiers the predicates range over
        sorts: Carrier set declarations (or a Machine)
        settings: Solver limits; defaults to the loaded settings
        trace: Log every narrowing and decision at DEBUG level
    """

    def __init__(self, decls: Sequence[Binder], sorts: Any = (), settings: Optional[Settings] = None,
                 trace: bool = False):
        if isinstance(sorts, Machine):
            sorts = sorts.sorts
        self.settings = settings or SETTINGS
        self.maxint = self.settings.maxint
        self.evaluator = Evaluator(sorts, self.maxint, self.settings.nested_set_universe_limit)
        self.sorts = self.evaluator.sorts
        self.decls = tuple(decls)
        self.types: Dict[str, Ty] = {b.name: b.ty for b in self.decls}
        self.trace = trace

        self.kind: Dict[str, str] = {}
        self.dom: Dict[str, Domain] = {}
        self.watchers: Dict[str, List[Propagator]] = {}
        self.atoms: Dict[Tuple, ReifVar] = {}
        self.terms: Dict[Expr, str] = {}
        self.compound: Dict[Pred, Literal] = {}
        self.universes: Dict[str, FrozenSet[Any]] = {}
        self.strict: Dict[Expr, Rel] = {}
        self.posted: List[Tuple[Pred, bool]] = []
        self.wd_errors: List[WDError] = []
        self.agenda: deque = deque()
        self.trail: List[Tuple] = []
        self.decisions = 0
        self.failed = False
        self.bounds_qualified = False
        self.suspended: List[SuspendedQuantifier] = []
        self._aux = 0
        # set while a quantifier is expanded during search; whatever is created then is trailed
        self._branch_local = False

        self.true_rv = ReifVar(('true', ()), 'TRUE')
        self.true_rv.truth = True

    # ------------------------------------------------------------------ domains

    def narrow(self, name: str, new: Optional[Domain]):
        """Replace a variable's domain with a narrower one; None means empty."""
        if new is None:
            if self.trace:
                logger.debug(f"  {name}: {self.dom[name]} -> empty")
            raise _Fail()
        old = self.dom[name]
        if new is old or new == old:
            return
        if self.trace:
            logger.debug(f"  {name}: {old} -> {new}")
        self.trail.append(('dom', name, old))
        self.dom[name] = new
        for prop in self.watchers.get(name, ()):
            self.schedule(prop)

    def restrict(self, name: str, lo: Optional[int] = None, hi: Optional[int] = None):
        self.narrow(name, self.dom[name].restrict(lo, hi))

    def truth(self, lit: Literal) -> Optional[bool]:
        rv, sign = lit
        if rv.truth is None:
            return None
        return rv.truth == sign

    def set_truth(self, rv: ReifVar, value: bool):
        if rv.truth is None:
            if self.trace:
                logger.debug(f"  [{rv.label}] := {value}")
            self.trail.append(('truth', rv, None))
            rv.truth = value
            for prop in rv.subscribers:
                self.schedule(prop)
        elif rv.truth != value:
            raise _Fail()

    def assign(self, lit: Literal, value: bool):
        rv, sign = lit
        self.set_truth(rv, sign if value else not sign)

    def schedule(self, prop: Propagator):
        if not prop.queued:
            prop.queued = True
            self.agenda.append(prop)

    def _on_undo(self, action: Callable[[], Any]):
        if self._branch_local:
            self.trail.append(('call', action))

    def _add(self, prop: Propagator, names: Sequence[str] = (), rvs: Sequence[ReifVar] = ()) -> Propagator:
        for name in set(names):
            watchers = self.watchers.setdefault(name, [])
            watchers.append(prop)
            self._on_undo(watchers.pop)
        for rv in {id(rv): rv for rv in rvs}.values():
            rv.subscribers.append(prop)
            self._on_undo(rv.subscribers.pop)
        self.schedule(prop)
        return prop

    def _new_var(self, kind: str, dom: Domain, name: Optional[str] = None) -> str:
        if name is None:
            self._aux += 1
            name = f"_t{self._aux}"
        self.kind[name] = kind
        self.dom[name] = dom
        self._on_undo(lambda: (self.kind.pop(name), self.dom.pop(name)))
        return name

    def _const(self, value: Any) -> str:
        return self.term(value_to_expr(value))

    # ------------------------------------------------------------------ universes

    def _type_universe(self, ty: Ty) -> FrozenSet[Any]:
        """All values of a set's element type, integers bounded by MAXINT."""
        if ty.kind == 'INT':
            self.bounds_qualified = True
            return frozenset(range(-self.maxint, self.maxint + 1))
        if ty.kind in ('BOOL', 'SORT'):
            return frozenset(self.evaluator.type_values(ty))
        inner = sorted_values(self._type_universe(ty.elem))
        if 2 ** len(inner) > self.settings.nested_set_universe_limit:
            raise KernelError(f"universe of {ty} exceeds {self.settings.nested_set_universe_limit} sets")
        return frozenset(frozenset(c) for k in range(len(inner) + 1) for c in combinations(inner, k))

    def _prepare_universes(self, p: Pred):
        """Derive element universes of set identifiers from top-level `v <: E` and `v = E`."""
        bounds: Dict[str, List[Expr]] = {}
        for c in conjuncts(p):
            if not isinstance(c, Rel) or c.op not in ('<:', '='):
                continue
            sides = [(c.left, c.right)] if c.op == '<:' else [(c.left, c.right), (c.right, c.left)]
            for target, other in sides:
                if (isinstance(target, Ident) and target.name in self.types
                        and self.types[target.name].is_set and target.name not in self.dom
                        and target.name not in self.universes):
                    bounds.setdefault(target.name, []).append(other)
        pending = set(bounds)
        changed = True
        while changed and pending:
            changed = False
            for name in sorted(pending):
                ready = [e for e in bounds[name] if not (free_vars(e) & (pending - {name}))]
                uppers = [u for u in (self._upper(e) for e in ready if name not in free_vars(e)) if u is not None]
                if not uppers:
                    continue
                universe = uppers[0]
                for u in uppers[1:]:
                    universe = universe & u
                self.universes[name] = universe
                pending.discard(name)
                changed = True

    def _prepare_int_bounds(self, p: Pred):
        """Root domains of integer identifiers bounded by top-level conjuncts with literal bounds."""
        bounds: Dict[str, Tuple[int, int]] = {}
        for c in conjuncts(p):
            if not isinstance(c, Rel):
                continue
            op, left, right = c.op, c.left, c.right
            if isinstance(right, Ident) and not isinstance(left, Ident) and (op in _MIRROR or op == '='):
                op, left, right = _MIRROR.get(op, op), right, left
            if not (isinstance(left, Ident) and left.name not in self.dom
                    and self.types.get(left.name) is not None and self.types[left.name].kind == 'INT'):
                continue
            rng = _literal_range(op, right, self.maxint)
            if rng is None:
                continue
            lo, hi = bounds.get(left.name, (-self.maxint, self.maxint))
            bounds[left.name] = (max(lo, rng[0]), min(hi, rng[1]))
        for name, (lo, hi) in bounds.items():
            if lo <= hi:
                self._new_var('int', IntDomain(lo, hi), name)

    def _upper(self, e: Expr) -> Optional[FrozenSet[Any]]:
        """A superset of every value a set expression can take, or None."""
        if isinstance(e, Ident):
            if e.name in self.dom and self.kind[e.name] == 'set':
                return self.dom[e.name].may
            if e.name in self.universes:
                return self.universes[e.name]
            ty = self.types.get(e.name)
            if ty is not None and ty.is_set:
                return self._type_universe(ty.elem)
            return None
        if isinstance(e, EmptySet):
            return frozenset()
        if isinstance(e, SetLit):
            out = set()
            for item in e.items:
                values = self._possible(item)
                if values is None:
                    return None
                out |= values
            return frozenset(out)
        if isinstance(e, Interval):
            lo, _ = self._bounds(e.lo)
            _, hi = self._bounds(e.hi)
            if lo is None or hi is None or hi - lo >= 16 * _ENUMERABLE:
                return None
            return frozenset(range(lo, hi + 1))
        if isinstance(e, SortSet):
            return frozenset(e.elements)
        if isinstance(e, BuiltinSet):
            return self.evaluator.builtin_values(e.name)
        if isinstance(e, SetOp):
            a, b = self._upper(e.left), self._upper(e.right)
            if e.op == 'union':
                return None if a is None or b is None else a | b
            if e.op == 'inter':
                if a is None or b is None:
                    return a if b is None else b
                return a & b
            return a
        return None

    def _possible(self, e: Expr) -> Optional[FrozenSet[Any]]:
        """A superset of the values a scalar expression can take, or None."""
        if isinstance(e, (IntLit, BoolLit)):
            return frozenset((e.value,))
        if isinstance(e, ElemLit):
            return frozenset((e.element,))
        if isinstance(e, Ident):
            ty = self.types.get(e.name)
            if ty is None:
                return None
            if e.name in self.dom:
                d = self.dom[e.name]
                if d.is_fixed:
                    return frozenset((d.value,))
                if ty.is_set or d.size > _ENUMERABLE:
                    return None
                return frozenset(d.values())
            if ty.kind in ('BOOL', 'SORT'):
                return frozenset(self.evaluator.type_values(ty))
            if ty.kind == 'INT':
                return frozenset(range(-self.maxint, self.maxint + 1))
            return None
        if isinstance(e, (ArithOp, Negate, Card)):
            lo, hi = self._bounds(e)
            if lo is None or hi is None or hi - lo >= _ENUMERABLE:
                return None
            return frozenset(range(lo, hi + 1))
        if not free_vars(e):
            try:
                return frozenset((self.evaluator.expr(e, {}),))
            except (WDError, EvaluationError):
                return None
        return None

    def _bounds(self, e: Expr) -> Tuple[Optional[int], Optional[int]]:
        """Sound (lo, hi) of an integer expression under the current domains."""
        if isinstance(e, IntLit):
            return e.value, e.value
        if isinstance(e, Ident):
            if e.name in self.dom and self.kind[e.name] == 'int':
                d = self.dom[e.name]
                return d.lo, d.hi
            if self.types.get(e.name) is not None and self.types[e.name].kind == 'INT':
                return -self.maxint, self.maxint
            return None, None
        if isinstance(e, Negate):
            lo, hi = self._bounds(e.arg)
            return (None if hi is None else -hi), (None if lo is None else -lo)
        if isinstance(e, Card):
            u = self._upper(e.arg)
            return 0, (None if u is None else len(u))
        if isinstance(e, ArithOp):
            a_lo, a_hi = self._bounds(e.left)
            b_lo, b_hi = self._bounds(e.right)
            if None in (a_lo, a_hi, b_lo, b_hi):
                return None, None
            if e.op == '+':
                return a_lo + b_lo, a_hi + b_hi
            if e.op == '-':
                return a_lo - b_hi, a_hi - b_lo
            if e.op == '*':
                products = [a_lo * b_lo, a_lo * b_hi, a_hi * b_lo, a_hi * b_hi]
                return min(products), max(products)
            m = max(abs(a_lo), abs(a_hi))
            if e.op == 'mod':
                m = min(m, max(abs(b_lo), abs(b_hi)))
            return -m, m
        return None, None

    # ------------------------------------------------------------------ terms

    def _decl_var(self, name: str) -> str:
        if name in self.dom:
            return name
        ty = self.types.get(name)
        if ty is None:
            raise KernelError(f"identifier '{name}' is not declared")
        if ty.kind == 'INT':
            return self._new_var('int', IntDomain(-self.maxint, self.maxint), name)
        if ty.kind in ('BOOL', 'SORT'):
            return self._new_var('enum', EnumDomain(tuple(self.evaluator.type_values(ty))), name)
        universe = self.universes.get(name)
        if universe is None:
            universe = self._type_universe(ty.elem)
        return self._new_var('set', SetDomain(frozenset(), frozenset(universe)), name)

    def term(self, e: Expr) -> str:
        """Kernel variable holding the value of an expression (memoized by structure)."""
        name = self.terms.get(e)
        if name is None:
            name = self._make_term(e)
            self.terms[e] = name
            self._on_undo(lambda: self.terms.pop(e))
        return name

    def _make_term(self, e: Expr) -> str:
        if isinstance(e, Ident):
            return self._decl_var(e.name)
        if isinstance(e, IntLit):
            return self._new_var('int', IntDomain(e.value, e.value))
        if isinstance(e, BoolLit):
            return self._new_var('enum', EnumDomain((e.value,)))
        if isinstance(e, ElemLit):
            return self._new_var('enum', EnumDomain((e.element,)))
        if isinstance(e, EmptySet):
            return self._new_var('set', SetDomain(frozenset(), frozenset()))
        if isinstance(e, SortSet):
            values = frozenset(e.elements)
            return self._new_var('set', SetDomain(values, values))
        if isinstance(e, BuiltinSet):
            values = self.evaluator.builtin_values(e.name)
            return self._new_var('set', SetDomain(values, values))
        if isinstance(e, SetLit):
            items = [self.term(i) for i in e.items]
            may = self._upper(e)
            if may is None:
                raise KernelError(f"cannot bound the elements of {pretty(e)}")
            z = self._new_var('set', SetDomain(frozenset(), may))
            self._add(SetLitProp(z, items), names=items + [z])
            return z
        if isinstance(e, Interval):
            lo, hi = self.term(e.lo), self.term(e.hi)
            may = self._upper(e)
            if may is None:
                raise KernelError(f"interval {pretty(e)} is too large")
            z = self._new_var('set', SetDomain(frozenset(), may))
            self._add(IntervalProp(z, lo, hi), names=(lo, hi, z))
            return z
        if isinstance(e, SetOp):
            a, b = self.term(e.left), self.term(e.right)
            da, db = self.dom[a], self.dom[b]
            may = {'union': da.may | db.may, 'inter': da.may & db.may, 'diff': da.may}[e.op]
            z = self._new_var('set', SetDomain(frozenset(), may))
            self._add(SetOpProp(z, a, b, e.op), names=(a, b, z))
            return z
        if isinstance(e, Card):
            st = self.term(e.arg)
            ds = self.dom[st]
            z = self._new_var('int', IntDomain(len(ds.must), len(ds.may)))
            self._add(CardProp(z, st), names=(z, st))
            return z
        if isinstance(e, Negate):
            x = self.term(e.arg)
            z = self._new_var('int', self.dom[x].affine(-1, 0))
            self._add(NegProp(z, x), names=(z, x))
            return z
        if isinstance(e, ArithOp):
            x, y = self.term(e.left), self.term(e.right)
            lo, hi = self._bounds_of_vars(e.op, self.dom[x], self.dom[y])
            z = self._new_var('int', IntDomain(lo, hi))
            if e.op in ('+', '-'):
                prop = LinearProp(z, x, y, 1 if e.op == '+' else -1)
            elif e.op == '*':
                prop = MulProp(z, x, y)
            else:
                prop = DivModProp(z, x, y, e)
            self._add(prop, names=(z, x, y))
            return z
        raise KernelError(f"unsupported expression {type(e).__name__}")

    @staticmethod
    def _bounds_of_vars(op: str, dx: IntDomain, dy: IntDomain) -> Tuple[int, int]:
        if op == '+':
            return dx.lo + dy.lo, dx.hi + dy.hi
        if op == '-':
            return dx.lo - dy.hi, dx.hi - dy.lo
        if op == '*':
            products = [dx.lo * dy.lo, dx.lo * dy.hi, dx.hi * dy.lo, dx.hi * dy.hi]
            return min(products), max(products)
        m = max(abs(dx.lo), abs(dx.hi))
        return -m, m

    # ------------------------------------------------------------------ reification

    def new_literal(self, label: str) -> Literal:
        """A fresh, unshared boolean literal."""
        return ReifVar(('fresh', label, id(self)), label), True

    def add_and(self, res: Literal, lits: Sequence[Literal]):
        self._add(AndProp(res, lits), rvs=[res[0]] + [l[0] for l in lits])

    def add_or(self, res: Literal, lits: Sequence[Literal]):
        self._add(OrProp(res, lits), rvs=[res[0]] + [l[0] for l in lits])

    def add_equiv(self, res: Literal, a: Literal, b: Literal):
        self._add(EquivProp(res, a, b), rvs=(res[0], a[0], b[0]))

    def reify(self, p: Pred) -> Literal:
        """Literal whose truth tracks p (memoized by structure)."""
        lit = self.compound.get(p)
        if lit is None:
            lit = self._reify(p)
            self.compound[p] = lit
            self._on_undo(lambda: self.compound.pop(p))
        return lit

    def _reify(self, p: Pred) -> Literal:
        if isinstance(p, BoolConst):
            return self.true_rv, p.value
        if isinstance(p, Rel):
            return self._reify_atom(p)
        if isinstance(p, Not):
            return negate(self.reify(p.arg))
        if isinstance(p, (And, Or)):
            lits = [self.reify(a) for a in p.args]
            res = self.new_literal(pretty(p))
            (self.add_and if isinstance(p, And) else self.add_or)(res, lits)
            return res
        if isinstance(p, Implies):
            lits = [negate(self.reify(p.left)), self.reify(p.right)]
            res = self.new_literal(pretty(p))
            self.add_or(res, lits)
            return res
        if isinstance(p, Equiv):
            a, b = self.reify(p.left), self.reify(p.right)
            res = self.new_literal(pretty(p))
            self.add_equiv(res, a, b)
            return res
        if isinstance(p, (Exists, Forall)):
            return self._reify_quantifier(p)
        raise KernelError(f"unsupported predicate {type(p).__name__}")

    def _reify_atom(self, p: Rel) -> Literal:
        kind, args, polarity = normalize_atom(p)
        key = (kind, args)
        rv = self.atoms.get(key)
        if rv is None:
            rv = ReifVar(key, pretty(_atom_pred(kind, args)))
            self.atoms[key] = rv
            self._on_undo(lambda: self.atoms.pop(key))
            self._atom_propagator(kind, args, rv)
        return rv, polarity

    def _atom_propagator(self, kind: str, args: Tuple[Expr, ...], rv: ReifVar):
        left, right = args
        if kind in ('in', 'subset') and (isinstance(right, SortSet) or
                                         (isinstance(right, BuiltinSet) and right.name == 'BOOL')):
            self.set_truth(rv, True)
            return
        if kind == 'subset':
            self._decompose_subset(left, right, rv)
            return
        if kind == 'in' and isinstance(right, (Interval, BuiltinSet)):
            if isinstance(right, Interval):
                lo, hi = self.term(right.lo), self.term(right.hi)
            else:
                lo = self._const({'INT': -self.maxint, 'NAT': 0, 'NAT1': 1}[right.name])
                hi = self._const(self.maxint)
            a = self.term(left)
            self._add(InRangeProp(rv, a, lo, hi), names=(a, lo, hi), rvs=(rv,))
            return
        a, b = self.term(left), self.term(right)
        prop = {'lt': LtProp, 'eq': EqProp, 'in': InProp}[kind](rv, a, b)
        self._add(prop, names=(a, b), rvs=(rv,))

    def _decompose_subset(self, left: Expr, right: Expr, rv: ReifVar):
        """rv <=> (e : left => e : right) for every e that left may contain."""
        if left == right:
            self.set_truth(rv, True)
            return
        may = self.dom[self.term(left)].may
        if len(may) > _ENUMERABLE:
            raise KernelError(f"too many elements to decompose {pretty(Rel('<:', left, right))}")
        elem_ty = left.ty.elem if left.ty is not None and left.ty.is_set else None
        lits = []
        for e in sorted_values(may):
            c = value_to_expr(e, elem_ty)
            lits.append(self.reify(Implies(Rel(':', c, left), Rel(':', c, right))))
        self.add_and((rv, True), lits)

    def _reify_quantifier(self, p: Pred) -> Literal:
        if len(p.binders) > 1:
            nested = type(p)(p.binders[1:], p.body)
            return self.reify(type(p)(p.binders[:1], nested))
        b = p.binders[0]
        values = self._binder_values(b, p)
        if values is None:
            names = sorted(free_vars(p))
            for name in names:
                self._decl_var(name)
            res = self.new_literal(pretty(p))
            sq = SuspendedQuantifier(res[0], p, names)
            self._add(sq, names=names)
            self.suspended.append(sq)
            self._on_undo(self.suspended.pop)
            return res
        parts = [substitute(p.body, b.name, value_to_expr(v, b.ty)) for v in values]
        return self.reify(disj(parts) if isinstance(p, Exists) else conj(parts))

    def _binder_values(self, b: Binder, p: Pred, limit: Optional[int] = None) -> Optional[List[Any]]:
        """Candidate values for a single binder, or None if there are more than limit."""
        limit = limit or self.settings.quantifier_expansion_limit
        if isinstance(p, Exists):
            scope = conjuncts(p.body)
        elif isinstance(p.body, Implies):
            scope = conjuncts(p.body.left)
        else:
            scope = ()
        best: Optional[List[Any]] = None
        lo, hi = -self.maxint, self.maxint
        is_int = b.ty is not None and b.ty.kind == 'INT'
        for c in scope:
            if not isinstance(c, Rel):
                continue
            values = None
            if c.op == ':' and _is_binder(c.left, b) and b.name not in free_vars(c.right):
                u = self._upper(c.right)
                values = None if u is None else sorted_values(u)
            elif c.op == '=' and (_is_binder(c.left, b) or _is_binder(c.right, b)):
                other = c.right if _is_binder(c.left, b) else c.left
                if b.name not in free_vars(other):
                    u = self._possible(other)
                    values = None if u is None else sorted_values(u)
            elif is_int and c.op in ('<', '<=', '>', '>=') and (_is_binder(c.left, b) or _is_binder(c.right, b)):
                op, other = (c.op, c.right) if _is_binder(c.left, b) else ({'<': '>', '<=': '>=', '>': '<', '>=': '<='}[c.op], c.left)
                if b.name in free_vars(other):
                    continue
                o_lo, o_hi = self._bounds(other)
                if op == '<' and o_hi is not None:
                    hi = min(hi, o_hi - 1)
                elif op == '<=' and o_hi is not None:
                    hi = min(hi, o_hi)
                elif op == '>' and o_lo is not None:
                    lo = max(lo, o_lo + 1)
                elif op == '>=' and o_lo is not None:
                    lo = max(lo, o_lo)
            if values is not None and (best is None or len(values) < len(best)):
                best = values
        if is_int:
            if best is not None:
                best = [v for v in best if lo <= v <= hi]
            elif hi - lo < limit:
                best = list(range(lo, hi + 1))
        elif best is None:
            try:
                best = self.evaluator.type_values(b.ty)
            except EvaluationError:
                best = None
        if best is None or len(best) > limit:
            return None
        return best

    # ------------------------------------------------------------------ posting and propagation

    def post(self, p: Pred, polarity: bool = True):
        """Add the constraint p (or not p) to the store."""
        self.posted.append((p, polarity))
        if self.failed:
            return
        if polarity:
            self._prepare_universes(p)
            self._prepare_int_bounds(p)
            for c in conjuncts(p):
                if isinstance(c, Rel):
                    for node in walk(c):
                        if isinstance(node, ArithOp) and node.op in ('div', 'mod'):
                            self.strict.setdefault(node, c)
        try:
            self.assign(self.reify(p), polarity)
        except _Fail:
            self.failed = True

    def _run_agenda(self):
        try:
            while self.agenda:
                prop = self.agenda.popleft()
                prop.queued = False
                prop.run(self)
        except (_Fail, _WDSignal):
            for prop in self.agenda:
                prop.queued = False
            self.agenda.clear()
            raise

    def propagate(self) -> Status:
        """Run propagators to a fixpoint."""
        if self.failed:
            return Status.INCONSISTENT
        try:
            self._run_agenda()
        except _Fail:
            return Status.INCONSISTENT
        except _WDSignal as signal:
            self.wd_errors.append(WDError(signal.expr, self.strict.get(signal.expr)))
            return Status.WD
        return Status.FIXPOINT

    # ------------------------------------------------------------------ trail

    def mark(self) -> int:
        return len(self.trail)

    def undo(self, mark: int):
        """Restore every domain and truth changed since mark and drop anything an expansion created."""
        while len(self.trail) > mark:
            entry = self.trail.pop()
            if entry[0] == 'dom':
                self.dom[entry[1]] = entry[2]
            elif entry[0] == 'truth':
                entry[1].truth = entry[2]
            else:
                entry[1]()

    def snapshot(self) -> Tuple[Dict[str, Domain], Dict[Tuple, Optional[bool]]]:
        return dict(self.dom), {key: rv.truth for key, rv in self.atoms.items()}

    # ------------------------------------------------------------------ search

    def _estimate(self, sq: SuspendedQuantifier) -> Optional[int]:
        """Product of the binder ranges of a quantifier and the same-kind quantifiers directly inside it."""
        total, p = 1, sq.pred
        while True:
            values = self._binder_values(p.binders[0], p, _ENUMERABLE)
            if values is None:
                return None
            total *= max(len(values), 1)
            if not isinstance(p.body, type(p)):
                return total
            p = p.body

    def select(self) -> Optional[Union[str, SuspendedQuantifier]]:
        """Undetermined identifier or suspended quantifier with the fewest estimated solutions."""
        best, best_size = None, 0
        for b in self.decls:
            d = self.dom.get(b.name)
            if d is None or d.is_fixed:
                continue
            if best is None or d.size < best_size:
                best, best_size = b.name, d.size
        if best is None:
            return None
        for sq in self.suspended:
            if sq.link is not None or not sq.expandable or all(self.dom[n].is_fixed for n in sq.names):
                continue
            size = self._estimate(sq)
            if size is not None and size < best_size:
                best, best_size = sq, size
        return best

    def alternatives(self, choice: Union[str, SuspendedQuantifier]) -> List[Any]:
        if isinstance(choice, SuspendedQuantifier):
            return ['expand']
        d = self.dom[choice]
        if isinstance(d, SetDomain):
            e = d.first_unknown()
            return [('out', e), ('in', e)]
        return list(d.values())

    def decide(self, choice: Union[str, SuspendedQuantifier], alternative: Any):
        if isinstance(choice, SuspendedQuantifier):
            self._expand(choice)
            return
        if self.trace:
            logger.debug(f"decide {choice} := {alternative}")
        d = self.dom[choice]
        if isinstance(d, SetDomain):
            how, e = alternative
            self.narrow(choice, d.include((e,)) if how == 'in' else d.exclude((e,)))
        else:
            self.narrow(choice, d.keep((alternative,)))

    def _expand(self, sq: SuspendedQuantifier):
        """Expand a suspended quantifier over its binder values under the current domains."""
        if self.trace:
            logger.debug(f"decide expand {sq.rv.label}")
        p = sq.pred
        b = p.binders[0]
        mark = self.mark()
        self._branch_local = True
        try:
            values = self._binder_values(b, p, _ENUMERABLE)
            if values is None:
                raise KernelError(f"binder {b.name} of {sq.rv.label} has too many values")
            parts = [substitute(p.body, b.name, value_to_expr(v, b.ty)) for v in values]
            lit = self.reify(disj(parts) if isinstance(p, Exists) else conj(parts))
            sq.link = ExpansionLink(sq.rv, lit)
            self._on_undo(sq.unlink)
            self._add(sq.link, rvs=(sq.rv, lit[0]))
        except KernelError as e:
            logger.debug(f"Cannot expand {sq.rv.label}: {e}")
            self.undo(mark)
            sq.expandable = False
        finally:
            self._branch_local = False

    def valuation(self) -> Valuation:
        return {b.name: (self.dom[b.name].value if b.name in self.dom else default_value(b.ty, self.sorts))
                for b in self.decls}

    def _leaf_holds(self, v: Valuation) -> bool:
        try:
            return all(self.evaluator.pred(p, v) == polarity for p, polarity in self.posted)
        except WDError as e:
            self.wd_errors.append(e)
            return False

    def _qualify_bounds(self):
        for b in self.decls:
            d = self.dom.get(b.name)
            if isinstance(d, IntDomain) and (d.lo <= -self.maxint or d.hi >= self.maxint):
                self.bounds_qualified = True

    def solutions(self, budget: Optional[Budget] = None) -> Iterator[Valuation]:
        """
        Enumerate solutions depth first.

        Raises:
            BudgetExhausted: When the budget runs out before the search ends
        """
        budget = budget or Budget()
        if self.propagate() is not Status.FIXPOINT:
            return
        self._qualify_bounds()
        stack: List[List[Any]] = []
        descend = True
        while True:
            if descend:
                choice = self.select()
                if choice is None:
                    v = self.valuation()
                    if self._leaf_holds(v):
                        yield v
                else:
                    stack.append([self.mark(), choice, self.alternatives(choice), 0])
            descend = False
            while stack:
                frame = stack[-1]
                self.undo(frame[0])
                if frame[3] >= len(frame[2]):
                    stack.pop()
                    continue
                alternative = frame[2][frame[3]]
                frame[3] += 1
                self.decisions += 1
                budget.check(self.decisions)
                try:
                    self.decide(frame[1], alternative)
                except _Fail:
                    continue
                if self.propagate() is Status.FIXPOINT:
                    descend = True
                    break
            if not descend:
                return

    def enumerate(self, budget: Optional[Budget] = None) -> SolveResult:
        """First solution of everything posted, or why there is none."""
        try:
            for v in self.solutions(budget):
                return Sat(v, self.decisions, self.bounds_qualified)
        except BudgetExhausted as e:
            return Unknown(str(e), self.decisions)
        except (EvaluationError, KernelError) as e:
            return Unknown(str(e), self.decisions)
        if self.wd_errors:
            return WDOutcome(self.wd_errors[0])
        return Unsat(self.decisions, self.bounds_qualified)


def _is_binder(e: Expr, b: Binder) -> bool:
    return isinstance(e, Ident) and e.name == b.name


_MIRROR = {'<': '>', '<=': '>=', '>': '<', '>=': '<='}


def _literal_range(op: str, right: Expr, maxint: int) -> Optional[Tuple[int, int]]:
    """Values x can take when `x op right` holds, for literal right sides."""
    if op == ':':
        if isinstance(right, Interval) and isinstance(right.lo, IntLit) and isinstance(right.hi, IntLit):
            return right.lo.value, right.hi.value
        if isinstance(right, BuiltinSet) and right.name in ('NAT', 'NAT1'):
            return (0 if right.name == 'NAT' else 1), maxint
        if isinstance(right, SetLit) and right.items and all(isinstance(i, IntLit) for i in right.items):
            values = [i.value for i in right.items]
            return min(values), max(values)
        return None
    if not isinstance(right, IntLit):
        return None
    k = right.value
    return {
        '=': (k, k),
        '<': (-maxint, k - 1),
        '<=': (-maxint, k),
        '>': (k + 1, maxint),
        '>=': (k, maxint),
    }.get(op)


# ==========================================
# ENTRY POINTS
# ==========================================

def solve(p: Pred, decls: Sequence[Binder], sorts: Any = (), budget: Optional[Budget] = None,
          settings: Optional[Settings] = None, trace: bool = False) -> SolveResult:
    """
    Find one valuation of decls satisfying p.

    Args:
        p: Typed predicate
        decls: Declared identifiers (constants and variables) with types
        sorts: Carrier set declarations (or a Machine)
        budget: Time and decision budget; unlimited if omitted
        settings: Solver limits
        trace: Log propagation and decisions at DEBUG level

    Returns:
        Sat, Unsat, Unknown or WDOutcome
    """
    store = Store(decls, sorts, settings, trace)
    try:
        store.post(p)
    except KernelError as e:
        logger.warning(f"Kernel cannot represent predicate: {e}")
        return Unknown(str(e))
    result = store.enumerate(budget)
    if trace:
        logger.debug(f"solve: {type(result).__name__} after {store.decisions} decisions")
    return result


def solve_all(p: Pred, decls: Sequence[Binder], sorts: Any = (), budget: Optional[Budget] = None,
              settings: Optional[Settings] = None) -> Iterator[Valuation]:
    """
    Enumerate every valuation of decls satisfying p.

    Raises:
        WDError: After the enumeration, if some valuation was ill-defined
        KernelError: If p cannot be represented
        BudgetExhausted: If the budget runs out
    """
    store = Store(decls, sorts, settings)
    store.post(p)
    yield from store.solutions(budget)
    if store.wd_errors:
        raise store.wd_errors[0]
