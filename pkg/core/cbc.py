"""
Constraint-Based Deadlock Checking
==================================
Searches for a state that satisfies the axioms, the invariants and an optional
goal predicate while disabling every event. Such a state need not be
reachable; finding one shows the invariant does not rule the deadlock out.

Pipeline:
    1. AI = axioms & invariants & goal
    2. drop events whose guard cannot hold under AI (filter)
    3. check guards containing div/mod for well-definedness under AI
    4. simplify each remaining enabling predicate
    5. Deadlock = conjunction of the negated enabling predicates
    6. move the most shared atoms to the front of each negated guard (sort)
    7. split AI & Deadlock into independent components (partition) and drop
       the ones no guard mentions
    8. solve the components, fill in the dropped ones, validate the merged state

Usage:
    from core.cbc import CheckOptions, check_deadlock

    result = check_deadlock(machine, CheckOptions(goal=goal_pred))
"""

import logging
import time
from collections import Counter
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple, Union

from .config import SETTINGS, Settings
from .errors import NotAtomicError, TypeCheckError, WDError
from .evaluator import Evaluator, enabling_predicate, free_vars, guard_truth
from .kernel import Budget, Sat, Unknown as KernelUnknown, Unsat, WDOutcome, solve
from .model import (
    And, ArithOp, BoolConst, Equiv, Event, Exists, Expr, Forall, Implies, INT, IntLit, Machine, Not,
    Or, Pred, Rel, TRUE, Valuation, children, conj, conjuncts, default_value, has_division, pretty, walk,
)
from .simplify import NonEmptyFacts, normalize_atom, simplify

logger = logging.getLogger(__name__)


# ==========================================
# OPTIONS AND RESULTS
# ==========================================

@dataclass
class CheckOptions:
    """
    Options of a constraint-based deadlock check.

    Attributes:
        goal: predicate of interest conjoined to the axioms and invariants
        events: names of the events to consider (all when None)
        event_timeout_ms: budget of each filtering solve
        timeout_ms: budget of the whole check
        filter: drop events whose guard is unsatisfiable under AI
        simplify: rewrite enabling predicates before negating them
        sort: move the most shared atoms to the front of negated guards
        partition: split the constraint into independent components
        drop_irrelevant: do not solve components that mention no guard
    """

    goal: Optional[Pred] = None
    events: Optional[Sequence[str]] = None
    event_timeout_ms: Optional[int] = None
    timeout_ms: Optional[int] = None
    filter: bool = True
    simplify: bool = True
    sort: bool = True
    partition: bool = True
    drop_irrelevant: bool = True
    settings: Optional[Settings] = None
    trace: bool = False


@dataclass
class GuardStatus:
    """One row of the guard truth table of a deadlock state."""

    event: str
    enabled: bool
    falsified: Optional[Pred] = None
    filtered: bool = False


@dataclass
class CbcStats:
    considered: List[str] = field(default_factory=list)
    dropped: List[str] = field(default_factory=list)
    components: int = 0
    relevant_components: int = 0
    decisions: int = 0
    timings: Dict[str, float] = field(default_factory=dict)


class CbcResult:
    """Base class of the three check outcomes."""

    stats: CbcStats


@dataclass
class DeadlockFound(CbcResult):
    valuation: Valuation
    guards: List[GuardStatus]
    bounds_qualified: bool = False
    stats: CbcStats = field(default_factory=CbcStats)


@dataclass
class NoDeadlock(CbcResult):
    bounds_qualified: bool = False
    stats: CbcStats = field(default_factory=CbcStats)


@dataclass
class Unknown(CbcResult):
    reason: str
    wd_error: Optional[WDError] = None
    stats: CbcStats = field(default_factory=CbcStats)


CbcOutcome = Union[DeadlockFound, NoDeadlock, Unknown]


@dataclass
class Component:
    """Conjuncts connected through shared identifiers."""

    conjuncts: Tuple[Pred, ...]
    relevant: bool
    index: int

    @property
    def pred(self) -> Pred:
        return conj(self.conjuncts)


# ==========================================
# WELL-DEFINEDNESS
# ==========================================

def _wd_expr(e: Expr) -> List[Pred]:
    out: List[Pred] = []
    for child in children(e):
        out.extend(_wd_expr(child))
    if isinstance(e, ArithOp) and e.op in ('div', 'mod'):
        out.append(Rel('/=', e.right, IntLit(0, ty=INT)))
    return out


def wd_condition(p: Pred) -> Pred:
    """
    Condition under which evaluating p cannot divide by zero.

    Connectives are read left to right: in ``a & b`` the right operand only
    needs to be well defined when ``a`` holds, in ``a or b`` when ``a`` fails.
    """
    if isinstance(p, BoolConst):
        return TRUE
    if isinstance(p, Rel):
        return conj(_wd_expr(p.left) + _wd_expr(p.right))
    if isinstance(p, Not):
        return wd_condition(p.arg)
    if isinstance(p, (And, Or)):
        parts: List[Pred] = []
        seen: List[Pred] = []
        for a in p.args:
            w = wd_condition(a)
            if w != TRUE:
                parts.append(Implies(conj(seen), w) if seen else w)
            seen.append(a if isinstance(p, And) else Not(a))
        return conj(parts)
    if isinstance(p, Implies):
        w = wd_condition(p.right)
        return conj([wd_condition(p.left), Implies(p.left, w) if w != TRUE else TRUE])
    if isinstance(p, Equiv):
        return conj([wd_condition(p.left), wd_condition(p.right)])
    if isinstance(p, (Exists, Forall)):
        w = wd_condition(p.body)
        return TRUE if w == TRUE else Forall(p.binders, w)
    return TRUE


# ==========================================
# CONSTRAINT CONSTRUCTION
# ==========================================

def assumptions(m: Machine, goal: Optional[Pred] = None) -> Pred:
    """AI: axioms, invariants and the goal predicate."""
    clauses = [c.pred for c in m.axioms] + [c.pred for c in m.invariants]
    if goal is not None:
        clauses.append(goal)
    return conj(clauses)


def _considered_events(m: Machine, names: Optional[Sequence[str]]) -> List[Event]:
    if names is None:
        return list(m.events)
    known = {e.name for e in m.events}
    unknown = [n for n in names if n not in known]
    if unknown:
        raise TypeCheckError(f"unknown event(s): {', '.join(unknown)}", 'options')
    return [e for e in m.events if e.name in set(names)]


def negated_guards(m: Machine, events: Sequence[Event], ai: Pred, opts: CheckOptions) -> List[Pred]:
    """The negation of each event's (optionally simplified) enabling predicate."""
    settings = opts.settings or SETTINGS
    facts = NonEmptyFacts.from_predicates(conjuncts(ai), settings.maxint)
    out = []
    for e in events:
        g = enabling_predicate(e)
        if opts.simplify:
            g = simplify(g, facts)
            logger.debug(f"simplified guard of {e.name}: {pretty(g)}")
        out.append(Not(g))
    return out


def build_dln(m: Machine, opts: Optional[CheckOptions] = None,
              events: Optional[Sequence[Event]] = None) -> Pred:
    """
    Build AI & Deadlock for the given (surviving) events.

    Args:
        m: Typechecked machine
        opts: Check options (goal, event selection, simplification)
        events: Events to negate; defaults to the events selected by opts

    Returns:
        The deadlock constraint
    """
    opts = opts or CheckOptions()
    ai = assumptions(m, opts.goal)
    if events is None:
        events = _considered_events(m, opts.events)
    return conj([ai] + negated_guards(m, events, ai, opts))


def filter_events(m: Machine, ai: Pred, events: Sequence[Event], budget: Optional[Budget] = None,
                  event_timeout_ms: Optional[int] = None,
                  settings: Optional[Settings] = None) -> Tuple[List[Event], List[str]]:
    """
    Keep the events whose enabling predicate may hold under AI.

    An event is dropped only when AI & G_e is proved unsatisfiable; a timeout
    or an ill-defined guard keeps it.

    Returns:
        (surviving events, names of dropped events)
    """
    settings = settings or SETTINGS
    budget = budget or Budget(settings.timeout_ms, settings.max_decisions)
    timeout = event_timeout_ms if event_timeout_ms is not None else settings.event_timeout_ms
    kept, dropped = [], []
    for e in events:
        result = solve(conj([ai, enabling_predicate(e)]), m.declarations, m.sorts,
                       budget.sub(timeout), settings)
        if isinstance(result, Unsat):
            logger.info(f"Event {e.name} cannot be enabled under the assumptions, dropped")
            dropped.append(e.name)
        else:
            kept.append(e)
    return kept, dropped


def _atom_key(p: Pred):
    try:
        return normalize_atom(p)[:2]
    except NotAtomicError:
        return None


def sort_conjuncts(deadlock: Pred) -> Pred:
    """
    Reorder each negated guard so its most frequent atoms come first.

    Frequencies count normalized atom keys over the whole formula; the sort is
    stable and guards containing div or mod keep their order.
    """
    counts = Counter(_atom_key(n) for n in walk(deadlock) if isinstance(n, Rel))

    def weight(a: Pred) -> int:
        return counts[_atom_key(a)] if isinstance(a, Rel) else 0

    out = []
    for c in conjuncts(deadlock):
        if isinstance(c, Not) and isinstance(c.arg, (And, Or)) and not has_division(c.arg):
            args = sorted(c.arg.args, key=lambda a: -weight(a))
            c = Not(type(c.arg)(tuple(args)))
        out.append(c)
    return conj(out)


class UnionFind:
    """Disjoint sets with path compression and union by rank."""

    def __init__(self, size: int):
        self.parent = list(range(size))
        self.rank = [0] * size

    def find(self, x: int) -> int:
        root = x
        while self.parent[root] != root:
            root = self.parent[root]
        while self.parent[x] != root:
            self.parent[x], x = root, self.parent[x]
        return root

    def union(self, x: int, y: int):
        rx, ry = self.find(x), self.find(y)
        if rx == ry:
            return
        if self.rank[rx] < self.rank[ry]:
            rx, ry = ry, rx
        self.parent[ry] = rx
        if self.rank[rx] == self.rank[ry]:
            self.rank[rx] += 1


def components(f: Pred, guards: Sequence[Pred] = (), drop_irrelevant: bool = False) -> List[Component]:
    """
    Partition the top-level conjuncts of f by shared free identifiers.

    Args:
        f: A conjunction
        guards: Conjuncts that are negated guards; a component containing one is relevant
        drop_irrelevant: Discard components that contain no guard conjunct

    Returns:
        Components ordered by their first conjunct
    """
    parts = conjuncts(f)
    uf = UnionFind(len(parts))
    owner: Dict[str, int] = {}
    for i, c in enumerate(parts):
        for name in sorted(free_vars(c)):
            if name in owner:
                uf.union(owner[name], i)
            else:
                owner[name] = i
    guard_set = set(guards)
    groups: Dict[int, List[int]] = {}
    for i in range(len(parts)):
        groups.setdefault(uf.find(i), []).append(i)
    out = []
    for members in sorted(groups.values(), key=lambda g: g[0]):
        relevant = any(parts[i] in guard_set for i in members)
        if drop_irrelevant and not relevant:
            continue
        out.append(Component(tuple(parts[i] for i in members), relevant, members[0]))
    return out


# ==========================================
# CHECK
# ==========================================

def _ms(start: float) -> float:
    return round((time.perf_counter() - start) * 1000.0, 3)


def _wd_failure(m: Machine, g: Pred, v: Valuation, evaluator: Evaluator) -> WDError:
    try:
        evaluator.pred(g, v)
    except WDError as e:
        return e
    first = next(n for n in walk(g) if isinstance(n, ArithOp) and n.op in ('div', 'mod'))
    return WDError(first)


def guard_table(m: Machine, v: Valuation, evaluator: Evaluator, filtered: Sequence[str] = ()) -> List[GuardStatus]:
    """Enabledness of every event in v, with a falsified guard conjunct for disabled ones."""
    rows = []
    for e in m.events:
        enabled, falsified = guard_truth(e, v, evaluator)
        rows.append(GuardStatus(e.name, enabled, falsified, e.name in filtered))
    return rows


def check_deadlock(m: Machine, opts: Optional[CheckOptions] = None) -> CbcOutcome:
    """
    Search for a state allowed by AI in which no considered event is enabled.

    Args:
        m: Typechecked machine
        opts: Check options

    Returns:
        DeadlockFound, NoDeadlock or Unknown

    Raises:
        TypeCheckError: If opts names an event the machine does not have
    """
    opts = opts or CheckOptions()
    settings = opts.settings or SETTINGS
    budget = Budget(opts.timeout_ms if opts.timeout_ms is not None else settings.timeout_ms,
                    settings.max_decisions)
    evaluator = Evaluator(m, settings.maxint, settings.nested_set_universe_limit)
    stats = CbcStats()

    start = time.perf_counter()
    events = _considered_events(m, opts.events)
    stats.considered = [e.name for e in events]
    ai = assumptions(m, opts.goal)
    stats.timings['buildMs'] = _ms(start)

    start = time.perf_counter()
    if opts.filter:
        events, stats.dropped = filter_events(m, ai, events, budget, opts.event_timeout_ms, settings)
    stats.timings['filterMs'] = _ms(start)
    logger.info(f"{m.name}: {len(events)} event(s) considered, {len(stats.dropped)} dropped by filtering")

    start = time.perf_counter()
    for e in events:
        g = enabling_predicate(e)
        if not has_division(g):
            continue
        result = solve(conj([ai, Not(wd_condition(g))]), m.declarations, m.sorts, budget.sub(None), settings)
        if isinstance(result, Sat):
            error = _wd_failure(m, g, result.valuation, evaluator)
            logger.warning(f"Guard of {e.name} is not well-defined: {error}")
            stats.timings['wdMs'] = _ms(start)
            return Unknown(f"WD: {error}", error, stats)

    negations = negated_guards(m, events, ai, opts)
    deadlock = conj(negations)
    if opts.sort:
        deadlock = sort_conjuncts(deadlock)
    f = conj([ai, deadlock])
    guard_conjuncts = conjuncts(deadlock)
    if opts.partition:
        parts = components(f, guard_conjuncts)
    else:
        parts = [Component(conjuncts(f), True, 0)]
    stats.components = len(parts)
    stats.relevant_components = sum(1 for c in parts if c.relevant)
    stats.timings['buildMs'] += _ms(start)

    start = time.perf_counter()
    valuation: Valuation = {b.name: default_value(b.ty, evaluator.sorts) for b in m.declarations}
    bounds_qualified = False
    ordered = [c for c in parts if c.relevant or not opts.drop_irrelevant]
    ordered += [c for c in parts if not c.relevant and opts.drop_irrelevant]
    for component in ordered:
        phase = 'solve' if component.relevant or not opts.drop_irrelevant else 'fill'
        result = solve(component.pred, m.declarations, m.sorts, budget, settings, opts.trace)
        if isinstance(result, (Sat, Unsat)):
            stats.decisions += result.decisions
            bounds_qualified = bounds_qualified or result.bounds_qualified
        logger.info(f"{m.name}: {phase} component #{component.index}: {type(result).__name__}")
        if isinstance(result, Unsat):
            stats.timings['solveMs'] = _ms(start)
            return NoDeadlock(bounds_qualified, stats)
        if isinstance(result, WDOutcome):
            stats.timings['solveMs'] = _ms(start)
            return Unknown(f"WD: {result.error}", result.error, stats)
        if isinstance(result, KernelUnknown):
            stats.timings['solveMs'] = _ms(start)
            return Unknown(result.reason, None, stats)
        names = free_vars(component.pred)
        valuation.update({k: v for k, v in result.valuation.items() if k in names})
    stats.timings['solveMs'] = _ms(start)

    try:
        ok = evaluator.pred(ai, valuation) and not any(
            evaluator.pred(enabling_predicate(e), valuation)
            for e in m.events if e.name in stats.considered)
    except WDError as error:
        return Unknown(f"WD: {error}", error, stats)
    if not ok:
        logger.error(f"{m.name}: merged state failed validation")
        return Unknown("counterexample failed validation", None, stats)
    if bounds_qualified:
        logger.warning(f"{m.name}: deadlock found under clipped integer bounds")
    return DeadlockFound(valuation, guard_table(m, valuation, evaluator, stats.dropped), bounds_qualified, stats)
