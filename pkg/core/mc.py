"""
Explicit-State Model Checker
============================
Breadth-first (or depth-first) exploration of the reachable states of a
machine, reporting the first state in which no event is enabled.

States are total valuations of constants and variables; the visited set is
keyed on their canonical encoding, and every visited state remembers how it
was reached so a deadlock comes with a replayable trace.

Usage:
    from core.mc import McOptions, model_check

    result = model_check(machine, McOptions(max_states=100000))
"""

import logging
import time
from collections import deque
from dataclasses import dataclass, field
from itertools import islice
from typing import Any, Dict, Iterator, List, Optional, Tuple, Union

from .config import SETTINGS, Settings
from .errors import WDError
from .evaluator import Evaluator, apply_actions
from .kernel import solve_all
from .model import Machine, Pred, Valuation, canonical_state, conj

logger = logging.getLogger(__name__)

PROGRESS_EVERY = 10000


@dataclass
class McOptions:
    """
    Attributes:
        max_states: number of states to expand before giving up
        goal: only states satisfying this predicate count as deadlocks
        max_outdegree: cap on the successors computed per state
        order: 'bfs' or 'dfs'
    """

    max_states: Optional[int] = None
    goal: Optional[Pred] = None
    max_outdegree: Optional[int] = None
    order: str = 'bfs'
    settings: Optional[Settings] = None

    def __post_init__(self):
        if self.max_states is not None and self.max_states < 1:
            raise ValueError("max_states must be at least 1")
        if self.order not in ('bfs', 'dfs'):
            raise ValueError(f"unknown search order '{self.order}'")


@dataclass
class Transition:
    event: str
    params: Valuation
    state: Valuation


@dataclass
class McStats:
    states_visited: int = 0
    transitions: int = 0
    truncated_states: int = 0
    max_outdegree: Optional[int] = None
    invariant_violations: List[Valuation] = field(default_factory=list)
    elapsed_ms: float = 0.0


class McResult:
    """Base class of the model checking outcomes."""

    stats: McStats


@dataclass
class DeadlockFound(McResult):
    trace: List[Transition]
    state: Valuation
    stats: McStats = field(default_factory=McStats)


@dataclass
class NoDeadlockExhausted(McResult):
    states_visited: int
    stats: McStats = field(default_factory=McStats)


@dataclass
class NoDeadlockWithin(McResult):
    """The state limit was hit or some successors were not computed."""

    states_visited: int
    stats: McStats = field(default_factory=McStats)


@dataclass
class McError(McResult):
    error: WDError
    trace: List[Transition] = field(default_factory=list)
    stats: McStats = field(default_factory=McStats)


McOutcome = Union[DeadlockFound, NoDeadlockExhausted, NoDeadlockWithin, McError]


def initial_states(m: Machine, settings: Optional[Settings] = None) -> Iterator[Valuation]:
    """
    Constant valuations satisfying the axioms, each extended by INITIALISATION.

    Raises:
        WDError: If an axiom or an initial value is ill-defined
    """
    settings = settings or SETTINGS
    evaluator = Evaluator(m, settings.maxint, settings.nested_set_universe_limit)
    axioms = conj(c.pred for c in m.axioms)
    for constants in solve_all(axioms, m.constants, m.sorts, settings=settings):
        if m.init is None:
            yield dict(constants)
        else:
            yield apply_actions(m.init, constants, evaluator=evaluator)


def _enabled(m: Machine, v: Valuation, evaluator: Evaluator) -> Iterator[Transition]:
    for e in m.events:
        if e.params:
            envs = evaluator.solutions(e.params, e.guard, v)
        else:
            envs = iter([{}] if evaluator.pred(e.guard, v) else [])
        for params in envs:
            yield Transition(e.name, params, apply_actions(e, v, params, evaluator))


def successors(m: Machine, v: Valuation, cap: Optional[int] = None,
               evaluator: Optional[Evaluator] = None) -> Tuple[List[Transition], bool]:
    """
    Transitions enabled in v, with all actions of an event applied simultaneously.

    Args:
        m: Typechecked machine
        v: Total valuation of constants and variables
        cap: Maximum number of transitions to compute
        evaluator: Evaluator to use (a default one otherwise)

    Returns:
        (transitions, truncated) where truncated marks that more transitions exist

    Raises:
        WDError: If a guard or an action is ill-defined in v
    """
    evaluator = evaluator or Evaluator(m)
    transitions = _enabled(m, v, evaluator)
    if cap is None:
        return list(transitions), False
    out = list(islice(transitions, cap + 1))
    return out[:cap], len(out) > cap


def _trace(key: Any, parents: Dict[Any, Tuple], states: Dict[Any, Valuation]) -> List[Transition]:
    steps: List[Transition] = []
    while key is not None:
        parent, event, params = parents[key]
        steps.append(Transition(event, params, states[key]))
        key = parent
    steps.reverse()
    return steps


def model_check(m: Machine, opts: Optional[McOptions] = None) -> McOutcome:
    """
    Search the reachable states for one without successors.

    Args:
        m: Typechecked machine
        opts: State limit, goal, out-degree cap and search order

    Returns:
        DeadlockFound, NoDeadlockExhausted, NoDeadlockWithin or McError
    """
    opts = opts or McOptions()
    settings = opts.settings or SETTINGS
    max_states = opts.max_states or settings.max_states
    evaluator = Evaluator(m, settings.maxint, settings.nested_set_universe_limit)
    invariant = conj(c.pred for c in m.invariants)
    stats = McStats(max_outdegree=opts.max_outdegree)
    start = time.perf_counter()

    def finish(result: McResult) -> McResult:
        stats.elapsed_ms = round((time.perf_counter() - start) * 1000.0, 3)
        result.stats = stats
        return result

    parents: Dict[Any, Tuple] = {}
    states: Dict[Any, Valuation] = {}
    frontier: deque = deque()
    try:
        for v in initial_states(m, settings):
            key = canonical_state(v)
            if key not in parents:
                parents[key] = (None, 'INITIALISATION', {})
                states[key] = v
                frontier.append(key)
    except WDError as error:
        logger.warning(f"{m.name}: ill-defined initialisation: {error}")
        return finish(McError(error))
    logger.info(f"{m.name}: {len(frontier)} initial state(s)")

    while frontier:
        if stats.states_visited >= max_states:
            logger.info(f"{m.name}: no deadlock found after visiting {stats.states_visited} states")
            return finish(NoDeadlockWithin(stats.states_visited))
        key = frontier.popleft() if opts.order == 'bfs' else frontier.pop()
        v = states[key]
        stats.states_visited += 1
        if stats.states_visited % PROGRESS_EVERY == 0:
            logger.info(f"{m.name}: {stats.states_visited} states visited, {len(frontier)} queued")
        try:
            if not evaluator.pred(invariant, v):
                stats.invariant_violations.append(v)
                logger.warning(f"{m.name}: invariant violated in a reachable state")
            transitions, truncated = successors(m, v, opts.max_outdegree, evaluator)
            is_goal = opts.goal is None or evaluator.pred(opts.goal, v)
        except WDError as error:
            return finish(McError(error, _trace(key, parents, states)))
        stats.truncated_states += int(truncated)
        if not transitions and is_goal:
            trace = _trace(key, parents, states)
            logger.info(f"{m.name}: deadlock after {len(trace) - 1} step(s)")
            return finish(DeadlockFound(trace, v))
        for t in transitions:
            stats.transitions += 1
            child = canonical_state(t.state)
            if child not in parents:
                parents[child] = (key, t.event, t.params)
                states[child] = t.state
                frontier.append(child)

    if stats.truncated_states:
        return finish(NoDeadlockWithin(stats.states_visited))
    return finish(NoDeadlockExhausted(stats.states_visited))
