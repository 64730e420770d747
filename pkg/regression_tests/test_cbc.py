"""
Constraint-based deadlock checking tests: the MinSet trilogy, goal filtering,
well-definedness, the speed-up switches and a seeded oracle over small random
machines whose deadlock freedom is decided by enumerating every state.

Run with: pytest regression_tests/test_cbc.py
"""

import random
import time
from itertools import product

import pytest

from conftest import load_machine
from core.cbc import (
    CheckOptions, DeadlockFound, NoDeadlock, Unknown, assumptions, build_dln, check_deadlock,
    components, filter_events, sort_conjuncts, wd_condition,
)
from core.errors import TypeCheckError
from core.evaluator import Evaluator, enabling_predicate
from core.machine_parser import parse_machine, parse_predicate
from core.model import conjuncts, pretty
from core.typecheck import typecheck, typecheck_predicate


def _goal(m, text):
    return typecheck_predicate(m, parse_predicate(text))


def _is_deadlock(m, v):
    evaluator = Evaluator(m)
    return evaluator.pred(assumptions(m), v) and not any(
        evaluator.pred(enabling_predicate(e), v) for e in m.events)


# ==========================================
# MINSET
# ==========================================

def test_minset_v1_deadlocks():
    m = load_machine('minset_v1.mch')
    result = check_deadlock(m)

    assert isinstance(result, DeadlockFound)
    assert _is_deadlock(m, result.valuation)
    assert [g.event for g in result.guards] == ['acc', 'rej', 'get']
    assert not any(g.enabled for g in result.guards)
    assert result.guards[2].falsified is not None


def test_minset_v2_deadlocks_with_min_outside_s():
    m = load_machine('minset_v2.mch')
    result = check_deadlock(m)

    assert isinstance(result, DeadlockFound)
    assert _is_deadlock(m, result.valuation)
    assert result.valuation['min'] not in result.valuation['s']
    assert result.valuation['s'] == frozenset()
    assert not any(g.enabled for g in result.guards)


def test_minset_v3_is_deadlock_free():
    result = check_deadlock(load_machine('minset_v3.mch'))
    assert isinstance(result, NoDeadlock)


def test_minset_v2_partition_stats():
    result = check_deadlock(load_machine('minset_v2.mch'))

    assert result.stats.components == 3
    assert result.stats.relevant_components == 1
    assert result.stats.considered == ['acc', 'rej', 'get']
    assert set(result.stats.timings) >= {'buildMs', 'filterMs', 'solveMs'}


def test_event_selection():
    m = load_machine('minset_v3.mch')

    result = check_deadlock(m, CheckOptions(events=['get']))
    assert isinstance(result, DeadlockFound)
    assert result.stats.considered == ['get']

    with pytest.raises(TypeCheckError):
        check_deadlock(m, CheckOptions(events=['nope']))


SWITCHES = [
    CheckOptions(partition=False),
    CheckOptions(sort=False),
    CheckOptions(simplify=False),
    CheckOptions(filter=False),
    CheckOptions(drop_irrelevant=False),
    CheckOptions(partition=False, sort=False, simplify=False, filter=False),
]
SWITCH_IDS = ['no-partition', 'no-sort', 'no-simplify', 'no-filter', 'keep-irrelevant', 'plain']


@pytest.mark.parametrize('name, expected', [
    ('minset_v1.mch', DeadlockFound),
    ('minset_v2.mch', DeadlockFound),
    ('minset_v3.mch', NoDeadlock),
    ('counter.mch', NoDeadlock),
    ('scheduler2.mch', NoDeadlock),
])
@pytest.mark.parametrize('opts', SWITCHES, ids=SWITCH_IDS)
def test_switches_do_not_change_the_verdict(name, expected, opts):
    m = load_machine(name)
    result = check_deadlock(m, opts)

    assert isinstance(result, expected)
    if isinstance(result, DeadlockFound):
        assert _is_deadlock(m, result.valuation)


# ==========================================
# GOALS AND FILTERING
# ==========================================

def test_goal_drops_events():
    m = load_machine('counter.mch')
    goal = _goal(m, 'Counter = 10')

    result = check_deadlock(m, CheckOptions(goal=goal))
    assert isinstance(result, NoDeadlock)
    assert result.stats.dropped == ['inc', 'reset']

    unfiltered = check_deadlock(m, CheckOptions(goal=goal, filter=False))
    assert isinstance(unfiltered, NoDeadlock)
    assert unfiltered.stats.dropped == []


def test_filter_events_keeps_possible_events():
    m = load_machine('counter.mch')
    ai = assumptions(m, _goal(m, 'Counter : 4..6'))

    kept, dropped = filter_events(m, ai, m.events)

    assert [e.name for e in kept] == ['inc', 'reset']
    assert dropped == ['wrap']


def test_unsatisfiable_goal_means_no_deadlock():
    m = load_machine('counter.mch')
    result = check_deadlock(m, CheckOptions(goal=_goal(m, 'Counter > 10')))
    assert isinstance(result, NoDeadlock)


def test_build_dln_conjoins_negated_guards():
    m = load_machine('counter.mch')
    parts = conjuncts(build_dln(m, CheckOptions(simplify=False)))

    assert pretty(parts[0]) == 'Counter : 0..10'
    assert len(parts) == 4


# ==========================================
# WELL-DEFINEDNESS
# ==========================================

def test_wd_condition_reads_left_to_right(typed):
    assert pretty(wd_condition(typed('x > 0 & x div y = 1'))) == 'x > 0 => y /= 0'
    assert pretty(wd_condition(typed('x mod 2 = 1'))) == '2 /= 0'
    assert pretty(wd_condition(typed('x < y'))) == 'TRUE'


def test_division_guard_is_reported():
    result = check_deadlock(load_machine('div_wd.mch'))

    assert isinstance(result, Unknown)
    assert result.wd_error is not None
    assert 'x div y' in result.reason


# ==========================================
# SORTING AND PARTITIONING
# ==========================================

def test_sort_moves_shared_atoms_first(typed):
    deadlock = typed('not(x > 0 & y : s) & not(z = 1 & y : s)')
    expected = typed('not(y : s & x > 0) & not(y : s & z = 1)')
    assert conjuncts(sort_conjuncts(deadlock)) == conjuncts(expected)


def test_sort_keeps_division_guards(typed):
    deadlock = typed('not(x > 0 & x div y = 1 & y : s) & not(y : s)')
    assert conjuncts(sort_conjuncts(deadlock)) == conjuncts(deadlock)


def test_components_split_on_shared_identifiers(typed):
    f = typed('x > 0 & y > x & s = {} & z = 1 & not(z = 2)')
    guards = conjuncts(typed('not(z = 2)'))

    parts = components(f, guards)
    assert [len(c.conjuncts) for c in parts] == [2, 1, 2]
    assert [c.relevant for c in parts] == [False, False, True]

    relevant = components(f, guards, drop_irrelevant=True)
    assert [c.index for c in relevant] == [3]


# ==========================================
# LARGER MODELS
# ==========================================

@pytest.mark.parametrize('name', ['scheduler2.mch', 'scheduler5.mch', 'scheduler9.mch'])
def test_scheduler_is_deadlock_free(name):
    assert isinstance(check_deadlock(load_machine(name)), NoDeadlock)


def test_queens_axioms_are_solved():
    m = load_machine('queens8.mch')
    result = check_deadlock(m)

    assert isinstance(result, DeadlockFound)
    queens = [result.valuation[f'q{i}'] for i in range(1, 9)]
    assert sorted(queens) == list(range(1, 9))
    assert result.guards == []


@pytest.mark.parametrize('name, limit', [
    ('minset_v1.mch', 1.0),
    ('minset_v2.mch', 1.0),
    ('minset_v3.mch', 1.0),
    ('scheduler9.mch', 1.0),
    ('queens8.mch', 5.0),
])
def test_check_finishes_in_time(name, limit):
    m = load_machine(name)
    started = time.perf_counter()
    check_deadlock(m)
    assert time.perf_counter() - started < limit


# ==========================================
# RANDOM ORACLE
# ==========================================

PLAIN_GUARDS = [
    'a < b', 'a = b', 'a /= 0', 'b >= 2', 'a : c', 'b /: c', 'c = {}', 'c /= {}',
    'card(c) = a', 'card(c) < 2', '{a} <: c', 'c <: {1, 2}', 'a + b = 3', 'a = 3 or b = 0',
    'not(a : c & b : c)', 'a > 1 => b < 2',
]
PARAM_BINDING = ['p : c', 'p = a + 1', 'p : 0..b', 'p : c \\/ {b}']
PARAM_EXTRA = ['p > a', 'p /= b', 'p + b = 3', 'p /: c', 'p < 2']
EXTRA_INVARIANTS = ['a /= b', 'card(c) <= 2', 'a : c', 'b <= a', 'c /= {}']

STATES = [
    {'a': a, 'b': b, 'c': frozenset(i for i in range(4) if bits >> i & 1)}
    for a, b, bits in product(range(4), range(4), range(16))
]


def _random_event(rng: random.Random, index: int) -> str:
    if rng.random() < 0.35:
        guards = [rng.choice(PARAM_BINDING)] + rng.sample(PARAM_EXTRA, rng.randint(0, 2))
        head = 'ANY p WHEN'
    else:
        guards = rng.sample(PLAIN_GUARDS, rng.randint(1, 2))
        head = 'WHEN'
    labelled = ' ; '.join(f'g{i + 1}: {g}' for i, g in enumerate(guards))
    return f'e{index} = {head} {labelled} THEN skip END'


def _random_machine(rng: random.Random, index: int) -> str:
    invariants = ['inv1: a : 0..3', 'inv2: b : 0..3', 'inv3: c <: 0..3']
    if rng.random() < 0.4:
        invariants.append(f'inv4: {rng.choice(EXTRA_INVARIANTS)}')
    events = [_random_event(rng, i) for i in range(1, rng.randint(1, 4) + 1)]
    return (
        f"MACHINE Random{index}\nVARIABLES a, b, c\n"
        f"INVARIANTS {' ; '.join(invariants)}\n"
        f"EVENTS INITIALISATION = BEGIN a := 0 || b := 0 || c := {{}} END ;\n"
        f"{' ; '.join(events)}\nEND\n"
    )


def test_cbc_agrees_with_state_enumeration():
    rng = random.Random(4242)
    mismatches = []

    for index in range(500):
        text = _random_machine(rng, index)
        m = typecheck(parse_machine(text))
        has_deadlock = any(_is_deadlock(m, v) for v in STATES)
        result = check_deadlock(m)

        if isinstance(result, DeadlockFound):
            if not has_deadlock or not _is_deadlock(m, result.valuation):
                mismatches.append((text, 'bad deadlock', result.valuation))
        elif isinstance(result, NoDeadlock):
            if has_deadlock:
                mismatches.append((text, 'missed deadlock', None))
        else:
            mismatches.append((text, result.reason, None))

    assert mismatches == []
