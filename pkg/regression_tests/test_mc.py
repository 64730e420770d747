"""
Explicit-state model checking tests.

Run with: pytest regression_tests/test_mc.py
"""

import pytest

from conftest import load_machine
from core.machine_parser import parse_machine, parse_predicate
from core.mc import (
    DeadlockFound, McError, McOptions, NoDeadlockExhausted, NoDeadlockWithin, initial_states,
    model_check, successors,
)
from core.typecheck import typecheck, typecheck_predicate


def _machine(text):
    return typecheck(parse_machine(text))


# ==========================================
# STATES AND TRANSITIONS
# ==========================================

def test_initial_states_enumerate_constants():
    states = list(initial_states(load_machine('minset_v1.mch')))

    assert len(states) == 15
    assert all(v['s'] == v['N'] | {3} and v['min'] == 3 and v['z'] == 4 for v in states)


def test_successors_apply_actions():
    m = load_machine('minset_v1.mch')
    v = {'N': frozenset({0, 1}), 's': frozenset({0, 1, 3}), 'min': 3, 'z': 4}

    transitions, truncated = successors(m, v)
    assert not truncated
    assert [t.event for t in transitions] == ['acc', 'acc']
    assert sorted(t.params['x'] for t in transitions) == [0, 1]
    for t in transitions:
        assert t.state['min'] == t.params['x']
        assert t.state['s'] == frozenset({0, 1})

    capped, truncated = successors(m, v, cap=1)
    assert len(capped) == 1
    assert truncated


def test_options_are_validated():
    with pytest.raises(ValueError):
        McOptions(max_states=0)
    with pytest.raises(ValueError):
        McOptions(order='xyz')


# ==========================================
# OUTCOMES
# ==========================================

def test_minset_v1_reaches_a_deadlock():
    m = load_machine('minset_v1.mch')
    result = model_check(m)

    assert isinstance(result, DeadlockFound)
    assert result.trace[0].event == 'INITIALISATION'
    assert result.trace[-1].state == result.state
    assert successors(m, result.state) == ([], False)


def test_trace_replays():
    m = load_machine('minset_v1.mch')
    result = model_check(m, McOptions(goal=typecheck_predicate(m, parse_predicate('card(N) = 2'))))

    assert isinstance(result, DeadlockFound)
    assert len(result.state['N']) == 2
    for before, step in zip(result.trace, result.trace[1:]):
        transitions, _truncated = successors(m, before.state)
        assert any(t.event == step.event and t.state == step.state for t in transitions)


@pytest.mark.parametrize('order', ['bfs', 'dfs'])
def test_minset_v2_exhausts(order):
    result = model_check(load_machine('minset_v2.mch'), McOptions(order=order))

    assert isinstance(result, NoDeadlockExhausted)
    assert result.states_visited == result.stats.states_visited
    assert result.stats.invariant_violations == []


def test_outdegree_cap_qualifies_the_verdict():
    result = model_check(load_machine('minset_v2.mch'), McOptions(max_outdegree=1))

    assert isinstance(result, NoDeadlockWithin)
    assert result.stats.truncated_states > 0
    assert result.stats.max_outdegree == 1


def test_state_limit():
    result = model_check(load_machine('scheduler5.mch'), McOptions(max_states=100))

    assert isinstance(result, NoDeadlockWithin)
    assert result.states_visited == 100


@pytest.mark.parametrize('name', ['scheduler2.mch', 'counter.mch', 'div_wd.mch'])
def test_deadlock_free_machines_exhaust(name):
    assert isinstance(model_check(load_machine(name)), NoDeadlockExhausted)


def test_invariant_violations_are_recorded():
    m = _machine("""
    MACHINE Overflow VARIABLES x INVARIANTS inv1: x : 0..2
    EVENTS
      INITIALISATION = BEGIN x := 0 END ;
      inc = WHEN grd1: x < 3 THEN x := x + 1 END
    END
    """)
    result = model_check(m)

    assert isinstance(result, DeadlockFound)
    assert result.state == {'x': 3}
    assert result.stats.invariant_violations == [{'x': 3}]
    assert [t.event for t in result.trace] == ['INITIALISATION', 'inc', 'inc', 'inc']


def test_ill_defined_guard_stops_the_search():
    m = _machine("""
    MACHINE Divide VARIABLES x INVARIANTS inv1: x : 0..5
    EVENTS
      INITIALISATION = BEGIN x := 0 END ;
      step = WHEN grd1: 6 div x = 2 THEN x := 3 END
    END
    """)
    result = model_check(m)

    assert isinstance(result, McError)
    assert '6 div x' in str(result.error)
    assert [t.event for t in result.trace] == ['INITIALISATION']
