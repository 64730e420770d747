"""
Constraint kernel tests: propagation without search, reified connectives,
trail restoration and a seeded completeness check against brute force.

Run with: pytest regression_tests/test_kernel.py
"""

import random
from itertools import product

import pytest

from core.config import SETTINGS, with_overrides
from core.evaluator import Evaluator
from core.kernel import (
    AndProp, Budget, Sat, Status, Store, SuspendedQuantifier, Unknown, Unsat, WDOutcome, solve, solve_all,
)


# ==========================================
# PROPAGATION
# ==========================================

def test_shared_atoms_propagate_without_search(scope, typed):
    store = Store(scope.declarations, scope)
    store.post(typed('A <: 0..3'))
    store.post(typed('x >= 0'))
    store.post(typed('not(x : {0, 1, 2} & z /= 0 & y : A) & not(x > 2 & y : A) & not(y /: A)'))

    assert store.propagate() is Status.FIXPOINT
    assert store.dom['z'].is_fixed and store.dom['z'].value == 0
    assert store.decisions == 0

    def truth(text):
        return store.truth(store.reify(typed(text)))

    assert truth('y : A') is True
    assert truth('x > 2') is False
    assert truth('x : {0, 1, 2}') is True
    assert truth('z /= 0') is False


def test_mirrored_comparison_is_refuted_by_propagation(scope, typed):
    result = solve(typed('x > y & y >= x'), scope.declarations, scope)
    assert isinstance(result, Unsat)
    assert result.decisions == 0

    bounded = solve(typed('x : 0..3 & y : 0..3 & x > y & y >= x'), scope.declarations, scope)
    assert isinstance(bounded, Unsat)
    assert bounded.decisions == 0


def test_set_bounds_propagate(scope, typed):
    store = Store(scope.declarations, scope)
    store.post(typed('s <: 0..3 & {1, 2} <: s & card(s) = 2'))

    assert store.propagate() is Status.FIXPOINT
    assert store.dom['s'].is_fixed
    assert store.dom['s'].value == frozenset({1, 2})


def test_interval_membership_narrows_bounds(scope, typed):
    store = Store(scope.declarations, scope)
    store.post(typed('x : 2..9 & x < 5 & y = x + 10'))

    assert store.propagate() is Status.FIXPOINT
    assert (store.dom['x'].lo, store.dom['x'].hi) == (2, 4)
    assert (store.dom['y'].lo, store.dom['y'].hi) == (12, 14)


def test_subset_is_decomposed_per_element(scope, typed):
    store = Store(scope.declarations, scope)
    store.post(typed('s <: 0..3 & A <: 0..3'))
    store.post(typed('A = {0, 1} & s <: A'))

    assert store.propagate() is Status.FIXPOINT
    subset_rv, _ = store.reify(typed('s <: A'))
    conjunctions = [p for p in subset_rv.subscribers if isinstance(p, AndProp) and p.res[0] is subset_rv]
    assert len(conjunctions) == 1
    assert len(conjunctions[0].lits) == 4
    assert set(store.dom['s'].may) == {0, 1}


def test_negated_subset_forces_an_outside_element(scope, typed):
    store = Store(scope.declarations, scope)
    store.post(typed('s <: 0..3 & A = {0, 1, 2} & s /<: A & card(s) = 1'))

    assert store.propagate() is Status.FIXPOINT
    assert 3 in store.dom['s'].must
    assert store.dom['s'].is_fixed and store.dom['s'].value == frozenset({3})


@pytest.mark.parametrize('a, b', list(product([False, True], repeat=2)))
def test_equivalence_from_operands(a, b):
    store = Store([])
    res, la, lb = store.new_literal('r'), store.new_literal('a'), store.new_literal('b')
    store.add_equiv(res, la, lb)
    store.assign(la, a)
    store.assign(lb, b)

    assert store.propagate() is Status.FIXPOINT
    assert store.truth(res) is (a == b)


@pytest.mark.parametrize('r, a', list(product([False, True], repeat=2)))
def test_equivalence_from_result(r, a):
    store = Store([])
    res, la, lb = store.new_literal('r'), store.new_literal('a'), store.new_literal('b')
    store.add_equiv(res, la, lb)
    store.assign(res, r)
    store.assign(la, a)

    assert store.propagate() is Status.FIXPOINT
    assert store.truth(lb) is (a if r else not a)


# ==========================================
# TRAIL
# ==========================================

def test_undo_restores_domains_and_truths(scope, typed):
    store = Store(scope.declarations, scope)
    store.post(typed('x : 0..5 & y : 0..5 & x < y & s <: 0..3 & x : s'))
    assert store.propagate() is Status.FIXPOINT
    before = store.snapshot()
    mark = store.mark()

    store.decide('x', 2)
    assert store.propagate() is Status.FIXPOINT
    store.decide('s', ('out', 0))
    store.propagate()
    assert store.snapshot() != before

    store.undo(mark)
    assert store.snapshot() == before


# ==========================================
# SUSPENDED QUANTIFIERS
# ==========================================

NARROW = with_overrides(SETTINGS, quantifier_expansion_limit=2)
UNREACHABLE = 'y : 0..19 & #w.(w : 0..4 & w = y + 5)'


def test_search_expands_the_smaller_quantifier(scope, typed):
    result = solve(typed(UNREACHABLE), scope.declarations, scope, settings=NARROW)

    assert isinstance(result, Unsat)
    assert result.decisions == 1


def test_expansion_is_undone_with_its_branch(scope, typed):
    store = Store(scope.declarations, scope, NARROW)
    store.post(typed(UNREACHABLE))
    assert store.propagate() is Status.FIXPOINT
    before = store.snapshot()
    mark = store.mark()

    sq = store.select()
    assert isinstance(sq, SuspendedQuantifier)
    store.decide(sq, 'expand')
    assert sq.link is not None
    assert store.propagate() is Status.INCONSISTENT

    store.undo(mark)
    assert sq.link is None
    assert store.snapshot() == before
    assert store.select() is sq


def test_expanded_quantifier_is_solved_with_its_free_identifiers(scope, typed):
    p = typed('y : 0..19 & #w.(w : 0..4 & w = y - 3)')
    result = solve(p, scope.declarations, scope, settings=NARROW)

    assert isinstance(result, Sat)
    assert 3 <= result.valuation['y'] <= 7


# ==========================================
# SEARCH OUTCOMES
# ==========================================

def test_decision_budget_gives_unknown(scope, typed):
    result = solve(typed('x : 0..3 & y : 0..3 & x /= y'), scope.declarations, scope,
                   budget=Budget(max_decisions=0))
    assert isinstance(result, Unknown)
    assert 'decision limit' in result.reason


def test_division_by_zero_is_reported(scope, typed):
    result = solve(typed('y = 0 & x div y = 1'), scope.declarations, scope)
    assert isinstance(result, WDOutcome)
    assert 'x div y' in str(result.error)


def test_solve_all_enumerates_every_solution(scope, typed):
    decls = [b for b in scope.declarations if b.name in ('x', 'y')]
    found = {(v['x'], v['y']) for v in solve_all(typed('x : 0..3 & y : 0..3 & x < y'), decls, scope)}
    assert found == {(x, y) for x in range(4) for y in range(4) if x < y}


# ==========================================
# COMPLETENESS
# ==========================================

ATOMS = [
    'x < y', 'x = y + 1', 'x /= 2', 'x : s', 'y /: s', 's = {}', 'card(s) = x', 'card(s) <= 1',
    '{x, y} <: s', 's <: {1, 2}', 'x + y = 3', 'x * y = 2', 's = {y}', 's /\\ {0, 1} = {}',
    's \\/ {x} = {0, 1}', '#w.(w : s & w > x)', '!w.(w : s => w >= y)', 'x : 1..y',
    'x - y >= 1', '-x < y - 3', 'x div 2 = y', 'x mod 2 = 0',
]

DOMAIN = 'x : 0..3 & y : 0..3 & s <: 0..3'
VALUATIONS = [
    {'x': x, 'y': y, 's': frozenset(i for i in range(4) if bits >> i & 1)}
    for x, y, bits in product(range(4), range(4), range(16))
]


def _random_pred(rng: random.Random, depth: int) -> str:
    if depth == 0 or rng.random() < 0.3:
        return rng.choice(ATOMS)
    left, right = _random_pred(rng, depth - 1), _random_pred(rng, depth - 1)
    return rng.choice([
        f'({left} & {right})',
        f'({left} or {right})',
        f'not({left})',
        f'({left} => {right})',
        f'({left} <=> {right})',
    ])


@pytest.mark.parametrize('expansion_limit', [SETTINGS.quantifier_expansion_limit, 2])
def test_solver_agrees_with_brute_force(scope, typed, expansion_limit):
    rng = random.Random(1009)
    settings = with_overrides(SETTINGS, quantifier_expansion_limit=expansion_limit)
    decls = [b for b in scope.declarations if b.name in ('x', 'y', 's')]
    evaluator = Evaluator(scope)
    mismatches = []

    for _case in range(1000):
        text = f'{DOMAIN} & ({_random_pred(rng, 3)})'
        p = typed(text)
        satisfiable = any(evaluator.pred(p, v) for v in VALUATIONS)
        result = solve(p, decls, scope, settings=settings)

        if isinstance(result, Sat):
            if not evaluator.pred(p, result.valuation):
                mismatches.append((text, 'wrong model', result.valuation))
        elif isinstance(result, Unsat):
            if satisfiable:
                mismatches.append((text, 'missed a model', None))
        else:
            mismatches.append((text, type(result).__name__, None))

    assert mismatches == []
