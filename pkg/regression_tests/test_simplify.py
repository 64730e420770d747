"""
Simplifier tests: the rewrite rules one by one, sharing keys, and a seeded
soundness property comparing a predicate with its simplification under
every valuation of a small universe.

Run with: pytest regression_tests/test_simplify.py
"""

import random
from itertools import product

import pytest

from core.errors import NotAtomicError, WDError
from core.evaluator import Evaluator
from core.model import Ident, TRUE, pretty
from core.simplify import NonEmptyFacts, normalize_atom, simplify, substitute


# ==========================================
# RULES
# ==========================================

def test_r1_membership_witness(typed):
    assert pretty(simplify(typed('#w.(w : s)'))) == 's /= {}'


def test_r2_known_nonempty(typed):
    facts = NonEmptyFacts.from_predicates([typed('s /= {}')])
    assert simplify(typed('s /= {} & x > 0'), facts) == typed('x > 0')
    assert simplify(typed('{1, 2} /= {}')) == TRUE


def test_r3_unbounded_integer_witness(typed):
    facts = NonEmptyFacts.from_predicates([typed('x : 0..3 & y : 0..3')])
    assert simplify(typed('#w.(w > x)'), facts) == TRUE
    assert simplify(typed('#w.(y > w)'), facts) == TRUE
    assert simplify(typed('#w.(w <= x + y)'), facts) == TRUE


def test_r3_needs_a_static_bound(typed):
    p = typed('#w.(w > x)')
    assert simplify(p) == p


def test_r4_equality_elimination(typed):
    assert pretty(simplify(typed('#w.(w : s & w = x + 1)'))) == 'x + 1 : s'
    assert pretty(simplify(typed('#w.(y = w & w > 2)'))) == 'y > 2'


def test_r4_skips_division(typed):
    p = simplify(typed('#w.(w = x div y & w : s)'))
    assert 'div' in pretty(p) and '#' in pretty(p)


def test_conjunct_hoisting(typed):
    assert pretty(simplify(typed('#w.(x > 0 & w : s & w < y)'))) == 'x > 0 & #w:INT.(w : s & w < y)'


def test_hoisting_stops_at_division(typed):
    p = typed('#w.(w : 0..3 & 1 div w = 1 & y > 5)')
    q = simplify(p)

    assert q == p
    for pred in (p, q):
        with pytest.raises(WDError, match='1 div w'):
            Evaluator().pred(pred, {'y': 0})


def test_hoisting_keeps_prefix_before_division(typed):
    q = simplify(typed('#w.(y > 5 & w : 0..3 & 1 div w = 1 & x > 0)'))
    assert pretty(q) == 'y > 5 & #w:INT.(w : 0..3 & 1 div w = 1 & x > 0)'


def test_r4_waits_for_division_free_prefix(typed):
    p = typed('#w.(w : {1} & 1 div y = 1 & w = x)')
    assert simplify(p) == p

    p = typed('#w.(w = x & 1 div y = 1 & w : s)')
    assert simplify(p) == p

    q = simplify(typed('#w.(w = x & 1 div y = 1 & w < 3)'))
    assert pretty(q) == '1 div y = 1 & x < 3'


def test_worked_example(typed):
    p = typed('#w.(x : s & w : s)')
    assert pretty(simplify(p)) == 'x : s & s /= {}'


def test_parameter_free_guard_unchanged(typed):
    p = typed('x < y or s = {}')
    assert simplify(p) == p


def test_substitute_avoids_capture(typed):
    p = typed('#w.(w : s & w > x)')
    q = substitute(p, 'x', Ident('w'))
    assert pretty(q) == '#w_1:INT.(w_1 : s & w_1 > w)'


# ==========================================
# ATOM NORMALIZATION
# ==========================================

def test_mirrored_comparisons_share_a_key(typed):
    kind, args, polarity = normalize_atom(typed('x > y'))
    assert normalize_atom(typed('y < x')) == (kind, args, polarity)
    assert normalize_atom(typed('y >= x')) == (kind, args, not polarity)


def test_equality_is_symmetric(typed):
    assert normalize_atom(typed('x = y'))[:2] == normalize_atom(typed('y = x'))[:2]
    assert normalize_atom(typed('x /= y'))[2] is False


def test_membership_polarity(typed):
    assert normalize_atom(typed('y : A'))[:2] == normalize_atom(typed('y /: A'))[:2]
    assert normalize_atom(typed('s /<: A'))[2] is False


def test_non_atomic_rejected(typed):
    with pytest.raises(NotAtomicError):
        normalize_atom(typed('x > 0 & y > 0'))


# ==========================================
# SOUNDNESS
# ==========================================

ATOMS = [
    'x < y', 'x = y', 'x /= 1', 'x + 1 = y', 'x : s', 'y /: s', 's = {}', 's /= {}',
    'card(s) = x', '{x} <: s', 's <: {0, 1}', 'x >= 2', 'TRUE', 'FALSE',
]
# div/mod atoms whose divisor can be 0 somewhere in the universe
PARTIAL = ['1 div x = 1', 'y mod x = 0', '3 div (y - 1) > x']
BOUNDING = ['w : s', 'w = x', 'w = y + 1', 'w : {x, y}', 'w : 0..x']
FREE = ['w > x', 'w < y', 'w /= x', 'w <= 1', '2 div w = 1', 'y mod w = 0']
OUTER = ATOMS[:12] + PARTIAL


def _random_exists(rng: random.Random) -> str:
    parts = [rng.choice(BOUNDING)] + rng.sample(FREE, rng.randint(0, 2))
    if rng.random() < 0.5:
        parts.append(rng.choice(OUTER))
    rng.shuffle(parts)
    return '#w.(' + ' & '.join(parts) + ')'


def _random_pred(rng: random.Random, depth: int) -> str:
    if depth == 0 or rng.random() < 0.25:
        return rng.choice(ATOMS + PARTIAL)
    choice = rng.randrange(7)
    if choice == 0:
        return f'({_random_pred(rng, depth - 1)} & {_random_pred(rng, depth - 1)})'
    if choice == 1:
        return f'({_random_pred(rng, depth - 1)} or {_random_pred(rng, depth - 1)})'
    if choice == 2:
        return f'not({_random_pred(rng, depth - 1)})'
    if choice == 3:
        return f'({_random_pred(rng, depth - 1)} => {_random_pred(rng, depth - 1)})'
    if choice == 4:
        return f'!w.(w : s => {rng.choice(FREE)})'
    if choice == 5:
        return rng.choice(['#w.(w : s)', '#w.(w > x)', '#w.(y > w)', '#w.(w >= x + y)'])
    return _random_exists(rng)


DOMAIN = 'x : 0..3 & y : 0..3 & s <: 0..2'
VALUATIONS = [
    {'x': x, 'y': y, 's': frozenset(i for i in range(3) if bits >> i & 1)}
    for x, y, bits in product(range(4), range(4), range(8))
]


def _outcome(evaluator: Evaluator, p, v):
    try:
        return evaluator.pred(p, v)
    except WDError:
        return 'wd'


def test_simplification_preserves_outcome(typed):
    rng = random.Random(20240611)
    facts = NonEmptyFacts.from_predicates([typed(DOMAIN)])
    evaluator = Evaluator()
    discrepancies = []
    wd_cases = 0

    for _case in range(1000):
        text = _random_pred(rng, 3)
        p = typed(text)
        q = simplify(p, facts)
        outcomes = [(_outcome(evaluator, p, v), _outcome(evaluator, q, v)) for v in VALUATIONS]
        wd_cases += any(before == 'wd' for before, _after in outcomes)
        for v, (before, after) in zip(VALUATIONS, outcomes):
            if before != after:
                discrepancies.append((text, pretty(q), v, before, after))
                break

    assert discrepancies == []
    assert wd_cases > 50
