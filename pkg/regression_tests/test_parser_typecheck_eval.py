"""
Parser, typechecker and ground evaluator tests.

Run with: pytest regression_tests/test_parser_typecheck_eval.py
"""

import pytest

from conftest import TEST_DATA, corpus_text, load_machine
from core.errors import DuplicateDeclarationError, MachineSyntaxError, TypeCheckError, WDError
from core.evaluator import Evaluator, apply_actions, enabling_predicate, eval_pred, guard_truth, int_div, int_mod
from core.machine_parser import parse_machine, parse_predicate
from core.model import Exists, INT, Rel, pretty, pretty_machine, set_of
from core.typecheck import typecheck, typecheck_predicate


# ==========================================
# PARSING
# ==========================================

def test_parse_minset_structure():
    m = parse_machine(corpus_text('minset_v1.mch'))

    assert m.name == 'MinSet'
    assert [b.name for b in m.constants] == ['N']
    assert [b.name for b in m.variables] == ['s', 'min', 'z']
    assert [c.label for c in m.invariants] == ['inv1', 'inv2', 'inv3']
    assert [e.name for e in m.events] == ['acc', 'rej', 'get']
    assert [a.target for a in m.init.actions] == ['s', 'min', 'z']
    acc = m.event('acc')
    assert [b.name for b in acc.params] == ['x']
    assert [c.label for c in acc.guards] == ['grd1', 'grd2', 'grd3']


def test_unlabelled_membership_guards():
    text = """
    MACHINE m VARIABLES s, min INVARIANTS s <: 0..3 ; min : 0..3
    EVENTS INITIALISATION = BEGIN s := {} || min := 0 END ;
      pick = ANY x WHEN min : s ; x : s THEN min := x END
    END
    """
    m = parse_machine(text)
    guards = m.event('pick').guards

    assert [c.label for c in guards] == [None, None]
    assert [pretty(c.pred) for c in guards] == ['min : s', 'x : s']
    assert [c.label for c in m.invariants] == [None, None]


def test_syntax_error_has_position():
    text = "MACHINE m\nVARIABLES x\nINVARIANTS inv1: x >\nEVENTS INITIALISATION = BEGIN x := 0 END\nEND\n"
    with pytest.raises(MachineSyntaxError) as excinfo:
        parse_machine(text)
    assert excinfo.value.line is not None
    assert excinfo.value.line >= 3


def test_duplicate_variable_rejected():
    text = """
    MACHINE m VARIABLES x, x INVARIANTS inv1: x : INT
    EVENTS INITIALISATION = BEGIN x := 0 END END
    """
    with pytest.raises(DuplicateDeclarationError):
        parse_machine(text)


def test_duplicate_assignment_rejected():
    text = """
    MACHINE m VARIABLES x INVARIANTS inv1: x : INT
    EVENTS INITIALISATION = BEGIN x := 0 || x := 1 END END
    """
    with pytest.raises(DuplicateDeclarationError):
        parse_machine(text)


def test_syntax_errors_are_value_errors():
    with pytest.raises(ValueError):
        parse_predicate('x > ')


@pytest.mark.parametrize('path', sorted(TEST_DATA.glob('*.mch')), ids=lambda p: p.name)
def test_pretty_round_trip(path):
    m = parse_machine(path.read_text())
    assert parse_machine(pretty_machine(m)) == m


@pytest.mark.parametrize('text', [
    'x > 0 & (y < 2 or not(z = 1))',
    '(x = 1 => y = 2) <=> z /= 3',
    '#w.(w : s & w > x)',
    '!w.(w : s \\/ {1, 2} => w <= 3)',
    'card(s /\\ 0..2) = x - 1',
    '-x * 2 + 7 mod 3 >= x div 2',
])
def test_predicate_round_trip(text):
    p = parse_predicate(text)
    assert parse_predicate(pretty(p)) == p


# ==========================================
# TYPECHECKING
# ==========================================

def test_types_are_inferred():
    m = load_machine('minset_v1.mch')
    types = m.types()

    assert types['N'] == set_of(INT)
    assert types['s'] == set_of(INT)
    assert types['min'] == INT
    assert m.event('acc').params[0].ty == INT


def test_carrier_set_types():
    m = load_machine('scheduler2.mch')
    assert str(m.types()['active']) == 'POW(PROC)'
    assert str(m.event('new').params[0].ty) == 'PROC'


def test_type_mismatch(scope):
    with pytest.raises(TypeCheckError):
        typecheck_predicate(scope, parse_predicate('x = TRUE'))


def test_unknown_identifier(scope):
    with pytest.raises(TypeCheckError):
        typecheck_predicate(scope, parse_predicate('nope > 1'))


def test_axiom_may_not_mention_variables():
    text = """
    MACHINE m CONSTANTS k AXIOMS axm1: k = v VARIABLES v INVARIANTS inv1: v : INT
    EVENTS INITIALISATION = BEGIN v := 0 END END
    """
    with pytest.raises(TypeCheckError):
        typecheck(parse_machine(text))


def test_variables_need_initialisation():
    text = "MACHINE m VARIABLES v INVARIANTS inv1: v : INT END"
    with pytest.raises(TypeCheckError):
        typecheck(parse_machine(text))


def test_uninferable_type():
    text = """
    MACHINE m VARIABLES v INVARIANTS inv1: v = v
    EVENTS INITIALISATION = BEGIN v := {} END END
    """
    with pytest.raises(TypeCheckError):
        typecheck(parse_machine(text))


# ==========================================
# EVALUATION
# ==========================================

def test_division_truncates_toward_zero():
    assert int_div(-7, 2) == -3
    assert int_mod(-7, 2) == -1
    assert int_div(7, -2) == -3
    assert int_mod(7, -2) == 1


def test_arithmetic_and_sets(typed):
    v = {'x': -7, 'y': 2, 'z': 0, 's': frozenset({1, 3}), 'A': frozenset(), 'c': None}

    assert eval_pred(typed('x div y = -3 & x mod y = -1'), v)
    assert eval_pred(typed('card(s \\/ {0}) = 3 & s /\\ 0..2 = {1}'), v)
    assert eval_pred(typed('s \\ {1} <: 2..3 & 4 /: s & A = {}'), v)


def test_non_strict_conjunction(typed):
    assert eval_pred(typed('FALSE & 1 div 0 = 1'), {}) is False
    assert eval_pred(typed('TRUE or 1 div 0 = 1'), {}) is True


def test_division_by_zero_names_atom(typed):
    with pytest.raises(WDError) as excinfo:
        eval_pred(typed('x div y = 1'), {'x': 1, 'y': 0})
    assert excinfo.value.atom is not None
    assert 'x div y' in str(excinfo.value)


def test_quantifiers(typed):
    v = {'x': 2, 's': frozenset({1, 3})}

    assert eval_pred(typed('#w.(w : s & w > x)'), v)
    assert not eval_pred(typed('#w.(w : s & w > 3)'), v)
    assert eval_pred(typed('!w.(w : s => w <= 3)'), v)
    assert not eval_pred(typed('!w.(w : s => w < x)'), v)


def test_enabling_predicate_closes_parameters():
    m = load_machine('minset_v1.mch')
    assert isinstance(enabling_predicate(m.event('acc')), Exists)
    assert enabling_predicate(m.event('get')) == m.event('get').guard


def test_actions_are_simultaneous():
    m = load_machine('minset_v1.mch')
    v = {'N': frozenset({0}), 's': frozenset({0, 3}), 'min': 3, 'z': 4}

    after = apply_actions(m.event('acc'), v, {'x': 0}, Evaluator(m))

    assert after['s'] == frozenset({0})
    assert after['min'] == 0
    assert after['z'] == 4


def test_guard_truth_reports_falsified_conjunct():
    m = load_machine('minset_v1.mch')
    evaluator = Evaluator(m)
    v = {'N': frozenset({0}), 's': frozenset({0}), 'min': 0, 'z': 4}

    enabled, falsified = guard_truth(m.event('get'), v, evaluator)
    assert not enabled
    assert isinstance(falsified, Rel) and pretty(falsified) == 's = {}'

    enabled, _falsified = guard_truth(m.event('acc'), v, evaluator)
    assert not enabled
