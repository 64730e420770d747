"""Shared fixtures: the machine corpus and a small typed scope for predicate tests."""

from pathlib import Path

import pytest

from core.machine_parser import parse_machine, parse_predicate
from core.typecheck import typecheck, typecheck_predicate

TEST_DATA = Path(__file__).parent / 'test_data'

# Scope used to type standalone predicates: x, y, z integers, s and A sets of integers,
# c an element of the carrier set COLOUR.
SCOPE_MACHINE = """
MACHINE Scope
SETS COLOUR = {red, green, blue}
VARIABLES x, y, z, s, A, c
INVARIANTS
  inv1: x : INT ;
  inv2: y : INT ;
  inv3: z : INT ;
  inv4: s <: 0..3 ;
  inv5: A <: 0..3 ;
  inv6: c : COLOUR
EVENTS
  INITIALISATION = BEGIN x := 0 || y := 0 || z := 0 || s := {} || A := {} || c := red END
END
"""


def corpus_text(name: str) -> str:
    return (TEST_DATA / name).read_text()


def load_machine(name: str):
    """Parse and typecheck a machine from test_data."""
    return typecheck(parse_machine(corpus_text(name)))


@pytest.fixture(scope='session')
def scope():
    return typecheck(parse_machine(SCOPE_MACHINE))


@pytest.fixture(scope='session')
def typed(scope):
    """Parse and type a predicate over the x, y, z, s, A, c scope."""

    def build(text: str):
        return typecheck_predicate(scope, parse_predicate(text))

    return build
