"""
Core package for deadlock checking of Event-B style machines.
"""
from .cbc import CheckOptions, check_deadlock
from .machine_parser import parse_machine, parse_predicate
from .mc import McOptions, model_check
from .typecheck import typecheck, typecheck_predicate

__all__ = [
    'CheckOptions', 'check_deadlock', 'McOptions', 'model_check',
    'parse_machine', 'parse_predicate', 'typecheck', 'typecheck_predicate',
]
