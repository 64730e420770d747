"""
Machine Parser
==============
PEG grammar (arpeggio) for the ASCII machine language and a visitor that
builds the untyped AST from ``core.model``.

Usage:
    from core.machine_parser import parse_machine, parse_predicate

    machine = parse_machine(open('minset.mch').read())
    goal = parse_predicate('Counter = 10')
"""

import logging
import threading
from dataclasses import dataclass
from typing import Any, Dict, List, Tuple

from arpeggio import EOF, NoMatch, Optional, ParserPython, PTNodeVisitor, ZeroOrMore, visit_parse_tree
from arpeggio import RegExMatch as _

from .errors import DuplicateDeclarationError, MachineSyntaxError
from .model import (
    Assignment, Binder, BoolConst, BoolLit, BuiltinSet, Card, Clause, EmptySet, Equiv, Event,
    Exists, Expr, Forall, Ident, Implies, IntLit, Interval, Machine, Negate, Not, And, Or, Pred,
    Rel, SetLit, SetOp, SortDecl, ArithOp, BOOL, INT, Ty, set_of, sort_type,
)

logger = logging.getLogger(__name__)

KEYWORDS = (
    'MACHINE', 'SETS', 'CONSTANTS', 'AXIOMS', 'VARIABLES', 'INVARIANTS', 'EVENTS', 'END',
    'ANY', 'WHEN', 'THEN', 'BEGIN', 'INITIALISATION', 'skip', 'or', 'not', 'div', 'mod',
    'card', 'TRUE', 'FALSE', 'INT', 'NAT1', 'NAT', 'BOOL', 'POW',
)
_KEYWORD_RE = '|'.join(KEYWORDS)

_SET_OPS = {'\\/': 'union', '/\\': 'inter', '\\': 'diff'}


# ==========================================
# GRAMMAR
# ==========================================

def comment():
    return [_(r'//[^\n]*'), _(r'/\*[\s\S]*?\*/')]


def identifier():
    return _(r'(?!(?:{})\b)[A-Za-z_][A-Za-z0-9_]*'.format(_KEYWORD_RE))


def integer():
    return _(r'\d+')


def bool_literal():
    return _(r'(TRUE|FALSE)\b')


def builtin_set():
    return _(r'(NAT1|NAT|INT|BOOL)\b')


def type_expr():
    return [_(r'INT\b'), _(r'BOOL\b'), (_(r'POW\b'), '(', type_expr, ')'), identifier]


# --- expressions, loosest first: set operators, interval, + -, * div mod, unary minus

def expression():
    return range_expr, ZeroOrMore(_(r'\\/|/\\|\\(?!/)'), range_expr)


def range_expr():
    return additive, Optional(_(r'\.\.'), additive)


def additive():
    return term, ZeroOrMore(_(r'\+|-'), term)


def term():
    return factor, ZeroOrMore(_(r'\*|div\b|mod\b'), factor)


def factor():
    return [(_(r'-'), factor), primary]


def empty_set():
    return _(r'\{\s*\}')


def set_extension():
    return '{', expression, ZeroOrMore(',', expression), '}'


def card_expr():
    return _(r'card\b'), '(', expression, ')'


def primary():
    return [integer, bool_literal, card_expr, empty_set, set_extension, builtin_set, identifier,
            ('(', expression, ')')]


# --- predicates, loosest first: <=>, =>, or, &, not / quantifiers / atoms

def predicate():
    return implication, ZeroOrMore(_(r'<=>'), implication)


def implication():
    return disjunction, Optional(_(r'=>'), implication)


def disjunction():
    return conjunction, ZeroOrMore(_(r'or\b'), conjunction)


def conjunction():
    return unary_pred, ZeroOrMore(_(r'&'), unary_pred)


def unary_pred():
    return [(_(r'not\b'), unary_pred), quantified, atom_pred]


def binder():
    return identifier, Optional(':', type_expr)


def quantified():
    return _(r'[#!]'), binder, ZeroOrMore(',', binder), '.', '(', predicate, ')'


def rel_op():
    return _(r'/<:|<:|/:|/=|<=(?!>)|>=|<(?![=:])|>|=(?!>)|:(?!=)')


def comparison():
    return expression, rel_op, expression


def atom_pred():
    return [comparison, bool_literal, ('(', predicate, ')')]


# --- machine structure

def labelled_pred():
    return [(identifier, ':', predicate), predicate]


def clause_list():
    return labelled_pred, ZeroOrMore(';', labelled_pred)


def identifier_list():
    return identifier, ZeroOrMore(',', identifier)


def sort_decl():
    return identifier, '=', '{', identifier_list, '}'


def sets_clause():
    return _(r'SETS\b'), sort_decl, ZeroOrMore(';', sort_decl)


def constants_clause():
    return _(r'CONSTANTS\b'), identifier_list


def axioms_clause():
    return _(r'AXIOMS\b'), clause_list


def variables_clause():
    return _(r'VARIABLES\b'), identifier_list


def invariants_clause():
    return _(r'INVARIANTS\b'), clause_list


def assignment():
    return identifier, ':=', expression


def actions():
    return [_(r'skip\b'), (assignment, ZeroOrMore('||', assignment))]


def param_list():
    return _(r'ANY\b'), binder, ZeroOrMore(',', binder)


def guard_list():
    return _(r'WHEN\b'), clause_list


def initialisation():
    return _(r'INITIALISATION\b'), '=', _(r'BEGIN\b'), actions, _(r'END\b')


def guarded_event():
    return (identifier, '=', [(param_list, Optional(guard_list)), guard_list],
            _(r'THEN\b'), actions, _(r'END\b'))


def plain_event():
    return identifier, '=', _(r'BEGIN\b'), actions, _(r'END\b')


def event():
    return [initialisation, guarded_event, plain_event]


def events_clause():
    return _(r'EVENTS\b'), event, ZeroOrMore(';', event)


def machine():
    return (_(r'MACHINE\b'), identifier, Optional(sets_clause), Optional(constants_clause),
            Optional(axioms_clause), Optional(variables_clause), Optional(invariants_clause),
            Optional(events_clause), _(r'END\b'), EOF)


def goal():
    return predicate, EOF


# ==========================================
# VISITOR
# ==========================================

@dataclass(frozen=True)
class _Name:
    text: str
    position: int


@dataclass(frozen=True)
class _Section:
    kind: str
    items: Tuple[Any, ...]


def _only(children, kind):
    return [c for c in children if isinstance(c, kind)]


def _ops(children) -> List[str]:
    return [c for c in children if isinstance(c, str)]


class MachineBuilder(PTNodeVisitor):
    """Builds model AST nodes from the arpeggio parse tree."""

    def __init__(self, parser, **kwargs):
        super().__init__(**kwargs)
        self.parser = parser

    def _linecol(self, position: int) -> Tuple[int, int]:
        return self.parser.pos_to_linecol(position)

    def _duplicate(self, what: str, name: _Name):
        line, col = self._linecol(name.position)
        return DuplicateDeclarationError(f"duplicate {what} '{name.text}'", line, col)

    # --- terminals

    def visit_identifier(self, node, children):
        return _Name(node.value, node.position)

    def visit_integer(self, node, children):
        return IntLit(int(node.value))

    def visit_bool_literal(self, node, children):
        return BoolLit(node.value == 'TRUE')

    def visit_builtin_set(self, node, children):
        return BuiltinSet(node.value)

    def visit_empty_set(self, node, children):
        return EmptySet()

    def visit_rel_op(self, node, children):
        return node.value

    def visit_type_expr(self, node, children):
        inner = _only(children, Ty)
        if inner:
            return set_of(inner[0])
        names = _only(children, _Name)
        if names:
            return sort_type(names[0].text)
        return INT if _ops(children)[0] == 'INT' else BOOL

    # --- expressions

    def _fold(self, children, build):
        result = None
        op = None
        for child in children:
            if isinstance(child, str):
                op = child
            elif result is None:
                result = child
            else:
                result = build(op, result, child)
        return result

    def visit_expression(self, node, children):
        return self._fold(children, lambda op, l, r: SetOp(_SET_OPS[op], l, r))

    def visit_range_expr(self, node, children):
        exprs = _only(children, Expr)
        if len(exprs) == 1:
            return exprs[0]
        return Interval(exprs[0], exprs[1])

    def visit_additive(self, node, children):
        return self._fold(children, lambda op, l, r: ArithOp(op, l, r))

    def visit_term(self, node, children):
        return self._fold(children, lambda op, l, r: ArithOp(op, l, r))

    def visit_factor(self, node, children):
        exprs = _only(children, Expr)
        if '-' in _ops(children):
            return Negate(exprs[0])
        return exprs[0]

    def visit_set_extension(self, node, children):
        return SetLit(tuple(_only(children, Expr)))

    def visit_card_expr(self, node, children):
        return Card(_only(children, Expr)[0])

    def visit_primary(self, node, children):
        names = _only(children, _Name)
        if names:
            return Ident(names[0].text)
        return _only(children, Expr)[0]

    # --- predicates

    def visit_predicate(self, node, children):
        return self._fold(children, lambda op, l, r: Equiv(l, r))

    def visit_implication(self, node, children):
        preds = _only(children, Pred)
        if len(preds) == 1:
            return preds[0]
        return Implies(preds[0], preds[1])

    def visit_disjunction(self, node, children):
        preds = _only(children, Pred)
        return preds[0] if len(preds) == 1 else Or(tuple(preds))

    def visit_conjunction(self, node, children):
        preds = _only(children, Pred)
        return preds[0] if len(preds) == 1 else And(tuple(preds))

    def visit_unary_pred(self, node, children):
        preds = _only(children, Pred)
        if 'not' in _ops(children):
            return Not(preds[0])
        return preds[0]

    def visit_binder(self, node, children):
        name = _only(children, _Name)[0]
        types = _only(children, Ty)
        return Binder(name.text, types[0] if types else None)

    def visit_quantified(self, node, children):
        binders = _only(children, Binder)
        seen = set()
        for b in binders:
            if b.name in seen:
                line, col = self._linecol(node.position)
                raise DuplicateDeclarationError(f"duplicate binder '{b.name}'", line, col)
            seen.add(b.name)
        body = _only(children, Pred)[0]
        quant = Exists if _ops(children)[0] == '#' else Forall
        return quant(tuple(binders), body)

    def visit_comparison(self, node, children):
        exprs = _only(children, Expr)
        op = _ops(children)[0]
        return Rel(op, exprs[0], exprs[1])

    def visit_atom_pred(self, node, children):
        lits = _only(children, BoolLit)
        if lits:
            return BoolConst(lits[0].value)
        return _only(children, Pred)[0]

    def visit_goal(self, node, children):
        return _only(children, Pred)[0]

    # --- machine structure

    def visit_labelled_pred(self, node, children):
        line, col = self._linecol(node.position)
        names = _only(children, _Name)
        label = names[0].text if names else None
        return Clause(label, _only(children, Pred)[0], line, col)

    def visit_clause_list(self, node, children):
        return _Section('clauses', tuple(_only(children, Clause)))

    def visit_identifier_list(self, node, children):
        return _Section('names', tuple(_only(children, _Name)))

    def visit_sort_decl(self, node, children):
        name = _only(children, _Name)[0]
        elements = _only(children, _Section)[0].items
        line, _col = self._linecol(node.position)
        return _Section('sort', (name, elements, line))

    def visit_sets_clause(self, node, children):
        return _Section('SETS', tuple(s.items for s in _only(children, _Section)))

    def visit_constants_clause(self, node, children):
        return _Section('CONSTANTS', _only(children, _Section)[0].items)

    def visit_variables_clause(self, node, children):
        return _Section('VARIABLES', _only(children, _Section)[0].items)

    def visit_axioms_clause(self, node, children):
        return _Section('AXIOMS', _only(children, _Section)[0].items)

    def visit_invariants_clause(self, node, children):
        return _Section('INVARIANTS', _only(children, _Section)[0].items)

    def visit_assignment(self, node, children):
        target = _only(children, _Name)[0]
        return (target, Assignment(target.text, _only(children, Expr)[0]))

    def visit_actions(self, node, children):
        pairs = [c for c in children if isinstance(c, tuple)]
        seen = set()
        for target, _assignment in pairs:
            if target.text in seen:
                raise self._duplicate('assignment to', target)
            seen.add(target.text)
        return _Section('actions', tuple(a for _t, a in pairs))

    def visit_param_list(self, node, children):
        return _Section('params', tuple(_only(children, Binder)))

    def visit_guard_list(self, node, children):
        return _Section('guards', _only(children, _Section)[0].items)

    def _event(self, node, children, name: str) -> Event:
        sections = {s.kind: s.items for s in _only(children, _Section)}
        line, _col = self._linecol(node.position)
        return Event(
            name=name,
            params=sections.get('params', ()),
            guards=sections.get('guards', ()),
            actions=sections.get('actions', ()),
            line=line,
        )

    def visit_initialisation(self, node, children):
        return (_Name('INITIALISATION', node.position), self._event(node, children, 'INITIALISATION'))

    def visit_guarded_event(self, node, children):
        name = _only(children, _Name)[0]
        return (name, self._event(node, children, name.text))

    def visit_plain_event(self, node, children):
        return self.visit_guarded_event(node, children)

    def visit_events_clause(self, node, children):
        return _Section('EVENTS', tuple(c for c in children if isinstance(c, tuple)))

    def visit_machine(self, node, children):
        name = _only(children, _Name)[0]
        sections: Dict[str, Tuple[Any, ...]] = {s.kind: s.items for s in _only(children, _Section)}

        declared: Dict[str, _Name] = {}

        def declare(n: _Name, what: str):
            if n.text in declared:
                raise self._duplicate(what, n)
            declared[n.text] = n

        sorts = []
        for sort_name, elements, line in sections.get('SETS', ()):
            declare(sort_name, 'set')
            for element in elements:
                declare(element, 'set element')
            sorts.append(SortDecl(sort_name.text, tuple(e.text for e in elements), line))

        constants = []
        for n in sections.get('CONSTANTS', ()):
            declare(n, 'constant')
            constants.append(Binder(n.text))
        variables = []
        for n in sections.get('VARIABLES', ()):
            declare(n, 'variable')
            variables.append(Binder(n.text))

        axioms = sections.get('AXIOMS', ())
        invariants = sections.get('INVARIANTS', ())
        labels = set()
        for clause in axioms + invariants:
            if clause.label is None:
                continue
            if clause.label in labels:
                raise DuplicateDeclarationError(f"duplicate label '{clause.label}'", clause.line, clause.col)
            labels.add(clause.label)

        init = None
        events = []
        event_names = set()
        for event_name, ev in sections.get('EVENTS', ()):
            if ev.name in event_names:
                raise self._duplicate('event', event_name)
            event_names.add(ev.name)
            guard_labels = set()
            for clause in ev.guards:
                if clause.label is not None and clause.label in guard_labels:
                    raise DuplicateDeclarationError(
                        f"duplicate guard label '{clause.label}' in event {ev.name}", clause.line, clause.col)
                guard_labels.add(clause.label)
            if ev.name == 'INITIALISATION':
                init = ev
            else:
                events.append(ev)

        return Machine(
            name=name.text,
            sorts=tuple(sorts),
            constants=tuple(constants),
            axioms=tuple(axioms),
            variables=tuple(variables),
            invariants=tuple(invariants),
            init=init,
            events=tuple(events),
        )


# ==========================================
# ENTRY POINTS
# ==========================================

_PARSERS: Dict[str, ParserPython] = {}
_PARSER_LOCK = threading.Lock()


def _get_parser(root) -> ParserPython:
    """Get the shared parser for a root rule, creating it on first use."""
    key = root.__name__
    if key not in _PARSERS:
        _PARSERS[key] = ParserPython(root, comment_def=comment, memoization=True)
    return _PARSERS[key]


def _parse(root, text: str):
    # arpeggio parsers keep per-parse state, so access is serialized
    with _PARSER_LOCK:
        parser = _get_parser(root)
        try:
            tree = parser.parse(text)
        except NoMatch as e:
            message = str(e)
            line, col = getattr(e, 'line', None), getattr(e, 'col', None)
            if line is None:
                line, col = parser.pos_to_linecol(e.position)
            raise MachineSyntaxError(f"syntax error: {message}", line, col) from None
        return visit_parse_tree(tree, MachineBuilder(parser))


def parse_machine(text: str) -> Machine:
    """
    Parse a machine in the ASCII machine language.

    Args:
        text: Machine source text

    Returns:
        Untyped Machine

    Raises:
        MachineSyntaxError: If the text does not match the grammar
        DuplicateDeclarationError: If a name, label, event or assignment is repeated
    """
    m = _parse(machine, text)
    logger.debug(f"Parsed machine {m.name}: {len(m.constants)} constants, "
                 f"{len(m.variables)} variables, {len(m.events)} events")
    return m


def parse_predicate(text: str) -> Pred:
    """Parse a standalone predicate (goal predicates, tests)."""
    return _parse(goal, text)
