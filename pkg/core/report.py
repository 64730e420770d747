"""
Check Reports
=============
One Report value per check, rendered either as text for people or as a JSON
document with a stable schema. Both renderings come from the same value, and
the process exit code is a function of the result alone.

JSON schema:
    {version, machine, mode, options,
     result: {kind, state?, trace?, statesVisited?, boundsQualified, reason?,
              droppedEvents?, invariantViolations?, truncatedStates?},
     guards: [{event, enabled, falsifiedConjunct?, filtered?}],
     timings: {parseMs, buildMs, solveMs, totalMs}}

Exit codes:
    0 no deadlock, 1 deadlock, 2 unknown or budget exhausted, 3 input error,
    4 well-definedness error
"""

import json
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional

from . import cbc, mc
from .cbc import GuardStatus
from .model import Valuation, format_value, pretty, value_to_json

VERSION = '1.0.0'

EXIT_NO_DEADLOCK = 0
EXIT_DEADLOCK = 1
EXIT_UNKNOWN = 2
EXIT_INPUT_ERROR = 3
EXIT_WD_ERROR = 4


@dataclass
class InputFailure:
    """The machine, goal or options could not be read, parsed or typechecked."""

    message: str


@dataclass
class Aborted:
    """The check stopped for a reason other than a verdict (e.g. an unenumerable domain)."""

    message: str


@dataclass
class Report:
    machine: str
    mode: str
    result: Any
    options: Dict[str, Any] = field(default_factory=dict)
    guards: List[GuardStatus] = field(default_factory=list)
    timings: Dict[str, float] = field(default_factory=dict)
    version: str = VERSION


def result_kind(result: Any) -> str:
    if isinstance(result, (cbc.DeadlockFound, mc.DeadlockFound)):
        return 'deadlock'
    if isinstance(result, (cbc.NoDeadlock, mc.NoDeadlockExhausted)):
        return 'no_deadlock'
    if isinstance(result, mc.NoDeadlockWithin):
        return 'no_deadlock_within_bounds'
    if isinstance(result, mc.McError) or (isinstance(result, cbc.Unknown) and result.wd_error is not None):
        return 'wd_error'
    if isinstance(result, InputFailure):
        return 'input_error'
    return 'unknown'


_EXIT_CODES = {
    'deadlock': EXIT_DEADLOCK,
    'no_deadlock': EXIT_NO_DEADLOCK,
    'no_deadlock_within_bounds': EXIT_UNKNOWN,
    'wd_error': EXIT_WD_ERROR,
    'input_error': EXIT_INPUT_ERROR,
    'unknown': EXIT_UNKNOWN,
}


def exit_code(report: Report) -> int:
    return _EXIT_CODES[result_kind(report.result)]


def _state_json(v: Valuation) -> Dict[str, Any]:
    return {name: value_to_json(value) for name, value in v.items()}


def _trace_json(trace: List[mc.Transition]) -> List[Dict[str, Any]]:
    return [{'event': t.event, 'params': _state_json(t.params), 'state': _state_json(t.state)} for t in trace]


def result_to_dict(result: Any) -> Dict[str, Any]:
    out: Dict[str, Any] = {'kind': result_kind(result), 'boundsQualified': bool(getattr(result, 'bounds_qualified', False))}
    if isinstance(result, cbc.DeadlockFound):
        out['state'] = _state_json(result.valuation)
    if isinstance(result, mc.DeadlockFound):
        out['state'] = _state_json(result.state)
        out['trace'] = _trace_json(result.trace)
    if isinstance(result, mc.McError):
        out['reason'] = str(result.error)
        out['trace'] = _trace_json(result.trace)
    if isinstance(result, cbc.Unknown):
        out['reason'] = result.reason
    if isinstance(result, (InputFailure, Aborted)):
        out['reason'] = result.message
    stats = getattr(result, 'stats', None)
    if isinstance(stats, cbc.CbcStats):
        out['consideredEvents'] = stats.considered
        out['droppedEvents'] = stats.dropped
        out['components'] = stats.components
        out['relevantComponents'] = stats.relevant_components
        out['decisions'] = stats.decisions
    if isinstance(stats, mc.McStats):
        out['statesVisited'] = stats.states_visited
        out['transitions'] = stats.transitions
        out['truncatedStates'] = stats.truncated_states
        out['invariantViolations'] = [_state_json(v) for v in stats.invariant_violations]
    return out


def to_dict(report: Report) -> Dict[str, Any]:
    """The structured (JSON) form of a report."""
    guards = []
    for g in report.guards:
        row: Dict[str, Any] = {'event': g.event, 'enabled': g.enabled}
        if g.falsified is not None:
            row['falsifiedConjunct'] = pretty(g.falsified)
        if g.filtered:
            row['filtered'] = True
        guards.append(row)
    return {
        'version': report.version,
        'machine': report.machine,
        'mode': report.mode,
        'options': report.options,
        'result': result_to_dict(report.result),
        'guards': guards,
        'timings': report.timings,
    }


_HEADLINES = {
    'deadlock': 'DEADLOCK FOUND',
    'no_deadlock': 'NO DEADLOCK',
    'no_deadlock_within_bounds': 'NO DEADLOCK FOUND WITHIN BOUNDS',
    'wd_error': 'WELL-DEFINEDNESS ERROR',
    'input_error': 'INPUT ERROR',
    'unknown': 'UNKNOWN',
}


def _text(report: Report) -> str:
    data = to_dict(report)
    result = data['result']
    lines = [f"Machine: {report.machine} ({report.mode})", f"Result:  {_HEADLINES[result['kind']]}"]
    if result['boundsQualified']:
        lines.append("         (integers clipped to -MAXINT..MAXINT)")
    if 'reason' in result:
        lines.append(f"Reason:  {result['reason']}")
    if result.get('droppedEvents'):
        lines.append(f"Dropped events (never enabled under the assumptions): {', '.join(result['droppedEvents'])}")
    if 'statesVisited' in result:
        lines.append(f"States visited: {result['statesVisited']}, transitions: {result['transitions']}")
        if result['truncatedStates']:
            lines.append(f"Not all transitions computed in {result['truncatedStates']} state(s)")
    for v in result.get('invariantViolations', [])[:5]:
        lines.append(f"WARNING invariant violated in reachable state {v}")

    r = report.result
    state = r.valuation if isinstance(r, cbc.DeadlockFound) else r.state if isinstance(r, mc.DeadlockFound) else None
    if isinstance(r, (mc.DeadlockFound, mc.McError)) and r.trace:
        lines.append("Trace:")
        for i, step in enumerate(r.trace):
            params = ', '.join(f"{k}={format_value(v)}" for k, v in step.params.items())
            label = f"{step.event}({params})" if params else step.event
            lines.append(f"  {i:>3} {label}")
    if state is not None:
        lines.append("State:")
        for name, value in state.items():
            lines.append(f"  {name} = {format_value(value)}")
    if report.guards:
        lines.append("Guards:")
        width = max(len(g.event) for g in report.guards)
        for g in report.guards:
            status = 'enabled' if g.enabled else 'disabled'
            detail = f"  false: {pretty(g.falsified)}" if g.falsified is not None else ''
            tag = '  [filtered]' if g.filtered else ''
            lines.append(f"  {g.event:<{width}}  {status}{detail}{tag}")
    if report.timings:
        lines.append("Timings: " + ', '.join(f"{k[:-2]} {v:.1f} ms" for k, v in report.timings.items()))
    return '\n'.join(lines)


def emit_report(report: Report, fmt: str = 'text') -> str:
    """
    Render a report.

    Args:
        report: The report
        fmt: 'text' or 'json'

    Returns:
        The rendered document
    """
    if fmt == 'json':
        return json.dumps(to_dict(report), indent=2, default=str)
    if fmt != 'text':
        raise ValueError(f"unknown report format '{fmt}'")
    return _text(report)


def summary(report: Report) -> str:
    """Short verdict used in bench tables."""
    kind = result_kind(report.result)
    return {'deadlock': 'deadlock', 'no_deadlock': 'no deadlock', 'no_deadlock_within_bounds': 'no deadlock',
            'wd_error': 'wd error', 'input_error': 'input error'}.get(kind, 'unknown')


def annotation(report: Report) -> Optional[str]:
    """Footnote for searches that stopped short of the full state space."""
    r = report.result
    if isinstance(r, mc.NoDeadlockWithin):
        if r.stats.truncated_states:
            return f"not all transitions computed; maximum out-degree {r.stats.max_outdegree}"
        return f"no deadlock found after visiting {r.states_visited:,} states"
    if isinstance(r, (cbc.NoDeadlock, cbc.DeadlockFound)) and r.bounds_qualified:
        return "integers clipped to -MAXINT..MAXINT"
    if isinstance(r, (cbc.Unknown, Aborted, InputFailure)):
        return getattr(r, 'reason', None) or getattr(r, 'message', None)
    return None
