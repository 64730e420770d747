"""
Command Line
============
Runs a constraint-based (cbc) or explicit-state (mc) deadlock check on a
machine file, or benchmarks both on a corpus directory.

Usage:
    python -m core.cli cbc regression_tests/test_data/minset_v2.mch
    python -m core.cli mc regression_tests/test_data/minset_v1.mch --max-states 100000 --json
    python -m core.cli bench regression_tests/test_data --workers 4

Each ``FILE.mch`` of a bench corpus may have a ``FILE.opts`` sidecar holding
flag lines (e.g. ``--goal "Counter = 10"``) applied to both modes.
"""

import argparse
import logging
import shlex
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence

import pandas as pd

from .cbc import CheckOptions, DeadlockFound, check_deadlock, guard_table
from .config import SETTINGS, Settings, with_overrides
from .errors import CheckerError, TypeCheckError
from .evaluator import Evaluator
from .machine_parser import parse_machine, parse_predicate
from .mc import DeadlockFound as McDeadlockFound, McOptions, model_check
from .report import (
    EXIT_INPUT_ERROR, Aborted, InputFailure, Report, annotation, emit_report, exit_code, summary,
)
from .typecheck import typecheck, typecheck_predicate

logger = logging.getLogger(__name__)

DEFAULT_OPTIONS: Dict[str, Any] = {
    'goal': None,
    'events': None,
    'timeout_ms': None,
    'event_timeout_ms': None,
    'maxint': None,
    'max_states': None,
    'max_outdegree': None,
    'order': 'bfs',
    'simplify': True,
    'partition': True,
    'sort': True,
    'filter': True,
    'keep_irrelevant': False,
    'trace': False,
}

BENCH_COLUMNS = ['file', 'machine', 'cbc_ms', 'cbc_result', 'mc_ms', 'mc_result', 'mc_states', 'note']


# ==========================================
# CHECKS
# ==========================================

def _ms(start: float) -> float:
    return round((time.perf_counter() - start) * 1000.0, 3)


def _settings_for(options: Dict[str, Any], base: Optional[Settings] = None) -> Settings:
    return with_overrides(base or SETTINGS, maxint=options.get('maxint'), timeout_ms=options.get('timeout_ms'),
                          event_timeout_ms=options.get('event_timeout_ms'), max_states=options.get('max_states'))


def check_text(text: str, mode: str, options: Optional[Dict[str, Any]] = None, name: Optional[str] = None,
               settings: Optional[Settings] = None) -> Report:
    """
    Parse, typecheck and check a machine given as text.

    Args:
        text: Machine source
        mode: 'cbc' or 'mc'
        options: Check options (keys of DEFAULT_OPTIONS)
        name: Name used in the report when the machine cannot be parsed
        settings: Base settings the options override

    Returns:
        Report; input problems become an InputFailure result rather than an exception
    """
    if mode not in ('cbc', 'mc'):
        raise ValueError(f"unknown mode '{mode}'")
    options = {**DEFAULT_OPTIONS, **(options or {})}
    timings: Dict[str, float] = {}
    total = time.perf_counter()
    machine_name = name or '?'

    start = time.perf_counter()
    try:
        settings = _settings_for(options, settings)
        machine = typecheck(parse_machine(text))
        machine_name = machine.name
        goal = None
        if options['goal']:
            goal = typecheck_predicate(machine, parse_predicate(options['goal']))
    except (CheckerError, ValueError) as e:
        logger.error(f"Input error in {machine_name}: {e}")
        timings['parseMs'] = _ms(start)
        timings['totalMs'] = _ms(total)
        return Report(machine_name, mode, InputFailure(str(e)), _echo(options), timings=timings)
    timings['parseMs'] = _ms(start)
    logger.info(f"Parsed and typechecked {machine.name} in {timings['parseMs']} ms")

    guards = []
    try:
        if mode == 'cbc':
            events = options['events']
            result = check_deadlock(machine, CheckOptions(
                goal=goal, events=events, event_timeout_ms=options['event_timeout_ms'],
                timeout_ms=options['timeout_ms'], filter=options['filter'], simplify=options['simplify'],
                sort=options['sort'], partition=options['partition'],
                drop_irrelevant=not options['keep_irrelevant'], settings=settings, trace=options['trace']))
            timings['buildMs'] = result.stats.timings.get('buildMs', 0.0) + result.stats.timings.get('filterMs', 0.0)
            timings['solveMs'] = result.stats.timings.get('solveMs', 0.0)
            if isinstance(result, DeadlockFound):
                guards = result.guards
        else:
            start = time.perf_counter()
            result = model_check(machine, McOptions(
                max_states=options['max_states'], goal=goal, max_outdegree=options['max_outdegree'],
                order=options['order'], settings=settings))
            timings['buildMs'] = 0.0
            timings['solveMs'] = _ms(start)
            if isinstance(result, McDeadlockFound):
                evaluator = Evaluator(machine, settings.maxint, settings.nested_set_universe_limit)
                guards = guard_table(machine, result.state, evaluator)
    except TypeCheckError as e:
        result = InputFailure(str(e))
    except CheckerError as e:
        logger.warning(f"{machine.name}: check aborted: {e}")
        result = Aborted(str(e))
    timings['totalMs'] = _ms(total)
    return Report(machine.name, mode, result, _echo(options), guards, timings)


def _echo(options: Dict[str, Any]) -> Dict[str, Any]:
    """Options as they appear in reports (camelCase, non-default values only)."""
    out = {}
    for key, value in options.items():
        if value == DEFAULT_OPTIONS.get(key):
            continue
        head, *rest = key.split('_')
        out[head + ''.join(w.capitalize() for w in rest)] = value
    return out


def check_file(path: str, mode: str, options: Optional[Dict[str, Any]] = None,
               settings: Optional[Settings] = None) -> Report:
    try:
        text = Path(path).read_text()
    except OSError as e:
        return Report(Path(path).stem, mode, InputFailure(f"cannot read {path}: {e.strerror}"),
                      _echo({**DEFAULT_OPTIONS, **(options or {})}))
    return check_text(text, mode, options, Path(path).stem, settings)


# ==========================================
# ARGUMENTS
# ==========================================

def _add_check_flags(p: argparse.ArgumentParser):
    p.add_argument('file', help="machine file (.mch)")
    p.add_argument('--goal', help="predicate of interest, e.g. \"Counter = 10\"")
    p.add_argument('--events', type=lambda s: [e.strip() for e in s.split(',') if e.strip()],
                   help="comma-separated events to consider")
    p.add_argument('--timeout', dest='timeout_ms', type=int, help="global solver budget in ms")
    p.add_argument('--event-timeout', dest='event_timeout_ms', type=int, help="per-event filter budget in ms")
    p.add_argument('--maxint', type=int, help="integer bound MAXINT")
    p.add_argument('--max-states', dest='max_states', type=int, help="model checking state limit")
    p.add_argument('--max-outdegree', dest='max_outdegree', type=int, help="successors computed per state")
    p.add_argument('--order', choices=('bfs', 'dfs'), default='bfs', help="model checking search order")
    p.add_argument('--no-simplify', dest='simplify', action='store_false')
    p.add_argument('--no-partition', dest='partition', action='store_false')
    p.add_argument('--no-sort', dest='sort', action='store_false')
    p.add_argument('--no-filter', dest='filter', action='store_false')
    p.add_argument('--keep-irrelevant', dest='keep_irrelevant', action='store_true')
    p.add_argument('--json', action='store_true', help="emit the structured report")
    p.add_argument('--trace-log', dest='trace', action='store_true', help="log kernel propagation and decisions")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog='bdead', description="Deadlock checking for Event-B style machines")
    sub = parser.add_subparsers(dest='mode', required=True)
    _add_check_flags(sub.add_parser('cbc', help="constraint-based deadlock check"))
    _add_check_flags(sub.add_parser('mc', help="explicit-state model check"))
    bench_parser = sub.add_parser('bench', help="compare cbc and mc on a corpus directory")
    bench_parser.add_argument('corpus', help="directory of .mch files")
    bench_parser.add_argument('--workers', type=int, help="files checked concurrently")
    bench_parser.add_argument('--max-states', dest='max_states', type=int, help="model checking state limit")
    bench_parser.add_argument('--timeout', dest='timeout_ms', type=int, help="cbc budget in ms")
    bench_parser.add_argument('--json', action='store_true')
    return parser


def options_from_args(args: argparse.Namespace) -> Dict[str, Any]:
    return {key: getattr(args, key) for key in DEFAULT_OPTIONS if hasattr(args, key)}


# ==========================================
# BENCH
# ==========================================

def _sidecar_options(path: Path) -> Dict[str, Any]:
    sidecar = path.with_suffix('.opts')
    extra: List[str] = []
    if sidecar.exists():
        for line in sidecar.read_text().splitlines():
            line = line.strip()
            if line and not line.startswith('#'):
                extra.extend(shlex.split(line))
    args = build_parser().parse_args(['cbc', str(path)] + extra)
    return options_from_args(args)


def _bench_row(path: Path, max_states: Optional[int], timeout_ms: Optional[int]) -> Dict[str, Any]:
    row: Dict[str, Any] = {'file': path.name, 'machine': path.stem}
    try:
        options = _sidecar_options(path)
        if timeout_ms is not None and options.get('timeout_ms') is None:
            options['timeout_ms'] = timeout_ms
        cbc_report = check_file(str(path), 'cbc', options)
        mc_options = dict(options)
        if mc_options.get('max_states') is None:
            mc_options['max_states'] = max_states or SETTINGS.bench_max_states
        mc_report = check_file(str(path), 'mc', mc_options)
    except Exception as e:
        logger.warning(f"Bench failed on {path.name}: {e}", exc_info=True)
        row.update({'cbc_result': 'error', 'mc_result': 'error', 'note': str(e)})
        return row
    row['machine'] = cbc_report.machine
    row['cbc_ms'] = cbc_report.timings.get('totalMs')
    row['cbc_result'] = summary(cbc_report)
    row['mc_ms'] = mc_report.timings.get('totalMs')
    row['mc_result'] = summary(mc_report)
    stats = getattr(mc_report.result, 'stats', None)
    row['mc_states'] = getattr(stats, 'states_visited', None)
    notes = [n for n in (annotation(cbc_report), annotation(mc_report)) if n]
    row['note'] = '; '.join(notes) if notes else ''
    return row


def bench(corpus_dir: str, workers: Optional[int] = None, max_states: Optional[int] = None,
          timeout_ms: Optional[int] = None) -> pd.DataFrame:
    """
    Run cbc and mc on every .mch file of a directory.

    Args:
        corpus_dir: Directory holding the machines (and optional .opts sidecars)
        workers: Files checked concurrently
        max_states: Model checking state limit (bench default from settings)
        timeout_ms: CBC budget per file

    Returns:
        One row per file, ordered by file name; failures are recorded in their row

    Raises:
        ValueError: If corpus_dir is not a directory
    """
    root = Path(corpus_dir)
    if not root.is_dir():
        raise ValueError(f"not a directory: {corpus_dir}")
    files = sorted(root.glob('*.mch'))
    logger.info(f"Benchmarking {len(files)} machine(s) from {corpus_dir}")
    with ThreadPoolExecutor(max_workers=workers or SETTINGS.bench_workers) as pool:
        rows = list(pool.map(lambda p: _bench_row(p, max_states, timeout_ms), files))
    return pd.DataFrame(rows, columns=BENCH_COLUMNS)


def emit_bench(df: pd.DataFrame, fmt: str = 'text') -> str:
    if fmt == 'json':
        return df.to_json(orient='records', indent=2)
    if df.empty:
        return "(no machines)"
    return df.fillna('').to_string(index=False)


# ==========================================
# ENTRY POINT
# ==========================================

def run(argv: Optional[Sequence[str]] = None, out=None) -> int:
    """
    Run the command line and write the report to out (stdout by default).

    Returns:
        Process exit code
    """
    out = out or sys.stdout
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO)
    if getattr(args, 'trace', False):
        logging.getLogger('core.kernel').setLevel(logging.DEBUG)

    if args.mode == 'bench':
        try:
            df = bench(args.corpus, args.workers, args.max_states, args.timeout_ms)
        except ValueError as e:
            logger.error(str(e))
            return EXIT_INPUT_ERROR
        print(emit_bench(df, 'json' if args.json else 'text'), file=out)
        return 0

    report = check_file(args.file, args.mode, options_from_args(args))
    print(emit_report(report, 'json' if args.json else 'text'), file=out)
    return exit_code(report)


def main() -> int:
    return run(sys.argv[1:])


if __name__ == '__main__':
    sys.exit(main())
