"""
Command line, report and bench tests.

Run with: pytest regression_tests/test_cli_report.py
"""

import json
import shutil
from io import StringIO

import pytest

from conftest import TEST_DATA
from core.cli import BENCH_COLUMNS, bench, check_file, check_text, emit_bench, run
from core.report import (
    EXIT_DEADLOCK, EXIT_INPUT_ERROR, EXIT_NO_DEADLOCK, EXIT_UNKNOWN, EXIT_WD_ERROR,
    annotation, emit_report, exit_code, to_dict,
)


def _corpus(name):
    return str(TEST_DATA / name)


def _run(*argv):
    out = StringIO()
    code = run(list(argv), out=out)
    return code, out.getvalue()


# ==========================================
# EXIT CODES
# ==========================================

@pytest.mark.parametrize('argv, expected', [
    (['cbc', _corpus('minset_v1.mch')], EXIT_DEADLOCK),
    (['cbc', _corpus('minset_v2.mch')], EXIT_DEADLOCK),
    (['cbc', _corpus('minset_v3.mch')], EXIT_NO_DEADLOCK),
    (['cbc', _corpus('div_wd.mch')], EXIT_WD_ERROR),
    (['mc', _corpus('minset_v1.mch')], EXIT_DEADLOCK),
    (['mc', _corpus('minset_v2.mch')], EXIT_NO_DEADLOCK),
    (['mc', _corpus('div_wd.mch')], EXIT_NO_DEADLOCK),
    (['mc', _corpus('minset_v2.mch'), '--max-outdegree', '1'], EXIT_UNKNOWN),
    (['cbc', _corpus('minset_v3.mch'), '--events', 'nope'], EXIT_INPUT_ERROR),
    (['cbc', _corpus('missing.mch')], EXIT_INPUT_ERROR),
    (['cbc', _corpus('counter.mch'), '--goal', 'Counter = TRUE'], EXIT_INPUT_ERROR),
])
def test_exit_codes(argv, expected):
    code, _output = _run(*argv)
    assert code == expected


def test_text_report():
    code, output = _run('cbc', _corpus('minset_v1.mch'))

    assert code == EXIT_DEADLOCK
    assert 'Result:  DEADLOCK FOUND' in output
    assert 'State:' in output
    assert 'Guards:' in output


def test_mc_text_report_has_trace():
    _code, output = _run('mc', _corpus('minset_v1.mch'))
    assert 'Trace:' in output
    assert 'INITIALISATION' in output


# ==========================================
# JSON REPORTS
# ==========================================

def test_json_schema():
    code, output = _run('cbc', _corpus('minset_v2.mch'), '--json')
    data = json.loads(output)

    assert code == EXIT_DEADLOCK
    assert set(data) == {'version', 'machine', 'mode', 'options', 'result', 'guards', 'timings'}
    assert data['machine'] == 'MinSet'
    assert data['mode'] == 'cbc'
    assert data['result']['kind'] == 'deadlock'
    assert set(data['result']['state']) == {'N', 's', 'min', 'z'}
    assert isinstance(data['result']['state']['s'], list)
    assert [g['event'] for g in data['guards']] == ['acc', 'rej', 'get']
    assert set(data['timings']) == {'parseMs', 'buildMs', 'solveMs', 'totalMs'}


def test_goal_reports_dropped_events():
    code, output = _run('cbc', _corpus('counter.mch'), '--goal', 'Counter = 10', '--json')
    data = json.loads(output)

    assert code == EXIT_NO_DEADLOCK
    assert data['result']['droppedEvents'] == ['inc', 'reset']
    assert data['options'] == {'goal': 'Counter = 10'}


def test_wd_report_names_the_expression():
    report = check_file(_corpus('div_wd.mch'), 'cbc')
    data = to_dict(report)

    assert exit_code(report) == EXIT_WD_ERROR
    assert data['result']['kind'] == 'wd_error'
    assert 'x div y' in data['result']['reason']


def test_mc_json_trace():
    report = check_file(_corpus('minset_v1.mch'), 'mc')
    data = json.loads(emit_report(report, 'json'))

    assert data['result']['kind'] == 'deadlock'
    assert data['result']['trace'][0]['event'] == 'INITIALISATION'
    assert data['result']['invariantViolations'] == []


def test_syntax_error_is_an_input_error():
    report = check_text('MACHINE broken VARIABLES', 'cbc', name='broken')

    assert exit_code(report) == EXIT_INPUT_ERROR
    assert report.machine == 'broken'
    assert to_dict(report)['result']['kind'] == 'input_error'


def test_unknown_mode_rejected():
    with pytest.raises(ValueError):
        check_text('MACHINE m END', 'prove')


def test_unknown_report_format_rejected():
    report = check_file(_corpus('counter.mch'), 'cbc')
    with pytest.raises(ValueError):
        emit_report(report, 'xml')


# ==========================================
# ANNOTATIONS
# ==========================================

def test_state_limit_annotation():
    report = check_file(_corpus('scheduler5.mch'), 'mc', {'max_states': 100})

    assert exit_code(report) == EXIT_UNKNOWN
    assert annotation(report) == 'no deadlock found after visiting 100 states'


def test_outdegree_annotation():
    report = check_file(_corpus('minset_v2.mch'), 'mc', {'max_outdegree': 1})
    assert annotation(report) == 'not all transitions computed; maximum out-degree 1'


def test_exhausted_search_has_no_annotation():
    report = check_file(_corpus('minset_v2.mch'), 'mc')
    assert annotation(report) is None


# ==========================================
# BENCH
# ==========================================

@pytest.fixture
def small_corpus(tmp_path):
    for name in ('minset_v2.mch', 'counter.mch', 'counter.opts', 'div_wd.mch'):
        shutil.copy(TEST_DATA / name, tmp_path / name)
    (tmp_path / 'broken.mch').write_text('MACHINE broken VARIABLES')
    return tmp_path


def test_bench_table(small_corpus):
    df = bench(str(small_corpus), workers=2, max_states=1000)

    assert list(df.columns) == BENCH_COLUMNS
    assert list(df['file']) == ['broken.mch', 'counter.mch', 'div_wd.mch', 'minset_v2.mch']
    rows = df.set_index('file')
    assert rows.loc['minset_v2.mch', 'cbc_result'] == 'deadlock'
    assert rows.loc['minset_v2.mch', 'mc_result'] == 'no deadlock'
    assert rows.loc['counter.mch', 'cbc_result'] == 'no deadlock'
    assert rows.loc['div_wd.mch', 'cbc_result'] == 'wd error'
    assert rows.loc['broken.mch', 'cbc_result'] == 'input error'


def test_bench_json(small_corpus):
    code, output = _run('bench', str(small_corpus), '--json', '--max-states', '1000')
    records = json.loads(output)

    assert code == 0
    assert [r['file'] for r in records] == ['broken.mch', 'counter.mch', 'div_wd.mch', 'minset_v2.mch']
    assert set(records[0]) == set(BENCH_COLUMNS)


def test_bench_empty_directory(tmp_path):
    df = bench(str(tmp_path))

    assert df.empty
    assert emit_bench(df) == '(no machines)'


def test_bench_missing_directory(tmp_path):
    code, _output = _run('bench', str(tmp_path / 'nope'))
    assert code == EXIT_INPUT_ERROR
