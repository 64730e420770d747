#!/usr/bin/env python
"""
Tests that functionapp.py loads and serves the checker endpoints.
This simulates what happens when Azure Functions invokes the HTTP triggers.

Run with: pytest test_functionapp.py
"""

import json
from pathlib import Path

import azure.functions as func
import pytest

import functionapp

TEST_DATA = Path(__file__).parent / 'regression_tests' / 'test_data'


def _call(fn, body=None, method='POST', route='check/cbc'):
    """Invoke a decorated function app handler with a JSON body."""
    handler = fn.build().get_user_function() if hasattr(fn, 'build') else fn
    req = func.HttpRequest(
        method=method,
        url=f'/api/{route}',
        body=json.dumps(body).encode() if body is not None else b'',
        headers={},
        params={},
        route_params={},
    )
    resp = handler(req)
    return resp.status_code, json.loads(resp.get_body())


def _machine(name):
    return (TEST_DATA / name).read_text()


# ==========================================
# HEALTH
# ==========================================

def test_health():
    status, body = _call(functionapp.health_check, method='GET', route='health')

    assert status == 200
    assert body['status'] == 'healthy'
    assert body['service'] == 'Deadlock Checker'


# ==========================================
# SINGLE CHECKS
# ==========================================

def test_cbc_finds_deadlock():
    status, body = _call(functionapp.check_cbc, {'machine': _machine('minset_v2.mch')})

    assert status == 200
    assert body['machine'] == 'MinSet'
    assert body['result']['kind'] == 'deadlock'


def test_cbc_with_goal():
    status, body = _call(functionapp.check_cbc, {
        'machine': _machine('counter.mch'),
        'options': {'goal': 'Counter = 10'},
    })

    assert status == 200
    assert body['result']['kind'] == 'no_deadlock'
    assert body['result']['droppedEvents'] == ['inc', 'reset']


def test_mc_with_state_limit():
    status, body = _call(functionapp.check_mc, {
        'machine': _machine('scheduler5.mch'),
        'options': {'maxStates': 100},
    }, route='check/mc')

    assert status == 200
    assert body['result']['kind'] == 'no_deadlock_within_bounds'
    assert body['result']['statesVisited'] == 100


def test_wd_error_status():
    status, body = _call(functionapp.check_cbc, {'machine': _machine('div_wd.mch')})

    assert status == 422
    assert body['result']['kind'] == 'wd_error'


@pytest.mark.parametrize('body', [
    {},
    {'machine': ''},
    {'machine': 'MACHINE broken VARIABLES'},
    {'machine': 'MACHINE m END', 'options': {'colour': 'blue'}},
    {'machine': 'MACHINE m END', 'options': 'fast'},
])
def test_bad_requests(body):
    status, response = _call(functionapp.check_cbc, body)

    assert status == 400
    assert 'error' in response or response['result']['kind'] == 'input_error'


# ==========================================
# BATCH
# ==========================================

def test_batch():
    status, body = _call(functionapp.check_batch, {
        'mode': 'cbc',
        'machines': [
            {'name': 'v2', 'machine': _machine('minset_v2.mch')},
            {'name': 'v3', 'machine': _machine('minset_v3.mch')},
            {'name': 'empty'},
        ],
    }, route='check/batch')

    assert status == 200
    assert body['total_machines'] == 3
    v2, v3, empty = body['results']
    assert (v2['name'], v2['exitCode']) == ('v2', 1)
    assert (v3['name'], v3['exitCode']) == ('v3', 0)
    assert empty['name'] == 'empty' and 'error' in empty


@pytest.mark.parametrize('body', [
    {'machines': []},
    {'machines': 'minset'},
    {'mode': 'prove', 'machines': [{'machine': 'MACHINE m END'}]},
])
def test_batch_bad_requests(body):
    status, response = _call(functionapp.check_batch, body, route='check/batch')

    assert status == 400
    assert 'error' in response
