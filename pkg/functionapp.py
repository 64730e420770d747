"""
Azure Function App for Deadlock Checking
========================================
Wrapper for core checking functionality.
Exposes HTTP endpoints for constraint-based checks, model checks, batches
and health checks.
"""

import json
import logging
from typing import Any, Dict

import azure.functions as func

from core.cli import check_text
from core.report import VERSION, exit_code, to_dict, EXIT_INPUT_ERROR, EXIT_WD_ERROR

# Initialize Function App
app = func.FunctionApp()

# Configure logging
logging.basicConfig(level=logging.INFO)
logger = logging.getLogger(__name__)

# Request option names (camelCase) -> checker option names
_OPTION_NAMES = {
    'goal': 'goal',
    'events': 'events',
    'timeoutMs': 'timeout_ms',
    'eventTimeoutMs': 'event_timeout_ms',
    'maxint': 'maxint',
    'maxStates': 'max_states',
    'maxOutdegree': 'max_outdegree',
    'order': 'order',
    'simplify': 'simplify',
    'partition': 'partition',
    'sort': 'sort',
    'filter': 'filter',
    'keepIrrelevant': 'keep_irrelevant',
}


def _json_response(body: Any, status_code: int = 200) -> func.HttpResponse:
    return func.HttpResponse(
        json.dumps(body, indent=2, default=str),
        mimetype="application/json",
        status_code=status_code
    )


def _options(raw: Any) -> Dict[str, Any]:
    """Translate request options, rejecting names the checker does not know."""
    if raw is None:
        return {}
    if not isinstance(raw, dict):
        raise ValueError("options must be an object")
    unknown = sorted(set(raw) - set(_OPTION_NAMES))
    if unknown:
        raise ValueError(f"unknown option(s): {', '.join(unknown)}")
    return {_OPTION_NAMES[key]: value for key, value in raw.items()}


def _status_for(report) -> int:
    code = exit_code(report)
    if code == EXIT_INPUT_ERROR:
        return 400
    if code == EXIT_WD_ERROR:
        return 422
    return 200


def _check(req: func.HttpRequest, mode: str) -> func.HttpResponse:
    try:
        req_body = req.get_json()
        text = req_body.get('machine')

        if not text:
            return _json_response({"error": "machine is required in request body"}, 400)

        options = _options(req_body.get('options'))
        logger.info(f'Running {mode} check')
        report = check_text(text, mode, options)
        logger.info(f'{mode} check of {report.machine} complete: exit code {exit_code(report)}')

        return _json_response(to_dict(report), _status_for(report))

    except ValueError as e:
        logger.error(f'ValueError: {str(e)}')
        return _json_response({"error": str(e)}, 400)
    except Exception as e:
        logger.error(f'Unexpected error: {str(e)}', exc_info=True)
        return _json_response({"error": f"Internal server error: {str(e)}"}, 500)


@app.route(route="health", methods=["GET"], auth_level=func.AuthLevel.ANONYMOUS)
def health_check(req: func.HttpRequest) -> func.HttpResponse:
    """Health check endpoint."""
    logger.info('Health check endpoint called')

    return _json_response({
        "status": "healthy",
        "service": "Deadlock Checker",
        "version": VERSION
    })


@app.route(route="check/cbc", methods=["POST"], auth_level=func.AuthLevel.FUNCTION)
def check_cbc(req: func.HttpRequest) -> func.HttpResponse:
    """
    Constraint-based deadlock check.

    URL: /api/check/cbc
    Method: POST
    Body: {"machine": "MACHINE m ... END", "options": {"goal": "Counter = 10", "timeoutMs": 5000}}
    """
    logger.info('CBC endpoint called')
    return _check(req, 'cbc')


@app.route(route="check/mc", methods=["POST"], auth_level=func.AuthLevel.FUNCTION)
def check_mc(req: func.HttpRequest) -> func.HttpResponse:
    """
    Explicit-state model check.

    URL: /api/check/mc
    Method: POST
    Body: {"machine": "MACHINE m ... END", "options": {"maxStates": 10000, "order": "bfs"}}
    """
    logger.info('MC endpoint called')
    return _check(req, 'mc')


@app.route(route="check/batch", methods=["POST"], auth_level=func.AuthLevel.FUNCTION)
def check_batch(req: func.HttpRequest) -> func.HttpResponse:
    """
    Check multiple machines in batch.

    URL: /api/check/batch
    Method: POST
    Body: {"mode": "cbc", "machines": [{"name": "minset", "machine": "MACHINE ..."}]}
    """
    logger.info('Batch check endpoint called')

    try:
        req_body = req.get_json()
        machines = req_body.get('machines', [])
        mode = req_body.get('mode', 'cbc')

        if not machines or not isinstance(machines, list):
            return _json_response({"error": "machines array is required in request body"}, 400)
        if mode not in ('cbc', 'mc'):
            return _json_response({"error": f"unknown mode '{mode}'"}, 400)

        options = _options(req_body.get('options'))
        results = []

        for item in machines:
            name = item.get('name') if isinstance(item, dict) else None
            try:
                logger.info(f'Checking machine: {name}')
                report = check_text(item['machine'], mode, options, name)
                results.append({
                    "name": name or report.machine,
                    "exitCode": exit_code(report),
                    "report": to_dict(report)
                })

            except Exception as e:
                logger.error(f'Error checking machine {name}: {str(e)}')
                results.append({
                    "name": name,
                    "error": str(e)
                })

        response = {
            "mode": mode,
            "total_machines": len(machines),
            "results": results
        }

        logger.info(f'Batch check complete: {len(results)} machines processed')

        return _json_response(response)

    except ValueError as e:
        logger.error(f'ValueError: {str(e)}')
        return _json_response({"error": str(e)}, 400)
    except Exception as e:
        logger.error(f'Unexpected error: {str(e)}', exc_info=True)
        return _json_response({"error": f"Internal server error: {str(e)}"}, 500)
