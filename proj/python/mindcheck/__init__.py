"""Python bindings for the check-in engine."""

import json

from . import _core
from ._core import (
    BackendError,
    CatalogError,
    DatasetError,
    Error,
    ParseError,
    PersistenceError,
    PreconditionError,
    parse_analysis,
    parse_decision,
    segment,
    turn_kinds,
    user_token,
)

__all__ = [
    "Api",
    "BackendError",
    "CatalogError",
    "DatasetError",
    "Error",
    "ParseError",
    "PersistenceError",
    "PreconditionError",
    "Session",
    "catalog",
    "evaluate",
    "parse_analysis",
    "parse_decision",
    "replay",
    "segment",
    "turn_kinds",
    "user_token",
]


def _script_text(script):
    if script is None:
        return ""
    if isinstance(script, (dict, list)):
        return json.dumps(script)
    with open(script, encoding="utf-8") as f:
        return f.read()


def catalog():
    """The default catalog document."""
    return json.loads(_core.catalog_json())


def evaluate(task, dataset_path, script=None, parallelism=1):
    """Runs an eval; without a script the echo backend answers each label."""
    return json.loads(_core.evaluate(task, str(dataset_path), _script_text(script), parallelism))


def replay(record, script):
    """Regenerates the report of a stored session record."""
    return json.loads(_core.replay(json.dumps(record), _script_text(script)))


class Session:
    """A check-in session against a scripted backend."""

    def __init__(self, user_id, dimensions, script, seed=0, rephrase=True, qtable=None):
        self._s = _core.Session(
            user_id,
            list(dimensions),
            _script_text(script),
            seed,
            rephrase,
            json.dumps(qtable) if qtable is not None else "",
        )

    @property
    def phase(self):
        return self._s.phase

    def send(self, text):
        return json.loads(self._s.send(text))

    def choose(self, slug):
        return json.loads(self._s.choose(slug))

    def frames(self):
        return json.loads(self._s.frames())

    def report(self):
        return json.loads(self._s.report())

    def record(self):
        return json.loads(self._s.record())

    def qtable(self):
        return json.loads(self._s.qtable())


class Api:
    """The HTTP API's request handler, without a socket."""

    def __init__(self, script, auth_secret="", client_storage=False):
        self._api = _core.Api(_script_text(script), auth_secret, client_storage)

    def request(self, method, target, body=None, token=None):
        status, text = self._api.handle(
            method,
            target,
            json.dumps(body) if body is not None else "",
            f"Bearer {token}" if token else "",
        )
        return status, json.loads(text)
