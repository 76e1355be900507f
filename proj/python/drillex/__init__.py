"""Complaint-driven drill-down explanations."""

import json

from ._core import Error, bench, synth, synth_conditions
from ._core import Engine as _Engine

__all__ = ["Engine", "Error", "bench", "synth", "synth_conditions"]


class Engine:
    """One dataset and one drill-down session."""

    def __init__(self, config):
        self._engine = _Engine(str(config))

    def view(self):
        return json.loads(self._engine.view())

    def complain(self, complaint, k=5):
        return json.loads(self._engine.complain(json.dumps(complaint), k))

    def drilldown(self, hierarchy, group):
        return json.loads(self._engine.drilldown(hierarchy, {a: str(v) for a, v in group.items()}))

    def records(self, group):
        return self._engine.records({a: str(v) for a, v in group.items()})
