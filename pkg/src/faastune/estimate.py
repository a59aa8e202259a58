"""End-to-end application latency and cost estimation over a call graph.

Latency composes recursively: a function contributes its representative
duration at the assigned memory, a sequence contributes the sum of its
children and a parallel group the maximum. Cost is schedule-independent.
"""

from __future__ import annotations

from typing import Mapping

from .errors import PartialConfiguration
from .model import (
    CallGraph,
    CostModel,
    FunctionNode,
    FunctionProfile,
    GraphNode,
    Sequence,
    configuration_cost,
)


def _combine(node: GraphNode, times: Mapping[str, float]) -> float:
    if isinstance(node, FunctionNode):
        try:
            return times[node.name]
        except KeyError:
            raise PartialConfiguration(node.name) from None
    if isinstance(node, Sequence):
        return sum(_combine(child, times) for child in node.children)
    return max(_combine(child, times) for child in node.children)


def combine_times(graph: CallGraph, times: Mapping[str, float]) -> float:
    """Compose per-function durations into an end-to-end duration."""
    return _combine(graph.root, times)


def estimate_time(
    graph: CallGraph,
    config: Mapping[str, int],
    profiles: Mapping[str, FunctionProfile],
) -> float:
    """Estimated end-to-end latency (seconds) for a memory configuration.

    Raises :class:`PartialConfiguration` when the configuration misses a
    function and :class:`MissingProfile` when a profile lacks the assigned
    memory.
    """
    times: dict[str, float] = {}
    for name in graph.functions():
        if name not in config:
            raise PartialConfiguration(name)
        times[name] = profiles[name].representative(config[name])
    return combine_times(graph, times)


def estimate_cost(
    graph: CallGraph,
    config: Mapping[str, int],
    profiles: Mapping[str, FunctionProfile],
    cost_model: CostModel,
) -> float:
    """Estimated USD per invocation; independent of sequence/parallel shape."""
    restricted: dict[str, int] = {}
    for name in graph.functions():
        if name not in config:
            raise PartialConfiguration(name)
        restricted[name] = config[name]
    return configuration_cost(restricted, profiles, cost_model)
