"""Core domain types: memory ladder, call graph, samples, profiles, cost model.

Everything here is an immutable value with its invariants checked at
construction; no I/O and no search logic.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterator, Mapping, Union

from .errors import DuplicateFunction, EmptyGroup, MissingProfile, PartialConfiguration

#: Platform memory sizes in MB, smallest to largest.
DEFAULT_MEMORY_MB = (128, 256, 512, 1024, 2048, 4096, 8192, 10240)

#: Default ladder cap: beyond 2 GB the extra vCPU share is useless to
#: single-threaded functions, so larger sizes only add cost.
DEFAULT_MEMORY_CAP_MB = 2048

#: Provider-typical execution price; a config value, not a contract.
DEFAULT_USD_PER_GB_SECOND = 1.6667e-5


@dataclass(frozen=True)
class MemoryLadder:
    """The discrete set of allowed memory sizes, optionally capped.

    ``values`` must be strictly increasing positive integers (MB). When
    ``cap_mb`` is set, the effective ladder is the prefix of values that
    do not exceed it.
    """

    values: tuple[int, ...] = DEFAULT_MEMORY_MB
    cap_mb: int | None = DEFAULT_MEMORY_CAP_MB

    def __post_init__(self):
        object.__setattr__(self, "values", tuple(self.values))
        if not self.values:
            raise ValueError("memory ladder must not be empty")
        for v in self.values:
            if not isinstance(v, int) or v <= 0:
                raise ValueError(f"memory sizes must be positive integers, got {v!r}")
        if any(a >= b for a, b in zip(self.values, self.values[1:])):
            raise ValueError(f"memory ladder must be strictly increasing: {self.values}")
        if self.cap_mb is not None and self.cap_mb <= 0:
            raise ValueError("cap_mb must be positive")
        if not self.effective():
            raise ValueError(f"cap {self.cap_mb} MB leaves no usable ladder values")

    def effective(self) -> tuple[int, ...]:
        """Ladder values at or below the cap."""
        if self.cap_mb is None:
            return self.values
        return tuple(v for v in self.values if v <= self.cap_mb)

    @property
    def minimum(self) -> int:
        return self.effective()[0]

    @property
    def maximum(self) -> int:
        return self.effective()[-1]

    def next_up(self, memory_mb: int) -> int | None:
        """The next rung above ``memory_mb``, or None at the top."""
        rungs = self.effective()
        i = rungs.index(memory_mb)
        return rungs[i + 1] if i + 1 < len(rungs) else None


@dataclass(frozen=True)
class FunctionNode:
    """A single function invocation (leaf of the call graph)."""

    name: str

    def __post_init__(self):
        if not self.name:
            raise ValueError("function name must be non-empty")


@dataclass(frozen=True)
class Sequence:
    """Children executed one after another; total time is the sum."""

    children: tuple["GraphNode", ...]

    def __post_init__(self):
        object.__setattr__(self, "children", tuple(self.children))


@dataclass(frozen=True)
class Parallel:
    """Children executed concurrently; total time is the maximum."""

    children: tuple["GraphNode", ...]

    def __post_init__(self):
        object.__setattr__(self, "children", tuple(self.children))


GraphNode = Union[FunctionNode, Sequence, Parallel]


def iter_function_names(node: GraphNode) -> Iterator[str]:
    """Yield function names in left-to-right (execution) order."""
    if isinstance(node, FunctionNode):
        yield node.name
    else:
        for child in node.children:
            yield from iter_function_names(child)


@dataclass(frozen=True)
class CallGraph:
    """Recursive sequence/parallel composition of function invocations."""

    root: GraphNode

    def functions(self) -> tuple[str, ...]:
        return tuple(iter_function_names(self.root))


def _min_name(node: GraphNode) -> str:
    return min(iter_function_names(node))


def _normalize_node(node: GraphNode) -> GraphNode:
    if isinstance(node, FunctionNode):
        return node
    children = tuple(_normalize_node(c) for c in node.children)
    # Sum and max are associative, so same-kind nesting carries no meaning;
    # splicing it out gives every graph a unique canonical form (which is
    # what lets trace reconstruction invert app generation exactly).
    flattened: list[GraphNode] = []
    for child in children:
        if isinstance(child, type(node)):
            flattened.extend(child.children)
        else:
            flattened.append(child)
    if isinstance(node, Sequence):
        if not flattened:
            raise EmptyGroup("sequence with no children")
        if len(flattened) == 1:
            return flattened[0]
        return Sequence(tuple(flattened))
    if len(flattened) < 2:
        raise EmptyGroup("parallel group needs at least two children")
    # max() is commutative: order parallel branches by the smallest function
    # name they contain to make graphs comparable.
    return Parallel(tuple(sorted(flattened, key=_min_name)))


def normalize_graph(graph: CallGraph) -> CallGraph:
    """Canonicalize a call graph: splice out same-kind nesting, collapse
    single-child sequences, order parallel branches canonically and verify
    arity and function-uniqueness invariants.

    Idempotent. Raises :class:`EmptyGroup` on arity violations and
    :class:`DuplicateFunction` if any function appears twice.
    """
    root = _normalize_node(graph.root)
    seen: set[str] = set()
    for name in iter_function_names(root):
        if name in seen:
            raise DuplicateFunction(name)
        seen.add(name)
    return CallGraph(root)


@dataclass(frozen=True)
class ExecutionSample:
    """One observed execution of a function at a given memory size."""

    function: str
    memory_mb: int
    duration_s: float
    cold_start: bool = False

    def __post_init__(self):
        if not self.function:
            raise ValueError("function name must be non-empty")
        if self.memory_mb <= 0:
            raise ValueError("memory_mb must be positive")
        if self.duration_s < 0:
            raise ValueError("duration_s must be non-negative")


@dataclass(frozen=True)
class FunctionProfile:
    """Latency representatives for one function across the memory ladder.

    ``representatives[m]`` is the ``alpha``-th percentile of the observed
    durations at memory ``m``. ``raw_representatives`` keeps the
    pre-repair values when monotone repair has been applied.
    """

    function: str
    alpha: float
    representatives: Mapping[int, float]
    sample_counts: Mapping[int, int] = field(default_factory=dict)
    samples: Mapping[int, tuple[ExecutionSample, ...]] = field(default_factory=dict)
    raw_representatives: Mapping[int, float] | None = None

    def memories(self) -> tuple[int, ...]:
        return tuple(sorted(self.representatives))

    def representative(self, memory_mb: int) -> float:
        try:
            return self.representatives[memory_mb]
        except KeyError:
            raise MissingProfile(self.function, memory_mb) from None

    def sample_count(self, memory_mb: int) -> int:
        return self.sample_counts.get(memory_mb, len(self.samples.get(memory_mb, ())))

    def is_monotone(self) -> bool:
        """True if representatives never increase as memory grows."""
        reps = [self.representatives[m] for m in self.memories()]
        return all(b <= a for a, b in zip(reps, reps[1:]))


@dataclass(frozen=True)
class SloSpec:
    """Latency target: the ``percentile``-th end-to-end latency must stay
    at or below ``slo_seconds``."""

    slo_seconds: float
    percentile: float = 95.0

    def __post_init__(self):
        if self.slo_seconds <= 0:
            raise ValueError("slo_seconds must be positive")
        if not 0 < self.percentile <= 100:
            raise ValueError("percentile must be in (0, 100]")


class Objective(str, Enum):
    """What to optimize on top of SLO feasibility."""

    FEASIBLE = "feasible"
    MIN_COST = "min-cost"
    MIN_TIME = "min-time"


@dataclass(frozen=True)
class CostModel:
    """Linear execution pricing: USD per GB-second, billed in fixed ticks."""

    usd_per_gb_second: float = DEFAULT_USD_PER_GB_SECOND
    billing_granularity_ms: int = 1

    def __post_init__(self):
        if self.usd_per_gb_second <= 0:
            raise ValueError("usd_per_gb_second must be positive")
        if self.billing_granularity_ms <= 0:
            raise ValueError("billing_granularity_ms must be positive")

    def billed_seconds(self, duration_s: float) -> float:
        """Round a duration up to the billing granularity."""
        if duration_s < 0:
            raise ValueError("duration_s must be non-negative")
        gran = self.billing_granularity_ms
        # The 1e-9 slack keeps exact multiples (e.g. 0.1 s at 1 ms) from
        # being pushed into the next tick by float noise.
        ticks = math.ceil(duration_s * 1000.0 / gran - 1e-9)
        return ticks * gran / 1000.0

    def invocation_cost(self, duration_s: float, memory_mb: int) -> float:
        return self.billed_seconds(duration_s) * (memory_mb / 1024.0) * self.usd_per_gb_second


def configuration_cost(
    config: Mapping[str, int],
    profiles: Mapping[str, FunctionProfile],
    cost_model: CostModel,
) -> float:
    """Estimated USD per application invocation for a memory configuration.

    Sums each function's representative duration (rounded up to the billing
    granularity) times its memory in GB times the GB-second rate. Functions
    are summed in name order so the result does not depend on dict ordering.
    """
    total = 0.0
    for function in sorted(config):
        memory_mb = config[function]
        profile = profiles.get(function)
        if profile is None:
            raise MissingProfile(function, memory_mb)
        total += cost_model.invocation_cost(profile.representative(memory_mb), memory_mb)
    return total


def check_configuration(
    graph: CallGraph, config: Mapping[str, int], ladder: MemoryLadder
) -> None:
    """Verify a configuration is total over the graph and on the ladder."""
    functions = set(graph.functions())
    for name in functions:
        if name not in config:
            raise PartialConfiguration(name)
    extra = set(config) - functions
    if extra:
        raise ValueError(f"configuration assigns unknown functions: {sorted(extra)}")
    rungs = set(ladder.effective())
    for name, memory_mb in config.items():
        if memory_mb not in rungs:
            raise ValueError(f"{name!r}: {memory_mb} MB is not on the memory ladder")
