"""Search the memory-configuration space for SLO-feasible assignments.

Three greedy variants share one engine: a max-heap over the functions'
current representative execution times. The slowest function gets more
memory first, one ladder rung at a time, until the estimated end-to-end
latency fits the SLO. On top of that, ``greedy_min_cost`` keeps trading
memory for time only while the relative cost increase does not exceed the
relative time gain, and ``greedy_min_time`` binary-searches the tightest
SLO the greedy can still satisfy. ``brute_force`` scans every combination
and is the optimality oracle for small instances.
"""

from __future__ import annotations

import heapq
import itertools
import math
import time
from dataclasses import dataclass
from typing import Callable, Mapping

from .errors import (
    MissingProfile,
    ProfileNotMonotone,
    SearchSpaceTooLarge,
)
from .model import (
    CallGraph,
    CostModel,
    FunctionNode,
    FunctionProfile,
    MemoryLadder,
    Objective,
    Parallel,
    Sequence,
    SloSpec,
    configuration_cost,
)

#: Callback invoked on every heap pop with (function, its key time, and the
#: remaining entries' times); a testing/diagnostics hook.
PopHook = Callable[[str, float, list[float]], None]


@dataclass(frozen=True)
class SearchResult:
    """Outcome of one search run.

    ``config`` is None when no configuration satisfies the SLO (that is an
    outcome, not an error). ``iterations`` counts algorithm steps (heap
    pops, bisection rounds or scanned combinations) and ``evaluations``
    counts end-to-end latency estimations.
    """

    algorithm: str
    config: dict[str, int] | None
    estimated_time_s: float | None
    estimated_cost_usd: float | None
    iterations: int
    evaluations: int
    elapsed_s: float

    @property
    def found(self) -> bool:
        return self.config is not None

    def to_record(self) -> dict:
        # elapsed_s deliberately excluded: artifacts must be reproducible
        # byte-for-byte; wall time goes in a sidecar file.
        return {
            "algorithm": self.algorithm,
            "config": dict(sorted(self.config.items())) if self.config else None,
            "estimated_time_s": self.estimated_time_s,
            "estimated_cost_usd": self.estimated_cost_usd,
            "iterations": self.iterations,
            "evaluations": self.evaluations,
        }


class _GraphEvaluator:
    """Caches per-node latency so one function's memory bump re-evaluates
    only the path to the root, with the same float operations (and thus
    bit-identical results) as a fresh ``estimate_time``."""

    def __init__(
        self,
        graph: CallGraph,
        profiles: Mapping[str, FunctionProfile],
        config: Mapping[str, int],
    ):
        self._profiles = profiles
        self._is_sequence: list[bool] = []
        self._child_values: list[list[float]] = []
        self._parent: list[int] = []
        self._slot: list[int] = []
        self._values: list[float] = []
        self._leaf_of: dict[str, int] = {}

        def build(node, parent: int, slot: int) -> float:
            index = len(self._values)
            self._parent.append(parent)
            self._slot.append(slot)
            if isinstance(node, FunctionNode):
                value = profiles[node.name].representative(config[node.name])
                self._is_sequence.append(False)
                self._child_values.append([])
                self._values.append(value)
                self._leaf_of[node.name] = index
                return value
            self._is_sequence.append(isinstance(node, Sequence))
            self._child_values.append([])
            self._values.append(0.0)
            child_values = [build(c, index, i) for i, c in enumerate(node.children)]
            self._child_values[index] = child_values
            # Same reduction order as the recursive estimator, so values agree
            # bit for bit with a fresh estimate.
            value = sum(child_values) if self._is_sequence[index] else max(child_values)
            self._values[index] = value
            return value

        build(graph.root, -1, 0)

    @property
    def root_value(self) -> float:
        return self._values[0]

    def set_memory(self, function: str, memory_mb: int) -> float:
        """Re-point one function's representative; returns the new root value."""
        index = self._leaf_of[function]
        value = self._profiles[function].representative(memory_mb)
        self._values[index] = value
        parent = self._parent[index]
        slot = self._slot[index]
        while parent >= 0:
            kids = self._child_values[parent]
            kids[slot] = value
            value = sum(kids) if self._is_sequence[parent] else max(kids)
            self._values[parent] = value
            slot = self._slot[parent]
            parent = self._parent[parent]
        return value


def _check_profiles(
    functions: tuple[str, ...],
    profiles: Mapping[str, FunctionProfile],
    rungs: tuple[int, ...],
    allow_non_monotone: bool,
) -> None:
    for name in functions:
        profile = profiles.get(name)
        if profile is None:
            raise MissingProfile(name)
        for memory_mb in rungs:
            profile.representative(memory_mb)  # raises MissingProfile
        if not allow_non_monotone:
            reps = [profile.representatives[m] for m in rungs]
            if any(b > a for a, b in zip(reps, reps[1:])):
                raise ProfileNotMonotone(name)


def greedy_slo(
    graph: CallGraph,
    profiles: Mapping[str, FunctionProfile],
    ladder: MemoryLadder,
    slo: SloSpec,
    cost_model: CostModel | None = None,
    allow_non_monotone: bool = False,
    on_pop: PopHook | None = None,
) -> SearchResult:
    """Find a feasible configuration by bumping the slowest function first.

    All functions start at the smallest ladder size. While the estimate
    exceeds the SLO, the function with the largest current representative
    is popped from a max-heap and moved one rung up (ties break on the
    function name); a function that reaches the top rung leaves the heap
    for good. Returns an empty result when the heap drains without success,
    which on monotone profiles means even the all-maximum configuration is
    infeasible. Performs at most N*(M-1)+1 latency estimations.
    """
    started = time.perf_counter()
    cost_model = cost_model or CostModel()
    functions = graph.functions()
    rungs = ladder.effective()
    _check_profiles(functions, profiles, rungs, allow_non_monotone)

    config = {name: rungs[0] for name in functions}
    evaluator = _GraphEvaluator(graph, profiles, config)
    estimate = evaluator.root_value
    evaluations = 1
    rung_index = {name: 0 for name in functions}
    heap = [(-profiles[name].representative(rungs[0]), name) for name in functions]
    heapq.heapify(heap)
    iterations = 0

    while True:
        if estimate <= slo.slo_seconds:
            return SearchResult(
                algorithm="greedy",
                config=dict(config),
                estimated_time_s=estimate,
                estimated_cost_usd=configuration_cost(config, profiles, cost_model),
                iterations=iterations,
                evaluations=evaluations,
                elapsed_s=time.perf_counter() - started,
            )
        if not heap:
            return SearchResult(
                algorithm="greedy",
                config=None,
                estimated_time_s=None,
                estimated_cost_usd=None,
                iterations=iterations,
                evaluations=evaluations,
                elapsed_s=time.perf_counter() - started,
            )
        key, name = heapq.heappop(heap)
        iterations += 1
        if on_pop is not None:
            on_pop(name, -key, [-k for k, _ in heap])
        next_index = rung_index[name] + 1
        if next_index < len(rungs):
            rung_index[name] = next_index
            memory_mb = rungs[next_index]
            config[name] = memory_mb
            estimate = evaluator.set_memory(name, memory_mb)
            evaluations += 1
            heapq.heappush(heap, (-profiles[name].representative(memory_mb), name))


def greedy_min_cost(
    graph: CallGraph,
    profiles: Mapping[str, FunctionProfile],
    ladder: MemoryLadder,
    slo: SloSpec,
    cost_model: CostModel | None = None,
    allow_non_monotone: bool = False,
) -> SearchResult:
    """Feasible-first search, then keep bumping only where it pays off.

    Starting from the ``greedy_slo`` configuration, each pop considers one
    more rung for the slowest function and accepts it iff

        |new_cost - old_cost| / old_cost  <=  |old_time - new_time| / old_time

    at the application level, and the result still meets the SLO. A
    function whose bump fails the test is frozen at its current size and
    never revisited. The cheapest feasible configuration seen anywhere
    along the way (including the starting point) is returned, so the cost
    never exceeds the plain greedy result's.
    """
    started = time.perf_counter()
    cost_model = cost_model or CostModel()
    base = greedy_slo(
        graph, profiles, ladder, slo, cost_model, allow_non_monotone=allow_non_monotone
    )
    if not base.found:
        return SearchResult(
            algorithm="greedy-min-cost",
            config=None,
            estimated_time_s=None,
            estimated_cost_usd=None,
            iterations=base.iterations,
            evaluations=base.evaluations,
            elapsed_s=time.perf_counter() - started,
        )

    rungs = ladder.effective()
    config = dict(base.config)
    evaluator = _GraphEvaluator(graph, profiles, config)
    current_time = evaluator.root_value
    current_cost = configuration_cost(config, profiles, cost_model)
    evaluations = base.evaluations + 1
    iterations = base.iterations

    best_config = dict(config)
    best_cost = current_cost
    best_time = current_time

    rung_index = {name: rungs.index(memory) for name, memory in config.items()}
    heap = [(-profiles[name].representative(m), name) for name, m in config.items()]
    heapq.heapify(heap)

    def relative(delta: float, reference: float) -> float:
        if reference == 0:
            return 0.0 if delta == 0 else math.inf
        return abs(delta) / abs(reference)

    while heap:
        _, name = heapq.heappop(heap)
        iterations += 1
        next_index = rung_index[name] + 1
        if next_index >= len(rungs):
            continue
        memory_mb = rungs[next_index]
        trial_time = evaluator.set_memory(name, memory_mb)
        evaluations += 1
        trial_config = dict(config)
        trial_config[name] = memory_mb
        trial_cost = configuration_cost(trial_config, profiles, cost_model)
        worth_it = relative(trial_cost - current_cost, current_cost) <= relative(
            current_time - trial_time, current_time
        )
        if trial_time > slo.slo_seconds or not worth_it:
            evaluator.set_memory(name, config[name])  # revert; freeze this function
            continue
        config = trial_config
        rung_index[name] = next_index
        current_time = trial_time
        current_cost = trial_cost
        if trial_cost < best_cost or (trial_cost == best_cost and trial_time < best_time):
            best_config = dict(trial_config)
            best_cost = trial_cost
            best_time = trial_time
        heapq.heappush(heap, (-profiles[name].representative(memory_mb), name))

    return SearchResult(
        algorithm="greedy-min-cost",
        config=best_config,
        estimated_time_s=best_time,
        estimated_cost_usd=best_cost,
        iterations=iterations,
        evaluations=evaluations,
        elapsed_s=time.perf_counter() - started,
    )


def greedy_min_time(
    graph: CallGraph,
    profiles: Mapping[str, FunctionProfile],
    ladder: MemoryLadder,
    slo: SloSpec,
    gamma: float = 0.01,
    cost_model: CostModel | None = None,
    allow_non_monotone: bool = False,
) -> SearchResult:
    """Binary-search the lowest latency the greedy search can reach.

    The plain greedy result bounds the search from above; zero bounds it
    from below. Each round re-runs the greedy search with the midpoint as
    a tightened SLO: success moves the upper bound down to the achieved
    time, failure moves the lower bound up to the midpoint. Stops when the
    bounds are within ``gamma`` seconds and returns the best configuration
    seen (so with gamma >= the starting estimate the greedy result comes
    back unchanged).
    """
    if gamma <= 0:
        raise ValueError("gamma must be positive")
    started = time.perf_counter()
    cost_model = cost_model or CostModel()
    base = greedy_slo(
        graph, profiles, ladder, slo, cost_model, allow_non_monotone=allow_non_monotone
    )
    if not base.found:
        return SearchResult(
            algorithm="greedy-min-time",
            config=None,
            estimated_time_s=None,
            estimated_cost_usd=None,
            iterations=base.iterations,
            evaluations=base.evaluations,
            elapsed_s=time.perf_counter() - started,
        )

    low = 0.0
    high = base.estimated_time_s
    best = base
    rounds = 0
    evaluations = base.evaluations
    while high - low > gamma:
        middle = (low + high) / 2.0
        trial = greedy_slo(
            graph,
            profiles,
            ladder,
            SloSpec(slo_seconds=middle, percentile=slo.percentile),
            cost_model,
            allow_non_monotone=allow_non_monotone,
        )
        rounds += 1
        evaluations += trial.evaluations
        if trial.found:
            high = trial.estimated_time_s
            best = trial
        else:
            low = middle

    return SearchResult(
        algorithm="greedy-min-time",
        config=dict(best.config),
        estimated_time_s=best.estimated_time_s,
        estimated_cost_usd=best.estimated_cost_usd,
        iterations=rounds,
        evaluations=evaluations,
        elapsed_s=time.perf_counter() - started,
    )


def brute_force(
    graph: CallGraph,
    profiles: Mapping[str, FunctionProfile],
    ladder: MemoryLadder,
    slo: SloSpec,
    objective: Objective = Objective.FEASIBLE,
    cost_model: CostModel | None = None,
    max_evaluations: int = 10_000_000,
    force: bool = False,
) -> SearchResult:
    """Exhaustively scan all M^N configurations for the global optimum.

    Functions are ordered by name and the ladder ascends, so ties resolve
    to the lexicographically smallest memory vector. Always scans the full
    space (the evaluation count is exactly M^N); refuses to start beyond
    ``max_evaluations`` combinations unless ``force`` is set.
    """
    started = time.perf_counter()
    cost_model = cost_model or CostModel()
    functions = tuple(sorted(graph.functions()))
    rungs = ladder.effective()
    _check_profiles(functions, profiles, rungs, allow_non_monotone=True)

    combinations = len(rungs) ** len(functions)
    if combinations > max_evaluations and not force:
        raise SearchSpaceTooLarge(combinations, max_evaluations)

    representatives = {
        name: {m: profiles[name].representative(m) for m in rungs} for name in functions
    }
    costs = {
        name: {m: cost_model.invocation_cost(representatives[name][m], m) for m in rungs}
        for name in functions
    }

    best_config: dict[str, int] | None = None
    best_time = math.inf
    best_cost = math.inf
    best_metric = math.inf
    times: dict[str, float] = {}

    def walk(node) -> float:
        if isinstance(node, FunctionNode):
            return times[node.name]
        if isinstance(node, Parallel):
            return max(walk(child) for child in node.children)
        return sum(walk(child) for child in node.children)

    for assignment in itertools.product(rungs, repeat=len(functions)):
        for name, memory_mb in zip(functions, assignment):
            times[name] = representatives[name][memory_mb]
        total_time = walk(graph.root)
        if total_time > slo.slo_seconds:
            continue
        total_cost = sum(costs[name][m] for name, m in zip(functions, assignment))
        if objective is Objective.MIN_COST:
            metric = total_cost
        elif objective is Objective.MIN_TIME:
            metric = total_time
        else:
            metric = 0.0 if best_config is None else math.inf  # first feasible wins
        if metric < best_metric:
            best_metric = metric
            best_config = dict(zip(functions, assignment))
            best_time = total_time
            best_cost = total_cost

    elapsed = time.perf_counter() - started
    if best_config is None:
        return SearchResult(
            algorithm=f"brute-force-{objective.value}",
            config=None,
            estimated_time_s=None,
            estimated_cost_usd=None,
            iterations=combinations,
            evaluations=combinations,
            elapsed_s=elapsed,
        )
    return SearchResult(
        algorithm=f"brute-force-{objective.value}",
        config=best_config,
        estimated_time_s=best_time,
        estimated_cost_usd=best_cost,
        iterations=combinations,
        evaluations=combinations,
        elapsed_s=elapsed,
    )
