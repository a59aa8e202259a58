import io
import random

import pytest

from faastune import (
    FunctionNode,
    MemoryLadder,
    Parallel,
    Sequence,
    SimApp,
    SimFunctionSpec,
    SloSpec,
    build_call_graph,
    build_profiles,
    estimate_time,
    extract_samples,
    generate_app,
    load_app,
    normalize_graph,
    profile_application,
    run_load,
    save_app,
    sim_duration,
    validate_config,
    write_trace_file,
)
from faastune.errors import InvalidShape
from faastune.model import CallGraph
from faastune.sim import CPU_SATURATION_MB, end_to_end_durations


def _compute_spec(name="f1", work=512.0, **kw):
    return SimFunctionSpec(function=name, work=work, **kw)


# --- shapes ------------------------------------------------------------------


def test_demo3_is_one_function_invoking_two_in_sequence():
    app = generate_app(shape="demo3", seed=0)
    assert app.graph.root == Sequence(
        (FunctionNode("f1"), FunctionNode("f2"), FunctionNode("f3"))
    )


@pytest.mark.parametrize("shape,count", [("demo6", 6), ("demo10", 10)])
def test_demo_shapes_have_expected_sizes_and_parallelism(shape, count):
    app = generate_app(shape=shape, seed=0)
    assert len(app.graph.functions()) == count
    assert normalize_graph(app.graph) == app.graph

    def has_parallel(node):
        if isinstance(node, Parallel):
            return True
        return not isinstance(node, FunctionNode) and any(has_parallel(c) for c in node.children)

    assert has_parallel(app.graph.root)


def test_petstore_is_a_five_function_chain_with_two_backends():
    app = generate_app(shape="petstore", seed=0)
    assert app.graph.functions() == (
        "pet-checkout", "pet-currency", "pet-payment", "pet-shipping", "pet-email",
    )
    assert sum(len(v) for v in app.baas_children.values()) == 2
    assert app.specs["pet-payment"].kind == "baas_bound"
    assert app.specs["pet-shipping"].kind == "baas_bound"


def test_single_function_chain_is_a_bare_node():
    app = generate_app(n_functions=1, shape="chain", seed=0)
    assert app.graph.root == FunctionNode("f1")


def test_invalid_shapes_rejected():
    with pytest.raises(InvalidShape):
        generate_app(shape="mystery")
    with pytest.raises(InvalidShape):
        generate_app(n_functions=0, shape="chain")


def test_generation_deterministic_per_seed():
    assert generate_app(7, "random", seed=9) == generate_app(7, "random", seed=9)
    assert generate_app(7, "random", seed=9) != generate_app(7, "random", seed=10)


# --- duration model ----------------------------------------------------------


def test_memory_doubling_halves_compute_time_below_saturation():
    spec = _compute_spec(work=512.0)
    d128, _ = sim_duration(spec, 128, random.Random(0))
    d256, _ = sim_duration(spec, 256, random.Random(0))
    assert d128 == pytest.approx(2 * d256, rel=1e-12)


def test_memory_saturates_at_vcpu_limit():
    spec = _compute_spec(work=512.0)
    d2048, _ = sim_duration(spec, 2048, random.Random(0))
    d4096, _ = sim_duration(spec, 4096, random.Random(0))
    assert d2048 == d4096 == 512.0 / CPU_SATURATION_MB


def test_backend_bound_time_ignores_memory():
    spec = SimFunctionSpec(function="db", kind="baas_bound", baas_latency_s=0.3)
    d128, _ = sim_duration(spec, 128, random.Random(0))
    d1024, _ = sim_duration(spec, 1024, random.Random(0))
    assert d128 == d1024 == 0.3


def test_certain_cold_start_adds_penalty():
    spec = _compute_spec(work=128.0, cold_start_prob=1.0, cold_start_s=0.5)
    duration, cold = sim_duration(spec, 128, random.Random(0))
    assert cold is True
    assert duration == pytest.approx(1.5)


def test_jitter_is_reproducible_per_seed():
    spec = _compute_spec(jitter_cv=0.2)
    a = [sim_duration(spec, 128, random.Random(4))[0] for _ in range(1)]
    b = [sim_duration(spec, 128, random.Random(4))[0] for _ in range(1)]
    assert a == b


# --- load runs ---------------------------------------------------------------


def test_run_load_emits_k_traces():
    app = generate_app(shape="demo3", seed=1)
    config = {f: 128 for f in app.graph.functions()}
    log = run_load(app, config, 50, random.Random(0))
    assert len(log) == 50


def test_noiseless_run_matches_estimate_exactly():
    app = generate_app(shape="demo10", seed=2).noiseless()
    config = {f: 256 for f in app.graph.functions()}
    log = run_load(app, config, 1, random.Random(0))
    samples = extract_samples(log)
    profiles = build_profiles(samples, MemoryLadder(values=(256,), cap_mb=None), alpha=75)
    estimated = estimate_time(app.graph, config, profiles)
    (observed,) = end_to_end_durations(log)
    assert observed == pytest.approx(estimated, abs=1e-9)


def test_parallel_pair_runs_in_single_function_time():
    graph = normalize_graph(CallGraph(Sequence((
        FunctionNode("f1"),
        Parallel((FunctionNode("f2"), FunctionNode("f3"))),
    ))))
    specs = {name: _compute_spec(name, work=256.0) for name in graph.functions()}
    app = SimApp(graph=graph, specs=specs)
    config = {f: 128 for f in graph.functions()}
    (duration,) = end_to_end_durations(run_load(app, config, 1, random.Random(0)))
    assert duration == pytest.approx(2 * (256.0 / 128))  # f1 plus one of the pair


def test_segment_layout_invariants():
    app = generate_app(shape="petstore", seed=3)
    config = {f: 512 for f in app.graph.functions()}
    log = run_load(app, config, 5, random.Random(1))
    for segments in log.traces.values():
        by_id = {s.segment_id: s for s in segments}
        roots = [s for s in segments if s.parent_id is None]
        assert len(roots) == 1
        children = {}
        for s in segments:
            if s.parent_id:
                children.setdefault(s.parent_id, []).append(s)
                parent = by_id[s.parent_id]
                if s.kind == "baas":
                    # backend calls happen inside their function's span
                    assert parent.start_time <= s.start_time <= s.end_time <= parent.end_time
                else:
                    # invoked functions cannot start before their invoker
                    assert s.start_time >= parent.start_time
        for siblings in children.values():
            functions = sorted(
                (s for s in siblings if s.kind == "function"), key=lambda s: s.start_time
            )
            for a, b in zip(functions, functions[1:]):
                assert a.end_time <= b.start_time  # petstore chain: strictly sequential


def test_traces_are_byte_identical_per_seed():
    app = generate_app(shape="demo6", seed=4)
    config = {f: 256 for f in app.graph.functions()}

    def dump():
        log = run_load(app, config, 10, random.Random(11))
        buffer = io.StringIO()
        write_trace_file(log, buffer)
        return buffer.getvalue()

    assert dump() == dump()


@pytest.mark.parametrize("seed", range(25))
def test_round_trip_recovers_generated_graph(seed):
    n = random.Random(seed).randint(1, 12)
    app = generate_app(n, "random", seed=seed).noiseless()
    config = {f: 128 for f in app.graph.functions()}
    log = run_load(app, config, 3, random.Random(seed))
    assert build_call_graph(log) == app.graph


def test_unrealizable_graph_rejected_by_run_load():
    graph = normalize_graph(
        CallGraph(Parallel((FunctionNode("f1"), FunctionNode("f2"))))
    )
    specs = {name: _compute_spec(name) for name in graph.functions()}
    app = SimApp(graph=graph, specs=specs)
    with pytest.raises(ValueError):
        run_load(app, {"f1": 128, "f2": 128}, 1, random.Random(0))


# --- profiling runs and validation -------------------------------------------


def test_profile_application_covers_every_level():
    app = generate_app(shape="demo3", seed=5)
    ladder = MemoryLadder(values=(128, 256), cap_mb=None)
    log = profile_application(app, ladder, k_per_level=50, rng=random.Random(0))
    assert len(log) == 100
    samples = extract_samples(log)
    profiles = build_profiles(samples, ladder, alpha=95)  # no MissingCell
    assert set(profiles) == set(app.graph.functions())


def test_validate_config_with_huge_slo_fully_conforms():
    app = generate_app(shape="demo3", seed=6)
    config = {f: 128 for f in app.graph.functions()}
    report = validate_config(app, config, SloSpec(1e9), n_requests=20, rng=random.Random(0))
    assert report.conformance == 1.0
    assert report.min_s <= report.median_s <= report.p95_s <= report.max_s


def test_validate_config_boundary_is_inclusive():
    app = generate_app(shape="demo3", seed=7).noiseless()
    config = {f: 128 for f in app.graph.functions()}
    (duration,) = end_to_end_durations(run_load(app, config, 1, random.Random(0)))
    report = validate_config(app, config, SloSpec(duration), n_requests=10, rng=random.Random(0))
    assert report.conformance == 1.0


# --- app spec files ----------------------------------------------------------


def test_app_spec_round_trip(tmp_path):
    for shape in ("demo3", "petstore", "random"):
        app = generate_app(5, shape=shape, seed=8)
        path = tmp_path / f"{shape}.json"
        save_app(app, path)
        assert load_app(path) == app
