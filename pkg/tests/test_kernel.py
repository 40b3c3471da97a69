"""Generic engine: pipelines, stepping, ensembles, aggregation."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from xnsim.errors import ConfigurationError, NumericalDivergenceError, SweepError
from xnsim.kernel import (
    Ensemble,
    Model,
    ScenarioSpec,
    SimState,
    Stage,
    Trajectory,
    UpdatePipeline,
    aggregate,
    resolve_max_workers,
    run_monte_carlo,
    run_trajectory,
    step,
    sweep,
)
from xnsim.rng import derive_run_seed, make_stream


def halve(t, values, params, draws):
    return {"x": values["x"] * 0.5}


def drift_up(t, values, params, draws):
    return {"y": values["y"] + draws[0]}


HALVE = UpdatePipeline((Stage("halve", ("x",), halve),))
NOISY = UpdatePipeline(
    (Stage("halve", ("x",), halve), Stage("drift", ("y",), drift_up, draws=1))
)


# module-level so the model pickles for the process-pool path
def _build_noisy(params):
    return NOISY


def _init_noisy(params):
    return SimState(0, {"x": 1.0, "y": 0.0})


def _noisy_model():
    return Model(name="toy", build_pipeline=_build_noisy, initial_state=_init_noisy)


def test_step_is_pure_and_advances_t():
    s0 = SimState(0, {"x": 1.0})
    s1 = step(s0, HALVE, None, make_stream(0))
    assert s1.t == 1
    assert s1.values["x"] == 0.5
    assert s0.values["x"] == 1.0
    s2 = step(s1, HALVE, None, make_stream(0))
    assert s2.values["x"] == 0.25


def test_trajectory_matches_repeated_step_bitwise():
    state = SimState(0, {"x": 1.0, "y": 0.0})
    stream = make_stream(99)
    manual = [state]
    for _ in range(50):
        manual.append(step(manual[-1], NOISY, None, stream))
    traj = run_trajectory(state, NOISY, None, 50, seed=99)
    assert np.array_equal(traj.series("x"), [s.values["x"] for s in manual])
    assert np.array_equal(traj.series("y"), [s.values["y"] for s in manual])


def test_zero_horizon():
    traj = run_trajectory(SimState(0, {"x": 3.0}), HALVE, None, 0, seed=1)
    assert len(traj) == 1
    assert traj.horizon == 0
    assert traj.series("x")[0] == 3.0


def test_noise_free_pipeline_ignores_seed():
    a = run_trajectory(SimState(0, {"x": 1.0}), HALVE, None, 20, seed=1)
    b = run_trajectory(SimState(0, {"x": 1.0}), HALVE, None, 20, seed=2)
    assert np.array_equal(a.series("x"), b.series("x"))


def test_draw_budget_and_offsets():
    seen = []

    def eats_two(t, values, params, draws):
        seen.append(tuple(draws))
        return {"a": values["a"]}

    def eats_one(t, values, params, draws):
        seen.append(tuple(draws))
        return {"b": values["b"]}

    pipe = UpdatePipeline(
        (Stage("two", ("a",), eats_two, draws=2), Stage("one", ("b",), eats_one, draws=1))
    )
    assert pipe.draws_per_step == 3
    run_trajectory(SimState(0, {"a": 0.0, "b": 0.0}), pipe, None, 4, seed=5)
    block = make_stream(5).standard_normal((4, 3))
    for k in range(4):
        assert seen[2 * k] == tuple(block[k, :2])
        assert seen[2 * k + 1] == (block[k, 2],)


def test_duplicate_stage_name_rejected():
    with pytest.raises(ConfigurationError, match="halve"):
        UpdatePipeline((Stage("halve", ("x",), halve), Stage("halve", ("y",), halve)))


def test_duplicate_writer_rejected():
    with pytest.raises(ConfigurationError, match="x"):
        UpdatePipeline((Stage("a", ("x",), halve), Stage("b", ("x",), halve)))


def test_wrong_write_set_rejected():
    def liar(t, values, params, draws):
        return {"z": 1.0}

    pipe = UpdatePipeline((Stage("liar", ("x",), liar),))
    with pytest.raises(ConfigurationError, match="liar"):
        run_trajectory(SimState(0, {"x": 1.0, "z": 0.0}), pipe, None, 1, seed=0)


def test_missing_read_names_variable():
    def needs_missing(t, values, params, draws):
        return {"x": values["nope"]}

    pipe = UpdatePipeline((Stage("reader", ("x",), needs_missing),))
    with pytest.raises(ConfigurationError, match="nope"):
        run_trajectory(SimState(0, {"x": 1.0}), pipe, None, 1, seed=0)


def test_initial_state_must_cover_pipeline():
    with pytest.raises(ConfigurationError):
        run_trajectory(SimState(0, {"y": 1.0}), HALVE, None, 1, seed=0)


def test_non_finite_write_is_divergence():
    def blow_up(t, values, params, draws):
        return {"x": values["x"] * 10.0}

    pipe = UpdatePipeline((Stage("boom", ("x",), blow_up),))
    with pytest.raises(NumericalDivergenceError) as exc_info:
        run_trajectory(SimState(0, {"x": 1e300}), pipe, None, 50, seed=0, run_id=3)
    err = exc_info.value
    assert err.stage == "boom"
    assert err.variable == "x"
    assert err.run_id == 3
    assert err.t == 9  # 1e300 * 10**9 is the first product past the float ceiling


def test_overflow_error_is_divergence():
    def pow_up(t, values, params, draws):
        return {"x": values["x"] ** 2}

    pipe = UpdatePipeline((Stage("pow", ("x",), pow_up),))
    with pytest.raises(NumericalDivergenceError) as exc_info:
        run_trajectory(SimState(0, {"x": 1e200}), pipe, None, 5, seed=0)
    assert exc_info.value.stage == "pow"


def test_trajectory_accessors():
    traj = run_trajectory(SimState(0, {"x": 1.0}), HALVE, None, 3, seed=0)
    assert traj.variables == ("x",)
    assert traj.state(0).values["x"] == 1.0
    assert traj.state(-1).values["x"] == 0.125
    states = list(traj)
    assert [s.t for s in states] == [0, 1, 2, 3]
    with pytest.raises(ConfigurationError, match="x"):
        traj.series("unknown")
    with pytest.raises(ValueError):
        traj.series("x")[0] = 99.0  # read-only


def test_scenario_spec_validation():
    with pytest.raises(ConfigurationError):
        ScenarioSpec("", None)
    with pytest.raises(ConfigurationError):
        ScenarioSpec("s", None, horizon=0)
    with pytest.raises(ConfigurationError):
        ScenarioSpec("s", None, runs=0)
    with pytest.raises(ConfigurationError):
        ScenarioSpec("s", None, master_seed=-1)


def test_monte_carlo_seed_derivation_and_determinism():
    spec = ScenarioSpec("toy", None, horizon=10, runs=5, master_seed=7)
    ens1 = run_monte_carlo(spec, _noisy_model())
    ens2 = run_monte_carlo(spec, _noisy_model())
    for t1, t2 in zip(ens1.trajectories, ens2.trajectories):
        assert np.array_equal(t1.series("y"), t2.series("y"))
    # each run uses the stream keyed from (master_seed, run_id)
    for rid, traj in enumerate(ens1.trajectories):
        assert traj.run_id == rid
        assert traj.seed == derive_run_seed(7, rid)
        solo = run_trajectory(
            SimState(0, {"x": 1.0, "y": 0.0}), NOISY, None, 10, seed=traj.seed, run_id=rid
        )
        assert np.array_equal(solo.series("y"), traj.series("y"))
    # a different master seed moves every run
    ens3 = run_monte_carlo(ScenarioSpec("toy", None, horizon=10, runs=5, master_seed=8), _noisy_model())
    assert not np.array_equal(ens1.trajectories[0].series("y"), ens3.trajectories[0].series("y"))


def test_parallel_equals_serial(monkeypatch):
    monkeypatch.delenv("XNSIM_MAX_WORKERS", raising=False)
    spec = ScenarioSpec("toy", None, horizon=20, runs=6, master_seed=3)
    serial = run_monte_carlo(spec, _noisy_model(), max_workers=1)
    parallel = run_monte_carlo(spec, _noisy_model(), max_workers=3)
    for a, b in zip(serial.trajectories, parallel.trajectories):
        assert np.array_equal(a.series("y"), b.series("y"))
        assert np.array_equal(a.series("x"), b.series("x"))


def test_ensemble_runner_must_cover_variables():
    def bad_runner(params, horizon, seeds, t0=0):
        return {"x": np.zeros((len(seeds), horizon + 1))}  # forgot "y"

    model = Model(
        name="bad",
        build_pipeline=lambda params: NOISY,
        initial_state=lambda params: SimState(0, {"x": 1.0, "y": 0.0}),
        ensemble_runner=bad_runner,
    )
    with pytest.raises(ConfigurationError):
        run_monte_carlo(ScenarioSpec("s", None, horizon=2, runs=2), model)


def test_divergence_carries_scenario_and_run():
    def blow_up(t, values, params, draws):
        return {"x": values["x"] * 1e30}

    pipe = UpdatePipeline((Stage("boom", ("x",), blow_up),))
    model = Model(
        name="boomy",
        build_pipeline=lambda params: pipe,
        initial_state=lambda params: SimState(0, {"x": 1.0}),
    )
    with pytest.raises(NumericalDivergenceError) as exc_info:
        run_monte_carlo(ScenarioSpec("hot", None, horizon=100, runs=2), model)
    assert exc_info.value.scenario_id == "hot"
    assert exc_info.value.run_id == 0


def test_sweep_rejects_duplicate_ids():
    spec = ScenarioSpec("dup", None, horizon=2, runs=1)
    with pytest.raises(ConfigurationError, match="dup"):
        sweep([spec, spec], _noisy_model())


def test_sweep_isolates_failures():
    def build(params):
        if params == "bad":
            raise ConfigurationError("bad params")
        return NOISY

    model = Model(
        name="mixed",
        build_pipeline=build,
        initial_state=lambda params: SimState(0, {"x": 1.0, "y": 0.0}),
    )
    good = ScenarioSpec("good", "ok", horizon=3, runs=2)
    bad = ScenarioSpec("broken", "bad", horizon=3, runs=2)
    with pytest.raises(SweepError) as exc_info:
        sweep([bad, good], model)
    err = exc_info.value
    assert [sid for sid, _ in err.failures] == ["broken"]
    assert isinstance(err.failures[0][1], ConfigurationError)
    assert [sid for sid, _ in err.completed] == ["good"]
    assert err.completed[0][1].runs == 2


def test_sweep_returns_ensembles_in_order():
    specs = [
        ScenarioSpec("a", None, horizon=3, runs=2),
        ScenarioSpec("b", None, horizon=3, runs=2, master_seed=9),
    ]
    ensembles = sweep(specs, _noisy_model())
    assert [e.scenario_id for e in ensembles] == ["a", "b"]


def _tiny_ensemble(rows):
    spec = ScenarioSpec("tiny", None, horizon=len(rows[0]) - 1, runs=len(rows))
    trajectories = tuple(
        Trajectory(run_id=i, seed=i, t0=0, columns={"v": np.array(row, dtype=float)})
        for i, row in enumerate(rows)
    )
    return Ensemble(scenario=spec, trajectories=trajectories)


def test_aggregate_frozen_example():
    ens = _tiny_ensemble([[1.0, 3.0], [3.0, 5.0]])
    agg = aggregate(ens, "v")
    assert np.array_equal(agg.mean, [2.0, 4.0])
    assert np.array_equal(agg.std, [1.0, 1.0])  # population std, ddof=0
    assert np.array_equal(agg.min, [1.0, 3.0])
    assert np.array_equal(agg.max, [3.0, 5.0])
    assert agg.runs == 2
    with pytest.raises(ValueError):
        agg.mean[0] = 0.0


def test_aggregate_unknown_variable():
    ens = _tiny_ensemble([[1.0, 2.0]])
    with pytest.raises(ConfigurationError, match="v"):
        aggregate(ens, "w")


@settings(deadline=None, max_examples=50)
@given(
    st.lists(
        st.lists(st.floats(-1e12, 1e12), min_size=3, max_size=3),
        min_size=1,
        max_size=6,
    )
)
def test_aggregate_bounds_property(rows):
    agg = aggregate(_tiny_ensemble(rows), "v")
    assert np.all(agg.min <= agg.mean + 1e-6 * np.maximum(1.0, np.abs(agg.mean)))
    assert np.all(agg.mean <= agg.max + 1e-6 * np.maximum(1.0, np.abs(agg.mean)))
    assert np.all(agg.std >= 0.0)


def test_resolve_max_workers(monkeypatch):
    monkeypatch.delenv("XNSIM_MAX_WORKERS", raising=False)
    assert resolve_max_workers(4, tasks=2) == 2
    assert resolve_max_workers(1, tasks=10) == 1
    assert resolve_max_workers(None, tasks=1) == 1
    monkeypatch.setenv("XNSIM_MAX_WORKERS", "2")
    assert resolve_max_workers(8, tasks=10) == 2
    monkeypatch.setenv("XNSIM_MAX_WORKERS", "zero")
    with pytest.raises(ConfigurationError):
        resolve_max_workers(2, tasks=4)
    monkeypatch.setenv("XNSIM_MAX_WORKERS", "0")
    with pytest.raises(ConfigurationError):
        resolve_max_workers(2, tasks=4)
