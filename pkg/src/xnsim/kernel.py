"""Generic discrete-time state-space simulation engine.

A simulation is a state (time index plus an ordered map of named float
variables) advanced by an update pipeline. The pipeline is an ordered
list of named stages; each stage is a pure function

    (t, values, params, draws) -> partial delta

that reads the state as updated by the stages before it in the same step
and returns the variables it writes. No two stages may write the same
variable, which makes the merged delta unambiguous and lets one step be
reasoned about stage by stage. Stages declare up front how many
standard-normal draws they consume per step; the kernel supplies exactly
that many from the run's own counter-based stream, so adding or removing
a deterministic stage never shifts the randomness seen by another.

Trajectories are deterministic in (initial state, params, seed).
Ensembles derive one stream per run from the master seed, so results are
identical no matter how runs are scheduled; a model may ship a lockstep
vectorized runner (see `Model.ensemble_runner`), which is required to be
bit-identical to per-run stepping.

The `XNSIM_MAX_WORKERS` environment variable caps process parallelism
for the generic per-run path. It never changes results, only speed.
"""

from __future__ import annotations

import math
import os
from collections.abc import Callable, Iterator, Mapping, Sequence
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigurationError, NumericalDivergenceError, SweepError
from .rng import derive_run_seed, make_stream

__all__ = [
    "SimState",
    "Stage",
    "UpdatePipeline",
    "Trajectory",
    "Ensemble",
    "ScenarioSpec",
    "Model",
    "AggregateSeries",
    "step",
    "run_trajectory",
    "run_monte_carlo",
    "sweep",
    "aggregate",
    "resolve_max_workers",
]

WORKERS_ENV_VAR = "XNSIM_MAX_WORKERS"

StageUpdate = Callable[
    [int, Mapping[str, float], object, tuple[float, ...]], Mapping[str, float]
]


@dataclass(frozen=True)
class SimState:
    """One point in time: an index ``t`` and named real-valued variables."""

    t: int
    values: Mapping[str, float]

    def __post_init__(self):
        if not isinstance(self.t, int):
            raise ConfigurationError(f"state time index must be an int, got {self.t!r}")


@dataclass(frozen=True)
class Stage:
    """A named, pure update step.

    ``writes`` lists the variables the stage returns every step (writing
    an unchanged value is how a stage holds a variable constant).
    ``draws`` is the number of standard-normal draws consumed per step.
    """

    name: str
    writes: tuple[str, ...]
    update: StageUpdate
    draws: int = 0

    def __post_init__(self):
        if not self.name:
            raise ConfigurationError("stage name must be non-empty")
        if not self.writes:
            raise ConfigurationError(f"stage {self.name!r} declares no written variables")
        if len(set(self.writes)) != len(self.writes):
            raise ConfigurationError(f"stage {self.name!r} lists a written variable twice")
        if not isinstance(self.draws, int) or self.draws < 0:
            raise ConfigurationError(
                f"stage {self.name!r} declares an invalid draw count {self.draws!r}"
            )
        object.__setattr__(self, "writes_set", frozenset(self.writes))


@dataclass(frozen=True)
class UpdatePipeline:
    """Ordered stages applied once per step, each seeing its predecessors' writes."""

    stages: tuple[Stage, ...]

    def __post_init__(self):
        names = [s.name for s in self.stages]
        if len(set(names)) != len(names):
            raise ConfigurationError(f"duplicate stage names in pipeline: {names}")
        seen: dict[str, str] = {}
        for stage in self.stages:
            for var in stage.writes:
                if var in seen:
                    raise ConfigurationError(
                        f"variable {var!r} is written by both {seen[var]!r} and {stage.name!r}"
                    )
                seen[var] = stage.name
        object.__setattr__(self, "_written", tuple(seen))
        # flat tuples keep the hot loop free of attribute lookups
        object.__setattr__(
            self,
            "_compiled",
            tuple((s.update, s.draws, s.writes_set, s.name) for s in self.stages),
        )

    @property
    def variables(self) -> tuple[str, ...]:
        """All written variables, in first-write order."""
        return self._written

    @property
    def draws_per_step(self) -> int:
        return sum(s.draws for s in self.stages)


def _apply_step(t, values, compiled, row, params):
    """Advance ``values`` in place by one step. ``row`` holds this step's draws."""
    offset = 0
    isfinite = math.isfinite
    for update, n_draws, writes_set, name in compiled:
        if n_draws:
            draws = tuple(row[offset : offset + n_draws])
            offset += n_draws
        else:
            draws = ()
        try:
            delta = update(t, values, params, draws)
        except KeyError as exc:
            raise ConfigurationError(
                f"stage {name!r} reads undefined variable {exc.args[0]!r} at t={t}"
            ) from exc
        except OverflowError as exc:
            # math.exp and ** raise instead of returning inf
            raise NumericalDivergenceError(
                f"stage {name!r} overflowed: {exc}", stage=name, t=t + 1
            ) from None
        if delta.keys() != writes_set:
            raise ConfigurationError(
                f"stage {name!r} wrote {sorted(delta)} but declares {sorted(writes_set)}"
            )
        for var, value in delta.items():
            if not isfinite(value):
                raise NumericalDivergenceError(
                    f"stage {name!r} produced a non-finite value for {var!r}",
                    stage=name,
                    variable=var,
                    t=t + 1,
                )
            values[var] = value


def _check_state_covers(state: SimState, pipeline: UpdatePipeline) -> None:
    missing = [v for v in pipeline.variables if v not in state.values]
    if missing:
        raise ConfigurationError(
            f"initial state is missing pipeline variables: {missing}; "
            f"present: {list(state.values)}"
        )


def step(
    state: SimState,
    pipeline: UpdatePipeline,
    params: object,
    rng: np.random.Generator,
) -> SimState:
    """Apply one step of the pipeline and return the state at ``t + 1``.

    Pure: the input state is not modified, and calling again from the
    same state with a generator in the same position gives the same
    result. Consumes exactly ``pipeline.draws_per_step`` draws.
    """
    _check_state_covers(state, pipeline)
    values = dict(state.values)
    n = pipeline.draws_per_step
    row = tuple(float(x) for x in rng.standard_normal(n)) if n else ()
    _apply_step(state.t, values, pipeline._compiled, row, params)
    return SimState(state.t + 1, values)


@dataclass(frozen=True, eq=False)
class Trajectory:
    """One run's recorded path: a column of floats per variable.

    Columns have length ``horizon + 1`` (the initial state is row 0) and
    are read-only once emitted.
    """

    run_id: int
    seed: int
    t0: int
    columns: Mapping[str, np.ndarray]

    def __post_init__(self):
        for arr in self.columns.values():
            arr.setflags(write=False)

    @property
    def variables(self) -> tuple[str, ...]:
        return tuple(self.columns)

    @property
    def horizon(self) -> int:
        return len(next(iter(self.columns.values()))) - 1

    def __len__(self) -> int:
        return self.horizon + 1

    def series(self, variable: str) -> np.ndarray:
        try:
            return self.columns[variable]
        except KeyError:
            raise ConfigurationError(
                f"unknown variable {variable!r}; valid names: {list(self.columns)}"
            ) from None

    def state(self, index: int) -> SimState:
        n = len(self)
        if index < 0:
            index += n
        if not 0 <= index < n:
            raise IndexError(f"state index {index} out of range for {n} recorded steps")
        return SimState(
            self.t0 + index, {name: float(col[index]) for name, col in self.columns.items()}
        )

    def __iter__(self) -> Iterator[SimState]:
        for i in range(len(self)):
            yield self.state(i)


def run_trajectory(
    initial: SimState,
    pipeline: UpdatePipeline,
    params: object,
    horizon: int,
    seed: int,
    run_id: int = 0,
) -> Trajectory:
    """Step ``initial`` forward ``horizon`` times, recording every state.

    Deterministic in (initial, params, seed). All stochastic draws come
    from a single counter-based stream keyed with ``seed``; a pipeline
    that declares zero draws never touches the stream, so its result is
    seed-independent.
    """
    if not isinstance(horizon, int) or horizon < 0:
        raise ConfigurationError(f"horizon must be a non-negative int, got {horizon!r}")
    _check_state_covers(initial, pipeline)

    values = dict(initial.values)
    names = list(values)
    columns = {name: np.empty(horizon + 1) for name in names}
    for name in names:
        columns[name][0] = values[name]

    n_draws = pipeline.draws_per_step
    if n_draws:
        draw_rows = make_stream(seed).standard_normal((horizon, n_draws)).tolist()
    else:
        draw_rows = None

    compiled = pipeline._compiled
    record = [(name, columns[name]) for name in names]
    t0 = initial.t
    try:
        for k in range(horizon):
            row = draw_rows[k] if draw_rows is not None else ()
            _apply_step(t0 + k, values, compiled, row, params)
            i = k + 1
            for name, col in record:
                col[i] = values[name]
    except NumericalDivergenceError as exc:
        exc.run_id = run_id
        raise
    return Trajectory(run_id=run_id, seed=seed, t0=t0, columns=columns)


@dataclass(frozen=True)
class ScenarioSpec:
    """A named, fully-specified ensemble: params, horizon, runs, master seed."""

    scenario_id: str
    params: object
    horizon: int = 3652
    runs: int = 100
    master_seed: int = 42

    def __post_init__(self):
        if not self.scenario_id or not isinstance(self.scenario_id, str):
            raise ConfigurationError(f"scenario_id must be a non-empty string, got {self.scenario_id!r}")
        if not isinstance(self.horizon, int) or self.horizon < 1:
            raise ConfigurationError(
                f"scenario {self.scenario_id!r}: horizon must be an int >= 1, got {self.horizon!r}"
            )
        if not isinstance(self.runs, int) or self.runs < 1:
            raise ConfigurationError(
                f"scenario {self.scenario_id!r}: runs must be an int >= 1, got {self.runs!r}"
            )
        if not isinstance(self.master_seed, int) or not 0 <= self.master_seed < 1 << 64:
            raise ConfigurationError(
                f"scenario {self.scenario_id!r}: master_seed must be an int in [0, 2**64), "
                f"got {self.master_seed!r}"
            )


@dataclass(frozen=True)
class Model:
    """Binds a parameter type to the callables the kernel needs.

    ``ensemble_runner`` is an optional lockstep fast path with signature
    ``(params, horizon, seeds, t0) -> {variable: (runs, horizon+1) array}``.
    When provided it must be bit-identical to running each trajectory
    separately with `run_trajectory`; the kernel uses it for ensembles.
    """

    name: str
    build_pipeline: Callable[[object], UpdatePipeline]
    initial_state: Callable[[object], SimState]
    ensemble_runner: Callable[..., Mapping[str, np.ndarray]] | None = None


@dataclass(frozen=True, eq=False)
class Ensemble:
    """All trajectories of one scenario, ordered by ascending run_id."""

    scenario: ScenarioSpec
    trajectories: tuple[Trajectory, ...]

    @property
    def scenario_id(self) -> str:
        return self.scenario.scenario_id

    @property
    def runs(self) -> int:
        return len(self.trajectories)

    @property
    def variables(self) -> tuple[str, ...]:
        return self.trajectories[0].variables


def resolve_max_workers(requested: int | None, tasks: int) -> int:
    """Worker count for the per-run path: request, env cap, then CPU count."""
    env = os.environ.get(WORKERS_ENV_VAR)
    cap = None
    if env is not None and env != "":
        try:
            cap = int(env)
        except ValueError:
            raise ConfigurationError(
                f"{WORKERS_ENV_VAR} must be an integer, got {env!r}"
            ) from None
        if cap < 1:
            raise ConfigurationError(f"{WORKERS_ENV_VAR} must be >= 1, got {cap}")
    workers = requested if requested is not None else (os.cpu_count() or 1)
    if workers < 1:
        raise ConfigurationError(f"max_workers must be >= 1, got {workers}")
    if cap is not None:
        workers = min(workers, cap)
    return max(1, min(workers, tasks))


def _mc_worker(args):
    build_pipeline, initial_state, params, horizon, seed, run_id = args
    pipeline = build_pipeline(params)
    return run_trajectory(initial_state(params), pipeline, params, horizon, seed, run_id=run_id)


def run_monte_carlo(
    scenario: ScenarioSpec,
    model: Model,
    *,
    max_workers: int | None = None,
) -> Ensemble:
    """Run ``scenario.runs`` independent trajectories of one scenario.

    Each run's stream is derived from (master_seed, run_id), so the
    ensemble is fully determined by the scenario alone: scheduling,
    worker count, and the choice between the per-run path and a model's
    vectorized runner never change a single bit of the result. A failed
    run aborts the ensemble with the run id and time index attached.
    """
    pipeline = model.build_pipeline(scenario.params)
    initial = model.initial_state(scenario.params)
    _check_state_covers(initial, pipeline)
    seeds = [derive_run_seed(scenario.master_seed, rid) for rid in range(scenario.runs)]

    try:
        if model.ensemble_runner is not None:
            stacked = model.ensemble_runner(scenario.params, scenario.horizon, seeds, t0=initial.t)
            if tuple(stacked) != tuple(initial.values):
                raise ConfigurationError(
                    f"model {model.name!r}: ensemble runner returned variables "
                    f"{list(stacked)} but the initial state declares {list(initial.values)}"
                )
            trajectories = tuple(
                Trajectory(
                    run_id=rid,
                    seed=seeds[rid],
                    t0=initial.t,
                    columns={name: stacked[name][rid] for name in stacked},
                )
                for rid in range(scenario.runs)
            )
        else:
            tasks = [
                (model.build_pipeline, model.initial_state, scenario.params, scenario.horizon, seeds[rid], rid)
                for rid in range(scenario.runs)
            ]
            workers = resolve_max_workers(max_workers, scenario.runs)
            if workers == 1:
                trajectories = tuple(_mc_worker(task) for task in tasks)
            else:
                with ProcessPoolExecutor(max_workers=workers) as pool:
                    chunk = max(1, scenario.runs // (workers * 4))
                    trajectories = tuple(pool.map(_mc_worker, tasks, chunksize=chunk))
    except NumericalDivergenceError as exc:
        exc.scenario_id = scenario.scenario_id
        raise
    return Ensemble(scenario=scenario, trajectories=trajectories)


def sweep(
    scenarios: Sequence[ScenarioSpec],
    model: Model,
    *,
    max_workers: int | None = None,
) -> list[Ensemble]:
    """Run several scenarios and return their ensembles in input order.

    A scenario failure does not stop the sweep: the remaining scenarios
    still run, then a `SweepError` carrying both the failures and the
    completed ensembles is raised.
    """
    ids = [s.scenario_id for s in scenarios]
    if len(set(ids)) != len(ids):
        raise ConfigurationError(f"duplicate scenario ids in sweep: {ids}")
    ensembles: list[Ensemble] = []
    failures: list[tuple[str, Exception]] = []
    completed: list[tuple[str, Ensemble]] = []
    for scenario in scenarios:
        try:
            ensemble = run_monte_carlo(scenario, model, max_workers=max_workers)
        except (ConfigurationError, NumericalDivergenceError) as exc:
            failures.append((scenario.scenario_id, exc))
            continue
        ensembles.append(ensemble)
        completed.append((scenario.scenario_id, ensemble))
    if failures:
        details = "; ".join(f"{sid}: {exc}" for sid, exc in failures)
        raise SweepError(
            f"{len(failures)} of {len(scenarios)} scenarios failed: {details}",
            failures=failures,
            completed=completed,
        )
    return ensembles


@dataclass(frozen=True, eq=False)
class AggregateSeries:
    """Per-timestep mean/std/min/max of one variable across an ensemble.

    ``std`` is the population standard deviation (ddof=0). Statistics are
    accumulated over runs in ascending run_id order with a fixed pairwise
    reduction, so repeated aggregation is bit-stable.
    """

    variable: str
    runs: int
    mean: np.ndarray
    std: np.ndarray
    min: np.ndarray
    max: np.ndarray

    def __post_init__(self):
        for arr in (self.mean, self.std, self.min, self.max):
            arr.setflags(write=False)


def aggregate(ensemble: Ensemble, variable: str) -> AggregateSeries:
    """Cross-run statistics of one variable at every recorded step."""
    valid = ensemble.variables
    if variable not in valid:
        raise ConfigurationError(f"unknown variable {variable!r}; valid names: {list(valid)}")
    stacked = np.stack([traj.series(variable) for traj in ensemble.trajectories])
    return AggregateSeries(
        variable=variable,
        runs=len(ensemble.trajectories),
        mean=stacked.mean(axis=0),
        std=stacked.std(axis=0, ddof=0),
        min=stacked.min(axis=0),
        max=stacked.max(axis=0),
    )
