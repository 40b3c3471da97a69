"""Exception types shared across the package.

The command line maps these onto process exit codes: configuration
problems exit with 2, numerical divergence with 3. Library users catch
them directly.
"""

from __future__ import annotations


class SimulationError(Exception):
    """Base class for every error raised by this package."""


class ConfigurationError(SimulationError):
    """A scenario, parameter set, pipeline, or file is malformed.

    Raised before or during a run when the inputs cannot be executed as
    given (unknown keys, out-of-range values, missing state variables,
    conflicting stage declarations). The message lists every offending
    field when several are wrong at once.
    """


class NumericalDivergenceError(SimulationError):
    """A stage produced a non-finite value (NaN or infinity).

    ``stage`` names the pipeline stage whose output failed the finiteness
    check, ``variable`` the state variable it wrote, and ``t`` the time
    index the value would have been recorded at. ``run_id`` and
    ``scenario_id`` are attached as the error propagates out of ensemble
    and sweep runs.
    """

    def __init__(
        self,
        message: str,
        *,
        stage: str | None = None,
        variable: str | None = None,
        t: int | None = None,
        run_id: int | None = None,
        scenario_id: str | None = None,
    ):
        super().__init__(message)
        self.stage = stage
        self.variable = variable
        self.t = t
        self.run_id = run_id
        self.scenario_id = scenario_id

    def __str__(self) -> str:
        parts = [super().__str__()]
        context = []
        if self.scenario_id is not None:
            context.append(f"scenario={self.scenario_id}")
        if self.run_id is not None:
            context.append(f"run_id={self.run_id}")
        if self.stage is not None:
            context.append(f"stage={self.stage}")
        if self.variable is not None:
            context.append(f"variable={self.variable}")
        if self.t is not None:
            context.append(f"t={self.t}")
        if context:
            parts.append(" (" + ", ".join(context) + ")")
        return "".join(parts)

    # keeps the keyword-only attributes intact across process boundaries
    def __reduce__(self):
        return (
            _rebuild_divergence,
            (
                self.args[0] if self.args else "",
                self.stage,
                self.variable,
                self.t,
                self.run_id,
                self.scenario_id,
            ),
        )


def _rebuild_divergence(message, stage, variable, t, run_id, scenario_id):
    return NumericalDivergenceError(
        message,
        stage=stage,
        variable=variable,
        t=t,
        run_id=run_id,
        scenario_id=scenario_id,
    )


class SweepError(SimulationError):
    """One or more scenarios of a sweep failed.

    The sweep always finishes the remaining scenarios before raising.
    ``failures`` holds ``(scenario_id, exception)`` pairs and
    ``completed`` the ``(scenario_id, ensemble)`` pairs that succeeded.
    """

    def __init__(self, message: str, *, failures=(), completed=()):
        super().__init__(message)
        self.failures = list(failures)
        self.completed = list(completed)
