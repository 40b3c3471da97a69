"""Discrete-time simulator for subsidy-driven token economies.

The kernel advances named state variables through an ordered stage
pipeline with per-run reproducible randomness; the shipped model wires
that kernel into a subsidy-pool economy (decaying pool, income-coupled
app growth, treasury, optional fees and price proxy); the experiment
layer runs the built-in pool-size sweep and judges its orderings.
"""

__version__ = "0.1.0"

from .errors import (
    ConfigurationError,
    NumericalDivergenceError,
    SimulationError,
    SweepError,
)
from .kernel import (
    AggregateSeries,
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
from .rng import derive_run_seed, make_stream
from .model import (
    INSOLAR,
    AppUsageState,
    DevIncomeState,
    FeeSpec,
    ModelParams,
    NoiseSpec,
    PriceProxySpec,
    RetuneSpec,
    SubsidyPoolState,
    TreasuryState,
    app_growth_step,
    build_insolar_pipeline,
    dev_income,
    fee_accrual,
    insolar_initial_state,
    price_proxy,
    retune_beta,
    run_insolar_ensemble,
    state_variables,
    subsidy_decay_step,
    treasury_step,
    validate_params,
)
from .experiment import (
    SweepReport,
    Verdict,
    build_sweep_report,
    income_convergence_spread,
    ordering_verdicts,
    table3_scenarios,
    terminal_income_spread,
    terminal_treasury_values,
)
from .scenario import (
    apply_overrides,
    load_scenarios,
    parse_scenarios,
    params_to_dict,
    resolved_config,
)

__all__ = [
    "__version__",
    "SimulationError",
    "ConfigurationError",
    "NumericalDivergenceError",
    "SweepError",
    "SimState",
    "Stage",
    "UpdatePipeline",
    "step",
    "run_trajectory",
    "Trajectory",
    "ScenarioSpec",
    "Model",
    "Ensemble",
    "run_monte_carlo",
    "sweep",
    "aggregate",
    "AggregateSeries",
    "resolve_max_workers",
    "derive_run_seed",
    "make_stream",
    "ModelParams",
    "RetuneSpec",
    "FeeSpec",
    "NoiseSpec",
    "PriceProxySpec",
    "SubsidyPoolState",
    "AppUsageState",
    "DevIncomeState",
    "TreasuryState",
    "subsidy_decay_step",
    "app_growth_step",
    "retune_beta",
    "dev_income",
    "treasury_step",
    "fee_accrual",
    "price_proxy",
    "build_insolar_pipeline",
    "insolar_initial_state",
    "run_insolar_ensemble",
    "state_variables",
    "validate_params",
    "INSOLAR",
    "table3_scenarios",
    "income_convergence_spread",
    "terminal_income_spread",
    "terminal_treasury_values",
    "ordering_verdicts",
    "Verdict",
    "SweepReport",
    "build_sweep_report",
    "load_scenarios",
    "parse_scenarios",
    "resolved_config",
    "params_to_dict",
    "apply_overrides",
]
