"""Built-in ensemble experiment over subsidy pool sizes.

The shipped experiment runs the subsidy economy at four starting pool
sizes (250, 500, 750 and 1000 million XNS) with a shared decay rate,
horizon and run count, and asks two questions of the results:

* do bigger pools buy persistent ordering in pool balance, payout and
  treasury drawdown, and
* do terminal developer incomes nevertheless converge across pool
  sizes, because the income-coupled growth retune compensates.

All four scenarios share one master seed. Each run id then maps to the
same shock sequence in every scenario (common random numbers), so
cross-scenario comparisons are paired rather than noise-dominated.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, replace
from typing import Mapping, Optional, Sequence

import numpy as np

from .errors import ConfigurationError
from .kernel import Ensemble, ScenarioSpec, aggregate
from .model import ModelParams

__all__ = [
    "TABLE3_POOL_SIZES",
    "TABLE3_DECAY_RATE",
    "TABLE3_HORIZON_DAYS",
    "TABLE3_RUNS",
    "DEFAULT_MASTER_SEED",
    "table3_scenarios",
    "income_convergence_spread",
    "terminal_income_spread",
    "terminal_treasury_values",
    "Verdict",
    "ordering_verdicts",
    "ScenarioSummary",
    "SweepReport",
    "build_sweep_report",
]

TABLE3_POOL_SIZES = (250e6, 500e6, 750e6, 1000e6)
TABLE3_DECAY_RATE = 5e-4
TABLE3_HORIZON_DAYS = 3652
TABLE3_RUNS = 100
DEFAULT_MASTER_SEED = 42


def table3_scenarios(
    runs: int = TABLE3_RUNS,
    horizon: int = TABLE3_HORIZON_DAYS,
    master_seed: int = DEFAULT_MASTER_SEED,
    **param_overrides,
) -> list[ScenarioSpec]:
    """The four pool-size scenarios, ready for the sweep runner.

    Keyword overrides are applied identically to every scenario's
    ModelParams (for example ``fees=FeeSpec(kind="per-app-fee")`` or
    ``price=PriceProxySpec()``). The quantities that define the
    experiment, initial_pool and decay_rate, cannot be overridden.
    """
    for key in ("initial_pool", "decay_rate"):
        if key in param_overrides:
            raise ConfigurationError(
                f"{key} defines the pool-size experiment and cannot be overridden; "
                f"build ScenarioSpecs directly instead"
            )
    scenarios = []
    for size in TABLE3_POOL_SIZES:
        try:
            params = replace(
                ModelParams(initial_pool=size, decay_rate=TABLE3_DECAY_RATE),
                **param_overrides,
            )
        except TypeError:
            valid = ", ".join(ModelParams.__dataclass_fields__)
            raise ConfigurationError(
                f"unknown ModelParams override(s) {sorted(param_overrides)}; "
                f"valid fields: {valid}"
            ) from None
        scenarios.append(
            ScenarioSpec(
                scenario_id=f"pool{int(size / 1e6)}m",
                params=params,
                horizon=horizon,
                runs=runs,
                master_seed=master_seed,
            )
        )
    return scenarios


def income_convergence_spread(values: Sequence[float]) -> float:
    """Relative spread (max - min) / mean of a set of income levels.

    Zero when all values coincide (including the all-zero case). The
    values must be finite and non-negative.
    """
    vals = [float(v) for v in values]
    if not vals:
        raise ConfigurationError("spread needs at least one value")
    if any(not np.isfinite(v) or v < 0 for v in vals):
        raise ConfigurationError(f"spread values must be finite and >= 0, got {vals}")
    hi = max(vals)
    lo = min(vals)
    if hi == lo:
        return 0.0
    return (hi - lo) / (sum(vals) / len(vals))


def terminal_income_spread(ensembles: Sequence[Ensemble]) -> float:
    """Convergence spread of mean terminal income across scenarios."""
    terminal = [float(aggregate(e, "I").mean[-1]) for e in ensembles]
    return income_convergence_spread(terminal)


def terminal_treasury_values(ensemble: Ensemble) -> np.ndarray:
    """Per-run terminal treasury value, balance times token price."""
    if "price" not in ensemble.variables:
        raise ConfigurationError(
            f"scenario {ensemble.scenario_id!r} has no price proxy; "
            f"treasury value needs one"
        )
    return np.array(
        [traj.series("T")[-1] * traj.series("price")[-1] for traj in ensemble.trajectories]
    )


@dataclass(frozen=True)
class Verdict:
    """Outcome of one ordering check across the pool-size scenarios.

    status is "ordered" when the expected strict ordering holds at
    every compared point, "degenerate-equal" when every comparison is
    an exact tie (e.g. a zero decay rate makes the scenarios
    indistinguishable), and "violated" otherwise. ``holds`` is True
    only for "ordered".
    """

    name: str
    holds: bool
    status: str
    detail: str


def _pairwise_verdict(name: str, series_by_scenario: list[np.ndarray], increasing: bool, detail: str) -> Verdict:
    any_violation = False
    all_equal = True
    for lo, hi in zip(series_by_scenario, series_by_scenario[1:]):
        diff = hi - lo
        if increasing:
            ok = diff > 0
        else:
            ok = diff < 0
        eq = diff == 0
        if not bool(np.all(ok | eq)):
            any_violation = True
        if not bool(np.all(eq)):
            all_equal = False
    if any_violation:
        return Verdict(name, False, "violated", detail)
    if all_equal:
        return Verdict(name, False, "degenerate-equal", detail)
    # no violations and not all ties; strictness still requires no ties
    for lo, hi in zip(series_by_scenario, series_by_scenario[1:]):
        diff = hi - lo
        if bool(np.any(diff == 0)):
            return Verdict(name, False, "violated", detail + " (ties present)")
    return Verdict(name, True, "ordered", detail)


def ordering_verdicts(ensembles: Sequence[Ensemble]) -> list[Verdict]:
    """Ordering checks across scenarios, sorted by initial pool size.

    Checked on ensemble means at every step after t=0:

    * pool-remaining: larger pools keep a strictly larger balance
    * cumulative-outlay: larger pools pay out strictly more
    * terminal-treasury: larger pools end with strictly less treasury
    * treasury-value: larger pools end with strictly more
      balance-times-price (only when every scenario carries the proxy)
    """
    if len(ensembles) < 2:
        raise ConfigurationError("ordering verdicts need at least two scenarios")
    ordered = sorted(ensembles, key=lambda e: e.scenario.params.initial_pool)
    ids = [e.scenario_id for e in ordered]

    pool_means = [aggregate(e, "A").mean[1:] for e in ordered]
    outlay_means = [aggregate(e, "cumulative_outlay").mean[1:] for e in ordered]
    treasury_terminal = [aggregate(e, "T").mean[-1:] for e in ordered]

    verdicts = [
        _pairwise_verdict(
            "pool-remaining", pool_means, True,
            f"mean remaining pool at each t >= 1, scenarios {ids}",
        ),
        _pairwise_verdict(
            "cumulative-outlay", outlay_means, True,
            f"mean cumulative payout at each t >= 1, scenarios {ids}",
        ),
        _pairwise_verdict(
            "terminal-treasury", treasury_terminal, False,
            f"mean terminal treasury balance, scenarios {ids}",
        ),
    ]
    if all("price" in e.variables for e in ordered):
        value_means = [np.array([float(np.mean(terminal_treasury_values(e)))]) for e in ordered]
        verdicts.append(
            _pairwise_verdict(
                "treasury-value", value_means, True,
                f"mean terminal treasury balance times price, scenarios {ids}",
            )
        )
    return verdicts


@dataclass(frozen=True)
class ScenarioSummary:
    """Terminal-state summary of one scenario's ensemble."""

    scenario_id: str
    initial_pool: float
    decay_rate: float
    runs: int
    horizon: int
    master_seed: int
    terminal_mean: Mapping[str, float]
    terminal_std: Mapping[str, float]


def _summarize(ensemble: Ensemble) -> ScenarioSummary:
    spec = ensemble.scenario
    mean: dict[str, float] = {}
    std: dict[str, float] = {}
    for var in ensemble.variables:
        agg = aggregate(ensemble, var)
        mean[var] = float(agg.mean[-1])
        std[var] = float(agg.std[-1])
    if "price" in ensemble.variables:
        values = terminal_treasury_values(ensemble)
        mean["treasury_value"] = float(np.mean(values))
        std["treasury_value"] = float(np.std(values))
    return ScenarioSummary(
        scenario_id=spec.scenario_id,
        initial_pool=spec.params.initial_pool,
        decay_rate=spec.params.decay_rate,
        runs=spec.runs,
        horizon=spec.horizon,
        master_seed=spec.master_seed,
        terminal_mean=mean,
        terminal_std=std,
    )


@dataclass(frozen=True)
class SweepReport:
    """Cross-scenario results of one sweep: summaries, spread, verdicts."""

    scenarios: tuple[ScenarioSummary, ...]
    income_spread: Optional[float]
    verdicts: tuple[Verdict, ...]
    elapsed_seconds: Optional[float] = None

    def to_dict(self) -> dict:
        return {
            "scenarios": [
                {
                    "scenario_id": s.scenario_id,
                    "initial_pool": s.initial_pool,
                    "decay_rate": s.decay_rate,
                    "runs": s.runs,
                    "horizon": s.horizon,
                    "master_seed": s.master_seed,
                    "terminal_mean": dict(s.terminal_mean),
                    "terminal_std": dict(s.terminal_std),
                }
                for s in self.scenarios
            ],
            "income_spread": self.income_spread,
            "verdicts": [
                {"name": v.name, "holds": v.holds, "status": v.status, "detail": v.detail}
                for v in self.verdicts
            ],
            "elapsed_seconds": self.elapsed_seconds,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    def to_text(self) -> str:
        lines = []
        header = (
            f"{'scenario':<12} {'pool (XNS)':>14} {'terminal I':>16} "
            f"{'terminal U':>14} {'terminal T':>18}"
        )
        lines.append(header)
        lines.append("-" * len(header))
        for s in self.scenarios:
            lines.append(
                f"{s.scenario_id:<12} {s.initial_pool:>14.4g} "
                f"{s.terminal_mean.get('I', float('nan')):>16.6g} "
                f"{s.terminal_mean.get('U', float('nan')):>14.6g} "
                f"{s.terminal_mean.get('T', float('nan')):>18.6g}"
            )
        if self.income_spread is not None:
            lines.append("")
            lines.append(f"terminal income spread (max-min)/mean: {self.income_spread:.6g}")
        if self.verdicts:
            lines.append("")
            for v in self.verdicts:
                flag = "PASS" if v.holds else "FAIL"
                lines.append(f"[{flag}] {v.name}: {v.status}")
        if self.elapsed_seconds is not None:
            lines.append("")
            lines.append(f"elapsed: {self.elapsed_seconds:.3f} s")
        return "\n".join(lines) + "\n"


def build_sweep_report(
    ensembles: Sequence[Ensemble], elapsed_seconds: Optional[float] = None
) -> SweepReport:
    """Summaries plus, when there are two or more scenarios, the
    cross-scenario income spread and ordering verdicts."""
    if not ensembles:
        raise ConfigurationError("sweep report needs at least one ensemble")
    summaries = tuple(_summarize(e) for e in ensembles)
    if len(ensembles) >= 2:
        spread = terminal_income_spread(ensembles)
        verdicts = tuple(ordering_verdicts(ensembles))
    else:
        spread = None
        verdicts = ()
    return SweepReport(
        scenarios=summaries,
        income_spread=spread,
        verdicts=verdicts,
        elapsed_seconds=elapsed_seconds,
    )
