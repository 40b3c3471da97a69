"""Application-subsidy token economy model (XNS denominated).

The modeled economy has four coupled pieces, advanced one day per step:

* a subsidy pool that decays exponentially, paying the decayed amount
  out to application developers every day;
* an application count that grows exponentially at a rate which is
  retuned on a fixed cadence as a function of developer income, so that
  a healthier developer economy attracts apps faster (up to a cap);
* developer income, the subsidy paid out to date plus per-app revenue;
* a treasury that funds the daily payout and optionally collects a
  platform fee proportional to per-app revenue.

An optional proxy maps adoption to a token price, ``p0 * (U/N0)**g``,
for studying the value rather than the size of treasury holdings.

State variables (column names in the emitted CSVs):

    A                   remaining subsidy pool, XNS
    outlay              amount paid out this step, XNS
    cumulative_outlay   total paid out since t=0, XNS
    U                   application count (continuum approximation)
    beta                current daily app growth rate
    I                   developer income to date, XNS
    fee_accrued         cumulative platform fees, XNS
    T                   treasury balance, XNS
    price               token price proxy (only when the proxy is on)
    treasury_warning    1.0 once the treasury balance is negative

The pipeline applies stages in a fixed order (decay, retune, growth,
fees, treasury, income, optional price); each stage sees the state as
updated by the stages before it in the same step. The identity
``I(t) = (A0 - A(t)) + c * U(t)`` therefore holds exactly at every
recorded step, and with fees off ``T0 - T(t)`` equals the cumulative
outlay to float precision.

Two steppers are provided and must agree bit-for-bit: a scalar one used
by the kernel's generic stage machinery, and a lockstep vectorized
ensemble runner. Vector arithmetic uses only exactly-rounded IEEE
elementwise operations, and every transcendental (exp, pow) is
evaluated per element with ``math.exp`` / scalar ``**``, which is what
guarantees the bit-for-bit equivalence.
"""

from __future__ import annotations

import math
from bisect import bisect_right
from dataclasses import dataclass, field, replace
from typing import Optional, Sequence

import numpy as np

from .errors import ConfigurationError, NumericalDivergenceError
from .kernel import Model, SimState, Stage, UpdatePipeline
from .rng import make_stream

__all__ = [
    "RetuneSpec",
    "FeeSpec",
    "NoiseSpec",
    "PriceProxySpec",
    "ModelParams",
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
    "INSOLAR",
    "DEFAULT_BETA_MIN",
    "DEFAULT_BETA_MAX",
    "DEFAULT_HALF_SATURATION",
    "DEFAULT_NOISE_SIGMA",
]

DEFAULT_BETA_MIN = 5e-4
DEFAULT_BETA_MAX = 1e-2
# Income scale at which the retuned growth rate reaches the midpoint of
# its band. Calibrated so that the four built-in pool sizes end the
# ten-year horizon with closely grouped developer incomes.
DEFAULT_HALF_SATURATION = 7.5e5
DEFAULT_NOISE_SIGMA = 0.01
DEFAULT_INITIAL_POOL = 250e6
DEFAULT_DECAY_RATE = 5e-4
DEFAULT_INITIAL_APPS = 10.0
DEFAULT_REVENUE_PER_APP = 100.0
DEFAULT_RETUNE_EVERY = 30
DEFAULT_TREASURY_INITIAL = 1e10
DEFAULT_PRICE_BASE = 1.0
DEFAULT_PRICE_ELASTICITY = 2.0
DEFAULT_FEE_RATE = 0.1

RETUNE_KINDS = ("saturating", "constant", "table")
FEE_KINDS = ("off", "per-app-fee")
NOISE_KINDS = ("off", "multiplicative-growth")
STEPPING_MODES = ("exact", "euler")

# time step of the shipped pipeline, in days
DT = 1.0


@dataclass(frozen=True)
class RetuneSpec:
    """How the app growth rate responds to developer income.

    saturating  beta_min + (beta_max - beta_min) * I / (I + half_saturation)
    constant    always ``value`` (clamped into the band)
    table       step function over income: ``table`` holds ascending
                (income_threshold, rate) pairs, first threshold 0.0

    Whatever the kind, the returned rate is clamped to
    [beta_min, beta_max].
    """

    kind: str = "saturating"
    beta_min: float = DEFAULT_BETA_MIN
    beta_max: float = DEFAULT_BETA_MAX
    half_saturation: float = DEFAULT_HALF_SATURATION
    value: Optional[float] = None
    table: Optional[tuple[tuple[float, float], ...]] = None


@dataclass(frozen=True)
class FeeSpec:
    """Platform fee. ``per-app-fee`` accrues rate * c * U each day."""

    kind: str = "off"
    rate: float = DEFAULT_FEE_RATE


@dataclass(frozen=True)
class NoiseSpec:
    """Monte Carlo stochasticity.

    ``multiplicative-growth`` multiplies each day's app growth factor by
    a mean-one lognormal shock, exp(sigma * z - sigma**2 / 2) with z a
    standard normal, so the expected growth factor is unchanged. The
    shipped defaults leave this on; oracle tests switch it off.
    """

    kind: str = "multiplicative-growth"
    sigma: float = DEFAULT_NOISE_SIGMA


@dataclass(frozen=True)
class PriceProxySpec:
    """Token price proxy: price = base_price * (U / N0) ** elasticity."""

    base_price: float = DEFAULT_PRICE_BASE
    elasticity: float = DEFAULT_PRICE_ELASTICITY


@dataclass(frozen=True)
class ModelParams:
    """Complete parameterization of the subsidy economy."""

    initial_pool: float = DEFAULT_INITIAL_POOL
    decay_rate: float = DEFAULT_DECAY_RATE
    initial_apps: float = DEFAULT_INITIAL_APPS
    initial_growth: float = DEFAULT_BETA_MIN
    revenue_per_app: float = DEFAULT_REVENUE_PER_APP
    retune_every: int = DEFAULT_RETUNE_EVERY
    treasury_initial: float = DEFAULT_TREASURY_INITIAL
    stepping: str = "exact"
    retune: RetuneSpec = field(default_factory=RetuneSpec)
    fees: FeeSpec = field(default_factory=FeeSpec)
    noise: NoiseSpec = field(default_factory=NoiseSpec)
    price: Optional[PriceProxySpec] = None


def _finite(x) -> bool:
    return isinstance(x, (int, float)) and math.isfinite(x)


def validate_params(params: ModelParams) -> list[str]:
    """All problems with a parameter set, empty when it is usable."""
    if not isinstance(params, ModelParams):
        return [f"params must be ModelParams, got {type(params).__name__}"]
    issues: list[str] = []
    p = params
    if not _finite(p.initial_pool) or p.initial_pool < 0:
        issues.append(f"initial_pool must be finite and >= 0, got {p.initial_pool!r}")
    if not _finite(p.decay_rate) or p.decay_rate < 0:
        issues.append(f"decay_rate must be finite and >= 0, got {p.decay_rate!r}")
    if not _finite(p.initial_apps) or p.initial_apps < 0:
        issues.append(f"initial_apps must be finite and >= 0, got {p.initial_apps!r}")
    if not _finite(p.revenue_per_app) or p.revenue_per_app < 0:
        issues.append(f"revenue_per_app must be finite and >= 0, got {p.revenue_per_app!r}")
    if not isinstance(p.retune_every, int) or p.retune_every < 1:
        issues.append(f"retune_every must be an int >= 1, got {p.retune_every!r}")
    if not _finite(p.treasury_initial) or p.treasury_initial < 0:
        issues.append(f"treasury_initial must be finite and >= 0, got {p.treasury_initial!r}")
    if p.stepping not in STEPPING_MODES:
        issues.append(f"stepping must be one of {STEPPING_MODES}, got {p.stepping!r}")
    elif p.stepping == "euler" and _finite(p.decay_rate) and p.decay_rate * DT >= 1.0:
        issues.append(
            f"euler stepping requires decay_rate * dt < 1 (the pool would go "
            f"negative), got decay_rate={p.decay_rate!r}"
        )

    r = p.retune
    if not isinstance(r, RetuneSpec):
        issues.append(f"retune must be a RetuneSpec, got {type(r).__name__}")
        r = None
    elif r.kind not in RETUNE_KINDS:
        issues.append(f"retune.kind must be one of {RETUNE_KINDS}, got {r.kind!r}")
    if r is not None:
        if not _finite(r.beta_min) or not _finite(r.beta_max) or r.beta_min < 0:
            issues.append(
                f"retune band must be finite with beta_min >= 0, got "
                f"[{r.beta_min!r}, {r.beta_max!r}]"
            )
        elif r.beta_min > r.beta_max:
            issues.append(f"retune.beta_min {r.beta_min!r} exceeds beta_max {r.beta_max!r}")
        else:
            if _finite(p.initial_growth) and not (r.beta_min <= p.initial_growth <= r.beta_max):
                issues.append(
                    f"initial_growth {p.initial_growth!r} lies outside the retune band "
                    f"[{r.beta_min!r}, {r.beta_max!r}]"
                )
        if not _finite(p.initial_growth):
            issues.append(f"initial_growth must be finite, got {p.initial_growth!r}")
        if r.kind == "saturating" and (not _finite(r.half_saturation) or r.half_saturation <= 0):
            issues.append(
                f"retune.half_saturation must be finite and > 0, got {r.half_saturation!r}"
            )
        if r.kind == "constant" and not _finite(r.value):
            issues.append(f"retune.value must be a finite number for kind 'constant', got {r.value!r}")
        if r.kind == "table":
            t = r.table
            if not t:
                issues.append("retune.table must be a non-empty sequence of (income, rate) pairs")
            else:
                thresholds = [pair[0] for pair in t]
                if thresholds[0] != 0.0:
                    issues.append(f"retune.table must start at income threshold 0.0, got {thresholds[0]!r}")
                if any(b >= a for a, b in zip(thresholds[1:], thresholds)):
                    issues.append(f"retune.table thresholds must be strictly ascending, got {thresholds}")
                if not all(_finite(x) for pair in t for x in pair):
                    issues.append("retune.table entries must all be finite numbers")

    f = p.fees
    if not isinstance(f, FeeSpec):
        issues.append(f"fees must be a FeeSpec, got {type(f).__name__}")
    elif f.kind not in FEE_KINDS:
        issues.append(f"fees.kind must be one of {FEE_KINDS}, got {f.kind!r}")
    elif not _finite(f.rate) or f.rate < 0:
        issues.append(f"fees.rate must be finite and >= 0, got {f.rate!r}")

    n = p.noise
    if not isinstance(n, NoiseSpec):
        issues.append(f"noise must be a NoiseSpec, got {type(n).__name__}")
    elif n.kind not in NOISE_KINDS:
        issues.append(f"noise.kind must be one of {NOISE_KINDS}, got {n.kind!r}")
    elif not _finite(n.sigma) or n.sigma < 0:
        issues.append(f"noise.sigma must be finite and >= 0, got {n.sigma!r}")

    pr = p.price
    if pr is not None:
        if not isinstance(pr, PriceProxySpec):
            issues.append(f"price must be a PriceProxySpec or None, got {type(pr).__name__}")
        else:
            if not _finite(pr.base_price) or pr.base_price < 0:
                issues.append(f"price.base_price must be finite and >= 0, got {pr.base_price!r}")
            if not _finite(pr.elasticity) or pr.elasticity < 0:
                issues.append(f"price.elasticity must be finite and >= 0, got {pr.elasticity!r}")
            if _finite(p.initial_apps) and p.initial_apps <= 0:
                issues.append("initial_apps must be > 0 when the price proxy is on")
    return issues


def _require_valid(params: ModelParams) -> ModelParams:
    issues = validate_params(params)
    if issues:
        raise ConfigurationError("invalid model parameters: " + "; ".join(issues))
    return params


# ---------------------------------------------------------------------------
# Composable single-step operations on small typed states. These are the
# reference forms of the arithmetic; the pipeline stages and the vectorized
# ensemble runner below reproduce them bit for bit.
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SubsidyPoolState:
    """Remaining pool, its starting size, and the daily decay rate."""

    remaining: float
    initial: float
    decay_rate: float


@dataclass(frozen=True)
class AppUsageState:
    """App count, its starting value, the current growth rate and its band."""

    count: float
    initial_count: float
    growth_rate: float
    retune_every: int = DEFAULT_RETUNE_EVERY
    growth_bounds: tuple[float, float] = (DEFAULT_BETA_MIN, DEFAULT_BETA_MAX)


@dataclass(frozen=True)
class DevIncomeState:
    """Developer income to date and the per-app revenue constant."""

    income: float
    revenue_per_app: float


@dataclass(frozen=True)
class TreasuryState:
    """Treasury balance, its starting value, and fees collected so far."""

    balance: float
    initial: float
    fee_accrued: float = 0.0


def subsidy_decay_step(
    pool: SubsidyPoolState, dt: float = DT, mode: str = "exact"
) -> tuple[SubsidyPoolState, float]:
    """One decay step; returns the new pool and the amount paid out.

    ``exact`` multiplies by exp(-decay_rate * dt); ``euler`` by
    (1 - decay_rate * dt) and refuses a step size that would take the
    pool negative. The pool never increases and never goes below zero.
    """
    if mode == "exact":
        remaining = pool.remaining * math.exp(-pool.decay_rate * dt)
    elif mode == "euler":
        if pool.decay_rate * dt >= 1.0:
            raise ConfigurationError(
                f"euler decay step requires decay_rate * dt < 1, got {pool.decay_rate * dt!r}"
            )
        remaining = pool.remaining * (1.0 - pool.decay_rate * dt)
    else:
        raise ConfigurationError(f"unknown stepping mode {mode!r}")
    outlay = pool.remaining - remaining
    return replace(pool, remaining=remaining), outlay


def app_growth_step(
    usage: AppUsageState, dt: float = DT, shock: float = 1.0, mode: str = "exact"
) -> AppUsageState:
    """One growth step at the current rate, times a multiplicative shock."""
    if mode == "exact":
        count = usage.count * math.exp(usage.growth_rate * dt) * shock
    elif mode == "euler":
        count = usage.count * (1.0 + usage.growth_rate * dt) * shock
    else:
        raise ConfigurationError(f"unknown stepping mode {mode!r}")
    return replace(usage, count=count)


def _clamp(x: float, lo: float, hi: float) -> float:
    if x < lo:
        return lo
    if x > hi:
        return hi
    return x


def retune_beta(income: float, spec: RetuneSpec, current_t: int = 0) -> float:
    """New growth rate for the given income, clamped to the band.

    The caller schedules this on the retune cadence (whenever the
    current time is a multiple of ``retune_every``); income must be
    non-negative.
    """
    probe = ModelParams(retune=spec)
    issues = [m for m in validate_params(probe) if m.startswith("retune")]
    if issues:
        raise ConfigurationError("invalid retune spec: " + "; ".join(issues))
    if not _finite(income) or income < 0:
        raise ConfigurationError(f"retune income must be finite and >= 0, got {income!r}")
    if spec.kind == "saturating":
        rate = spec.beta_min + (spec.beta_max - spec.beta_min) * (
            income / (income + spec.half_saturation)
        )
    elif spec.kind == "constant":
        rate = spec.value
    else:  # table
        thresholds = [pair[0] for pair in spec.table]
        rate = spec.table[bisect_right(thresholds, income) - 1][1]
    return _clamp(rate, spec.beta_min, spec.beta_max)


def dev_income(pool: SubsidyPoolState, usage: AppUsageState, revenue_per_app: float) -> float:
    """Income to date: subsidy paid out so far plus per-app revenue."""
    return (pool.initial - pool.remaining) + revenue_per_app * usage.count


def treasury_step(treasury: TreasuryState, outlay: float, fee_today: float) -> TreasuryState:
    """Fund one day's payout and bank one day's fees."""
    return replace(
        treasury,
        balance=(treasury.balance - outlay) + fee_today,
        fee_accrued=treasury.fee_accrued + fee_today,
    )


def fee_accrual(
    usage: AppUsageState, spec: FeeSpec, revenue_per_app: float, dt: float = DT
) -> float:
    """Platform fee accrued over one step: rate * c * U * dt, or zero."""
    if spec.kind == "off":
        return 0.0
    if spec.kind != "per-app-fee":
        raise ConfigurationError(f"fees.kind must be one of {FEE_KINDS}, got {spec.kind!r}")
    if not _finite(spec.rate) or spec.rate < 0:
        raise ConfigurationError(f"fees.rate must be finite and >= 0, got {spec.rate!r}")
    return spec.rate * revenue_per_app * usage.count * dt


def price_proxy(usage: AppUsageState, spec: PriceProxySpec) -> float:
    """Token price for the current adoption level."""
    if usage.initial_count <= 0:
        raise ConfigurationError(
            f"price proxy requires a positive initial app count, got {usage.initial_count!r}"
        )
    return spec.base_price * (usage.count / usage.initial_count) ** spec.elasticity


# ---------------------------------------------------------------------------
# Pipeline assembly (scalar path).
# ---------------------------------------------------------------------------

_BASE_VARIABLES = (
    "A",
    "outlay",
    "cumulative_outlay",
    "U",
    "beta",
    "I",
    "fee_accrued",
    "T",
    "treasury_warning",
)


def state_variables(params: ModelParams) -> tuple[str, ...]:
    """Variable names of the shipped pipeline, in CSV column order."""
    if params.price is not None:
        return _BASE_VARIABLES[:-1] + ("price", "treasury_warning")
    return _BASE_VARIABLES


def insolar_initial_state(params: ModelParams) -> SimState:
    """State at t=0. Income already satisfies I = (A0 - A) + c * U."""
    p = _require_valid(params)
    values = {
        "A": p.initial_pool,
        "outlay": 0.0,
        "cumulative_outlay": 0.0,
        "U": p.initial_apps,
        "beta": p.initial_growth,
        "I": p.revenue_per_app * p.initial_apps,
        "fee_accrued": 0.0,
        "T": p.treasury_initial,
    }
    if p.price is not None:
        values["price"] = p.price.base_price * (p.initial_apps / p.initial_apps) ** p.price.elasticity
    values["treasury_warning"] = 1.0 if p.treasury_initial < 0.0 else 0.0
    return SimState(0, values)


def build_insolar_pipeline(params: ModelParams) -> UpdatePipeline:
    """The subsidy-economy update pipeline, stages in fixed order.

    1. subsidy-decay   writes A, outlay, cumulative_outlay
    2. growth-retune   writes beta (new value only on the cadence)
    3. app-growth      writes U, consumes the step's shock draw if noisy
    4. platform-fees   writes fee_accrued
    5. treasury        writes T, treasury_warning
    6. income          writes I
    7. token-price     writes price (only when the proxy is on)
    """
    p = _require_valid(params)

    exact = p.stepping == "exact"
    decay_factor = math.exp(-p.decay_rate) if exact else 1.0 - p.decay_rate
    a0 = p.initial_pool
    c = p.revenue_per_app
    cadence = p.retune_every
    retune_spec = p.retune

    def update_pool(t, values, _params, _draws):
        a = values["A"]
        a_next = a * decay_factor
        paid = a - a_next
        return {
            "A": a_next,
            "outlay": paid,
            "cumulative_outlay": values["cumulative_outlay"] + paid,
        }

    def update_growth_rate(t, values, _params, _draws):
        if t % cadence:
            return {"beta": values["beta"]}
        return {"beta": retune_beta(values["I"], retune_spec, t)}

    noisy = p.noise.kind == "multiplicative-growth" and p.noise.sigma > 0.0
    sigma = p.noise.sigma
    drift = -0.5 * sigma * sigma

    if exact and noisy:

        def update_apps(t, values, _params, draws):
            shock = math.exp(drift + sigma * draws[0])
            return {"U": values["U"] * math.exp(values["beta"]) * shock}

    elif exact:

        def update_apps(t, values, _params, _draws):
            return {"U": values["U"] * math.exp(values["beta"])}

    elif noisy:

        def update_apps(t, values, _params, draws):
            shock = math.exp(drift + sigma * draws[0])
            return {"U": values["U"] * (1.0 + values["beta"]) * shock}

    else:

        def update_apps(t, values, _params, _draws):
            return {"U": values["U"] * (1.0 + values["beta"])}

    fees_on = p.fees.kind == "per-app-fee"
    rate_c = p.fees.rate * c if fees_on else 0.0

    if fees_on:

        def update_fees(t, values, _params, _draws):
            return {"fee_accrued": values["fee_accrued"] + rate_c * values["U"]}

        def update_treasury(t, values, _params, _draws):
            balance = (values["T"] - values["outlay"]) + rate_c * values["U"]
            return {"T": balance, "treasury_warning": 1.0 if balance < 0.0 else 0.0}

    else:

        def update_fees(t, values, _params, _draws):
            return {"fee_accrued": values["fee_accrued"]}

        def update_treasury(t, values, _params, _draws):
            balance = values["T"] - values["outlay"]
            return {"T": balance, "treasury_warning": 1.0 if balance < 0.0 else 0.0}

    def update_income(t, values, _params, _draws):
        return {"I": (a0 - values["A"]) + c * values["U"]}

    stages = [
        Stage("subsidy-decay", ("A", "outlay", "cumulative_outlay"), update_pool),
        Stage("growth-retune", ("beta",), update_growth_rate),
        Stage("app-growth", ("U",), update_apps, draws=1 if noisy else 0),
        Stage("platform-fees", ("fee_accrued",), update_fees),
        Stage("treasury", ("T", "treasury_warning"), update_treasury),
        Stage("income", ("I",), update_income),
    ]

    if p.price is not None:
        p0 = p.price.base_price
        gamma = p.price.elasticity
        n0 = p.initial_apps

        def update_price(t, values, _params, _draws):
            return {"price": p0 * (values["U"] / n0) ** gamma}

        stages.append(Stage("token-price", ("price",), update_price))

    return UpdatePipeline(tuple(stages))


# ---------------------------------------------------------------------------
# Lockstep vectorized ensemble runner. Bit-identical to per-run scalar
# stepping: elementwise +,-,*,/ and comparisons are exactly rounded, and
# exp/pow go through math.exp / scalar ** per element.
# ---------------------------------------------------------------------------


def _map_each(fn, values: np.ndarray, stage: str, t: int) -> np.ndarray:
    """fn over each element; OverflowError becomes a divergence error.

    math.exp and scalar ** raise instead of returning inf, so this is
    where the vector path turns that into the same typed error the
    scalar path gets from the kernel.
    """
    vals = values.tolist()
    try:
        return np.array([fn(x) for x in vals])
    except OverflowError:
        run_id = 0
        for run_id, x in enumerate(vals):
            try:
                fn(x)
            except OverflowError:
                break
        raise NumericalDivergenceError(
            f"stage {stage!r} overflowed", stage=stage, t=t, run_id=run_id
        ) from None


def _check_finite_vec(arr: np.ndarray, stage: str, variable: str, t: int) -> None:
    finite = np.isfinite(arr)
    if not finite.all():
        run_id = int(np.flatnonzero(~finite)[0])
        raise NumericalDivergenceError(
            f"stage {stage!r} produced a non-finite value for {variable!r}",
            stage=stage,
            variable=variable,
            t=t,
            run_id=run_id,
        )


def run_insolar_ensemble(
    params: ModelParams, horizon: int, seeds: Sequence[int], t0: int = 0
) -> dict[str, np.ndarray]:
    """All runs of one scenario advanced in lockstep.

    Returns one (runs, horizon+1) array per state variable. Run ``r``
    draws from its own stream keyed with ``seeds[r]``, exactly as the
    per-run path does, so the two paths agree bit for bit.
    """
    p = _require_valid(params)
    if not isinstance(horizon, int) or horizon < 0:
        raise ConfigurationError(f"horizon must be a non-negative int, got {horizon!r}")
    n_runs = len(seeds)
    if n_runs < 1:
        raise ConfigurationError("ensemble needs at least one seed")

    exact = p.stepping == "exact"
    decay_factor = math.exp(-p.decay_rate) if exact else 1.0 - p.decay_rate
    a0 = p.initial_pool
    c = p.revenue_per_app
    cadence = p.retune_every
    spec = p.retune
    noisy = p.noise.kind == "multiplicative-growth" and p.noise.sigma > 0.0
    sigma = p.noise.sigma
    drift = -0.5 * sigma * sigma
    fees_on = p.fees.kind == "per-app-fee"
    rate_c = p.fees.rate * c if fees_on else 0.0
    price_on = p.price is not None

    names = state_variables(p)
    columns = {name: np.empty((n_runs, horizon + 1)) for name in names}
    initial = insolar_initial_state(p).values
    for name in names:
        columns[name][:, 0] = initial[name]

    if noisy:
        shocks_z = np.empty((n_runs, horizon)) if horizon else None
        if horizon:
            for r, seed in enumerate(seeds):
                shocks_z[r] = make_stream(seed).standard_normal(horizon)

    A = np.full(n_runs, initial["A"])
    cum = np.full(n_runs, initial["cumulative_outlay"])
    U = np.full(n_runs, initial["U"])
    beta = np.full(n_runs, initial["beta"])
    income = np.full(n_runs, initial["I"])
    fee_acc = np.full(n_runs, initial["fee_accrued"])
    T = np.full(n_runs, initial["T"])
    # computed lazily so an exp overflow surfaces at the same step where
    # the scalar path would first evaluate it
    growth_factor = None

    if spec.kind == "table":
        thresholds = np.array([pair[0] for pair in spec.table])
        table_rates = np.array([pair[1] for pair in spec.table])

    if price_on:
        p0 = p.price.base_price
        gamma = p.price.elasticity
        n0 = p.initial_apps

        def price_of(x):
            return p0 * (x**gamma)

    with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
        for k in range(horizon):
            t = t0 + k
            i = k + 1

            # subsidy-decay
            A_next = A * decay_factor
            paid = A - A_next
            cum = cum + paid
            _check_finite_vec(A_next, "subsidy-decay", "A", i)
            _check_finite_vec(cum, "subsidy-decay", "cumulative_outlay", i)
            A = A_next

            # growth-retune
            if t % cadence == 0:
                if spec.kind == "saturating":
                    raw = spec.beta_min + (spec.beta_max - spec.beta_min) * (
                        income / (income + spec.half_saturation)
                    )
                elif spec.kind == "constant":
                    raw = np.full(n_runs, spec.value)
                else:
                    raw = table_rates[np.searchsorted(thresholds, income, side="right") - 1]
                beta = np.clip(raw, spec.beta_min, spec.beta_max)
                _check_finite_vec(beta, "growth-retune", "beta", i)
                growth_factor = None
            if growth_factor is None:
                growth_factor = _map_each(math.exp, beta, "app-growth", i) if exact else 1.0 + beta

            # app-growth
            if noisy:
                shock = _map_each(math.exp, drift + sigma * shocks_z[:, k], "app-growth", i)
                U = U * growth_factor * shock
            else:
                U = U * growth_factor
            _check_finite_vec(U, "app-growth", "U", i)

            # platform-fees and treasury
            if fees_on:
                fee_today = rate_c * U
                fee_acc = fee_acc + fee_today
                _check_finite_vec(fee_acc, "platform-fees", "fee_accrued", i)
                T = (T - paid) + fee_today
            else:
                T = T - paid
            _check_finite_vec(T, "treasury", "T", i)
            warning = np.where(T < 0.0, 1.0, 0.0)

            # income
            income = (a0 - A) + c * U
            _check_finite_vec(income, "income", "I", i)

            columns["A"][:, i] = A
            columns["outlay"][:, i] = paid
            columns["cumulative_outlay"][:, i] = cum
            columns["U"][:, i] = U
            columns["beta"][:, i] = beta
            columns["I"][:, i] = income
            columns["fee_accrued"][:, i] = fee_acc
            columns["T"][:, i] = T
            columns["treasury_warning"][:, i] = warning

            if price_on:
                price = _map_each(price_of, U / n0, "token-price", i)
                _check_finite_vec(price, "token-price", "price", i)
                columns["price"][:, i] = price

    return columns


INSOLAR = Model(
    name="insolar-app-subsidy",
    build_pipeline=build_insolar_pipeline,
    initial_state=insolar_initial_state,
    ensemble_runner=run_insolar_ensemble,
)
