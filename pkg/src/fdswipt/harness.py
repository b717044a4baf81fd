"""Monte-Carlo experiment orchestration and CSV emission.

Every trial owns an independent channel derived from (master seed, trial
index) only, so different methods and different sweep powers see the same
channel sequence: comparisons are paired by construction.  Trials fan out
over a process pool and are reassembled in trial order, which keeps the
aggregation (and the CSV bytes) independent of scheduling.
"""

import math
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .allocation import allocate_antennas, exhaustive_search
from .channel import ChannelParams, partition, sample_channel
from .metrics import (
    CovariancePair,
    PowerBudget,
    clamp_harvest,
    harvested_power,
    info_rate,
    time_switching_rate,
)
from .numerics import ContractError, DomainError, NumericalFailureError
from .precoding import ScaSettings, equal_power, sca_precoding
from .units import dbm_to_watt
from . import drl

METHODS = (
    "antenna_split_sca",
    "antenna_split_equal_power",
    "time_switching",
    "drl_policy",
    "exhaustive",
)

CSV_HEADER = "method,ps_dbm,mean_rate,std_rate,mean_harvested_w,trials,wall_ms"
COMPARE_HEADER = "ps_dbm,method_a,method_b,mean_gain,paired_se,trials"

# Fraction of failed trials beyond which a row marks the run degraded.
DEGRADED_FAILURE_FRACTION = 0.01


@dataclass(frozen=True)
class ExperimentScenario:
    """One harness run: a method over a power sweep."""

    method: str
    m: int = 4
    n: int = 4
    ps_dbm: tuple = (20.0, 30.0, 40.0, 50.0)
    trials: int = 10000
    master_seed: int = 1
    rician_k_db: float = 10.0
    si_attenuation_db: float = 0.0
    noise_psd_dbm_hz: float = -169.0
    bandwidth_hz: float = 1.0e6
    alpha: float = 0.5
    p_q_dbm: float = None           # None tracks p_s
    raw_objective: bool = False
    prefer_max_gain: bool = False
    sca: ScaSettings = field(default_factory=ScaSettings)
    ts_tau: float = 0.5
    power_grid: int = 8
    policy_path: str = None
    rollout_steps: int = 10
    workers: int = 0                # 0 = one per CPU

    def __post_init__(self):
        if self.method not in METHODS:
            raise ContractError(f"unknown method {self.method!r}; expected one of {METHODS}")
        if self.trials < 1:
            raise ContractError("trials must be at least 1")
        if not self.ps_dbm:
            raise ContractError("power sweep must be nonempty")
        if self.method == "drl_policy" and not self.policy_path:
            raise ContractError("drl_policy requires a policy_path")

    def channel_params(self):
        return ChannelParams(
            m=self.m, n=self.n, rician_k_db=self.rician_k_db,
            si_attenuation_db=self.si_attenuation_db,
            noise_psd_dbm_hz=self.noise_psd_dbm_hz, bandwidth_hz=self.bandwidth_hz)

    def budget(self, ps_dbm):
        p_s = dbm_to_watt(ps_dbm)
        p_q = p_s if self.p_q_dbm is None else dbm_to_watt(self.p_q_dbm)
        return PowerBudget(p_s=p_s, p_h=p_s, p_q=p_q, alpha=self.alpha,
                           raw_objective=self.raw_objective)


@dataclass
class ResultRow:
    method: str
    ps_dbm: float
    mean_rate: float
    std_rate: float
    mean_harvested_w: float
    trials: int
    wall_ms: float
    failures: int = 0

    @property
    def degraded(self):
        attempted = self.trials + self.failures
        return attempted > 0 and self.failures > DEGRADED_FAILURE_FRACTION * attempted


def trial_seed(master_seed, trial):
    """Per-trial channel seed; depends on (master, trial) only."""
    return int(np.random.SeedSequence((int(master_seed), int(trial))).generate_state(1)[0])


_POLICY_CACHE = {}


def _policy(path):
    if path not in _POLICY_CACHE:
        _POLICY_CACHE[path] = drl.load_policy(path)
    return _POLICY_CACHE[path]


def evaluate_trial(scenario, ps_dbm, trial):
    """One (method, power, trial) evaluation -> (rate bps/Hz, harvested W)."""
    params = scenario.channel_params()
    budget = scenario.budget(ps_dbm)
    sigma2 = params.sigma2
    chan = sample_channel(params, trial_seed(scenario.master_seed, trial))

    if scenario.method == "time_switching":
        rate = time_switching_rate(chan, budget, scenario.ts_tau, sigma2)
        harvest_w = budget.p_s / chan.m * float(np.linalg.norm(chan.h) ** 2) \
            + chan.n * sigma2
        return rate, clamp_harvest(scenario.ts_tau * harvest_w, budget.p_s)

    if scenario.method == "drl_policy":
        artifact = _policy(scenario.policy_path)
        if (artifact.m, artifact.n) != (scenario.m, scenario.n):
            raise ContractError("policy artifact antenna counts do not match the scenario")
        rng = np.random.default_rng(trial_seed(scenario.master_seed, trial) ^ 0x5EED)
        return drl.rollout_policy(artifact, chan, budget, scenario.rollout_steps,
                                  sigma2, rng=rng)

    if scenario.method == "exhaustive":
        config, pair, _ = exhaustive_search(chan, budget, scenario.power_grid, sigma2)
        sub = partition(chan, config, sigma2)
    else:
        config = allocate_antennas(chan, budget.p_s, budget.p_q,
                                   prefer_max_gain=scenario.prefer_max_gain)
        sub = partition(chan, config, sigma2)
        if scenario.method == "antenna_split_sca":
            pair, _, _, _ = sca_precoding(sub, budget, scenario.sca)
        else:
            pair = equal_power(sub, budget)
    rate = info_rate(sub, pair)
    harvested = clamp_harvest(harvested_power(sub, pair), budget.p_s)
    return rate, harvested


def _run_chunk(scenario, ps_dbm, trials):
    rates = np.full(len(trials), np.nan)
    harvested = np.full(len(trials), np.nan)
    for k, trial in enumerate(trials):
        try:
            rates[k], harvested[k] = evaluate_trial(scenario, ps_dbm, trial)
        except (DomainError, NumericalFailureError):
            pass
    return rates, harvested


def _point_values(scenario, ps_dbm, pool):
    """Per-trial (rates, harvested) arrays in trial order; NaN marks failure."""
    trials = list(range(scenario.trials))
    if pool is None:
        return _run_chunk(scenario, ps_dbm, trials)
    workers = pool._max_workers
    chunk = max(1, math.ceil(len(trials) / (4 * workers)))
    pieces = [trials[i:i + chunk] for i in range(0, len(trials), chunk)]
    rates = np.empty(0)
    harvested = np.empty(0)
    for part_rates, part_harv in pool.map(
            _run_chunk, [scenario] * len(pieces), [ps_dbm] * len(pieces), pieces):
        rates = np.concatenate([rates, part_rates])
        harvested = np.concatenate([harvested, part_harv])
    return rates, harvested


def _pool_for(scenario):
    workers = scenario.workers if scenario.workers > 0 else (os.cpu_count() or 1)
    if workers == 1 or scenario.trials < 32:
        return None
    return ProcessPoolExecutor(max_workers=workers)


def run_monte_carlo(scenario, csv_path=None, sidecar=None):
    """Run the sweep and return one ResultRow per power point.

    When ``csv_path`` is given the rows are written there (byte-identical
    across repeated runs with the same scenario) and the resolved scenario
    plus timing/failure telemetry lands in the sidecar mapping if provided.
    """
    rows = []
    pool = _pool_for(scenario)
    try:
        for ps_dbm in scenario.ps_dbm:
            started = time.perf_counter()
            rates, harvested = _point_values(scenario, ps_dbm, pool)
            wall_ms = (time.perf_counter() - started) * 1e3
            ok = np.isfinite(rates)
            n_ok = int(ok.sum())
            failures = len(rates) - n_ok
            mean_rate = float(np.sum(rates[ok]) / n_ok) if n_ok else 0.0
            std_rate = float(np.std(rates[ok])) if n_ok else 0.0
            mean_harv = float(np.sum(harvested[ok]) / n_ok) if n_ok else 0.0
            rows.append(ResultRow(
                method=scenario.method, ps_dbm=float(ps_dbm), mean_rate=mean_rate,
                std_rate=std_rate, mean_harvested_w=mean_harv, trials=n_ok,
                wall_ms=wall_ms, failures=failures))
    finally:
        if pool is not None:
            pool.shutdown()
    if csv_path is not None:
        with open(csv_path, "w") as fh:
            write_results_csv(rows, fh)
    if sidecar is not None:
        sidecar["rows"] = [
            {"ps_dbm": r.ps_dbm, "wall_ms": round(r.wall_ms, 3),
             "failures": r.failures, "trials": r.trials} for r in rows]
    return rows


def write_results_csv(rows, stream):
    """Stable schema; the wall_ms column is written as 0 so that repeated
    runs produce byte-identical files (measured timings go to the sidecar)."""
    stream.write(CSV_HEADER + "\n")
    for r in rows:
        stream.write(f"{r.method},{r.ps_dbm!r},{r.mean_rate!r},{r.std_rate!r},"
                     f"{r.mean_harvested_w!r},{r.trials},0\n")


def paired_gains(scenario_a, scenario_b):
    """Per-power paired mean gain (A - B) with its standard error.

    Both scenarios must share antenna counts, sweep, trial count, channel
    statistics and master seed so that trial i sees the same channel.
    """
    for attr in ("m", "n", "ps_dbm", "trials", "master_seed", "rician_k_db",
                 "si_attenuation_db", "noise_psd_dbm_hz", "bandwidth_hz"):
        if getattr(scenario_a, attr) != getattr(scenario_b, attr):
            raise ContractError(f"paired comparison requires matching {attr}")
    pool_a = _pool_for(scenario_a)
    gains = []
    try:
        for ps_dbm in scenario_a.ps_dbm:
            rates_a, _ = _point_values(scenario_a, ps_dbm, pool_a)
            rates_b, _ = _point_values(scenario_b, ps_dbm, pool_a)
            ok = np.isfinite(rates_a) & np.isfinite(rates_b)
            diff = rates_a[ok] - rates_b[ok]
            n = int(ok.sum())
            se = float(np.std(diff, ddof=1) / np.sqrt(n)) if n > 1 else 0.0
            gains.append({
                "ps_dbm": float(ps_dbm),
                "method_a": scenario_a.method,
                "method_b": scenario_b.method,
                "mean_gain": float(np.sum(diff) / n) if n else 0.0,
                "paired_se": se,
                "trials": n,
            })
    finally:
        if pool_a is not None:
            pool_a.shutdown()
    return gains


def compare_methods(scenarios, csv_path=None):
    """Paired comparison of each scenario against the last one (the baseline).

    Returns the comparison rows and optionally writes them as CSV.
    """
    if len(scenarios) < 2:
        raise ContractError("compare needs at least two scenarios")
    baseline = scenarios[-1]
    rows = []
    for scenario in scenarios[:-1]:
        rows.extend(paired_gains(scenario, baseline))
    if csv_path is not None:
        with open(csv_path, "w") as fh:
            fh.write(COMPARE_HEADER + "\n")
            for g in rows:
                fh.write(f"{g['ps_dbm']!r},{g['method_a']},{g['method_b']},"
                         f"{g['mean_gain']!r},{g['paired_se']!r},{g['trials']}\n")
    return rows


def gain_table(rows):
    """Human-readable table of comparison rows."""
    lines = [f"{'P_S dBm':>8}  {'A':<26} {'B':<26} {'gain bps/Hz':>12} {'SE':>10}"]
    for g in rows:
        lines.append(f"{g['ps_dbm']:>8.1f}  {g['method_a']:<26} {g['method_b']:<26} "
                     f"{g['mean_gain']:>12.4f} {g['paired_se']:>10.4f}")
    return "\n".join(lines)
