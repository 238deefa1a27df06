"""
Bench Harness - Monte Carlo WLS campaigns, single-shot interval estimates and reports
Both methods see the same truth and the same seeded measurement draws; accuracy
metrics are deterministic given the scenario, only wall-clock fields vary.
"""

import json
import logging
import statistics
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import List, Optional, Sequence, Union

import numpy as np
import pandas as pd
from pydantic import ValidationError

from config import config
from errors import HullstateError, IoFailure, TrialFailure
from interval_estimator import estimate
from measurements import corrupt, load_placement, synthesize, with_rates
from models import ComparisonReport, EstimateReport, MeasurementSet, Network, PlacementSpec, Scenario
from network import (
    PowerFlowSolution, StateVector, calibrate_load_scale, calibrate_profile, load_network, scale_network,
    solve_power_flow,
)
from wls_estimator import WlsProblem, chi_square_check, gauss_newton

logger = logging.getLogger(__name__)

Report = Union[EstimateReport, ComparisonReport]


@dataclass
class PreparedScenario:
    """Network at its operating point, power-flow truth and noiseless measurements"""

    scenario: Scenario
    net: Network
    truth: PowerFlowSolution
    placement: PlacementSpec
    measurements: MeasurementSet
    load_scale: float
    dg_scale: float = 1.0

    def draw(self, seed: int) -> MeasurementSet:
        if self.scenario.zero_noise:
            return self.measurements
        return corrupt(self.measurements, seed)

    def errors(self, state: StateVector):
        """Per-bus absolute errors of the real and imaginary parts"""
        diff = state.voltages - self.truth.states.voltages
        return np.abs(diff.real), np.abs(diff.imag)


@dataclass
class TrialOutcome:
    trial: int
    seed: int
    err_real: np.ndarray
    err_imag: np.ndarray
    iterations: int
    seconds: float
    chi_square_ok: bool


def load_scenario(path: Union[str, Path]) -> Scenario:
    """Read a scenario document; relative net and placement paths resolve against its folder"""
    path = Path(path)
    try:
        document = json.loads(path.read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as e:
        raise IoFailure(f"cannot read scenario {path}: {e}") from e
    for key in ("net_path", "placement_path"):
        if key in document and not Path(document[key]).is_absolute():
            document[key] = str(path.parent / document[key])
    return Scenario.model_validate(document)


def prepare(sc: Scenario) -> PreparedScenario:
    """Load documents, set the operating point and solve the ground-truth power flow"""
    net = load_network(sc.net_path)
    placement = with_rates(load_placement(sc.placement_path), sc.noise_scada, sc.noise_pseudo)

    dg_scale = sc.dg_scale
    if sc.dg_band is not None:
        load_scale, dg_scale, truth = calibrate_profile(net, sc.profile_band, sc.dg_band)
    elif sc.profile_band is not None:
        load_scale, truth = calibrate_load_scale(scale_network(net, dg_scale=dg_scale), sc.profile_band)
    else:
        load_scale = sc.load_scale or 1.0
        truth = solve_power_flow(scale_network(net, load_scale=load_scale, dg_scale=dg_scale))
    ms = synthesize(placement, truth)

    logger.info("Scenario %s: %s at load scale %.4f, DG scale %.4f, |V| in [%.4f, %.4f], %d measurements "
                "(redundancy %.3f)", sc.scenario_hash(), truth.net.name, load_scale, dg_scale, truth.min_voltage,
                truth.max_voltage, len(ms), ms.redundancy)
    return PreparedScenario(scenario=sc, net=truth.net, truth=truth, placement=placement,
                            measurements=ms, load_scale=load_scale, dg_scale=dg_scale)


# WLS campaign

def _wls_trial(prepared: PreparedScenario, trial: int, seed: int) -> TrialOutcome:
    sc = prepared.scenario
    try:
        ms = prepared.draw(seed)
        start = time.perf_counter()
        result = gauss_newton(WlsProblem.build(prepared.net, ms), tol=sc.wls_tol, max_iter=sc.wls_max_iter)
        seconds = time.perf_counter() - start
    except HullstateError as e:
        raise TrialFailure(trial, seed, e) from e
    err_real, err_imag = prepared.errors(result.x_hat)
    return TrialOutcome(trial=trial, seed=seed, err_real=err_real, err_imag=err_imag,
                        iterations=result.iterations, seconds=seconds,
                        chi_square_ok=chi_square_check(result)[0])


def _sequential_wls_seconds(prepared: PreparedScenario, seeds: Sequence[int]) -> List[float]:
    return [_wls_trial(prepared, trial, seed).seconds for trial, seed in enumerate(seeds)]


def run_wls_campaign(sc: Scenario, prepared: Optional[PreparedScenario] = None) -> EstimateReport:
    """One Gauss-Newton solve per trial seed; RMSE per bus and worst single-trial MAE"""
    prepared = prepared or prepare(sc)
    seeds = sc.trial_seeds()
    threads = sc.threads or config.get_threads()

    logger.info("📊 WLS campaign: %d trials on %d thread(s)", len(seeds), threads)
    start = time.perf_counter()
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as executor:
            outcomes = list(executor.map(lambda args: _wls_trial(prepared, *args), enumerate(seeds)))
    else:
        outcomes = [_wls_trial(prepared, trial, seed) for trial, seed in enumerate(seeds)]
    total = time.perf_counter() - start
    outcomes.sort(key=lambda o: o.trial)

    if threads > 1:
        # parallel solves contend for cores; time a sequential sample instead
        repeats = min(len(seeds), sc.timing_repeats or config.get_bench_config()['timing_repeats'])
        trial_seconds = _sequential_wls_seconds(prepared, seeds[:repeats])
        logger.info("WLS timing from %d sequential re-solves", repeats)
    else:
        trial_seconds = [o.seconds for o in outcomes]

    err_real = np.vstack([o.err_real for o in outcomes])
    err_imag = np.vstack([o.err_imag for o in outcomes])
    rmse_real = np.sqrt(np.mean(err_real ** 2, axis=0))
    rmse_imag = np.sqrt(np.mean(err_imag ** 2, axis=0))
    worst = int(np.argmax(err_real.max(axis=1)))
    mean_ms = 1000.0 * statistics.fmean(trial_seconds)

    report = EstimateReport(
        method="wls",
        scenario_hash=sc.scenario_hash(),
        scenario=sc,
        base_seed=sc.base_seed,
        trial_seeds=seeds,
        bus_ids=list(prepared.net.bus_ids),
        abs_error_real=err_real.max(axis=0).tolist(),
        abs_error_imag=err_imag.max(axis=0).tolist(),
        mae_real=float(err_real.max()),
        mae_imag=float(err_imag.max()),
        rmse_real=rmse_real.tolist(),
        rmse_imag=rmse_imag.tolist(),
        max_rmse_real=float(rmse_real.max()),
        max_rmse_imag=float(rmse_imag.max()),
        worst_trial=worst,
        iterations=[o.iterations for o in outcomes],
        solve_time_ms=mean_ms,
        total_time_s=total,
        timing_repeats=len(trial_seconds),
        redundancy=prepared.measurements.redundancy,
        load_scale=prepared.load_scale,
        dg_scale=prepared.dg_scale,
        chi_square_pass_rate=sum(o.chi_square_ok for o in outcomes) / len(outcomes),
    )
    logger.info("WLS: max RMSE %.3e / %.3e, worst MAE %.3e (trial %d), mean trial %.2f ms",
                report.max_rmse_real, report.max_rmse_imag, report.mae_real, worst, mean_ms)
    return report


# Interval estimate

def run_interval_once(sc: Scenario, prepared: Optional[PreparedScenario] = None) -> EstimateReport:
    """One measurement draw (base_seed), one interval estimate, median wall-clock over repeats"""
    prepared = prepared or prepare(sc)
    bench = config.get_bench_config()
    repeats = sc.timing_repeats or bench['timing_repeats']
    warmup = bench['warmup'] if sc.warmup is None else sc.warmup

    ms = prepared.draw(sc.base_seed)
    start = time.perf_counter()
    state, enclosure, _ = estimate(prepared.net, ms, eps=sc.eps)
    # the first solve already checked observability; timed repeats skip the rank SVD
    for _ in range(warmup):
        estimate(prepared.net, ms, eps=sc.eps, check_rank=False)
    timings = [estimate(prepared.net, ms, eps=sc.eps, check_rank=False)[2] for _ in range(repeats)]
    total = time.perf_counter() - start
    median_ms = 1000.0 * statistics.median(timings)
    logger.info("Interval timing: %d warm-up runs excluded, median of %d repeats %.2f ms",
                warmup, repeats, median_ms)

    err_real, err_imag = prepared.errors(state)
    report = EstimateReport(
        method="interval",
        scenario_hash=sc.scenario_hash(),
        scenario=sc,
        base_seed=sc.base_seed,
        trial_seeds=[sc.base_seed],
        bus_ids=list(prepared.net.bus_ids),
        abs_error_real=err_real.tolist(),
        abs_error_imag=err_imag.tolist(),
        mae_real=float(err_real.max()),
        mae_imag=float(err_imag.max()),
        iterations=[enclosure.iterations],
        solve_time_ms=median_ms,
        total_time_s=total,
        timing_repeats=repeats,
        redundancy=prepared.measurements.redundancy,
        load_scale=prepared.load_scale,
        dg_scale=prepared.dg_scale,
        beta=enclosure.beta,
        krawczyk_iterations=enclosure.iterations,
        hull_radius_max=enclosure.hull_radius(),
    )
    logger.info("Interval: MAE %.3e / %.3e, beta %.4f, %d Krawczyk iterations",
                report.mae_real, report.mae_imag, enclosure.beta, enclosure.iterations)
    return report


def compare(sc: Scenario) -> ComparisonReport:
    """Both methods on one prepared scenario plus interval time / mean WLS trial time"""
    prepared = prepare(sc)
    wls = run_wls_campaign(sc, prepared)
    interval = run_interval_once(sc, prepared)
    ratio = interval.solve_time_ms / wls.solve_time_ms if wls.solve_time_ms > 0 else float("inf")
    logger.info("Time ratio interval / WLS trial: %.3f", ratio)
    return ComparisonReport(scenario_hash=sc.scenario_hash(), reports=[interval, wls], time_ratio=ratio)


def run(sc: Scenario) -> Report:
    if sc.method == "wls":
        return run_wls_campaign(sc)
    if sc.method == "interval":
        return run_interval_once(sc)
    return compare(sc)


def redundancy_sweep(sc: Scenario, placements: Sequence[Union[str, Path]]) -> List[EstimateReport]:
    """Interval method over several placement documents with the same seed"""
    reports = []
    for placement in placements:
        variant = sc.model_copy(update={"placement_path": Path(placement), "method": "interval"})
        reports.append(run_interval_once(variant))
    return reports


# Reports

def report_frame(report: Report) -> pd.DataFrame:
    """Long format: one row per (bus, part, method)"""
    reports = report.reports if isinstance(report, ComparisonReport) else [report]
    rows = []
    for rep in reports:
        for part, errors in (("real", rep.abs_error_real), ("imag", rep.abs_error_imag)):
            rows.extend({"bus": bus, "part": part, "method": rep.method, "error": error}
                        for bus, error in zip(rep.bus_ids, errors))
    return pd.DataFrame(rows, columns=["bus", "part", "method", "error"])


def emit_report(report: Report, fmt: str, path: Union[str, Path]) -> Path:
    path = Path(path)
    if fmt not in ("json", "csv"):
        raise ValueError(f"unknown report format {fmt!r}")
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        if fmt == "json":
            path.write_text(report.model_dump_json(indent=2), encoding="utf-8")
        else:
            report_frame(report).to_csv(path, index=False)
    except OSError as e:
        raise IoFailure(f"cannot write report {path}: {e}") from e
    logger.info("Report written to %s", path)
    return path


def load_report(path: Union[str, Path]) -> Report:
    path = Path(path)
    try:
        document = json.loads(path.read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as e:
        raise IoFailure(f"cannot read report {path}: {e}") from e
    try:
        if "reports" in document:
            return ComparisonReport.model_validate(document)
        return EstimateReport.model_validate(document)
    except ValidationError as e:
        raise IoFailure(f"invalid report {path}: {e}") from e
