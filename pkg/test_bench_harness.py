#!/usr/bin/env python3
"""
Benchmark harness and CLI tests
Small campaigns on the bundled 34-bus feeder, report emission and exit codes
"""

import json

import pandas as pd
import pytest
from pydantic import ValidationError

import bench_harness
from bench_harness import (
    compare, emit_report, load_report, load_scenario, prepare, redundancy_sweep, report_frame, run,
    run_interval_once, run_wls_campaign,
)
from errors import IoFailure, SingularGainMatrix, TrialFailure
from main import cli
from models import ComparisonReport, EstimateReport


def test_prepare_builds_truth_and_measurements(small_scenario):
    prepared = prepare(small_scenario)
    assert prepared.net.n_bus == 34
    assert prepared.load_scale == 1.0
    assert len(prepared.measurements) == 80
    assert prepared.draw(3).rng_seed == 3


def test_bundled_wide_profile_scenario(data_dir):
    sc = load_scenario(data_dir / "scenario_wide_profile.json")
    assert sc.net_path == data_dir / "ieee34_mod.json"
    assert sc.placement_path.exists()
    assert sc.profile_band == (0.90, 0.95) and sc.dg_band == (1.05, 1.10)
    assert sc.method == "interval"


def test_load_scenario_failures(tmp_path):
    with pytest.raises(IoFailure):
        load_scenario(tmp_path / "missing.json")
    orphan = tmp_path / "orphan.json"
    orphan.write_text(json.dumps({"net_path": "a.json", "placement_path": "b.json", "dg_band": [1.05, 1.1]}))
    with pytest.raises(ValidationError):
        load_scenario(orphan)


def test_wls_campaign_report(small_scenario):
    report = run_wls_campaign(small_scenario)
    assert report.method == "wls"
    assert report.trial_seeds == [7, 8, 9, 10]
    assert len(report.iterations) == 4 and len(report.rmse_real) == 34
    assert report.mae_real == pytest.approx(max(report.abs_error_real))
    assert report.max_rmse_real <= report.mae_real
    assert 0 <= report.worst_trial < 4
    assert report.solve_time_ms > 0
    assert 0.0 <= report.chi_square_pass_rate <= 1.0


def test_wls_accuracy_is_deterministic(small_scenario):
    a = run_wls_campaign(small_scenario)
    b = run_wls_campaign(small_scenario)
    assert a.abs_error_real == b.abs_error_real
    assert a.rmse_imag == b.rmse_imag
    assert a.scenario_hash == b.scenario_hash


def test_threaded_campaign_matches_sequential(small_scenario):
    threaded = run_wls_campaign(small_scenario.model_copy(update={"threads": 2}))
    sequential = run_wls_campaign(small_scenario)
    assert threaded.abs_error_real == sequential.abs_error_real
    assert threaded.timing_repeats == 2
    assert threaded.scenario_hash == sequential.scenario_hash


def test_zero_noise_wls_recovers_truth(small_scenario):
    report = run_wls_campaign(small_scenario.model_copy(update={"zero_noise": True}))
    assert report.mae_real <= 1e-8 and report.mae_imag <= 1e-8


def test_trial_failure_names_trial_and_seed(small_scenario, monkeypatch):
    def broken(*args, **kwargs):
        raise SingularGainMatrix("gain matrix is singular")

    monkeypatch.setattr(bench_harness, "gauss_newton", broken)
    with pytest.raises(TrialFailure) as info:
        run_wls_campaign(small_scenario)
    assert info.value.trial == 0 and info.value.seed == 7
    assert info.value.to_dict()["cause"] == "estimation"


def test_interval_report(small_scenario):
    report = run_interval_once(small_scenario)
    assert report.method == "interval"
    assert report.trial_seeds == [7]
    assert report.timing_repeats == 2
    assert report.beta < 1
    assert report.krawczyk_iterations <= 50
    assert report.hull_radius_max > 0
    assert report.rmse_real is None


def test_compare_reports_both_methods(small_scenario):
    report = compare(small_scenario)
    assert [r.method for r in report.reports] == ["interval", "wls"]
    assert report.by_method("wls").trial_seeds == [7, 8, 9, 10]
    assert report.time_ratio == pytest.approx(
        report.by_method("interval").solve_time_ms / report.by_method("wls").solve_time_ms)


def test_run_dispatches_on_method(small_scenario):
    assert isinstance(run(small_scenario.model_copy(update={"method": "interval"})), EstimateReport)
    assert run(small_scenario.model_copy(update={"method": "wls"})).method == "wls"


def test_redundancy_sweep(small_scenario, data_dir):
    placements = [data_dir / "feeder34_base.json", data_dir / "feeder34_r1265.json"]
    reports = redundancy_sweep(small_scenario, placements)
    assert [round(r.redundancy, 3) for r in reports] == [1.176, 1.265]
    assert all(r.method == "interval" for r in reports)


# Reports

def test_report_frame_and_csv(tmp_path, small_scenario):
    report = compare(small_scenario)
    frame = report_frame(report)
    assert len(frame) == 34 * 2 * 2
    assert set(frame["method"]) == {"interval", "wls"}
    path = emit_report(report, "csv", tmp_path / "out" / "errors.csv")
    again = pd.read_csv(path, dtype={"bus": str})
    assert list(again.columns) == ["bus", "part", "method", "error"]
    assert len(again) == 136


def test_json_report_round_trip(tmp_path, small_scenario):
    report = compare(small_scenario)
    path = emit_report(report, "json", tmp_path / "report.json")
    again = load_report(path)
    assert isinstance(again, ComparisonReport)
    assert again.by_method("interval").abs_error_real == report.by_method("interval").abs_error_real
    single = emit_report(report.by_method("wls"), "json", tmp_path / "wls.json")
    assert isinstance(load_report(single), EstimateReport)


def test_report_io_failures(tmp_path, small_scenario):
    report = run_interval_once(small_scenario)
    with pytest.raises(ValueError):
        emit_report(report, "xml", tmp_path / "report.xml")
    blocker = tmp_path / "file"
    blocker.write_text("")
    with pytest.raises(IoFailure):
        emit_report(report, "json", blocker / "report.json")
    with pytest.raises(IoFailure):
        load_report(tmp_path / "missing.json")
    bad = tmp_path / "bad.json"
    bad.write_text('{"method": "wls"}')
    with pytest.raises(IoFailure):
        load_report(bad)


# CLI

def test_cli_run_writes_report(tmp_path):
    out = tmp_path / "report.json"
    code = cli(["run", "--method", "wls", "--trials", "2", "--seed", "5", "--out", str(out)])
    assert code == 0
    report = load_report(out)
    assert report.trial_seeds == [5, 6]


def test_cli_interval_to_stdout(capsys):
    assert cli(["run", "--method", "interval", "--repeats", "1"]) == 0
    captured = capsys.readouterr()
    report = json.loads(captured.out)
    assert report["method"] == "interval"
    assert "📊 Scenario" in captured.err


def test_cli_dg_band_needs_profile_band(capsys):
    assert cli(["run", "--dg-band", "1.05", "1.10", "--trials", "1"]) == 2
    payload = json.loads(capsys.readouterr().err.strip().splitlines()[-1])
    assert payload["error"] == "input"


def test_cli_rejects_bad_arguments(capsys):
    assert cli(["run", "--trials", "0"]) == 2
    payload = json.loads(capsys.readouterr().err.strip().splitlines()[-1])
    assert payload["error"] == "input"


def test_cli_missing_network_is_input_error(tmp_path, capsys):
    assert cli(["run", "--net", str(tmp_path / "none.json"), "--trials", "1"]) == 2
    payload = json.loads(capsys.readouterr().err.strip().splitlines()[-1])
    assert payload["error"] == "network"


def test_cli_status(capsys):
    assert cli(["status"]) == 0
    assert "Configuration Status" in capsys.readouterr().out
