#!/usr/bin/env python3
"""
Test script for configuration loading
"""

import json
import logging

from config import Config


def test_defaults_without_file(tmp_path):
    cfg = Config(str(tmp_path / "absent.json"))
    assert cfg.get_wls_config() == {'tol': 1e-6, 'max_iter': 50, 'step_halving': True, 'max_halvings': 10}
    assert cfg.get_interval_config() == {'eps': 1e-4, 'max_iter': 200}
    assert cfg.get_measurement_config()['pseudo_rate'] == 0.20
    assert cfg.get('bench.timing_repeats') == 30


def test_file_merges_over_defaults(tmp_path):
    path = tmp_path / "config.json"
    path.write_text(json.dumps({"interval": {"eps": 1e-6}, "bench": {"warmup": 0}}))
    cfg = Config(str(path))
    assert cfg.get_interval_config() == {'eps': 1e-6, 'max_iter': 200}
    assert cfg.get_bench_config()['warmup'] == 0
    assert cfg.get_bench_config()['timing_repeats'] == 30


def test_broken_file_falls_back_to_defaults(tmp_path):
    path = tmp_path / "config.json"
    path.write_text("{broken")
    assert Config(str(path)).get('wls.tol') == 1e-6


def test_dotted_get_and_set(tmp_path):
    path = tmp_path / "config.json"
    cfg = Config(str(path))
    assert cfg.get('wls.nothing', 'fallback') == 'fallback'
    cfg.set('wls.tol', 1e-8)
    assert cfg.get_wls_config()['tol'] == 1e-8
    assert not path.exists()
    cfg.set('extra.section.value', 3, persist=True)
    assert json.loads(path.read_text())['extra']['section']['value'] == 3


def test_threads_from_environment(tmp_path, monkeypatch):
    cfg = Config(str(tmp_path / "absent.json"))
    monkeypatch.delenv('HULLSTATE_THREADS', raising=False)
    assert cfg.get_threads() == 1
    monkeypatch.setenv('HULLSTATE_THREADS', '4')
    assert cfg.get_threads() == 4
    assert cfg.get_bench_config()['threads'] == 4
    monkeypatch.setenv('HULLSTATE_THREADS', 'many')
    assert cfg.get_threads() == 1


def test_log_level_from_environment(tmp_path, monkeypatch):
    cfg = Config(str(tmp_path / "absent.json"))
    monkeypatch.setenv('HULLSTATE_LOG_LEVEL', 'debug')
    assert cfg.get_logging_config()['level'] == 'DEBUG'
    cfg.setup_logging()
    assert logging.getLogger().level == logging.DEBUG
    cfg.setup_logging('warning')
    assert logging.getLogger().level == logging.WARNING


def test_print_status(tmp_path, capsys):
    Config(str(tmp_path / "absent.json")).print_status()
    out = capsys.readouterr().out
    assert "defaults" in out
    assert "eps=0.0001" in out
