"""
Configuration management for hullstate
Solver tolerances, noise rates, benchmark protocol and logging settings
"""

import copy
import json
import logging
import os
from pathlib import Path
from typing import Optional

from dotenv import load_dotenv

# Load environment variables from .env file
load_dotenv()

DEFAULT_CONFIG_FILE = Path(__file__).resolve().parent / "config.json"


class Config:
    """Configuration manager for solvers and benchmarks"""

    def __init__(self, config_file: Optional[str] = None):
        self.config_file = Path(config_file) if config_file else DEFAULT_CONFIG_FILE
        self.config = self._load_config()

    def _load_config(self) -> dict:
        """Load configuration from file merged over the defaults"""
        config = self._get_default_config()
        if self.config_file.exists():
            try:
                with open(self.config_file, 'r') as f:
                    _merge(config, json.load(f))
            except (json.JSONDecodeError, IOError) as e:
                logging.getLogger(__name__).warning("Could not load config file %s: %s", self.config_file, e)
        return config

    def _get_default_config(self) -> dict:
        """Get default configuration"""
        return {
            "power_flow": {
                "tol": 1e-10,
                "max_iter": 30
            },
            "wls": {
                "tol": 1e-6,
                "max_iter": 50,
                "step_halving": True,
                "max_halvings": 10
            },
            "interval": {
                "eps": 1e-4,
                "max_iter": 200
            },
            "measurements": {
                "scada_rate": 0.01,
                "pseudo_rate": 0.20,
                "sigma_min": 1e-4
            },
            "bench": {
                "timing_repeats": 30,
                "warmup": 3,
                "threads": 1
            },
            "logging": {
                "level": "INFO",
                "log_to_file": False,
                "log_file": "hullstate.log"
            }
        }

    def _save_config(self, config: dict):
        """Save configuration to file"""
        try:
            with open(self.config_file, 'w') as f:
                json.dump(config, f, indent=2)
        except IOError as e:
            logging.getLogger(__name__).warning("Could not save config file %s: %s", self.config_file, e)

    def get(self, key: str, default=None):
        """Get configuration value using dot notation (e.g., 'wls.tol')"""
        keys = key.split('.')
        value = self.config

        for k in keys:
            if isinstance(value, dict) and k in value:
                value = value[k]
            else:
                return default

        return value

    def set(self, key: str, value, persist: bool = False):
        """Set configuration value using dot notation"""
        keys = key.split('.')
        config = self.config

        # Navigate to the parent of the target key
        for k in keys[:-1]:
            if k not in config:
                config[k] = {}
            config = config[k]

        config[keys[-1]] = value
        if persist:
            self._save_config(self.config)

    def get_power_flow_config(self) -> dict:
        return {
            'tol': float(self.get('power_flow.tol', 1e-10)),
            'max_iter': int(self.get('power_flow.max_iter', 30))
        }

    def get_wls_config(self) -> dict:
        return {
            'tol': float(self.get('wls.tol', 1e-6)),
            'max_iter': int(self.get('wls.max_iter', 50)),
            'step_halving': bool(self.get('wls.step_halving', True)),
            'max_halvings': int(self.get('wls.max_halvings', 10))
        }

    def get_interval_config(self) -> dict:
        return {
            'eps': float(self.get('interval.eps', 1e-4)),
            'max_iter': int(self.get('interval.max_iter', 200))
        }

    def get_measurement_config(self) -> dict:
        return {
            'scada_rate': float(self.get('measurements.scada_rate', 0.01)),
            'pseudo_rate': float(self.get('measurements.pseudo_rate', 0.20)),
            'sigma_min': float(self.get('measurements.sigma_min', 1e-4))
        }

    def get_bench_config(self) -> dict:
        return {
            'timing_repeats': int(self.get('bench.timing_repeats', 30)),
            'warmup': int(self.get('bench.warmup', 3)),
            'threads': self.get_threads()
        }

    def get_threads(self) -> int:
        """Trial parallelism cap; HULLSTATE_THREADS overrides config.json"""
        raw = os.getenv('HULLSTATE_THREADS')
        if raw:
            try:
                return max(1, int(raw))
            except ValueError:
                logging.getLogger(__name__).warning("Ignoring non-integer HULLSTATE_THREADS=%r", raw)
        return max(1, int(self.get('bench.threads', 1)))

    def get_logging_config(self) -> dict:
        return {
            'level': (os.getenv('HULLSTATE_LOG_LEVEL') or self.get('logging.level', 'INFO')).upper(),
            'log_to_file': bool(self.get('logging.log_to_file', False)),
            'log_file': self.get('logging.log_file', 'hullstate.log')
        }

    def setup_logging(self, level: Optional[str] = None):
        """Configure the root logger from the logging section"""
        settings = self.get_logging_config()
        handlers = [logging.StreamHandler()]
        if settings['log_to_file']:
            handlers.append(logging.FileHandler(settings['log_file']))
        logging.basicConfig(
            level=(level or settings['level']).upper(),
            format="%(asctime)s %(levelname)s %(name)s: %(message)s",
            handlers=handlers,
            force=True
        )

    def print_status(self):
        """Print configuration status"""
        print("\n🔧 Configuration Status:")
        print("=" * 40)
        print(f"📄 Config file: {self.config_file} ({'found' if self.config_file.exists() else 'defaults'})")

        pf = self.get_power_flow_config()
        print(f"⚡ Power flow: tol={pf['tol']:g}, max_iter={pf['max_iter']}")

        wls = self.get_wls_config()
        halving = "on" if wls['step_halving'] else "off"
        print(f"📐 WLS: tol={wls['tol']:g}, max_iter={wls['max_iter']}, step halving {halving}")

        iv = self.get_interval_config()
        print(f"📦 Krawczyk: eps={iv['eps']:g}, max_iter={iv['max_iter']}")

        meas = self.get_measurement_config()
        print(f"📡 Noise: SCADA {meas['scada_rate']:.0%}, pseudo {meas['pseudo_rate']:.0%}, "
              f"sigma floor {meas['sigma_min']:g} p.u.")

        bench = self.get_bench_config()
        print(f"⏱️  Timing: {bench['timing_repeats']} repeats after {bench['warmup']} warm-up runs, "
              f"{bench['threads']} thread(s)")
        print("=" * 40)


def _merge(base: dict, override: dict):
    """Recursively merge override into base"""
    for key, value in override.items():
        if isinstance(value, dict) and isinstance(base.get(key), dict):
            _merge(base[key], value)
        else:
            base[key] = copy.deepcopy(value)


# Global config instance
config = Config()
