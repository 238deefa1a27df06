"""
Measurement Model - Placement, true values and seeded Gaussian noise
Builds SCADA and pseudo-measurements from a power-flow solution and corrupts them
with reproducible noise whose 3σ bound is a fixed share of the true value
"""

import json
import logging
import zlib
from collections import Counter
from pathlib import Path
from typing import List, Optional, Tuple, Union

import numpy as np
from pydantic import ValidationError

from config import config
from errors import InsufficientRedundancy, PlacementFormatError, UnknownElement
from models import (
    Measurement, MeasurementClass, MeasurementKind, MeasurementSet, MeasurementType, Network,
    PlacementSpec,
)
from network import PowerFlowSolution

logger = logging.getLogger(__name__)


def sigma_from_max_error(true_value: float, rate: float, sigma_min: Optional[float] = None) -> float:
    """σ such that ±3σ equals rate·|true_value|, floored at sigma_min"""
    if rate <= 0:
        raise ValueError(f"noise rate must be positive, got {rate}")
    if sigma_min is None:
        sigma_min = config.get_measurement_config()['sigma_min']
    return max(rate * abs(true_value) / 3.0, sigma_min)


def load_placement(path: Union[str, Path]) -> PlacementSpec:
    path = Path(path)
    try:
        document = json.loads(path.read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as e:
        raise PlacementFormatError(f"cannot read placement document {path}: {e}") from e
    try:
        return PlacementSpec.model_validate(document)
    except ValidationError as e:
        raise PlacementFormatError(f"invalid placement document {path}: {e}") from e


def with_rates(spec: PlacementSpec, scada_rate: Optional[float] = None,
               pseudo_rate: Optional[float] = None) -> PlacementSpec:
    """Copy of a placement with overridden noise rates"""
    update = {}
    if scada_rate is not None:
        update["scada_rate"] = scada_rate
    if pseudo_rate is not None:
        update["pseudo_rate"] = pseudo_rate
    return spec.model_copy(update=update) if update else spec


def placement_kinds(spec: PlacementSpec) -> List[Tuple[MeasurementKind, MeasurementClass]]:
    """Measurement kinds in row order: magnitudes, flow pairs, SCADA injections, pseudo injections"""
    rows = []
    for bus in spec.vmag:
        rows.append((MeasurementKind(type=MeasurementType.VMAG, bus=bus), MeasurementClass.SCADA))
    for branch in spec.flow:
        rows.append((MeasurementKind(type=MeasurementType.PFLOW, branch=branch), MeasurementClass.SCADA))
        rows.append((MeasurementKind(type=MeasurementType.QFLOW, branch=branch), MeasurementClass.SCADA))
    for klass, buses in ((MeasurementClass.SCADA, spec.inj_scada), (MeasurementClass.PSEUDO, spec.inj_pseudo)):
        for bus in buses:
            rows.append((MeasurementKind(type=MeasurementType.PINJ, bus=bus), klass))
            rows.append((MeasurementKind(type=MeasurementType.QINJ, bus=bus), klass))
    return rows


def check_kind(kind: MeasurementKind, net: Network):
    """Raise UnknownElement when a measurement points outside the network"""
    if kind.is_flow:
        i, k = kind.branch
        if not (net.has_bus(i) and net.has_bus(k) and net.has_branch(i, k)):
            raise UnknownElement(f"{kind.label}: no branch {i}-{k} in network {net.name}")
    elif not net.has_bus(kind.bus):
        raise UnknownElement(f"{kind.label}: no bus {kind.bus} in network {net.name}")


def true_value(kind: MeasurementKind, sol: PowerFlowSolution) -> float:
    if kind.type == MeasurementType.VMAG:
        return float(abs(sol.states[kind.bus]))
    if kind.is_flow:
        s = sol.flows[kind.branch]
    else:
        s = sol.injections[kind.bus]
    return float(s.real if kind.is_active else s.imag)


def synthesize(spec: PlacementSpec, sol: PowerFlowSolution,
               sigma_min: Optional[float] = None) -> MeasurementSet:
    """One measurement per placement entry with noisy value equal to the true value"""
    net = sol.net
    if not sol.converged:
        raise ValueError("measurements need a converged power-flow solution")

    measurements = []
    for kind, klass in placement_kinds(spec):
        check_kind(kind, net)
        value = true_value(kind, sol)
        rate = spec.scada_rate if klass == MeasurementClass.SCADA else spec.pseudo_rate
        measurements.append(Measurement(kind=kind, klass=klass, true_value=value, noisy_value=value,
                                        sigma=sigma_from_max_error(value, rate, sigma_min)))

    n_states = 2 * net.n_bus
    if len(measurements) < n_states:
        raise InsufficientRedundancy(
            f"{len(measurements)} measurements cannot observe {n_states} states of network {net.name}")
    ms = MeasurementSet(measurements=measurements, n_states=n_states)
    logger.debug("Synthesized %d measurements, redundancy %.3f", len(ms), ms.redundancy)
    return ms


def noise_key(kind: MeasurementKind, occurrence: int = 0) -> int:
    """Stable 32-bit key of a measurement; repeated kinds are told apart by occurrence"""
    return zlib.crc32(f"{kind.label}#{occurrence}".encode("utf-8"))


def corrupt(ms: MeasurementSet, seed: int) -> MeasurementSet:
    """Add N(0, σ²) noise to every true value with a seeded generator

    Every draw comes from a stream keyed by (seed, measurement), so a measurement shared
    by two placements gets the same noise under the same seed.
    """
    seen: Counter = Counter()
    draws = np.empty(len(ms))
    for row, m in enumerate(ms):
        key = noise_key(m.kind, seen[m.kind.label])
        seen[m.kind.label] += 1
        draws[row] = np.random.default_rng([seed, key]).standard_normal()
    sigmas = np.array([m.sigma for m in ms])
    truths = np.array([m.true_value for m in ms])
    noisy = truths + draws * sigmas
    measurements = [m.model_copy(update={"noisy_value": float(v)}) for m, v in zip(ms, noisy)]
    return MeasurementSet(measurements=measurements, rng_seed=seed, n_states=ms.n_states)


def redundancy(ms: MeasurementSet, net: Network) -> float:
    """m / n with n = 2·N_bus (slack rows are not counted as measurements)"""
    return len(ms) / (2 * net.n_bus)


def dump_measurements(ms: MeasurementSet, path: Union[str, Path]):
    Path(path).write_text(ms.model_dump_json(indent=2), encoding="utf-8")


def load_measurements(path: Union[str, Path]) -> MeasurementSet:
    return MeasurementSet.model_validate_json(Path(path).read_text(encoding="utf-8"))
