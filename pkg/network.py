"""
Network Model - Radial distribution network, admittances and power flow
Parses network documents, builds branch admittances and produces ground-truth
states with a rectangular Newton-Raphson power flow
"""

import json
import logging
from collections.abc import Mapping
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Dict, Iterator, List, Optional, Sequence, Tuple, Union

import networkx as nx
import numpy as np
from pydantic import ValidationError
from scipy import linalg

from config import config
from errors import (
    DisconnectedGraph, DuplicateBusId, MultipleSlackBuses, NetworkFormatError, NoSlackBus,
    NonConvergence, NonRadialTopology, ProfileCalibrationError, UnitMissing, UnknownBranch,
    UnknownBus, ZeroImpedanceBranch,
)
from models import Branch, Bus, BusKind, Network, NetworkDocument

logger = logging.getLogger(__name__)

REQUIRED_BASE_UNITS = ("s_kva", "v_kv")
REQUIRED_BRANCH_UNITS = ("r_ohm", "x_ohm")


# Documents

def parse_network(document: Union[str, bytes, Mapping]) -> Network:
    """Validate a network document and convert it to per-unit"""
    if isinstance(document, (str, bytes)):
        try:
            document = json.loads(document)
        except json.JSONDecodeError as e:
            raise NetworkFormatError(f"network document is not valid JSON: {e}") from e
    if not isinstance(document, Mapping):
        raise NetworkFormatError("network document must be a JSON object")

    _check_units(document)
    try:
        doc = NetworkDocument.model_validate(document)
    except ValidationError as e:
        raise NetworkFormatError(f"invalid network document: {e}") from e

    s_base = doc.base.s_kva
    z_base = doc.base.v_kv ** 2 * 1000.0 / s_base

    buses = [
        Bus(id=rec.id, kind=rec.kind,
            p_load=rec.p_load_kw / s_base, q_load=rec.q_load_kvar / s_base,
            dg_s=rec.dg_kva / s_base, dg_pf=rec.dg_pf)
        for rec in doc.buses
    ]
    branches = [
        Branch(from_bus=rec.from_bus, to_bus=rec.to_bus, r=rec.r_ohm / z_base, x=rec.x_ohm / z_base)
        for rec in doc.branches
    ]
    _check_buses(buses)
    _check_topology(buses, branches)

    net = Network(name=doc.name, notes=doc.notes, s_base_kva=s_base, v_base_kv=doc.base.v_kv,
                  buses=buses, branches=branches)
    logger.debug("Parsed network %s: %d buses, %d branches", net.name, net.n_bus, len(net.branches))
    return net


def load_network(path: Union[str, Path]) -> Network:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as e:
        raise NetworkFormatError(f"cannot read network document {path}: {e}") from e
    return parse_network(text)


def emit_network(net: Network) -> dict:
    """Re-emit the JSON document of a network (inverse of parse_network)"""
    s_base = net.s_base_kva
    z_base = net.z_base
    return {
        "name": net.name,
        "notes": net.notes,
        "base": {"s_kva": s_base, "v_kv": net.v_base_kv},
        "buses": [
            {"id": bus.id, "kind": bus.kind.value,
             "p_load_kw": bus.p_load * s_base, "q_load_kvar": bus.q_load * s_base,
             "dg_kva": bus.dg_s * s_base, "dg_pf": bus.dg_pf}
            for bus in net.buses
        ],
        "branches": [
            {"from": br.from_bus, "to": br.to_bus, "r_ohm": br.r * z_base, "x_ohm": br.x * z_base}
            for br in net.branches
        ],
    }


def _check_units(document: Mapping):
    base = document.get("base")
    if not isinstance(base, Mapping):
        raise UnitMissing("network document has no 'base' section declaring s_kva and v_kv")
    for unit in REQUIRED_BASE_UNITS:
        if unit not in base:
            raise UnitMissing(f"base section does not declare '{unit}'")
    for n, branch in enumerate(document.get("branches") or []):
        for unit in REQUIRED_BRANCH_UNITS:
            if isinstance(branch, Mapping) and unit not in branch:
                raise UnitMissing(f"branch #{n} does not declare '{unit}'")


def _check_buses(buses: Sequence[Bus]):
    seen = set()
    for bus in buses:
        if bus.id in seen:
            raise DuplicateBusId(f"bus id {bus.id!r} appears more than once")
        seen.add(bus.id)

    slacks = [bus.id for bus in buses if bus.kind == BusKind.SLACK]
    if not slacks:
        raise NoSlackBus("network document declares no slack bus")
    if len(slacks) > 1:
        raise MultipleSlackBuses(f"network document declares {len(slacks)} slack buses: {', '.join(slacks)}")


def _check_topology(buses: Sequence[Bus], branches: Sequence[Branch]):
    graph = nx.Graph()
    graph.add_nodes_from(bus.id for bus in buses)
    for br in branches:
        for end in (br.from_bus, br.to_bus):
            if end not in graph:
                raise UnknownBus(f"branch {br.label} references unknown bus {end!r}")
        if br.from_bus == br.to_bus:
            raise NonRadialTopology(f"branch {br.label} is a self-loop")
        if br.r == 0.0 and br.x == 0.0:
            raise ZeroImpedanceBranch(f"branch {br.label} has zero impedance")
        if graph.has_edge(br.from_bus, br.to_bus):
            raise NonRadialTopology(f"parallel branches between {br.from_bus} and {br.to_bus}")
        graph.add_edge(br.from_bus, br.to_bus)

    if not nx.is_connected(graph):
        islands = nx.number_connected_components(graph)
        raise DisconnectedGraph(f"network splits into {islands} islands")
    if graph.number_of_edges() != graph.number_of_nodes() - 1:
        cycle = nx.find_cycle(graph)
        raise NonRadialTopology(f"network is meshed; loop through {[edge[0] for edge in cycle]}")


def scale_network(net: Network, load_scale: float = 1.0, dg_scale: float = 1.0) -> Network:
    """Copy of the network with every load and DG output multiplied"""
    buses = [
        bus.model_copy(update={"p_load": bus.p_load * load_scale, "q_load": bus.q_load * load_scale,
                               "dg_s": bus.dg_s * dg_scale})
        for bus in net.buses
    ]
    return Network(name=net.name, notes=net.notes, s_base_kva=net.s_base_kva, v_base_kv=net.v_base_kv,
                   buses=buses, branches=list(net.branches))


# Admittances

class AdmittanceMap(Mapping):
    """Series admittance per branch with symmetric (i, k) / (k, i) access"""

    def __init__(self, net: Network):
        self._net = net
        self._y: Dict[Tuple[str, str], complex] = {}
        self._neighbors: List[List[Tuple[int, complex]]] = [[] for _ in net.buses]
        for br in net.branches:
            y = br.admittance
            i, k = net.index_of(br.from_bus), net.index_of(br.to_bus)
            self._y[br.key] = y
            self._neighbors[i].append((k, y))
            self._neighbors[k].append((i, y))

    def __getitem__(self, key: Tuple[str, str]) -> complex:
        i, k = key
        if (i, k) in self._y:
            return self._y[(i, k)]
        if (k, i) in self._y:
            return self._y[(k, i)]
        raise UnknownBranch(f"no branch between {i!r} and {k!r}")

    def __contains__(self, key) -> bool:
        try:
            i, k = key
        except (TypeError, ValueError):
            return False
        return (i, k) in self._y or (k, i) in self._y

    def __iter__(self) -> Iterator[Tuple[str, str]]:
        return iter(self._y)

    def __len__(self) -> int:
        return len(self._y)

    def neighbors(self, k: int) -> List[Tuple[int, complex]]:
        """(bus index, admittance) of every bus connected to bus index k"""
        return self._neighbors[k]

    def between(self, i: int, k: int) -> complex:
        for l, y in self._neighbors[i]:
            if l == k:
                return y
        net = self._net
        raise UnknownBranch(f"no branch between {net.buses[i].id!r} and {net.buses[k].id!r}")


def build_admittance(net: Network) -> AdmittanceMap:
    return AdmittanceMap(net)


# Complex power functions (exact, no linearization)

def flow_at(y: complex, vi: complex, vk: complex) -> complex:
    """S_ik = V_i·conj(y_ik(V_i − V_k)), power leaving i towards k"""
    return vi * np.conj(y * (vi - vk))


def injection_at(adm: AdmittanceMap, voltages: np.ndarray, k: int) -> complex:
    """Net power injected into the network at bus index k"""
    vk = voltages[k]
    current = sum(y * (vk - voltages[l]) for l, y in adm.neighbors(k))
    return vk * np.conj(current)


def flow_partials(y: complex, vi: complex, vk: complex, i: int, k: int) -> List[Tuple[int, complex, complex]]:
    """Wirtinger partials (bus, ∂S/∂V, ∂S/∂V*) of the branch flow S_ik"""
    yc = np.conj(y)
    return [
        (i, yc * np.conj(vi - vk), yc * vi),
        (k, 0.0j, -yc * vi),
    ]


def injection_partials(adm: AdmittanceMap, voltages: np.ndarray, k: int) -> List[Tuple[int, complex, complex]]:
    """Wirtinger partials (bus, ∂S/∂V, ∂S/∂V*) of the net injection S_k"""
    vk = voltages[k]
    current = 0.0j
    y_sum = 0.0j
    partials = []
    for l, y in adm.neighbors(k):
        current += y * (vk - voltages[l])
        y_sum += y
        partials.append((l, 0.0j, -np.conj(y) * vk))
    partials.append((k, np.conj(current), vk * np.conj(y_sum)))
    return partials


def rectangular_partials(d_v: complex, d_vconj: complex) -> Tuple[complex, complex]:
    """Map Wirtinger partials to (∂S/∂V_r, ∂S/∂V_x)"""
    return d_v + d_vconj, 1j * (d_v - d_vconj)


# States and power flow

@dataclass(frozen=True)
class StateVector:
    """Complex bus voltages in network bus order; stacked form is x = [V_r; V_x]"""

    bus_ids: Tuple[str, ...]
    voltages: np.ndarray

    def __post_init__(self):
        voltages = np.array(self.voltages, dtype=complex)
        if voltages.shape != (len(self.bus_ids),):
            raise ValueError(f"{len(self.bus_ids)} buses but {voltages.shape} voltages")
        voltages.setflags(write=False)
        object.__setattr__(self, "bus_ids", tuple(self.bus_ids))
        object.__setattr__(self, "voltages", voltages)

    @classmethod
    def flat(cls, net: Network) -> "StateVector":
        return cls(net.bus_ids, np.ones(net.n_bus, dtype=complex))

    @classmethod
    def from_stacked(cls, bus_ids: Sequence[str], x) -> "StateVector":
        x = np.asarray(x, dtype=float)
        n = len(bus_ids)
        if x.shape != (2 * n,):
            raise ValueError(f"stacked state needs {2 * n} entries, got {x.shape}")
        return cls(tuple(bus_ids), x[:n] + 1j * x[n:])

    def stacked(self) -> np.ndarray:
        return np.concatenate([self.voltages.real, self.voltages.imag])

    @property
    def real(self) -> np.ndarray:
        return self.voltages.real

    @property
    def imag(self) -> np.ndarray:
        return self.voltages.imag

    @property
    def magnitudes(self) -> np.ndarray:
        return np.abs(self.voltages)

    def __getitem__(self, bus_id: str) -> complex:
        try:
            return complex(self.voltages[self.bus_ids.index(bus_id)])
        except ValueError:
            raise UnknownBus(f"unknown bus {bus_id!r}") from None

    def __len__(self) -> int:
        return len(self.bus_ids)


@dataclass
class PowerFlowSolution:
    """Converged power flow: states plus exact branch flows and bus injections"""

    net: Network
    states: StateVector
    flows: Dict[Tuple[str, str], complex] = field(default_factory=dict)
    injections: Dict[str, complex] = field(default_factory=dict)
    converged: bool = True
    iterations: int = 0
    max_mismatch: float = 0.0

    @property
    def min_voltage(self) -> float:
        return float(np.min(self.states.magnitudes))

    @property
    def max_voltage(self) -> float:
        return float(np.max(self.states.magnitudes))

    def losses(self) -> complex:
        return sum(self.flows[br.key] + self.flows[(br.to_bus, br.from_bus)] for br in self.net.branches)


def solve_power_flow(net: Network, tol: Optional[float] = None, max_iter: Optional[int] = None) -> PowerFlowSolution:
    """Rectangular Newton-Raphson power flow with the slack fixed at 1∠0"""
    settings = config.get_power_flow_config()
    tol = settings['tol'] if tol is None else tol
    max_iter = settings['max_iter'] if max_iter is None else max_iter
    if tol <= 0:
        raise ValueError("power flow tolerance must be positive")

    adm = build_admittance(net)
    slack = net.slack_index
    pq = [i for i in range(net.n_bus) if i != slack]
    column = {bus: c for c, bus in enumerate(pq)}
    n_pq = len(pq)
    scheduled = np.array([net.buses[i].net_injection for i in pq])

    voltages = np.ones(net.n_bus, dtype=complex)
    mismatch_norm = np.inf
    for iteration in range(1, max_iter + 1):
        computed = np.array([injection_at(adm, voltages, k) for k in pq])
        mismatch = computed - scheduled
        mismatch_norm = float(np.max(np.abs(np.concatenate([mismatch.real, mismatch.imag])), initial=0.0))
        logger.debug("Power flow iteration %d: max mismatch %.3e", iteration, mismatch_norm)
        if mismatch_norm <= tol:
            states = StateVector(net.bus_ids, voltages)
            solution = _finish_solution(net, adm, states, iteration, mismatch_norm)
            logger.debug("Power flow converged in %d iterations (min |V| %.4f)", iteration, solution.min_voltage)
            return solution

        jac = np.zeros((2 * n_pq, 2 * n_pq))
        for row, k in enumerate(pq):
            for bus, d_v, d_vc in injection_partials(adm, voltages, k):
                if bus == slack:
                    continue
                d_r, d_x = rectangular_partials(d_v, d_vc)
                c = column[bus]
                jac[row, c] = d_r.real
                jac[row, n_pq + c] = d_x.real
                jac[n_pq + row, c] = d_r.imag
                jac[n_pq + row, n_pq + c] = d_x.imag
        try:
            step = linalg.solve(jac, -np.concatenate([mismatch.real, mismatch.imag]))
        except linalg.LinAlgError as e:
            raise NonConvergence(f"singular power-flow Jacobian at iteration {iteration}: {e}", iteration) from e
        voltages[pq] += step[:n_pq] + 1j * step[n_pq:]

    raise NonConvergence(
        f"power flow did not converge in {max_iter} iterations (max mismatch {mismatch_norm:.3e})", max_iter)


def _finish_solution(net: Network, adm: AdmittanceMap, states: StateVector, iterations: int,
                     mismatch: float) -> PowerFlowSolution:
    v = states.voltages
    flows = {}
    for br in net.branches:
        i, k = net.index_of(br.from_bus), net.index_of(br.to_bus)
        y = br.admittance
        flows[(br.from_bus, br.to_bus)] = complex(flow_at(y, v[i], v[k]))
        flows[(br.to_bus, br.from_bus)] = complex(flow_at(y, v[k], v[i]))
    injections = {bus.id: complex(injection_at(adm, v, n)) for n, bus in enumerate(net.buses)}
    return PowerFlowSolution(net=net, states=states, flows=flows, injections=injections,
                             converged=True, iterations=iterations, max_mismatch=mismatch)


def branch_flow(sol: PowerFlowSolution, i: str, k: str) -> complex:
    """Complex power S_ik measured at bus i towards bus k"""
    net = sol.net
    net.index_of(i)
    net.index_of(k)
    branch, _ = net.find_branch(i, k)
    v = sol.states.voltages
    return complex(flow_at(branch.admittance, v[net.index_of(i)], v[net.index_of(k)]))


def bus_injection(sol: PowerFlowSolution, k: str) -> complex:
    """Net complex power injected into the network at bus k"""
    net = sol.net
    index = net.index_of(k)
    return complex(injection_at(build_admittance(net), sol.states.voltages, index))


def _calibrate_scale(solve: Callable[[float], PowerFlowSolution], read: Callable[[PowerFlowSolution], float],
                     band: Tuple[float, float], rising: bool, what: str, max_scale: float,
                     max_steps: int) -> Tuple[float, PowerFlowSolution]:
    """Double a multiplier from 1 until read() crosses the band midpoint, then bisect into band

    rising tells whether read() grows with the multiplier. A power flow that
    fails to converge counts as overshooting.
    """
    lo, hi = band
    target = 0.5 * (lo + hi)

    def short(scale: float) -> Tuple[bool, Optional[PowerFlowSolution], float]:
        try:
            sol = solve(scale)
        except NonConvergence:
            return False, None, np.nan
        value = read(sol)
        return (value < target if rising else value > target), sol, value

    low_scale, high_scale = 0.0, 1.0
    below, sol, value = short(high_scale)
    while below:
        low_scale, high_scale = high_scale, 2.0 * high_scale
        if high_scale > max_scale:
            raise ProfileCalibrationError(f"no {what} up to {max_scale} reaches band {band}")
        below, sol, value = short(high_scale)
    if sol is not None and lo <= value <= hi:
        logger.info("%s %.4f puts |V| at %.4f in band %s", what, high_scale, value, band)
        return high_scale, sol

    for _ in range(max_steps):
        scale = 0.5 * (low_scale + high_scale)
        below, sol, value = short(scale)
        if sol is not None and lo <= value <= hi:
            logger.info("%s %.4f puts |V| at %.4f in band %s", what, scale, value, band)
            return scale, sol
        if below:
            low_scale = scale
        else:
            high_scale = scale
    raise ProfileCalibrationError(f"could not bring the {what} into band {band}")


def calibrate_load_scale(net: Network, band: Tuple[float, float], max_scale: float = 64.0,
                         max_steps: int = 60) -> Tuple[float, PowerFlowSolution]:
    """Find a load multiplier that puts the lowest bus voltage inside band"""
    return _calibrate_scale(lambda scale: solve_power_flow(scale_network(net, load_scale=scale)),
                            lambda sol: sol.min_voltage, band, rising=False, what="load scale",
                            max_scale=max_scale, max_steps=max_steps)


def calibrate_dg_scale(net: Network, band: Tuple[float, float], load_scale: float = 1.0,
                       max_scale: float = 64.0, max_steps: int = 60) -> Tuple[float, PowerFlowSolution]:
    """Find a DG multiplier that puts the highest bus voltage inside band at a fixed load scale"""
    return _calibrate_scale(
        lambda scale: solve_power_flow(scale_network(net, load_scale=load_scale, dg_scale=scale)),
        lambda sol: sol.max_voltage, band, rising=True, what="DG scale",
        max_scale=max_scale, max_steps=max_steps)


def calibrate_profile(net: Network, low_band: Tuple[float, float], high_band: Tuple[float, float],
                      max_sweeps: int = 20) -> Tuple[float, float, PowerFlowSolution]:
    """Spread the voltage profile over both bands

    Loads pull the lowest |V| into low_band, DG pushes the highest into
    high_band. Each moves both ends, so the two are refitted in turn until
    one power flow lands in both bands.
    """
    def fits(sol: PowerFlowSolution) -> bool:
        return (low_band[0] <= sol.min_voltage <= low_band[1]
                and high_band[0] <= sol.max_voltage <= high_band[1])

    dg_scale = 1.0
    for sweep in range(1, max_sweeps + 1):
        load_scale, sol = calibrate_load_scale(scale_network(net, dg_scale=dg_scale), low_band)
        if fits(sol):
            break
        dg_scale, sol = calibrate_dg_scale(net, high_band, load_scale=load_scale)
        if fits(sol):
            break
    else:
        raise ProfileCalibrationError(f"no operating point within {max_sweeps} sweeps has |V| spanning "
                                      f"{low_band} to {high_band}")
    logger.info("Profile after %d sweeps: load scale %.4f, DG scale %.4f, |V| in [%.4f, %.4f]",
                sweep, load_scale, dg_scale, sol.min_voltage, sol.max_voltage)
    return load_scale, dg_scale, sol
