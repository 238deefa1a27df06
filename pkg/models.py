"""
Data models for hullstate
Network, measurement, scenario and report models shared by every module
"""

import hashlib
import math
from enum import Enum
from pathlib import Path
from typing import Dict, List, Literal, Optional, Tuple

from pydantic import BaseModel, ConfigDict, Field, PrivateAttr, field_validator, model_validator

from errors import UnknownBranch, UnknownBus


class BusKind(str, Enum):
    SLACK = "slack"
    PQ = "PQ"


class Bus(BaseModel):
    """Network bus with loads and DG output in per-unit"""
    model_config = ConfigDict(frozen=True)

    id: str
    kind: BusKind = BusKind.PQ
    p_load: float = Field(0.0, description="Active load, p.u.")
    q_load: float = Field(0.0, description="Reactive load, p.u.")
    dg_s: float = Field(0.0, ge=0.0, description="DG apparent power output, p.u.")
    dg_pf: float = Field(0.95, gt=0.0, le=1.0, description="DG power factor (lagging)")

    @property
    def load(self) -> complex:
        return complex(self.p_load, self.q_load)

    @property
    def dg_injection(self) -> complex:
        """DG output as a fixed complex injection at constant power factor"""
        return complex(self.dg_s * self.dg_pf, self.dg_s * math.sqrt(1.0 - self.dg_pf ** 2))

    @property
    def net_injection(self) -> complex:
        """Scheduled power injected into the network (DG minus load)"""
        return self.dg_injection - self.load


class Branch(BaseModel):
    """Series branch between two buses, impedance in per-unit"""
    model_config = ConfigDict(frozen=True)

    from_bus: str
    to_bus: str
    r: float = Field(description="Series resistance, p.u.")
    x: float = Field(description="Series reactance, p.u.")

    @property
    def impedance(self) -> complex:
        return complex(self.r, self.x)

    @property
    def admittance(self) -> complex:
        return 1.0 / self.impedance

    @property
    def key(self) -> Tuple[str, str]:
        return (self.from_bus, self.to_bus)

    @property
    def label(self) -> str:
        return f"{self.from_bus}-{self.to_bus}"


class Network(BaseModel):
    """Radial network; bus order is fixed and shared by every downstream vector"""

    name: str = "network"
    notes: Optional[str] = None
    s_base_kva: float = Field(gt=0.0)
    v_base_kv: float = Field(gt=0.0)
    buses: List[Bus]
    branches: List[Branch]

    _index: Dict[str, int] = PrivateAttr(default_factory=dict)
    _branch_index: Dict[Tuple[str, str], int] = PrivateAttr(default_factory=dict)

    def model_post_init(self, __context) -> None:
        self._index = {bus.id: i for i, bus in enumerate(self.buses)}
        self._branch_index = {branch.key: i for i, branch in enumerate(self.branches)}

    @property
    def z_base(self) -> float:
        """Base impedance in ohms"""
        return self.v_base_kv ** 2 * 1000.0 / self.s_base_kva

    @property
    def n_bus(self) -> int:
        return len(self.buses)

    @property
    def bus_ids(self) -> Tuple[str, ...]:
        return tuple(bus.id for bus in self.buses)

    @property
    def slack_index(self) -> int:
        for i, bus in enumerate(self.buses):
            if bus.kind == BusKind.SLACK:
                return i
        raise UnknownBus("network has no slack bus")

    @property
    def slack_id(self) -> str:
        return self.buses[self.slack_index].id

    def index_of(self, bus_id: str) -> int:
        try:
            return self._index[bus_id]
        except KeyError:
            raise UnknownBus(f"unknown bus {bus_id!r}") from None

    def has_bus(self, bus_id: str) -> bool:
        return bus_id in self._index

    def bus(self, bus_id: str) -> Bus:
        return self.buses[self.index_of(bus_id)]

    def find_branch(self, i: str, k: str) -> Tuple[Branch, bool]:
        """Return the branch joining i and k and whether it is stored as (i, k)"""
        if (i, k) in self._branch_index:
            return self.branches[self._branch_index[(i, k)]], True
        if (k, i) in self._branch_index:
            return self.branches[self._branch_index[(k, i)]], False
        raise UnknownBranch(f"no branch between {i!r} and {k!r}")

    def has_branch(self, i: str, k: str) -> bool:
        return (i, k) in self._branch_index or (k, i) in self._branch_index


# Network document (external JSON format)

class BaseRecord(BaseModel):
    s_kva: float = Field(gt=0.0)
    v_kv: float = Field(gt=0.0)


class BusRecord(BaseModel):
    id: str
    kind: BusKind = BusKind.PQ
    p_load_kw: float = 0.0
    q_load_kvar: float = 0.0
    dg_kva: float = Field(0.0, ge=0.0)
    dg_pf: float = Field(0.95, gt=0.0, le=1.0)

    @field_validator("id", mode="before")
    @classmethod
    def _stringify_id(cls, value):
        return str(value)


class BranchRecord(BaseModel):
    model_config = ConfigDict(populate_by_name=True)

    from_bus: str = Field(alias="from")
    to_bus: str = Field(alias="to")
    r_ohm: float
    x_ohm: float

    @field_validator("from_bus", "to_bus", mode="before")
    @classmethod
    def _stringify_ends(cls, value):
        return str(value)


class NetworkDocument(BaseModel):
    name: str = "network"
    notes: Optional[str] = None
    base: BaseRecord
    buses: List[BusRecord]
    branches: List[BranchRecord]


# Measurements

class MeasurementType(str, Enum):
    VMAG = "vmag"
    PFLOW = "pflow"
    QFLOW = "qflow"
    PINJ = "pinj"
    QINJ = "qinj"


class MeasurementClass(str, Enum):
    SCADA = "scada"
    PSEUDO = "pseudo"


class MeasurementKind(BaseModel):
    """What is measured and where: a bus for vmag/injections, a branch for flows"""
    model_config = ConfigDict(frozen=True)

    type: MeasurementType
    bus: Optional[str] = None
    branch: Optional[Tuple[str, str]] = None

    @model_validator(mode="after")
    def _check_location(self):
        if self.type in (MeasurementType.PFLOW, MeasurementType.QFLOW):
            if self.branch is None:
                raise ValueError(f"{self.type.value} measurement needs a branch")
        elif self.bus is None:
            raise ValueError(f"{self.type.value} measurement needs a bus")
        return self

    @property
    def is_flow(self) -> bool:
        return self.type in (MeasurementType.PFLOW, MeasurementType.QFLOW)

    @property
    def is_active(self) -> bool:
        return self.type in (MeasurementType.PFLOW, MeasurementType.PINJ)

    @property
    def location(self) -> Tuple[str, ...]:
        return self.branch if self.is_flow else (self.bus,)

    @property
    def label(self) -> str:
        return f"{self.type.value}@{'-'.join(self.location)}"


class Measurement(BaseModel):
    kind: MeasurementKind
    klass: MeasurementClass = MeasurementClass.SCADA
    true_value: float
    noisy_value: float
    sigma: float = Field(gt=0.0)


class MeasurementSet(BaseModel):
    """Ordered measurements; the order defines matrix row order downstream"""

    measurements: List[Measurement]
    rng_seed: Optional[int] = None
    n_states: Optional[int] = None

    def __len__(self) -> int:
        return len(self.measurements)

    def __iter__(self):
        return iter(self.measurements)

    def __getitem__(self, index) -> Measurement:
        return self.measurements[index]

    @property
    def kinds(self) -> List[MeasurementKind]:
        return [m.kind for m in self.measurements]

    @property
    def redundancy(self) -> Optional[float]:
        if not self.n_states:
            return None
        return len(self.measurements) / self.n_states


def _parse_branch(value) -> Tuple[str, str]:
    if isinstance(value, str):
        parts = value.split("-")
        if len(parts) != 2 or not all(parts):
            raise ValueError(f"branch {value!r} must look like 'from-to'")
        return parts[0], parts[1]
    if isinstance(value, (list, tuple)) and len(value) == 2:
        return str(value[0]), str(value[1])
    raise ValueError(f"cannot read branch from {value!r}")


class PlacementSpec(BaseModel):
    """Where measurements sit and how noisy each class is"""

    vmag: List[str] = Field(default_factory=list)
    flow: List[Tuple[str, str]] = Field(default_factory=list)
    inj_pseudo: List[str] = Field(default_factory=list)
    inj_scada: List[str] = Field(default_factory=list)
    scada_rate: float = Field(0.01, gt=0.0, lt=1.0)
    pseudo_rate: float = Field(0.20, gt=0.0, lt=1.0)

    @model_validator(mode="before")
    @classmethod
    def _unpack_rates(cls, data):
        if isinstance(data, dict) and "rates" in data:
            data = dict(data)
            rates = data.pop("rates") or {}
            if "scada" in rates:
                data["scada_rate"] = rates["scada"]
            if "pseudo" in rates:
                data["pseudo_rate"] = rates["pseudo"]
        return data

    @field_validator("vmag", "inj_pseudo", "inj_scada", mode="before")
    @classmethod
    def _stringify_buses(cls, value):
        return [str(v) for v in value]

    @field_validator("flow", mode="before")
    @classmethod
    def _parse_flows(cls, value):
        return [_parse_branch(v) for v in value]

    def to_document(self) -> dict:
        return {
            "vmag": list(self.vmag),
            "flow": [f"{i}-{k}" for i, k in self.flow],
            "inj_pseudo": list(self.inj_pseudo),
            "inj_scada": list(self.inj_scada),
            "rates": {"scada": self.scada_rate, "pseudo": self.pseudo_rate},
        }


# Benchmark scenarios and reports

class Scenario(BaseModel):
    """One benchmark configuration; per-trial seeds are base_seed + trial index"""

    net_path: Path
    placement_path: Path
    method: Literal["wls", "interval", "compare"] = "compare"
    trials: int = Field(1000, ge=1)
    base_seed: int = Field(0, ge=0)
    load_scale: Optional[float] = Field(None, gt=0.0)
    dg_scale: float = Field(1.0, ge=0.0)
    profile_band: Optional[Tuple[float, float]] = Field(
        None, description="Band for the lowest |V|, reached by load scaling")
    dg_band: Optional[Tuple[float, float]] = Field(
        None, description="Band for the highest |V|, reached by DG scaling; needs profile_band")
    noise_scada: Optional[float] = Field(None, gt=0.0, lt=1.0)
    noise_pseudo: Optional[float] = Field(None, gt=0.0, lt=1.0)
    zero_noise: bool = False
    wls_tol: Optional[float] = Field(None, gt=0.0)
    wls_max_iter: Optional[int] = Field(None, ge=1)
    eps: Optional[float] = Field(None, gt=0.0)
    timing_repeats: Optional[int] = Field(None, ge=1)
    warmup: Optional[int] = Field(None, ge=0)
    threads: Optional[int] = Field(None, ge=1)

    @field_validator("profile_band", "dg_band")
    @classmethod
    def _ordered_band(cls, value):
        if value is not None and not 0.0 < value[0] < value[1]:
            raise ValueError(f"band {value} must satisfy 0 < lo < hi")
        return value

    @model_validator(mode="after")
    def _dg_band_needs_profile_band(self):
        if self.dg_band is not None and self.profile_band is None:
            raise ValueError("dg_band is only fitted together with profile_band")
        return self

    def trial_seeds(self) -> List[int]:
        return [self.base_seed + i for i in range(self.trials)]

    def scenario_hash(self) -> str:
        payload = self.model_dump_json(exclude={"threads"})
        return hashlib.sha256(payload.encode("utf-8")).hexdigest()[:16]


class EstimateReport(BaseModel):
    """Accuracy and timing of one method on one scenario"""

    method: Literal["wls", "interval"]
    scenario_hash: str
    scenario: Optional[Scenario] = None
    base_seed: int
    trial_seeds: List[int]
    bus_ids: List[str]
    abs_error_real: List[float] = Field(description="Per-bus absolute error; worst over trials for WLS")
    abs_error_imag: List[float]
    mae_real: float = Field(ge=0.0, description="Max over buses; worst single trial for WLS")
    mae_imag: float = Field(ge=0.0)
    rmse_real: Optional[List[float]] = None
    rmse_imag: Optional[List[float]] = None
    max_rmse_real: Optional[float] = Field(None, ge=0.0)
    max_rmse_imag: Optional[float] = Field(None, ge=0.0)
    worst_trial: Optional[int] = None
    iterations: List[int]
    solve_time_ms: float = Field(description="Median interval solve, or mean WLS trial")
    total_time_s: float
    timing_repeats: int
    redundancy: float
    load_scale: float = 1.0
    dg_scale: float = 1.0
    beta: Optional[float] = None
    krawczyk_iterations: Optional[int] = None
    hull_radius_max: Optional[float] = None
    chi_square_pass_rate: Optional[float] = None


class ComparisonReport(BaseModel):
    """Side-by-side interval vs WLS report"""

    scenario_hash: str
    reports: List[EstimateReport]
    time_ratio: float = Field(description="interval solve time / mean WLS trial time")

    def by_method(self, method: str) -> EstimateReport:
        for report in self.reports:
            if report.method == method:
                return report
        raise KeyError(method)
