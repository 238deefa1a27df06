"""
Interval Estimator - Linearized measurement model solved as an interval system
Pipeline: complex linear rows -> real rectangular system Ax = b -> ±3σ interval
relaxation -> augmented square system -> Krawczyk enclosure

The augmented system stacks Ax − y = b on top of Aᵀy = 0. At the midpoint this is
the normal-equation form of the unweighted least-squares problem min ‖Ax − b‖, with
y the residual vector, so the midpoint of the state part of the enclosure is the
least-squares estimate and the dummy part encloses the residuals.
"""

import logging
import time
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy import linalg

from config import config
from errors import (
    ContractionFailure, IterationCap, NestednessViolation, RankDeficient, SingularMidpoint, UnpairedPQ,
)
from interval_core import (
    IntervalMatrix, IntervalVector, ivm_mag_matvec, ivm_matmul, ivm_matvec, ivv_distance, ivv_inf_norm,
    ivv_intersect,
)
from measurements import check_kind
from models import Measurement, MeasurementKind, MeasurementSet, MeasurementType, Network
from network import StateVector, build_admittance

logger = logging.getLogger(__name__)

COVERAGE = 3.0  # measurement error bound in standard deviations


# Linearization

def linearize_reciprocal(v: complex) -> complex:
    """First-order expansion of 1/V around 1: 1/V ≈ 2 − V"""
    return 2.0 - v


def linearization_error(v: complex) -> float:
    """F(V) = |1/V − (2 − V)|"""
    return float(abs(1.0 / v - linearize_reciprocal(v)))


# Linear model

@dataclass(frozen=True)
class ComplexRow:
    """Σ B_j·V_j + Σ D_j·V_j* = E with B depending on the measured S and D on admittances only"""

    b_coeffs: Dict[int, complex]
    d_coeffs: Dict[int, complex]
    rhs: complex
    source: Tuple[MeasurementKind, MeasurementKind]
    sigma_p: float
    sigma_q: float

    @property
    def label(self) -> str:
        return "/".join(kind.label for kind in self.source)

    def evaluate(self, voltages: np.ndarray) -> complex:
        """Σ B·V + Σ D·V* at the given bus voltages"""
        total = sum(b * voltages[j] for j, b in self.b_coeffs.items())
        total += sum(d * np.conj(voltages[j]) for j, d in self.d_coeffs.items())
        return complex(total)

    def residual(self, voltages: np.ndarray) -> complex:
        return self.evaluate(voltages) - self.rhs


@dataclass(frozen=True)
class MagnitudeRow:
    """V_r at bus equals the measured |V| (small angle)"""

    bus: int
    value: float
    sigma: float
    source: MeasurementKind


@dataclass
class LinearModel:
    net: Network
    complex_rows: List[ComplexRow]
    magnitude_rows: List[MagnitudeRow]

    @property
    def n_states(self) -> int:
        return 2 * self.net.n_bus


def _pair_measurements(ms: MeasurementSet) -> Tuple[List[Tuple[Measurement, Measurement]], List[Measurement]]:
    """Group P/Q measurements by location in first-seen order; return (pairs, magnitudes)"""
    groups: Dict[Tuple, Dict[bool, Measurement]] = {}
    magnitudes = []
    for m in ms:
        kind = m.kind
        if kind.type == MeasurementType.VMAG:
            magnitudes.append(m)
            continue
        group = groups.setdefault((kind.is_flow, kind.location), {})
        if kind.is_active in group:
            raise UnpairedPQ(f"{kind.label} appears twice at the same location")
        group[kind.is_active] = m

    pairs = []
    for (is_flow, location), group in groups.items():
        if len(group) != 2:
            missing = "Q" if True in group else "P"
            what = "flow " + "-".join(location) if is_flow else f"injection at {location[0]}"
            raise UnpairedPQ(f"{what} has no matching {missing} measurement")
        pairs.append((group[True], group[False]))
    return pairs, magnitudes


def build_linear_model(net: Network, ms: MeasurementSet) -> LinearModel:
    """Complex rows for every P/Q pair and scalar rows for every |V|, from noisy values"""
    for kind in ms.kinds:
        check_kind(kind, net)
    adm = build_admittance(net)
    pairs, magnitudes = _pair_measurements(ms)

    rows = []
    for p, q in pairs:
        s = complex(p.noisy_value, q.noisy_value)
        source = (p.kind, q.kind)
        if p.kind.is_flow:
            i, k = (net.index_of(bus) for bus in p.kind.branch)
            yc = np.conj(adm.between(i, k))
            d_coeffs = {i: yc, k: -yc}
            b_coeffs = {i: s}
        else:
            k = net.index_of(p.kind.bus)
            d_coeffs = {}
            y_sum = 0.0j
            for l, y in adm.neighbors(k):
                d_coeffs[l] = -np.conj(y)
                y_sum += y
            d_coeffs[k] = np.conj(y_sum)
            b_coeffs = {k: s}
        rows.append(ComplexRow(b_coeffs=b_coeffs, d_coeffs=d_coeffs, rhs=2.0 * s, source=source,
                               sigma_p=p.sigma, sigma_q=q.sigma))

    magnitude_rows = [MagnitudeRow(bus=net.index_of(m.kind.bus), value=m.noisy_value, sigma=m.sigma, source=m.kind)
                      for m in magnitudes]
    logger.debug("Linear model: %d complex rows, %d magnitude rows", len(rows), len(magnitude_rows))
    return LinearModel(net=net, complex_rows=rows, magnitude_rows=magnitude_rows)


# Real rectangular system

@dataclass(frozen=True)
class RowSource:
    """Where a real row came from and which of its entries carry measurement noise"""

    label: str
    part: str
    coeff_sigma: Dict[int, float] = field(default_factory=dict)
    rhs_sigma: float = 0.0


@dataclass
class RealSystem:
    """Ax = b with columns [V_r of all buses; V_x of all buses]

    a_sigma and b_sigma hold the σ behind every noise-bearing entry; when omitted they
    are read off the row provenance.
    """

    a: np.ndarray
    b: np.ndarray
    row_provenance: List[RowSource]
    bus_ids: Tuple[str, ...]
    a_sigma: Optional[np.ndarray] = None
    b_sigma: Optional[np.ndarray] = None

    def __post_init__(self):
        if self.a_sigma is None or self.b_sigma is None:
            a_sigma = np.zeros_like(self.a)
            b_sigma = np.zeros_like(self.b)
            for row, source in enumerate(self.row_provenance):
                for col, sigma in source.coeff_sigma.items():
                    a_sigma[row, col] = sigma
                b_sigma[row] = source.rhs_sigma
            self.a_sigma, self.b_sigma = a_sigma, b_sigma

    @property
    def shape(self) -> Tuple[int, int]:
        return self.a.shape


def _coefficient_matrices(rows: Sequence[ComplexRow], n_bus: int) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Dense B and D (rows × buses) plus the mask of measured-S entries"""
    b_idx, b_val, d_idx, d_val = [], [], [], []
    for r, crow in enumerate(rows):
        b_idx.extend((r, j) for j in crow.b_coeffs)
        b_val.extend(crow.b_coeffs.values())
        d_idx.extend((r, j) for j in crow.d_coeffs)
        d_val.extend(crow.d_coeffs.values())

    big_b = np.zeros((len(rows), n_bus), dtype=complex)
    big_d = np.zeros((len(rows), n_bus), dtype=complex)
    measured = np.zeros((len(rows), n_bus), dtype=bool)
    if b_idx:
        r, j = np.array(b_idx, dtype=int).T
        np.add.at(big_b, (r, j), np.array(b_val, dtype=complex))
        measured[r, j] = True
    if d_idx:
        r, j = np.array(d_idx, dtype=int).T
        np.add.at(big_d, (r, j), np.array(d_val, dtype=complex))
    return big_b, big_d, measured


def to_rectangular(model: LinearModel, check_rank: bool = True) -> RealSystem:
    """Split every complex row into real and imaginary rows, append magnitude and slack rows"""
    net = model.net
    n_bus = net.n_bus
    crows = model.complex_rows
    n_complex = 2 * len(crows)
    n_rows = n_complex + len(model.magnitude_rows) + 2
    a = np.zeros((n_rows, 2 * n_bus))
    b = np.zeros(n_rows)
    a_sigma = np.zeros_like(a)
    b_sigma = np.zeros(n_rows)

    # (B + D)·V_r + j(B − D)·V_x, split into real and imaginary parts
    big_b, big_d, measured = _coefficient_matrices(crows, n_bus)
    re, im = slice(0, n_complex, 2), slice(1, n_complex, 2)
    a[re, :n_bus] = big_b.real + big_d.real
    a[re, n_bus:] = -big_b.imag + big_d.imag
    a[im, :n_bus] = big_b.imag + big_d.imag
    a[im, n_bus:] = big_b.real - big_d.real
    rhs = np.array([crow.rhs for crow in crows], dtype=complex)
    b[re], b[im] = rhs.real, rhs.imag

    sigma_p = np.array([crow.sigma_p for crow in crows])[:, np.newaxis]
    sigma_q = np.array([crow.sigma_q for crow in crows])[:, np.newaxis]
    a_sigma[re, :n_bus], a_sigma[re, n_bus:] = measured * sigma_p, measured * sigma_q
    a_sigma[im, :n_bus], a_sigma[im, n_bus:] = measured * sigma_q, measured * sigma_p
    b_sigma[re], b_sigma[im] = 2.0 * sigma_p[:, 0], 2.0 * sigma_q[:, 0]

    provenance = []
    for crow in crows:
        label = crow.label
        re_sigma = {j: crow.sigma_p for j in crow.b_coeffs} | {n_bus + j: crow.sigma_q for j in crow.b_coeffs}
        im_sigma = {j: crow.sigma_q for j in crow.b_coeffs} | {n_bus + j: crow.sigma_p for j in crow.b_coeffs}
        provenance.append(RowSource(label, "re", re_sigma, 2.0 * crow.sigma_p))
        provenance.append(RowSource(label, "im", im_sigma, 2.0 * crow.sigma_q))

    row = n_complex
    for mrow in model.magnitude_rows:
        a[row, mrow.bus] = 1.0
        b[row] = mrow.value
        b_sigma[row] = mrow.sigma
        provenance.append(RowSource(mrow.source.label, "vmag", {}, mrow.sigma))
        row += 1

    slack = net.slack_index
    a[row, slack] = 1.0
    b[row] = 1.0
    a[row + 1, n_bus + slack] = 1.0
    provenance.append(RowSource(f"slack@{net.slack_id}", "re"))
    provenance.append(RowSource(f"slack@{net.slack_id}", "im"))

    system = RealSystem(a=a, b=b, row_provenance=provenance, bus_ids=net.bus_ids, a_sigma=a_sigma, b_sigma=b_sigma)
    if check_rank:
        check_full_rank(system)
    return system


def check_full_rank(system: RealSystem):
    """Raise RankDeficient unless A has full column rank"""
    rank = np.linalg.matrix_rank(system.a)
    if rank < system.a.shape[1]:
        raise RankDeficient(f"linear model has rank {rank} < {system.a.shape[1]} states; placement is unobservable")


def residual(system: RealSystem, x) -> np.ndarray:
    """Ax − b for a stacked state or StateVector"""
    if isinstance(x, StateVector):
        x = x.stacked()
    return system.a @ np.asarray(x, dtype=float) - system.b


# Interval relaxation

@dataclass
class IntervalSystem:
    a: IntervalMatrix
    b: IntervalVector
    bus_ids: Tuple[str, ...]

    @property
    def shape(self) -> Tuple[int, int]:
        return self.a.shape


def relax_to_intervals(system: RealSystem, coverage: float = COVERAGE) -> IntervalSystem:
    """Widen every noise-bearing entry by ±coverage·σ around its noisy value"""
    return IntervalSystem(a=IntervalMatrix.from_midrad(system.a, coverage * system.a_sigma),
                          b=IntervalVector.from_midrad(system.b, coverage * system.b_sigma),
                          bus_ids=system.bus_ids)


def augment(ivs: IntervalSystem) -> Tuple[IntervalMatrix, IntervalVector]:
    """[[A, −I], [0, Aᵀ]]·[x; y] = [b; 0]"""
    m, n = ivs.shape
    script_a = IntervalMatrix.block([
        [ivs.a, -np.eye(m)],
        [np.zeros((n, n)), ivs.a.T],
    ])
    script_b = IntervalVector(np.concatenate([ivs.b.lo, np.zeros(n)]),
                              np.concatenate([ivs.b.hi, np.zeros(n)]))
    return script_a, script_b


# Krawczyk iteration

def _contraction(c: np.ndarray, script_a: IntervalMatrix) -> IntervalMatrix:
    """I − C·𝒜"""
    return IntervalMatrix.identity(c.shape[0]) - ivm_matmul(IntervalMatrix.from_point(c), script_a)


@dataclass(frozen=True)
class KrawczykStart:
    """Preconditioner, starting box and the products the iteration reuses"""

    c: np.ndarray
    x0: IntervalVector
    beta: float
    contraction: IntervalMatrix
    cb: IntervalVector


def krawczyk_init(script_a: IntervalMatrix, script_b: IntervalVector) -> KrawczykStart:
    """Preconditioner C = Mid(𝒜)⁻¹, β = ‖I − C𝒜‖∞ and X0 = [−α, α] with α = ‖C𝓑‖∞/(1 − β)"""
    try:
        c = linalg.inv(script_a.mid())
    except (linalg.LinAlgError, ValueError) as e:
        raise SingularMidpoint(f"midpoint of the augmented system is singular: {e}") from e
    if not np.all(np.isfinite(c)):
        raise SingularMidpoint("midpoint inverse is not finite")

    contraction = _contraction(c, script_a)
    beta = contraction.inf_norm()
    if beta >= 1.0:
        raise ContractionFailure(f"‖I − C𝒜‖∞ = {beta:.4f} ≥ 1; intervals too wide for a contracting iteration", beta)

    cb = ivm_matvec(IntervalMatrix.from_point(c), script_b)
    alpha = ivv_inf_norm(cb) / (1.0 - beta)
    logger.debug("Krawczyk init: beta=%.4f alpha=%.4e size=%d", beta, alpha, len(script_b))
    return KrawczykStart(c=c, x0=IntervalVector.symmetric(len(script_b), alpha), beta=beta,
                         contraction=contraction, cb=cb)


@dataclass
class Enclosure:
    """Final interval hull [x; y], its midpoint state estimate and iteration data"""

    hull: IntervalVector
    iterations: int
    beta: float
    n_states: int
    x_mid: Optional[StateVector] = None
    distances: List[float] = field(default_factory=list)

    def state_hull(self) -> IntervalVector:
        return self.hull[:self.n_states]

    def dummy_hull(self) -> IntervalVector:
        return self.hull[self.n_states:]

    def hull_radius(self) -> float:
        """Largest radius among the state components"""
        return float(np.max(self.state_hull().rad())) if self.n_states else 0.0

    def contains_state(self, state) -> bool:
        x = state.stacked() if isinstance(state, StateVector) else np.asarray(state, dtype=float)
        return self.state_hull().contains(x)


def krawczyk_solve(c: np.ndarray, x0: IntervalVector, script_a: IntervalMatrix, script_b: IntervalVector,
                   eps: Optional[float] = None, max_iter: Optional[int] = None,
                   n_states: Optional[int] = None, bus_ids: Optional[Sequence[str]] = None,
                   beta: Optional[float] = None, contraction: Optional[IntervalMatrix] = None,
                   cb: Optional[IntervalVector] = None) -> Enclosure:
    """Iterate X ← (C𝓑 + (I − C𝒜)X) ∩ X until the Hausdorff step is at most eps

    contraction and cb are recomputed from c when not supplied by krawczyk_init.
    """
    settings = config.get_interval_config()
    eps = settings['eps'] if eps is None else eps
    max_iter = settings['max_iter'] if max_iter is None else max_iter

    if contraction is None:
        contraction = _contraction(c, script_a)
    if cb is None:
        cb = ivm_matvec(IntervalMatrix.from_point(c), script_b)
    if beta is None:
        beta = contraction.inf_norm()
    contraction_mag = contraction.mag()

    x = x0
    distances = []
    for iteration in range(1, max_iter + 1):
        x_next = ivv_intersect(cb + ivm_mag_matvec(contraction_mag, x), x)
        if not x_next.subset_of(x):
            raise NestednessViolation(f"iteration {iteration} left the previous enclosure")
        distance = ivv_distance(x_next, x)
        distances.append(distance)
        x = x_next
        if distance <= eps:
            enclosure = Enclosure(hull=x, iterations=iteration, beta=beta, distances=distances,
                                  n_states=len(x) if n_states is None else n_states)
            if bus_ids is not None:
                enclosure.x_mid = StateVector.from_stacked(bus_ids, x.mid()[:enclosure.n_states])
            logger.debug("Krawczyk converged in %d iterations, hull radius %.3e", iteration, enclosure.hull_radius())
            return enclosure

    raise IterationCap(f"Krawczyk iteration did not settle below {eps} in {max_iter} iterations "
                       f"(last step {distances[-1]:.3e})")


def solve_interval_system(ivs: IntervalSystem, eps: Optional[float] = None,
                          max_iter: Optional[int] = None) -> Enclosure:
    script_a, script_b = augment(ivs)
    start = krawczyk_init(script_a, script_b)
    return krawczyk_solve(start.c, start.x0, script_a, script_b, eps=eps, max_iter=max_iter,
                          n_states=ivs.shape[1], bus_ids=ivs.bus_ids, beta=start.beta,
                          contraction=start.contraction, cb=start.cb)


def estimate(net: Network, ms: MeasurementSet, eps: Optional[float] = None, max_iter: Optional[int] = None,
             check_rank: bool = True) -> Tuple[StateVector, Enclosure, float]:
    """Build, relax and solve; returns (midpoint state, enclosure, wall-clock seconds)

    Repeated solves of one placement may skip the rank check after the first.
    """
    start = time.perf_counter()
    system = to_rectangular(build_linear_model(net, ms), check_rank=check_rank)
    enclosure = solve_interval_system(relax_to_intervals(system), eps=eps, max_iter=max_iter)
    elapsed = time.perf_counter() - start
    logger.debug("Interval estimate: %d×%d system, beta %.4f, %d iterations, %.2f ms",
                 *system.shape, enclosure.beta, enclosure.iterations, 1000 * elapsed)
    return enclosure.x_mid, enclosure, elapsed
