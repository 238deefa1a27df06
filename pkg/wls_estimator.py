"""
WLS Estimator - Nonlinear weighted least squares solved by Gauss-Newton
Baseline estimator: exact measurement functions h(x), analytic rectangular
Jacobian with the slack eliminated, and normal equations (HᵀWH)Δx = HᵀW(z − h(x))
"""

import logging
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np
from scipy import linalg
from scipy.stats import chi2

from config import config
from errors import NonConvergence, SingularGainMatrix, UnknownElement
from models import MeasurementKind, MeasurementSet, MeasurementType, Network
from network import (
    AdmittanceMap, StateVector, build_admittance, flow_at, flow_partials, injection_at,
    injection_partials, rectangular_partials,
)

logger = logging.getLogger(__name__)


class MeasurementModel:
    """h(x) and H(x) for a fixed network and measurement list"""

    def __init__(self, net: Network, kinds: Sequence[MeasurementKind]):
        self.net = net
        self.kinds = list(kinds)
        self.adm: AdmittanceMap = build_admittance(net)
        self.slack = net.slack_index
        self.state_buses = [i for i in range(net.n_bus) if i != self.slack]
        self.column = {bus: c for c, bus in enumerate(self.state_buses)}
        self.n_states = 2 * len(self.state_buses)
        self._rows = [self._resolve(kind) for kind in self.kinds]

    def _resolve(self, kind: MeasurementKind) -> Tuple:
        net = self.net
        try:
            if kind.is_flow:
                i, k = (net.index_of(b) for b in kind.branch)
                return kind.type, i, k, self.adm.between(i, k)
            return kind.type, net.index_of(kind.bus), None, None
        except (KeyError, LookupError) as e:
            raise UnknownElement(f"{kind.label}: {e}") from e

    def voltages(self, x: np.ndarray) -> np.ndarray:
        """Complex bus voltages from the reduced state [V_r; V_x] of non-slack buses"""
        half = len(self.state_buses)
        v = np.ones(self.net.n_bus, dtype=complex)
        v[self.state_buses] = x[:half] + 1j * x[half:]
        return v

    def reduce(self, state: StateVector) -> np.ndarray:
        v = state.voltages[self.state_buses]
        return np.concatenate([v.real, v.imag])

    def h(self, v: np.ndarray) -> np.ndarray:
        out = np.empty(len(self._rows))
        for row, (mtype, i, k, y) in enumerate(self._rows):
            if mtype == MeasurementType.VMAG:
                out[row] = abs(v[i])
                continue
            if y is not None:
                s = flow_at(y, v[i], v[k])
            else:
                s = injection_at(self.adm, v, i)
            out[row] = s.real if mtype in (MeasurementType.PFLOW, MeasurementType.PINJ) else s.imag
        return out

    def jacobian(self, v: np.ndarray) -> np.ndarray:
        half = len(self.state_buses)
        jac = np.zeros((len(self._rows), self.n_states))
        for row, (mtype, i, k, y) in enumerate(self._rows):
            if mtype == MeasurementType.VMAG:
                if i != self.slack:
                    magnitude = abs(v[i])
                    jac[row, self.column[i]] = v[i].real / magnitude
                    jac[row, half + self.column[i]] = v[i].imag / magnitude
                continue
            if y is not None:
                partials = flow_partials(y, v[i], v[k], i, k)
            else:
                partials = injection_partials(self.adm, v, i)
            active = mtype in (MeasurementType.PFLOW, MeasurementType.PINJ)
            for bus, d_v, d_vc in partials:
                if bus == self.slack:
                    continue
                d_r, d_x = rectangular_partials(d_v, d_vc)
                c = self.column[bus]
                jac[row, c] += d_r.real if active else d_r.imag
                jac[row, half + c] += d_x.real if active else d_x.imag
        return jac


def h_eval(net: Network, x: StateVector, kinds: Sequence[MeasurementKind]) -> np.ndarray:
    """Exact measurement functions at state x"""
    return MeasurementModel(net, kinds).h(x.voltages)


def jacobian(net: Network, x: StateVector, kinds: Sequence[MeasurementKind]) -> np.ndarray:
    """∂h/∂x with columns [V_r; V_x] of the non-slack buses"""
    return MeasurementModel(net, kinds).jacobian(x.voltages)


def insensitive_rows(jac: np.ndarray) -> List[int]:
    return [int(r) for r in np.flatnonzero(~np.any(jac != 0.0, axis=1))]


@dataclass
class WlsProblem:
    """z = h(x) + e with W = R⁻¹ diagonal; rows follow the measurement set order"""

    net: Network
    ms: MeasurementSet
    weights: np.ndarray
    x0: StateVector

    @classmethod
    def build(cls, net: Network, ms: MeasurementSet, x0: Optional[StateVector] = None) -> "WlsProblem":
        weights = np.array([1.0 / m.sigma ** 2 for m in ms])
        return cls(net=net, ms=ms, weights=weights, x0=x0 or StateVector.flat(net))

    @property
    def z(self) -> np.ndarray:
        return np.array([m.noisy_value for m in self.ms])


@dataclass
class WlsResult:
    x_hat: StateVector
    iterations: int
    converged: bool
    objective: float
    step_norms: List[float] = field(default_factory=list)
    objective_trace: List[float] = field(default_factory=list)
    halvings: int = 0
    m: int = 0
    n: int = 0


def objective(problem: WlsProblem, x: StateVector) -> float:
    """J = (z − h(x))ᵀ W (z − h(x))"""
    r = problem.z - h_eval(problem.net, x, problem.ms.kinds)
    return float(r @ (problem.weights * r))


def gradient_norm(problem: WlsProblem, x: StateVector) -> float:
    """‖HᵀW(z − h(x))‖∞"""
    model = MeasurementModel(problem.net, problem.ms.kinds)
    r = problem.z - model.h(x.voltages)
    return float(np.max(np.abs(model.jacobian(x.voltages).T @ (problem.weights * r))))


def next_step_norm(problem: WlsProblem, x: StateVector) -> float:
    """‖Δx‖∞ of the Gauss-Newton step that would follow x (stationarity in state units)"""
    model = MeasurementModel(problem.net, problem.ms.kinds)
    return float(np.max(np.abs(_gauss_newton_step(model, problem, x.voltages)[0])))


def _gauss_newton_step(model: MeasurementModel, problem: WlsProblem, v: np.ndarray):
    r = problem.z - model.h(v)
    jac = model.jacobian(v)
    weighted = jac * problem.weights[:, np.newaxis]
    gain = jac.T @ weighted
    try:
        factor = linalg.cho_factor(gain)
    except linalg.LinAlgError as e:
        raise SingularGainMatrix(f"gain matrix HᵀWH is not positive definite: {e}") from e
    return linalg.cho_solve(factor, weighted.T @ r), r


def gauss_newton(problem: WlsProblem, tol: Optional[float] = None, max_iter: Optional[int] = None,
                 step_halving: Optional[bool] = None) -> WlsResult:
    """Iterate x ← x + Δx until ‖Δx‖∞ < tol"""
    settings = config.get_wls_config()
    tol = settings['tol'] if tol is None else tol
    max_iter = settings['max_iter'] if max_iter is None else max_iter
    step_halving = settings['step_halving'] if step_halving is None else step_halving
    max_halvings = settings['max_halvings']

    model = MeasurementModel(problem.net, problem.ms.kinds)
    if len(problem.ms) < model.n_states:
        raise SingularGainMatrix(f"{len(problem.ms)} measurements for {model.n_states} states")
    z, w = problem.z, problem.weights
    x = model.reduce(problem.x0)
    v = model.voltages(x)

    step_norms, trace = [], []
    halvings = 0
    for iteration in range(1, max_iter + 1):
        dx, r = _gauss_newton_step(model, problem, v)
        cost = float(r @ (w * r))
        trace.append(cost)

        t = 1.0
        candidate = x + dx
        if step_halving:
            new_r = z - model.h(model.voltages(candidate))
            tries = 0
            while float(new_r @ (w * new_r)) > cost and tries < max_halvings:
                t *= 0.5
                tries += 1
                candidate = x + t * dx
                new_r = z - model.h(model.voltages(candidate))
            if tries:
                halvings += tries
                logger.warning("Gauss-Newton iteration %d: objective rose, step halved %d time(s)", iteration, tries)

        x = candidate
        v = model.voltages(x)
        step = float(np.max(np.abs(dx)))
        step_norms.append(step)
        logger.debug("Gauss-Newton iteration %d: J=%.6e ‖Δx‖∞=%.3e", iteration, cost, step)
        if step < tol:
            r = z - model.h(v)
            final = float(r @ (w * r))
            return WlsResult(x_hat=StateVector(problem.net.bus_ids, v), iterations=iteration, converged=True,
                             objective=final, step_norms=step_norms, objective_trace=trace + [final],
                             halvings=halvings, m=len(z), n=model.n_states)

    raise NonConvergence(f"Gauss-Newton did not converge in {max_iter} iterations "
                         f"(last ‖Δx‖∞ {step_norms[-1]:.3e})", max_iter)


def chi_square_check(result: WlsResult, confidence: float = 0.99) -> Tuple[bool, float, float]:
    """J against the χ²(m − n) quantile; reported only, no bad-data processing"""
    dof = result.m - result.n
    if dof <= 0:
        return True, result.objective, float("inf")
    threshold = float(chi2.ppf(confidence, dof))
    return result.objective <= threshold, result.objective, threshold
