"""
Exception hierarchy for hullstate
Every error carries a machine-readable category and a CLI exit code
"""

from typing import Optional


class HullstateError(Exception):
    """Base class for all hullstate errors"""

    category = "internal"
    exit_code = 1

    def to_dict(self) -> dict:
        return {"error": self.category, "type": type(self).__name__, "message": str(self)}


# Interval kernel

class IntervalError(HullstateError):
    category = "interval"
    exit_code = 3


class InvalidInterval(IntervalError, ValueError):
    """Raised when an interval is constructed with lo > hi"""


class EmptyIntersection(IntervalError):
    """Disjoint operands in an intersection; the enclosure step is inconsistent"""


class DimensionMismatch(IntervalError, ValueError):
    pass


# Network model

class NetworkError(HullstateError):
    category = "network"
    exit_code = 2


class NetworkFormatError(NetworkError):
    pass


class DuplicateBusId(NetworkError):
    pass


class DisconnectedGraph(NetworkError):
    pass


class NoSlackBus(NetworkError):
    pass


class MultipleSlackBuses(NoSlackBus):
    pass


class NonRadialTopology(NetworkError):
    pass


class UnitMissing(NetworkError):
    pass


class ZeroImpedanceBranch(NetworkError):
    pass


class UnknownBus(NetworkError, KeyError):
    def __str__(self) -> str:
        return Exception.__str__(self)


class UnknownBranch(NetworkError, KeyError):
    def __str__(self) -> str:
        return Exception.__str__(self)


class PowerFlowError(HullstateError):
    category = "power_flow"
    exit_code = 3


class NonConvergence(PowerFlowError):
    """Iterative solver hit its iteration cap"""

    def __init__(self, message: str, iterations: Optional[int] = None):
        super().__init__(message)
        self.iterations = iterations


class ProfileCalibrationError(PowerFlowError):
    """No load multiplier brings the voltage profile into the requested band"""


# Measurements

class MeasurementError(HullstateError):
    category = "measurement"
    exit_code = 2


class UnknownElement(MeasurementError):
    pass


class InsufficientRedundancy(MeasurementError):
    pass


class UnpairedPQ(MeasurementError):
    pass


class PlacementFormatError(MeasurementError):
    pass


# Estimators

class EstimationError(HullstateError):
    category = "estimation"
    exit_code = 3


class SingularGainMatrix(EstimationError):
    """Gain matrix HᵀWH is not positive definite (unobservable placement)"""


class RankDeficient(EstimationError):
    """Linear model matrix A has rank below the number of states"""


class SingularMidpoint(EstimationError):
    pass


class ContractionFailure(EstimationError):
    """‖I − C𝒜‖∞ ≥ 1, the Krawczyk iteration is not guaranteed to contract"""

    def __init__(self, message: str, beta: Optional[float] = None):
        super().__init__(message)
        self.beta = beta


class IterationCap(EstimationError):
    pass


class NestednessViolation(EstimationError):
    pass


class TrialFailure(HullstateError):
    """Estimator error raised inside a Monte Carlo trial"""

    category = "trial"
    exit_code = 3

    def __init__(self, trial: int, seed: int, cause: Exception):
        super().__init__(f"trial {trial} (seed {seed}) failed: {type(cause).__name__}: {cause}")
        self.trial = trial
        self.seed = seed
        self.cause = cause

    def to_dict(self) -> dict:
        payload = super().to_dict()
        payload.update({"trial": self.trial, "seed": self.seed,
                        "cause": getattr(self.cause, "category", type(self.cause).__name__)})
        return payload


# Reports

class ReportError(HullstateError):
    category = "io"
    exit_code = 4


class IoFailure(ReportError):
    pass
