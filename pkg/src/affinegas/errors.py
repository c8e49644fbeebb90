"""Exception hierarchy for the affinegas package."""

from __future__ import annotations


class AffineGasError(Exception):
    """Base class for all package errors."""


class InvalidParameterError(AffineGasError):
    """A scalar parameter is outside its admissible range."""


class InvalidProfileError(AffineGasError):
    """Density profile violates positivity or the flat-center condition."""


class IntegrationFailureError(AffineGasError):
    """Background ODE integration failed or left the admissible region."""


class StepSizeUnderflowError(IntegrationFailureError):
    """Adaptive integrator could not meet the tolerance."""


class OrderTooHighError(AffineGasError):
    """Requested derivative order exceeds what grid or theory supports."""


class DegenerateFlowMapError(AffineGasError):
    """Radial flow-map Jacobian is non-positive at some node."""

    def __init__(self, message: str, where: float | None = None):
        super().__init__(message)
        self.where = where


class BlowUpDetectedError(AffineGasError):
    """Non-finite value or vanishing Jacobian detected during evolution."""

    def __init__(self, message: str, tau: float | None = None, where: float | None = None):
        super().__init__(message)
        self.tau = tau
        self.where = where


class StepRejectedError(AffineGasError):
    """Requested time step exceeds the CFL limit."""


class AprioriViolatedError(AffineGasError):
    """A runtime smallness monitor exceeded its bound."""

    def __init__(self, bound: str, tau: float, value: float):
        super().__init__(f"a priori bound '{bound}' violated at tau={tau:.6g} (value {value:.6g})")
        self.bound = bound
        self.tau = tau
        self.value = value


class IterationDivergedError(AffineGasError):
    """Fixed-point iteration difference ratio failed to contract."""


class WindowMismatchError(AffineGasError):
    """Trajectories do not cover a common time window."""


class InsufficientSamplesError(AffineGasError):
    """Not enough samples, or too little expansion, for a decay fit."""


class ConfigError(AffineGasError):
    """Scenario configuration is malformed."""
