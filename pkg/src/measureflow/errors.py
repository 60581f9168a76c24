"""Semantic exceptions shared across the package."""


class MeasureflowError(Exception):
    """Base class for all package errors."""


class DimensionMismatch(MeasureflowError, ValueError):
    """Operands live on spaces of different dimension."""


class EngineConfigError(MeasureflowError, ValueError):
    """Pairing engine is missing data required by the requested mode."""


class NonFiniteValue(MeasureflowError, FloatingPointError):
    """An integrand or derivative evaluated to NaN/Inf; message carries the probe point."""


class FlowDomainError(MeasureflowError, ValueError):
    """Flow parameter outside the estimated injectivity window."""


class InversionError(MeasureflowError, RuntimeError):
    """Newton inversion of a transformation failed (graph condition violated)."""


class ScenarioError(MeasureflowError, ValueError):
    """Scenario configuration failed validation; message aggregates all problems."""
