"""Exception types shared by all fracspec modules."""


class FracSpecError(Exception):
    """Base class for every error raised by the package."""


class DomainError(FracSpecError, ValueError):
    """An argument lies outside the domain where a quantity is defined."""


class UnsupportedDimensionError(FracSpecError, ValueError):
    """The requested dimension is not covered by the routine."""


class ParameterError(FracSpecError, ValueError):
    """Invalid discretization or configuration parameters."""


class SingularEvaluationError(FracSpecError, ValueError):
    """A singular kernel was evaluated on its diagonal."""


class AssemblyDefectError(FracSpecError, RuntimeError):
    """Assembled matrices violate a structural requirement (e.g. definiteness)."""


class ResolutionError(FracSpecError, ValueError):
    """The requested mesh is too coarse for the geometry."""


class ResourceError(FracSpecError, RuntimeError):
    """A configured computational budget would be exceeded."""


class InvariantViolation(FracSpecError, RuntimeError):
    """A mathematically guaranteed inequality failed beyond tolerance."""
