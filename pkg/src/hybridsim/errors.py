"""Exception types shared across the package."""


class StructuralError(ValueError):
    """A data structure violates its own invariants (popcount mismatch, bad packing)."""


class DimensionError(ValueError):
    """Operand shapes or lengths do not line up."""


class AccumulatorOverflow(OverflowError):
    """A signed 32-bit accumulator left its representable range."""


class PreconditionError(ValueError):
    """An integer-exactness precondition (divisibility) does not hold."""


class RangeError(ValueError):
    """A quantity falls outside the signed 8-bit range."""


class CapacityError(ValueError):
    """A resource guard was hit (no PEs for work, enumeration too large)."""


class CalibrationError(RuntimeError):
    """Microbenchmark fit is degenerate."""


class ParameterError(ValueError):
    """Generator or configuration parameter is infeasible."""


class PipelineError(RuntimeError):
    """An upstream pipeline artifact is missing."""

    def __init__(self, stage, path):
        super().__init__(f"missing output of stage '{stage}': {path}")
        self.stage = stage
        self.path = path
