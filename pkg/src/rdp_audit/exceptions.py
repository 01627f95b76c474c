"""Exception types raised by rdp_audit."""


class DegenerateSampleError(ValueError):
    """A sample carries no spread (e.g. zero variance) where one is needed."""


class DegenerateEstimateError(ValueError):
    """A density estimate makes a divergence functional undefined."""


class NumericalFailure(RuntimeError):
    """A numerical routine did not converge to the requested accuracy."""
