"""Exception types raised by the estimation and denoising routines."""


class MyriadError(Exception):
    """Base class for all errors raised by this package."""


class PreconditionViolated(MyriadError, ValueError):
    """Input does not satisfy an estimator's preconditions."""


class DegenerateSample(PreconditionViolated):
    """All sample values coincide, so the scale estimate is ill-posed."""


class MaxIterationsExceeded(MyriadError):
    """A fixed-point iteration hit its iteration cap before converging."""

    def __init__(self, result):
        super().__init__(
            f"no convergence after {result.iterations} iterations "
            f"(a={result.params.a!r}, gamma={result.params.gamma!r})"
        )
        self.result = result


class NoConstantRegions(MyriadError):
    """No block passed the constancy test at the smallest block size."""


class LengthMismatch(MyriadError, ValueError):
    pass


class SideMismatch(MyriadError, ValueError):
    pass


class DimensionMismatch(MyriadError, ValueError):
    pass


class TooSmall(MyriadError, ValueError):
    pass
