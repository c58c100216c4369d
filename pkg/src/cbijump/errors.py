"""Exception hierarchy shared by all modules."""


class CbiError(Exception):
    """Base class for every error raised by cbijump."""


class DivergentIntegral(CbiError):
    """A kernel integral is provably infinite."""


class ZeroMass(CbiError):
    """Sampling was requested from a measure with no mass on the set."""


class InfiniteTotalMass(CbiError):
    """A marked set carries infinite total Levy mass."""


class MomentConditionViolated(CbiError):
    """The first-moment condition on the immigration measure fails."""


class InadmissibleParameters(CbiError):
    """Parameters fail one of the admissibility conditions."""


class StepSizeUnderflow(CbiError):
    """Adaptive step-size control stalled."""

    def __init__(self, t, h):
        super().__init__(f"step size underflow at t={t!r} (h={h!r})")
        self.t = t
        self.h = h


class UnsortedTimes(CbiError):
    """Times passed to a chain recursion are not nondecreasing."""


class PreconditionViolated(CbiError):
    """Simulator called outside the parameter range it supports."""


class TruncationTooSmall(CbiError):
    """Lattice truncation error bound exceeds the requested tolerance."""


class CaseMismatch(CbiError):
    """Inputs do not match the parameter pattern of a closed-form case."""


class ConfigError(CbiError):
    """Experiment configuration is malformed; ``path`` points at the field."""

    def __init__(self, path, message):
        super().__init__(f"{path}: {message}")
        self.path = path
