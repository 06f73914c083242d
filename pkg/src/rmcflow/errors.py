"""Exception types shared across the flow modules."""


class FlowError(RuntimeError):
    """Base class for anything the integrators can raise on purpose."""


class StepRejected(FlowError):
    """A time step produced state that fails a sanity gate (NaN, negative
    profile, curvature blowup beyond the configured ceiling)."""


class PoleSingularity(FlowError):
    """The ambient metric stopped closing up smoothly at a pole: the
    extrapolated orbital curvature no longer matches the radial one."""


class DegenerateCurve(FlowError):
    """The profile curve lost its graph/arclength structure: collapsed
    segment, fold-over, or an endpoint leaving the coordinate domain."""


class ConfigError(ValueError):
    """Malformed or unknown entry in a run configuration file."""
