# utils/errors.py


class DrnaError(Exception):
    """Base class for every error raised by the filtering engine and its tooling."""


class ConfigError(DrnaError, ValueError):
    """Invalid run configuration. Carries the name of the offending field."""

    def __init__(self, field, message):
        self.field = field
        self.message = message
        super().__init__(f"{field}: {message}")

    def __reduce__(self):
        return type(self), (self.field, self.message)


class ModelError(DrnaError, ValueError):
    """Invalid model parameters, malformed observations or a violated model contract."""


class TopologyError(DrnaError, ValueError):
    """Infeasible graph, unrepairable topology or an exchange map that does not fit."""


class DegenerateWeightsError(DrnaError):
    """A processing element's aggregate weight underflowed to zero."""

    def __init__(self, pe, step):
        self.pe = pe
        self.step = step
        super().__init__(
            f"aggregate weight of PE {pe} underflowed to zero at step {step}; "
            f"the model likelihood is not bounded below"
        )

    def __reduce__(self):
        return type(self), (self.pe, self.step)


class ImpossibleObservationError(DrnaError, ValueError):
    """The exact filter received an observation with zero predicted probability."""


class RateFitError(DrnaError, ValueError):
    """The convergence-rate least-squares problem is degenerate."""


class ReferenceMismatchError(DrnaError, ValueError):
    """Estimates and reference sequences do not line up."""
