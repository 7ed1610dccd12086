"""Exception hierarchy shared by all modules."""


class FinslerLabError(Exception):
    """Base class; the CLI maps these to exit code 2."""


class ConfigurationError(FinslerLabError):
    pass


class OrderBudgetError(FinslerLabError):
    """A derivative was requested beyond the jet's truncation caps."""


class SingularEvaluationError(FinslerLabError):
    def __init__(self, message: str, value: float = float("nan")):
        super().__init__(message)
        self.value = value


class SpecError(FinslerLabError):
    """Metric spec document is malformed or violates a family constraint."""


class InadmissiblePointError(FinslerLabError):
    """Point on the zero section, inside the Finsleroid axis cone, or outside
    the region where the metric is strongly convex."""


class RegularityError(FinslerLabError):
    """d(alpha) vanishes at the point."""


class ExcludedRayError(FinslerLabError):
    """The projected gradient vanishes (y on the +-X_* ray)."""


class DimensionError(FinslerLabError):
    pass


class StencilError(FinslerLabError):
    pass
