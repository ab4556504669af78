"""Exception hierarchy shared by the pipeline stages."""


class RerouteError(Exception):
    """Base class for all errors raised by the package."""


class FormatError(RerouteError):
    """An input file cannot be interpreted at all (bad header, mostly malformed rows)."""


class PreconditionError(RerouteError, ValueError):
    """An operation was called with arguments outside its domain."""


class DegenerateSeriesError(RerouteError, ValueError):
    """A series has zero variance where a scale is required."""


class InsufficientDataError(RerouteError, ValueError):
    """Too few observations to compute the requested quantity."""


class EmptyPanelError(RerouteError):
    """No control series survived selection."""


class NonpositiveResponseError(RerouteError, ValueError):
    """A response value cannot be log-transformed."""

    def __init__(self, entity, period, value):
        self.entity = entity
        self.period = period
        self.value = value
        super().__init__(
            f"nonpositive response {value!r} for entity {entity} at {period}; "
            "log specification requires strictly positive index values"
        )


class UnidentifiedBetaError(RerouteError):
    """The duty dummy has no within-entity variation."""


class RegistryError(RerouteError):
    """Conflicting or invalid anti-dumping registry content."""


class MissingLabelError(RerouteError, KeyError):
    """A detection flag has no investigation label to be scored against."""

    def __str__(self) -> str:  # KeyError would repr() the message
        return str(self.args[0]) if self.args else ""


class UndefinedRateError(RerouteError, ZeroDivisionError):
    """A rate was requested with an empty denominator."""


class FlowError(RerouteError):
    """A per-flow stage failed; ``key`` names the (product, exporter, importer) flow."""

    def __init__(self, key, cause: BaseException):
        self.key = key
        super().__init__(f"flow {'/'.join(key)}: {type(cause).__name__}: {cause}")
