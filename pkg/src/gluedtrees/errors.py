"""Exception hierarchy shared by all modules."""


class GluedTreesError(Exception):
    """Base class for every error raised by this package."""


class ParameterError(GluedTreesError, ValueError):
    """Invalid input parameter (B, n, gamma, tau, grid, ...)."""


class GenerationError(GluedTreesError):
    """The random gluing sampler ran out of retries."""


class NumericalError(GluedTreesError, ArithmeticError):
    """An iterative numerical routine failed to converge."""


class InstanceTooLargeError(GluedTreesError):
    """A full-graph computation would exceed the configured node budget."""


class SearchError(GluedTreesError):
    """No hitting peak was found inside the search window."""


class DesignError(GluedTreesError, ValueError):
    """A waveguide layout cannot realize the requested couplings."""


class InputFormatError(GluedTreesError, ValueError):
    """A data file could not be parsed.

    ``lineno`` is the 1-based line of the offending record when known.
    """

    def __init__(self, message, path=None, lineno=None):
        self.path = path
        self.lineno = lineno
        where = ""
        if path is not None:
            where = f"{path}"
            if lineno is not None:
                where += f":{lineno}"
            where += ": "
        super().__init__(where + message)
