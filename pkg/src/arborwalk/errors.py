"""Exception types shared across the package."""


class CapacityError(Exception):
    """A requested object exceeds a configured size cap."""


class HorizonError(Exception):
    """A light-cone operator was pushed beyond its exactness horizon."""


class ConditioningError(Exception):
    """A linear solve was requested too close to the unit circle."""


class NotLocalizingError(Exception):
    """Orbit closure did not terminate within the dimension bound."""


class SingularParameterError(Exception):
    """Transfer-matrix parameters hit a degenerate denominator."""


class ManifestError(Exception):
    """An experiment manifest failed validation.

    ``field`` carries the dotted path of the offending entry.
    """

    def __init__(self, field, message):
        self.field = field
        super().__init__(f"{field}: {message}")
