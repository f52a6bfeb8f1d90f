"""Exception types shared across the package."""


class DomainError(ValueError):
    """An argument lies outside the mathematical domain of the operation."""


class UnsupportedDimensionError(ValueError):
    """The operation is only implemented for specific cross-section dimensions."""


class ValidationError(ValueError):
    """A configuration or input record failed validation before any compute."""


class NonterminationError(RuntimeError):
    """An iterative reduction exceeded its iteration cap."""


class NearSingularError(ValueError):
    """A solve was requested too close to an indicial root.

    Attributes
    ----------
    root : complex
        The offending root.
    """

    def __init__(self, message, root):
        super().__init__(message)
        self.root = root


class ContourOnRootError(ValueError):
    """The requested contour abscissa is not s-regular (a root sits on it)."""


class InvalidEnclosureError(ValueError):
    """A residue circle encloses more than the intended indicial root."""


class PoleError(ValueError):
    """A regularized pairing was requested at (or too close to) a pole.

    Attributes
    ----------
    j, k : int
        Pole index and homogeneity degree identifying the pole lambda = h(j-k)/2.
    """

    def __init__(self, message, j, k):
        super().__init__(message)
        self.j = j
        self.k = k


class ConfigurationError(ValueError):
    """A geometric/numeric configuration violates a required precondition."""


class ToleranceError(RuntimeError):
    """A computation finished but failed its accuracy or certificate target."""
