"""Exception hierarchy shared across the package."""


class OsmiumError(Exception):
    pass


class SpeciesError(OsmiumError, ValueError):
    pass


class OrderingViolation(SpeciesError):
    pass


class TooFewSpecies(SpeciesError):
    pass


class BasisError(OsmiumError, ValueError):
    pass


class NotIdentityForUncharged(BasisError):
    pass


class NotSimpleSalt(BasisError):
    pass


class NotNeutral(BasisError):
    pass


class DependentReactions(BasisError):
    pass


class SingularTransform(BasisError):
    pass


class NonpositiveConcentration(OsmiumError, ValueError):
    pass


class NonpositiveDiffusivity(OsmiumError, ValueError):
    pass


class CholeskyFailure(OsmiumError, ValueError):
    pass


class DomainError(OsmiumError, ValueError):
    """A material model was evaluated outside its declared domain."""

    def __init__(self, message, location=None):
        if location is not None:
            message = f"{message} (at {location})"
        super().__init__(message)
        self.location = location


class UnsupportedOrder(OsmiumError, ValueError):
    pass


class NonpositiveNormalizer(OsmiumError, ValueError):
    pass


class MeshError(OsmiumError, ValueError):
    pass


class ConfigError(OsmiumError, ValueError):
    pass


class NonConvergence(OsmiumError, RuntimeError):
    def __init__(self, message, state=None, history=None):
        super().__init__(message)
        self.state = state
        self.history = history or []


class SingularLinearSystem(OsmiumError, RuntimeError):
    pass


class IllPosedError(OsmiumError, RuntimeError):
    """Raised when a transient run is ill-posed and no override was given."""


class IllPosedWarning(UserWarning):
    """Constraint analysis found a setting without a unique transient solution."""
