"""Exception types shared across the package."""


class ConfigurationError(ValueError):
    """Inconsistent or invalid configuration of a model, method, or scenario."""


class NetworkLoadError(ValueError):
    """A network weight file is malformed or violates an invariant."""


class ScenarioError(ValueError):
    """A scenario file or parameter set is malformed or inconsistent."""
