"""Exception types shared across the package."""


class ConfigError(ValueError):
    """Invalid or inconsistent run configuration."""


class SolverError(RuntimeError):
    """A solver failed to converge or produced an unusable result."""


class EscapeThresholdError(RuntimeError):
    """Too many trajectories escaped during stochastic evolution."""
