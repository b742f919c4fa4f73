"""Exception types shared across the package."""


class ConfigError(Exception):
    """A configuration value or file is invalid or inconsistent."""


class PlanningError(ValueError):
    """Trajectory planning was asked for something it cannot produce."""


class DivergenceError(RuntimeError):
    """Training diverged: loss blew up or parameters went non-finite."""
