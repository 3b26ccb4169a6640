"""Exception types shared across the package."""


class QmemsimError(Exception):
    """Base class for package errors."""


class ConfigError(QmemsimError):
    """Invalid or unparseable scenario configuration (CLI exit code 2)."""


class FitError(QmemsimError):
    """Numerical failure in a fit or calibration (CLI exit code 3)."""
