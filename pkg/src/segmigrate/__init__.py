"""Batch migration of fixed-form Fortran 77 with Esope segments to
free-form Fortran 2008."""

from .errors import ConfigError, MigrationError, SourceSpan

__version__ = "0.1.0"

__all__ = ["ConfigError", "MigrationError", "SourceSpan", "__version__"]
